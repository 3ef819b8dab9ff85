"""Tests for shared plumbing: linear algebra, seeding, settings, artifacts and errors."""

import os
import sys
from datetime import datetime

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from utils.artifacts import (
    RunManifest,
    content_digest,
    format_float,
    read_json,
    read_trajectory_csv,
    utc_now,
    write_trajectory_csv,
)
from utils.errors import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_VERIFICATION,
    ConfigError,
    PreconditionError,
    SingularGram,
    VerificationFailure,
)
from utils.linalg import SymMatrix, condition_number, spectral_norm_sym, sym_eigen, sym_solve
from utils.seeding import MASK64, derive_stream_seed, particle_generators, splitmix64, stream_generator
from utils.settings import THREADS_ENV, default_threads, resolve_threads


class TestSymMatrix:
    """Test the immutable symmetric matrix type."""

    def test_rejects_asymmetric_input(self):
        """Test that an asymmetric matrix is refused with the offending entry named."""
        with pytest.raises(ValueError, match=r"entry \[0\]\[1\]"):
            SymMatrix(np.array([[1.0, 2.0], [3.0, 1.0]]))

    def test_rejects_non_square(self):
        """Test that non-square input is refused."""
        with pytest.raises(ValueError):
            SymMatrix(np.ones((2, 3)))

    def test_entries_are_read_only(self):
        """Test that stored entries cannot be mutated."""
        m = SymMatrix.identity(3)
        with pytest.raises(ValueError):
            m.entries[0, 0] = 5.0

    def test_symmetrize(self):
        """Test that symmetrize averages a matrix with its transpose."""
        m = SymMatrix.symmetrize([[1.0, 2.0], [4.0, 3.0]])
        assert m.to_list() == [[1.0, 3.0], [3.0, 3.0]]

    def test_does_not_alias_input(self):
        """Test that later changes to the source array do not leak in."""
        src = np.eye(2)
        m = SymMatrix(src)
        src[0, 0] = 7.0
        assert m.entries[0, 0] == 1.0


class TestSymEigen:
    """Test the Jacobi eigensolver."""

    def test_identity(self):
        """Test the identity matrix."""
        w, v = sym_eigen(SymMatrix.identity(2))
        np.testing.assert_allclose(w, [1.0, 1.0])
        np.testing.assert_allclose(np.abs(v), np.eye(2))

    def test_diagonal(self):
        """Test that a diagonal matrix is returned sorted, eigenvectors being coordinate axes."""
        w, v = sym_eigen(SymMatrix.diag([1.0, 2.0]))
        np.testing.assert_allclose(w, [2.0, 1.0])
        np.testing.assert_allclose(np.abs(v), [[0.0, 1.0], [1.0, 0.0]])

    def test_two_by_two(self):
        """Test [[2,1],[1,2]] whose characteristic polynomial is x^2 - 4x + 3."""
        w, v = sym_eigen(SymMatrix(np.array([[2.0, 1.0], [1.0, 2.0]])))
        np.testing.assert_allclose(w, [3.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(np.abs(v[:, 0]), [2**-0.5, 2**-0.5], atol=1e-14)

    def test_random_matches_lapack(self):
        """Test eigenvalues, orthogonality and reconstruction on random symmetric matrices."""
        rng = np.random.default_rng(4)
        for dim in (3, 8, 16):
            a = rng.standard_normal((dim, dim))
            m = SymMatrix.symmetrize(a)
            w, v = sym_eigen(m)
            np.testing.assert_allclose(w, np.sort(np.linalg.eigvalsh(m.entries))[::-1], atol=1e-10)
            np.testing.assert_allclose(v.T @ v, np.eye(dim), atol=1e-10)
            np.testing.assert_allclose(v @ np.diag(w) @ v.T, m.entries, atol=1e-10)

    def test_spectral_norm_and_condition(self):
        """Test the spectral norm and condition number helpers."""
        m = SymMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert spectral_norm_sym(m) == pytest.approx(1.0)
        assert condition_number(m) == float("inf")
        assert condition_number(SymMatrix.diag([4.0, 2.0])) == pytest.approx(2.0)


class TestSymSolve:
    """Test the positive definite solver."""

    def test_identity(self):
        """Test that the identity returns the right-hand side."""
        rhs = np.array([[1.5, -2.0], [0.25, 3.0]])
        np.testing.assert_allclose(sym_solve(SymMatrix.identity(2), rhs), rhs)

    def test_diagonal_inverse(self):
        """Test a diagonal system."""
        np.testing.assert_allclose(sym_solve(SymMatrix.diag([2.0, 4.0]), np.eye(2)), np.diag([0.5, 0.25]))

    def test_two_by_two_inverse(self):
        """Test the hand inverse of [[2,1],[1,2]]."""
        inv = sym_solve(SymMatrix(np.array([[2.0, 1.0], [1.0, 2.0]])), np.eye(2))
        np.testing.assert_allclose(inv, np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3.0, atol=1e-15)

    def test_vector_rhs(self):
        """Test that a vector right-hand side keeps its shape."""
        x = sym_solve(SymMatrix.diag([2.0, 4.0]), np.array([1.0, 1.0]))
        assert x.shape == (2,)
        np.testing.assert_allclose(x, [0.5, 0.25])

    def test_singular(self):
        """Test that a singular matrix raises SingularGram."""
        with pytest.raises(SingularGram) as info:
            sym_solve(SymMatrix(np.ones((2, 2))), np.eye(2))
        assert info.value.condition > 1e12


class TestSeeding:
    """Test stream key derivation and generators."""

    def test_splitmix64_golden(self):
        """Test the first SplitMix64 output for state zero."""
        assert splitmix64(0) == 0xE220A8397B1DCDAF

    @pytest.mark.parametrize(
        "triple, expected",
        [
            ((0, 0, 0), 2558736989570252433),
            ((12345, 7, 3), 1784777464522397533),
            ((20240101, 1, 2), 4196817386265556065),
        ],
    )
    def test_derive_stream_seed_golden(self, triple, expected):
        """Test frozen stream keys."""
        assert derive_stream_seed(*triple) == expected

    def test_deterministic_and_in_range(self):
        """Test that keys repeat and fit in 64 bits."""
        assert derive_stream_seed(99, 4, 5) == derive_stream_seed(99, 4, 5)
        assert 0 <= derive_stream_seed(MASK64, MASK64, MASK64) <= MASK64

    def test_no_collisions(self):
        """Test that nearby triples give distinct keys."""
        keys = {derive_stream_seed(s, r, p) for s in range(4) for r in range(16) for p in range(64)}
        assert len(keys) == 4 * 16 * 64
        assert derive_stream_seed(1, 0, 0) != derive_stream_seed(1, 0, 1)

    def test_streams_reproduce(self):
        """Test that a stream keyed twice yields the same draws."""
        a = stream_generator(derive_stream_seed(3, 0, 0)).standard_normal(5)
        b = stream_generator(derive_stream_seed(3, 0, 0)).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_particle_generators_differ(self):
        """Test that particle streams are distinct."""
        gens = particle_generators(3, 0, 3)
        draws = [g.standard_normal(4) for g in gens]
        assert not np.array_equal(draws[0], draws[1])
        assert not np.array_equal(draws[1], draws[2])


class TestSettings:
    """Test environment-driven defaults."""

    def test_threads_from_env(self, monkeypatch):
        """Test that the thread default comes from the environment."""
        monkeypatch.setenv(THREADS_ENV, "4")
        assert default_threads() == 4
        assert resolve_threads(None) == 4
        assert resolve_threads(2) == 2

    def test_invalid_threads_fall_back(self, monkeypatch):
        """Test that an unparsable value falls back to one thread."""
        monkeypatch.setenv(THREADS_ENV, "many")
        assert default_threads() == 1


class TestArtifacts:
    """Test CSV and JSON persistence."""

    def test_format_float_round_trips(self):
        """Test the shortest round-trip representation."""
        for value in (0.1, 1e-5, 1.0 / 3.0, -2.5e300, 0.0):
            assert float(format_float(value)) == value
        assert format_float(0.1) == "0.1"

    def test_trajectory_csv_round_trip(self, tmp_path):
        """Test that write, read, write is byte-identical."""
        rng = np.random.default_rng(0)
        values = rng.standard_normal((4, 3, 2))
        times = np.arange(4) * 0.25
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        write_trajectory_csv(str(first), times, values)
        back = read_trajectory_csv(str(first), 4, 3, 2)
        np.testing.assert_array_equal(back, values)
        write_trajectory_csv(str(second), times, back)
        assert first.read_bytes() == second.read_bytes()
        assert first.read_text().splitlines()[0] == "step,time,particle,coord,value"

    def test_trajectory_csv_missing_rows(self, tmp_path):
        """Test that an incomplete file is rejected."""
        path = tmp_path / "short.csv"
        path.write_text("step,time,particle,coord,value\n0,0.0,0,0,1.0\n")
        with pytest.raises(ValueError):
            read_trajectory_csv(str(path), 2, 1, 1)

    def test_trajectory_csv_bad_header(self, tmp_path):
        """Test that a foreign header is rejected."""
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ValueError, match="header"):
            read_trajectory_csv(str(path), 1, 1, 1)

    def test_manifest(self, tmp_path):
        """Test that the manifest records provenance."""
        manifest = RunManifest("0.1.0", content_digest("{}"), 7, "simulate", utc_now())
        manifest.finish()
        data = read_json(manifest.write(str(tmp_path)))
        assert data["master_seed"] == 7
        assert data["config_digest"] == content_digest("{}")
        assert datetime.fromisoformat(data["finished_at"]) >= datetime.fromisoformat(data["started_at"])
        assert data["started_at"].endswith("+00:00")


class TestErrors:
    """Test exit codes and messages."""

    def test_exit_codes(self):
        """Test the exit code mapping."""
        assert ConfigError("x").exit_code == EXIT_CONFIG
        assert PreconditionError(["N ≥ 400"]).exit_code == EXIT_CONFIG
        assert SingularGram(1e13).exit_code == EXIT_NUMERICAL
        assert VerificationFailure("x").exit_code == EXIT_VERIFICATION

    def test_config_error_location(self):
        """Test that key path and line appear in the message."""
        err = ConfigError("bad value", "system.theta", 4)
        assert "system.theta" in str(err)
        assert "line 4" in str(err)


if __name__ == "__main__":
    pytest.main([__file__])
