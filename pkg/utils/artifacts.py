"""
Persistence of run artifacts: JSON documents, trajectory and rate-table CSV files, run manifests.

Floats are written with ``repr``, the shortest decimal that reads back to the same double,
so write -> read -> write is byte-identical.
"""

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

TRAJECTORY_HEADER = ["step", "time", "particle", "coord", "value"]


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def format_float(value: float) -> str:
    return repr(float(value))


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2) + "\n"


def write_json(path: str, data: Any) -> str:
    """
    Write a JSON document.

    Args:
        path: Destination file
        data: JSON-serializable object

    Returns:
        The text that was written
    """
    text = dump_json(data)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return text


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def content_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_trajectory_csv(path: str, times: np.ndarray, values: np.ndarray) -> None:
    """
    One row per scalar: ``step,time,particle,coord,value``.

    Args:
        path: Destination file
        times: Time of each step index (for noise files, the left endpoint of the increment)
        values: Array indexed [step][particle][coordinate]
    """
    n_steps, n_particles, dim = values.shape
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for k in range(n_steps):
            time = format_float(times[k])
            for i in range(n_particles):
                for j in range(dim):
                    writer.writerow([k, time, i, j, format_float(values[k, i, j])])


def read_trajectory_csv(path: str, n_steps: int, n_particles: int, dim: int) -> np.ndarray:
    """
    Read a trajectory CSV into an array indexed [step][particle][coordinate].

    Raises:
        ValueError: on a wrong header, out-of-range indices or missing entries
    """
    values = np.full((n_steps, n_particles, dim), np.nan)
    seen = 0
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRAJECTORY_HEADER)}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            try:
                k, i, j = int(row[0]), int(row[2]), int(row[3])
                values[k, i, j] = float(row[4])
            except (IndexError, ValueError) as e:
                raise ValueError(f"{path}:{line_no}: malformed row {row!r} ({e})") from e
            seen += 1
    if seen != values.size or np.isnan(values).any():
        raise ValueError(f"{path}: expected {values.size} entries, found {seen} rows with gaps")
    return values


def write_rows_csv(path: str, header: Sequence[str], rows: Iterable[Dict[str, Any]]) -> None:
    """Write dict rows in ``header`` order; floats use the round-trip format."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(row[h]) if isinstance(row[h], float) else row[h] for h in header])


def read_rows_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


@dataclass
class RunManifest:
    """Provenance record written next to every run's outputs."""

    tool_version: str
    config_digest: str
    master_seed: int
    subcommand: str
    started_at: str
    finished_at: Optional[str] = None

    def finish(self) -> None:
        self.finished_at = utc_now()

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "manifest.json")
        write_json(path, asdict(self))
        return path
