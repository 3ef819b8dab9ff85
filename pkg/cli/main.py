"""
Command-line entry point.

Every run writes its data files, the resolved configuration and a run manifest into
``--out``; errors map to exit codes 2 (configuration or precondition), 3 (numerical)
and 4 (verification failure).
"""

import argparse
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from experiments.runner import coverage_check, rate_study, row_config
from experiments.verification import verify_decoupling, verify_denominator, verify_mean_process, verify_ou_concentration
from particles.estimator import estimate, optimality_gap
from particles.likelihood import log_likelihood
from particles.simulate import simulate_interacting, simulate_ou_euler, simulate_ou_exact
from particles.theory import (
    chi2_log_mgf,
    chi2_mgf_bound,
    coverage_level,
    decoupling_constants,
    denominator_lower_bound_constant,
    eps_lower_limit,
    fluctuation_factor,
    integrated_ou_second_moment,
    martingale_eps_floor,
    ou_moments,
    rate_bound,
    theorem_preconditions,
)
from particles.types import SystemConfig, TrajectoryBundle
from utils.artifacts import (
    RunManifest,
    dump_json,
    read_trajectory_csv,
    utc_now,
    write_json,
    write_rows_csv,
    write_trajectory_csv,
)
from utils.errors import EXIT_CONFIG, EXIT_VERIFICATION, ConfigError, ElasticaError, PreconditionError
from utils.log import configure_logging
from utils.settings import default_log_level, resolve_threads

from . import __version__
from .config import CampaignSection, parse_config, write_resolved_config
from .plots import RATE_TABLE_COLUMNS, write_rate_study_script

logger = logging.getLogger(__name__)

SIMULATORS: Dict[str, Callable[..., TrajectoryBundle]] = {
    "interacting": simulate_interacting,
    "ou-exact": simulate_ou_exact,
    "ou-euler": simulate_ou_euler,
}
VERIFY_KINDS = ["decoupling", "ou-concentration", "coverage", "mean-process", "denominator"]
THEORY_KINDS = ["rate-bound", "ou-moments", "constants", "mgf"]


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", default="runs", help="Output directory (default: runs)")
    common.add_argument("--seed", type=int, help="Master seed, overrides the config")
    common.add_argument("--threads", type=int, help="Worker threads (default: $ELASTICA_MLE_THREADS or 1)")
    common.add_argument("--eps", type=float, help="Confidence parameter, overrides the config")
    common.add_argument("--replicates", type=int, help="Monte Carlo replicates, overrides the config")
    common.add_argument("--enforce-theorem", action="store_true", help="Fail when the rate theorem's hypotheses are violated")
    common.add_argument("--log-level", help="Logging level (default: $ELASTICA_MLE_LOG_LEVEL or INFO)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="elastica-mle", description="Interacting particle simulation and drift estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Simulate trajectories to CSV")
    p.add_argument("--process", choices=sorted(SIMULATORS), default="interacting")
    p.add_argument("--store-noise", action="store_true", help="Also export the noise increments")
    p.add_argument("--replicate", type=int, help="Replicate index selecting the random streams")

    p = sub.add_parser("estimate", parents=[common], help="Estimate Theta from a trajectory CSV")
    p.add_argument("--states", required=True, help="Trajectory CSV written by 'simulate'")
    p.add_argument("--truth", action="store_true", help="Report the spectral error against the config's Theta")

    sub.add_parser("rate-study", parents=[common], help="Error quantiles over an (N, t) grid")

    p = sub.add_parser("verify", parents=[common], help="Monte Carlo check of a concentration statement")
    p.add_argument("kind", choices=VERIFY_KINDS)

    p = sub.add_parser("theory", parents=[common], help="Evaluate closed-form bounds and constants")
    p.add_argument("kind", choices=THEORY_KINDS)
    p.add_argument("--sigma", type=float)
    p.add_argument("--theta1", type=float, help="Largest eigenvalue of Theta")
    p.add_argument("--theta", type=float, help="OU rate for ou-moments")
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--tau2", type=float, default=0.0)
    p.add_argument("--u", type=float)
    return parser


def _load(args: argparse.Namespace) -> Tuple[SystemConfig, CampaignSection]:
    if not args.config:
        raise ConfigError(f"'{args.command}' needs --config")
    system, campaign = parse_config(args.config)
    if args.seed is not None:
        system = system.replace(seed=args.seed)
    updates: Dict[str, Any] = {}
    if args.eps is not None:
        updates["eps"] = args.eps
    if args.replicates is not None:
        updates["n_replicates"] = args.replicates
    if args.threads is not None:
        updates["threads"] = args.threads
    if updates:
        try:
            campaign = CampaignSection.model_validate({**campaign.model_dump(), **updates})
        except ValidationError as e:
            first = e.errors()[0]
            raise ConfigError(first["msg"], "campaign." + ".".join(str(p) for p in first["loc"])) from e
    return system, campaign


def _enforce(configs: Sequence[SystemConfig], eps: float) -> None:
    violations: List[str] = []
    for cfg in configs:
        for v in theorem_preconditions(cfg, eps):
            if v not in violations:
                violations.append(v)
    if violations:
        raise PreconditionError(violations)


def _cmd_simulate(args: argparse.Namespace, system: SystemConfig, campaign: CampaignSection, out: str) -> int:
    store_noise = args.store_noise or campaign.store_noise
    replicate = args.replicate if args.replicate is not None else campaign.replicate
    bundle = SIMULATORS[args.process](system, store_noise=store_noise, replicate=replicate)
    write_trajectory_csv(os.path.join(out, "trajectories.csv"), bundle.times, bundle.states)
    if bundle.noise_increments is not None:
        write_trajectory_csv(os.path.join(out, "noise.csv"), bundle.times[:-1], bundle.noise_increments)
    logger.info("wrote %d steps of %d particles to %s", system.n_steps, system.n_particles, out)
    return 0


def load_bundle(path: str, system: SystemConfig) -> TrajectoryBundle:
    """Rebuild a bundle from a trajectory CSV; the config fixes the grid and shape."""
    try:
        states = read_trajectory_csv(path, system.n_steps + 1, system.n_particles, system.dim)
    except (OSError, ValueError, IndexError) as e:
        raise ConfigError(f"cannot read trajectories: {e}") from e
    times = np.arange(system.n_steps + 1, dtype=np.float64) * system.step_size
    return TrajectoryBundle(system, times, states)


def _cmd_estimate(args: argparse.Namespace, system: SystemConfig, campaign: CampaignSection, out: str) -> int:
    bundle = load_bundle(args.states, system)
    result = estimate(bundle, system.theta if args.truth else None)
    payload = result.as_dict()
    payload["log_likelihood"] = log_likelihood(bundle, result.theta_hat)
    payload["optimality_gap_restricted"] = optimality_gap(bundle, result.theta_hat_restricted)
    write_json(os.path.join(out, "estimate.json"), payload)
    return 0


def _cmd_rate_study(args: argparse.Namespace, system: SystemConfig, campaign: CampaignSection, out: str) -> int:
    if not campaign.grid:
        raise ConfigError("rate-study needs a grid of [N, t] pairs", "campaign.grid")
    if args.enforce_theorem:
        _enforce([row_config(system, n, t) for n, t in campaign.grid], campaign.eps)
    table = rate_study(system, campaign.grid, campaign.n_replicates, campaign.eps, resolve_threads(campaign.threads))
    write_rows_csv(os.path.join(out, "rate_table.csv"), RATE_TABLE_COLUMNS, (row.as_dict() for row in table.rows))
    write_json(os.path.join(out, "rate_table.json"), table.as_dict())
    write_rate_study_script(out, table)
    return 0


def _cmd_verify(args: argparse.Namespace, system: SystemConfig, campaign: CampaignSection, out: str) -> int:
    threads = resolve_threads(campaign.threads)
    r, eps = campaign.n_replicates, campaign.eps
    if args.kind == "coverage":
        report: Any = coverage_check(system, r, eps, threads, strict=args.enforce_theorem)
    elif args.kind == "decoupling":
        report = verify_decoupling(system, r, eps, threads)
    elif args.kind == "ou-concentration":
        report = verify_ou_concentration(system, r, eps, threads)
    elif args.kind == "mean-process":
        report = verify_mean_process(system, r, threads)
    else:
        report = verify_denominator(system, r, eps, threads)
    payload = report.as_dict()
    write_json(os.path.join(out, "verification.json"), payload)
    if not report.passed:
        logger.error("%s verification failed: %s", args.kind, payload["message"])
        return EXIT_VERIFICATION
    return 0


def _require(args: argparse.Namespace, names: Sequence[str]) -> None:
    missing = [f"--{name}" for name in names if getattr(args, name) is None]
    if missing:
        raise ConfigError(f"theory {args.kind} needs " + ", ".join(missing))


def theory_values(args: argparse.Namespace, system: Optional[SystemConfig]) -> Dict[str, Any]:
    """Evaluate the requested closed-form quantity; flags override values taken from the config."""
    if system is not None:
        defaults = {
            "sigma": system.sigma,
            "theta1": system.theta_max,
            "theta": system.theta_max,
            "d": system.dim,
            "n": system.n_particles,
            "t": system.t_final,
        }
        for name, value in defaults.items():
            if getattr(args, name) is None:
                setattr(args, name, value)
    eps = args.eps

    if args.kind == "rate-bound":
        _require(args, ["sigma", "theta1", "d", "n", "t", "eps"])
        value = rate_bound(args.sigma, args.theta1, args.d, args.n, args.t, eps, strict=args.enforce_theorem)
        return {
            "rate_bound": value,
            "coverage_level": coverage_level(eps),
            "coverage_vacuous": 14.0 * eps >= 1.0,
            "eps_lower_limit": eps_lower_limit(args.n),
        }
    if args.kind == "ou-moments":
        _require(args, ["theta", "sigma", "t"])
        mean, variance = ou_moments(args.theta, args.sigma, args.tau2, args.t)
        return {
            "mean": mean,
            "variance": variance,
            "integrated_second_moment": integrated_ou_second_moment(args.theta, args.sigma, args.tau2, args.t),
        }
    if args.kind == "constants":
        _require(args, ["n"])
        if eps is None:
            eps = args.eps = eps_lower_limit(args.n)
        constants = decoupling_constants(eps, args.n)
        return {
            "eps": eps,
            "n": args.n,
            "c1": constants.c1,
            "c2": constants.c2,
            "c": constants.c,
            "fluctuation_factor": fluctuation_factor(args.n, eps),
            "denominator_constant": denominator_lower_bound_constant(),
            "eps_lower_limit": eps_lower_limit(args.n),
            "martingale_eps_floor": martingale_eps_floor(args.n),
        }
    _require(args, ["u"])
    log_mgf = chi2_log_mgf(args.u)
    if args.u <= -0.5:
        return {"u": args.u, "log_mgf": log_mgf, "bound": None, "bound_holds": None}
    bound = chi2_mgf_bound(args.u)
    return {"u": args.u, "log_mgf": log_mgf, "bound": bound, "bound_holds": log_mgf <= bound}


THEORY_INPUTS = ("sigma", "theta1", "theta", "d", "n", "t", "tau2", "u", "eps", "enforce_theorem")


def _cmd_theory(args: argparse.Namespace) -> int:
    system: Optional[SystemConfig] = None
    campaign: Optional[CampaignSection] = None
    if args.config:
        system, campaign = parse_config(args.config)
        if args.seed is not None:
            system = system.replace(seed=args.seed)
    values = theory_values(args, system)
    text = dump_json(values)
    sys.stdout.write(text)
    os.makedirs(args.out, exist_ok=True)
    inputs = {"kind": args.kind, **{name: getattr(args, name) for name in THEORY_INPUTS}}
    digest = write_resolved_config(args.out, system, campaign, inputs)
    write_json(os.path.join(args.out, "theory.json"), values)
    manifest = RunManifest(__version__, digest, system.seed if system else 0, f"theory {args.kind}", utc_now())
    manifest.finish()
    manifest.write(args.out)
    return 0


COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "rate-study": _cmd_rate_study,
    "verify": _cmd_verify,
}


def run(args: argparse.Namespace) -> int:
    if args.command == "theory":
        return _cmd_theory(args)
    system, campaign = _load(args)
    if args.enforce_theorem and args.command != "rate-study":
        _enforce([system], campaign.eps)
    os.makedirs(args.out, exist_ok=True)
    digest = write_resolved_config(args.out, system, campaign)
    subcommand = args.command if args.command != "verify" else f"verify {args.kind}"
    manifest = RunManifest(__version__, digest, system.seed, subcommand, utc_now())
    logger.info("%s: writing outputs to %s", subcommand, args.out)
    status = COMMANDS[args.command](args, system, campaign, args.out)
    manifest.finish()
    manifest.write(args.out)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or default_log_level())
    try:
        return run(args)
    except ElasticaError as e:
        logger.error("%s", e)
        return e.exit_code
    except ValidationError as e:
        logger.error("invalid configuration: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
