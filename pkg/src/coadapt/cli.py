"""Command line entry point: ``coadapt {run,mixing,certify,validate-bound,sweep}``.

Exit codes: 0 success, 1 invalid config or arguments, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .certificate import check_certificate, deviation_term, eps_schedule, validate_theorem1
from .config import CONFIG_ENV, ConfigError, load_config
from .core import DECODER, ENCODER, sample_intentions
from .mixing import mixing_profile
from .protocol import best_comparator_loss, regret, run_episode

log = logging.getLogger("coadapt")


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"experiment YAML (default: ${CONFIG_ENV})")
    common.add_argument("--seed", type=int, help="override the base seed")
    common.add_argument("--csv", help="write CSV output here")
    common.add_argument("--quiet", action="store_true", help="suppress stdout summaries")
    common.add_argument("--workers", type=int, default=1, help="processes for independent trials")

    parser = argparse.ArgumentParser(prog="coadapt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="simulate co-adaptive episodes and regret")
    p.add_argument("--trials", type=int)
    p.add_argument("--static-comparator", action="store_true",
                   help="compare against the best single encoder instead of the best sequence")

    p = sub.add_parser("mixing", parents=[common], help="print the eta matrix and M_T")
    p.add_argument("--method", choices=["exact", "brute"], default="exact")

    p = sub.add_parser("certify", parents=[common], help="evaluate the co-adaptation certificate")
    p.add_argument("--report", help="text summary path; per-step eps goes to --csv")

    p = sub.add_parser("validate-bound", parents=[common], help="Monte Carlo check of the tail bound")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--eps-grid", type=_float_list, required=True)
    p.add_argument("--encoder", type=int, default=0, help="comparator encoder held at every step")

    p = sub.add_parser("sweep", parents=[common], help="rerun the experiment across parameter values")
    p.add_argument("--param", required=True, choices=ex.SWEEP_PARAMETERS)
    p.add_argument("--values", type=_float_list, required=True)
    return parser


def _load(args):
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        raise UsageError(f"no config given (use --config or set ${CONFIG_ENV})")
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    cfg = load_config(path)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _emit(args, text: str) -> None:
    if not args.quiet:
        sys.stdout.write(text)


def _write(path, text: str) -> None:
    Path(path).write_text(text)


def cmd_run(args, cfg) -> None:
    if args.trials is not None:
        if args.trials < 1:
            raise UsageError("--trials must be >= 1")
        cfg = cfg.replace(trials=args.trials)
    if args.static_comparator:
        cfg = cfg.replace(static_comparator=True)
    report = ex.run_experiment(cfg, args.workers)
    if args.csv:
        _write(args.csv, ex.run_csv(report))
    _emit(args, ex.summary_text(report))


def cmd_mixing(args, cfg) -> None:
    profile = mixing_profile(cfg.process, cfg.horizon, args.method)
    if args.csv:
        _write(args.csv, ex.mixing_csv(profile))
    with np.printoptions(precision=6, suppress=True, linewidth=120):
        _emit(args, f"eta ({args.method}):\n{profile.eta}\nM_T: {profile.m_T!r}\n")


def cmd_certify(args, cfg) -> None:
    y_seed, ep_seed = ex.trial_seeds(cfg.seed, 0)
    y = sample_intentions(cfg.process, cfg.horizon, y_seed)
    traj = run_episode(cfg.setup, cfg.policy(ENCODER), cfg.policy(DECODER), y, ep_seed)
    profile = mixing_profile(cfg.process, cfg.horizon)
    dev = deviation_term(cfg.lipschitz, profile.m_T, cfg.horizon, cfg.delta)
    sched = eps_schedule(cfg.process, cfg.loss, cfg.encoders, cfg.h_tilde_table, y, cfg.y_tilde_0,
                         cfg.horizon, cfg.eps_conditioning, cfg.eps_states)
    cert = check_certificate(traj.cumulative_loss, dev, sched.total, cfg.delta)
    comp_min, _ = best_comparator_loss(y, cfg.encoders, cfg.h_tilde_table, cfg.y_tilde_0, cfg.loss,
                                       static=cfg.static_comparator)
    lines = [
        f"empirical_loss: {cert.empirical_loss!r}",
        f"deviation: {cert.deviation!r}",
        f"eps_sum: {cert.eps_sum!r}",
        f"delta: {cert.delta!r}",
        f"holds: {'true' if cert.holds else 'false'}",
        f"margin: {cert.margin!r}",
        f"lipschitz: {cfg.lipschitz!r}",
        f"M_T: {profile.m_T!r}",
        f"eps_conditioning: {sched.conditioning}",
        f"eps_states: {sched.state_mode}",
        f"comparator_min: {comp_min!r}",
        f"regret: {regret(traj, comp_min)!r}",
    ]
    text = "\n".join(lines) + "\n"
    if args.report:
        _write(args.report, text)
    if args.csv:
        _write(args.csv, ex.eps_csv(sched))
    _emit(args, text)


def cmd_validate_bound(args, cfg) -> None:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if not 0 <= args.encoder < len(cfg.encoders):
        raise UsageError(f"--encoder must lie in 0..{len(cfg.encoders) - 1}")
    if any(e <= 0 for e in args.eps_grid):
        raise UsageError("--eps-grid values must be positive")
    report = validate_theorem1(cfg.process, cfg.loss, cfg.encoders, cfg.h_tilde_table,
                               [args.encoder] * cfg.horizon, cfg.y_tilde_0, args.trials,
                               args.eps_grid, cfg.seed, lipschitz=cfg.lipschitz)
    rows = [(r.eps, r.empirical_tail, r.bound, r.trials, r.std_error) for r in report.rows]
    text = ex.write_csv(rows, ["eps", "empirical_tail", "bound", "trials", "std_error"])
    if args.csv:
        _write(args.csv, text)
    _emit(args, f"E[psi]: {report.expected_psi!r}\nlipschitz: {report.lipschitz!r}\n"
                f"M_T: {report.m_T!r}\n{text}")


def cmd_sweep(args, cfg) -> None:
    try:
        results = ex.sweep(cfg, args.param, args.values, args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    text = ex.sweep_csv(results)
    if args.csv:
        _write(args.csv, text)
    _emit(args, text)


COMMANDS = {
    "run": cmd_run,
    "mixing": cmd_mixing,
    "certify": cmd_certify,
    "validate-bound": cmd_validate_bound,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        log.error("%s", exc)
        return 1
    except UsageError as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.error("runtime error: %s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
