"""Multi-trial runs, parameter sweeps and their CSV/text reports."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .certificate import (COMPARATOR, Certificate, EpsSchedule, check_certificate,
                          deviation_term, eps_schedule)
from .config import ExperimentConfig, PolicySpec
from .core import DECODER, ENCODER, MarkovIntentionProcess, sample_intentions
from .mixing import MixingProfile, mixing_profile
from .protocol import best_comparator_loss, regret, run_episode

RUN_COLUMNS = ["trial", "T", "cumulative_loss", "comparator_min", "regret"]
SWEEP_COLUMNS = ["value", "mean_regret", "certificate_margin", "deviation", "M_T"]
SWEEP_PARAMETERS = ("T", "delta", "learning-rate", "transition-flip-p")


def trial_seeds(base_seed: int, trial: int) -> tuple[int, int]:
    """(intention seed, episode seed) for one trial.

    Both come from ``numpy.random.SeedSequence([base_seed, trial])``, so any
    trial can be replayed alone.
    """
    words = np.random.SeedSequence([base_seed, trial]).generate_state(2, np.uint64)
    return int(words[0]), int(words[1])


@dataclass(frozen=True)
class TrialResult:
    trial: int
    horizon: int
    cumulative_loss: float
    comparator_min: float
    regret: float
    eps_sum: float
    certificate: Certificate


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: ExperimentConfig
    mixing: MixingProfile
    lipschitz: float
    deviation: float
    trials: list

    @property
    def regrets(self) -> np.ndarray:
        return np.array([t.regret for t in self.trials])

    @property
    def outperformance_fraction(self) -> float:
        return float(np.mean(self.regrets < 0))

    @property
    def certified_fraction(self) -> float:
        return float(np.mean([t.certificate.holds for t in self.trials]))

    @property
    def mean_margin(self) -> float:
        return float(np.mean([t.certificate.margin for t in self.trials]))

    def summary(self) -> dict:
        r = self.regrets
        return {
            "trials": len(self.trials),
            "T": self.config.horizon,
            "delta": self.config.delta,
            "lipschitz": self.lipschitz,
            "M_T": self.mixing.m_T,
            "deviation": self.deviation,
            "mean_regret": float(r.mean()),
            "min_regret": float(r.min()),
            "max_regret": float(r.max()),
            "outperformance_fraction": self.outperformance_fraction,
            "certified_fraction": self.certified_fraction,
            "mean_margin": self.mean_margin,
        }


def _comparator_eps(cfg: ExperimentConfig, y) -> EpsSchedule:
    return eps_schedule(cfg.process, cfg.loss, cfg.encoders, cfg.h_tilde_table, y, cfg.y_tilde_0,
                        cfg.horizon, cfg.eps_conditioning, cfg.eps_states)


def run_trial(cfg: ExperimentConfig, trial: int, deviation: float,
              fixed_eps: EpsSchedule | None = None) -> TrialResult:
    y_seed, ep_seed = trial_seeds(cfg.seed, trial)
    y = sample_intentions(cfg.process, cfg.horizon, y_seed)
    traj = run_episode(cfg.setup, cfg.policy(ENCODER), cfg.policy(DECODER), y, ep_seed)
    comp_min, _ = best_comparator_loss(y, cfg.encoders, cfg.h_tilde_table, cfg.y_tilde_0,
                                       cfg.loss, static=cfg.static_comparator)
    eps = fixed_eps if fixed_eps is not None else _comparator_eps(cfg, y)
    cert = check_certificate(traj.cumulative_loss, deviation, eps.total, cfg.delta)
    return TrialResult(trial, cfg.horizon, traj.cumulative_loss, comp_min,
                       regret(traj, comp_min), eps.total, cert)


def _run_trial_star(args):
    return run_trial(*args)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    profile = mixing_profile(cfg.process, cfg.horizon)
    lip = cfg.lipschitz
    dev = deviation_term(lip, profile.m_T, cfg.horizon, cfg.delta)
    # comparator conditioning does not read y, so one schedule serves all trials
    fixed = _comparator_eps(cfg, None) if cfg.eps_conditioning == COMPARATOR else None
    jobs = [(cfg, k, dev, fixed) for k in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_trial_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [run_trial(*job) for job in jobs]
    results.sort(key=lambda r: r.trial)
    return ExperimentReport(cfg, profile, lip, dev, results)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def run_csv(report: ExperimentReport) -> str:
    return write_csv(((t.trial, t.horizon, t.cumulative_loss, t.comparator_min, t.regret)
                      for t in report.trials), RUN_COLUMNS)


def summary_text(report: ExperimentReport) -> str:
    return "".join(f"{k}: {_fmt(v)}\n" for k, v in report.summary().items())


def flip_chain(p: float, labels=None) -> MarkovIntentionProcess:
    """Two-state chain that switches symbol with probability ``p``, started uniformly."""
    return MarkovIntentionProcess.from_matrix([0.5, 0.5], [[1 - p, p], [p, 1 - p]], labels)


def _with_parameter(cfg: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    if parameter == "T":
        if int(value) != value or value < 1:
            raise ValueError(f"T must be a positive integer, got {value}")
        return cfg.replace(horizon=int(value))
    if parameter == "delta":
        if not 0 < value <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {value}")
        return cfg.replace(delta=float(value))
    if parameter == "learning-rate":
        def lr(spec: PolicySpec) -> PolicySpec:
            return PolicySpec(spec.rule, spec.index, float(value))
        return cfg.replace(encoder_policy=lr(cfg.encoder_policy), decoder_policy=lr(cfg.decoder_policy))
    if parameter == "transition-flip-p":
        if cfg.process.n_states != 2:
            raise ValueError("transition-flip-p needs a 2-symbol alphabet")
        if not 0 <= value <= 1:
            raise ValueError(f"flip probability must lie in [0, 1], got {value}")
        p = float(value)
        proc = MarkovIntentionProcess(cfg.process.alphabet, cfg.process.initial, [[1 - p, p], [p, 1 - p]])
        return cfg.replace(process=proc)
    raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {', '.join(SWEEP_PARAMETERS)}")


def sweep(cfg: ExperimentConfig, parameter: str, values, workers: int = 1) -> list:
    """One :func:`run_experiment` per value; returns ``(value, report)`` pairs."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {', '.join(SWEEP_PARAMETERS)}")
    return [(v, run_experiment(_with_parameter(cfg, parameter, v), workers)) for v in values]


def sweep_csv(results) -> str:
    return write_csv(((v, float(r.regrets.mean()), r.mean_margin, r.deviation, r.mixing.m_T)
                      for v, r in results), SWEEP_COLUMNS)


def eps_csv(schedule: EpsSchedule) -> str:
    return write_csv(((t + 1, float(schedule.values[t]), int(schedule.states[t]),
                       int(schedule.encoders[t]), int(schedule.outputs[t]))
                      for t in range(schedule.values.size)),
                     ["t", "eps", "comparator_state", "encoder", "output"])


def mixing_csv(profile: MixingProfile) -> str:
    return write_csv(profile.pairs(), ["i", "j", "eta"])

