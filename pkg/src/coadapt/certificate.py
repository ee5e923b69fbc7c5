"""Concentration bound for the comparator loss and the co-adaptation certificate.

The certificate compares the realised co-adaptive loss, inflated by the
deviation term ``l_B * M_T * sqrt(2 T log(2/delta))``, against the sum of the
per-step minimal expected losses ``eps_t`` available through the fixed decoder.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (FunctionClass, LossMatrix, MarkovIntentionProcess, lipschitz_constant,
                   require_valid, sample_intentions_batch, composed_tables)
from .mixing import mixing_profile
from .protocol import comparator_trajectory, min_cost_sequence

REALIZED = "realized"
COMPARATOR = "comparator"
CONDITIONINGS = (REALIZED, COMPARATOR)

REACHABLE = "reachable"
GREEDY = "greedy"
STATE_MODES = (REACHABLE, GREEDY)


def predictive_law(process: MarkovIntentionProcess, y_prefix: Sequence[int]) -> np.ndarray:
    """Law of ``y_t`` given the realised intentions ``y_1..y_{t-1}``."""
    prefix = [int(v) for v in y_prefix]
    n = process.n_states
    if any(not 0 <= v < n for v in prefix):
        raise ValueError(f"prefix symbol outside 0..{n - 1}")
    if not prefix:
        return process.initial
    prob = process.initial[prefix[0]]
    for a, b in zip(prefix, prefix[1:]):
        prob *= process.transition[a, b]
    if prob <= 0:
        raise ValueError(f"prefix {prefix} has probability zero")
    return process.transition[prefix[-1]]


def _expected_loss(law: np.ndarray, loss: LossMatrix, output: int) -> float:
    row = loss.values[output]
    total = 0.0
    for y in range(law.size):
        total += law[y] * row[y]
    return total


def _best_move(law, loss, maps, states) -> tuple[float, int, int]:
    """Min over (state, encoder) of the expected loss; lowest state, then encoder, on ties."""
    best, arg_s, arg_k = math.inf, -1, -1
    for s in states:
        for k in range(maps.shape[0]):
            v = _expected_loss(law, loss, maps[k, s])
            if v < best:
                best, arg_s, arg_k = v, s, k
    return best, arg_s, arg_k


def eps_t(process: MarkovIntentionProcess, loss: LossMatrix, encoders: FunctionClass,
          h_tilde, y_prefix: Sequence[int], comparator_state: int) -> float:
    require_valid(process)
    law = predictive_law(process, y_prefix)
    maps = composed_tables(h_tilde, encoders)
    if not 0 <= comparator_state < maps.shape[1]:
        raise ValueError(f"comparator state {comparator_state} outside alphabet")
    return _best_move(law, loss, maps, [comparator_state])[0]


@dataclass(frozen=True, eq=False)
class EpsSchedule:
    values: np.ndarray          # eps_1..eps_T
    states: np.ndarray          # comparator state each minimum was taken from
    encoders: np.ndarray        # minimising encoder index per step
    outputs: np.ndarray         # resulting comparator output per step
    conditioning: str
    state_mode: str

    @property
    def total(self) -> float:
        return float(self.values.sum())


def reachable_states(maps: np.ndarray, start: int, horizon: int) -> list[list[int]]:
    """Entry ``t`` lists the comparator outputs attainable after ``t`` steps."""
    out = [[start]]
    for _ in range(horizon - 1):
        nxt = np.unique(maps[:, out[-1]])
        out.append(nxt.tolist())
    return out


def eps_schedule(process: MarkovIntentionProcess, loss: LossMatrix, encoders: FunctionClass,
                 h_tilde, y: Optional[Sequence[int]], y_tilde_0: int, horizon: Optional[int] = None,
                 conditioning: str = COMPARATOR, state_mode: str = REACHABLE) -> EpsSchedule:
    """Per-step minimal expected loss through the fixed decoder.

    ``conditioning`` picks the predictive law of ``y_t``: ``realized`` uses
    the observed previous intention, ``comparator`` the unconditional law of
    ``y_t`` (the comparator reads no intentions).  ``state_mode`` picks the
    comparator states the minimum ranges over: ``greedy`` follows the
    stepwise minimiser from ``y_tilde_0``; ``reachable`` allows every state
    some encoder sequence can reach, which keeps the sum below the minimal
    expected comparator loss.
    """
    if conditioning not in CONDITIONINGS:
        raise ValueError(f"conditioning must be one of {CONDITIONINGS}")
    if state_mode not in STATE_MODES:
        raise ValueError(f"state mode must be one of {STATE_MODES}")
    require_valid(process)
    if y is not None:
        y = np.asarray(y, dtype=np.int64)
        horizon = y.size if horizon is None else horizon
        if y.size != horizon:
            raise ValueError("intention sequence length does not match horizon")
    elif conditioning == REALIZED:
        raise ValueError("realized conditioning needs the intention sequence")
    if horizon is None or horizon < 1:
        raise ValueError("horizon must be >= 1")

    maps = composed_tables(h_tilde, encoders)
    if conditioning == COMPARATOR:
        laws = process.marginals(horizon)
    else:
        laws = [predictive_law(process, y[:t]) for t in range(horizon)]
    reach = reachable_states(maps, y_tilde_0, horizon) if state_mode == REACHABLE else None

    vals = np.empty(horizon)
    states = np.empty(horizon, dtype=np.int64)
    ks = np.empty(horizon, dtype=np.int64)
    outs = np.empty(horizon, dtype=np.int64)
    s = y_tilde_0
    for t in range(horizon):
        candidates = reach[t] if reach is not None else [s]
        vals[t], states[t], ks[t] = _best_move(laws[t], loss, maps, candidates)
        outs[t] = maps[ks[t], states[t]]
        s = outs[t]
    return EpsSchedule(vals, states, ks, outs, conditioning, state_mode)


def deviation_term(lipschitz: float, m_T: float, horizon: int, delta: float) -> float:
    if not 0 < delta <= 2:
        raise ValueError(f"delta must lie in (0, 2], got {delta}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if lipschitz < 0 or m_T < 0:
        raise ValueError("lipschitz constant and M_T must be nonnegative")
    return lipschitz * m_T * math.sqrt(2 * horizon * math.log(2 / delta))


@dataclass(frozen=True)
class Certificate:
    empirical_loss: float
    deviation: float
    eps_sum: float
    delta: float
    holds: bool
    margin: float


def check_certificate(empirical_loss: float, deviation: float, eps_sum: float,
                      delta: float) -> Certificate:
    for name, v in (("empirical_loss", empirical_loss), ("deviation", deviation),
                    ("eps_sum", eps_sum), ("delta", delta)):
        if not math.isfinite(v):
            raise ValueError(f"{name} is not finite")
    if deviation < 0:
        raise ValueError("deviation must be nonnegative")
    margin = eps_sum - empirical_loss - deviation
    return Certificate(float(empirical_loss), float(deviation), float(eps_sum), float(delta),
                       bool(empirical_loss + deviation < eps_sum), float(margin))


def expected_output_costs(process: MarkovIntentionProcess, loss: LossMatrix, horizon: int) -> np.ndarray:
    """``costs[t, o]``: expected loss of outputting ``o`` at step ``t+1``."""
    return process.marginals(horizon) @ loss.values.T


def exact_expected_psi(process: MarkovIntentionProcess, loss: LossMatrix, encoders: FunctionClass,
                       h_tilde, encoder_sequence: Sequence[int], y_tilde_0: int) -> float:
    require_valid(process)
    path = comparator_trajectory(encoders, h_tilde, encoder_sequence, y_tilde_0)[1:]
    costs = expected_output_costs(process, loss, path.size)
    return float(costs[np.arange(path.size), path].sum())


def min_expected_psi(process: MarkovIntentionProcess, loss: LossMatrix, encoders: FunctionClass,
                     h_tilde, y_tilde_0: int, horizon: int) -> tuple[float, list[int]]:
    """Smallest expected comparator loss over encoder sequences (exact DP)."""
    require_valid(process)
    costs = expected_output_costs(process, loss, horizon)
    return min_cost_sequence(costs, composed_tables(h_tilde, encoders), y_tilde_0)


def theorem1_bound(eps: float, horizon: int, lipschitz: float, m_T: float) -> float:
    scale = 2 * horizon * lipschitz**2 * m_T**2
    if scale == 0:
        return 0.0
    return 2 * math.exp(-eps**2 / scale)


@dataclass(frozen=True)
class BoundRow:
    eps: float
    empirical_tail: float
    bound: float
    trials: int
    std_error: float


@dataclass(frozen=True)
class BoundValidationReport:
    rows: list
    expected_psi: float
    lipschitz: float
    m_T: float
    horizon: int

    def violations(self, n_se: float = 3.0) -> list:
        return [r for r in self.rows
                if r.bound <= 1 and r.empirical_tail > r.bound + n_se * r.std_error]


def validate_theorem1(process: MarkovIntentionProcess, loss: LossMatrix, encoders: FunctionClass,
                      h_tilde, encoder_sequence: Sequence[int], y_tilde_0: int, trials: int,
                      eps_grid: Sequence[float], seed, m_T: Optional[float] = None,
                      lipschitz: Optional[float] = None) -> BoundValidationReport:
    """Monte Carlo tail frequencies of the comparator loss against the dependent-McDiarmid bound.

    The mean is computed exactly; only the tail frequency is estimated.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if any(e <= 0 for e in eps_grid):
        raise ValueError("eps grid values must be positive")
    seq = np.asarray(encoder_sequence, dtype=np.int64)
    T = seq.size
    path = comparator_trajectory(encoders, h_tilde, seq, y_tilde_0)[1:]
    mean = exact_expected_psi(process, loss, encoders, h_tilde, seq, y_tilde_0)
    lip = lipschitz_constant(loss) if lipschitz is None else lipschitz
    mt = mixing_profile(process, T).m_T if m_T is None else m_T

    ys = sample_intentions_batch(process, T, trials, np.random.default_rng(seed))
    psi = loss.values[path[None, :], ys].sum(axis=1)
    dev = np.abs(psi - mean)
    rows = []
    for e in eps_grid:
        hits = int(np.count_nonzero(dev > e))
        f = hits / trials
        rows.append(BoundRow(float(e), f, theorem1_bound(e, T, lip, mt), trials,
                             math.sqrt(f * (1 - f) / trials)))
    return BoundValidationReport(rows, mean, lip, mt, T)
