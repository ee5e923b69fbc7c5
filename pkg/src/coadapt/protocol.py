"""Closed-loop co-adaptation episodes and the fixed-decoder comparator.

At step ``t`` the encoder side picks ``g_t`` and emits ``z_t = g_t(yhat_{t-1})``;
the decoder side picks ``h_t`` and outputs ``yhat_t = h_t(z_t)``.  The decoder
never sees the intention ``y_t``: both sides learn only from the scalar loss
``L(yhat_t, y_t)`` revealed after the step.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .core import DECODER, ENCODER, FunctionClass, LossMatrix, composed_tables

FIXED = "fixed"
UNIFORM = "uniform-random"
EXP_WEIGHTS = "exp-weights"
RULES = (FIXED, UNIFORM, EXP_WEIGHTS)

# keep every weight a positive double: exp(-700) is still a normal float
_MAX_LOG_SPREAD = 700.0


def default_learning_rate(n_arms: int, horizon: int) -> float:
    return math.sqrt(math.log(n_arms) / horizon) if n_arms > 1 else 0.0


@dataclass
class Policy:
    """Selection rule for one side of the loop, plus its weight state.

    ``exp-weights`` is the bandit variant: the revealed loss (scaled to
    ``[0, 1]``) is divided by the probability of the arm that was played and
    charged to that arm only.
    """

    side: str
    rule: str
    n_arms: int
    index: int = 0
    learning_rate: Optional[float] = None
    log_weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.side not in (ENCODER, DECODER):
            raise ValueError(f"side must be '{ENCODER}' or '{DECODER}', got {self.side!r}")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.n_arms < 1:
            raise ValueError("policy needs at least one arm")
        if self.rule == FIXED and not 0 <= self.index < self.n_arms:
            raise ValueError(f"fixed index {self.index} outside 0..{self.n_arms - 1}")
        if self.learning_rate is not None and not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ValueError(f"learning rate must be finite and >= 0, got {self.learning_rate}")
        if self.log_weights is None:
            self.log_weights = np.zeros(self.n_arms)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_weights.max())

    def reset(self, horizon: int) -> "Policy":
        fresh = copy.deepcopy(self)
        fresh.log_weights = np.zeros(self.n_arms)
        if fresh.learning_rate is None:
            fresh.learning_rate = default_learning_rate(self.n_arms, horizon)
        return fresh

    def distribution(self) -> np.ndarray:
        if self.rule == FIXED:
            p = np.zeros(self.n_arms)
            p[self.index] = 1.0
            return p
        if self.rule == UNIFORM:
            return np.full(self.n_arms, 1.0 / self.n_arms)
        w = self.weights
        return w / w.sum()

    def choose(self, rng: np.random.Generator) -> tuple[int, float]:
        """Draw an arm; returns it with the probability it had."""
        if self.n_arms == 1 or self.rule == FIXED:
            return (0 if self.n_arms == 1 else self.index), 1.0
        if self.rule == UNIFORM:
            k = min(int(rng.random() * self.n_arms), self.n_arms - 1)
            return k, 1.0 / self.n_arms
        # plain floats: far cheaper than numpy for a handful of arms
        lw = self.log_weights.tolist()
        top = max(lw)
        w = [math.exp(v - top) for v in lw]
        total = sum(w)
        u = rng.random() * total
        acc = 0.0
        for k, wk in enumerate(w):
            acc += wk
            if u < acc:
                return k, wk / total
        return self.n_arms - 1, w[-1] / total

    def update(self, chosen: int, scaled_loss: float, prob: float) -> None:
        if self.rule != EXP_WEIGHTS or not self.learning_rate:
            return
        lw = self.log_weights
        lw[chosen] -= self.learning_rate * scaled_loss / prob
        if lw[chosen] < lw.max() - _MAX_LOG_SPREAD:
            np.maximum(lw, lw.max() - _MAX_LOG_SPREAD, out=lw)


@dataclass(frozen=True, eq=False)
class LoopSetup:
    """Everything an episode needs besides the policies and intentions."""

    encoders: FunctionClass
    decoders: FunctionClass
    loss: LossMatrix
    y_hat_0: int = 0

    def __post_init__(self):
        n = self.loss.size
        if self.encoders.n_inputs != n:
            raise ValueError(f"encoders take {self.encoders.n_inputs} inputs, alphabet has {n}")
        if self.decoders.n_outputs != n:
            raise ValueError(f"decoders produce {self.decoders.n_outputs} symbols, alphabet has {n}")
        if self.encoders.n_outputs != self.decoders.n_inputs:
            raise ValueError("encoder feature alphabet does not match decoder input alphabet")
        if not 0 <= self.y_hat_0 < n:
            raise ValueError(f"y_hat_0={self.y_hat_0} outside alphabet")


@dataclass(frozen=True, eq=False)
class Trajectory:
    horizon: int
    y: np.ndarray
    y_hat: np.ndarray          # yhat_0..yhat_T
    z: np.ndarray
    g_choices: np.ndarray
    h_choices: np.ndarray
    step_losses: np.ndarray
    cumulative_loss: float


def run_episode(setup: LoopSetup, b_policy: Policy, a_policy: Policy,
                intentions: Sequence[int], seed) -> Trajectory:
    y = np.asarray(intentions, dtype=np.int64)
    T = y.size
    if T < 1:
        raise ValueError("empty intention sequence")
    if y.min() < 0 or y.max() >= setup.loss.size:
        raise ValueError("intention outside alphabet")
    if b_policy.side != ENCODER or b_policy.n_arms != len(setup.encoders):
        raise ValueError("encoder policy does not match the encoder class")
    if a_policy.side != DECODER or a_policy.n_arms != len(setup.decoders):
        raise ValueError("decoder policy does not match the decoder class")

    rng = np.random.default_rng(seed)
    b = b_policy.reset(T)
    a = a_policy.reset(T)
    G = setup.encoders.tables
    H = setup.decoders.tables
    L = setup.loss.values
    scale = setup.loss.range_bound or 1.0

    y_hat = np.empty(T + 1, dtype=np.int64)
    y_hat[0] = setup.y_hat_0
    z = np.empty(T, dtype=np.int64)
    g_idx = np.empty(T, dtype=np.int64)
    h_idx = np.empty(T, dtype=np.int64)
    losses = np.empty(T)
    for t in range(T):
        g, pg = b.choose(rng)
        z[t] = G[g, y_hat[t]]
        h, ph = a.choose(rng)
        y_hat[t + 1] = H[h, z[t]]
        losses[t] = L[y_hat[t + 1], y[t]]
        b.update(g, losses[t] / scale, pg)
        a.update(h, losses[t] / scale, ph)
        g_idx[t] = g
        h_idx[t] = h
    return Trajectory(T, y, y_hat, z, g_idx, h_idx, losses, float(losses.sum()))


def comparator_trajectory(encoders: FunctionClass, h_tilde: Sequence[int],
                          encoder_sequence: Sequence[int], y_tilde_0: int) -> np.ndarray:
    """Outputs ``ytilde_0..ytilde_T`` of the fixed decoder; never reads intentions."""
    maps = composed_tables(h_tilde, encoders)
    seq = np.asarray(encoder_sequence, dtype=np.int64)
    if seq.size and (seq.min() < 0 or seq.max() >= len(encoders)):
        raise ValueError("encoder index out of range")
    out = np.empty(seq.size + 1, dtype=np.int64)
    out[0] = y_tilde_0
    for t, k in enumerate(seq):
        out[t + 1] = maps[k, out[t]]
    return out


def comparator_loss(y, loss: LossMatrix, encoders: FunctionClass, h_tilde,
                    encoder_sequence, y_tilde_0: int) -> float:
    """The comparator loss functional: total loss of one fixed-decoder path on ``y``."""
    path = comparator_trajectory(encoders, h_tilde, encoder_sequence, y_tilde_0)
    total = 0.0
    for s, target in zip(path[1:], y):
        total += loss.values[s, target]
    return float(total)


def min_cost_sequence(step_costs: np.ndarray, maps: np.ndarray, start: int,
                      static: bool = False) -> tuple[float, list[int]]:
    """Cheapest encoder sequence through a deterministic state machine.

    ``step_costs[t, s]`` is the cost of landing in state ``s`` at step ``t+1``
    and ``maps[k, s]`` is the next state under encoder ``k``.  Cost-to-come is
    accumulated forwards per state, summing in time order, and each state
    keeps the lexicographically smallest prefix among its cheapest ones, so
    ties resolve toward the lowest encoder index at the earliest step.
    """
    T, n = step_costs.shape
    K = maps.shape[0]
    if static:
        totals = []
        for k in range(K):
            s, total = start, 0.0
            for t in range(T):
                s = maps[k, s]
                total += step_costs[t, s]
            totals.append(total)
        best = int(np.argmin(totals))
        return float(totals[best]), [best] * T

    frontier = {int(start): (0.0, [])}
    for t in range(T):
        nxt = {}
        for s, (cost, prefix) in frontier.items():
            for k in range(K):
                s2 = int(maps[k, s])
                cand = (cost + step_costs[t, s2], prefix + [k])
                if s2 not in nxt or cand < nxt[s2]:
                    nxt[s2] = cand
        frontier = nxt
    total, seq = min(frontier.values())
    return float(total), seq


def best_comparator_loss(y, encoders: FunctionClass, h_tilde, y_tilde_0: int,
                         loss: LossMatrix, static: bool = False) -> tuple[float, list[int]]:
    """Hindsight minimum of the fixed-decoder loss over encoder sequences.

    With ``static=True`` the minimum is over a single encoder held for all steps.
    """
    y = np.asarray(y, dtype=np.int64)
    costs = loss.values[:, y].T        # costs[t, s] = L(s, y_{t+1})
    return min_cost_sequence(costs, composed_tables(h_tilde, encoders), y_tilde_0, static)


def best_comparator_loss_exhaustive(y, encoders: FunctionClass, h_tilde, y_tilde_0: int,
                                    loss: LossMatrix) -> tuple[float, list[int]]:
    """Enumerates all ``|G|^T`` sequences; first minimum in lexicographic order wins."""
    best, arg = math.inf, None
    for seq in product(range(len(encoders)), repeat=len(y)):
        v = comparator_loss(y, loss, encoders, h_tilde, seq, y_tilde_0)
        if v < best:
            best, arg = v, list(seq)
    return best, arg


def regret(trajectory: Trajectory, comparator_min: float) -> float:
    return trajectory.cumulative_loss - comparator_min
