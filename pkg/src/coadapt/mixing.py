"""Mixing coefficients of the intention process.

``eta[i, j]`` is the worst total variation distance between the laws of the
block ``(Y_j, ..., Y_T)`` obtained by changing ``Y_i`` while holding a
positive-probability prefix fixed.  Indices are 1-based at the API, matching
time steps ``t = 1..T``; arrays are 0-based internally.

Two routes are provided.  For a Markov chain the block law given ``Y_i = w``
is the ``(j-i)``-step row of ``w`` followed by a kernel shared by every ``w``,
so the block distance collapses to a distance between rows of a matrix power
(:func:`eta_bar_markov`).  :func:`eta_bar_bruteforce` enumerates whole
sequences and makes no use of that argument; it exists to check the first.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import PROB_TOL, MarkovIntentionProcess, require_valid

BRUTE_FORCE_LIMIT = 10**6
NORMALIZATION_TOL = 1e-9


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if abs(v.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"{name} sums to {v.sum():.12g}, not 1")
    return 0.5 * float(np.abs(p - q).sum())


def transition_power(transition: np.ndarray, k: int) -> np.ndarray:
    """``transition**k`` by repeated multiplication.

    Row sums that drift by less than ``PROB_TOL`` are renormalized; anything
    larger raises instead of being hidden.
    """
    n = transition.shape[0]
    out = np.eye(n)
    for _ in range(k):
        out = _checked_rows(out @ transition)
    return out


def _checked_rows(m: np.ndarray) -> np.ndarray:
    sums = m.sum(axis=1)
    drift = np.abs(sums - 1.0).max()
    if drift > PROB_TOL:
        raise FloatingPointError(f"row sums drifted by {drift:.3g} in matrix power")
    if drift > 0:
        m = m / sums[:, None]
    return m


def _admissible_pairs(process: MarkovIntentionProcess, i: int) -> list[tuple[int, int]]:
    """Pairs ``w < w'`` that can both follow one positive-probability prefix of length ``i-1``."""
    if i == 1:
        groups = [process.initial]
    else:
        before = process.marginals(i - 1)[-1]
        groups = [process.transition[a] for a in np.flatnonzero(before > 0)]
    pairs = set()
    for law in groups:
        support = np.flatnonzero(law > 0)
        pairs.update(combinations(support.tolist(), 2))
    return sorted(pairs)


def _check_indices(i: int, j: int, horizon: int | None = None) -> None:
    if not 1 <= i < j:
        raise ValueError(f"need 1 <= i < j, got i={i}, j={j}")
    if horizon is not None and j > horizon:
        raise ValueError(f"j={j} exceeds horizon {horizon}")


def eta_bar_markov(process: MarkovIntentionProcess, i: int, j: int) -> float:
    _check_indices(i, j)
    require_valid(process)
    pairs = _admissible_pairs(process, i)
    if not pairs:
        return 0.0
    rows = transition_power(process.transition, j - i)
    return _max_row_tv(rows, pairs)


def _max_row_tv(rows: np.ndarray, pairs) -> float:
    best = 0.0
    for w, v in pairs:
        best = max(best, 0.5 * float(np.abs(rows[w] - rows[v]).sum()))
    return min(best, 1.0)


def _joint_law(process: MarkovIntentionProcess, horizon: int) -> np.ndarray:
    """Probability of every sequence, as an array with one axis per time step."""
    n = process.n_states
    if n**horizon > BRUTE_FORCE_LIMIT:
        raise ValueError(f"|Y|^T = {n}^{horizon} exceeds the enumeration limit {BRUTE_FORCE_LIMIT}")
    joint = process.initial.copy()
    for _ in range(1, horizon):
        joint = joint[..., None] * process.transition[(None,) * (joint.ndim - 1)]
    return joint


def _eta_from_joint(joint: np.ndarray, i: int, j: int) -> float:
    n = joint.shape[0]
    horizon = joint.ndim
    # marginalise the gap Y_{i+1}..Y_{j-1}, keep prefix, Y_i and the block
    law = joint.sum(axis=tuple(range(i, j - 1))) if j - 1 > i else joint
    law = law.reshape(n ** (i - 1), n, n ** (horizon - j + 1))
    best = 0.0
    for prefix in law:
        mass = prefix.sum(axis=1)
        live = np.flatnonzero(mass > 0)
        if live.size < 2:
            continue
        cond = prefix[live] / mass[live, None]
        for a, b in combinations(range(live.size), 2):
            best = max(best, 0.5 * float(np.abs(cond[a] - cond[b]).sum()))
    return min(best, 1.0)


def eta_bar_bruteforce(process: MarkovIntentionProcess, i: int, j: int, horizon: int) -> float:
    _check_indices(i, j, horizon)
    require_valid(process)
    return _eta_from_joint(_joint_law(process, horizon), i, j)


@dataclass(frozen=True, eq=False)
class MixingProfile:
    horizon: int
    eta: np.ndarray            # (T, T); eta[i-1, j-1] for i < j, zero elsewhere
    m_t_per_row: np.ndarray    # entry t-1 is 1 + sum_{j>t} eta[t, j]
    m_T: float

    def pairs(self):
        for i in range(1, self.horizon + 1):
            for j in range(i + 1, self.horizon + 1):
                yield i, j, float(self.eta[i - 1, j - 1])


EXACT = "exact"
BRUTE = "brute"


def mixing_profile(process: MarkovIntentionProcess, horizon: int, method: str = EXACT) -> MixingProfile:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    require_valid(process)
    eta = np.zeros((horizon, horizon))
    if method in (EXACT, "exact-markov"):
        powers = [np.eye(process.n_states)]
        for _ in range(1, horizon):
            powers.append(_checked_rows(powers[-1] @ process.transition))
        for i in range(1, horizon):
            pairs = _admissible_pairs(process, i)
            if not pairs:
                continue
            for j in range(i + 1, horizon + 1):
                eta[i - 1, j - 1] = _max_row_tv(powers[j - i], pairs)
    elif method in (BRUTE, "brute-force"):
        joint = _joint_law(process, horizon)
        for i in range(1, horizon):
            for j in range(i + 1, horizon + 1):
                eta[i - 1, j - 1] = _eta_from_joint(joint, i, j)
    else:
        raise ValueError(f"unknown method {method!r}; use 'exact' or 'brute'")
    rows = 1.0 + eta.sum(axis=1)
    return MixingProfile(horizon, eta, rows, float(rows.max()))
