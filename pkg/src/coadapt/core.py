"""Domain types for the closed-loop encoder/decoder setting.

Symbols are integers ``0..n-1``.  Intentions, outputs and features all live in
finite alphabets, and encoders/decoders are lookup tables stored as integer
arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

PROB_TOL = 1e-12

ENCODER = "encoder"
DECODER = "decoder"


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    size: int
    labels: Optional[tuple] = None

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise ValueError(f"alphabet size must be an integer >= 2, got {self.size}")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != self.size:
                raise ValueError(f"expected {self.size} labels, got {len(labels)}")
            if len(set(labels)) != len(labels):
                raise ValueError("alphabet labels must be distinct")
            object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class FeatureAlphabet:
    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"feature alphabet size must be an integer >= 1, got {self.size}")


@dataclass(frozen=True)
class ValidationResult:
    errors: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self):
        return self.ok


@dataclass(frozen=True, eq=False)
class MarkovIntentionProcess:
    """First-order Markov law of the intention sequence.

    ``transition[a, b]`` is ``Pr[y_{t+1} = b | y_t = a]``.  Construction does
    not validate; call :func:`validate_process` (sampling and the mixing code
    do so themselves).
    """

    alphabet: Alphabet
    initial: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "initial", _frozen(self.initial, float))
        object.__setattr__(self, "transition", _frozen(self.transition, float))

    @property
    def n_states(self) -> int:
        return self.alphabet.size

    @classmethod
    def from_matrix(cls, initial, transition, labels=None) -> "MarkovIntentionProcess":
        transition = np.asarray(transition, dtype=float)
        return cls(Alphabet(transition.shape[0], labels), initial, transition)

    def marginals(self, horizon: int) -> np.ndarray:
        """Rows ``t = 0..T-1`` hold the law of ``y_{t+1}``."""
        out = np.empty((horizon, self.n_states))
        out[0] = self.initial
        for t in range(1, horizon):
            out[t] = out[t - 1] @ self.transition
        return out


def validate_process(process: MarkovIntentionProcess) -> ValidationResult:
    errors = []
    n = process.alphabet.size
    init, trans = process.initial, process.transition
    if init.shape != (n,):
        errors.append(f"initial: expected length {n}, got shape {init.shape}")
    if trans.shape != (n, n):
        errors.append(f"transition: expected shape ({n}, {n}), got {trans.shape}")
    if errors:
        return ValidationResult(tuple(errors))

    for name, arr in (("initial", init), ("transition", trans)):
        if not np.all(np.isfinite(arr)):
            errors.append(f"{name}: non-finite entry")
        elif np.any(arr < 0):
            errors.append(f"{name}: negative entry {arr.min():g}")
        elif np.any(arr > 1):
            errors.append(f"{name}: entry above 1 ({arr.max():g})")
    if abs(init.sum() - 1.0) > PROB_TOL:
        errors.append(f"initial: sums to {init.sum():.15g}, not 1")
    for a, row in enumerate(trans):
        s = row.sum()
        if abs(s - 1.0) > PROB_TOL:
            errors.append(f"transition[{a}]: row sums to {s:.15g}, not 1")
    return ValidationResult(tuple(errors))


def require_valid(process: MarkovIntentionProcess) -> None:
    result = validate_process(process)
    if not result.ok:
        raise ValueError("invalid intention process: " + "; ".join(result.errors))


def _cumulative(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return c


def sample_intentions_batch(process: MarkovIntentionProcess, horizon: int, n: int,
                            rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` independent intention sequences, shape ``(n, horizon)``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    require_valid(process)
    u = rng.random((n, horizon))
    cum_init = _cumulative(process.initial)
    cum_trans = _cumulative(process.transition)
    y = np.empty((n, horizon), dtype=np.int64)
    # inverse-CDF: count thresholds strictly below u
    y[:, 0] = (u[:, 0, None] >= cum_init[None, :]).sum(axis=1)
    for t in range(1, horizon):
        y[:, t] = (u[:, t, None] >= cum_trans[y[:, t - 1]]).sum(axis=1)
    return y


def sample_intentions(process: MarkovIntentionProcess, horizon: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return sample_intentions_batch(process, horizon, 1, rng)[0]


def hamming_distance(x: Sequence[int], y: Sequence[int]) -> int:
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return int(np.count_nonzero(x != y))


@dataclass(frozen=True, eq=False)
class LossMatrix:
    """``values[a, b]`` is the loss of predicting ``a`` when the intention is ``b``."""

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values, float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError(f"loss matrix must be square, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("loss matrix has non-finite entries")
        if np.any(vals < 0):
            raise ValueError("loss matrix has negative entries")
        object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def range_bound(self) -> float:
        return float(self.values.max())

    @classmethod
    def zero_one(cls, n: int) -> "LossMatrix":
        return cls(1.0 - np.eye(n))


def lipschitz_constant(loss: LossMatrix, override: Optional[float] = None) -> float:
    """Hamming-Lipschitz constant of the comparator loss functional.

    The comparator output path never reads the intentions, so changing one
    intention changes exactly one summand; the largest spread within a row of
    the loss matrix is therefore the tightest constant.
    """
    v = loss.values
    derived = float((v.max(axis=1) - v.min(axis=1)).max())
    if override is None:
        return derived
    if override < derived:
        raise ValueError(f"lipschitz override {override} is below the derived constant {derived}")
    return float(override)


@dataclass(frozen=True, eq=False)
class FunctionClass:
    """Finite family of total lookup tables.

    Encoders map intentions/outputs to features, decoders map features to
    outputs.  ``tables[k, x]`` is the image of ``x`` under member ``k``.
    """

    kind: str
    tables: np.ndarray
    n_outputs: int
    n_inputs: int = field(init=False)

    def __post_init__(self):
        if self.kind not in (ENCODER, DECODER):
            raise ValueError(f"kind must be '{ENCODER}' or '{DECODER}', got {self.kind!r}")
        raw = [list(t) for t in self.tables]
        if not raw:
            raise ValueError(f"{self.kind} class is empty")
        widths = {len(t) for t in raw}
        if len(widths) != 1:
            raise ValueError(f"{self.kind} tables are not total over a common input alphabet")
        tables = _frozen(raw, np.int64)
        if tables.shape[1] == 0:
            raise ValueError(f"{self.kind} tables have no inputs")
        if tables.min() < 0 or tables.max() >= self.n_outputs:
            raise ValueError(f"{self.kind} table output outside 0..{self.n_outputs - 1}")
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "n_inputs", tables.shape[1])

    def __len__(self):
        return self.tables.shape[0]

    def __getitem__(self, k) -> np.ndarray:
        return self.tables[k]


def compose(h: Sequence[int], g: Sequence[int]) -> np.ndarray:
    """Lookup table of ``a -> h(g(a))``."""
    h = np.asarray(h, dtype=np.int64)
    g = np.asarray(g, dtype=np.int64)
    if g.size and (g.min() < 0 or g.max() >= h.size):
        raise ValueError(f"encoder outputs reach {g.max()}, decoder accepts 0..{h.size - 1}")
    return h[g]


def composed_tables(h: Sequence[int], encoders: FunctionClass) -> np.ndarray:
    """Row ``k`` is ``h ∘ encoders[k]``."""
    if encoders.n_outputs != len(h):
        raise ValueError(f"encoder feature alphabet has {encoders.n_outputs} symbols, "
                         f"decoder accepts {len(h)}")
    return np.asarray(h, dtype=np.int64)[encoders.tables]
