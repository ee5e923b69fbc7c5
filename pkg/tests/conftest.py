import numpy as np
import pytest

from coadapt.core import DECODER, ENCODER, FunctionClass, LossMatrix, MarkovIntentionProcess


def random_stochastic(rng, shape, zero_prob=0.25):
    """Random probability rows; some entries forced to zero to exercise reachability."""
    m = rng.random(shape)
    m[rng.random(shape) < zero_prob] = 0.0
    m = np.atleast_2d(m)
    for row in m:
        if row.sum() == 0:
            row[rng.integers(row.size)] = 1.0
    m = m / m.sum(axis=1, keepdims=True)
    return m if len(shape) == 2 else m[0]


def random_process(rng, n, zero_prob=0.25):
    return MarkovIntentionProcess.from_matrix(random_stochastic(rng, (n,), zero_prob),
                                              random_stochastic(rng, (n, n), zero_prob))


def random_instance(rng, max_symbols=3, max_features=3, max_encoders=3, max_decoders=3, grid=None):
    n = int(rng.integers(2, max_symbols + 1))
    m = int(rng.integers(1, max_features + 1))
    enc = FunctionClass(ENCODER, rng.integers(0, m, (int(rng.integers(1, max_encoders + 1)), n)), m)
    dec = FunctionClass(DECODER, rng.integers(0, n, (int(rng.integers(1, max_decoders + 1)), m)), n)
    vals = rng.random((n, n)) * 3
    if grid:
        vals = np.round(vals / grid) * grid
    return {
        "process": random_process(rng, n),
        "loss": LossMatrix(vals),
        "encoders": enc,
        "decoders": dec,
        "h_tilde": dec[int(rng.integers(len(dec)))],
        "y_tilde_0": int(rng.integers(n)),
    }


def flip_chain(p):
    return MarkovIntentionProcess.from_matrix([0.5, 0.5], [[1 - p, p], [p, 1 - p]])


def iid_chain(row):
    row = np.asarray(row, dtype=float)
    return MarkovIntentionProcess.from_matrix(row, np.tile(row, (row.size, 1)))


def copy_chain(n):
    return MarkovIntentionProcess.from_matrix(np.full(n, 1.0 / n), np.eye(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
