"""Experiment definition files (YAML).

Example::

    horizon: 100
    delta: 0.1
    seed: 7
    trials: 50
    y_hat_0: 0
    y_tilde_0: 0
    h_tilde: 0
    alphabet: {size: 2, labels: [left, right]}
    features: {size: 2}
    process:
      initial: [0.5, 0.5]
      transition: [[0.9, 0.1], [0.1, 0.9]]
    loss:
      values: [[0, 1], [1, 0]]
      lipschitz: 1.0            # optional, must not undercut the derived value
    encoders: [[0, 1], [1, 0]]  # one table per encoder, indexed by symbol
    decoders: [[0, 1], [0, 0]]  # one table per decoder, indexed by feature
    policies:
      encoder: {rule: exp-weights, learning_rate: 0.2}
      decoder: {rule: fixed, index: 0}
    certificate:
      eps_conditioning: comparator   # or realized
      eps_states: reachable          # or greedy
      static_comparator: false

Unknown keys are errors.  Every problem found is reported with its field path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .certificate import CONDITIONINGS, STATE_MODES, COMPARATOR, REACHABLE
from .core import (DECODER, ENCODER, Alphabet, FeatureAlphabet, FunctionClass, LossMatrix,
                   MarkovIntentionProcess, lipschitz_constant, validate_process)
from .protocol import RULES, LoopSetup, Policy

CONFIG_ENV = "COADAPT_CONFIG"


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid experiment config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class PolicySpec:
    rule: str = "exp-weights"
    index: int = 0
    learning_rate: float | None = None


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    process: MarkovIntentionProcess
    loss: LossMatrix
    features: FeatureAlphabet
    encoders: FunctionClass
    decoders: FunctionClass
    h_tilde: int
    horizon: int
    delta: float
    seed: int = 0
    trials: int = 1
    y_hat_0: int = 0
    y_tilde_0: int = 0
    encoder_policy: PolicySpec = field(default_factory=PolicySpec)
    decoder_policy: PolicySpec = field(default_factory=PolicySpec)
    lipschitz_override: float | None = None
    eps_conditioning: str = COMPARATOR
    eps_states: str = REACHABLE
    static_comparator: bool = False

    @property
    def setup(self) -> LoopSetup:
        return LoopSetup(self.encoders, self.decoders, self.loss, self.y_hat_0)

    @property
    def h_tilde_table(self) -> np.ndarray:
        return self.decoders[self.h_tilde]

    @property
    def lipschitz(self) -> float:
        return lipschitz_constant(self.loss, self.lipschitz_override)

    def policy(self, side: str) -> Policy:
        spec = self.encoder_policy if side == ENCODER else self.decoder_policy
        arms = len(self.encoders) if side == ENCODER else len(self.decoders)
        return Policy(side, spec.rule, arms, spec.index, spec.learning_rate)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


TOP_KEYS = {"horizon", "delta", "seed", "trials", "y_hat_0", "y_tilde_0", "h_tilde", "alphabet",
            "features", "process", "loss", "encoders", "decoders", "policies", "certificate"}
REQUIRED = {"horizon", "delta", "alphabet", "features", "process", "loss", "encoders", "decoders"}
SECTION_KEYS = {
    "alphabet": {"size", "labels"},
    "features": {"size"},
    "process": {"initial", "transition"},
    "loss": {"values", "lipschitz"},
    "policies": {"encoder", "decoder"},
    "certificate": {"eps_conditioning", "eps_states", "static_comparator"},
}
POLICY_KEYS = {"rule", "index", "learning_rate"}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _matrix(v, path, errors, *, square=False):
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        errors.append(f"{path}: expected a nonempty list of lists")
        return None
    if not all(_is_num(x) for r in v for x in r):
        errors.append(f"{path}: entries must be finite numbers")
        return None
    if len({len(r) for r in v}) != 1:
        errors.append(f"{path}: rows have unequal lengths")
        return None
    arr = np.array(v, dtype=float)
    if square and arr.shape[0] != arr.shape[1]:
        errors.append(f"{path}: expected a square matrix, got {arr.shape[0]}x{arr.shape[1]}")
        return None
    return arr


def _tables(v, path, n_in, n_out, errors):
    if not isinstance(v, list) or not v:
        errors.append(f"{path}: expected a nonempty list of tables")
        return None
    ok = True
    for k, t in enumerate(v):
        if not isinstance(t, list) or len(t) != n_in:
            errors.append(f"{path}[{k}]: expected a table of length {n_in}")
            ok = False
        elif not all(_is_int(x) and 0 <= x < n_out for x in t):
            errors.append(f"{path}[{k}]: entries must be integers in 0..{n_out - 1}")
            ok = False
    return v if ok else None


def _section(raw, name, errors):
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        errors.append(f"{name}: expected a mapping")
        return {}
    for key in sorted(set(sec) - SECTION_KEYS[name]):
        errors.append(f"{name}.{key}: unknown key")
    return sec


def parse_config(raw) -> ExperimentConfig:
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a mapping"])
    for key in sorted(set(raw) - TOP_KEYS):
        errors.append(f"{key}: unknown key")
    missing = sorted(REQUIRED - set(raw))
    if missing:
        raise ConfigError(errors + [f"{key}: required" for key in missing])

    def int_field(name, default, lo=None):
        v = raw.get(name, default)
        if not _is_int(v) or (lo is not None and v < lo):
            errors.append(f"{name}: expected an integer" + (f" >= {lo}" if lo is not None else ""))
            return None
        return v

    horizon = int_field("horizon", None, 1)
    seed = int_field("seed", 0, 0)
    trials = int_field("trials", 1, 1)
    delta = raw["delta"]
    if not _is_num(delta) or not 0 < delta <= 1:
        errors.append(f"delta: must lie in (0, 1], got {delta!r}")

    alpha = _section(raw, "alphabet", errors)
    n = alpha.get("size")
    if not _is_int(n) or n < 2:
        errors.append("alphabet.size: expected an integer >= 2")
        raise ConfigError(errors)
    labels = alpha.get("labels")
    alphabet = None
    try:
        alphabet = Alphabet(n, labels)
    except ValueError as exc:
        errors.append(f"alphabet.labels: {exc}")

    feats = _section(raw, "features", errors)
    m = feats.get("size")
    if not _is_int(m) or m < 1:
        errors.append("features.size: expected an integer >= 1")
        raise ConfigError(errors)

    proc = _section(raw, "process", errors)
    process = None
    init = proc.get("initial")
    trans = _matrix(proc.get("transition"), "process.transition", errors, square=True)
    if not isinstance(init, list) or not all(_is_num(x) for x in init):
        errors.append("process.initial: expected a list of numbers")
    elif trans is not None and alphabet is not None:
        if len(init) != n or trans.shape[0] != n:
            errors.append(f"process: initial and transition must have {n} states")
        else:
            process = MarkovIntentionProcess(alphabet, init, trans)
            for msg in validate_process(process).errors:
                errors.append(f"process.{msg}")

    loss_sec = _section(raw, "loss", errors)
    loss = None
    vals = _matrix(loss_sec.get("values"), "loss.values", errors, square=True)
    if vals is not None:
        if vals.shape[0] != n:
            errors.append(f"loss.values: expected {n}x{n}")
        elif np.any(vals < 0):
            errors.append("loss.values: entries must be nonnegative")
        else:
            loss = LossMatrix(vals)
    lip = loss_sec.get("lipschitz")
    if lip is not None:
        if not _is_num(lip) or lip < 0:
            errors.append("loss.lipschitz: expected a nonnegative number")
        elif loss is not None and lip < lipschitz_constant(loss):
            errors.append(f"loss.lipschitz: {lip} is below the derived constant {lipschitz_constant(loss)}")

    enc = _tables(raw["encoders"], "encoders", n, m, errors)
    dec = _tables(raw["decoders"], "decoders", m, n, errors)
    encoders = FunctionClass(ENCODER, enc, m) if enc else None
    decoders = FunctionClass(DECODER, dec, n) if dec else None

    h_tilde = int_field("h_tilde", 0, 0)
    if decoders is not None and h_tilde is not None and h_tilde >= len(decoders):
        errors.append(f"h_tilde: index {h_tilde} outside 0..{len(decoders) - 1}")
    y_hat_0 = int_field("y_hat_0", 0, 0)
    y_tilde_0 = int_field("y_tilde_0", 0, 0)
    for name, v in (("y_hat_0", y_hat_0), ("y_tilde_0", y_tilde_0)):
        if v is not None and v >= n:
            errors.append(f"{name}: symbol {v} outside 0..{n - 1}")

    pols = _section(raw, "policies", errors)
    specs = {}
    for side, tables in ((ENCODER, raw["encoders"]), (DECODER, raw["decoders"])):
        p = pols.get(side, {})
        path = f"policies.{side}"
        if not isinstance(p, dict):
            errors.append(f"{path}: expected a mapping")
            continue
        for key in sorted(set(p) - POLICY_KEYS):
            errors.append(f"{path}.{key}: unknown key")
        rule = p.get("rule", "exp-weights")
        index = p.get("index", 0)
        lr = p.get("learning_rate")
        if rule not in RULES:
            errors.append(f"{path}.rule: expected one of {', '.join(RULES)}")
        if not _is_int(index) or index < 0 or (isinstance(tables, list) and index >= len(tables)):
            errors.append(f"{path}.index: out of range")
        if lr is not None and (not _is_num(lr) or lr < 0):
            errors.append(f"{path}.learning_rate: expected a nonnegative number")
        specs[side] = PolicySpec(rule, index, None if lr is None else float(lr))

    cert = _section(raw, "certificate", errors)
    cond = cert.get("eps_conditioning", COMPARATOR)
    if cond not in CONDITIONINGS:
        errors.append(f"certificate.eps_conditioning: expected one of {', '.join(CONDITIONINGS)}")
    states = cert.get("eps_states", REACHABLE)
    if states not in STATE_MODES:
        errors.append(f"certificate.eps_states: expected one of {', '.join(STATE_MODES)}")
    static = cert.get("static_comparator", False)
    if not isinstance(static, bool):
        errors.append("certificate.static_comparator: expected true or false")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        process=process, loss=loss, features=FeatureAlphabet(m), encoders=encoders,
        decoders=decoders, h_tilde=h_tilde, horizon=horizon, delta=float(delta), seed=seed,
        trials=trials, y_hat_0=y_hat_0, y_tilde_0=y_tilde_0, encoder_policy=specs[ENCODER],
        decoder_policy=specs[DECODER], lipschitz_override=None if lip is None else float(lip),
        eps_conditioning=cond, eps_states=states, static_comparator=static,
    )


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<parse>: {exc}"]) from exc
    return parse_config(raw)
