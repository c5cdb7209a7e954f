"""Takagi-Sugeno fuzzy model types and the forward inference path.

A model is a set of C rules.  Each rule carries one Gaussian membership
function per input dimension (the premise) and an affine coefficient vector
(the consequent).  Inference evaluates all memberships, takes the minimum
across input dimensions as the rule firing strength, and returns the
firing-weighted average of the per-rule affine outputs.

Note on the membership function: the Gaussian used here is

    mf(x) = exp(-(x - mean)^2 / width^2)

i.e. WITHOUT the conventional factor 2 in the denominator.  The width
estimator in :mod:`fuzzyrunoff.identify` carries a compensating factor 2
under its radical, so the fitted pair behaves like an ordinary Gaussian with
standard deviation ``width / sqrt(2)``.  Do not "fix" one side without the
other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Below this total firing mass an input is considered outside every rule's
# region and the nearest-rule fallback applies (the weighted average would
# divide by ~0).
DEGENERACY_FLOOR = 1e-12

_degenerate_fallbacks = 0


def degenerate_fallback_count() -> int:
    """Number of predictions that used the nearest-rule fallback so far."""
    return _degenerate_fallbacks


def reset_degenerate_fallback_count() -> None:
    global _degenerate_fallbacks
    _degenerate_fallbacks = 0


@dataclass(frozen=True)
class GaussianMf:
    """Gaussian membership function with peak value 1 at ``mean``."""

    mean: float
    width: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.width)):
            raise ValueError("GaussianMf parameters must be finite")
        if self.width <= 0:
            raise ValueError(f"GaussianMf width must be > 0, got {self.width}")


@dataclass(frozen=True)
class TsRule:
    """One rule: per-input Gaussian premises plus an affine consequent.

    ``consequent`` has length n+1: intercept first, then one coefficient per
    input dimension.
    """

    premise: tuple[GaussianMf, ...]
    consequent: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "premise", tuple(self.premise))
        theta = np.array(self.consequent, dtype=float)
        theta.setflags(write=False)
        object.__setattr__(self, "consequent", theta)
        n = len(self.premise)
        if n == 0:
            raise ValueError("rule needs at least one input dimension")
        if theta.shape != (n + 1,):
            raise ValueError(
                f"consequent length must be n+1={n + 1}, got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError("consequent coefficients must be finite")

    @property
    def input_dim(self) -> int:
        return len(self.premise)


@dataclass(frozen=True)
class TsModel:
    """Immutable Takagi-Sugeno model; safe for concurrent read-only use."""

    rules: tuple[TsRule, ...]

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if len(self.rules) < 1:
            raise ValueError("model needs at least one rule")
        n = self.rules[0].input_dim
        if any(r.input_dim != n for r in self.rules):
            raise ValueError("all rules must share the same input dimension")
        # Parameter matrices cached for vectorised evaluation.
        means = np.array([[mf.mean for mf in r.premise] for r in self.rules])
        widths = np.array([[mf.width for mf in r.premise] for r in self.rules])
        thetas = np.array([r.consequent for r in self.rules])
        for a in (means, widths, thetas):
            a.setflags(write=False)
        object.__setattr__(self, "_means", means)
        object.__setattr__(self, "_widths", widths)
        object.__setattr__(self, "_thetas", thetas)

    @property
    def input_dim(self) -> int:
        return self.rules[0].input_dim

    @property
    def rule_count(self) -> int:
        return len(self.rules)

    @property
    def premise_means(self) -> np.ndarray:
        """(C, n) matrix of premise means."""
        return self._means

    @property
    def premise_widths(self) -> np.ndarray:
        """(C, n) matrix of premise widths."""
        return self._widths

    @property
    def consequents(self) -> np.ndarray:
        """(C, n+1) matrix of consequent coefficients, intercept first."""
        return self._thetas


@dataclass(frozen=True)
class FiringVector:
    """Per-rule truth values for one input sample."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("firing vector must be a non-empty 1-d array")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("firing strengths must lie in [0, 1]")

    @property
    def degenerate(self) -> bool:
        return float(self.values.sum()) < DEGENERACY_FLOOR


def mf_eval(mf: GaussianMf, x: float) -> float:
    """Membership of scalar ``x``, exp(-(x-mean)^2 / width^2), in [0, 1]."""
    if not math.isfinite(x):
        raise ValueError(f"input must be finite, got {x}")
    return math.exp(-((x - mf.mean) ** 2) / mf.width**2)


def firing_strength(rule: TsRule, x) -> float:
    """Truth value of one rule: minimum membership across input dimensions."""
    x = np.asarray(x, dtype=float)
    if x.shape != (rule.input_dim,):
        raise ValueError(
            f"input length {x.shape} does not match rule dimension {rule.input_dim}"
        )
    return min(mf_eval(mf, xj) for mf, xj in zip(rule.premise, x))


def rule_output(rule: TsRule, x) -> float:
    """Affine consequent value theta_0 + sum_j x_j * theta_j."""
    x = np.asarray(x, dtype=float)
    if x.shape != (rule.input_dim,):
        raise ValueError(
            f"input length {x.shape} does not match rule dimension {rule.input_dim}"
        )
    theta = rule.consequent
    return float(theta[0] + (x * theta[1:]).sum())

def firing_matrix(model: TsModel, X) -> np.ndarray:
    """(N, C) min-operator firing strengths for every row of ``X``."""
    X = _check_batch(model, X)
    if X.shape[0] == 0:
        return np.zeros((0, model.rule_count))
    # memberships: (N, C, n); firing = min over input dimensions
    z = (X[:, None, :] - model.premise_means[None, :, :]) / model.premise_widths[None, :, :]
    return np.exp(-(z**2)).min(axis=2)


def rule_output_matrix(model: TsModel, X) -> np.ndarray:
    """(N, C) affine consequent outputs for every row of ``X``."""
    X = _check_batch(model, X)
    theta = model.consequents
    # Summation runs along the feature axis independently per (row, rule),
    # which keeps single-row and batched evaluation bit-identical.
    return theta[None, :, 0] + (X[:, None, :] * theta[None, :, 1:]).sum(axis=2)


def nearest_rule_index(model: TsModel, X) -> np.ndarray:
    """Index of the rule whose premise mean vector is closest to each row.

    Distances are taken in a normalised input space: each dimension is
    divided by the spread of the premise means across rules (1.0 when the
    spread is zero), so no dimension dominates on units alone.  Ties go to
    the lowest rule index.
    """
    X = _check_batch(model, X)
    means = model.premise_means
    scale = means.max(axis=0) - means.min(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    d2 = (((X[:, None, :] - means[None, :, :]) / scale) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def predict(model: TsModel, x) -> float:
    """Model output for a single input vector.

    Weighted average of the rule outputs with the firing strengths as
    weights.  When all firings underflow (input far outside every cluster)
    the output of the nearest rule is returned instead and the module-level
    fallback counter is incremented.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ValueError(
            f"input length {x.shape} does not match model dimension {model.input_dim}"
        )
    return float(predict_batch(model, x[None, :])[0])


def predict_batch(model: TsModel, X) -> np.ndarray:
    """Vectorised :func:`predict` over the rows of an (N, n) matrix."""
    global _degenerate_fallbacks
    X = _check_batch(model, X)
    if not np.all(np.isfinite(X)):
        bad = int(np.argwhere(~np.isfinite(X).all(axis=1))[0, 0])
        raise ValueError(f"non-finite input at row {bad}")
    w = firing_matrix(model, X)
    outputs = rule_output_matrix(model, X)
    wsum = w.sum(axis=1)
    degenerate = wsum < DEGENERACY_FLOOR
    safe = np.where(degenerate, 1.0, wsum)
    yhat = (w * outputs).sum(axis=1) / safe
    if degenerate.any():
        idx = nearest_rule_index(model, X[degenerate])
        yhat[degenerate] = outputs[degenerate, idx]
        _degenerate_fallbacks += int(degenerate.sum())
    return yhat


def _check_batch(model: TsModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or (X.shape[0] > 0 and X.shape[1] != model.input_dim):
        raise ValueError(
            f"expected (N, {model.input_dim}) input matrix, got shape {X.shape}"
        )
    if X.shape[0] == 0:
        X = X.reshape(0, model.input_dim)
    return X


# ---------------------------------------------------------------------------
# Serialisation: versioned plain text, value-exact round trip.
# ---------------------------------------------------------------------------

_FORMAT_TAG = "tsmodel-v1"


def _fmt_floats(values) -> str:
    # repr() emits the shortest decimal that round-trips the exact double
    return " ".join(repr(float(v)) for v in values)


def dump_model(model: TsModel) -> str:
    """Serialise a model to the versioned plain-text format."""
    lines = [
        f"format {_FORMAT_TAG}",
        f"input_dim {model.input_dim}",
        f"rule_count {model.rule_count}",
    ]
    for i, rule in enumerate(model.rules):
        lines.append(f"rule {i}")
        lines.append("means " + _fmt_floats(m.mean for m in rule.premise))
        lines.append("widths " + _fmt_floats(m.width for m in rule.premise))
        lines.append("theta " + _fmt_floats(rule.consequent))
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> TsModel:
    """Inverse of :func:`dump_model`; values are restored bit-exactly."""
    fields = {}
    rules_raw: list[dict] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        if key == "rule":
            rules_raw.append({})
        elif key in ("means", "widths", "theta"):
            if not rules_raw:
                raise ValueError(f"line {lineno}: '{key}' before any rule header")
            rules_raw[-1][key] = np.array([float(t) for t in rest.split()])
        else:
            fields[key] = rest
    if fields.get("format") != _FORMAT_TAG:
        raise ValueError(f"unsupported model format: {fields.get('format')!r}")
    n = int(fields["input_dim"])
    c = int(fields["rule_count"])
    if len(rules_raw) != c:
        raise ValueError(f"expected {c} rules, found {len(rules_raw)}")
    rules = []
    for raw in rules_raw:
        premise = tuple(
            GaussianMf(mean, width) for mean, width in zip(raw["means"], raw["widths"])
        )
        if len(premise) != n:
            raise ValueError("rule premise length does not match input_dim")
        rules.append(TsRule(premise, raw["theta"]))
    return TsModel(tuple(rules))


def save_model(model: TsModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_model(model))


def load_model(path) -> TsModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())
