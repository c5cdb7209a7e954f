"""Model identification: from a fuzzy partition to a full TS model.

Premise parameters come from membership-weighted statistics of the input
columns; consequents come from one global least-squares problem whose
regressor row for sample k concatenates, over rules i, the normalised truth
value times [1, x_k].  The solve uses an orthogonal-triangular factorisation
with column pivoting (no explicit normal-equation inversion), which stays
well-behaved on rank-deficient systems and returns the minimum-norm
solution.
"""

from __future__ import annotations

import csv
from contextlib import contextmanager
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from . import core
from .clustering import NumericalError, _as_u, _as_z, ClusterConfig, run_clustering
from .evalmetrics import MetricSet, metric_set
from .validity import sweep_clusters


def premise_means(data, partition, m: float) -> np.ndarray:
    """(C, n) weighted means of the input columns (output column excluded)."""
    z = _as_z(data)
    um = _as_u(partition) ** m
    mass = um.sum(axis=1)
    if np.any(mass == 0):
        i = int(np.argmax(mass == 0))
        raise NumericalError(f"cluster {i} has zero membership mass")
    x = z[:, :-1]
    return (um @ x) / mass[:, None]


def premise_widths(data, partition, m: float, means) -> np.ndarray:
    """(C, n) premise widths sqrt(2 * weighted variance).

    The factor 2 under the radical pairs with the membership function in
    :mod:`fuzzyrunoff.core`, which has no factor 2 in its exponent
    denominator.  Zero-spread clusters are clamped to 1e-6 of the column
    range (1e-6 absolute for constant columns) so widths stay positive.
    """
    z = _as_z(data)
    um = _as_u(partition) ** m
    mass = um.sum(axis=1)
    x = z[:, :-1]
    means = np.asarray(means, dtype=float)
    var = np.empty_like(means)
    for i in range(means.shape[0]):
        var[i] = (um[i][:, None] * (x - means[i]) ** 2).sum(axis=0) / mass[i]
    sigma = np.sqrt(2.0 * var)
    col_range = x.max(axis=0) - x.min(axis=0)
    floor = np.where(col_range > 0, 1e-6 * col_range, 1e-6)
    return np.maximum(sigma, floor)


def normalized_truth(model: core.TsModel, X) -> np.ndarray:
    """(N, C) firing strengths normalised to sum 1 per row.

    Rows whose total firing underflows get a one-hot row at the nearest
    rule, matching the prediction-time fallback.
    """
    w = core.firing_matrix(model, X)
    wsum = w.sum(axis=1)
    degenerate = wsum < core.DEGENERACY_FLOOR
    safe = np.where(degenerate, 1.0, wsum)
    truth = w / safe[:, None]
    if degenerate.any():
        X = np.asarray(X, dtype=float)
        idx = core.nearest_rule_index(model, X[degenerate])
        rows = np.zeros((int(degenerate.sum()), model.rule_count))
        rows[np.arange(rows.shape[0]), idx] = 1.0
        truth[degenerate] = rows
    return truth


def build_regressors(X, truth) -> np.ndarray:
    """(N, C*(n+1)) global regressor matrix.

    Row k is the concatenation over rules i of truth_ik * [1, x_k1 .. x_kn].
    """
    X = np.asarray(X, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if X.ndim != 2 or truth.ndim != 2 or X.shape[0] != truth.shape[0]:
        raise ValueError(
            f"shape mismatch: X {X.shape} vs truth {truth.shape}"
        )
    ones = np.ones((X.shape[0], 1))
    x1 = np.hstack([ones, X])
    return (truth[:, :, None] * x1[:, None, :]).reshape(X.shape[0], -1)


# Identifiability fallback used when fitting consequents from clustered
# data.  A rule whose firing region holds an input nearly constant yields a
# regressor direction with almost no independent variation; the exact
# least-squares solution then contains huge cancelling coefficient pairs
# that explode off the training data.  Fitting first solves at the exact
# numerical rank and only refits with this coarser cutoff when the
# equilibrated coefficients exceed COEFFICIENT_BLOWUP times the output
# scale - a genuinely identified system keeps its exact solution.
CONSEQUENT_COND = 1e-2
COEFFICIENT_BLOWUP = 1e4


def solve_consequents(pi, y, cond: float = 1e-10):
    """Minimum-norm least squares; returns (zeta, residual norm).

    Solved through a complete orthogonal factorisation (QR with column
    pivoting), never by inverting the normal equations, so rank-deficient
    regressor matrices are fine.  Columns are equilibrated to unit norm
    first; ``cond`` is the relative cutoff deciding the numerical rank.
    The 1e-10 default reproduces the pseudo-inverse solution on exactly
    rank-deficient systems while leaving any honestly identifiable
    direction alone; model fitting passes the larger CONSEQUENT_COND.
    """
    pi = np.asarray(pi, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if pi.ndim != 2 or pi.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: pi {pi.shape} vs y {y.shape}")
    if not np.any(pi):
        raise ValueError("regressor matrix is identically zero")
    norms = np.linalg.norm(pi, axis=0)
    # a column that is numerical dust relative to the matrix gets a zero
    # coefficient; equilibrating it instead would amplify noise by 1/norm
    live = norms > 1e-10 * norms.max()
    scale = np.where(live, norms, 1.0)
    solution, _, _, _ = scipy.linalg.lstsq(pi[:, live] / scale[live], y,
                                           cond=cond, lapack_driver="gelsy")
    zeta = np.zeros(pi.shape[1])
    zeta[live] = solution / scale[live]
    residual = y - pi @ zeta
    return zeta, float(np.linalg.norm(residual))


@dataclass
class FitReport:
    """What happened during one fit_model call."""

    algorithm: str
    n_rules: int
    m: float
    seed: int
    converged: bool
    n_iterations: int
    residual_norm: float
    train: MetricSet
    consensus_c: int | None = None  # set when the rule count came from a sweep

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["algorithm", "n_rules", "m", "seed", "converged", "n_iterations",
                 "residual_norm", "train_rmse", "train_ve", "train_ce", "train_r",
                 "consensus_c"]
            )
            w.writerow(
                [self.algorithm, self.n_rules, repr(self.m), self.seed,
                 int(self.converged), self.n_iterations, repr(self.residual_norm),
                 repr(self.train.rmse), repr(self.train.ve), repr(self.train.ce),
                 repr(self.train.r), "" if self.consensus_c is None else self.consensus_c]
            )


def _solve_stable(pi, y):
    """Exact least squares unless its coefficients are cancelling blow-ups."""
    zeta, residual_norm = solve_consequents(pi, y)
    norms = np.linalg.norm(pi, axis=0)
    scale = max(float(np.linalg.norm(y)), 1e-12)
    if float(np.max(np.abs(zeta) * norms)) > COEFFICIENT_BLOWUP * scale:
        zeta, residual_norm = solve_consequents(pi, y, cond=CONSEQUENT_COND)
    return zeta, residual_norm


@contextmanager
def _stage(name: str):
    try:
        yield
    except (ValueError, NumericalError) as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def fit_model(data, cfg: ClusterConfig, c_range=None):
    """Full identification pipeline on a joined (N, n+1) data matrix.

    Clustering -> premise parameters -> normalised truth values -> global
    regressors -> least-squares consequents.  When ``c_range`` is given the
    rule count is chosen first by the validity-index consensus over that
    range (gk/fcm only); otherwise cfg.n_clusters is used as-is.

    Returns (TsModel, FitReport).
    """
    z = _as_z(data)
    n = z.shape[1] - 1
    if n < 1:
        raise ValueError("joined data needs at least one input column")
    consensus = None
    if c_range is not None:
        if cfg.algorithm == "sc":
            raise ValueError("subtractive clustering finds its own cluster count; "
                             "c_range is not applicable")
        with _stage("rule-count sweep"):
            consensus = sweep_clusters(data, cfg, c_range).consensus
        cfg = replace(cfg, n_clusters=consensus)

    with _stage("clustering"):
        part, clusters, trace = run_clustering(data, cfg)
    with _stage("premise estimation"):
        means = premise_means(data, part, cfg.m)
        widths = premise_widths(data, part, cfg.m, means)
    c = means.shape[0]
    blank = np.zeros(n + 1)
    shell = core.TsModel(tuple(
        core.TsRule(
            tuple(core.GaussianMf(means[i, j], widths[i, j]) for j in range(n)),
            blank,
        )
        for i in range(c)
    ))
    X, y = z[:, :n], z[:, n]
    with _stage("consequent estimation"):
        truth = normalized_truth(shell, X)
        pi = build_regressors(X, truth)
        zeta, residual_norm = _solve_stable(pi, y)
    theta = zeta.reshape(c, n + 1)
    model = core.TsModel(tuple(
        core.TsRule(rule.premise, theta[i]) for i, rule in enumerate(shell.rules)
    ))
    yhat = core.predict_batch(model, X)
    report = FitReport(
        algorithm=cfg.algorithm,
        n_rules=c,
        m=cfg.m,
        seed=cfg.seed,
        converged=trace.converged,
        n_iterations=trace.n_iterations,
        residual_norm=residual_norm,
        train=metric_set(y, yhat),
        consensus_c=consensus,
    )
    return model, report
