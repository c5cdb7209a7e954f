"""Performance criteria for observed vs. predicted series.

Four measures: root mean square error, coefficient of efficiency (the
Nash-Sutcliffe skill score: 1 for a perfect model, 0 when the model is no
better than predicting the observed mean), signed volumetric error in
percent, and the Pearson correlation coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricSet:
    rmse: float
    ce: float
    ve: float
    r: float


def _pair(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty series")
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    return y, yhat


def rmse(y, yhat) -> float:
    """sqrt(mean squared error); lower is better."""
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def ce(y, yhat) -> float:
    """Coefficient of efficiency 1 - F/F0.

    F is the residual sum of squares, F0 the sum of squares of the observed
    series about its own mean.
    """
    y, yhat = _pair(y, yhat)
    f0 = float(np.sum((y - y.mean()) ** 2))
    if f0 == 0.0:
        raise ValueError("observed series is constant (F0 = 0)")
    f = float(np.sum((y - yhat) ** 2))
    return 1.0 - f / f0


def ve(y, yhat) -> float:
    """Signed volumetric error in percent: (sum(y) - sum(yhat)) / sum(y) * 100."""
    y, yhat = _pair(y, yhat)
    total = float(np.sum(y))
    if total == 0.0:
        raise ValueError("observed series sums to zero")
    return (total - float(np.sum(yhat))) / total * 100.0


def r(y, yhat) -> float:
    """Pearson correlation between the two series."""
    y, yhat = _pair(y, yhat)
    dy = y - y.mean()
    dp = yhat - yhat.mean()
    sy = float(np.sqrt(np.sum(dy**2)))
    sp = float(np.sqrt(np.sum(dp**2)))
    if sy == 0.0 or sp == 0.0:
        raise ValueError("zero variance in one of the series")
    return float(np.sum(dy * dp)) / (sy * sp)


def metric_set(y, yhat) -> MetricSet:
    """All four criteria for one observed/predicted pair."""
    return MetricSet(rmse=rmse(y, yhat), ce=ce(y, yhat), ve=ve(y, yhat), r=r(y, yhat))
