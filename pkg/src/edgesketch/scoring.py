"""Per-edge anomaly scores from sketch estimates.

``a`` is the edge's count in the current bin, ``s`` its count over the
whole stream and ``t`` the number of bins elapsed. Under the normal
hypothesis ``a`` is Gaussian around the per-bin mean ``s / t`` with
variance ``s / t**2``; the anomaly hypothesis shifts the mean by
``delta_shift`` and scales the variance by ``anomaly_variance_factor``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba

from .errors import ParameterError

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ScoringParams:
    delta_shift: float = 10.0
    prior: float = 0.05
    variance_floor: float = 1e-9
    anomaly_variance_factor: float = 4.0

    def __post_init__(self) -> None:
        if not (0.0 < self.prior < 1.0):
            raise ParameterError(f"prior must lie in (0, 1), got {self.prior!r}", key="prior")
        for name in ("delta_shift", "variance_floor", "anomaly_variance_factor"):
            value = getattr(self, name)
            if not (value > 0) or not math.isfinite(value):
                raise ParameterError(f"{name} must be positive, got {value!r}", key=name)


@numba.njit(cache=True)
def _raw_score(a, s, t):
    if t <= 1 or s <= 0.0:
        return 0.0
    dev = a - s / t
    return dev * dev * t / (s * (t - 1))


@numba.njit(cache=True)
def _log_normal_pdf(x, mu, sigma2):
    d = x - mu
    return -0.5 * (_LOG_2PI + math.log(sigma2)) - d * d / (2.0 * sigma2)


@numba.njit(cache=True)
def _posterior(a, s, t, delta_shift, prior, variance_floor, factor):
    mu = s / t
    sigma2 = s / (t * t)
    if sigma2 < variance_floor:
        sigma2 = variance_floor
    log_n = math.log(1.0 - prior) + _log_normal_pdf(a, mu, sigma2)
    log_a = math.log(prior) + _log_normal_pdf(a, mu + delta_shift, factor * sigma2)
    if log_n == -math.inf and log_a == -math.inf:
        return prior
    # p0*La / (p0*La + (1-p0)*Ln) as a logistic of the log-odds
    diff = log_a - log_n
    if diff >= 0.0:
        return 1.0 / (1.0 + math.exp(-diff))
    e = math.exp(diff)
    return e / (1.0 + e)


def raw_score(a: float, s: float, t: float) -> float:
    """Normalised squared deviation of ``a`` from the per-bin mean ``s / t``.

    Zero when there is no history to compare against (``t == 1`` or ``s == 0``).
    """
    if a < 0 or s < 0:
        raise ParameterError(f"frequencies must be non-negative, got a={a}, s={s}")
    if t < 1:
        raise ParameterError(f"t must be at least 1, got {t}")
    return float(_raw_score(float(a), float(s), float(t)))


def gaussian_likelihood(a: float, mu: float, sigma2: float) -> float:
    if not (sigma2 > 0):
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    return math.exp(_log_normal_pdf(float(a), float(mu), float(sigma2)))


def posterior_anomaly(a: float, s: float, t: float, params: ScoringParams | None = None) -> float:
    """Posterior probability that ``a`` was drawn from the anomaly hypothesis."""
    p = params or ScoringParams()
    if t < 1:
        raise ParameterError(f"t must be at least 1, got {t}")
    return float(_posterior(float(a), float(s), float(t), float(p.delta_shift), float(p.prior),
                            float(p.variance_floor), float(p.anomaly_variance_factor)))
