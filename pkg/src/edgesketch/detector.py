"""EWMA smoothing and the mean + k*std dynamic threshold."""

from __future__ import annotations

import math

import numba
import numpy as np

from .errors import ParameterError, StateError

# state buffer layout
_Z, _COUNT, _MEAN, _M2, _HAS_Z = 0, 1, 2, 3, 4


@numba.njit(cache=True, inline="always")
def _ewma(buf, x, lam):
    if buf[_HAS_Z] == 0.0:
        buf[_Z] = x
        buf[_HAS_Z] = 1.0
    elif x != buf[_Z]:  # keeps a constant stream exactly at its value
        buf[_Z] = lam * x + (1.0 - lam) * buf[_Z]
    return buf[_Z]


@numba.njit(cache=True, inline="always")
def _stats(buf, x):
    # Welford; population variance m2 / count
    buf[_COUNT] += 1.0
    dev = x - buf[_MEAN]
    buf[_MEAN] += dev / buf[_COUNT]
    buf[_M2] += dev * (x - buf[_MEAN])


@numba.njit(cache=True, inline="always")
def _sigma(buf):
    if buf[_COUNT] == 0.0 or buf[_M2] <= 0.0:
        return 0.0
    return math.sqrt(buf[_M2] / buf[_COUNT])


@numba.njit(cache=True, inline="always")
def _classify(buf, x, lam, k, flag_on_raw, fixed):
    # fixed is NaN unless a constant threshold replaces mean + k*std
    z = _ewma(buf, x, lam)
    _stats(buf, x)
    tau = fixed if fixed == fixed else buf[_MEAN] + k * _sigma(buf)
    probe = x if flag_on_raw else z
    return z, tau, probe > tau


class DetectorState:
    """Running state of the thresholding stage for one score stream.

    ``lam`` weights the newest score in the EWMA and ``k`` is the number
    of standard deviations above the running mean that the smoothed score
    must exceed. With ``flag_on_raw`` the raw score is compared instead.
    A ``fixed_threshold`` replaces the adaptive one (for ablations); the
    running statistics are still maintained.
    """

    def __init__(self, lam: float = 0.8, k: float = 3.0, flag_on_raw: bool = False,
                 fixed_threshold: float | None = None) -> None:
        if not (0.0 < lam <= 1.0):
            raise ParameterError(f"lambda must lie in (0, 1], got {lam!r}", key="lambda")
        if not (k > 0) or not math.isfinite(k):
            raise ParameterError(f"k must be positive, got {k!r}", key="k")
        self.lam = float(lam)
        self.k = float(k)
        self.flag_on_raw = bool(flag_on_raw)
        if fixed_threshold is not None and not math.isfinite(fixed_threshold):
            raise ParameterError(f"fixed threshold must be finite, got {fixed_threshold!r}",
                                 key="alpha")
        self.fixed_threshold = fixed_threshold
        self._fixed = math.nan if fixed_threshold is None else float(fixed_threshold)
        self._buf = np.zeros(5)

    @property
    def z(self) -> float:
        return float(self._buf[_Z])

    @property
    def count(self) -> int:
        return int(self._buf[_COUNT])

    @property
    def mean(self) -> float:
        return float(self._buf[_MEAN])

    @property
    def m2(self) -> float:
        return float(self._buf[_M2])

    @property
    def sigma(self) -> float:
        return float(_sigma(self._buf))

    def ewma_update(self, x: float) -> float:
        return float(_ewma(self._buf, float(x), self.lam))

    def stats_update(self, x: float) -> tuple[float, float]:
        _stats(self._buf, float(x))
        return self.mean, self.sigma

    def threshold(self) -> float:
        if self.count == 0:
            raise StateError("threshold is undefined before any score is observed")
        if self.fixed_threshold is not None:
            return float(self.fixed_threshold)
        return self.mean + self.k * self.sigma

    def classify(self, x: float) -> tuple[float, float, bool]:
        """Feed one score; returns (smoothed score, threshold, flag)."""
        z, tau, flag = _classify(self._buf, float(x), self.lam, self.k, self.flag_on_raw,
                                  self._fixed)
        return float(z), float(tau), bool(flag)


def fpr_bound(k: float) -> float:
    """Chebyshev bound on the false-alarm rate of a ``mean + k*std`` threshold."""
    if not (k > 0):
        raise ParameterError(f"k must be positive, got {k!r}")
    return 1.0 / (k * k)
