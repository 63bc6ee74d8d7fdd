"""Per-context likelihood models.

Numeric targets get a Gaussian KDE whose bandwidth comes from the improved
Sheather-Jones (diffusion) plug-in rule; nominal targets get a frequency
histogram. Both expose the raw density ``kappa`` and the squashed likelihood
``omega``, which is 1 above the threshold ``tau`` and ``kappa / tau`` below.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.fft import dct
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

ISJ_GRID_SIZE = 2**10
ISJ_MAX_ITER = 50
MIN_BANDWIDTH = 1e-12
_SQRT_2PI = math.sqrt(2.0 * math.pi)
# Caps the size of the pairwise (query x sample) block held in memory.
_KDE_BLOCK = 1 << 21


class DegenerateSampleError(ValueError):
    """Fewer than two distinct values; no bandwidth can be estimated."""


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman's rule ``1.06 * min(std, IQR / 1.349) * n^(-1/5)``."""
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if n < 2 or x.max() == x.min():
        raise DegenerateSampleError("need at least 2 distinct values")
    std = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    sigma = min(std, (q75 - q25) / 1.349)
    if sigma <= 0:
        sigma = std
    h = 1.06 * sigma * n ** (-0.2)
    return max(h, 1e-9 * float(x.max() - x.min()))


def _isj_fixed_point(t: float, n: int, k_sq: np.ndarray, a2: np.ndarray) -> float:
    """``t - xi * gamma^[l](t)`` with l = 7 stages of the plug-in recursion."""
    ell = 7
    f = 2.0 * math.pi ** (2 * ell) * np.sum(k_sq**ell * a2 * np.exp(-k_sq * math.pi**2 * t))
    for s in range(ell - 1, 1, -1):
        k0 = np.prod(np.arange(1, 2 * s, 2, dtype=np.float64)) / _SQRT_2PI
        const = (1.0 + 0.5 ** (s + 0.5)) / 3.0
        time = (2.0 * const * k0 / n / f) ** (2.0 / (3.0 + 2.0 * s))
        f = 2.0 * math.pi ** (2 * s) * np.sum(k_sq**s * a2 * np.exp(-k_sq * math.pi**2 * time))
    return t - (2.0 * n * math.sqrt(math.pi) * f) ** (-0.4)


def botev_bandwidth(values: np.ndarray, grid_size: int = ISJ_GRID_SIZE) -> float:
    """Improved Sheather-Jones bandwidth via the DCT fixed-point scheme.

    The data are binned on ``grid_size`` cells spanning the sample range
    padded by a tenth on each side. When the root of the fixed-point
    equation cannot be bracketed on [0, 0.1] or brentq does not converge in
    50 iterations, Silverman's rule is returned instead.

    Raises:
        DegenerateSampleError: fewer than two distinct values.
    """
    x = np.asarray(values, dtype=np.float64)
    n_unique = np.unique(x).size
    if n_unique < 2:
        raise DegenerateSampleError("need at least 2 distinct values")
    lo, hi = float(x.min()), float(x.max())
    pad = (hi - lo) / 10.0
    lo, hi = lo - pad, hi + pad
    span = hi - lo
    counts, _ = np.histogram(x, bins=grid_size, range=(lo, hi))
    a = dct(counts / counts.sum(), type=2)
    a2 = (a[1:] / 2.0) ** 2
    k_sq = np.arange(1, grid_size, dtype=np.float64) ** 2

    def g(t: float) -> float:
        with np.errstate(all="ignore"):
            return _isj_fixed_point(t, n_unique, k_sq, a2)

    try:
        f0, f1 = g(0.0), g(0.1)
        if not (np.isfinite(f0) and np.isfinite(f1)) or f0 * f1 > 0:
            raise ValueError("root not bracketed")
        t_star = brentq(g, 0.0, 0.1, maxiter=ISJ_MAX_ITER, xtol=1e-14)
        if not t_star > 0:
            raise ValueError("non-positive root")
    except (ValueError, RuntimeError) as exc:
        logger.debug("ISJ fixed point failed (%s); using Silverman's rule", exc)
        return silverman_bandwidth(x)
    return max(math.sqrt(t_star) * span, 1e-9 * (x.max() - x.min()))


def gaussian_kde(samples: np.ndarray, bandwidth: float, v: np.ndarray) -> np.ndarray:
    """``(1 / (n h)) * sum_i phi((v - s_i) / h)`` for every query in ``v``."""
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    s = np.asarray(samples, dtype=np.float64)
    out = np.empty(v.shape, dtype=np.float64)
    flat_v, flat_out = v.ravel(), out.reshape(-1)
    step = max(1, _KDE_BLOCK // max(1, s.size))
    norm = 1.0 / (s.size * bandwidth * _SQRT_2PI)
    for start in range(0, flat_v.size, step):
        z = (flat_v[start:start + step, None] - s[None, :]) / bandwidth
        flat_out[start:start + step] = norm * np.exp(-0.5 * z * z).sum(axis=1)
    return out


def _squash(k: np.ndarray, tau: float) -> np.ndarray:
    if tau <= 0.0:
        return np.ones_like(k)
    return np.where(k >= tau, 1.0, k / tau)


def _tau(kappas: np.ndarray, rho: float) -> float:
    return float(np.quantile(kappas, 1.0 - rho, method="lower"))


@dataclass(frozen=True)
class KdeModel:
    samples: np.ndarray
    bandwidth: float
    tau: float
    rho: float

    kind = "kde"

    def kappa(self, v) -> np.ndarray:
        return gaussian_kde(self.samples, self.bandwidth, v)

    def omega(self, v) -> np.ndarray:
        return _squash(self.kappa(v), self.tau)


@dataclass(frozen=True)
class HistModel:
    counts: np.ndarray
    total: int
    tau: float
    rho: float

    kind = "hist"

    def kappa(self, v) -> np.ndarray:
        codes = np.atleast_1d(np.asarray(v, dtype=np.float64))
        out = np.zeros(codes.shape, dtype=np.float64)
        known = (codes >= 0) & (codes < self.counts.size) & (codes == np.round(codes))
        out[known] = self.counts[codes[known].astype(np.intp)] / self.total
        return out

    def omega(self, v) -> np.ndarray:
        return _squash(self.kappa(v), self.tau)


LikelihoodModel = Union[KdeModel, HistModel]


def kappa(model: LikelihoodModel, v) -> np.ndarray:
    return model.kappa(v)


def omega(model: LikelihoodModel, v) -> np.ndarray:
    return model.omega(v)


def fit_model(values: np.ndarray, nominal: bool, rho: float, n_categories: int | None = None,
              value_range: float | None = None) -> LikelihoodModel:
    """Fit the likelihood model of one scoring node.

    Args:
        values: Target values of the node's training members.
        nominal: Whether the target is nominal (histogram) or numeric (KDE).
        rho: Fraction of the members whose density must reach ``tau``.
        n_categories: Category count of a nominal target.
        value_range: Range of the target over the whole dataset; sets the
            spike width when all values coincide.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot fit a likelihood model on zero values")
    if nominal:
        k = int(n_categories) if n_categories is not None else int(values.max()) + 1
        counts = np.bincount(values.astype(np.intp), minlength=k).astype(np.int64)
        total = int(values.size)
        tau = _tau(counts[values.astype(np.intp)] / total, rho)
        return HistModel(counts, total, tau, rho)
    try:
        # the absolute floor keeps the kernel finite for subnormal spreads
        h = max(botev_bandwidth(values), MIN_BANDWIDTH)
    except DegenerateSampleError:
        h = max(1e-9 * (value_range or 0.0), MIN_BANDWIDTH)
    samples = np.sort(values)
    samples.setflags(write=False)
    tau = _tau(gaussian_kde(samples, h, samples), rho)
    return KdeModel(samples, h, tau, rho)
