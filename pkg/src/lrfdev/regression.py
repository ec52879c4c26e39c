"""
Linear-smoother weights for fixed-design regression on a lattice and the
iterated-logarithm envelopes of the resulting stochastic term.

The stochastic part ``g_n(z) - E g_n(z) = sum w_{jk}(z) X_{jk}`` is again a
weighted sum of innovations, with weights
``b_{r,s} = sum_{jk} w_{jk}(z) a_{j+r,k+s}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyKernelSupport, InvalidRegime
from .field import IndexRegion, build_weights

__all__ = ["KERNELS", "RegressionDesign", "regression_weights", "regression_weight_grid",
           "smoother_weight_table", "LILEnvelope", "lil_envelope"]


def _epanechnikov(u2):
    return np.where(u2 < 1.0, 0.75 * (1.0 - u2), 0.0)


def _gaussian(u2):
    return np.exp(-0.5 * u2)


def _flat(u2):
    return np.ones_like(u2)


# kernels are radial: functions of the squared scaled distance
KERNELS = {"epanechnikov": _epanechnikov, "gaussian": _gaussian, "flat": _flat}


@dataclass(frozen=True)
class RegressionDesign:
    """Fixed lattice design with a kernel smoother evaluated at one point.

    Parameters
    ----------
    region : IndexRegion
    kernel : {"epanechnikov", "gaussian", "flat"}
    bandwidth : float
    eval_point : tuple of float
        Point ``z`` of length ``dim``.
    dim : {1, 2}
        With ``dim=2`` site ``(j,k)`` sits at ``((j-j1+1/2)/n_r, (k-k1+1/2)/n_s)``
        over the bounding box of the region.  With ``dim=1`` the sites are
        taken in lexicographic order and placed at ``(i+1/2)/|region|``.
    design_points : ndarray, optional
        Explicit ``(|region|, dim)`` array in the order of ``region.points()``.
    """

    region: IndexRegion
    kernel: str = "epanechnikov"
    bandwidth: float = 0.1
    eval_point: tuple = (0.5, 0.5)
    dim: int = 2
    design_points: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if len(self.eval_point) != self.dim:
            raise ValueError("eval_point must have length dim")

    def points(self):
        """Design points, one row per site of ``region.points()``."""
        if self.design_points is not None:
            z = np.asarray(self.design_points, dtype=float).reshape(self.region.cardinality, self.dim)
            return z
        jj, kk = self.region.points()
        j1, j2, k1, k2 = self.region.bbox
        if self.dim == 2:
            return np.column_stack([(jj - j1 + 0.5) / (j2 - j1 + 1), (kk - k1 + 0.5) / (k2 - k1 + 1)])
        n = jj.size
        return ((np.arange(n) + 0.5) / n).reshape(n, 1)


def _raw_weights(design):
    z = design.points()
    u = (z - np.asarray(design.eval_point, dtype=float)) / design.bandwidth
    k = KERNELS[design.kernel](np.sum(u * u, axis=1))
    total = float(np.sum(k))
    if total <= 0.0:
        raise EmptyKernelSupport(f"no design point within the kernel support at {design.eval_point}")
    return k / total


def regression_weights(design):
    """Normalized smoother weights ``{(j, k): w_jk(z)}`` summing to 1.

    Raises
    ------
    EmptyKernelSupport
        If every kernel evaluation vanishes.
    """
    w = _raw_weights(design)
    jj, kk = design.region.points()
    return {(int(j), int(k)): float(v) for j, k, v in zip(jj, kk, w)}


def regression_weight_grid(design):
    """The same weights laid out over the bounding box of the region."""
    w = _raw_weights(design)
    jj, kk = design.region.points()
    j1, j2, k1, k2 = design.region.bbox
    grid = np.zeros((j2 - j1 + 1, k2 - k1 + 1))
    grid[jj - j1, kk - k1] = w
    return grid


def smoother_weight_table(design, field, epsilon=1e-6, **kwargs):
    """Weight table of ``sum_jk w_jk(z) X_jk`` for the linear field ``field``."""
    return build_weights(field, design.region, epsilon, weights=regression_weight_grid(design), **kwargs)


@dataclass(frozen=True)
class LILEnvelope:
    """Envelope value in absolute units.

    ``condition_ok`` is None for the ``U_np`` mode; in ``loglog`` mode it
    records whether ``rho_n <= (ln n)^(-1/(p-2))`` held.
    """

    mode: str
    value: float
    x_sigma: float
    condition_ok: Optional[bool] = None
    rho_limit: float = math.nan


def lil_envelope(agg, p, sigma=None, mode="U_np", n=None):
    """Iterated-logarithm envelopes of the smoother's stochastic term.

    ``mode="U_np"`` gives ``sigma sqrt(2 ln(1/U_np))``; ``mode="loglog"``
    gives ``sigma sqrt(2 ln ln n)`` and checks the sufficient condition
    ``rho_n <= (ln n)^(-1/(p-2))``.

    Raises
    ------
    InvalidRegime
        If ``U_np >= 1`` or, in loglog mode, ``n < 3``.
    """
    p = float(p)
    if not p > 2:
        raise ValueError("p must exceed 2")
    sigma = math.sqrt(agg.sigma2) if sigma is None else float(sigma)
    U = agg.U.get(p)
    if U is None:
        raise ValueError(f"aggregates lack exponent {p}")
    if not U < 1.0:
        raise InvalidRegime(f"U_np = {U!r} is not below 1")
    if mode == "U_np":
        x = math.sqrt(2.0 * math.log(1.0 / U))
        return LILEnvelope(mode, sigma * x, x)
    if mode == "loglog":
        if n is None or n < 3:
            raise InvalidRegime("loglog envelope needs n >= 3")
        x = math.sqrt(2.0 * math.log(math.log(n)))
        limit = math.log(n) ** (-1.0 / (p - 2.0))
        return LILEnvelope(mode, sigma * x, x, bool(agg.rho <= limit), limit)
    raise ValueError(f"unknown envelope mode {mode!r}")
