"""
Slowly varying functions and numerical checks of Karamata's properties.

Two closed families are supported::

    constant:   l(x) = c
    log_power:  l(x) = c * ln(e + s*x)**gamma

Both are positive on [0, inf) and slowly varying at infinity.  The
``scale`` parameter ``s`` exists so that the family is closed under the
substitution ``x -> s*x`` that appears when a heavy-tailed innovation is
rescaled to unit variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

__all__ = ["SlowlyVaryingFn", "KaramataReport", "karamata_check"]


@dataclass(frozen=True)
class SlowlyVaryingFn:
    """A slowly varying function from the constant / log-power family.

    Parameters
    ----------
    kind : {"constant", "log_power"}
    c : float
        Positive multiplicative constant.
    gamma : float
        Exponent of the logarithm (ignored for ``constant``).
    scale : float
        Inner scale ``s`` of ``ln(e + s*x)`` (ignored for ``constant``).
    """

    kind: str = "constant"
    c: float = 1.0
    gamma: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "log_power"):
            raise ValueError(f"unknown slowly varying kind {self.kind!r}")
        if not self.c > 0:
            raise ValueError("slowly varying constant c must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.kind == "constant" and (self.gamma != 0.0 or self.scale != 1.0):
            object.__setattr__(self, "gamma", 0.0)
            object.__setattr__(self, "scale", 1.0)

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", float(c))

    @classmethod
    def log_power(cls, c=1.0, gamma=1.0, scale=1.0):
        return cls("log_power", float(c), float(gamma), float(scale))

    @property
    def is_constant(self):
        return self.kind == "constant" or self.gamma == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            out = np.full_like(x, self.c)
        else:
            out = self.c * np.log(math.e + self.scale * x) ** self.gamma
        return out if out.ndim else float(out)

    def log(self, x):
        """``ln l(x)``, evaluated without overflow."""
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            out = np.full_like(x, math.log(self.c))
        else:
            out = math.log(self.c) + self.gamma * np.log(np.log(math.e + self.scale * x))
        return out if out.ndim else float(out)

    def log_derivative(self, x):
        """Elasticity ``d ln l / d ln x``; tends to zero for slowly varying l."""
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            out = np.zeros_like(x)
        else:
            sx = self.scale * x
            out = self.gamma * sx / ((math.e + sx) * np.log(math.e + sx))
        return out if out.ndim else float(out)

    def rescaled(self, factor, power):
        """Return ``x -> factor**(-power) * l(factor * x)``.

        This is the slowly varying part of the tail after dividing a random
        variable with tail ``l(x)/x**power`` by ``factor``.
        """
        c = self.c * factor ** (-power)
        if self.is_constant:
            return SlowlyVaryingFn.constant(c)
        return SlowlyVaryingFn.log_power(c, self.gamma, self.scale * factor)

    def scaled(self, k):
        """Return ``k * l``."""
        if self.is_constant:
            return SlowlyVaryingFn.constant(self.c * k)
        return SlowlyVaryingFn.log_power(self.c * k, self.gamma, self.scale)

    def to_dict(self):
        if self.is_constant:
            return {"kind": "constant", "c": self.c}
        return {"kind": "log_power", "c": self.c, "gamma": self.gamma, "scale": self.scale}

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "constant")
        if kind == "constant":
            return cls.constant(d.get("c", 1.0))
        return cls.log_power(d.get("c", 1.0), d.get("gamma", 1.0), d.get("scale", 1.0))


@dataclass(frozen=True)
class KaramataReport:
    """Outcome of one Karamata property check at a single ``x``."""

    prop: int
    x: float
    theta: float
    numeric: float
    asymptotic: float

    @property
    def ratio(self):
        return self.numeric / self.asymptotic


_QUAD = dict(epsabs=0.0, epsrel=1e-13, limit=500)


def karamata_check(l, theta, x, A=1.0, prop=2, c_range=(0.5, 2.0)):
    """Numerically evaluate one of Karamata's properties of ``l`` at ``x``.

    Parameters
    ----------
    l : SlowlyVaryingFn
    theta : float
        Exponent.  Property 2 needs ``theta > -1``, property 3 needs
        ``theta < -1``; property 4 uses it as the power ``eta != 0``.
    x : float
        Evaluation point, ``x > A``.
    A : float
        Lower end of the domain of ``l`` (property 2 integrates from here).
    prop : {1, 2, 3, 4}
        1: ``max |l(t x)/l(x)|`` deviation over ``t`` in ``c_range``.
        2: ``int_A^x y^theta l(y) dy`` against ``x^(theta+1) l(x)/(theta+1)``; for
           constant ``l`` the ratio is exactly ``1 - (A/x)^(theta+1)``.
        3: ``int_x^inf y^theta l(y) dy`` against ``x^(theta+1) l(x)/(-theta-1)``.
        4: for ``theta < 0`` the supremum of ``t^theta l(t)`` over ``t >= x``,
           for ``theta > 0`` over ``A <= t <= x``, against ``x^theta l(x)``.

    Returns
    -------
    KaramataReport
        ``report.ratio`` tends to 1 as ``x`` grows.
    """
    if theta == -1:
        raise ValueError("theta = -1 is excluded")
    if not x > A:
        raise ValueError("need x > A")
    lx = l.log(x)

    def rel(v):
        # l(x e^v) / l(x)
        return math.exp(l.log(x * math.exp(v)) - lx)

    if prop == 1:
        ts = np.linspace(c_range[0], c_range[1], 201)
        r = np.exp(l.log(ts * x) - lx)
        worst = r[np.argmax(np.abs(r - 1.0))]
        return KaramataReport(1, x, theta, float(worst), 1.0)

    if prop == 2:
        if theta <= -1:
            raise ValueError("property 2 needs theta > -1")
        a = math.log(A / x)
        val, _ = integrate.quad(lambda v: math.exp((theta + 1) * v) * rel(v), a, 0.0, **_QUAD)
        return KaramataReport(2, x, theta, (theta + 1) * val, 1.0)

    if prop == 3:
        if theta >= -1:
            raise ValueError("property 3 needs theta < -1")
        # beyond v = 700/a the integrand is below e^-700 times a slowly varying factor
        a = -theta - 1.0
        top = min(700.0 / a, 700.0 - math.log(x))
        val, _ = integrate.quad(lambda v: math.exp(-a * v) * rel(v), 0.0, top,
                                points=[p / a for p in (1.0, 5.0, 20.0, 80.0) if p / a < top], **_QUAD)
        return KaramataReport(3, x, theta, (-theta - 1) * val, 1.0)

    if prop == 4:
        eta = theta
        if eta < 0:
            lo, hi = 0.0, 60.0 / abs(eta) + 60.0
        else:
            lo, hi = math.log(A / x), 0.0

        def g(v):
            return eta * v + l.log(x * math.exp(v)) - lx

        grid = np.linspace(lo, hi, 4001)
        vals = np.array([g(v) for v in grid])
        i = int(np.argmax(vals))
        best = vals[i]
        a_, b_ = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        if b_ > a_:
            res = optimize.minimize_scalar(lambda v: -g(v), bounds=(a_, b_), method="bounded",
                                           options={"xatol": 1e-12})
            best = max(best, -res.fun)
        return KaramataReport(4, x, theta, math.exp(best), 1.0)

    raise ValueError(f"unknown property {prop}")
