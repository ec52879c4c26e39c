"""
Standardized innovation laws (mean 0, variance 1).

Every law exposes its exact right-tail survival ``P(xi >= x)``, truncated
moments ``E[xi^k ; lower < xi < upper]`` and an i.i.d. sampler.  The heavy
tailed kinds are symmetric mixtures of a uniform core and Pareto-type tails
whose survival above a threshold ``x0`` is exactly ``h(x) / x^t`` with ``h``
from the constant / log-power family.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy import integrate, special

from .errors import NonintegrableMoment
from .slowly_varying import SlowlyVaryingFn

__all__ = [
    "RngStream",
    "TailDescriptor",
    "InnovationModel",
    "Gaussian",
    "Rademacher",
    "UniformCentered",
    "DiscreteCentered",
    "ParetoHybrid",
    "student_like",
    "sample",
    "survival",
    "truncated_moment",
    "innovation_from_dict",
    "write_survival_csv",
]

_SQRT3 = math.sqrt(3.0)
# upper end of log-space quadrature ranges; exp(z) stays finite
_Z_MAX = 700.0
_QUAD = dict(epsabs=1e-14, epsrel=1e-12, limit=400)


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, index)``.

    Distinct indices under one seed give statistically independent streams
    (``numpy.random.SeedSequence`` spawn keys).
    """

    seed: int
    index: int = 0

    def generator(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.index),))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class TailDescriptor:
    """Right tail ``P(xi >= x) = h(x) / x**t`` for every ``x >= x0``."""

    t: float
    h: SlowlyVaryingFn
    x0: float

    def __post_init__(self):
        if not self.t > 2:
            raise ValueError("tail index t must exceed 2")
        if not self.x0 > 0:
            raise ValueError("x0 must be positive")

    def survival(self, x):
        """``h(x)/x^t`` (only meaningful for ``x >= x0``)."""
        x = np.asarray(x, dtype=float)
        out = np.exp(self.h.log(x) - self.t * np.log(x))
        return out if out.ndim else float(out)


class InnovationModel:
    """Base class; subclasses are frozen dataclasses."""

    kind = "abstract"
    symmetric = True

    @property
    def moment_order_p(self):
        """Supremum of orders ``p`` with ``E|xi|^p < inf``."""
        return math.inf

    @property
    def tail(self) -> Optional[TailDescriptor]:
        return None

    @property
    def is_discrete(self):
        return False

    def draw(self, gen, size):
        raise NotImplementedError

    def survival(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def sum_sampler(self, gen, m, size):
        """Exact draws of the sum of ``m`` i.i.d. copies, or None if unavailable."""
        return None

    def truncated_moment(self, order, lower=-math.inf, upper=math.inf, absolute=False):
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.kind}


def _power(x, order, absolute):
    if absolute:
        return np.abs(x) ** order
    return x ** order


def _check_order(order, lower, absolute):
    if order < 0:
        raise ValueError("order must be nonnegative")
    if not absolute and float(order) != int(order) and lower < 0:
        raise ValueError("non-integer order over negative values needs absolute=True")


@dataclass(frozen=True)
class Gaussian(InnovationModel):
    """Standard normal innovations."""

    kind = "gaussian"

    def draw(self, gen, size):
        return gen.standard_normal(size)

    def survival(self, x):
        out = special.ndtr(-np.asarray(x, dtype=float))
        return out if np.ndim(out) else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)

    def sum_sampler(self, gen, m, size):
        return math.sqrt(m) * gen.standard_normal(size)

    def truncated_moment(self, order, lower=-math.inf, upper=math.inf, absolute=False):
        _check_order(order, lower, absolute)
        if not lower < upper:
            raise ValueError("need lower < upper")
        if float(order) == int(order) and not (absolute and lower < 0 < upper and int(order) % 2):
            k = int(order)
            if absolute and int(order) % 2 and upper <= 0:
                return float((-1) ** k * self._int_moment(k, lower, upper))
            return float(self._int_moment(k, lower, upper))
        if absolute and lower < 0 < upper:
            return (self.truncated_moment(order, lower, 0.0, True)
                    + self.truncated_moment(order, 0.0, upper, True))
        val, _ = integrate.quad(lambda x: _power(x, order, absolute) * float(self.pdf(x)),
                                lower, upper, **_QUAD)
        return val

    @staticmethod
    def _int_moment(k, a, b):
        # I_k = [-x^{k-1} phi(x)]_a^b + (k-1) I_{k-2}
        def phi(x):
            return 0.0 if math.isinf(x) else math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)

        def xpow_phi(x, j):
            if math.isinf(x):
                return 0.0
            return (x ** j) * phi(x)

        I0 = float(special.ndtr(b) - special.ndtr(a)) if b < 0 or a < 0 else \
            float(special.ndtr(-a) - special.ndtr(-b))
        if k == 0:
            return I0
        I1 = phi(a) - phi(b)
        if k == 1:
            return I1
        prev2, prev1 = I0, I1
        for j in range(2, k + 1):
            cur = xpow_phi(a, j - 1) - xpow_phi(b, j - 1) + (j - 1) * prev2
            prev2, prev1 = prev1, cur
        return prev1


@dataclass(frozen=True)
class Rademacher(InnovationModel):
    """Symmetric random signs."""

    kind = "rademacher"

    @property
    def is_discrete(self):
        return True

    @property
    def atoms(self):
        return np.array([-1.0, 1.0]), np.array([0.5, 0.5])

    def draw(self, gen, size):
        return 2.0 * gen.integers(0, 2, size=size) - 1.0

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= -1, 1.0, np.where(x <= 1, 0.5, 0.0))
        return out if out.ndim else float(out)

    def sum_sampler(self, gen, m, size):
        return 2.0 * gen.binomial(m, 0.5, size=size) - m

    def truncated_moment(self, order, lower=-math.inf, upper=math.inf, absolute=False):
        return _atom_moment(self.atoms, order, lower, upper, absolute)


def _atom_moment(atoms, order, lower, upper, absolute):
    _check_order(order, lower, absolute)
    if not lower < upper:
        raise ValueError("need lower < upper")
    v, p = atoms
    inside = (v > lower) & (v < upper)
    return float(np.sum(p[inside] * _power(v[inside], order, absolute)))


@dataclass(frozen=True)
class UniformCentered(InnovationModel):
    """Uniform on ``[-sqrt(3), sqrt(3)]``."""

    kind = "uniform"
    # xi = scale * V + shift with V ~ U[0, 1); lets samplers defer the affine map
    raw_affine = (2.0 * _SQRT3, -_SQRT3)

    def draw(self, gen, size):
        return _SQRT3 * (2.0 * gen.random(size) - 1.0)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip((_SQRT3 - x) / (2 * _SQRT3), 0.0, 1.0)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= _SQRT3, 1.0 / (2 * _SQRT3), 0.0)

    def truncated_moment(self, order, lower=-math.inf, upper=math.inf, absolute=False):
        _check_order(order, lower, absolute)
        if not lower < upper:
            raise ValueError("need lower < upper")
        a, b = max(lower, -_SQRT3), min(upper, _SQRT3)
        if a >= b:
            return 0.0
        return _power_integral(a, b, order, absolute) / (2 * _SQRT3)


def _power_integral(a, b, k, absolute):
    """``int_a^b x^k dx`` (or ``|x|^k``) for finite ``a < b``."""
    def F(x):
        if absolute:
            return math.copysign(abs(x) ** (k + 1) / (k + 1), x)
        return x ** (k + 1) / (k + 1)
    return F(b) - F(a)


@dataclass(frozen=True)
class DiscreteCentered(InnovationModel):
    """Finite-support law, affinely standardized at construction.

    ``values``/``probs`` describe the raw law; the stored atoms are
    ``(values - mean) / std``.
    """

    values: tuple = (-1.0, 1.0)
    probs: tuple = (0.5, 0.5)

    kind = "discrete"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.shape != p.shape or v.size < 2:
            raise ValueError("need at least two atoms with matching probabilities")
        if np.any(p <= 0) or not math.isclose(p.sum(), 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("probabilities must be positive and sum to 1")
        mean = float(np.dot(p, v))
        sd = math.sqrt(float(np.dot(p, (v - mean) ** 2)))
        if sd == 0:
            raise ValueError("degenerate law")
        z = (v - mean) / sd
        order = np.argsort(z)
        object.__setattr__(self, "_atoms", (z[order], p[order] / p.sum()))

    @property
    def is_discrete(self):
        return True

    @property
    def symmetric(self):
        v, p = self._atoms
        return bool(np.allclose(v, -v[::-1], atol=1e-14) and np.allclose(p, p[::-1], atol=1e-14))

    @property
    def atoms(self):
        return self._atoms

    def draw(self, gen, size):
        v, p = self._atoms
        return v[np.searchsorted(np.cumsum(p), gen.random(size), side="right").clip(0, v.size - 1)]

    def survival(self, x):
        v, p = self._atoms
        x = np.asarray(x, dtype=float)
        out = np.array([float(p[v >= xi].sum()) for xi in x.ravel()]).reshape(x.shape)
        return out if out.ndim else float(out)

    def truncated_moment(self, order, lower=-math.inf, upper=math.inf, absolute=False):
        return _atom_moment(self._atoms, order, lower, upper, absolute)

    def to_dict(self):
        return {"kind": "discrete", "values": list(self.values), "probs": list(self.probs)}


@dataclass(frozen=True)
class ParetoHybrid(InnovationModel):
    """Symmetric uniform core plus Pareto-type tails, standardized.

    Raw law ``X``: with probability ``core_weight`` uniform on ``[-x0, x0]``;
    otherwise ``|X| >= x0`` with a random sign and
    ``P(|X| >= x | tail) = h0(x) x^-t / (h0(x0) x0^-t)``.
    The innovation is ``X / sd(X)``.  Its tail descriptor is therefore
    ``h(x) = sd^-t * k * h0(sd * x)`` with ``k = (1 - core_weight) /
    (2 h0(x0) x0^-t)``, and its threshold is ``x0 / sd``.
    """

    t: float = 3.0
    h0: SlowlyVaryingFn = dc_field(default_factory=SlowlyVaryingFn.constant)
    core_weight: float = 0.5
    x0: float = 1.0

    kind = "hybrid"

    def __post_init__(self):
        if not self.t > 2:
            raise ValueError("tail index t must exceed 2")
        if not 0 <= self.core_weight < 1:
            raise ValueError("core_weight must lie in [0, 1)")
        if not self.x0 > 0:
            raise ValueError("x0 must be positive")
        if not self.h0.is_constant and self.h0.gamma >= self.t:
            raise ValueError("log-power exponent must be below t for a monotone tail")
        q, x0, t = self.core_weight, self.x0, self.t
        # conditional tail survival G(x) = exp(log_g(x)) for x >= x0
        log_g0 = self.h0.log(x0) - t * math.log(x0)
        if self.h0.is_constant:
            second = x0 * x0 * t / (t - 2.0)
        else:
            val, _ = integrate.quad(
                lambda z: 2.0 * math.exp((2.0 - t) * z + self.h0.log(math.exp(z)) - log_g0),
                math.log(x0), min(math.log(x0) + 700.0 / (t - 2.0), _Z_MAX), epsabs=0.0, epsrel=1e-13, limit=500)
            second = x0 * x0 + val
        var = q * x0 * x0 / 3.0 + (1.0 - q) * second
        sd = math.sqrt(var)
        k = (1.0 - q) / 2.0 * math.exp(-log_g0)
        tail = TailDescriptor(t, self.h0.scaled(k).rescaled(sd, t), x0 / sd)
        object.__setattr__(self, "_sd", sd)
        object.__setattr__(self, "_log_g0", log_g0)
        object.__setattr__(self, "_tail", tail)

    @property
    def raw_sd(self):
        return self._sd

    @property
    def tail(self):
        return self._tail

    @property
    def moment_order_p(self):
        return self.t

    # raw-law helpers ------------------------------------------------------
    def _raw_tail_surv(self, x):
        # P(|X| >= x | tail part) for x >= x0
        return np.exp(self.h0.log(x) - self.t * np.log(x) - self._log_g0)

    def _raw_survival(self, x):
        q, x0 = self.core_weight, self.x0
        ax = np.abs(x)
        upper = np.where(ax >= x0, (1 - q) / 2 * self._raw_tail_surv(np.maximum(ax, x0)),
                         (1 - q) / 2 + q * (x0 - ax) / (2 * x0))
        return np.where(x >= 0, upper, 1.0 - upper)

    def _raw_pdf(self, x):
        q, x0, t = self.core_weight, self.x0, self.t
        ax = np.maximum(np.abs(x), x0)
        tail_dens = (1 - q) / 2 * self._raw_tail_surv(ax) * (t - self.h0.log_derivative(ax)) / ax
        return np.where(np.abs(x) < x0, q / (2 * x0), tail_dens)

    def _inverse_tail(self, y):
        """``x >= x0`` with conditional tail survival equal to ``y`` in (0, 1]."""
        t, x0 = self.t, self.x0
        z = math.log(x0) - np.log(y) / t
        if self.h0.is_constant:
            return np.exp(z)
        target = np.log(y) + self._log_g0
        zmin = math.log(x0)
        for _ in range(60):
            x = np.exp(z)
            phi = self.h0.log(x) - t * z - target
            dphi = self.h0.log_derivative(x) - t
            step = phi / dphi
            z = np.maximum(z - step, zmin)
            if np.max(np.abs(step)) < 1e-14:
                break
        return np.exp(z)

    # public interface -----------------------------------------------------
    def draw(self, gen, size):
        u = gen.random(size)
        v = gen.random(size)
        q, x0 = self.core_weight, self.x0
        core = u < q
        right = u < q + (1 - q) / 2
        out = np.empty(np.shape(u))
        out[core] = x0 * (2.0 * v[core] - 1.0)
        tails = ~core
        mag = self._inverse_tail(1.0 - v[tails])
        out[tails] = np.where(right[tails], mag, -mag)
        return out / self._sd

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        out = self._raw_survival(self._sd * x)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = self._sd * self._raw_pdf(self._sd * x)
        return out if out.ndim else float(out)

    def truncated_moment(self, order, lower=-math.inf, upper=math.inf, absolute=False):
        _check_order(order, lower, absolute)
        if not lower < upper:
            raise ValueError("need lower < upper")
        if order >= self.t and (math.isinf(upper) or math.isinf(lower)):
            raise NonintegrableMoment(f"E|xi|^{order} is infinite for tail index t={self.t}")
        sd = self._sd
        a, b = sd * lower, sd * upper
        total = 0.0
        # core
        ca, cb = max(a, -self.x0), min(b, self.x0)
        if ca < cb:
            total += self.core_weight / (2 * self.x0) * _power_integral(ca, cb, order, absolute)
        # right and left tails
        for sign in (1.0, -1.0):
            lo, hi = (a, b) if sign > 0 else (-b, -a)
            lo = max(lo, self.x0)
            if lo >= hi:
                continue
            factor = 1.0 if (absolute or sign > 0) else (-1.0) ** int(order)
            total += factor * self._tail_power_integral(order, lo, hi)
        return total / sd ** order

    def _tail_power_integral(self, k, lo, hi):
        """``int_lo^hi x^k f_tail(x) dx`` for ``x0 <= lo < hi``."""
        q, t, x0 = self.core_weight, self.t, self.x0
        w = (1 - q) / 2
        if self.h0.is_constant:
            # density t x0^t x^(-t-1) on [x0, inf)
            if k == t:
                return w * t * x0 ** t * (math.log(hi) - math.log(lo))
            def F(x):
                return 0.0 if math.isinf(x) else x ** (k - t) / (k - t)
            return w * t * x0 ** t * (F(hi) - F(lo))
        zl = math.log(lo)
        zh = min(math.log(hi), _Z_MAX) if math.isfinite(hi) else min(zl + 700.0 / (t - k), _Z_MAX)

        def integrand(z):
            x = math.exp(z)
            # x^(k+1) f(x) with f = w G(x) (t - elasticity) / x
            return w * (t - float(self.h0.log_derivative(x))) * math.exp(
                k * z + float(self.h0.log(x)) - t * z - self._log_g0)
        val, _ = integrate.quad(integrand, zl, zh, epsabs=0.0, epsrel=1e-13, limit=500)
        return val

    def to_dict(self):
        return {"kind": "hybrid", "t": self.t, "h": self.h0.to_dict(),
                "core_weight": self.core_weight, "x0": self.x0}


def student_like(t):
    """Symmetric heavy-tailed law with exactly Pareto tails of index ``t``."""
    return ParetoHybrid(float(t), SlowlyVaryingFn.constant(1.0), 0.5, 1.0)


def innovation_from_dict(d):
    kind = d.get("kind")
    if kind == "gaussian":
        return Gaussian()
    if kind == "rademacher":
        return Rademacher()
    if kind == "uniform":
        return UniformCentered()
    if kind == "discrete":
        return DiscreteCentered(tuple(d["values"]), tuple(d["probs"]))
    if kind == "student_like":
        return student_like(d["t"])
    if kind == "hybrid":
        return ParetoHybrid(float(d["t"]), SlowlyVaryingFn.from_dict(d.get("h", {"kind": "constant"})),
                            float(d.get("core_weight", 0.5)), float(d.get("x0", 1.0)))
    raise ValueError(f"unknown innovation kind {kind!r}")


# module-level operations ---------------------------------------------------

def sample(model, rng_stream, count):
    """``count`` i.i.d. draws; deterministic given the stream's (seed, index)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return model.draw(rng_stream.generator(), int(count))


def survival(model, x):
    """Exact ``P(xi >= x)``."""
    return model.survival(x)


def truncated_moment(model, order, lower=-math.inf, upper=math.inf, absolute=False):
    """``E[xi^order ; lower < xi < upper]`` (``|xi|^order`` if ``absolute``)."""
    return model.truncated_moment(order, lower, upper, absolute)


def write_survival_csv(path, model, xs):
    """Tabulate ``x, survival, density`` (density blank for discrete laws)."""
    xs = np.asarray(xs, dtype=float)
    surv = np.atleast_1d(model.survival(xs))
    dens = None if model.is_discrete else np.atleast_1d(model.pdf(xs))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["x", "survival", "density"])
        for i, x in enumerate(xs):
            out.writerow([repr(float(x)), repr(float(surv[i])), "" if dens is None else repr(float(dens[i]))])
