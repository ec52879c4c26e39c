"""
Coefficient fields, index regions and the weight field of a partial sum.

For a linear random field ``X[j,k] = sum a[r,s] xi[j-r,k-s]`` the sum of
``X`` over a finite region ``G`` equals ``sum b[r,s] xi[-r,-s]`` with

    b[r,s] = sum_{(j,k) in G} w[j,k] a[j+r, k+s]

(``w == 1`` for a plain partial sum, kernel weights for a linear smoother).
This module evaluates ``b`` on a finite window around ``-G`` and certifies,
through the power-law envelope of ``a``, how much l^2 (or l^t) mass lies
outside that window.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy import integrate, signal, special

from .errors import DegenerateField, WindowOverflow
from .slowly_varying import SlowlyVaryingFn

__all__ = [
    "AngularProfile",
    "CoefficientField",
    "FiniteSupport",
    "ShortRange",
    "LongRangeIsotropic",
    "IndexRegion",
    "TailCertificate",
    "WeightTable",
    "WeightAggregates",
    "build_weights",
    "aggregates",
    "rho_bounds",
    "weight_table_bytes",
    "write_weight_table",
    "read_weight_table",
    "write_weight_csv",
    "coefficient_field_from_dict",
    "DEFAULT_MAX_CELLS",
]

DEFAULT_MAX_CELLS = 2 ** 24
_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Coefficient fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AngularProfile:
    """Bounded, piecewise constant function on the unit circle.

    ``boundaries`` are sector start angles in ``[0, 2*pi)`` (increasing);
    sector ``i`` covers ``[boundaries[i], boundaries[i+1])`` and the last
    sector wraps around to ``boundaries[0]``.
    """

    boundaries: tuple = (0.0,)
    values: tuple = (1.0,)

    def __post_init__(self):
        b = tuple(float(v) for v in self.boundaries)
        v = tuple(float(x) for x in self.values)
        if len(b) != len(v) or not b:
            raise ValueError("boundaries and values must have equal, nonzero length")
        if any(x < 0 or x >= _TWO_PI for x in b) or any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ValueError("boundaries must be increasing in [0, 2*pi)")
        if not all(np.isfinite(v)):
            raise ValueError("angular values must be finite")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value=1.0):
        return cls((0.0,), (float(value),))

    @property
    def is_constant(self):
        return len(self.values) == 1

    def __call__(self, r, s):
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        if self.is_constant:
            return np.full(np.broadcast(r, s).shape, self.values[0])
        theta = np.mod(np.arctan2(s, r), _TWO_PI)
        idx = np.searchsorted(self.boundaries, theta, side="right") - 1
        return np.asarray(self.values)[idx]  # idx == -1 wraps to last sector

    @property
    def max_abs(self):
        return max(abs(v) for v in self.values)

    @property
    def min_abs(self):
        return min(abs(v) for v in self.values)

    @property
    def sign(self):
        """+1 / -1 if every sector has that strict sign, else 0."""
        if all(v > 0 for v in self.values):
            return 1
        if all(v < 0 for v in self.values):
            return -1
        return 0

    def rotated_by_pi(self):
        pairs = sorted(((b + math.pi) % _TWO_PI, v) for b, v in zip(self.boundaries, self.values))
        return AngularProfile(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def to_dict(self):
        if self.is_constant:
            return {"kind": "constant", "value": self.values[0]}
        return {"kind": "piecewise", "boundaries": list(self.boundaries), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d):
        if d.get("kind", "constant") == "constant":
            return cls.constant(d.get("value", 1.0))
        return cls(tuple(d["boundaries"]), tuple(d["values"]))


class CoefficientField:
    """Square summable coefficients ``a[r, s]`` on Z^2.

    Subclasses are frozen dataclasses.  Infinite-support kinds describe
    ``|a[r,s]| = radial(|r|+|s|) * |angular(r, s)|`` away from the origin,
    which is what the truncation certificate works with.
    """

    finite = False

    def value(self, r, s):
        raise NotImplementedError

    def grid(self, r0, r1, s0, s1):
        """Evaluate ``a`` on the integer rectangle ``[r0, r1] x [s0, s1]``."""
        r = np.arange(r0, r1 + 1)[:, None]
        s = np.arange(s0, s1 + 1)[None, :]
        return self.value(r, s)

    def l1_norm(self) -> Optional[float]:
        """``sum |a|`` if finite, else None."""
        return None

    def lp_norm_upper(self, u):
        """Upper bound on ``||a||_u`` (inf if the norm diverges)."""
        raise NotImplementedError

    # envelope interface used by the truncation certificate
    def radial(self, d):
        raise NotImplementedError

    def radial_decreasing_from(self):
        """Smallest integer radius beyond which ``radial`` is nonincreasing."""
        return 1

    def radial_sup(self, d):
        """``sup_{u >= d, u integer} radial(u)`` for integer ``d >= 1``."""
        d = np.asarray(d, dtype=float)
        x_star = self.radial_decreasing_from()
        out = self.radial(np.maximum(d, 1.0))
        if x_star > 1:
            head = self.radial(np.arange(1, x_star + 1, dtype=float))
            suffix_max = np.maximum.accumulate(head[::-1])[::-1]
            low = d < x_star
            if np.any(low):
                idx = np.clip(d[low].astype(int) - 1, 0, x_star - 1)
                out = np.array(out, dtype=float)
                out[low] = suffix_max[idx]
        return out

    @property
    def angular_bounds(self):
        """(min |angular|, max |angular|, sign) over the circle."""
        return (1.0, 1.0, 1)

    def reflected(self):
        """Field ``(r, s) -> a[-r, -s]``."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class FiniteSupport(CoefficientField):
    """Finitely many nonzero coefficients, given as ``((r, s), value)`` pairs."""

    coefficients: tuple = (((0, 0), 1.0),)

    finite = True

    def __post_init__(self):
        merged = {}
        for (r, s), v in self.coefficients:
            key = (int(r), int(s))
            merged[key] = merged.get(key, 0.0) + float(v)
        if not merged:
            raise ValueError("finite-support field needs at least one coefficient")
        object.__setattr__(self, "coefficients", tuple(sorted(merged.items())))

    @classmethod
    def from_mapping(cls, mapping):
        return cls(tuple(mapping.items()))

    @property
    def bbox(self):
        rs = [k[0] for k, _ in self.coefficients]
        ss = [k[1] for k, _ in self.coefficients]
        return min(rs), max(rs), min(ss), max(ss)

    def value(self, r, s):
        r = np.asarray(r)
        s = np.asarray(s)
        out = np.zeros(np.broadcast(r, s).shape)
        for (u, v), a in self.coefficients:
            out = out + np.where((r == u) & (s == v), a, 0.0)
        return out

    def l1_norm(self):
        return float(sum(abs(v) for _, v in self.coefficients))

    def lp_norm_upper(self, u):
        return float(sum(abs(v) ** u for _, v in self.coefficients)) ** (1.0 / u)

    def radial(self, d):
        return np.zeros_like(np.asarray(d, dtype=float))

    def reflected(self):
        return FiniteSupport(tuple(((-r, -s), v) for (r, s), v in self.coefficients))

    def __add__(self, other):
        if not isinstance(other, FiniteSupport):
            return NotImplemented
        return FiniteSupport(self.coefficients + other.coefficients)

    def scaled(self, k):
        return FiniteSupport(tuple((rs, k * v) for rs, v in self.coefficients))

    def to_dict(self):
        return {"kind": "finite",
                "coefficients": [[r, s, v] for (r, s), v in self.coefficients]}


@dataclass(frozen=True)
class ShortRange(CoefficientField):
    """Absolutely summable isotropic decay in the l^1 radius ``d = |r|+|s|``.

    ``decay="geometric"``: ``a = scale * rate**d`` with ``0 < rate < 1``.
    ``decay="power"``: ``a = scale * (1 + d)**(-beta)`` with ``beta > 2``.
    """

    decay: str = "geometric"
    rate: float = 0.5
    beta: float = 3.0
    scale: float = 1.0

    def __post_init__(self):
        if self.decay == "geometric":
            if not 0 < self.rate < 1:
                raise ValueError("geometric rate must lie in (0, 1)")
        elif self.decay == "power":
            if not self.beta > 2:
                raise ValueError("power decay needs beta > 2 for absolute summability in 2-D")
        else:
            raise ValueError(f"unknown decay {self.decay!r}")
        if self.scale == 0:
            raise ValueError("scale must be nonzero")

    def radial(self, d):
        d = np.asarray(d, dtype=float)
        if self.decay == "geometric":
            return abs(self.scale) * self.rate ** d
        return abs(self.scale) * (1.0 + d) ** (-self.beta)

    def value(self, r, s):
        d = np.abs(np.asarray(r)) + np.abs(np.asarray(s))
        return math.copysign(1.0, self.scale) * self.radial(d)

    @property
    def angular_bounds(self):
        return (1.0, 1.0, 1 if self.scale > 0 else -1)

    def l1_norm(self):
        c = abs(self.scale)
        if self.decay == "geometric":
            q = self.rate
            return c * ((1 + q) / (1 - q)) ** 2
        # sum_d N(d) (1+d)^-beta with N(0)=1, N(d)=4d
        b = self.beta
        ring = (special.zeta(b - 1) - 1.0) - (special.zeta(b) - 1.0)
        return c * (1.0 + 4.0 * ring)

    def lp_norm_upper(self, u):
        c = abs(self.scale)
        if self.decay == "geometric":
            q = self.rate ** u
            return c * ((1 + q) / (1 - q)) ** (2.0 / u)
        b = self.beta * u
        if b <= 2:
            return math.inf
        ring = (special.zeta(b - 1) - 1.0) - (special.zeta(b) - 1.0)
        return c * (1.0 + 4.0 * ring) ** (1.0 / u)

    def reflected(self):
        return self

    def to_dict(self):
        return {"kind": "short_range", "decay": self.decay, "rate": self.rate,
                "beta": self.beta, "scale": self.scale}


@dataclass(frozen=True)
class LongRangeIsotropic(CoefficientField):
    """Power-law coefficients with index ``beta`` in (1, 2).

    ``a[r,s] = d**(-beta) * L(d) * angular(r/|.|, s/|.|)`` with
    ``d = |r| + |s|``, and ``a[0,0] = a00``.
    """

    beta: float = 1.5
    slowly_varying: SlowlyVaryingFn = dc_field(default_factory=SlowlyVaryingFn.constant)
    angular: AngularProfile = dc_field(default_factory=AngularProfile.constant)
    a00: float = 0.0

    def __post_init__(self):
        if not 1.0 < self.beta < 2.0:
            raise ValueError("long-range index beta must lie in (1, 2)")
        if self.radial_decreasing_from() > 10 ** 7:
            raise ValueError("slowly varying factor too steep for a certified envelope")

    def radial(self, d):
        d = np.asarray(d, dtype=float)
        return d ** (-self.beta) * self.slowly_varying(d)

    def radial_decreasing_from(self):
        L = self.slowly_varying
        if L.is_constant or L.gamma <= 0:
            return 1
        # elasticity of L is below gamma / ln(e + s d); decreasing once that is < beta
        x = (math.exp(L.gamma / self.beta) - math.e) / L.scale
        return max(1, int(math.ceil(x)))

    def value(self, r, s):
        r = np.asarray(r)
        s = np.asarray(s)
        d = (np.abs(r) + np.abs(s)).astype(float)
        origin = d == 0
        dd = np.where(origin, 1.0, d)
        out = self.radial(dd) * self.angular(r, s)
        return np.where(origin, self.a00, out)

    @property
    def angular_bounds(self):
        return (self.angular.min_abs, self.angular.max_abs, self.angular.sign)

    def lp_norm_upper(self, u):
        if self.beta * u <= 2:
            return math.inf
        # exact inner disc plus an upper bound on the rest
        D0 = 400
        inner = np.abs(self.grid(-D0, D0, -D0, D0))
        r = np.arange(-D0, D0 + 1)
        inside = (np.abs(r)[:, None] + np.abs(r)[None, :]) <= D0
        total = float(np.sum(inner[inside] ** u))
        amax = self.angular.max_abs
        d = np.arange(D0 + 1, D0 + 1 + 2 ** 16, dtype=float)
        total += float(np.sum(4 * d * (amax * self.radial_sup(d)) ** u))
        U = d[-1]
        tail = _tail_integral(lambda x: 4 * x * (amax * self.radial(x)) ** u, U)
        return (total + tail) ** (1.0 / u)

    def reflected(self):
        return LongRangeIsotropic(self.beta, self.slowly_varying, self.angular.rotated_by_pi(), self.a00)

    def to_dict(self):
        return {"kind": "long_range", "beta": self.beta,
                "slowly_varying": self.slowly_varying.to_dict(),
                "angular": self.angular.to_dict(), "a00": self.a00}


def coefficient_field_from_dict(d):
    """Build a coefficient field from its JSON description."""
    kind = d.get("kind")
    if kind == "finite":
        return FiniteSupport(tuple(((int(r), int(s)), float(v)) for r, s, v in d["coefficients"]))
    if kind == "short_range":
        return ShortRange(d.get("decay", "geometric"), float(d.get("rate", 0.5)),
                          float(d.get("beta", 3.0)), float(d.get("scale", 1.0)))
    if kind == "long_range":
        return LongRangeIsotropic(
            float(d["beta"]),
            SlowlyVaryingFn.from_dict(d.get("slowly_varying", {"kind": "constant", "c": 1.0})),
            AngularProfile.from_dict(d.get("angular", {"kind": "constant"})),
            float(d.get("a00", 0.0)),
        )
    raise ValueError(f"unknown coefficient field kind {kind!r}")


# ---------------------------------------------------------------------------
# Index regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndexRegion:
    """Finite union of disjoint integer rectangles ``[j1,j2] x [k1,k2]``."""

    rectangles: tuple
    label: str = ""

    def __post_init__(self):
        rects = tuple(tuple(int(v) for v in rect) for rect in self.rectangles)
        if not rects:
            raise ValueError("index region must be nonempty")
        for j1, j2, k1, k2 in rects:
            if j2 < j1 or k2 < k1:
                raise ValueError(f"empty rectangle {(j1, j2, k1, k2)}")
        for i, a in enumerate(rects):
            for b in rects[i + 1:]:
                if a[0] <= b[1] and b[0] <= a[1] and a[2] <= b[3] and b[2] <= a[3]:
                    raise ValueError(f"rectangles {a} and {b} overlap")
        object.__setattr__(self, "rectangles", rects)

    @classmethod
    def square(cls, n, start=1):
        """``[start, start+n-1]^2``."""
        return cls(((start, start + n - 1, start, start + n - 1),), label=f"n={n}")

    @classmethod
    def rectangle(cls, j1, j2, k1, k2):
        return cls(((j1, j2, k1, k2),), label=f"[{j1},{j2}]x[{k1},{k2}]")

    @property
    def cardinality(self):
        return sum((j2 - j1 + 1) * (k2 - k1 + 1) for j1, j2, k1, k2 in self.rectangles)

    @property
    def bbox(self):
        return (min(r[0] for r in self.rectangles), max(r[1] for r in self.rectangles),
                min(r[2] for r in self.rectangles), max(r[3] for r in self.rectangles))

    def indicator(self):
        """0/1 mask over the bounding box, indexed ``[j - j1, k - k1]``."""
        j1, j2, k1, k2 = self.bbox
        mask = np.zeros((j2 - j1 + 1, k2 - k1 + 1))
        for a1, a2, b1, b2 in self.rectangles:
            mask[a1 - j1:a2 - j1 + 1, b1 - k1:b2 - k1 + 1] = 1.0
        return mask

    def points(self):
        j1, _, k1, _ = self.bbox
        jj, kk = np.nonzero(self.indicator())
        return jj + j1, kk + k1

    def reflected(self):
        return IndexRegion(tuple((-j2, -j1, -k2, -k1) for j1, j2, k1, k2 in self.rectangles),
                           label=f"-({self.describe()})")

    def describe(self):
        if self.label:
            return self.label
        return "+".join(f"[{a},{b}]x[{c},{d}]" for a, b, c, d in self.rectangles)

    def to_dict(self):
        return {"rectangles": [list(r) for r in self.rectangles], "label": self.label}


# ---------------------------------------------------------------------------
# Truncation certificate
# ---------------------------------------------------------------------------

_EXPLICIT_TERMS = 2 ** 17


def _tail_integral(phi, U):
    """``int_U^inf phi(u) du`` for a decreasing, eventually power-law ``phi``."""
    # substitute u = U e^v; beyond v = 600 the integrand is below 1e-200 of its start
    val, _ = integrate.quad(lambda v: U * math.exp(v) * float(phi(U * math.exp(v))), 0.0, 600.0,
                            epsabs=0.0, epsrel=1e-10, limit=400)
    return val


@dataclass(frozen=True)
class TailCertificate:
    """Two-sided bound on ``sum |b|^t`` outside the stored window.

    The window is the bounding box of ``-G`` widened by ``K`` cells on every
    side.  A cell whose l^1 distance to that box is ``d`` satisfies
    ``|b| <= sum|w| * max|angular| * radial_sup(d)``; for single-signed
    coefficients and weights also ``|b| >= sum w * min|angular| *
    radial(d + box perimeter)``.  Summing over the exterior reduces to a
    one-dimensional series in ``d``, evaluated explicitly for 2**17 terms and
    bounded by an integral beyond.
    """

    field: Optional[CoefficientField]
    K: int
    width_r: int
    width_s: int
    weight_abs_sum: float
    weight_signed_sum: float

    def bracket(self, t=2.0):
        f = self.field
        if f is None or f.finite:
            return 0.0, 0.0
        amin, amax, sign = f.angular_bounds
        K, Wr, Ws = self.K, self.width_r, self.width_s
        d = np.arange(K + 1, K + 1 + _EXPLICIT_TERMS, dtype=float)
        c = np.where(d <= 2 * K, 2 * d - 2 * K - 2, d - 1)
        mult = 2.0 * (Wr + Ws) + 4.0 * c
        coef_hi = self.weight_abs_sum * amax
        hi = float(np.sum(mult * (coef_hi * f.radial_sup(d)) ** t))
        U = d[-1]
        hi += _tail_integral(lambda u: (2.0 * (Wr + Ws) + 4.0 * (u - 1)) * (coef_hi * f.radial(u)) ** t, U)

        lo = 0.0
        single_signed = sign != 0 and self.weight_signed_sum == self.weight_abs_sum
        if single_signed and K + 1 >= f.radial_decreasing_from():
            shift = Wr + Ws - 2
            coef_lo = self.weight_abs_sum * amin
            lo = float(np.sum(mult * (coef_lo * f.radial(d + shift)) ** t))
            lo += _tail_integral(
                lambda u: (2.0 * (Wr + Ws) + 4.0 * (u - 1)) * (coef_lo * f.radial(u + shift)) ** t, U + 1)
        return lo, hi

    def max_abs_outside(self):
        f = self.field
        if f is None or f.finite:
            return 0.0
        return float(self.weight_abs_sum * f.angular_bounds[1] * f.radial_sup(np.array([self.K + 1.0]))[0])


# ---------------------------------------------------------------------------
# Weight tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WeightTable:
    """Weights ``b[r,s]`` on the window ``[r0, r0+R-1] x [s0, s0+S-1]``.

    ``values[i, j]`` holds ``b[r0 + i, s0 + j]``.
    """

    r0: int
    s0: int
    values: np.ndarray
    sigma2: float
    stored_mass: float
    tail_lo: float
    tail_hi: float
    truncation_epsilon: float
    n_label: str = ""
    certificate: Optional[TailCertificate] = None

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def window(self):
        R, S = self.values.shape
        return (self.r0, self.r0 + R - 1, self.s0, self.s0 + S - 1)

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    @property
    def n_cells(self):
        return self.values.size

    def nonzero_weights(self):
        v = self.values.ravel()
        return v[v != 0.0]

    def get(self, r, s):
        r1, r2, s1, s2 = self.window
        if r1 <= r <= r2 and s1 <= s <= s2:
            return float(self.values[r - r1, s - s1])
        return 0.0

    def to_window(self, window):
        """Embed (or crop) the stored values into another window."""
        r1, r2, s1, s2 = window
        out = np.zeros((r2 - r1 + 1, s2 - s1 + 1))
        a1, a2, b1, b2 = self.window
        lo_r, hi_r = max(r1, a1), min(r2, a2)
        lo_s, hi_s = max(s1, b1), min(s2, b2)
        if lo_r <= hi_r and lo_s <= hi_s:
            out[lo_r - r1:hi_r - r1 + 1, lo_s - s1:hi_s - s1 + 1] = \
                self.values[lo_r - a1:hi_r - a1 + 1, lo_s - b1:hi_s - b1 + 1]
        return out

    def reflected(self):
        _, r2, _, s2 = self.window
        return WeightTable(-r2, -s2, self.values[::-1, ::-1].copy(), self.sigma2, self.stored_mass,
                           self.tail_lo, self.tail_hi, self.truncation_epsilon,
                           f"-({self.n_label})", self.certificate)

    def scaled(self, k):
        k2 = k * k
        return WeightTable(self.r0, self.s0, k * self.values, k2 * self.sigma2, k2 * self.stored_mass,
                           k2 * self.tail_lo, k2 * self.tail_hi, self.truncation_epsilon, self.n_label,
                           None if self.certificate is None else
                           TailCertificate(self.certificate.field, self.certificate.K, self.certificate.width_r,
                                           self.certificate.width_s, abs(k) * self.certificate.weight_abs_sum,
                                           k * self.certificate.weight_signed_sum))

    @classmethod
    def from_weights(cls, weights, n_label=""):
        """Table holding an explicit finite list of weights on a single row."""
        v = np.asarray(weights, dtype=float).reshape(1, -1).copy()
        mass = float(np.sum(v * v))
        if mass == 0:
            raise DegenerateField("all weights are zero")
        return cls(0, 0, v, mass, mass, 0.0, 0.0, 0.0, n_label or f"{v.size} weights")


def _window_cells(Wr, Ws, K):
    return (Wr + 2 * K) * (Ws + 2 * K)


def _direct_finite(field, region_w, j1, k1):
    """Exact summation of ``b`` for a finite-support field."""
    Jr, Jk = region_w.shape
    j2, k2 = j1 + Jr - 1, k1 + Jk - 1
    u1, u2, v1, v2 = field.bbox
    r0, r1 = u1 - j2, u2 - j1
    s0, s1 = v1 - k2, v2 - k1
    b = np.zeros((r1 - r0 + 1, s1 - s0 + 1))
    wrev = region_w[::-1, ::-1]
    for (u, v), a in field.coefficients:
        ra = u - j2 - r0
        sa = v - k2 - s0
        b[ra:ra + Jr, sa:sa + Jk] += a * wrev
    return r0, s0, b


def _fft_window(field, region_w, j1, k1, r0, r1, s0, s1):
    """Cross-correlate the sampled coefficient grid with the region weights."""
    Jr, Jk = region_w.shape
    A = field.grid(r0 + j1, r1 + j1 + Jr - 1, s0 + k1, s1 + k1 + Jk - 1)
    return signal.correlate(A, region_w, mode="valid", method="fft")


def build_weights(field, region, epsilon=1e-6, weights=None, method="auto",
                  max_cells=DEFAULT_MAX_CELLS, initial_margin=None, certify="tail"):
    """Compute the weight field ``b`` of a (weighted) partial sum over ``region``.

    Parameters
    ----------
    field : CoefficientField
    region : IndexRegion
    epsilon : float
        Target bound, relative to ``sigma_n^2``, on the l^2 mass left outside
        the stored window.  Ignored for finite-support fields, which are
        stored exactly.
    weights : ndarray, optional
        Per-site weights over the bounding box of ``region`` (defaults to the
        region indicator).  Sites outside the region must carry zero weight.
    method : {"auto", "direct", "fft"}
        ``direct`` is exact summation and only available for finite support.
    max_cells : int
        Memory cap on the stored window.
    initial_margin : int, optional
        First window margin ``K`` tried for infinite-support fields.
    certify : {"tail", "sigma2"}
        ``tail`` stops once the neglected l^2 mass is below
        ``epsilon * sigma_n^2``.  ``sigma2`` only requires the half-width of
        the bracket on that mass to be below it, which is reachable for
        ``beta`` close to 1 where the exterior mass itself stays large.

    Returns
    -------
    WeightTable

    Raises
    ------
    DegenerateField
        If ``sigma_n^2 == 0``.
    WindowOverflow
        If the certified window would exceed ``max_cells``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    j1, j2, k1, k2 = region.bbox
    mask = region.indicator()
    if weights is None:
        region_w = mask
    else:
        region_w = np.asarray(weights, dtype=float)
        if region_w.shape != mask.shape:
            raise ValueError(f"weights shape {region_w.shape} does not match region bbox {mask.shape}")
        if np.any((mask == 0) & (region_w != 0)):
            raise ValueError("weights must vanish outside the region")
    label = region.describe()
    wabs = float(np.sum(np.abs(region_w)))
    wsigned = float(np.sum(region_w)) if np.all(region_w >= 0) else -1.0

    if field.finite:
        if method in ("auto", "direct"):
            r0, s0, b = _direct_finite(field, region_w, j1, k1)
        elif method == "fft":
            u1, u2, v1, v2 = field.bbox
            r0, r1, s0, s1 = u1 - j2, u2 - j1, v1 - k2, v2 - k1
            b = _fft_window(field, region_w, j1, k1, r0, r1, s0, s1)
        else:
            raise ValueError(f"unknown method {method!r}")
        if b.size > max_cells:
            raise WindowOverflow(f"window of {b.size} cells exceeds cap {max_cells}")
        mass = float(np.sum(b * b))
        if mass == 0.0:
            raise DegenerateField("sigma_n^2 = 0: the weights cancel exactly")
        return WeightTable(r0, s0, b, mass, mass, 0.0, 0.0, 0.0, label,
                           TailCertificate(field, 0, j2 - j1 + 1, k2 - k1 + 1, wabs, wsigned))

    if method == "direct":
        raise ValueError("direct summation needs a finite-support field")
    if certify not in ("tail", "sigma2"):
        raise ValueError(f"unknown certify mode {certify!r}")
    Wr, Ws = j2 - j1 + 1, k2 - k1 + 1

    def slack(lo, hi):
        # quantity that must drop below epsilon * sigma^2
        return hi if certify == "tail" else 0.5 * (hi - lo)

    K = initial_margin if initial_margin is not None else max(8, int(math.ceil(max(Wr, Ws) / 4)))
    sigma2_upper = math.inf
    while True:
        if _window_cells(Wr, Ws, K) > max_cells:
            raise WindowOverflow(
                f"certifying epsilon={epsilon:g} needs a margin beyond K={K} "
                f"({_window_cells(Wr, Ws, K)} cells > cap {max_cells})")
        cert = TailCertificate(field, K, Wr, Ws, wabs, wsigned)
        lo, hi = cert.bracket(2.0)
        # no margin can pass while its slack exceeds epsilon times an upper bound on sigma^2
        if slack(lo, hi) > epsilon * sigma2_upper:
            K = int(math.ceil(K * 1.5))
            continue
        r0, r1 = -j2 - K, -j1 + K
        s0, s1 = -k2 - K, -k1 + K
        b = _fft_window(field, region_w, j1, k1, r0, r1, s0, s1)
        stored = float(np.sum(b * b))
        if stored + lo == 0.0 and hi == 0.0:
            raise DegenerateField("sigma_n^2 = 0")
        if stored + lo > 0 and slack(lo, hi) <= epsilon * (stored + lo):
            break
        sigma2_upper = min(sigma2_upper, stored + hi)
        K = int(math.ceil(K * 1.5))
    sigma2 = stored + 0.5 * (lo + hi)
    return WeightTable(r0, s0, b, sigma2, stored, lo, hi, hi / (stored + lo), label, cert)


# ---------------------------------------------------------------------------
# Aggregates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightAggregates:
    """``D_t = sum |b|^t``, ``U_t = D_t / D_2^(t/2)``, ``rho2 = max b^2 / sigma^2``.

    ``D_rel_err[t]`` bounds the relative error of ``D[t]`` due to truncation.
    """

    D: dict
    U: dict
    rho2: float
    sigma2: float
    D_rel_err: dict

    @property
    def rho(self):
        return math.sqrt(self.rho2)


def aggregates(w, exponents):
    """Moment functionals of a weight table.

    The stored window contributes exactly; the exterior contributes the
    midpoint of its certified bracket, whose half-width is reported in
    ``D_rel_err``.
    """
    exps = [float(t) for t in exponents]
    if not exps or any(t <= 0 for t in exps):
        raise ValueError("exponents must be a nonempty list of positive reals")
    if 2.0 not in exps:
        exps = exps + [2.0]
    absb = np.abs(w.nonzero_weights())
    D, err = {}, {}
    for t in exps:
        stored = float(np.sum(absb ** t))
        if t == 2.0:
            D[t] = w.sigma2
            err[t] = 0.5 * (w.tail_hi - w.tail_lo) / w.sigma2
            continue
        lo, hi = w.certificate.bracket(t) if w.certificate is not None else (0.0, 0.0)
        D[t] = stored + 0.5 * (lo + hi)
        err[t] = 0.5 * (hi - lo) / D[t] if D[t] > 0 else 0.0
    U = {t: D[t] / D[2.0] ** (t / 2.0) for t in exps}
    bmax = float(absb.max())
    if w.certificate is not None:
        bmax = max(bmax, w.certificate.max_abs_outside())
    return WeightAggregates(D, U, bmax * bmax / w.sigma2, w.sigma2, err)


def rho_bounds(field, region, sigma):
    """Upper bounds on ``rho_n = max|b| / sigma_n`` from norms of ``a``.

    Hoelder: ``rho <= ||a||_u |G|^(1/v) / sigma`` with ``1/u + 1/v = 1``;
    for unions of ``l`` rectangles also the Mallik-Woodroofe bound
    ``20 (sqrt(l) ||a||_2 / sigma)^(1/5) + 8 sqrt(l) ||a||_2 / sigma``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    out = []
    n = region.cardinality
    l1 = field.l1_norm()
    if l1 is not None and math.isfinite(l1):
        out.append(("l1", l1 / sigma))
    for u in (1.25, 1.5, 2.0):
        norm = field.lp_norm_upper(u)
        if math.isfinite(norm):
            v = u / (u - 1.0)
            out.append((f"holder_u={u:g}", norm * n ** (1.0 / v) / sigma))
    a2 = field.lp_norm_upper(2.0)
    if math.isfinite(a2):
        q = math.sqrt(len(region.rectangles)) * a2 / sigma
        out.append(("mallik_woodroofe", 20.0 * q ** 0.2 + 8.0 * q))
    return out


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

_MAGIC = b"LRFW"
_HEADER = struct.Struct("<4sIqqqqdd")


def weight_table_bytes(w):
    """Flat binary encoding: little-endian header then row-major float64 grid.

    Header layout: magic ``b"LRFW"``, uint32 version (1), int64 r_min, r_max,
    s_min, s_max, float64 sigma2, float64 truncation_epsilon.
    """
    r1, r2, s1, s2 = w.window
    return (_HEADER.pack(_MAGIC, 1, r1, r2, s1, s2, w.sigma2, w.truncation_epsilon)
            + np.ascontiguousarray(w.values, dtype="<f8").tobytes())


def write_weight_table(path, w):
    """Write :func:`weight_table_bytes` to ``path``."""
    with open(path, "wb") as fh:
        fh.write(weight_table_bytes(w))


def read_weight_table(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, r1, r2, s1, s2, sigma2, eps = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a weight table file")
    shape = (r2 - r1 + 1, s2 - s1 + 1)
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(shape).astype(float)
    mass = float(np.sum(values * values))
    return WeightTable(r1, s1, values, sigma2, mass, 0.0, max(sigma2 - mass, 0.0), eps, str(path))


def write_weight_csv(path, w, max_cells=250_000):
    """CSV export ``r,s,b`` of every stored cell (small windows only)."""
    if w.n_cells > max_cells:
        raise ValueError(f"window has {w.n_cells} cells; CSV export is capped at {max_cells}")
    r1, r2, s1, s2 = w.window
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["r", "s", "b"])
        for i, r in enumerate(range(r1, r2 + 1)):
            for j, s in enumerate(range(s1, s2 + 1)):
                out.writerow([r, s, repr(float(w.values[i, j]))])
