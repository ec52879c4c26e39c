"""
Davis-Gut series for partial sums of linear random fields.

For a positive nondecreasing weight ``h`` on ``[c, inf)`` with
``Psi(t) = int_c^t ds / (s h(s))`` the series

    S = sum_{n >= m} P(|S_n| > (1+eps) sigma_n sqrt(2 ln Psi(n))) / (n h(n))

converges iff ``eps > 0`` (an extra factor ``(ln Psi(n))^-b`` shifts the
boundary case ``eps = 0`` to ``b > 1/2``).  The probabilities are
proportional to ``Psi^-(1+eps)^2 / sqrt(ln Psi)``, which is used here as an
analytic proxy for large ``n``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .field import IndexRegion, build_weights
from .innovations import Gaussian
from .montecarlo import simulate_tail

__all__ = [
    "DavisGutSpec",
    "psi",
    "psi_inverse",
    "psi_first_exceed",
    "proxy_prob",
    "davis_gut_term",
    "series_partial",
    "Classification",
    "davis_gut_classify",
    "block_increments",
    "growth_slope",
    "FlatnessResult",
    "mc_flatness",
    "write_davis_gut_csv",
]

_WEIGHTS = ("one", "logpow", "log")


@dataclass(frozen=True)
class DavisGutSpec:
    """Weight function, lower limit and series parameters.

    Parameters
    ----------
    weight : {"one", "logpow", "log"}
        ``h = 1``, ``h = (ln t)^r / (1 - r)`` or ``h = ln t``.
    r : float
        Exponent for ``logpow``, in ``[0, 1)``.
    c : float, optional
        Lower limit; defaults to 1, or ``e`` for ``log``.
    epsilon : float
        Threshold inflation ``(1 + epsilon)``.
    b : float
        Exponent of the extra factor ``(ln Psi(n))^-b``.
    """

    weight: str = "one"
    r: float = 0.0
    c: float = 0.0
    epsilon: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.weight not in _WEIGHTS:
            raise ValueError(f"unknown weight {self.weight!r}")
        if not 0 <= self.r < 1:
            raise ValueError("r must lie in [0, 1)")
        c = self.c or (math.e if self.weight == "log" else 1.0)
        if c < 1:
            raise ValueError("c must be at least 1")
        if self.weight == "log" and c <= 1:
            raise ValueError("h = ln t needs c > 1")
        object.__setattr__(self, "c", float(c))

    def h(self, t):
        t = np.asarray(t, dtype=float)
        if self.weight == "one":
            out = np.ones_like(t)
        elif self.weight == "logpow":
            out = np.log(t) ** self.r / (1.0 - self.r)
        else:
            out = np.log(t)
        return out if out.ndim else float(out)

    def to_dict(self):
        return {"weight": self.weight, "r": self.r, "c": self.c, "epsilon": self.epsilon, "b": self.b}


def psi(spec, t):
    """``Psi(t) = int_c^t ds/(s h(s))`` in closed form (``t >= c``)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < spec.c):
        raise ValueError("Psi is defined for t >= c")
    if spec.weight == "one":
        out = np.log(t) - math.log(spec.c)
    elif spec.weight == "logpow":
        e = 1.0 - spec.r
        out = np.log(t) ** e - math.log(spec.c) ** e
    else:
        out = np.log(np.log(t)) - math.log(math.log(spec.c))
    return out if out.ndim else float(out)


def _log_psi_inverse(spec, v):
    """``ln t`` with ``Psi(t) = v`` (stays finite where ``t`` would overflow)."""
    if spec.weight == "one":
        return v + math.log(spec.c)
    if spec.weight == "logpow":
        e = 1.0 - spec.r
        return (v + math.log(spec.c) ** e) ** (1.0 / e)
    return math.exp(v + math.log(math.log(spec.c)))


def psi_inverse(spec, v):
    return math.exp(_log_psi_inverse(spec, v))


def psi_first_exceed(spec):
    """Smallest integer ``m >= c`` with ``Psi(m) > 1``."""
    m = max(int(math.ceil(spec.c)), int(math.floor(psi_inverse(spec, 1.0))))
    while m - 1 >= spec.c and psi(spec, m - 1) > 1.0:
        m -= 1
    while psi(spec, m) <= 1.0:
        m += 1
    return m


def proxy_prob(spec, n=None, psi_value=None):
    """``Psi^-(1+eps)^2 / sqrt(ln Psi)``, defined where ``Psi > 1``."""
    v = psi(spec, n) if psi_value is None else np.asarray(psi_value, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v <= 1.0):
        raise ValueError("the proxy needs Psi(n) > 1")
    out = v ** (-(1.0 + spec.epsilon) ** 2) / np.sqrt(np.log(v))
    return out if out.ndim else float(out)


def davis_gut_term(spec, n, prob):
    """``prob / (n h(n))``, times ``(ln Psi(n))^-b`` when ``b != 0``."""
    if not 0.0 <= prob <= 1.0:
        raise ValueError("prob must lie in [0, 1]")
    term = prob / (n * spec.h(n))
    if spec.b != 0.0:
        term *= math.log(psi(spec, n)) ** (-spec.b)
    return term


def series_partial(spec, probs, N):
    """Sum of terms for ``m <= n <= N``, accumulated in increasing ``n``."""
    m = psi_first_exceed(spec)
    return math.fsum(davis_gut_term(spec, n, probs[n]) for n in sorted(probs) if m <= n <= N)


@dataclass(frozen=True)
class Classification:
    converges: bool
    reason: str


_COROLLARY_WEIGHT = {"C31": "one", "C32": "logpow", "C33": "log"}


def davis_gut_classify(spec, corollary=None):
    """Analytic convergence of the series.

    ``corollary`` may name one of ``"C31"`` (``h = 1``, extra exponent ``b``),
    ``"C32"`` (``h = (ln t)^r/(1-r)``) or ``"C33"`` (``h = ln t``) and is
    checked against ``spec``; ``None`` applies the general rule.
    """
    if corollary is not None:
        want = _COROLLARY_WEIGHT.get(corollary)
        if want is None:
            raise ValueError(f"unknown corollary {corollary!r}")
        if spec.weight != want:
            raise ValueError(f"{corollary} concerns weight {want!r}, got {spec.weight!r}")
        if corollary != "C31" and spec.b != 0.0:
            raise ValueError(f"{corollary} has no extra logarithmic factor")
    eps, b = spec.epsilon, spec.b
    if eps > 0:
        return Classification(True, "eps > 0: the proxy decays like Psi^-(1+eps)^2 against dPsi")
    if eps < 0:
        return Classification(False, "eps < 0: terms are not summable against dPsi")
    if b > 0.5:
        return Classification(True, "eps = 0: integral of (ln Psi)^-(b+1/2) dPsi/Psi converges for b > 1/2")
    return Classification(False, "eps = 0: integral of (ln Psi)^-(b+1/2) dPsi/Psi diverges for b <= 1/2")


def _proxy_term_n(spec, n):
    v = psi(spec, n)
    return proxy_prob(spec, psi_value=v) * np.log(v) ** (-spec.b) / (n * spec.h(n))


def block_increments(spec, psi_start=2.0, psi_max=1e6, ratio=2.0, n_direct=10 ** 6):
    """Proxy-series increments over blocks ``[Psi_k, Psi_k * ratio)``.

    Blocks whose integer range lies below ``n_direct`` are summed term by
    term; beyond it the sum is replaced by ``int proxy (ln Psi)^-b dPsi``
    (``dn / (n h(n)) = dPsi``), whose error relative to the sum is ``O(1/n)``.

    Returns
    -------
    ndarray of shape (K, 2)
        Columns ``Psi_k`` and the block increment.
    """
    if not (psi_start > 1 and ratio > 1 and psi_max > psi_start):
        raise ValueError("need 1 < psi_start < psi_max and ratio > 1")
    rows = []
    lo = psi_start
    while lo * ratio <= psi_max * (1 + 1e-12):
        hi = lo * ratio
        if hi <= psi(spec, n_direct):
            n1 = max(int(math.ceil(psi_inverse(spec, lo))), int(math.ceil(spec.c)))
            n2 = int(math.ceil(psi_inverse(spec, hi)))
            ns = np.arange(n1, n2, dtype=float)
            ns = ns[(psi(spec, ns) >= lo) & (psi(spec, ns) < hi)] if ns.size else ns
            inc = math.fsum(_proxy_term_n(spec, ns)) if ns.size else 0.0
        else:
            # substitute Psi = e^u
            def f(u):
                return math.exp(u) * float(proxy_prob(spec, psi_value=math.exp(u))) * u ** (-spec.b)
            inc, _ = integrate.quad(f, math.log(lo), math.log(hi), epsabs=0.0, epsrel=1e-12)
        rows.append((lo, inc))
        lo = hi
    return np.array(rows)


def growth_slope(spec, psi_start=2.0, psi_max=1e6, ratio=2.0, n_direct=10 ** 6, tail_fraction=0.5):
    """Fitted slope of ``ln increment`` against ``ln Psi`` over the last blocks.

    A negative slope means geometrically shrinking block increments
    (convergence); a nonnegative one means they do not shrink.
    """
    rows = block_increments(spec, psi_start, psi_max, ratio, n_direct)
    k = max(3, int(len(rows) * tail_fraction))
    tail = rows[-k:]
    return float(np.polyfit(np.log(tail[:, 0]), np.log(tail[:, 1]), 1)[0])


@dataclass(frozen=True)
class FlatnessResult:
    ns: tuple
    psi: tuple
    thresholds: tuple
    mc_prob: tuple
    stderr: tuple
    proxy: tuple
    slope: float

    @property
    def ratios(self):
        return tuple(p / q for p, q in zip(self.mc_prob, self.proxy))


def mc_flatness(spec, field, ns=(16, 32, 64), model=None, n_samples=10 ** 7, seed=0,
                epsilon=1e-6, workers=None, **weight_kwargs):
    """Monte Carlo probabilities ``P(|S_n| > (1+eps) sigma_n sqrt(2 ln Psi(n)))``
    on ``[1,n]^2`` divided by the proxy; returns the log-log slope in ``n``."""
    model = Gaussian() if model is None else model
    out_p, out_se, out_x, out_psi, out_proxy = [], [], [], [], []
    for i, n in enumerate(ns):
        w = build_weights(field, IndexRegion.square(n), epsilon, **weight_kwargs)
        v = float(psi(spec, n))
        x = (1.0 + spec.epsilon) * math.sqrt(2.0 * math.log(v))
        est = simulate_tail(w, model, [x], n_samples, seed, two_sided=True, workers=workers,
                            key_prefix=(i,))[0]
        out_p.append(est.p_hat)
        out_se.append(est.stderr)
        out_x.append(x)
        out_psi.append(v)
        out_proxy.append(float(proxy_prob(spec, psi_value=v)))
    ratios = np.array(out_p) / np.array(out_proxy)
    slope = float(np.polyfit(np.log(np.array(ns, dtype=float)), np.log(ratios), 1)[0])
    return FlatnessResult(tuple(ns), tuple(out_psi), tuple(out_x), tuple(out_p), tuple(out_se),
                          tuple(out_proxy), slope)


DG_COLUMNS = ["n", "psi", "proxy_prob", "mc_prob", "term", "partial_sum"]


def write_davis_gut_csv(path_or_file, spec, ns, mc_probs=None):
    """Diagnostics table; terms use the MC probability when given, else the proxy."""
    mc_probs = mc_probs or {}
    m = psi_first_exceed(spec)

    def rows(out):
        out.writerow(DG_COLUMNS)
        acc = []
        for n in sorted(ns):
            if n < m:
                continue
            v = float(psi(spec, n))
            prox = float(proxy_prob(spec, psi_value=v))
            mc = mc_probs.get(n)
            term = davis_gut_term(spec, n, mc if mc is not None else min(prox, 1.0))
            acc.append(term)
            out.writerow([n, repr(v), repr(prox), "" if mc is None else repr(float(mc)), repr(term),
                          repr(math.fsum(acc))])
    if hasattr(path_or_file, "write"):
        rows(csv.writer(path_or_file, lineterminator="\n"))
    else:
        with open(path_or_file, "w", newline="") as fh:
            rows(csv.writer(fh, lineterminator="\n"))
