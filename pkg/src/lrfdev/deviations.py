"""
Leading-order tail predictions for weighted sums and their validity ranges.

* moderate regime: ``P(S >= x sigma) ~ 1 - Phi(x)`` for ``x^2 <= 2 ln(1/U_p)``
* large regime (regularly varying right tail, positive weights):
  ``P(S >= x) ~ sum P(b xi >= x) = x^-t sum b^t h(x/b)`` for
  ``x / sigma >= C_t sqrt(ln(1/U_t))``
* uniform: the sum of the two parts above.

Also provides a numerically evaluated Fuk-Nagaev upper bound for sums of
upper-truncated terms, and normal-tail utilities.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .errors import InvalidRegime, NegativeWeight
from .field import aggregates

__all__ = [
    "normal_cdf",
    "normal_tail",
    "normal_tail_bounds",
    "c_t",
    "DeviationPrediction",
    "ValidityRanges",
    "moderate_prediction",
    "large_prediction",
    "uniform_prediction",
    "fuk_nagaev_bound",
    "validity_ranges",
    "write_predictions_csv",
]

DEFAULT_MARGIN = 0.05


def normal_cdf(x):
    """Standard normal distribution function."""
    out = special.ndtr(np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def normal_tail(x):
    """``1 - Phi(x)`` without cancellation."""
    out = special.ndtr(-np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def normal_tail_bounds(x):
    """Mills-ratio sandwich ``phi(x)/(1+x) <= 1 - Phi(x) <= phi(x)/x`` for ``x > 1``."""
    if not x > 1:
        raise ValueError("the bounds are stated for x > 1")
    phi = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return phi / (1.0 + x), phi / x


def c_t(t, margin=DEFAULT_MARGIN):
    """Large-deviation constant ``e^(t/2) (t+2)/sqrt(2) * (1 + margin)``."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return math.exp(t / 2.0) * (t + 2.0) / math.sqrt(2.0) * (1.0 + margin)


@dataclass(frozen=True)
class DeviationPrediction:
    """A predicted probability ``P(S >= x sigma)`` with its provenance.

    ``value`` is the prediction of the named regime; ``exact_value`` is the
    one-big-jump sum ``sum P(b xi >= x)`` when a heavy tail is present.
    """

    x: float
    x_abs: float
    regime: str
    value: float
    gaussian_part: float
    heavy_part: float
    moderate_ok: bool
    large_ok: bool
    dominant: str = ""
    exact_value: float = float("nan")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ValidityRanges:
    """Thresholds in sigma units.

    ``x_moderate_max`` is where the moderate range ends and ``x_large_min``
    where the large range begins; ``gap`` is positive when neither applies
    in between.
    """

    x_moderate_max: float
    x_large_min: float

    @property
    def gap(self):
        return self.x_large_min - self.x_moderate_max

    @property
    def overlap(self):
        return self.gap <= 0

    @property
    def degenerate(self):
        return self.x_moderate_max == 0.0 or self.x_large_min == 0.0


def _u(agg, t):
    t = float(t)
    if t not in agg.U:
        raise ValueError(f"aggregates lack exponent {t}")
    U = agg.U[t]
    if not U < 1.0:
        raise InvalidRegime(f"U_n{t:g} = {U!r} is not below 1")
    return U


def _u_or_one(agg, t):
    # U_t <= 1 always, with equality only for a single nonzero weight
    try:
        return _u(agg, t)
    except InvalidRegime:
        return 1.0


def _moderate_limit(agg, p, strict=True):
    U = _u(agg, p) if strict else _u_or_one(agg, p)
    return math.sqrt(2.0 * math.log(1.0 / U))


def _large_limit(agg, t, margin, strict=True):
    U = _u(agg, t) if strict else _u_or_one(agg, t)
    return c_t(t, margin) * math.sqrt(math.log(1.0 / U))


def validity_ranges(agg, p, t, margin=DEFAULT_MARGIN):
    """Upper end of the moderate range and lower end of the large range."""
    return ValidityRanges(_moderate_limit(agg, p), _large_limit(agg, t, margin))


def moderate_prediction(x, agg, p):
    """``1 - Phi(x)``, flagged by ``x^2 <= 2 ln(1/U_p)``.

    Raises
    ------
    InvalidRegime
        If ``U_p >= 1``.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    xmax = _moderate_limit(agg, p)
    g = normal_tail(x)
    return DeviationPrediction(float(x), float(x) * math.sqrt(agg.sigma2), "moderate", g, g, 0.0,
                               bool(x * x <= xmax * xmax), False, "gaussian")


def _positive_weights(w):
    b = w.nonzero_weights()
    if np.any(b < 0):
        raise NegativeWeight("large-deviation predictions need nonnegative weights")
    return b


def _heavy_tail(model):
    tail = getattr(model, "tail", None)
    if tail is None:
        raise ValueError("innovation model has no regularly varying tail")
    return tail


def _h_form(X, b, tail):
    # sum_b h(X/b) (b/X)^t, evaluated in logs
    z = X / b
    return float(np.sum(np.exp(tail.h.log(z) - tail.t * np.log(z))))


def large_prediction(x_abs, w, model, margin=DEFAULT_MARGIN):
    """One-big-jump prediction ``sum P(b xi >= x_abs)``.

    Parameters
    ----------
    x_abs : float
        Threshold in absolute units.
    w : WeightTable
        Stored weights must be nonnegative; exact zeros carry no innovation
        and are skipped.
    model : InnovationModel
        Must carry a tail descriptor ``(t, h, x0)``.
    margin : float
        Relative margin above the critical constant ``C_t``.

    Returns
    -------
    DeviationPrediction
        ``value`` is the exact sum; ``heavy_part`` is ``x^-t sum b^t h(x/b)``.
        A single nonzero weight (``U_t = 1``) is accepted: the sum is then
        exact and the large range starts at 0.
    """
    tail = _heavy_tail(model)
    b = _positive_weights(w)
    agg = aggregates(w, [tail.t])
    x_min = _large_limit(agg, tail.t, margin, strict=False)
    sigma = math.sqrt(agg.sigma2)
    x = x_abs / sigma
    exact = float(np.sum(model.survival(x_abs / b)))
    heavy = _h_form(x_abs, b, tail)
    return DeviationPrediction(float(x), float(x_abs), "large", exact, normal_tail(x), heavy,
                               False, bool(x >= x_min), "heavy", exact)


def uniform_prediction(x, w, agg, model, p, margin=DEFAULT_MARGIN):
    """Gaussian part plus heavy part, valid uniformly over ``x >= c > 0``.

    The heavy part uses ``h(x/b)(b/x)^t`` wherever ``x/b`` lies above the
    descriptor threshold and the exact survival below it.  The sum is
    clipped to 1.
    """
    tail = _heavy_tail(model)
    if not 2 < p < tail.t:
        raise ValueError("p must lie strictly between 2 and t")
    if not x > 0:
        raise ValueError("x must be positive")
    b = _positive_weights(w)
    if float(tail.t) not in agg.U:
        agg = aggregates(w, sorted(set(agg.U) | {float(tail.t)}))
    sigma = math.sqrt(agg.sigma2)
    X = x * sigma
    z = X / b
    above = z >= tail.x0
    heavy = _h_form(X, b[above], tail) if np.any(above) else 0.0
    if np.any(~above):
        heavy += float(np.sum(model.survival(z[~above])))
    exact = float(np.sum(model.survival(z)))
    g = normal_tail(x)
    xmod = _moderate_limit(agg, p, strict=False)
    xlarge = _large_limit(agg, tail.t, margin, strict=False)
    return DeviationPrediction(float(x), float(X), "uniform", min(1.0, g + heavy), g, heavy,
                               bool(x * x <= xmod * xmod), bool(x >= xlarge),
                               "heavy" if heavy > g else "gaussian", exact)


def _fn_moments(b, model, y, m):
    """``A = sum E[(b xi)^m ; 0 < b xi < y]`` and ``B2 = sum E[(b xi)^2 ; b xi < y]``."""
    A = 0.0
    B2 = 0.0
    for bi in b:
        c = y / abs(bi)
        if bi > 0:
            A += bi ** m * model.truncated_moment(m, 0.0, c, absolute=True)
            B2 += bi * bi * model.truncated_moment(2, -math.inf, c)
        else:
            A += abs(bi) ** m * model.truncated_moment(m, -c, 0.0, absolute=True)
            B2 += bi * bi * model.truncated_moment(2, -c, math.inf)
    return A, B2


def fuk_nagaev_bound(w, model, x_abs, y, m):
    """Fuk-Nagaev bound on ``P(sum (b xi) 1{b xi <= y} >= x_abs)``.

    ``exp(-alpha^2 x^2 / (2 e^m B^2)) + (A / (beta x y^(m-1)))^(beta x / y)``
    with ``beta = m/(m+2)`` and ``alpha = 2/(m+2)``.  Equal weights share one
    moment evaluation.  The value may exceed 1.
    """
    if not (x_abs > 0 and y > 0 and m >= 2):
        raise ValueError("need x > 0, y > 0, m >= 2")
    vals, counts = np.unique(w.nonzero_weights(), return_counts=True)
    A = B2 = 0.0
    for v, k in zip(vals, counts):
        a, b2 = _fn_moments([v], model, y, m)
        A += k * a
        B2 += k * b2
    beta = m / (m + 2.0)
    alpha = 2.0 / (m + 2.0)
    first = math.exp(-alpha * alpha * x_abs * x_abs / (2.0 * math.exp(m) * B2)) if B2 > 0 else 0.0
    if A <= 0:
        return first
    base = A / (beta * x_abs * y ** (m - 1.0))
    expo = beta * x_abs / y
    second = math.exp(expo * math.log(base)) if expo * math.log(base) < 700 else math.inf
    return first + second


PREDICTION_COLUMNS = ["x", "regime", "value", "gaussian_part", "heavy_part", "moderate_ok", "large_ok"]


def write_predictions_csv(path_or_file, predictions):
    def rows(out):
        out.writerow(PREDICTION_COLUMNS)
        for d in predictions:
            out.writerow([repr(d.x), d.regime, repr(d.value), repr(d.gaussian_part), repr(d.heavy_part),
                          int(d.moderate_ok), int(d.large_ok)])
    if hasattr(path_or_file, "write"):
        rows(csv.writer(path_or_file, lineterminator="\n"))
    else:
        with open(path_or_file, "w", newline="") as fh:
            rows(csv.writer(fh, lineterminator="\n"))
