import io
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrfdev.deviations import (
    PREDICTION_COLUMNS,
    c_t,
    fuk_nagaev_bound,
    large_prediction,
    moderate_prediction,
    normal_cdf,
    normal_tail,
    normal_tail_bounds,
    uniform_prediction,
    validity_ranges,
    write_predictions_csv,
)
from lrfdev.errors import InvalidRegime, NegativeWeight
from lrfdev.field import FiniteSupport, IndexRegion, WeightTable, aggregates, build_weights
from lrfdev.innovations import DiscreteCentered, Gaussian, ParetoHybrid, Rademacher, student_like
from lrfdev.montecarlo import enumerate_tail
from lrfdev.slowly_varying import SlowlyVaryingFn


def identity(n):
    return build_weights(FiniteSupport(), IndexRegion.square(n))


def mp_cdf(x):
    return float(mpmath.erfc(-mpmath.mpf(x) / mpmath.sqrt(2)) / 2)


class TestNormal:
    @pytest.mark.parametrize("x", [-8.0, -2.5, -0.3, 0.0, 0.7, 1.96, 4.0])
    def test_cdf_against_mpmath(self, x):
        assert abs(normal_cdf(x) - mp_cdf(x)) <= 1e-15

    def test_values(self):
        assert normal_cdf(0.0) == 0.5
        assert normal_tail(2.0) == pytest.approx(0.0227501319481792, rel=1e-14)

    def test_bounds_at_two(self):
        lo, hi = normal_tail_bounds(2.0)
        assert lo == pytest.approx(math.exp(-2) / (3 * math.sqrt(2 * math.pi)), rel=1e-15)
        assert hi == pytest.approx(math.exp(-2) / (2 * math.sqrt(2 * math.pi)), rel=1e-15)
        assert lo <= normal_tail(2.0) <= hi

    def test_bounds_bracket_grid(self):
        for x in np.linspace(1.0, 8.0, 101)[1:]:
            lo, hi = normal_tail_bounds(x)
            assert lo <= normal_tail(x) <= hi

    def test_bounds_domain(self):
        with pytest.raises(ValueError):
            normal_tail_bounds(1.0)


class TestModerate:
    def test_zero(self):
        d = moderate_prediction(0.0, aggregates(identity(10), [4]), 4)
        assert d.value == 0.5 and d.moderate_ok

    def test_identity_examples(self):
        agg = aggregates(identity(10), [3, 4])
        assert validity_ranges(agg, 4, 3).x_moderate_max == pytest.approx(math.sqrt(2 * math.log(100)), rel=1e-14)
        d = moderate_prediction(3.0, agg, 4)
        assert d.moderate_ok and d.value == pytest.approx(0.0013498980316301, rel=1e-12)
        assert not moderate_prediction(3.2, agg, 4).moderate_ok

    def test_invalid_regime(self):
        with pytest.raises(InvalidRegime):
            moderate_prediction(1.0, aggregates(WeightTable.from_weights([1.0]), [4]), 4)


class TestLarge:
    def test_c3(self):
        assert c_t(3, 0.0) == pytest.approx(15.84, abs=1e-2)
        assert c_t(3) == pytest.approx(1.05 * math.exp(1.5) * 5 / math.sqrt(2), rel=1e-15)

    def test_large_min_identity(self):
        v = validity_ranges(aggregates(identity(10), [3, 4]), 4, 3)
        assert v.x_large_min == pytest.approx(c_t(3) * math.sqrt(math.log(10)), rel=1e-13)
        assert v.x_large_min == pytest.approx(25.2, abs=0.05)
        assert v.gap > 0 and not v.overlap

    def test_single_weight_exact(self):
        m = student_like(3)
        w = WeightTable.from_weights([1.0])
        for x in (2.0, 5.0, 40.0):
            d = large_prediction(x, w, m)
            assert d.value == pytest.approx(m.tail.h(x) / x ** 3, rel=1e-13)
            assert d.large_ok

    def test_two_equal_weights(self):
        c = 1.7
        m = ParetoHybrid(3.0, SlowlyVaryingFn.constant(c), 0.5, 1.0)
        h = m.tail.h(1.0)
        w = WeightTable.from_weights([1 / math.sqrt(2)] * 2)
        x = 10.0
        d = large_prediction(x, w, m)
        assert d.heavy_part == pytest.approx(x ** -3 * 2 * (1 / math.sqrt(2)) ** 3 * h, rel=1e-13)

    @pytest.mark.parametrize("model", [student_like(3),
                                       ParetoHybrid(3.5, SlowlyVaryingFn.log_power(1.0, 1.0), 0.4, 1.0)])
    def test_forms_agree_above_threshold(self, model):
        w = build_weights(FiniteSupport.from_mapping({(0, 0): 1.0, (1, 0): 0.4}), IndexRegion.square(4))
        x = 5.0 * model.tail.x0 / w.nonzero_weights().min() * w.nonzero_weights().max()
        d = large_prediction(x, w, model)
        assert d.heavy_part == pytest.approx(d.value, rel=1e-10)

    def test_negative_weight(self):
        with pytest.raises(NegativeWeight):
            large_prediction(3.0, WeightTable.from_weights([1.0, -0.5]), student_like(3))

    def test_needs_heavy_tail(self):
        with pytest.raises(ValueError):
            large_prediction(3.0, WeightTable.from_weights([1.0, 1.0]), Gaussian())


class TestUniform:
    def test_gaussian_dominated(self):
        m = ParetoHybrid(3.0, SlowlyVaryingFn.constant(), 0.999, 1.0)
        w = identity(32)
        agg = aggregates(w, [2.5, 3])
        d = uniform_prediction(1.0, w, agg, m, 2.5)
        assert d.gaussian_part == pytest.approx(0.15865525393145707, rel=1e-14)
        assert d.heavy_part < 1e-3 * d.gaussian_part
        assert d.value == pytest.approx(d.gaussian_part + d.heavy_part, rel=1e-15)
        assert d.dominant == "gaussian"

    def test_heavy_eventually_dominates(self):
        m = student_like(3)
        w = identity(8)
        agg = aggregates(w, [2.5, 3])
        ratios = [uniform_prediction(x, w, agg, m, 2.5) for x in (2.0, 4.0, 6.0, 8.0)]
        r = [d.heavy_part / d.gaussian_part for d in ratios]
        assert all(a < b for a, b in zip(r, r[1:]))
        assert ratios[-1].dominant == "heavy"

    def test_below_threshold_uses_survival(self):
        m = student_like(3)
        w = WeightTable.from_weights([1.0])
        agg = aggregates(w, [2.5, 3])
        x = 0.5 * m.tail.x0
        d = uniform_prediction(x, w, agg, m, 2.5)
        assert d.heavy_part == m.survival(x)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.05, 4.0), st.integers(4, 20))
    def test_regime_consistency(self, x, n):
        m = student_like(3)
        w = identity(n)
        agg = aggregates(w, [2.5, 3])
        u = uniform_prediction(x, w, agg, m, 2.5)
        if u.moderate_ok and u.value < 1.0:
            r = u.value / moderate_prediction(x, agg, 2.5).value
            assert 1.0 <= r <= 1.0 + u.heavy_part / u.gaussian_part + 1e-15

    def test_p_range(self):
        w = identity(4)
        with pytest.raises(ValueError):
            uniform_prediction(1.0, w, aggregates(w, [3.5, 3]), student_like(3), 3.5)


class TestFukNagaev:
    def test_first_term_only(self):
        # no Rademacher mass in (0, 0.9): A = 0 and B^2 = 2 * 1/2
        w = WeightTable.from_weights([1.0, 1.0])
        b = fuk_nagaev_bound(w, Rademacher(), 2.0, 0.9, 2)
        assert b == pytest.approx(math.exp(-0.25 * 4 / (2 * math.e ** 2)), rel=1e-14)
        assert b == pytest.approx(0.9346, abs=1e-4)

    def test_formula_components(self):
        w = WeightTable.from_weights([1.0, 0.5, 0.5])
        m, y, x = 3.0, 1.2, 2.5
        model = Gaussian()
        A = 1.0 * model.truncated_moment(m, 0, y, absolute=True) + 2 * 0.5 ** m * model.truncated_moment(m, 0, y / 0.5, absolute=True)
        B2 = model.truncated_moment(2, upper=y) + 2 * 0.25 * model.truncated_moment(2, upper=y / 0.5)
        beta, alpha = m / (m + 2), 2 / (m + 2)
        ref = math.exp(-alpha ** 2 * x ** 2 / (2 * math.e ** m * B2)) + (A / (beta * x * y ** (m - 1))) ** (beta * x / y)
        assert fuk_nagaev_bound(w, model, x, y, m) == pytest.approx(ref, rel=1e-12)

    def test_nonincreasing_in_x(self):
        w = identity(3)
        # the raw second term grows with x while its base exceeds e (bound > 1 there)
        vals = [min(1.0, fuk_nagaev_bound(w, student_like(3), x, 2.0, 2.5)) for x in np.linspace(0.5, 20, 60)]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_dominates_exact_probability(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            b = rng.uniform(0.2, 1.5, size=int(rng.integers(2, 12)))
            w = WeightTable.from_weights(b)
            y = float(rng.uniform(0.3, 2.0))
            x = float(rng.uniform(0.5, 4.0))
            m = float(rng.uniform(2.0, 4.0))
            p = enumerate_tail(w, Rademacher(), x, truncate_at=y)
            assert p <= fuk_nagaev_bound(w, Rademacher(), x, y, m) + 1e-12

    def test_domain(self):
        with pytest.raises(ValueError):
            fuk_nagaev_bound(identity(2), Gaussian(), 1.0, 1.0, 1.5)


def test_predictions_csv():
    buf = io.StringIO()
    agg = aggregates(identity(4), [3])
    write_predictions_csv(buf, [moderate_prediction(1.0, agg, 3)])
    head, row = buf.getvalue().splitlines()
    assert head.split(",") == PREDICTION_COLUMNS
    assert row.split(",")[1] == "moderate"
