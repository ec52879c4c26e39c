import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from lrfdev.errors import NonintegrableMoment
from lrfdev.innovations import (
    DiscreteCentered,
    Gaussian,
    ParetoHybrid,
    Rademacher,
    RngStream,
    UniformCentered,
    innovation_from_dict,
    sample,
    student_like,
    survival,
    truncated_moment,
    write_survival_csv,
)
from lrfdev.slowly_varying import SlowlyVaryingFn

HYBRIDS = [
    student_like(3.0),
    ParetoHybrid(3.0, SlowlyVaryingFn.constant(2.0), 0.3, 1.5),
    ParetoHybrid(4.5, SlowlyVaryingFn.log_power(1.0, 1.0), 0.5, 1.0),
    ParetoHybrid(2.5, SlowlyVaryingFn.log_power(0.5, -0.5, 2.0), 0.7, 0.5),
]
CONTINUOUS = [Gaussian(), UniformCentered()] + HYBRIDS
ALL = CONTINUOUS + [Rademacher(), DiscreteCentered((-1.0, 0.0, 3.0), (0.3, 0.5, 0.2))]


def mp_normal_tail(x):
    return float(mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2)


def pdf_moment(model, k):
    """Independent quadrature of E xi^k from the density, split at the core edge."""
    edge = model.tail.x0 if model.tail is not None else 1.0
    pts = [-math.inf, -edge, 0.0, edge, math.inf]
    tot = 0.0
    for a, b in zip(pts, pts[1:]):
        v, _ = integrate.quad(lambda x: x ** k * model.pdf(x), a, b, epsabs=1e-13, epsrel=1e-13, limit=400)
        tot += v
    return tot


class TestStandardization:
    @pytest.mark.parametrize("model", CONTINUOUS, ids=lambda m: m.kind)
    def test_density_moments(self, model):
        assert pdf_moment(model, 0) == pytest.approx(1.0, abs=1e-10)
        assert pdf_moment(model, 1) == pytest.approx(0.0, abs=1e-10)
        assert pdf_moment(model, 2) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("model", ALL, ids=lambda m: m.kind)
    def test_truncated_moment_full_line(self, model):
        assert truncated_moment(model, 1) == pytest.approx(0.0, abs=1e-10)
        assert truncated_moment(model, 2) == pytest.approx(1.0, abs=1e-10)

    def test_discrete_standardized(self):
        m = DiscreteCentered((0.0, 1.0, 5.0), (0.2, 0.5, 0.3))
        v, p = m.atoms
        assert math.fsum(v * p) == pytest.approx(0.0, abs=1e-15)
        assert math.fsum(v * v * p) == pytest.approx(1.0, abs=1e-14)


class TestSurvival:
    def test_spec_values(self):
        assert survival(Rademacher(), 0.5) == 0.5
        assert survival(Rademacher(), 1.5) == 0.0
        assert survival(Gaussian(), 0.0) == 0.5

    @pytest.mark.parametrize("x", [-3.0, 0.5, 2.0, 5.0, 8.5])
    def test_gaussian_against_mpmath(self, x):
        assert survival(Gaussian(), x) == pytest.approx(mp_normal_tail(x), rel=1e-13)

    @pytest.mark.parametrize("model", HYBRIDS, ids=lambda m: f"t={m.t}")
    def test_regularly_varying_above_threshold(self, model):
        tail = model.tail
        xs = tail.x0 * np.array([1.0, 1.7, 3.0, 10.0, 1e3, 1e6])
        ratio = survival(model, xs) * xs ** tail.t / tail.h(xs)
        np.testing.assert_allclose(ratio, 1.0, rtol=1e-12)

    @pytest.mark.parametrize("model", HYBRIDS, ids=lambda m: f"t={m.t}")
    def test_affine_tail_consistency(self, model):
        sd, t = model.raw_sd, model.t
        q, x0 = model.core_weight, model.x0
        for x in np.linspace(1.2, 40.0, 5) * x0:
            # raw law above x0: (1-q)/2 * h0(x) x^-t / (h0(x0) x0^-t)
            raw = (1 - q) / 2 * model.h0(x) * x ** (-t) / (model.h0(x0) * x0 ** (-t))
            assert survival(model, x / sd) == pytest.approx(raw, rel=1e-12)
            # h(x) = sd^-t * h_raw(sd x)
            h_raw = raw * x ** t
            assert model.tail.h(x / sd) == pytest.approx(sd ** (-t) * h_raw, rel=1e-12)

    @pytest.mark.parametrize("model", ALL, ids=lambda m: m.kind)
    def test_nonincreasing(self, model):
        s = np.asarray(survival(model, np.linspace(-10, 10, 1000)))
        assert np.all(np.diff(s) <= 1e-15)
        assert 0.0 <= s.min() and s.max() <= 1.0

    def test_symmetric_kinds(self):
        for m in (Gaussian(), UniformCentered(), student_like(3)):
            for x in (0.3, 1.0, 2.5):
                assert survival(m, -x) == pytest.approx(1.0 - survival(m, x), abs=1e-14)


class TestTruncatedMoment:
    def test_spec_examples(self):
        assert truncated_moment(Rademacher(), 2) == 1.0
        assert truncated_moment(Gaussian(), 2, upper=0.0) == pytest.approx(0.5, abs=1e-14)
        with pytest.raises(NonintegrableMoment):
            truncated_moment(student_like(3), 4)

    @pytest.mark.parametrize("model", CONTINUOUS, ids=lambda m: m.kind)
    @pytest.mark.parametrize("order,lo,hi", [(1, 0.0, 1.3), (2, -0.5, 2.0), (3, 0.2, 4.0), (2.5, 0.1, 3.0)])
    def test_against_density_quadrature(self, model, order, lo, hi):
        f = lambda x: abs(x) ** order * model.pdf(x)
        edge = model.tail.x0 if model.tail is not None else 1.0
        pts = sorted({p for p in (lo, -edge, 0.0, edge, hi) if lo <= p <= hi})
        ref = math.fsum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
                        for a, b in zip(pts, pts[1:]))
        assert truncated_moment(model, order, lo, hi, absolute=True) == pytest.approx(ref, abs=1e-10)

    def test_heavy_moment_below_t_finite(self):
        m = student_like(3)
        v = truncated_moment(m, 2.5, 0.0, math.inf)
        assert math.isfinite(v) and v > 0

    def test_bounded_upper_allows_high_order(self):
        assert math.isfinite(truncated_moment(student_like(3), 5, 0.0, 10.0))

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            truncated_moment(Gaussian(), 2, 1.0, 0.0)


class TestSampling:
    def test_gaussian_tail_frequency(self):
        x = sample(Gaussian(), RngStream(1, 0), 10 ** 6)
        p = mp_normal_tail(2.0)
        assert abs(np.mean(x >= 2.0) - p) <= 4 * math.sqrt(p * (1 - p) / 1e6)

    def test_hybrid_tail_frequency(self):
        c = 2.0
        m = ParetoHybrid(3.0, SlowlyVaryingFn.constant(c), 0.5, 1.0)
        x = sample(m, RngStream(2, 0), 10 ** 7)
        thr = 2 * m.tail.x0
        p = m.tail.h(thr) / thr ** 3
        assert p == pytest.approx(survival(m, thr), rel=1e-13)
        assert abs(np.mean(x >= thr) - p) <= 4 * math.sqrt(p * (1 - p) / 1e7)

    @pytest.mark.parametrize("model", [Gaussian(), UniformCentered(), Rademacher(), HYBRIDS[2],
                                       DiscreteCentered((-1.0, 0.0, 3.0), (0.3, 0.5, 0.2))],
                             ids=lambda m: m.kind)
    def test_mean_variance(self, model):
        x = sample(model, RngStream(3, 1), 10 ** 6)
        m4 = truncated_moment(model, 4, absolute=True)
        assert abs(x.mean()) <= 4 / math.sqrt(1e6)
        assert abs(np.mean(x * x) - 1) <= 4 * math.sqrt((m4 - 1) / 1e6)

    @pytest.mark.parametrize("model", HYBRIDS[:2] + [HYBRIDS[3]], ids=lambda m: f"t={m.t}")
    def test_heavy_mean_and_tails(self, model):
        x = sample(model, RngStream(4, 0), 10 ** 6)
        assert abs(x.mean()) <= 4 / math.sqrt(1e6)
        for thr in (0.5, 1.0, 3.0):
            p = survival(model, thr)
            assert abs(np.mean(x >= thr) - p) <= 4.5 * math.sqrt(p * (1 - p) / 1e6)

    def test_stream_determinism(self):
        a = sample(student_like(3), RngStream(5, 2), 1000)
        b = sample(student_like(3), RngStream(5, 2), 1000)
        c = sample(student_like(3), RngStream(5, 3), 1000)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    @pytest.mark.parametrize("model", [Gaussian(), Rademacher()], ids=lambda m: m.kind)
    def test_grouped_sum_law(self, model):
        gen = np.random.default_rng(0)
        s = model.sum_sampler(gen, 9, 10 ** 6)
        assert abs(s.mean()) <= 4 * 3 / 1e3
        assert np.var(s) == pytest.approx(9.0, rel=0.01)
        if model.is_discrete:
            assert set(np.unique(s)) <= set(range(-9, 10, 2))


class TestConstruction:
    @pytest.mark.parametrize("d", [
        {"kind": "gaussian"}, {"kind": "rademacher"}, {"kind": "uniform"},
        {"kind": "student_like", "t": 3},
        {"kind": "hybrid", "t": 3.5, "h": {"kind": "log_power", "c": 1.0, "gamma": 1.0}, "core_weight": 0.4,
         "x0": 2.0},
        {"kind": "discrete", "values": [-1, 2], "probs": [2 / 3, 1 / 3]},
    ])
    def test_from_dict(self, d):
        m = innovation_from_dict(d)
        assert truncated_moment(m, 2) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("kw", [dict(t=2.0), dict(core_weight=1.0), dict(x0=0.0),
                                    dict(t=3.0, h0=SlowlyVaryingFn.log_power(1.0, 3.5))])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ParetoHybrid(**kw)

    def test_survival_csv(self, tmp_path):
        p = tmp_path / "s.csv"
        write_survival_csv(p, student_like(3), [0.5, 1.0, 2.0])
        rows = p.read_text().splitlines()
        assert rows[0] == "x,survival,density"
        assert float(rows[2].split(",")[1]) == survival(student_like(3), 1.0)
