import io
import math

import numpy as np
import pytest

from lrfdev.davis_gut import (
    DG_COLUMNS,
    DavisGutSpec,
    block_increments,
    davis_gut_classify,
    davis_gut_term,
    growth_slope,
    proxy_prob,
    psi,
    psi_first_exceed,
    psi_inverse,
    series_partial,
    write_davis_gut_csv,
)

NS = np.array([2, 3, 10, 16, 100, 1e4, 1e6])


class TestPsi:
    def test_one(self):
        np.testing.assert_allclose(psi(DavisGutSpec("one"), NS), np.log(NS), rtol=1e-15)

    def test_logpow(self):
        np.testing.assert_allclose(psi(DavisGutSpec("logpow", r=0.3), NS), np.log(NS) ** 0.7, rtol=1e-15)

    def test_log(self):
        ns = NS[NS > math.e]
        np.testing.assert_allclose(psi(DavisGutSpec("log"), ns), np.log(np.log(ns)), rtol=1e-15)

    def test_first_exceed(self):
        assert psi_first_exceed(DavisGutSpec("log")) == 16
        assert psi(DavisGutSpec("log"), 15) < 1 < psi(DavisGutSpec("log"), 16)
        assert psi_first_exceed(DavisGutSpec("one")) == 3

    @pytest.mark.parametrize("spec", [DavisGutSpec("one"), DavisGutSpec("logpow", r=0.5),
                                      DavisGutSpec("log"), DavisGutSpec("one", c=2.0)])
    def test_monotone_and_zero_at_c(self, spec):
        assert psi(spec, spec.c) == 0.0
        v = psi(spec, np.linspace(spec.c, 1e5, 5000))
        assert np.all(np.diff(v) >= 0)

    @pytest.mark.parametrize("spec", [DavisGutSpec("one"), DavisGutSpec("logpow", r=0.4), DavisGutSpec("log")])
    def test_inverse(self, spec):
        for v in (0.5, 1.0, 2.5):
            assert psi(spec, psi_inverse(spec, v)) == pytest.approx(v, rel=1e-12)

    def test_psi_is_integral(self):
        from scipy import integrate
        spec = DavisGutSpec("logpow", r=0.25, c=2.0)
        val, _ = integrate.quad(lambda s: 1.0 / (s * spec.h(s)), 2.0, 500.0, epsrel=1e-12)
        assert psi(spec, 500.0) == pytest.approx(val, rel=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            psi(DavisGutSpec("log"), 2.0)
        with pytest.raises(ValueError):
            DavisGutSpec("logpow", r=1.0)
        with pytest.raises(ValueError):
            DavisGutSpec("nope")


class TestClassification:
    def test_spec_examples(self):
        assert davis_gut_classify(DavisGutSpec("one", epsilon=0.0, b=0.6), "C31").converges
        assert not davis_gut_classify(DavisGutSpec("logpow", r=0.3, epsilon=0.0), "C32").converges
        assert davis_gut_classify(DavisGutSpec("log", epsilon=0.1), "C33").converges

    def test_corollary_mismatch(self):
        with pytest.raises(ValueError):
            davis_gut_classify(DavisGutSpec("one"), "C33")
        with pytest.raises(ValueError):
            davis_gut_classify(DavisGutSpec("log", b=0.5), "C33")

    @pytest.mark.parametrize("weight,kw", [("one", {}), ("logpow", {"r": 0.3}), ("log", {})])
    @pytest.mark.parametrize("eps", [-0.5, 0.5])
    @pytest.mark.parametrize("b", [0.0, 1.0])
    def test_growth_slope_sign_agrees(self, weight, kw, eps, b):
        spec = DavisGutSpec(weight, epsilon=eps, b=b, **kw)
        slope = growth_slope(spec)
        assert (slope < 0) == davis_gut_classify(spec).converges


class TestSeries:
    def test_proxy(self):
        spec = DavisGutSpec("one", epsilon=0.5)
        v = psi(spec, 100)
        assert proxy_prob(spec, 100) == pytest.approx(v ** -2.25 / math.sqrt(math.log(v)), rel=1e-15)
        with pytest.raises(ValueError):
            proxy_prob(spec, 2)

    def test_term(self):
        spec = DavisGutSpec("log", b=0.0)
        assert davis_gut_term(spec, 100, 0.1) == pytest.approx(0.1 / (100 * math.log(100)), rel=1e-15)
        spec_b = DavisGutSpec("one", b=1.0)
        assert davis_gut_term(spec_b, 100, 0.1) == pytest.approx(0.1 / 100 / math.log(math.log(100)), rel=1e-15)

    def test_partial_sum_starts_at_m(self):
        spec = DavisGutSpec("log")
        probs = {n: 0.5 for n in range(3, 40)}
        ref = math.fsum(0.5 / (n * math.log(n)) for n in range(16, 31))
        assert series_partial(spec, probs, 30) == pytest.approx(ref, rel=1e-15)

    def test_block_increments_direct_vs_integral(self):
        spec = DavisGutSpec("one", epsilon=0.3)
        direct = block_increments(spec, psi_start=4.0, psi_max=12.0)
        integ = block_increments(spec, psi_start=4.0, psi_max=12.0, n_direct=10)
        np.testing.assert_allclose(direct[:, 1], integ[:, 1], rtol=5e-2)

    def test_csv(self):
        buf = io.StringIO()
        spec = DavisGutSpec("one", epsilon=0.5)
        write_davis_gut_csv(buf, spec, [16, 32, 2], {16: 0.01})
        rows = [r.split(",") for r in buf.getvalue().splitlines()]
        assert rows[0] == DG_COLUMNS
        assert [r[0] for r in rows[1:]] == ["16", "32"]
        assert float(rows[1][3]) == 0.01 and rows[2][3] == ""
        assert float(rows[2][5]) == pytest.approx(float(rows[1][4]) + float(rows[2][4]), rel=1e-15)
