import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mda_sim.numerics import (
    DomainError,
    RicianParams,
    adaptive_simpson,
    bessel_j0,
    expected_min_rician,
    first_j0_zero,
    laguerre_half,
    marcum_q1,
    rician_mean,
    tail_product,
    truncated_product_integral,
    truncation_point,
)
from oracles import (
    j0_root_bisect,
    j0_series,
    laguerre_half_hyp,
    laguerre_half_series,
    rician_tail_mp,
    rician_tail_quad,
    sample_rician,
)

# frozen from j0_root_bisect() / j0_series(pi)
J0_ROOT = 2.404825557695773
J0_AT_PI = -0.30424217764409384


class TestBesselJ0:
    def test_origin(self):
        assert bessel_j0(0.0) == 1.0

    def test_first_root(self):
        assert abs(bessel_j0(J0_ROOT)) < 1e-10

    def test_at_pi(self):
        assert j0_series(math.pi) == pytest.approx(J0_AT_PI, abs=1e-15)
        assert bessel_j0(math.pi) == pytest.approx(J0_AT_PI, abs=1e-12)

    def test_matches_series_up_to_100(self):
        xs = np.concatenate([np.linspace(-100, 100, 81), [0.1, 1.5, 7.3, 55.5, 99.9]])
        worst = max(abs(bessel_j0(x) - j0_series(x, dps=120)) for x in xs)
        assert worst <= 1e-12

    def test_vectorised(self):
        xs = np.array([0.0, 1.0, 2.0])
        assert np.allclose(bessel_j0(xs), [bessel_j0(x) for x in xs], rtol=0, atol=0)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(DomainError):
            bessel_j0(bad)


class TestFirstZero:
    def test_root_value(self):
        assert j0_root_bisect() == pytest.approx(J0_ROOT, abs=1e-13)
        assert first_j0_zero() == pytest.approx(J0_ROOT, abs=1e-12)

    def test_defining_property(self):
        assert abs(bessel_j0(first_j0_zero())) < 1e-10

    def test_decorrelation_distance(self):
        assert first_j0_zero() / (2 * math.pi) == pytest.approx(0.38274, abs=5e-6)


class TestMarcumQ1:
    @pytest.mark.parametrize("a", [0.0, 0.3, 2.0, 17.0, 50.0])
    def test_zero_threshold(self, a):
        assert marcum_q1(a, 0.0) == 1.0

    def test_rayleigh(self):
        assert marcum_q1(0.0, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-12)
        bs = np.linspace(0, 50, 51)
        assert np.allclose(marcum_q1(0.0, bs), np.exp(-0.5 * bs**2), rtol=1e-10, atol=0)

    def test_one_one(self):
        oracle = rician_tail_quad(1.0, 1.0)
        assert oracle == pytest.approx(0.7328798, abs=1e-6)
        assert marcum_q1(1.0, 1.0) == pytest.approx(oracle, rel=1e-10)

    @pytest.mark.parametrize(
        "a,b",
        [(0.5, 0.5), (3.0, 0.01), (0.01, 3.0), (10.0, 10.0), (20.0, 25.0), (5.0, 30.0),
         (30.0, 5.0), (49.9, 50.0), (50.0, 49.9), (12.5, 40.0), (45.0, 48.0), (2.0, 14.0)],
    )
    def test_relative_accuracy(self, a, b):
        oracle = rician_tail_mp(a, b)
        assert marcum_q1(a, b) == pytest.approx(oracle, rel=1e-10)

    @pytest.mark.parametrize("a,b", [(51.0, 51.0), (60.0, 62.0), (100.0, 103.0), (200.0, 199.0)])
    def test_large_arguments(self, a, b):
        assert marcum_q1(a, b) == pytest.approx(rician_tail_mp(a, b), rel=1e-9)

    def test_monotone_on_grid(self):
        g = np.linspace(0, 50, 50)
        q = marcum_q1(g[:, None], g[None, :])
        assert np.all(np.diff(q, axis=1) <= 1e-15)  # non-increasing in b
        assert np.all(np.diff(q, axis=0) >= -1e-15)  # non-decreasing in a
        assert np.all((q >= 0) & (q <= 1))

    def test_broadcasting(self):
        out = marcum_q1([[1.0], [2.0]], [0.5, 1.0, 1.5])
        assert out.shape == (2, 3)
        assert out[1, 2] == marcum_q1(2.0, 1.5)

    @pytest.mark.parametrize("a,b", [(-1.0, 1.0), (1.0, -0.1), (math.nan, 1.0), (1.0, math.inf)])
    def test_domain(self, a, b):
        with pytest.raises(DomainError):
            marcum_q1(a, b)


class TestLaguerreHalf:
    def test_origin(self):
        assert laguerre_half(0.0) == 1.0

    def test_minus_one(self):
        oracle = laguerre_half_series(-1.0)
        assert oracle == pytest.approx(1.4465, abs=5e-5)
        assert laguerre_half(-1.0) == pytest.approx(oracle, rel=1e-10)

    @pytest.mark.parametrize("x", [-1e-3, -0.5, -3.0, -20.0, -50.0, -400.0, -5000.0])
    def test_hypergeometric_form(self, x):
        assert laguerre_half(x) == pytest.approx(laguerre_half_hyp(x), rel=1e-10)

    def test_minus_fifty_large_argument_expansion(self):
        # Rician mean at nu/sigma = 10 against nu + sigma^2/(2 nu) + sigma^4/(8 nu^3)
        mean = math.sqrt(math.pi / 2) * laguerre_half(-50.0)
        assert mean == pytest.approx(10 + 1 / 20 + 1 / 8000, rel=1e-6)

    @pytest.mark.parametrize("bad", [1e-9, 1.0, math.nan])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            laguerre_half(bad)


class TestRicianMean:
    def test_rayleigh(self):
        assert rician_mean(RicianParams(0.0, 1.0)) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
        assert rician_mean(RicianParams(0.0, 1.0)) == pytest.approx(1.2533141373, abs=1e-10)

    @pytest.mark.parametrize("nu,sigma", [(10.0, 1.0), (1.0, 2.0), (0.3, 0.05)])
    def test_monte_carlo(self, nu, sigma):
        rng = np.random.default_rng(11)
        mc = sample_rician(nu, sigma, 1_000_000, rng).mean()
        assert rician_mean(RicianParams(nu, sigma)) == pytest.approx(mc, rel=5e-3)

    def test_ten_one(self):
        assert rician_mean(RicianParams(10.0, 1.0)) == pytest.approx(10.05, abs=0.01)

    def test_non_decreasing_in_nu(self):
        for sigma in (0.1, 1.0, 3.0):
            means = [rician_mean(RicianParams(nu, sigma)) for nu in np.linspace(0, 20, 200)]
            assert np.all(np.diff(means) >= 0)
            assert min(means) >= rician_mean(RicianParams(0.0, sigma))

    @pytest.mark.parametrize("nu,sigma", [(-0.1, 1.0), (1.0, 0.0), (1.0, -1.0), (math.inf, 1.0)])
    def test_invalid_params(self, nu, sigma):
        with pytest.raises(DomainError):
            RicianParams(nu, sigma)


class TestAdaptiveSimpson:
    def test_sine(self):
        assert adaptive_simpson(np.sin, 0.0, math.pi, rtol=1e-10) == pytest.approx(2.0, rel=1e-9)

    def test_sharp_feature(self):
        f = lambda x: np.exp(-((x - 0.7) ** 2) / 1e-4)  # noqa: E731
        assert adaptive_simpson(f, 0.0, 2.0, rtol=1e-8) == pytest.approx(math.sqrt(math.pi * 1e-4), rel=1e-7)

    def test_reversed_and_empty(self):
        assert adaptive_simpson(np.exp, 1.0, 0.0) == pytest.approx(-(math.e - 1), rel=1e-6)
        assert adaptive_simpson(np.exp, 1.0, 1.0) == 0.0


class TestTruncation:
    def test_rayleigh_bound(self):
        x0 = truncation_point([RicianParams(0.0, 1.0)], eps=1e-8)
        assert x0 <= 12
        assert marcum_q1(0.0, x0) < 1e-8

    def test_product_below_eps(self):
        links = [RicianParams(1.0, 1.0), RicianParams(2.0, 1.0)]
        x0 = truncation_point(links, eps=1e-8)
        assert marcum_q1(1.0, x0) * marcum_q1(2.0, x0) < 1e-8

    @given(
        st.lists(st.tuples(st.floats(0, 5), st.floats(0.1, 2)), min_size=1, max_size=4),
        st.floats(1e-14, 1e-2),
        st.floats(1e-14, 1e-2),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_eps(self, pairs, e1, e2):
        links = [RicianParams(n, s) for n, s in pairs]
        lo, hi = sorted((e1, e2))
        assert truncation_point(links, hi) <= truncation_point(links, lo)

    @pytest.mark.parametrize("eps", [0.0, 1.0, -1e-3])
    def test_bad_eps(self, eps):
        with pytest.raises(DomainError):
            truncation_point([RicianParams(0.0, 1.0)], eps)


class TestExpectedMin:
    @pytest.mark.parametrize("nu,sigma", [(0.0, 1.0), (1.0, 2.0), (4.0, 0.3)])
    def test_single_link_is_mean(self, nu, sigma):
        p = RicianParams(nu, sigma)
        assert expected_min_rician([p]) == pytest.approx(rician_mean(p), rel=1e-6)

    def test_deterministic_limit(self):
        links = [RicianParams(1.0, 1e-6), RicianParams(2.0, 1e-6)]
        assert expected_min_rician(links) == pytest.approx(1.0, abs=1e-4)

    def test_three_links_monte_carlo(self):
        nu, sigma = [0.0, 1.0, 2.0], [1.0, 1.0, 1.0]
        mc = sample_rician(nu, sigma, 1_000_000, np.random.default_rng(5)).min(axis=1).mean()
        got = expected_min_rician([RicianParams(n, s) for n, s in zip(nu, sigma)])
        assert got == pytest.approx(mc, rel=0.01)

    def test_empty(self):
        with pytest.raises(DomainError):
            expected_min_rician([])

    @given(
        st.lists(st.tuples(st.floats(0, 5), st.floats(0.1, 2)), min_size=1, max_size=3),
        st.tuples(st.floats(0, 5), st.floats(0.1, 2)),
    )
    @settings(max_examples=40, deadline=None)
    def test_extra_link_never_raises_minimum(self, pairs, extra):
        base = [RicianParams(n, s) for n, s in pairs]
        more = base + [RicianParams(*extra)]
        assert expected_min_rician(more) <= expected_min_rician(base) * (1 + 2e-6)

    def test_tail_product_is_survival(self):
        links = [RicianParams(1.0, 0.5), RicianParams(0.2, 1.3)]
        samples = sample_rician([1.0, 0.2], [0.5, 1.3], 400_000, np.random.default_rng(2)).min(axis=1)
        for x in (0.2, 0.6, 1.0):
            assert tail_product(links, x) == pytest.approx(np.mean(samples > x), abs=3e-3)


def test_chebyshev_bound_small_sample():
    rng = np.random.default_rng(99)
    for _ in range(100):
        m = rng.integers(2, 5)
        links = [RicianParams(rng.uniform(0, 5), rng.uniform(0.1, 2)) for _ in range(m)]
        x0 = truncation_point(links)
        lhs = truncated_product_integral(links, x0)
        rhs = math.prod(truncated_product_integral([p], x0) for p in links) / x0 ** (m - 1)
        assert lhs >= rhs
