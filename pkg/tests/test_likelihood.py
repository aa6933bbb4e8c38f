"""Profile curves, their normalized CDs, and the Wald companion."""

import csv
import math

import numpy as np
import pytest
from scipy.special import ndtr
from scipy.stats import kstest

from cdkit.cd_core import cd_eval, cd_quantile
from cdkit.errors import (
    OptimizationFailureError,
    ParameterDomainError,
    WindowTooNarrowError,
)
from cdkit.likelihood import (
    ProfileCurve,
    dump_profile,
    likelihood_acd,
    normalize_to_acd,
    profile_curve,
    scalar_maximizer,
    wald_acd,
)


def _normal_loglik(xbar, sigma, n):
    # constants dropped: they cancel in ell_star
    return lambda theta, _eta: -n * (theta - xbar) ** 2 / (2.0 * sigma ** 2)


def _exponential_loglik(total, n):
    return lambda theta, _eta: n * math.log(theta) - theta * total


class TestProfileCurve:
    def test_normal_curve_is_exact(self):
        xbar, sigma, n = 0.4, 2.0, 25
        curve = profile_curve(_normal_loglik(xbar, sigma, n), (xbar - 4.0, xbar + 4.0),
                              256, n=n)
        assert curve.theta_hat == pytest.approx(xbar, abs=1e-10)
        expected = -n * (curve.grid - xbar) ** 2 / (2.0 * sigma ** 2)
        assert np.max(np.abs(curve.ell_star - expected)) < 1e-9
        # -d2/n = 1/sigma^2, so i_n = sigma^2
        assert curve.i_n == pytest.approx(sigma ** 2, rel=1e-6)

    def test_exponential_curve_matches_algebra(self):
        n, m = 100, 1.25
        curve = profile_curve(_exponential_loglik(n * m, n), (0.05, 3.0), 512, n=n)
        theta_hat = 1.0 / m
        assert curve.theta_hat == pytest.approx(theta_hat, abs=1e-4)
        expected = n * (np.log(curve.grid * m) - curve.grid * m + 1.0)
        assert np.max(np.abs(curve.ell_star - expected)) < 1e-5
        # -ell'' at the peak is n / theta_hat^2
        assert curve.i_n == pytest.approx(theta_hat ** 2, rel=1e-3)

    def test_profiled_nuisance_recovers_sample_mean(self):
        rng = np.random.default_rng(6)
        x = rng.normal(1.7, 0.9, size=60)
        n, xbar = x.size, x.mean()

        def loglik(mu, sigma):
            return -n * math.log(sigma) - np.sum((x - mu) ** 2) / (2.0 * sigma ** 2)

        curve = profile_curve(loglik, (xbar - 1.0, xbar + 1.0), 128,
                              scalar_maximizer(0.05, 10.0), n=n)
        assert curve.theta_hat == pytest.approx(xbar, abs=1e-5)

    def test_peak_on_edge_raises(self):
        with pytest.raises(WindowTooNarrowError):
            profile_curve(_normal_loglik(5.0, 1.0, 20), (0.0, 1.0), 64, n=20)

    def test_small_grid_rejected(self):
        with pytest.raises(ParameterDomainError):
            profile_curve(_normal_loglik(0.0, 1.0, 20), (-1.0, 1.0), 63, n=20)

    def test_failing_evaluator_carries_theta(self):
        def bad(theta, _eta):
            if theta > 0.5:
                raise ValueError("no")
            return -theta ** 2

        with pytest.raises(OptimizationFailureError) as info:
            profile_curve(bad, (-1.0, 1.0), 64, n=10)
        assert info.value.theta is not None and info.value.theta > 0.5

    def test_curve_invariants_enforced(self):
        grid = np.linspace(-1.0, 1.0, 65)
        with pytest.raises(ParameterDomainError):
            ProfileCurve(grid=grid, ell_star=np.full(65, -1.0), theta_hat=0.0,
                         i_n=1.0, c_n=1.0, n=10)

    def test_dump_csv(self, tmp_path):
        curve = profile_curve(_normal_loglik(0.0, 1.0, 30), (-2.0, 2.0), 64, n=30)
        path = tmp_path / "curve.csv"
        dump_profile(curve, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["theta", "ell_star"]
        assert len(rows) == curve.grid.size + 1


class TestNormalizeToAcd:
    def test_matches_gaussian_integral(self):
        xbar, sigma, n = 0.4, 2.0, 25
        sd = sigma / math.sqrt(n)
        curve = profile_curve(_normal_loglik(xbar, sigma, n),
                              (xbar - 10.0 * sd, xbar + 10.0 * sd), 512, n=n)
        cd = normalize_to_acd(curve)
        exact = ndtr((curve.grid - xbar) / sd)
        got = cd_eval(cd, curve.grid)
        assert np.max(np.abs(got - exact)) < 1e-4
        assert cd.values[-1] >= 1.0 - 1e-9

    def test_narrow_window_rejected(self):
        xbar, sigma, n = 0.0, 1.0, 25
        sd = sigma / math.sqrt(n)
        curve = profile_curve(_normal_loglik(xbar, sigma, n),
                              (xbar - 2.0 * sd, xbar + 2.0 * sd), 64, n=n)
        with pytest.raises(WindowTooNarrowError):
            normalize_to_acd(curve)

    def test_quantile_spread_scales_like_root_n(self):
        spreads = {}
        for n in (100, 1000, 10000):
            sd = 1.0 / math.sqrt(n)
            curve = profile_curve(_normal_loglik(0.3, 1.0, n),
                                  (0.3 - 10.0 * sd, 0.3 + 10.0 * sd), 512, n=n)
            cd = normalize_to_acd(curve)
            spreads[n] = cd_quantile(cd, 0.95) - cd_quantile(cd, 0.05)
        root10 = math.sqrt(10.0)
        assert spreads[100] / spreads[1000] == pytest.approx(root10, rel=0.10)
        assert spreads[1000] / spreads[10000] == pytest.approx(root10, rel=0.10)

    def test_normalizer_matches_laplace_approximation(self):
        n, m = 400, 1.25
        curve = profile_curve(_exponential_loglik(n * m, n),
                              (0.8 / m * 0.5, 1.6 / m), 512, n=n)
        assert curve.c_n == pytest.approx(math.sqrt(2.0 * math.pi * curve.i_n / n),
                                          rel=0.05)


class TestWaldAcd:
    def test_center_and_spread(self):
        cd = wald_acd(2.0, 4.0, 100)
        sd = math.sqrt(4.0 / 100)
        assert cd_eval(cd, 2.0) == pytest.approx(0.5, abs=1e-12)
        assert cd_eval(cd, 2.0 + 1.96 * sd) == pytest.approx(0.9750021048517795, abs=1e-6)
        assert cd_quantile(cd, 0.5) == pytest.approx(2.0, abs=1e-12)

    def test_truncation_left_edge(self):
        cd = wald_acd(2.0, 4.0, 100, window=(2.0, math.inf))
        assert cd_eval(cd, 2.0) == 0.0
        # all mass now sits above theta_hat
        assert cd_quantile(cd, 0.5) > 2.0

    def test_truncated_quantile_round_trip(self):
        cd = wald_acd(0.0, 1.0, 50, window=(-0.1, 0.4))
        for s in (0.1, 0.5, 0.9):
            assert cd_eval(cd, cd_quantile(cd, s)) == pytest.approx(s, abs=1e-12)

    def test_window_must_contain_estimate(self):
        with pytest.raises(ParameterDomainError):
            wald_acd(2.0, 4.0, 100, window=(3.0, 5.0))


class TestAutoWiden:
    def test_recovers_from_narrow_start(self):
        xbar, sigma, n = 0.4, 2.0, 25
        sd = sigma / math.sqrt(n)
        cd = likelihood_acd(_normal_loglik(xbar, sigma, n),
                            (xbar - 1.5 * sd, xbar + 1.5 * sd), 256, n=n)
        assert cd_quantile(cd, 0.5) == pytest.approx(xbar, abs=1e-6)

    def test_recovers_from_miscentered_start(self):
        # peak far outside the initial window: first pass hits the edge
        cd = likelihood_acd(_normal_loglik(6.0, 1.0, 40), (0.0, 1.0), 128, n=40,
                            support=(-math.inf, math.inf))
        # the recovered window is wide, so grid resolution bounds the accuracy
        assert cd_quantile(cd, 0.5) == pytest.approx(6.0, abs=1e-3)

    def test_support_clamp_keeps_rate_positive(self):
        n, m = 50, 0.8
        cd = likelihood_acd(_exponential_loglik(n * m, n), (0.5 / m, 2.0 / m),
                            256, n=n, support=(1e-9, math.inf))
        assert cd.support[0] >= 0.0
        assert cd_quantile(cd, 0.5) == pytest.approx(1.0 / m, rel=0.05)


class TestAsymptoticAgreement:
    def test_profile_cd_approaches_wald_cd(self):
        # mean sup-distance between the two CDs shrinks with n
        rng = np.random.default_rng(404)
        sups = {}
        for n in (25, 100, 400):
            total = 0.0
            for _ in range(200):
                x = rng.exponential(1.0, size=n)
                theta0 = 1.0 / x.mean()
                window = (max(theta0 * (1.0 - 14.0 / math.sqrt(n)), theta0 * 0.02),
                          theta0 * (1.0 + 14.0 / math.sqrt(n)))
                curve = profile_curve(_exponential_loglik(x.sum(), n), window, 256, n=n)
                cd = normalize_to_acd(curve)
                wald = wald_acd(curve.theta_hat, curve.i_n, n, window)
                diff = cd_eval(cd, curve.grid) - cd_eval(wald, curve.grid)
                total += float(np.max(np.abs(diff)))
            sups[n] = total / 200.0
        assert sups[25] > sups[100] > sups[400]
        assert sups[400] < 0.03

    def test_u_values_are_uniform(self):
        # the u-value law is off uniform by ~1/sqrt(2 pi n) at finite n, which
        # sits near the KS critical value here, so the margin is seed-dependent
        rng = np.random.default_rng(21)
        n, theta0, reps = 200, 1.0, 2000
        u = np.empty(reps)
        for i in range(reps):
            x = rng.exponential(1.0 / theta0, size=n)
            est = 1.0 / x.mean()
            window = (max(est * 0.01, est * (1.0 - 14.0 / math.sqrt(n))),
                      est * (1.0 + 14.0 / math.sqrt(n)))
            curve = profile_curve(_exponential_loglik(x.sum(), n), window, 128, n=n)
            u[i] = cd_eval(normalize_to_acd(curve), theta0)
        assert kstest(u, "uniform").pvalue > 0.001
