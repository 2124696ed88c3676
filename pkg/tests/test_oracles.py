import numpy as np
import pytest

from driftlab import (
    DegenerateEstimateError,
    IsotropicGaussian,
    LineGaussian,
    PointCloud,
    SmoothedCloud,
    SpiralCurve,
    TargetKind,
    UnsupportedDistributionError,
    analytic_score_fn,
    analytic_target_fn,
    analytic_targets,
    eps_from_score,
    f_from_score,
    five_point_cloud,
    four_point_cloud,
    mc_oracle_f,
    nearest_manifold_point,
    oracle_f_pointcloud,
    oracle_score_gaussian,
    oracle_score_pointcloud,
    oracle_score_smoothed,
    oracle_targets_line,
    score_from_eps,
    score_from_f,
    sub_rng,
)

OMT = lambda t: -np.expm1(-t)


def quadrature_log_density_1d(x, mu, sigma, t, nodes=40_001, span=12.0):
    """Independent oracle: log of the forward marginal for N(mu, sigma^2) data
    in 1-d, by direct trapezoid quadrature of the mixture integral."""
    a = np.exp(-t / 2.0)
    v = OMT(t)
    half = span * max(sigma, np.sqrt(v) / a + 1.0)
    z = np.linspace(mu - half, mu + half, nodes)
    integrand = np.exp(-((x - z * a) ** 2) / (2.0 * v)) * np.exp(
        -((z - mu) ** 2) / (2.0 * sigma**2))
    val = np.trapezoid(integrand, z)
    return np.log(val / (sigma * np.sqrt(2.0 * np.pi) * np.sqrt(2.0 * np.pi * v)))


class TestGaussianScore:
    def test_standard_normal_score_is_identity(self):
        rng = sub_rng(0, 0)
        for t in (0.0, 0.3, 2.0, 10.0):
            x = rng.standard_normal(2)
            s = oracle_score_gaussian(np.zeros(2), 1.0, x, t)
            assert np.allclose(s, x, rtol=1e-14)

    def test_zero_at_scaled_mean(self):
        mu = np.array([1.0, 2.0])
        s = oracle_score_gaussian(mu, 0.5, mu * np.exp(-0.35), 0.7)
        assert np.allclose(s, 0.0, atol=1e-14)

    def test_frozen_example(self):
        s = oracle_score_gaussian(np.array([1.0, 0.0]), 0.5, np.zeros(2), np.log(2.0))
        assert s[0] == pytest.approx(-1.1313708498984760, rel=1e-12)
        assert s[1] == 0.0

    def test_against_quadrature_finite_difference(self):
        # cross-check: -d/dx log p with p from direct quadrature of the
        # mixture integral, central differences of step 1e-5
        mu, sigma = 0.7, 0.5
        h = 1e-5
        rng = sub_rng(1, 0)
        for t in (0.05, 0.4, 1.3):
            x = float(rng.uniform(-1.5, 1.5))
            fd = -(quadrature_log_density_1d(x + h, mu, sigma, t)
                   - quadrature_log_density_1d(x - h, mu, sigma, t)) / (2 * h)
            s = oracle_score_gaussian(np.array([mu]), sigma, np.array([x]), t)[0]
            assert s == pytest.approx(fd, rel=1e-4)


class TestPointCloudF:
    def test_single_atom_is_constant(self):
        cloud = PointCloud([[1.0, -3.0]])
        rng = sub_rng(2, 0)
        for t in (0.01, 0.5, 9.0):
            x = rng.standard_normal(2) * 3
            assert np.allclose(oracle_f_pointcloud(cloud, x, t), [1.0, -3.0], rtol=1e-12)

    def test_symmetric_pair_at_midpoint(self):
        cloud = PointCloud([[-2.0, 0.0], [2.0, 0.0]])
        f = oracle_f_pointcloud(cloud, np.zeros(2), 0.7)
        assert np.allclose(f, 0.0, atol=1e-14)

    def test_batched_evaluation_matches_loop(self):
        cloud = five_point_cloud()
        rng = sub_rng(3, 0)
        xs = rng.standard_normal((7, 2))
        batch = oracle_f_pointcloud(cloud, xs, 0.3)
        for i, x in enumerate(xs):
            assert np.allclose(batch[i], oracle_f_pointcloud(cloud, x, 0.3))

    def test_extreme_small_time_is_stable(self):
        # logits scale like -1/t; max-subtraction must keep this finite
        cloud = five_point_cloud()
        f = oracle_f_pointcloud(cloud, np.array([100.0, -40.0]), 1e-10)
        assert np.isfinite(f).all()

    def test_shift_equivariance(self):
        # translating the data by c moves the time-t marginal by c e^{-t/2}
        # (the forward flow contracts toward the origin), so the conditional
        # mean satisfies f_{+c}(x + c e^{-t/2}, t) = f(x, t) + c exactly
        cloud = five_point_cloud()
        shift = np.array([3.7, -1.9])
        shifted = PointCloud(cloud.points + shift, cloud.weights)
        rng = sub_rng(4, 0)
        for _ in range(20):
            x = rng.standard_normal(2) * 2
            t = float(rng.uniform(0.05, 5.0))
            a = oracle_f_pointcloud(cloud, x, t) + shift
            b = oracle_f_pointcloud(shifted, x + shift * np.exp(-t / 2.0), t)
            assert np.allclose(a, b, atol=1e-12)

    def test_against_mc_oracle(self):
        cloud = five_point_cloud()
        rng = sub_rng(5, 0)
        t = 0.5
        x0 = cloud.points[rng.integers(5)]
        x = x0 * np.exp(-t / 2) + np.sqrt(OMT(t)) * rng.standard_normal(2)
        est = mc_oracle_f(cloud, x, t, n=1_000_000, bandwidth=0.05, seed=rng)
        exact = oracle_f_pointcloud(cloud, x, t)
        assert np.linalg.norm(est.value - exact) <= 0.01 * np.linalg.norm(exact)

    def test_rejects_tiny_time(self):
        with pytest.raises(ValueError):
            oracle_f_pointcloud(five_point_cloud(), np.zeros(2), 0.0)
        with pytest.raises(ValueError):
            oracle_f_pointcloud(five_point_cloud(), np.zeros(2), 1e-13)


class TestLineTargets:
    def test_frozen_example_at_half_variance(self):
        t = np.log(2.0)  # 1 - e^{-t} = 1/2
        out = oracle_targets_line(np.array([1.0, -0.1]), t)
        assert np.allclose(out.s, [1.0, -0.2], rtol=1e-14)
        assert np.allclose(out.f, [0.70710678118654752, 0.0], rtol=1e-14)

    def test_on_support_second_components_vanish(self):
        out = oracle_targets_line(np.array([0.8, 0.0]), 0.37)
        assert out.s[1] == 0.0
        assert out.eps[1] == 0.0
        assert out.f[1] == 0.0

    def test_f_second_component_always_zero(self):
        rng = sub_rng(6, 0)
        for _ in range(20):
            x = rng.standard_normal(2) * 2
            t = float(rng.uniform(0.01, 9.0))
            assert oracle_targets_line(x, t).f[1] == 0.0

    def test_blowup_bound_near_zero_time(self):
        # ||t S(x,t) - (x - y)|| <= 2t for all small t at x = (1, -0.1)
        x = np.array([1.0, -0.1])
        gap = x - nearest_manifold_point(LineGaussian(), x)
        for t in np.geomspace(1e-6, 0.01, 40):
            s = oracle_targets_line(x, t).s
            assert np.linalg.norm(t * s - gap) <= 2 * t


class TestSmoothedScore:
    def test_single_standard_atom_matches_gaussian(self):
        cloud = PointCloud([[0.0, 0.0]])
        rng = sub_rng(7, 0)
        for t in (0.0, 0.2, 3.0):
            x = rng.standard_normal(2)
            a = oracle_score_smoothed(cloud, 1.0, x, t)
            b = oracle_score_gaussian(np.zeros(2), 1.0, x, t)
            assert np.allclose(a, b, rtol=1e-12)
            assert np.allclose(a, x, rtol=1e-12)

    def test_frozen_example_at_time_zero(self):
        s = oracle_score_smoothed(PointCloud([[0.0, 0.0]]), 0.5, np.array([1.0, 0.0]), 0.0)
        assert np.allclose(s, [4.0, 0.0], rtol=1e-14)

    def test_finite_at_time_zero_for_many_atoms(self):
        s = oracle_score_smoothed(five_point_cloud(), 0.1, np.array([1.0, -0.1]), 0.0)
        assert np.isfinite(s).all()

    def test_against_finite_difference_of_exact_density(self):
        # oracle: the smoothed cloud's marginal is an explicit Gaussian
        # mixture; compare -grad log p by central differences
        cloud = PointCloud([[0.0, 0.0], [1.0, 0.5]])
        sigma = 0.4
        x = np.array([0.6, -0.2])
        h = 1e-6
        for t in (0.0, 0.8):
            var = sigma**2 * np.exp(-t) + OMT(t)

            def logp(pt):
                d2 = np.sum((pt - cloud.points * np.exp(-t / 2.0)) ** 2, axis=1)
                return np.log(np.sum(cloud.weights * np.exp(-d2 / (2 * var))))

            fd = np.array([
                -(logp(x + [h, 0.0]) - logp(x - [h, 0.0])) / (2 * h),
                -(logp(x + [0.0, h]) - logp(x - [0.0, h])) / (2 * h),
            ])
            s = oracle_score_smoothed(cloud, sigma, x, t)
            assert np.allclose(s, fd, rtol=1e-6, atol=1e-8)

    def test_bounded_across_all_times(self):
        # the unsmoothed score grows like 1/t; the smoothed one stays within
        # a small factor of itself over the whole time range
        x = np.array([1.0, -0.1])
        dist = SmoothedCloud(five_point_cloud(), 0.1)
        times = np.geomspace(1e-6, 10.0, 120)
        norms = [np.linalg.norm(oracle_score_smoothed(dist.base, dist.sigma, x, t))
                 for t in times]
        assert np.isfinite(norms).all()
        assert max(norms) / max(min(norms), 1e-12) < 10.0


class TestMcOracle:
    def test_single_atom_any_bandwidth(self):
        cloud = PointCloud([[1.0, -3.0]])
        est = mc_oracle_f(cloud, np.array([0.3, 0.3]), 1.0, n=5000, bandwidth=1.0, seed=0)
        assert np.allclose(est.value, [1.0, -3.0], rtol=1e-12)
        assert est.ess > 30

    def test_line_matches_closed_form(self):
        t = np.log(2.0)
        x = np.array([1.0, -0.1])
        est = mc_oracle_f(LineGaussian(), x, t, n=1_000_000, bandwidth=0.05, seed=12)
        exact = np.array([np.exp(-t / 2.0), 0.0])
        assert np.linalg.norm(est.value - exact) <= 0.02 * np.linalg.norm(exact)

    def test_gaussian_matches_score_inversion(self):
        # derive f from the closed-form score and compare
        dist = IsotropicGaussian([0.0, 0.0], 1.0)
        t = 1.0
        x = np.array([0.8, -0.4])
        est = mc_oracle_f(dist, x, t, n=1_000_000, bandwidth=0.05, seed=13)
        f = f_from_score(oracle_score_gaussian(dist.mu, dist.sigma, x, t), x, t)
        assert np.linalg.norm(est.value - f) <= 0.02 * max(np.linalg.norm(f), 0.1)

    def test_degenerate_estimate_rejected(self):
        # evaluation point far outside the populated region
        with pytest.raises(DegenerateEstimateError):
            mc_oracle_f(five_point_cloud(), np.array([80.0, 80.0]), 0.05,
                        n=2000, bandwidth=0.01, seed=1)

    def test_markov_intermediate_time_consistency(self):
        # conditioning on an intermediate-time state instead of the data
        # must reproduce the same score within Monte-Carlo tolerance
        cloud = five_point_cloud()
        t, t_mid = 0.6, 0.25
        rng = sub_rng(8, 0)
        x0 = cloud.points[0]
        x = x0 * np.exp(-t / 2) + np.sqrt(OMT(t)) * rng.standard_normal(2) * 0.7
        est = mc_oracle_f(cloud, x, t, n=1_000_000, bandwidth=0.05, seed=14,
                          observe_time=t_mid)
        lag = t - t_mid
        s_markov = (x - np.exp(-lag / 2.0) * est.value) / OMT(lag)
        s_direct = oracle_score_pointcloud(cloud, x, t)
        assert np.linalg.norm(s_markov - s_direct) <= 0.05 * np.linalg.norm(s_direct)

    def test_requires_minimum_draws(self):
        with pytest.raises(ValueError):
            mc_oracle_f(five_point_cloud(), np.zeros(2), 0.5, n=10, bandwidth=0.1, seed=0)


class TestParameterizationIdentities:
    DISTS = None

    def _families(self):
        return [
            five_point_cloud(),
            four_point_cloud(),
            IsotropicGaussian([1.0, 2.0], 0.5),
            LineGaussian(),
            SmoothedCloud(five_point_cloud(), 0.25),
        ]

    def test_identities_hold_for_every_family(self):
        rng = sub_rng(9, 0)
        for dist in self._families():
            for _ in range(100):
                x = rng.standard_normal(2) * 2.0
                t = float(np.exp(rng.uniform(np.log(0.01), np.log(10.0))))
                out = analytic_targets(dist, x, t)
                v = OMT(t)
                assert np.allclose(out.eps, np.sqrt(v) * out.s, rtol=0, atol=1e-12 * (1 + np.abs(out.s).max()))
                s_from_f = (x - np.exp(-t / 2.0) * out.f) / v
                assert np.allclose(s_from_f, out.s, rtol=0, atol=1e-10 * (1 + np.abs(out.s).max()))

    def test_adapter_round_trips_are_identity(self):
        rng = sub_rng(10, 0)
        for dist in self._families():
            for _ in range(50):
                x = rng.standard_normal(2) * 2.0
                t = float(np.exp(rng.uniform(np.log(0.01), np.log(10.0))))
                s = analytic_targets(dist, x, t).s
                back_eps = score_from_eps(eps_from_score(s, t), t)
                back_f = score_from_f(f_from_score(s, x, t), x, t)
                scale = 1 + np.abs(s).max()
                assert np.allclose(back_eps, s, rtol=0, atol=1e-12 * scale)
                assert np.allclose(back_f, s, rtol=0, atol=1e-10 * scale)

    def test_target_fn_dispatch_matches_bundle(self):
        dist = five_point_cloud()
        x = np.array([[1.2, 0.4]])
        t = 0.7
        bundle = analytic_targets(dist, x[0], t)
        for kind, want in ((TargetKind.SCORE_S, bundle.s),
                           (TargetKind.EPSILON, bundle.eps),
                           (TargetKind.COND_EXP_F, bundle.f)):
            got = analytic_target_fn(dist, kind)(x, t)[0]
            assert np.allclose(got, want, rtol=1e-13)

    def test_spiral_has_no_closed_form(self):
        with pytest.raises(UnsupportedDistributionError):
            analytic_score_fn(SpiralCurve())
