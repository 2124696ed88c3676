import numpy as np
import pytest

from driftlab import (
    ConfigError,
    IsotropicGaussian,
    LineGaussian,
    PointCloud,
    SmoothedCloud,
    SpiralCurve,
    UnsupportedDistributionError,
    data_mean,
    dist_from_config,
    dist_to_config,
    five_point_cloud,
    four_point_cloud,
    load_pointcloud_csv,
    nearest_manifold_point,
    sample_data,
    twenty_point_cloud,
)


class TestConstruction:
    def test_pointcloud_weight_validation(self):
        with pytest.raises(ValueError):
            PointCloud([[0.0, 0.0], [1.0, 0.0]], np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            PointCloud([[0.0, 0.0]], np.array([-1.0]))
        with pytest.raises(ValueError):
            PointCloud(np.empty((0, 2)))

    def test_pointcloud_default_weights_uniform(self):
        cloud = PointCloud([[0.0, 1.0], [2.0, 3.0]])
        assert np.allclose(cloud.weights, [0.5, 0.5])

    def test_smoothed_cloud_needs_positive_sigma(self):
        base = PointCloud([[0.0, 0.0]])
        with pytest.raises(ValueError):
            SmoothedCloud(base, 0.0)

    def test_stock_clouds_are_well_separated(self):
        for cloud, min_sep in [(five_point_cloud(), 0.6), (twenty_point_cloud(), 1.1),
                               (four_point_cloud(), 2.0)]:
            d = np.linalg.norm(cloud.points[:, None] - cloud.points[None], axis=2)
            np.fill_diagonal(d, np.inf)
            assert d.min() >= min_sep


class TestSampleData:
    def test_single_atom_cloud_is_constant(self):
        cloud = PointCloud([[1.0, -3.0]])
        batch = sample_data(cloud, 5, seed=0)
        assert batch.shape == (5, 2)
        assert np.all(batch == [1.0, -3.0])

    def test_line_moments(self):
        batch = sample_data(LineGaussian(), 100_000, seed=1)
        assert np.all(batch[:, 1] == 0.0)
        assert batch[:, 0].std() == pytest.approx(1.0, abs=0.02)
        assert batch[:, 0].mean() == pytest.approx(0.0, abs=0.02)

    def test_smoothed_cloud_moments(self):
        dist = SmoothedCloud(PointCloud([[0.0, 0.0]]), sigma=0.5)
        batch = sample_data(dist, 100_000, seed=2)
        assert np.allclose(batch.std(axis=0), 0.5, atol=0.01)

    def test_spiral_lies_on_curve(self):
        dist = SpiralCurve()
        batch = sample_data(dist, 1000, seed=3)
        radii = np.linalg.norm(batch, axis=1)
        assert np.all((radii >= 1.0 - 1e-12) & (radii <= 13.0 + 1e-12))
        assert np.allclose(batch[:, 0], radii * np.cos(radii))
        assert np.allclose(batch[:, 1], radii * np.sin(radii))

    def test_determinism_per_seed(self):
        dist = IsotropicGaussian([1.0, 2.0], 0.5)
        a = sample_data(dist, 100, seed=7)
        b = sample_data(dist, 100, seed=7)
        c = sample_data(dist, 100, seed=8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_rejects_empty_request(self):
        with pytest.raises(ValueError):
            sample_data(LineGaussian(), 0, seed=0)


class TestNearestManifoldPoint:
    def test_line_projects_to_axis(self):
        y = nearest_manifold_point(LineGaussian(), np.array([1.0, -0.1]))
        assert np.allclose(y, [1.0, 0.0])

    def test_cloud_picks_nearest_atom(self):
        cloud = four_point_cloud()
        y = nearest_manifold_point(cloud, np.array([0.0, 0.9]))
        assert np.allclose(y, [1.0, 1.0])

    def test_tie_breaks_to_lowest_index(self):
        cloud = PointCloud([[1.0, 0.0], [-1.0, 0.0]])
        y = nearest_manifold_point(cloud, np.array([0.0, 0.0]))
        assert np.allclose(y, [1.0, 0.0])

    def test_spiral_from_origin(self):
        # closest curve point to the origin is the inner endpoint u = 1
        y = nearest_manifold_point(SpiralCurve(), np.array([0.0, 0.0]))
        assert np.allclose(y, [0.54030230586813977, 0.84147098480789651], atol=1e-9)

    def test_spiral_against_brute_force(self):
        # independent oracle: dense scan of the squared distance at 1e6 points
        dist = SpiralCurve()
        us = np.linspace(1.0, 13.0, 1_000_001)
        curve = np.stack([us * np.cos(us), us * np.sin(us)], axis=1)
        rng = np.random.default_rng(11)
        for _ in range(12):
            x = rng.uniform(-10, 10, size=2)
            y = nearest_manifold_point(dist, x)
            best = curve[np.argmin(np.sum((curve - x) ** 2, axis=1))]
            assert np.linalg.norm(x - y) <= np.linalg.norm(x - best) + 1e-9

    def test_idempotent_on_own_output(self):
        rng = np.random.default_rng(4)
        for dist in (five_point_cloud(), LineGaussian(), SpiralCurve()):
            x = rng.uniform(-5, 5, size=2)
            y = nearest_manifold_point(dist, x)
            y2 = nearest_manifold_point(dist, y)
            assert np.linalg.norm(y - y2) <= 1e-9

    def test_nearest_beats_every_atom(self):
        cloud = twenty_point_cloud()
        rng = np.random.default_rng(5)
        for _ in range(50):
            x = rng.uniform(-4, 4, size=2)
            y = nearest_manifold_point(cloud, x)
            dy = np.linalg.norm(x - y)
            for atom in cloud.points:
                assert dy <= np.linalg.norm(x - atom) + 1e-12

    def test_full_support_families_rejected(self):
        with pytest.raises(UnsupportedDistributionError):
            nearest_manifold_point(IsotropicGaussian([0.0, 0.0], 1.0), np.zeros(2))
        with pytest.raises(UnsupportedDistributionError):
            nearest_manifold_point(SmoothedCloud(five_point_cloud(), 0.1), np.zeros(2))


class TestDataMean:
    def test_symmetric_cloud(self):
        cloud = PointCloud([[-2.0, 0.0], [2.0, 0.0]])
        assert np.allclose(data_mean(cloud), [0.0, 0.0])

    def test_gaussian(self):
        assert np.allclose(data_mean(IsotropicGaussian([1.0, 2.0], 0.5)), [1.0, 2.0])

    def test_spiral_against_dense_trapezoid(self):
        # oracle: composite trapezoid on 1e6+1 nodes, frozen to 30-digit values
        us = np.linspace(1.0, 13.0, 1_000_001)
        mx = np.trapezoid(us * np.cos(us), us) / 12.0
        my = np.trapezoid(us * np.sin(us), us) / 12.0
        assert mx == pytest.approx(0.41565374746004100, abs=1e-9)
        assert my == pytest.approx(-0.97315081674713889, abs=1e-9)
        got = data_mean(SpiralCurve())
        assert got[0] == pytest.approx(mx, abs=1e-9)
        assert got[1] == pytest.approx(my, abs=1e-9)

    def test_smoothing_preserves_mean(self):
        cloud = five_point_cloud()
        assert np.allclose(data_mean(SmoothedCloud(cloud, 0.3)), data_mean(cloud))

    def test_sampled_mean_agrees(self):
        dist = SpiralCurve()
        batch = sample_data(dist, 200_000, seed=6)
        assert np.allclose(batch.mean(axis=0), data_mean(dist), atol=0.05)


class TestConfigAndCsv:
    def test_config_round_trip_all_families(self):
        dists = [
            five_point_cloud(),
            IsotropicGaussian([1.0, 2.0], 0.5),
            LineGaussian(),
            SpiralCurve(),
            SmoothedCloud(four_point_cloud(), 0.25),
        ]
        for dist in dists:
            again = dist_from_config(dist_to_config(dist))
            assert type(again) is type(dist)
            a = sample_data(dist, 50, seed=3)
            b = sample_data(again, 50, seed=3)
            assert np.allclose(a, b)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            dist_from_config({"kind": "donut"})

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError):
            dist_from_config({"kind": "line", "slope": 2})

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("x1,x2\n0.5,1.5\n-1.0,2.0\n")
        cloud = load_pointcloud_csv(path)
        assert np.allclose(cloud.points, [[0.5, 1.5], [-1.0, 2.0]])
        assert np.allclose(cloud.weights, [0.5, 0.5])

    def test_csv_with_weights(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("1,0,3\n0,1,1\n")
        cloud = load_pointcloud_csv(path, has_weights=True)
        assert np.allclose(cloud.weights, [0.75, 0.25])
        assert cloud.points.shape == (2, 2)

    def test_csv_from_config(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("0.0,0.0\n1.0,1.0\n")
        dist = dist_from_config({"kind": "point_cloud", "csv": str(path)})
        assert isinstance(dist, PointCloud)
        assert len(dist.points) == 2

    def test_bad_csv_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,x2\n1.0,oops\n")
        with pytest.raises(ConfigError):
            load_pointcloud_csv(path)
