import numpy as np
import pytest

from tendonkin import (ActuationCommand, DomainError, GroundTruthShape, SearchRanges, SolverConfig,
                       calibrate, frame_origins, solve_statics)
from tendonkin.calibration import sample_errors

from conftest import make_robot


def synthetic(geom, commands, mu, stretch):
    cfg = SolverConfig(mu=mu, stretch_compliance=stretch)
    data = []
    for d in commands:
        cmd = ActuationCommand(d)
        res = solve_statics(geom, cmd, cfg)
        assert res.converged
        data.append((cmd, GroundTruthShape.from_frame_origins(frame_origins(geom, res.q_star))))
    return data


@pytest.fixture(scope="module")
def small_helical():
    return make_robot(n=5, phases=(0.0,), turns=0.5)


class TestSearchRanges:
    def test_shape_includes_both_ends(self):
        r = SearchRanges((0.0, 0.3), (0.0, 1e-3), 0.01, 5e-5)
        assert r.shape == (31, 21)
        np.testing.assert_allclose(r.mu_value(30), 0.3)
        np.testing.assert_allclose(r.stretch_value(20), 1e-3)

    @pytest.mark.parametrize("kw", [{"mu": (0.2, 0.1)}, {"mu": (-0.1, 0.1)}, {"mu_step": 0.0},
                                    {"stretch_compliance": (0.0, np.inf)}, {"coarse_stride": 0}])
    def test_validation(self, kw):
        with pytest.raises(DomainError):
            SearchRanges(**kw)


class TestCalibrate:
    def test_empty_dataset(self, small_helical):
        with pytest.raises(DomainError):
            calibrate(small_helical, [])

    def test_straight_data_picks_lowest_grid_point(self, small_helical):
        truth = GroundTruthShape.from_frame_origins(frame_origins(small_helical, np.zeros(10)))
        ranges = SearchRanges((0.05, 0.3), (1e-4, 5e-4), 0.05, 1e-4)
        res = calibrate(small_helical, [(ActuationCommand([0.0]), truth)], ranges)
        assert (res.mu, res.stretch_compliance) == (0.05, 1e-4)
        assert res.mean_error == 0.0

    def test_matches_exhaustive_scan(self, small_helical):
        data = synthetic(small_helical, [[0.008]], 0.12, 0.0)
        ranges = SearchRanges((0.0, 0.3), (0.0, 0.0), 0.01, 5e-5, coarse_stride=8)
        res = calibrate(small_helical, data, ranges)
        scan = [sample_errors(small_helical, data, ranges.mu_value(i), 0.0)[0] for i in range(31)]
        assert res.mu == pytest.approx(ranges.mu_value(int(np.argmin(scan))), abs=1e-12)
        assert res.mu == pytest.approx(0.12, abs=1e-12)
        assert res.evaluations < 31  # coarse-to-fine skips most of the lattice

    def test_recovers_both_parameters(self, small_helical):
        data = synthetic(small_helical, [[0.006], [0.010]], 0.1, 2e-4)
        ranges = SearchRanges((0.0, 0.2), (0.0, 5e-4), 0.02, 1e-4, coarse_stride=4)
        res = calibrate(small_helical, data, ranges)
        assert res.mu == pytest.approx(0.1, abs=1e-12)
        assert res.stretch_compliance == pytest.approx(2e-4, abs=1e-15)
        assert res.mean_error <= 1e-9
        assert res.sample_errors.shape == (2,)

    def test_workers_agree(self, small_helical):
        data = synthetic(small_helical, [[0.008]], 0.06, 0.0)
        ranges = SearchRanges((0.0, 0.1), (0.0, 0.0), 0.02, 5e-5, coarse_stride=2)
        a = calibrate(small_helical, data, ranges)
        b = calibrate(small_helical, data, ranges, workers=2)
        assert (a.mu, a.stretch_compliance, a.evaluations) == (b.mu, b.stretch_compliance, b.evaluations)
        np.testing.assert_array_equal(a.sample_errors, b.sample_errors)
