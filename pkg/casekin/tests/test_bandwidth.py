import math
import unittest

import numpy as np
from scipy.integrate import trapezoid

from ..bandwidth import (
    BandwidthConfig,
    CiConfig,
    bootstrap_dataset,
    imse_est,
    outer_resample,
    percentile_band,
    percentile_ci,
    resample_families,
    select_bandwidth
)
from ..data import CONTROL, Grid, StepSurvival, dataset_rows
from ..errors import SelectionFailed
from ..km import km_censoring, km_naive, km_relatives
from ..surfaces import ConditionalSurfaces, EstimatorConfig, TimeTransform, build_conditional_surfaces
from .fixtures import simulated, tiny


def flat_surfaces(S0, S1=None):
    S0 = np.asarray(S0, dtype=float)
    S1 = S0 if S1 is None else np.asarray(S1, dtype=float)
    with np.errstate(divide="ignore"):
        return ConditionalSurfaces(
            s_grid=Grid.linspace(0.0, 1.0, S0.shape[0]),
            u_grid=Grid.linspace(0.0, 10.0, S0.shape[1]),
            S0=S0,
            S1=S1,
            Lam0=-np.log(S0),
            Lam1=-np.log(S1),
            Lam0star=np.zeros_like(S0),
            transform=TimeTransform.linear(100.0)
        )


class TestBootstrapDataset(unittest.TestCase):
    def test_no_event_mass_means_every_relative_is_censored(self):
        ds = tiny()
        surf = flat_surfaces(np.ones((3, 5)))
        out = bootstrap_dataset(ds, surf, StepSurvival([], []), seed=1)

        relatives = [r for f in out.families for r in f.relatives]
        self.assertEqual([r.status for r in relatives], [0, 0, 0])
        self.assertEqual([r.time for r in relatives], [10.0, 10.0, 10.0])

    def test_structure_is_preserved(self):
        ds = tiny()
        surf = flat_surfaces(np.ones((3, 5)))
        out = bootstrap_dataset(ds, surf, StepSurvival([4.0], [0.0]), seed=1)

        self.assertEqual([f.family_id for f in out.families], [f.family_id for f in ds.families])
        self.assertEqual([f.proband for f in out.families], [f.proband for f in ds.families])
        self.assertEqual([f.size for f in out.families], [f.size for f in ds.families])
        self.assertTrue(all(r.time == 4.0 and r.status == 0 for f in out.families for r in f.relatives))

    def test_events_come_from_the_surface_step(self):
        row = [1.0, 1.0, 0.0, 0.0, 0.0]
        surf = flat_surfaces([row, row, row])
        out = bootstrap_dataset(tiny(), surf, StepSurvival([], []), seed=3)
        self.assertTrue(all(r.time == 5.0 and r.status == 1 for f in out.families for r in f.relatives))

    def test_control_relatives_follow_the_fitted_surface(self):
        ds, _ = simulated(n1=600, J=2, seed=13)
        surf = build_conditional_surfaces(ds, 0.5)
        out = bootstrap_dataset(ds, surf, StepSurvival([], []), seed=5)

        x = surf.transform.forward(ds.columns.proband_times[ds.columns.groups == CONTROL])
        sizes = ds.columns.sizes[ds.columns.groups == CONTROL]
        s = surf.s_grid.points
        expected = np.array([
            np.average(np.interp(x, s, surf.S0[:, k]), weights=sizes) for k in range(surf.u_grid.points.size)
        ])

        synthetic = km_relatives(out, CONTROL)(surf.u_grid.points)
        self.assertLess(np.max(np.abs(synthetic - expected)), 0.07)

    def test_same_seed_same_dataset(self):
        ds, _ = simulated(n1=60, J=2, seed=2)
        surf = build_conditional_surfaces(ds, 0.5)
        censor = km_censoring(ds)

        first = list(dataset_rows(bootstrap_dataset(ds, surf, censor, seed=9)))
        second = list(dataset_rows(bootstrap_dataset(ds, surf, censor, seed=9)))
        other = list(dataset_rows(bootstrap_dataset(ds, surf, censor, seed=10)))
        self.assertEqual(first, second)
        self.assertNotEqual(first, other)


class TestSelectBandwidth(unittest.TestCase):
    def test_two_stage_search(self):
        def imse(h):
            return {0.25: 0.5}.get(h, abs(h - 0.3) + 1.0)

        selection = select_bandwidth(None, BandwidthConfig(), imse=imse)
        self.assertEqual(selection.stage1, 0.3)
        self.assertEqual(selection.bandwidth, 0.25)

    def test_ties_go_to_the_smallest_bandwidth(self):
        selection = select_bandwidth(None, BandwidthConfig(), imse=lambda h: 1.0)
        self.assertEqual(selection.stage1, 0.1)
        self.assertEqual(selection.bandwidth, 0.05)

    def test_second_stage_is_clipped_at_one(self):
        selection = select_bandwidth(None, BandwidthConfig(), imse=lambda h: -h)
        self.assertEqual(selection.bandwidth, 1.0)
        self.assertEqual([h for h, _ in selection.table][-2:], [0.95, 1.0])

    def test_failed_candidates_are_dropped(self):
        def imse(h):
            if h < 0.5:
                raise SelectionFailed("too few replications")
            return h

        self.assertEqual(select_bandwidth(None, BandwidthConfig(), imse=imse).bandwidth, 0.5)

    def test_every_candidate_failing(self):
        def imse(h):
            raise SelectionFailed("too few replications")

        self.assertRaises(SelectionFailed, select_bandwidth, None, BandwidthConfig(), imse=imse)

    def test_config_validation(self):
        self.assertRaises(ValueError, BandwidthConfig, b_inner=1)
        self.assertRaises(ValueError, BandwidthConfig, stage1_grid=(0.0, 0.5))
        self.assertRaises(ValueError, CiConfig, b_outer=10)
        self.assertRaises(ValueError, CiConfig, level=1.0)


class TestImse(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.ds, _ = simulated(n1=150, J=2, seed=4)
        cls.cfg = BandwidthConfig(b_inner=6, seed=1, estimator=EstimatorConfig(s_points=51, u_points=100, t_points=80))

    def test_identical_replications_have_no_variance(self):
        result = imse_est(self.ds, 0.5, self.cfg, replicates=[self.ds, self.ds])
        self.assertTrue(np.allclose(result.variance, 0.0, rtol=0, atol=1e-24))
        self.assertAlmostEqual(result.value, 0.0, places=12)

    def test_decomposition_matches_stored_replications(self):
        result = imse_est(self.ds, 0.5, self.cfg)
        self.assertGreaterEqual(result.value, 0.0)

        curves = result.replicates
        mse = (curves.mean(axis=0) - result.reference) ** 2 + curves.var(axis=0, ddof=1)
        self.assertAlmostEqual(float(trapezoid(mse, result.t_grid.points)), result.value, delta=1e-12)
        self.assertEqual(curves.shape[0] + result.n_failed, 6)

    def test_deterministic_under_a_fixed_seed(self):
        first = imse_est(self.ds, 0.6, self.cfg)
        second = imse_est(self.ds, 0.6, self.cfg)
        self.assertEqual(first.value, second.value)


class TestPercentileCi(unittest.TestCase):
    def test_quantile_convention(self):
        curves = np.arange(1, 101)[:, None] / 100.0
        lower, upper = percentile_band(curves, 0.95)
        self.assertAlmostEqual(float(lower[0]), 0.03475, places=12)
        self.assertAlmostEqual(float(upper[0]), 0.97525, places=12)

    def test_identical_curves_give_zero_width(self):
        curves = np.tile([0.9, 0.7, 0.4], (30, 1))
        lower, upper = percentile_band(curves, 0.9)
        self.assertTrue(np.allclose(lower, upper))

    def test_resampling_keeps_group_sizes(self):
        ds, _ = simulated(n1=40, a=2, J=1, seed=8)
        out = resample_families(ds, np.random.default_rng(0))
        self.assertEqual((out.n1, out.n0), (ds.n1, ds.n0))

    def test_bands_on_simulated_data(self):
        ds, _ = simulated(n1=150, J=2, seed=6)
        cfg = CiConfig(b_outer=20, seed=2, estimator=EstimatorConfig(s_points=51, u_points=100, t_points=60))
        band = percentile_ci(ds, 0.5, cfg)

        self.assertEqual(band.lower.shape, (60,))
        self.assertTrue(np.all(band.lower <= band.upper))
        self.assertTrue(np.all((band.lower >= 0) & (band.upper <= 1)))
        self.assertTrue(np.all(band.se >= 0))
        self.assertLessEqual(band.n_failed, 4)
        self.assertFalse(math.isnan(float(band.se.sum())))

        again = percentile_ci(ds, 0.5, cfg)
        self.assertTrue(np.array_equal(band.lower, again.lower))

        t = band.t_grid.points
        naive = np.vstack([km_naive(outer_resample(ds, 2, index))(t) for index in range(20)])
        self.assertTrue(np.allclose(band.naive_se, naive.std(axis=0, ddof=1), rtol=0, atol=1e-14))
        self.assertTrue(np.any(band.naive_se > 0))

    def test_outer_resamples_are_reproducible(self):
        ds, _ = simulated(n1=40, J=1, seed=8)
        first = [f.family_id for f in outer_resample(ds, 3, 7).families]
        again = [f.family_id for f in outer_resample(ds, 3, 7).families]
        other = [f.family_id for f in outer_resample(ds, 3, 8).families]
        self.assertEqual(first, again)
        self.assertNotEqual(first, other)
