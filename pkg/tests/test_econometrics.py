#!/usr/bin/env python3
"""
Unit tests for landagg.econometrics

Tests the within transform, FE-OLS against a dummy-variable regression,
maximum likelihood SLM/SEM recovery on simulated panels, LM diagnostics
and the regression table.
"""

import unittest
import sys
import os
import math
from unittest.mock import patch

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from landagg.econometrics import (ModelSpec, SpatialProblem, balance_design, build_design, concentrated_loglik,
                                  fit_model, fit_ols_fe, fit_sem_fe, fit_slm_fe, format_cell, lm_tests, stars,
                                  summarize, within_transform)
from landagg.errors import (BoundarySolution, DataError, InsufficientObservations, RankDeficientDesign,
                            UnbalancedPanel, UnknownCity)
from landagg.panel import PanelDataset
from landagg.spatial import build_weights
from landagg.synth import SemDgpParams, SlmDgpParams, gen_sem_panel, gen_slm_panel


def grid_weights(rows=5, cols=6):
    name = lambda r, c: f"C{r * cols + c + 1:02d}"
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((name(r, c), name(r, c + 1)))
            if r + 1 < rows:
                edges.append((name(r, c), name(r + 1, c)))
    return build_weights(edges, [name(r, c) for r in range(rows) for c in range(cols)])


SPEC = ModelSpec("dgp", "y", "x1", controls=("x2",))


class TestModelSpec(unittest.TestCase):
    """Test cases for ModelSpec."""

    def test_columns(self):
        spec = ModelSpec("q", "y", "lq", quadratic=True, controls=("GDP",))
        self.assertEqual(spec.columns, ("lq", "lq2", "GDP"))

    def test_from_dict(self):
        spec = ModelSpec.from_dict("m", {"dependent": "y", "focal": "lq", "controls": ["a", "b"],
                                         "effects": "twoway"})
        self.assertEqual(spec.controls, ("a", "b"))
        self.assertEqual(spec.effects, "twoway")
        self.assertFalse(spec.quadratic)

    def test_validation(self):
        with self.assertRaises(DataError):
            ModelSpec("m", "y", "lq", controls=("lq",))
        with self.assertRaises(DataError):
            ModelSpec("m", "y", "y")
        with self.assertRaises(DataError):
            ModelSpec("m", "y", "lq", controls=("a", "a"))
        with self.assertRaises(DataError):
            ModelSpec("m", "y", "lq", effects="year")


class TestDesign(unittest.TestCase):
    """Test cases for build_design, balance_design and within_transform."""

    def setUp(self):
        rng = np.random.default_rng(0)
        self.ds = PanelDataset(("A", "B", "C"), (2001, 2002, 2003, 2004), ("y", "x1", "x2"),
                               rng.standard_normal((3, 4, 3)))

    def test_city_major_rows(self):
        d = build_design(self.ds, SPEC)
        self.assertEqual(d.nobs, 12)
        self.assertTrue(d.balanced)
        np.testing.assert_array_equal(d.city[:5], [0, 0, 0, 0, 1])
        np.testing.assert_array_equal(d.year[:5], [0, 1, 2, 3, 0])
        self.assertEqual(d.y[5], self.ds.value("B", 2002, "y"))

    def test_missing_rows_dropped(self):
        ds = self.ds.with_variable("x2", np.where(np.arange(12).reshape(3, 4) == 5, np.nan,
                                                  self.ds.series("x2")))
        with self.assertLogs("landagg.econometrics", level="WARNING"):
            d = build_design(ds, SPEC)
        self.assertEqual(d.nobs, 11)
        self.assertFalse(d.balanced)

    def test_balance_drops_incomplete_year(self):
        values = self.ds.values.copy()
        values[1, 1, 2] = np.nan
        with self.assertLogs("landagg.econometrics", level="WARNING"):
            d = balance_design(build_design(PanelDataset(self.ds.cities, self.ds.years, self.ds.variables,
                                                         values), SPEC))
        # dropping 2002 keeps 9 rows, dropping city B only 8
        self.assertEqual(d.years, (2001, 2003, 2004))
        self.assertEqual(d.cities, ("A", "B", "C"))
        self.assertTrue(d.balanced)

    def test_insufficient_observations(self):
        ds = self.ds.subset(cities=["A"], years=[2001, 2002, 2003])
        with self.assertRaises(InsufficientObservations):
            build_design(ds, SPEC)

    def test_within_city(self):
        d = build_design(self.ds, SPEC)
        out = within_transform(d.x, d)
        for i in range(3):
            np.testing.assert_allclose(out[d.city == i].mean(axis=0), 0.0, atol=1e-12)

    def test_within_twoway(self):
        d = build_design(self.ds, SPEC)
        out = within_transform(d.y, d, "twoway")
        for i in range(3):
            self.assertAlmostEqual(float(out[d.city == i].mean()), 0.0, places=12)
        for t in range(4):
            self.assertAlmostEqual(float(out[d.year == t].mean()), 0.0, places=12)


class TestOls(unittest.TestCase):
    """Test cases for fit_ols_fe."""

    def setUp(self):
        rng = np.random.default_rng(1)
        n, t = 8, 6
        x = rng.standard_normal((n, t, 2))
        y = x @ np.array([1.5, -0.7]) + rng.standard_normal(n)[:, None] * 3.0 + 0.1 * rng.standard_normal((n, t))
        self.ds = PanelDataset(tuple(f"c{i}" for i in range(n)), tuple(range(2000, 2000 + t)), ("y", "x1", "x2"),
                               np.concatenate([y[:, :, None], x], axis=2))

    def _lsdv(self, d, twoway=False):
        dummies = np.eye(len(d.cities))[d.city]
        blocks = [d.x, dummies]
        if twoway:
            blocks.append(np.eye(len(d.years))[d.year][:, 1:])
        coefficients, *_ = np.linalg.lstsq(np.hstack(blocks), d.y, rcond=None)
        return coefficients[:d.x.shape[1]]

    def test_matches_dummy_regression(self):
        d = build_design(self.ds, SPEC)
        fit = fit_ols_fe(d)
        np.testing.assert_allclose(fit.coefficients, self._lsdv(d), atol=1e-10)
        self.assertEqual(fit.model, "OLS-FE")
        self.assertIsNone(fit.spatial_param)
        self.assertGreater(fit.r2, 0.9)

    def test_twoway_matches_dummy_regression(self):
        spec = ModelSpec("tw", "y", "x1", controls=("x2",), effects="twoway")
        d = build_design(self.ds, spec)
        np.testing.assert_allclose(fit_ols_fe(d).coefficients, self._lsdv(d, twoway=True), atol=1e-10)

    def test_time_invariant_regressor(self):
        ds = self.ds.with_variable("area", np.repeat(np.arange(8.0)[:, None], 6, axis=1))
        spec = ModelSpec("bad", "y", "x1", controls=("area",))
        with self.assertRaises(RankDeficientDesign) as ctx:
            fit_ols_fe(build_design(ds, spec))
        self.assertIn("area", str(ctx.exception))

    def test_fit_model_dispatch(self):
        d = build_design(self.ds, SPEC)
        self.assertEqual(fit_model(d, "ols").model, "OLS-FE")
        with self.assertRaises(DataError):
            fit_model(d, "slm")
        with self.assertRaises(DataError):
            fit_model(d, "sdm", grid_weights())


class TestSpatialModels(unittest.TestCase):
    """Test cases for the ML spatial lag and spatial error estimators."""

    @classmethod
    def setUpClass(cls):
        cls.w = grid_weights()
        cls.slm = gen_slm_panel(SlmDgpParams(rho=0.4, seed=0), cls.w)
        cls.sem = gen_sem_panel(SemDgpParams(lam=0.5, seed=0), cls.w)

    def test_slm_recovers_rho(self):
        fit = fit_slm_fe(build_design(self.slm, SPEC), self.w)
        self.assertEqual(fit.model, "SLM-FE")
        self.assertEqual(fit.spatial_name, "rho")
        self.assertGreaterEqual(fit.spatial_param, 0.3)
        self.assertLessEqual(fit.spatial_param, 0.5)
        np.testing.assert_allclose(fit.coefficients, [1.0, -0.5], atol=0.05)
        self.assertGreater(fit.spatial_t, 3.0)

    def test_slm_over_seeds(self):
        estimates = []
        for seed in range(1, 6):
            ds = gen_slm_panel(SlmDgpParams(rho=0.4, seed=seed), self.w)
            estimates.append(fit_slm_fe(build_design(ds, SPEC), self.w).spatial_param)
        self.assertAlmostEqual(float(np.mean(estimates)), 0.4, delta=0.05)

    def test_sem_recovers_lambda(self):
        fit = fit_sem_fe(build_design(self.sem, SPEC), self.w)
        self.assertEqual(fit.spatial_name, "lambda")
        self.assertGreaterEqual(fit.spatial_param, 0.3)
        self.assertLessEqual(fit.spatial_param, 0.7)
        np.testing.assert_allclose(fit.coefficients, [1.0, -0.5], atol=0.05)

    def test_loglik_constant(self):
        d = build_design(self.slm, SPEC)
        fit = fit_slm_fe(d, self.w)
        concentrated = concentrated_loglik(d, self.w, "slm")(fit.spatial_param)
        self.assertAlmostEqual(fit.loglik, concentrated - d.nobs / 2.0 * (math.log(2.0 * math.pi) + 1.0), places=6)

    def test_estimate_is_concentrated_maximum(self):
        d = build_design(self.sem, SPEC)
        fit = fit_sem_fe(d, self.w)
        f = concentrated_loglik(d, self.w, "sem")
        for step in (-0.01, 0.01):
            self.assertGreaterEqual(f(fit.spatial_param), f(fit.spatial_param + step))

    def test_nearly_noiseless_panel(self):
        slm = fit_slm_fe(build_design(gen_slm_panel(SlmDgpParams(rho=0.4, sigma=0.001, seed=2), self.w), SPEC),
                         self.w)
        sem = fit_sem_fe(build_design(gen_sem_panel(SemDgpParams(lam=0.5, sigma=0.001, seed=2), self.w), SPEC),
                         self.w)
        for fit in (slm, sem):
            with self.subTest(model=fit.model):
                self.assertTrue(np.isfinite(fit.std_errors).all())
                self.assertTrue((fit.std_errors > 0).all())
                self.assertTrue(math.isfinite(fit.spatial_se) and fit.spatial_se > 0)
                np.testing.assert_allclose(fit.coefficients, [1.0, -0.5], rtol=0.02)
                self.assertLess(fit.sigma2, 1e-5)
        self.assertAlmostEqual(slm.spatial_param, 0.4, delta=0.01)
        self.assertGreaterEqual(sem.spatial_param, 0.1)
        self.assertLessEqual(sem.spatial_param, 0.9)

    def test_zero_parameter_nests_ols(self):
        for model, ds in (("slm", self.slm), ("sem", self.sem)):
            with self.subTest(model=model):
                d = build_design(ds, SPEC)
                at_zero = concentrated_loglik(d, self.w, model)(0.0)
                constant = d.nobs / 2.0 * (math.log(2.0 * math.pi) + 1.0)
                self.assertAlmostEqual(at_zero - constant, fit_ols_fe(d).loglik, delta=1e-9)

    def test_no_spatial_dependence(self):
        estimates = []
        for seed in range(50):
            ds = gen_slm_panel(SlmDgpParams(rho=0.0, seed=seed), self.w)
            estimates.append(fit_slm_fe(build_design(ds, SPEC), self.w).spatial_param)
        self.assertLess(abs(float(np.mean(estimates))), 0.05)
        self.assertLess(float(np.max(np.abs(estimates))), 0.3)

    def test_estimate_beats_fine_grid(self):
        for model, fit_fn, ds in (("slm", fit_slm_fe, self.slm), ("sem", fit_sem_fe, self.sem)):
            with self.subTest(model=model):
                d = build_design(ds, SPEC)
                f = concentrated_loglik(d, self.w, model)
                lo, hi = SpatialProblem(d, self.w).interval()
                best = max(f(v) for v in np.linspace(lo, hi, 2001))
                self.assertGreaterEqual(f(fit_fn(d, self.w).spatial_param), best - 1e-9)

    def test_sem_coefficients_match_gls(self):
        rng = np.random.default_rng(12)
        edges = [("A", "B"), ("B", "C"), ("C", "D"), ("D", "E"), ("A", "C")]
        w = build_weights(edges, ["A", "B", "C", "D", "E"])
        ds = PanelDataset(w.cities, (2001, 2002, 2003), ("y", "x1", "x2"), rng.normal(size=(5, 3, 3)))
        d = build_design(ds, SPEC)

        lam = 0.3
        y = within_transform(d.y, d)
        x = within_transform(d.x, d)
        b = np.eye(5) - lam * w.weights
        # city-major rows: the error filter is B applied to every year
        omega_inv = np.kron(b.T @ b, np.eye(3))
        expected = np.linalg.solve(x.T @ omega_inv @ x, x.T @ omega_inv @ y)
        beta, _, _ = SpatialProblem(d, w).sem_coefficients(lam)
        np.testing.assert_allclose(beta, expected, rtol=1e-8, atol=1e-10)

    def test_pseudo_r2_in_unit_interval(self):
        fit = fit_slm_fe(build_design(self.slm, SPEC), self.w)
        self.assertGreater(fit.r2, 0.0)
        self.assertLessEqual(fit.r2, 1.0)
        self.assertEqual(fit.r2_kind, "pseudo R-squared")

    def test_weights_restricted_to_design(self):
        ds = self.slm.subset(cities=self.w.cities[:20])
        fit = fit_slm_fe(build_design(ds, SPEC), self.w)
        self.assertEqual(fit.n_cities, 20)

    def test_unknown_city(self):
        renamed = PanelDataset(("X99",) + self.slm.cities[1:], self.slm.years, self.slm.variables, self.slm.values)
        with self.assertRaises(UnknownCity):
            fit_slm_fe(build_design(renamed, SPEC), self.w)

    def test_unbalanced(self):
        values = self.slm.values.copy()
        values[0, 0, 0] = np.nan
        ds = PanelDataset(self.slm.cities, self.slm.years, self.slm.variables, values)
        with self.assertLogs("landagg.econometrics", level="WARNING"):
            d = build_design(ds, SPEC)
        with self.assertRaises(UnbalancedPanel):
            fit_slm_fe(d, self.w)

    def test_boundary_solution(self):
        d = build_design(self.slm, SPEC)
        with patch.object(SpatialProblem, "slm_concentrated", return_value=lambda rho: rho):
            with self.assertRaises(BoundarySolution):
                fit_slm_fe(d, self.w)

    def test_lm_tests(self):
        d = build_design(self.slm, SPEC)
        diagnostics = lm_tests(fit_ols_fe(d), d, self.w)
        self.assertLess(diagnostics.lm_lag.p_value, 0.01)
        for test in (diagnostics.lm_lag, diagnostics.lm_error, diagnostics.robust_lm_lag,
                     diagnostics.robust_lm_error):
            self.assertGreaterEqual(test.statistic, 0.0)
            self.assertGreaterEqual(test.p_value, 0.0)
            self.assertLessEqual(test.p_value, 1.0)
        self.assertEqual(set(diagnostics.as_dict()), {"lm_lag", "lm_error", "robust_lm_lag", "robust_lm_error"})

    def test_lm_error_on_sem_data(self):
        d = build_design(self.sem, SPEC)
        self.assertLess(lm_tests(fit_ols_fe(d), d, self.w).lm_error.p_value, 0.01)


class TestMonteCarlo(unittest.TestCase):
    """Sampling behaviour of the estimators and LM tests over fixed seeds."""

    @classmethod
    def setUpClass(cls):
        cls.w = grid_weights()

    def _estimates(self, fit_fn, gen, params, seeds):
        params_out, betas = [], []
        for seed in seeds:
            fit = fit_fn(build_design(gen(params(seed), self.w), SPEC), self.w)
            params_out.append(fit.spatial_param)
            betas.append(fit.coefficients)
        return np.array(params_out), np.array(betas)

    def _assert_unbiased_beta(self, betas):
        se = betas.std(axis=0, ddof=1) / math.sqrt(betas.shape[0])
        deviation = np.abs(betas.mean(axis=0) - [1.0, -0.5])
        self.assertTrue((deviation <= 3.0 * se).all(), f"mean {betas.mean(axis=0)}, mc se {se}")

    def test_slm_sampling(self):
        rho, betas = self._estimates(fit_slm_fe, gen_slm_panel, lambda s: SlmDgpParams(rho=0.4, seed=s), range(200))
        self.assertGreaterEqual(rho.mean(), 0.35)
        self.assertLessEqual(rho.mean(), 0.45)
        self._assert_unbiased_beta(betas)

    def test_sem_sampling(self):
        lam, betas = self._estimates(fit_sem_fe, gen_sem_panel, lambda s: SemDgpParams(lam=0.5, seed=s), range(200))
        self.assertGreaterEqual(lam.mean(), 0.42)
        self.assertLessEqual(lam.mean(), 0.58)
        self._assert_unbiased_beta(betas)

    def test_inverted_u_signs(self):
        spec = ModelSpec("u", "y", "x1", quadratic=True, controls=("x3",))
        hits = 0
        for seed in range(200):
            rng = np.random.default_rng(1000 + seed)
            x1 = rng.uniform(0.5, 3.0, (self.w.n, 16))
            x = np.stack([x1, x1 ** 2, rng.standard_normal((self.w.n, 16))], axis=2)
            ds = gen_slm_panel(SlmDgpParams(rho=0.4, beta=(1.0, -0.3, 0.5), seed=seed), self.w, x=x)
            fit = fit_slm_fe(build_design(ds, spec), self.w)
            hits += fit.coefficient("x1") > 0 and fit.coefficient("x12") < 0
        self.assertGreaterEqual(hits, 190)

    def test_lm_size(self):
        rejections = np.zeros(4)
        for seed in range(500):
            d = build_design(gen_slm_panel(SlmDgpParams(rho=0.0, seed=seed), self.w), SPEC)
            diagnostics = lm_tests(fit_ols_fe(d), d, self.w)
            rejections += [test.p_value < 0.05 for test in (diagnostics.lm_lag, diagnostics.lm_error,
                                                             diagnostics.robust_lm_lag, diagnostics.robust_lm_error)]
        for name, rate in zip(("lm_lag", "lm_error", "robust_lm_lag", "robust_lm_error"), rejections / 500):
            with self.subTest(test=name):
                self.assertGreaterEqual(rate, 0.02)
                self.assertLessEqual(rate, 0.09)

    def test_lm_lag_dominates_on_lag_data(self):
        wins = 0
        for seed in range(100):
            d = build_design(gen_slm_panel(SlmDgpParams(rho=0.5, seed=seed), self.w), SPEC)
            diagnostics = lm_tests(fit_ols_fe(d), d, self.w)
            wins += diagnostics.lm_lag.statistic > diagnostics.lm_error.statistic
        self.assertGreater(wins, 50)


class TestTable(unittest.TestCase):
    """Test cases for stars, format_cell and summarize."""

    def test_stars(self):
        self.assertEqual(stars(3.0), "***")
        self.assertEqual(stars(-2.0), "**")
        self.assertEqual(stars(1.7), "*")
        self.assertEqual(stars(1.6), "")

    def test_format_cell(self):
        self.assertEqual(format_cell(0.0203, 3.05), "0.020*** (3.05)")
        self.assertEqual(format_cell(-0.1, -1.2), "-0.100 (-1.20)")
        self.assertEqual(format_cell(0.041, 1.48), "0.041 (1.48)")
        self.assertEqual(format_cell(-0.030, -1.88), "-0.030* (-1.88)")

    def test_summarize(self):
        w = grid_weights()
        ds = gen_slm_panel(SlmDgpParams(rho=0.4, seed=3), w)
        d = build_design(ds, SPEC)
        fits = [fit_ols_fe(d), fit_slm_fe(d, w), fit_sem_fe(d, w)]
        table = summarize(fits, SPEC)

        lines = table.text.splitlines()
        self.assertIn("(1) OLS-FE", lines[0])
        self.assertIn("(3) SEM-FE", lines[0])
        self.assertTrue(any(line.startswith("rho") for line in lines))
        self.assertTrue(any(line.startswith("lambda") for line in lines))
        self.assertTrue(any(line.startswith("Observations") and "480" in line for line in lines))
        self.assertIn("Dependent variable: y", table.text)

        models = table.data["models"]
        self.assertEqual([m["model"] for m in models], ["OLS-FE", "SLM-FE", "SEM-FE"])
        self.assertNotIn("spatial_param", models[0])
        self.assertEqual(models[1]["spatial_param"]["name"], "rho")
        self.assertEqual([c["name"] for c in models[1]["coefficients"]], ["x1", "x2"])

    def test_summarize_quadratic(self):
        rng = np.random.default_rng(4)
        values = rng.uniform(0.5, 2.0, (6, 5, 3))
        ds = PanelDataset(tuple(f"c{i}" for i in range(6)), tuple(range(5)), ("y", "x1", "x2"), values)
        spec = ModelSpec("q", "y", "x1", quadratic=True, controls=("x2",))
        linear = ModelSpec("q", "y", "x1", controls=("x2",))
        table = summarize([fit_ols_fe(build_design(ds, linear)), fit_ols_fe(build_design(ds, spec))], spec)
        names = [line.split()[0] for line in table.text.splitlines()[2:5]]
        self.assertEqual(names, ["x1", "x12", "x2"])

    def test_summarize_empty(self):
        with self.assertRaises(DataError):
            summarize([], SPEC)


if __name__ == "__main__":
    unittest.main(verbosity=2)
