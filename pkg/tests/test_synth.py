#!/usr/bin/env python3
"""
Unit tests for landagg.synth

Tests the output-density generator, the spatial DGPs and the demo panel.
"""

import unittest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from landagg.errors import InvalidParameter, SingularReducedForm
from landagg.indices import location_quotient
from landagg.panel import extract_employment
from landagg.spatial import build_weights
from landagg.synth import (DEMO_CONTROLS, SERVICE_SECTORS, DemoParams, DensityParams, SemDgpParams, SlmDgpParams,
                           gen_demo_panel, gen_density_panel, gen_sem_panel, gen_slm_panel, output_density,
                           sem_disturbance, slm_reduced_form)

PATH_EDGES = [("A", "B"), ("B", "C"), ("C", "D")]


class TestDensity(unittest.TestCase):
    """Test cases for the output-density model."""

    def test_output_density(self):
        self.assertAlmostEqual(float(output_density(2.0, 0.5, 0.25, 4.0, 16.0)), 2.0 * 2.0 * 2.0)

    def test_noise_free_panel_is_exact(self):
        p = DensityParams(omega=1.5, sigma=0.0, n_cities=4, n_years=3)
        ds = gen_density_panel(p, seed=7)
        expected = output_density(1.5, 0.6, 0.3, ds.series("labor_density"), ds.series("capital_density"))
        np.testing.assert_allclose(ds.series("density"), expected)
        self.assertEqual(ds.cities, ("C01", "C02", "C03", "C04"))
        self.assertEqual(ds.years, (2003, 2004, 2005))

    def test_log_linear_recovery(self):
        ds = gen_density_panel(DensityParams(n_cities=40, n_years=10), seed=1)
        design = np.column_stack([np.ones(400), np.log(ds.series("labor_density")).ravel(),
                                  np.log(ds.series("capital_density")).ravel()])
        coefficients, *_ = np.linalg.lstsq(design, np.log(ds.series("density")).ravel(), rcond=None)
        np.testing.assert_allclose(coefficients, [0.0, 0.6, 0.3], atol=0.05)

    def test_seed_reproducible(self):
        a = gen_density_panel(DensityParams(), seed=3)
        b = gen_density_panel(DensityParams(), seed=3)
        np.testing.assert_array_equal(a.values, b.values)

    def test_parameter_validation(self):
        with self.assertRaises(InvalidParameter):
            DensityParams(omega=0.0)
        with self.assertRaises(InvalidParameter):
            DensityParams.from_dict({"gamma": 1.0})


class TestSpatialDgp(unittest.TestCase):
    """Test cases for the spatial lag and spatial error generators."""

    def setUp(self):
        self.w = build_weights(PATH_EDGES, "ABCD")

    def test_slm_satisfies_model(self):
        x = np.random.default_rng(0).standard_normal((4, 5, 2))
        p = SlmDgpParams(rho=0.3, beta=(1.0, 2.0), fe_sd=0.0, sigma=0.0, n_years=5)
        ds = gen_slm_panel(p, self.w, x)
        y = ds.series("y")
        np.testing.assert_allclose(y - 0.3 * self.w.weights @ y, x @ np.array([1.0, 2.0]), atol=1e-12)
        self.assertEqual(ds.variables, ("y", "x1", "x2"))

    def test_sem_satisfies_model(self):
        x = np.random.default_rng(0).standard_normal((4, 3, 1))
        p = SemDgpParams(lam=0.0, beta=(2.0,), fe_sd=0.0, sigma=0.0, n_years=3)
        ds = gen_sem_panel(p, self.w, x)
        np.testing.assert_allclose(ds.series("y"), 2.0 * x[:, :, 0], atol=1e-12)

    def test_sem_disturbance(self):
        v = np.random.default_rng(1).standard_normal((4, 2))
        u = sem_disturbance(self.w, 0.5, v)
        np.testing.assert_allclose(u - 0.5 * self.w.weights @ u, v, atol=1e-12)

    def test_seed_reproducible(self):
        a = gen_slm_panel(SlmDgpParams(seed=9), self.w)
        b = gen_slm_panel(SlmDgpParams(seed=9), self.w)
        np.testing.assert_array_equal(a.values, b.values)

    def test_outside_interval(self):
        with self.assertRaises(InvalidParameter):
            slm_reduced_form(self.w, 1.5, np.ones((4, 1)))

    def test_singular(self):
        with self.assertRaises(SingularReducedForm):
            slm_reduced_form(self.w, 1.0, np.ones((4, 1)))

    def test_regressor_shape(self):
        with self.assertRaises(InvalidParameter):
            gen_slm_panel(SlmDgpParams(n_years=5), self.w, np.zeros((4, 4, 2)))

    def test_beta_list_from_dict(self):
        p = SlmDgpParams.from_dict({"beta": [1, 2, 3], "rho": 0.2})
        self.assertEqual(p.beta, (1.0, 2.0, 3.0))


class TestDemoPanel(unittest.TestCase):
    """Test cases for the demo panel."""

    @classmethod
    def setUpClass(cls):
        name = lambda r, c: f"C{r * 6 + c + 1:02d}"
        edges = [(name(r, c), name(r, c + 1)) for r in range(5) for c in range(5)]
        edges += [(name(r, c), name(r + 1, c)) for r in range(4) for c in range(6)]
        cls.w = build_weights(edges, [name(r, c) for r in range(5) for c in range(6)])
        cls.ds = gen_demo_panel(DemoParams(), cls.w, seed=11)

    def test_axes(self):
        self.assertEqual(self.ds.cities, self.w.cities)
        self.assertEqual(len(self.ds.years), 16)
        for name in ("emp_mfg", "emp_other", "density", "labor_density", "capital_density", "land_per_capita",
                     "green_coverage", "y") + SERVICE_SECTORS + DEMO_CONTROLS:
            self.assertIn(name, self.ds.variables)
        self.assertFalse(self.ds.has_missing())

    def test_employment_positive(self):
        sectors = ["emp_mfg", *SERVICE_SECTORS, "emp_other"]
        for year in self.ds.years:
            table = extract_employment(self.ds, year, sectors)
            self.assertTrue(np.all(table.employment.sum(axis=1) > 0))
            lq = location_quotient(table, "emp_mfg").values
            self.assertTrue(np.all(lq > 0))

    def test_reproducible(self):
        again = gen_demo_panel(DemoParams(), self.w, seed=11)
        np.testing.assert_array_equal(again.values, self.ds.values)

    def test_density_dict(self):
        p = DemoParams.from_dict({"density": {"omega": 3.0}})
        self.assertIsInstance(p.density, DensityParams)
        self.assertEqual(p.density.omega, 3.0)

    def test_beta_length(self):
        with self.assertRaises(InvalidParameter):
            DemoParams(beta=(0.1, 0.2))


if __name__ == "__main__":
    unittest.main(verbosity=2)
