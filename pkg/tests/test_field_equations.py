import warnings

import numpy as np
import pytest

from conftest import CURVED_PHI3, jet_point, make_scenario, random_points
from jetoptics import base_geometry as bg
from jetoptics import field_equations as fe
from jetoptics.cartan_connection import CartanConnection
from jetoptics.errors import DimensionNotice
from jetoptics.field_equations import FieldEquations
from jetoptics.jet_geometry import JetGeometry
from jetoptics.scenario import load_catalog, sample_points
from jetoptics.tensor_core import JetPoint

EYE3 = [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]
SPHERE3 = [["1", "0", "0"], ["0", "sin(x1)^2", "0"], ["0", "0", "sin(x1)^2*sin(x2)^2"]]


def equations(s, u, K=None):
    return FieldEquations(CartanConnection(JetGeometry(s, np.atleast_2d(u), 3)), K)


@pytest.fixture(scope="module")
def gen33():
    cfg = load_catalog("generic-3-3")
    return cfg.scenario, sample_points(cfg, 4, cfg.seed)


@pytest.fixture(scope="module")
def aniso_eq(aniso):
    return equations(aniso, random_points(aniso, 5, 23))


class TestRicci:
    def test_flat_vanishes(self, flat22):
        for blk in fe.ricci_dtensors(flat22, jet_point(flat22, np.full(8, 0.2))).values():
            assert np.abs(np.asarray(blk)).max() == 0

    def test_unit_sphere_is_einstein(self, sphere):
        pt = JetPoint([0.3], [1.2, 0.5], [[0.4], [-0.7]])
        ric = fe.ricci_dtensors(sphere, pt)
        np.testing.assert_allclose(np.asarray(ric["R_ij"]), np.asarray(bg.ricci_and_scalar(sphere.phi, pt)[0]),
                                   atol=1e-13)
        np.testing.assert_allclose(np.asarray(ric["R_ij"]), np.diag([1.0, np.sin(1.2) ** 2]), atol=1e-13)
        for key in ("H_ab", "R_ib", "P^(a)_(i)b", "P^(a)_i(j)", "P^(a)_(i)j", "S^(b)(g)_(j)(k)"):
            assert np.abs(np.asarray(ric[key])).max() < 1e-13

    def test_matches_oracle_contraction(self, aniso_eq):
        assert aniso_eq.ricci_residual().max() < 1e-7

    def test_displayed_p_relation_without_medium(self):
        s = make_scenario([["1"]], [["1 + 0.1*x1^2", "0.1*x2"], ["0.1*x2", "1 + 0.2*sin(x1)"]], ["0", "0"])
        f = equations(s, random_points(s, 3, 2))
        assert f.displayed_p_relation().max() < 1e-12


class TestScalar:
    def test_flat(self, flat22):
        sp = fe.scalar_curvature(flat22, jet_point(flat22, np.full(8, 0.1)))
        assert sp.Sc == 0 and sp.contracted == 0

    def test_sphere(self, sphere):
        sp = fe.scalar_curvature(sphere, JetPoint([0.0], [0.9, 0.1], [[1.0], [0.5]]))
        assert sp.Sc == pytest.approx(2.0, abs=1e-12)
        assert sp.contracted == pytest.approx(2.0, abs=1e-12)
        assert sp.H == 0 and abs(sp.S) < 1e-13

    def test_parts_sum(self, aniso):
        sp = fe.scalar_curvature(aniso, jet_point(aniso, random_points(aniso, 1, 3)[0]))
        assert sp.Sc == sp.H + sp.R + sp.S

    def test_decomposition_vs_contraction(self, aniso_eq):
        assert aniso_eq.scalar_residual().max() < 1e-8


class TestStressEnergy:
    def test_flat(self, flat22):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DimensionNotice)
            se = fe.stress_energy(flat22, jet_point(flat22, np.full(8, 0.3)), K=3.0)
        for blk in se.blocks.values():
            assert np.abs(np.asarray(blk)).max() == 0

    def test_small_dimensions_warn(self, aniso):
        with pytest.warns(DimensionNotice):
            se = fe.stress_energy(aniso, jet_point(aniso, random_points(aniso, 1, 1)[0]))
        assert se.e1_residual is None

    def test_curved_space_no_medium(self):
        s = make_scenario([["1"]], [["1", "0"], ["0", "sin(x1)^2"]], ["0", "0"], K=2.0)
        pt = JetPoint([0.1], [1.0, 0.2], [[0.3], [0.6]])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DimensionNotice)
            se = fe.stress_energy(s, pt)
        ric, Sc = bg.ricci_and_scalar(s.phi, pt)
        g = np.diag([1.0, np.sin(1.0) ** 2])
        np.testing.assert_allclose(np.asarray(se.blocks["T_ij"]), (np.asarray(ric) - Sc / 2 * g) / 2.0, atol=1e-13)
        for key in ("T_ia", "T^(a)_(i)b", "T^(a)_i(j)", "T^(a)_(i)j"):
            assert np.abs(np.asarray(se.blocks[key])).max() < 1e-13

    def test_reduced_einstein_form(self, gen33):
        s, u = gen33
        assert equations(s, u).e1_residual().max() < 1e-7
        se = fe.stress_energy(s, JetPoint.from_flat(u[0], 3, 3))
        assert se.e1_residual < 1e-7

    def test_tilde_identity(self, aniso_eq):
        assert aniso_eq.tilde_identity_residual().max() < 1e-12

    def test_inverse_K_scaling(self, aniso):
        u = random_points(aniso, 3, 6)
        a, b = equations(aniso, u, 1.0).stress_energy, equations(aniso, u, 4.0).stress_energy
        for key in a:
            np.testing.assert_allclose(b[key].value, a[key].value / 4.0, rtol=1e-14, atol=1e-16)
            if key.startswith("~"):
                base = key[1:]
                np.testing.assert_allclose((b[key] - b[base]).value, (a[key] - a[base]).value / 4.0,
                                           rtol=1e-13, atol=1e-16)


class TestConservation:
    def test_dimension_notice(self, aniso):
        with pytest.raises(DimensionNotice):
            fe.conservation_residuals(aniso, jet_point(aniso, random_points(aniso, 1, 0)[0]))

    def test_flat(self):
        s = make_scenario(EYE3, EYE3, ["0", "0", "0"])
        assert fe.conservation_residuals(s, JetPoint.from_flat(np.full(s.nvars, 0.2), 3, 3)) == (0.0, 0.0, 0.0)

    def test_einstein_product(self):
        s = make_scenario(EYE3, SPHERE3, ["0", "0", "0"])
        u = np.full(s.nvars, 0.2)
        u[3:6] = [1.0, 0.8, 0.3]
        assert max(fe.conservation_residuals(s, JetPoint.from_flat(u, 3, 3))) < 1e-6

    def test_generic_is_finite(self, gen33):
        s, u = gen33
        res = equations(s, u[:2]).conservation_residuals()
        assert res.shape == (2, 3) and np.isfinite(res).all()


def test_curved_phi3_without_medium_has_no_mixed_blocks():
    s = make_scenario(EYE3, CURVED_PHI3, ["0", "0", "0"])
    f = equations(s, np.random.default_rng(4).uniform(-0.6, 0.6, (2, s.nvars)))
    for key in ("R_ib", "P^(a)_(i)b", "P^(a)_i(j)", "P^(a)_(i)j", "S^(b)(g)_(j)(k)"):
        assert np.abs(f.ricci[key].value).max() < 1e-13
