import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import jet_point, make_scenario
from jetoptics import jet_geometry as jg
from jetoptics.errors import DegenerateMedium, NotIsotropic
from jetoptics.jet_geometry import JetGeometry
from jetoptics.tensor_core import DerivativeRequest, JetPoint, ScalarField, partial

EYE2 = [["1", "0"], ["0", "1"]]


def p1(A, phi=EYE2):
    return make_scenario([["1"]], phi, A)


def at(x, v, t=(0.0,)):
    return JetPoint(list(t), list(x), [[c] for c in v])


class TestSpatialMetric:
    def test_rank_one_update(self):
        g = jg.spatial_metric(p1(["1", "0"]), at([0.1, 0.2], [0.3, 0.4]))
        np.testing.assert_array_equal(np.asarray(g), [[2, 0], [0, 1]])

    def test_no_medium(self):
        phi = [["1 + x1^2", "0.2"], ["0.2", "2"]]
        s = p1(["0", "0"], phi)
        pt = at([0.5, 0.1], [1, 2])
        np.testing.assert_allclose(np.asarray(jg.spatial_metric(s, pt)), [[1.25, 0.2], [0.2, 2]])

    def test_synge_constant_index(self):
        c = math.sqrt(1 - 1 / math.sqrt(2) ** 2)
        s = p1([f"{c!r}*v11", f"{c!r}*v21"])
        g = np.asarray(jg.spatial_metric(s, at([0, 0], [1, 0])))
        assert g[0, 0] == pytest.approx(1.5, abs=1e-15)


class TestInverse:
    def test_hand_inverse(self):
        gi = jg.spatial_metric_inverse(p1(["1", "0"]), at([0, 0], [0, 0]))
        np.testing.assert_allclose(np.asarray(gi), np.diag([0.5, 1.0]))

    def test_no_medium(self):
        s = p1(["0", "0"], [["2", "0"], ["0", "4"]])
        np.testing.assert_allclose(np.asarray(jg.spatial_metric_inverse(s, at([0, 0], [0, 0]))), np.diag([0.5, 0.25]))

    def test_degenerate_medium(self):
        s = p1(["1", "0"], [["-1", "0"], ["0", "1"]])
        with pytest.raises(DegenerateMedium):
            jg.spatial_metric_inverse(s, at([0, 0], [0, 0]))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 4), st.integers(0, 2**31))
    def test_random_spd_against_matrix_inverse(self, n, seed):
        rng = np.random.default_rng(seed)
        R = rng.normal(size=(n, n))
        phi = R @ R.T + n * np.eye(n)
        A = rng.normal(size=n)
        s = make_scenario([["1"]], [[repr(float(phi[i, j])) for j in range(n)] for i in range(n)], [repr(float(a)) for a in A])
        pt = JetPoint([0.0], np.zeros(n), np.zeros((n, 1)))
        gi = np.asarray(jg.spatial_metric_inverse(s, pt))
        g = phi + np.outer(A, A)
        assert np.abs(g @ gi - np.eye(n)).max() < 1e-12
        np.testing.assert_allclose(gi, np.linalg.inv(g), atol=1e-12)


class TestVerticalFundamental:
    def test_single_time(self, single_time):
        pt = jet_point(single_time, [0.1, 0.2, -0.3, 0.4, 0.5])
        G = np.asarray(jg.vertical_fundamental(single_time, pt))
        np.testing.assert_allclose(G[0, 0] * (1 + 0.1 * 0.1**2), np.asarray(jg.spatial_metric(single_time, pt)))

    def test_lorentzian_blocks(self):
        s = make_scenario([["-1", "0"], ["0", "1"]], EYE2, ["0", "0"])
        pt = JetPoint([0, 0], [0, 0], np.zeros((2, 2)))
        G = np.asarray(jg.vertical_fundamental(s, pt))
        np.testing.assert_array_equal(G[0, 0], -np.eye(2))
        np.testing.assert_array_equal(G[1, 1], np.eye(2))
        np.testing.assert_array_equal(G[0, 1], np.zeros((2, 2)))

    def test_outer_product_oracle(self, aniso):
        pt = jet_point(aniso, np.linspace(-0.5, 0.5, aniso.nvars))
        geo = JetGeometry.at(aniso, pt, 0)
        ref = np.einsum("ab,ij->abij", np.linalg.inv(geo.h.value[0]), geo.g.value[0])
        np.testing.assert_allclose(np.asarray(jg.vertical_fundamental(aniso, pt)), ref, rtol=1e-14)


class TestNonlinearConnection:
    def test_flat(self, flat22):
        nl = jg.nonlinear_connection(flat22, jet_point(flat22, np.full(8, 0.3)))
        assert np.abs(np.asarray(nl.M)).max() == 0 and np.abs(np.asarray(nl.N)).max() == 0

    def test_sphere_value(self, sphere):
        pt = at([math.pi / 4, 0.0], [0.0, 2.0])
        N = np.asarray(jg.nonlinear_connection(sphere, pt).N)
        assert N[0, 0, 1] == pytest.approx(-1.0)

    def test_M_symmetric(self, aniso):
        for u in np.random.default_rng(1).uniform(-0.6, 0.6, (5, aniso.nvars)):
            M = np.asarray(jg.nonlinear_connection(aniso, jet_point(aniso, u)).M)
            np.testing.assert_allclose(M, M.transpose(0, 2, 1), atol=1e-15)

    def test_N_homogeneous_in_fiber(self, aniso):
        u = np.random.default_rng(2).uniform(-0.6, 0.6, aniso.nvars)
        w = u.copy()
        w[5:] *= 3.0
        N1 = np.asarray(jg.nonlinear_connection(aniso, jet_point(aniso, u)).N)
        N3 = np.asarray(jg.nonlinear_connection(aniso, jet_point(aniso, w)).N)
        np.testing.assert_allclose(N3, 3 * N1, rtol=1e-13, atol=1e-15)


class TestCanonicalNLC:
    def test_reduces_to_fixed_without_medium(self, sphere):
        pt = at([0.8, 0.1], [0.4, -0.3])
        np.testing.assert_allclose(np.asarray(jg.canonical_spatial_nlc(sphere, pt)),
                                   np.asarray(jg.nonlinear_connection(sphere, pt).N), atol=1e-15)

    def test_requires_isotropy(self, single_time):
        with pytest.raises(NotIsotropic):
            jg.canonical_spatial_nlc(single_time, jet_point(single_time, np.full(5, 0.2)))

    def test_static_medium_difference(self):
        s = p1(["0.5*x1", "0.3"], [["1 + 0.1*x1^2", "0"], ["0", "1"]])
        pt = at([0.4, 0.2], [1.0, -0.5])
        geo = JetGeometry.at(s, pt, 1)
        # Christoffel symbols of g and of phi contracted with the fiber
        from jetoptics.base_geometry import christoffel_jet
        gam_g = christoffel_jet(geo.g, geo.ginv, s.p).value[0]
        diff = np.einsum("ijm,m->ij", gam_g - geo.gamma.value[0], pt.v[:, 0])
        Nbar = np.asarray(jg.canonical_spatial_nlc(s, pt))[:, 0, :]
        N = np.asarray(jg.nonlinear_connection(s, pt).N)[:, 0, :]
        np.testing.assert_allclose(Nbar - N, diff, atol=1e-15)
        assert np.abs(diff).max() > 1e-3

    def test_time_dependent_term(self):
        s = p1(["0.5*t1", "0"])
        pt = at([0.0, 0.0], [0.0, 0.0], t=[0.4])
        Nbar = np.asarray(jg.canonical_spatial_nlc(s, pt))
        # g = I + diag(t^2/4, 0): 1/2 g^{11} dg_11/dt = 1/2 * t/2 / (1 + t^2/4)
        assert Nbar[0, 0, 0] == pytest.approx(0.5 * 0.2 / (1 + 0.04))
        assert np.abs(np.asarray(jg.nonlinear_connection(s, pt).N)).max() == 0


class TestAdaptedDerivative:
    def test_flat_temporal(self, flat22):
        f = ScalarField.parse("x1^2*x2", 2, 2)
        d = jg.adapted_derivative(flat22, f, jet_point(flat22, np.full(8, 0.3)), "t")
        assert np.abs(np.asarray(d)).max() == 0

    def test_fiber_coordinate(self, sphere):
        pt = at([0.7, 0.2], [0.5, -1.5])
        N = np.asarray(jg.nonlinear_connection(sphere, pt).N)
        for j in range(2):
            f = ScalarField.parse(f"v{j + 1}1", 1, 2)
            d = np.asarray(jg.adapted_derivative(sphere, f, pt, "x"))
            np.testing.assert_allclose(d, -N[j, 0, :], atol=1e-15)

    def test_reassembly_from_raw_partials(self, aniso):
        f = ScalarField.parse("sin(x1)*v21*v12 + t2*x3^2*v31", 2, 3)
        u = np.random.default_rng(5).uniform(-0.6, 0.6, aniso.nvars)
        pt = jet_point(aniso, u)
        N = np.asarray(jg.nonlinear_connection(aniso, pt).N)
        names = [f"v{i + 1}{a + 1}" for i in range(3) for a in range(2)]
        dv = np.array([partial(DerivativeRequest(f, pt, [nm])) for nm in names]).reshape(3, 2)
        for k in range(3):
            ref = partial(DerivativeRequest(f, pt, [f"x{k + 1}"])) - np.einsum("jb,jb->", N[:, :, k], dv)
            got = np.asarray(jg.adapted_derivative(aniso, f, pt, "x"))[k]
            assert got == pytest.approx(ref, abs=1e-14)


class TestEnergyAndLiouville:
    def test_energy(self):
        pt = at([0.1, 0.1], [3, 4])
        assert jg.absolute_energy(p1(["0", "0"]), pt) == pytest.approx(25)
        assert jg.absolute_energy(p1(["1", "0"]), pt) == pytest.approx(34)
        assert jg.absolute_energy(p1(["1", "0"]), at([0.1, 0.1], [0, 0])) == 0

    def test_liouville_identity_lowering(self):
        x = np.asarray(jg.liouville(p1(["0", "0"]), at([0, 0], [1.5, -2])))
        np.testing.assert_array_equal(x, [[1.5, -2]])

    def test_liouville_zero_fiber(self, aniso):
        u = np.zeros(aniso.nvars)
        u[:5] = 0.3
        assert np.abs(np.asarray(jg.liouville(aniso, jet_point(aniso, u)))).max() == 0

    def test_liouville_contraction_oracle(self, aniso):
        pt = jet_point(aniso, np.random.default_rng(9).uniform(-0.6, 0.6, aniso.nvars))
        G = np.asarray(jg.vertical_fundamental(aniso, pt))
        ref = np.einsum("abij,jb->ai", G, pt.v)
        np.testing.assert_allclose(np.asarray(jg.liouville(aniso, pt)), ref, rtol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_A0_nonnegative_for_positive_phi(seed):
    rng = np.random.default_rng(seed)
    R = rng.normal(size=(3, 3))
    phi = R @ R.T + 0.1 * np.eye(3)
    s = make_scenario([["1"]], [[repr(float(v)) for v in row] for row in phi], [repr(float(a)) for a in rng.normal(size=3)])
    geo = JetGeometry(s, np.zeros((1, s.nvars)), 0)
    assert geo.A0.value[0] >= 0
