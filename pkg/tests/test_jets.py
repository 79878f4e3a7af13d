import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jetoptics import _kernels_py, jets, kernels
from jetoptics.errors import DomainError, OrderError, SingularMetric
from jetoptics.jets import Jet, jeinsum, jet_space


def variables(u, order=3):
    u = np.atleast_2d(u)
    return Jet.variables(jet_space(u.shape[1], order), u, order)


def test_truncation_is_prefix():
    sp = jet_space(3, 3)
    assert sp.size(0) == 1 and sp.size(1) == 4 and sp.size(2) == 10 and sp.size(3) == 20


def test_product_rule_third_order():
    V = variables([[0.3, -0.7]])
    x, y = V[0], V[1]
    f = x * x * y  # d^3/dx^2 dy = 2
    assert f.partial((0, 0, 1))[0] == pytest.approx(2)
    assert f.partial((0,))[0] == pytest.approx(2 * 0.3 * -0.7)


@pytest.mark.parametrize("fn,ref", [
    (jets.sin, [np.sin, np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z)]),
    (jets.cos, [np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z), np.sin]),
    (jets.exp, [np.exp] * 4),
    (jets.log, [np.log, lambda z: 1 / z, lambda z: -1 / z**2, lambda z: 2 / z**3]),
    (jets.sqrt, [np.sqrt, lambda z: 0.5 / np.sqrt(z), lambda z: -0.25 * z**-1.5, lambda z: 0.375 * z**-2.5]),
    (jets.tan, [np.tan, lambda z: 1 / np.cos(z)**2, lambda z: 2 * np.tan(z) / np.cos(z)**2,
                lambda z: (4 * np.sin(z)**2 + 2) / np.cos(z)**4]),
])
def test_elementary_derivatives(fn, ref):
    z = 0.7
    f = fn(variables([[z]])[0])
    for k in range(4):
        assert f.partial((0,) * k)[0] == pytest.approx(ref[k](z), rel=1e-12)


def test_matrix_inverse_jet():
    V = variables([[0.2, 0.5]], 2)
    a, b = V[0], V[1]
    M = jets.stack([jets.stack([1 + a * a, b], 0), jets.stack([b, 2 + a], 0)], 0)
    Mi = jets.inv(M)
    eye = jeinsum("ij,jk->ik", M, Mi)
    assert np.abs(eye.c[..., 0] - np.eye(2)).max() < 1e-15
    assert np.abs(eye.c[..., 1:]).max() < 1e-14


def test_singular_inverse():
    with pytest.raises(SingularMetric):
        jets.inv(Jet.constant(jet_space(1, 1), np.zeros((1, 2, 2))))


def test_domain_error_carries_mask():
    V = variables([[1.0], [-1.0]], 1)
    with pytest.raises(DomainError) as info:
        jets.log(V[0])
    assert info.value.mask.tolist() == [False, True]


def test_differentiating_order_zero():
    with pytest.raises(OrderError):
        Jet.constant(jet_space(1, 0), np.ones(1)).d(0)


def test_jeinsum_matches_einsum_on_values():
    rng = np.random.default_rng(0)
    sp = jet_space(2, 2)
    A = Jet(rng.normal(size=(3, 2, 4, sp.size(2))), 2, sp)
    B = Jet(rng.normal(size=(3, 4, 5, sp.size(2))), 2, sp)
    out = jeinsum("ij,jk->ki", A, B)
    np.testing.assert_allclose(out.value, np.einsum("bij,bjk->bki", A.value, B.value), rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.integers(0, 3), st.integers(0, 2**31))
def test_kernel_backends_agree(I, J, K, order, seed):
    rng = np.random.default_rng(seed)
    sp = jet_space(3, order)
    m = sp.size(order)
    x = rng.normal(size=(2, I, J, m))
    y = rng.normal(size=(2, J, K, m))
    pa, pb, pc, starts = sp.pairs(order)
    ref = _kernels_py.jet_bmm(x, y, pa, pb, pc, starts, m)
    out = kernels.jet_bmm(x, y, pa, pb, pc, starts, m)
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
