"""The optical metric g = phi + A A on the jet space, its nonlinear connection
and adapted-frame derivatives.

:class:`JetGeometry` evaluates everything for a batch of points at once; the
module-level functions are single-point conveniences returning DTensors.

Index layouts (stored in the printed order, superscripts first):

* ``M[i, a, b]`` = M^{(i)}_{(a)b} = -H^m_{ab} x^i_m
* ``N[i, a, j]`` = N^{(i)}_{(a)j} = gamma^i_{jm} x^m_a
* ``G_vert[a, b, i, j]`` = h^{ab} g_ij
* ``liouville[a, i]`` = x^{(a)}_{(i)} = h^{am} g_ij x^j_m
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import base_geometry as bg
from . import jets
from .errors import DegenerateMedium, NotIsotropic, ShapeError
from .jets import Jet, jeinsum, jet_space
from .tensor_core import DTensor, JetPoint, ScalarField

MEDIUM_EPS = 1e-12
_FREE = "abcdefghijklmnopqrs"


@dataclass(frozen=True)
class Scenario:
    """Dimensions plus the field triple (h, phi, A)."""

    p: int
    n: int
    h: bg.MetricField
    phi: bg.MetricField
    A: tuple[ScalarField, ...]
    name: str = ""
    K: float = 1.0
    isotropic: bool | None = None
    static: bool | None = None
    refractive_index: ScalarField | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise ShapeError("p and n must be positive")
        if self.h.dim != self.p or self.phi.dim != self.n or len(self.A) != self.n:
            raise ShapeError("field dimensions do not match (p, n)")

    @property
    def nvars(self) -> int:
        return self.p + self.n + self.n * self.p

    def fields(self) -> list[ScalarField]:
        """Every scalar field of the scenario (metric entries once per pair)."""
        out = [self.h.components[a][b] for a in range(self.p) for b in range(a, self.p)]
        out += [self.phi.components[i][j] for i in range(self.n) for j in range(i, self.n)]
        return out + list(self.A)

    def with_flags(self, **flags) -> "Scenario":
        from dataclasses import replace
        return replace(self, **flags)


def _letters(k: int) -> str:
    return _FREE[:k]


class JetGeometry:
    """Batched evaluation context: every quantity is a Jet over the base points."""

    def __init__(self, scenario: Scenario, points, order: int = 3):
        self.s = scenario
        u = np.atleast_2d(np.asarray(points, dtype=float))
        if u.shape[1] != scenario.nvars:
            raise ShapeError(f"points need {scenario.nvars} coordinates, got {u.shape[1]}")
        self.u = u
        self.order = order
        self.space = jet_space(scenario.nvars, order)
        self.V = Jet.variables(self.space, u, order)
        self._memo: dict = {}
        self.cache: dict = {}

    @classmethod
    def at(cls, scenario: Scenario, point: JetPoint, order: int = 3) -> "JetGeometry":
        if (point.p, point.n) != (scenario.p, scenario.n):
            raise ShapeError("point dimensions do not match the scenario")
        return cls(scenario, point.flat()[None, :], order)

    @property
    def p(self) -> int:
        return self.s.p

    @property
    def n(self) -> int:
        return self.s.n

    @property
    def batch(self) -> int:
        return self.u.shape[0]

    # fields ---------------------------------------------------------------
    @cached_property
    def h(self) -> Jet:
        return self.s.h.jet(self.V, self._memo)

    @cached_property
    def phi(self) -> Jet:
        return self.s.phi.jet(self.V, self._memo)

    @cached_property
    def A(self) -> Jet:
        return jets.stack([a.jet(self.V, self._memo) for a in self.s.A], 0)

    @cached_property
    def v(self) -> Jet:
        """Fiber coordinates as jets, v[i, a] = x^i_a."""
        p, n = self.p, self.n
        return self.V[p + n:].reshape(n, p)

    @cached_property
    def hinv(self) -> Jet:
        return bg.inverse_jet(self.h)

    @cached_property
    def phiinv(self) -> Jet:
        return bg.inverse_jet(self.phi)

    # Levi-Civita data ------------------------------------------------------
    @cached_property
    def H(self) -> Jet:
        """H[c, a, b] = H^c_{ab}."""
        return bg.christoffel_jet(self.h, self.hinv, 0)

    @cached_property
    def gamma(self) -> Jet:
        """gamma[i, j, k] = gamma^i_{jk}."""
        return bg.christoffel_jet(self.phi, self.phiinv, self.p)

    @cached_property
    def gamma_low(self) -> Jet:
        """gamma_low[i, j, m] = gamma_{ijm}."""
        return bg.lowered_christoffel_jet(self.phi, self.p)

    @cached_property
    def H_curv(self) -> Jet:
        """H_curv[a, e, b, c] = H^a_{ebc}."""
        return bg.riemann_jet(self.H, 0)

    @cached_property
    def r_curv(self) -> Jet:
        """r_curv[l, i, j, k] = r^l_{ijk}."""
        return bg.riemann_jet(self.gamma, self.p)

    # nonlinear connection --------------------------------------------------
    @cached_property
    def M(self) -> Jet:
        return -jeinsum("mab,im->iab", self.H, self.v)

    @cached_property
    def N(self) -> Jet:
        return jeinsum("ijm,ma->iaj", self.gamma, self.v)

    # optical metric --------------------------------------------------------
    @cached_property
    def AA(self) -> Jet:
        return jeinsum("i,j->ij", self.A, self.A)

    @cached_property
    def A_up(self) -> Jet:
        return jeinsum("im,m->i", self.phiinv, self.A)

    @cached_property
    def A0(self) -> Jet:
        a0 = jeinsum("i,i->", self.A_up, self.A)
        bad = ~(1.0 + a0.value > MEDIUM_EPS)
        if np.any(bad):
            raise DegenerateMedium("1 + A0 is not positive", bad)
        return a0

    @cached_property
    def g(self) -> Jet:
        return self.phi + self.AA

    @cached_property
    def ginv(self) -> Jet:
        """Closed-form inverse phi^{ij} - A^i A^j / (1 + A0)."""
        w = 1.0 / (1.0 + self.A0)
        return self.phiinv - jeinsum("i,j,->ij", self.A_up, self.A_up, w)

    @cached_property
    def G_vert(self) -> Jet:
        return jeinsum("ab,ij->abij", self.hinv, self.g)

    @cached_property
    def liouville(self) -> Jet:
        return jeinsum("am,ij,jm->ai", self.hinv, self.g, self.v)

    @cached_property
    def energy(self) -> Jet:
        return jeinsum("ab,ij,ia,jb->", self.hinv, self.g, self.v, self.v)

    # adapted frame derivatives ----------------------------------------------
    def _vertical_grad(self, F: Jet) -> Jet:
        """dv[..., j, b] = dF / dx^j_b."""
        p, n = self.p, self.n
        g = F.grad(np.arange(p + n, p + n + n * p))
        return g.reshape(F.shape + (n, p))

    def delta_t(self, F: Jet) -> Jet:
        """Appends index c: dF/dt^c - M^{(j)}_{(b)c} dF/dx^j_b."""
        f = _letters(F.ndim)
        dt = F.grad(np.arange(self.p))
        dv = self._vertical_grad(F)
        return dt - jeinsum(f"{f}UV,UVW->{f}W", dv, self.M)

    def delta_x(self, F: Jet) -> Jet:
        """Appends index k: dF/dx^k - N^{(j)}_{(b)k} dF/dx^j_b."""
        f = _letters(F.ndim)
        dx = F.grad(np.arange(self.p, self.p + self.n))
        dv = self._vertical_grad(F)
        return dx - jeinsum(f"{f}UV,UVW->{f}W", dv, self.N)

    def d_v(self, F: Jet) -> Jet:
        """Appends indices (c, k): dF/dx^k_c."""
        k = F.ndim
        dv = self._vertical_grad(F)
        return dv.transpose(tuple(range(k)) + (k + 1, k))

    def adapted_derivative(self, F: Jet, direction: str) -> Jet:
        if direction == "t":
            return self.delta_t(F)
        if direction == "x":
            return self.delta_x(F)
        if direction == "v":
            return self.d_v(F)
        raise ValueError(f"unknown direction {direction!r}")

    # generalized Christoffel symbols of g ------------------------------------
    @cached_property
    def canonical_nlc(self) -> Jet:
        """N-bar[i, a, j] = Gamma^i_{jm} x^m_a + 1/2 g^{im} dg_mj/dt^a."""
        p = self.p
        gam = bg.christoffel_jet(self.g, self.ginv, p)
        dgt = self.g.grad(np.arange(p))  # [m, j, a]
        return jeinsum("ijm,ma->iaj", gam, self.v) + 0.5 * jeinsum("im,mja->iaj", self.ginv, dgt)

    def fiber_dependence(self) -> np.ndarray:
        """Per point, max |dA_i/dx^j_a|."""
        d = self._vertical_grad(self.A)
        return np.abs(d.value).reshape(self.batch, -1).max(axis=1)


# point API ------------------------------------------------------------------

def _geo(s: Scenario, point: JetPoint, order: int) -> JetGeometry:
    return JetGeometry.at(s, point, order)


def spatial_metric(s: Scenario, point: JetPoint) -> DTensor:
    return DTensor("ss", _geo(s, point, 0).g.value[0])


def spatial_metric_inverse(s: Scenario, point: JetPoint) -> DTensor:
    return DTensor("SS", _geo(s, point, 0).ginv.value[0])


def vertical_fundamental(s: Scenario, point: JetPoint) -> DTensor:
    return DTensor("TTss", _geo(s, point, 0).G_vert.value[0])


@dataclass(frozen=True)
class NonlinearConnection:
    M: DTensor
    N: DTensor


def nonlinear_connection(s: Scenario, point: JetPoint) -> NonlinearConnection:
    geo = _geo(s, point, 1)
    return NonlinearConnection(DTensor("Stt", geo.M.value[0]), DTensor("Sts", geo.N.value[0]))


def canonical_spatial_nlc(s: Scenario, point: JetPoint) -> DTensor:
    geo = _geo(s, point, 1)
    dep = geo.fiber_dependence()[0]
    if dep > 1e-12:
        raise NotIsotropic(f"A depends on the fiber coordinates (|dA/dv| = {dep:.3g})")
    return DTensor("Sts", geo.canonical_nlc.value[0])


def adapted_derivative(s: Scenario, field, point: JetPoint, direction: str,
                       codes: str | None = None) -> DTensor:
    """Frame derivative of a scalar field or an array of them.

    ``direction`` is 't' (delta/delta t^c), 'x' (delta/delta x^k) or 'v'
    (d/dx^k_c).  The new indices come last.  ``codes`` types the field's own
    indices and defaults to lower spatial.
    """
    geo = _geo(s, point, 1)
    arr = np.asarray(field, dtype=object)
    flat = [f.jet(geo.V, geo._memo) for f in arr.ravel()]
    F = jets.stack(flat, 0).reshape(arr.shape)
    out = geo.adapted_derivative(F, direction)
    codes = "s" * arr.ndim if codes is None else codes
    return DTensor(codes + {"t": "t", "x": "s", "v": "Ts"}[direction], out.value[0])


def absolute_energy(s: Scenario, point: JetPoint) -> float:
    return float(_geo(s, point, 0).energy.value[0])


def liouville(s: Scenario, point: JetPoint) -> DTensor:
    return DTensor("Ts", _geo(s, point, 0).liouville.value[0])
