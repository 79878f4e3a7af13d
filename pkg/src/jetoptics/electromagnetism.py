"""Deflection tensors, the electromagnetic d-tensors F and f, and Maxwell residuals.

Layouts (superscripts first):

* ``liouville[a, i]`` = x^{(a)}_{(i)} = h^{am} g_ij x^j_m
* ``Dbar[a, i, b]`` = Dbar^{(a)}_{(i)b}, the /b derivative of the lowered Liouville field
* ``D[a, i, j]`` = D^{(a)}_{(i)j}, its |j derivative
* ``d[a, b, i, j]`` = d^{(a)(b)}_{(i)(j)}, its vertical derivative in direction (b, j)
* ``F[a, i, j]`` = 1/2 (D[a, i, j] - D[a, j, i])
* ``f[a, b, i, j]`` = 1/2 (d[a, b, i, j] - d[a, b, j, i])

Each quantity is produced twice, once through the covariant-derivative engine
and once from closed-form expressions in the connection coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cartan_connection import CartanConnection
from .jet_geometry import JetGeometry, Scenario
from .jets import Jet, jeinsum
from .tensor_core import DTensor, JetPoint


def _rows(x: np.ndarray) -> np.ndarray:
    return np.abs(x).reshape(x.shape[0], -1).max(axis=1)


def _cyclic(X: Jet, axes: tuple[int, int, int]) -> Jet:
    """Sum of X over the cyclic permutations of three of its axes."""
    i, j, k = axes
    base = list(range(X.ndim))
    out = X
    for perm in ((j, k, i), (k, i, j)):
        order = base.copy()
        order[i], order[j], order[k] = perm
        out = out + X.transpose(order)
    return out


class Electromagnetism:
    def __init__(self, cc: CartanConnection):
        self.cc = cc
        self.geo: JetGeometry = cc.geo

    # deflection ----------------------------------------------------------------
    @cached_property
    def liouville(self) -> Jet:
        return self.geo.liouville

    @cached_property
    def deflection(self) -> dict[str, Jet]:
        """Covariant derivatives of the lowered Liouville field."""
        cc, x = self.cc, self.liouville
        return {
            "Dbar": cc.covariant(x, "Ts", "t"),
            "D": cc.covariant(x, "Ts", "x"),
            "d": cc.covariant(x, "Ts", "v").transpose(0, 2, 1, 3),
        }

    @cached_property
    def deflection_closed(self) -> dict[str, Jet]:
        geo, cc = self.geo, self.cc
        hv = jeinsum("au,ru->ar", geo.hinv, geo.v)  # h^{am} x^r_m
        return {
            "Dbar": jeinsum("ar,im,mrb->aib", hv, geo.g, cc.G),
            "D": jeinsum("ar,im,mrj->aij", hv, geo.g, cc.Lam),
            "d": geo.G_vert + jeinsum("bmji,am->abij", cc.C_low, hv),
        }

    def deflection_residual(self) -> np.ndarray:
        a, b = self.deflection, self.deflection_closed
        return np.max([_rows(a[k].value - b[k].value) for k in a], axis=0)

    # electromagnetic tensors ------------------------------------------------------
    @cached_property
    def F(self) -> Jet:
        D = self.deflection["D"]
        return 0.5 * (D - D.transpose(0, 2, 1))

    @cached_property
    def f(self) -> Jet:
        d = self.deflection["d"]
        return 0.5 * (d - d.transpose(0, 1, 3, 2))

    def em_closed(self, half: bool = True) -> dict[str, Jet]:
        """Closed forms in phi, A, Lambda and C.

        ``half=False`` drops the factor 1/2 in F, giving the bracket alone.
        """
        geo, cc = self.geo, self.cc
        hv = jeinsum("au,mu->am", geo.hinv, geo.v)
        lam0 = jeinsum("rmj,r->mj", cc.Lam, geo.A)
        inner = jeinsum("ir,rmj->imj", geo.phi, cc.Lam) + jeinsum("i,mj->imj", geo.A, lam0)
        brk = jeinsum("imj,am->aij", inner, hv)
        F = (brk - brk.transpose(0, 2, 1)) * (0.5 if half else 1.0)
        C = cc.C_low
        f = 0.5 * jeinsum("bmji,am->abij", C - C.transpose(0, 1, 3, 2), hv)
        return {"F": F, "f": f}

    def em_residual(self, half: bool = True) -> np.ndarray:
        closed = self.em_closed(half)
        return np.maximum(_rows(self.F.value - closed["F"].value), _rows(self.f.value - closed["f"].value))

    # Maxwell equations ------------------------------------------------------------
    @cached_property
    def _dC(self) -> Jet:
        # d^{(a)(u)}_{(i)(m)} + C^{p(u)}_{i(m)} x^{(a)}_{(p)}, layout [a, u, i, m]
        return self.deflection["d"] + jeinsum("puim,ap->auim", self.cc.C, self.liouville)

    def maxwell(self, literal: bool = False) -> list[Jet]:
        """Left minus right of the five Maxwell equations.

        Default readings, each an identity of the connection:

        * first equation: the Liouville field multiplies G^p_{ib|k}, it is not
          differentiated along with it;
        * second equation: the last term is
          [d^{(a)(g)}_{(i)(m)} + C^{p(g)}_{i(m)} x^{(a)}_{(p)}] G^m_{kb};
        * fifth equation: the cyclic sum is symmetrized in the two free
          temporal labels (unchanged when they coincide or p = 1).

        ``literal=True`` differentiates x G as a product, contracts the second
        equation's pair over the temporal label and skips the symmetrization.
        """
        cc, geo = self.cc, self.geo
        F, f, x = self.F, self.f, self.liouville
        Dbar, D = self.deflection["Dbar"], self.deflection["D"]
        G = cc.G
        p = cc.p

        # [Dbar_{(i)b} + x_{(p)} G^p_{ib}]_{|k} - D_{(i)m} G^m_{kb}, layout [a, i, b, k]
        if literal:
            Y = cc.covariant(Dbar + jeinsum("ap,pib->aib", x, G), "Tst", "x")
        else:
            Y = cc.covariant(Dbar, "Tst", "x") + jeinsum("ap,pibk->aibk", x, cc.covariant(G, "Sst", "x"))
        Y = Y - jeinsum("aim,mkb->aibk", D, G)
        rhs1 = 0.5 * (Y - Y.transpose(0, 3, 2, 1)).transpose(0, 1, 3, 2)
        m1 = cc.covariant(F, "Tss", "t") - rhs1

        # layout [a, i, b, g, k]
        Z = cc.covariant(Dbar, "Tst", "v") + jeinsum("ap,pibgk->aibgk", x, geo.d_v(G))
        if literal:
            last = jeinsum("auim,mku,b,g->aibgk", self._dC, G, np.ones(p), np.ones(p))
        else:
            last = jeinsum("agim,mkb->aibgk", self._dC, G)
        Z = Z - last
        rhs2 = 0.5 * (Z - Z.transpose(0, 4, 2, 3, 1))  # [a, i, b, g, k]
        m2 = cc.covariant(f, "TTss", "t") - rhs2.transpose(0, 3, 1, 4, 2)

        # cyclic sum of F_{(i)j|k} against the vertical torsion R^{(m)}_{(u)jk}
        tors = cc.torsion_blocks["R^(m)_(u)ij"]
        lhs3 = _cyclic(cc.covariant(F, "Tss", "x"), (1, 2, 3))
        rhs3 = -0.5 * _cyclic(jeinsum("auim,mujk->aijk", self._dC, tors), (1, 2, 3))
        m3 = lhs3 - rhs3

        # layout [a, g, i, j, k]
        dF = cc.covariant(F, "Tss", "v").transpose(0, 3, 1, 2, 4)
        m4 = _cyclic(dF + cc.covariant(f, "TTss", "x"), (2, 3, 4))

        # layout [a, b, g, i, j, k]
        df = cc.covariant(f, "TTss", "v").transpose(0, 1, 4, 2, 3, 5)
        m5 = _cyclic(df, (3, 4, 5))
        if not literal:
            m5 = 0.5 * (m5 + m5.transpose(0, 2, 1, 3, 4, 5))
        return [m1, m2, m3, m4, m5]

    def maxwell_residuals(self, literal: bool = False) -> np.ndarray:
        """(B, 5) max-abs residuals."""
        return np.stack([_rows(m.value) for m in self.maxwell(literal)], axis=1)


# point API ------------------------------------------------------------------

def _em(s: Scenario, point: JetPoint) -> Electromagnetism:
    return Electromagnetism(CartanConnection(JetGeometry.at(s, point, 3)))


@dataclass(frozen=True)
class DeflectionTensors:
    Dbar: DTensor
    D: DTensor
    d: DTensor


@dataclass(frozen=True)
class EMTensors:
    F: DTensor
    f: DTensor


def deflection_tensors(s: Scenario, point: JetPoint) -> DeflectionTensors:
    dfl = _em(s, point).deflection
    return DeflectionTensors(DTensor("Tst", dfl["Dbar"].value[0]), DTensor("Tss", dfl["D"].value[0]),
                             DTensor("TTss", dfl["d"].value[0]))


def em_tensors(s: Scenario, point: JetPoint) -> EMTensors:
    em = _em(s, point)
    return EMTensors(DTensor("Tss", em.F.value[0]), DTensor("TTss", em.f.value[0]))


def maxwell_residuals(s: Scenario, point: JetPoint, literal: bool = False) -> list[float]:
    """Max-abs residual of each of the five Maxwell equations at one point."""
    return [float(r) for r in _em(s, point).maxwell_residuals(literal)[0]]
