"""Cartan-type linear connection of the optical metric and its torsion and curvature.

Coefficient layouts (superscripts first, then subscripts, in printed order):

* ``H[a, b, c]`` = H^a_{bc}, temporal Levi-Civita symbols of h
* ``G[i, j, c]`` = G^i_{jc}
* ``L[i, j, k]`` = L^i_{jk}
* ``C[i, c, j, k]`` = C^{i(c)}_{j(k)}

The Berwald connection of the same nonlinear connection has coefficients
(H, 0, gamma, 0).

The independent check builds the adapted frame X = (delta/delta t, delta/delta x,
d/dx_v) as a matrix over the coordinate basis, obtains every Lie bracket from
it, and evaluates torsion and curvature as frame commutators:

    T(X_B, X_C) = nabla_C X_B - nabla_B X_C - [X_C, X_B]
    R(X_B, X_C) X_A = nabla_C nabla_B X_A - nabla_B nabla_C X_A - nabla_[X_C, X_B] X_A
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .jet_geometry import JetGeometry, Scenario
from .jets import Jet, jeinsum
from .tensor_core import DTensor, JetPoint

CONNECTIONS = ("cartan", "berwald")
_FREE = "abcdefghijklmnopqrs"


def _swap_last(J: Jet) -> Jet:
    k = J.ndim
    return J.transpose(tuple(range(k - 2)) + (k - 1, k - 2))


class CartanConnection:
    """Coefficients, covariant derivatives, torsion and curvature on a batch of points."""

    def __init__(self, geo: JetGeometry):
        self.geo = geo
        self.p, self.n = geo.p, geo.n
        self.eye_t = np.eye(self.p)
        self.eye_s = np.eye(self.n)

    # coefficients -------------------------------------------------------------
    @cached_property
    def _w(self) -> Jet:
        return 1.0 / (1.0 + self.geo.A0)

    @cached_property
    def G(self) -> Jet:
        """G^i_{jc} = 1/2 [dt(A^i A_j) - A^i A^m / (1 + A0) dt(A_m A_j)]."""
        geo = self.geo
        d_up = geo.delta_t(jeinsum("i,j->ij", geo.A_up, geo.A))
        d_low = geo.delta_t(geo.AA)
        corr = jeinsum("i,m,,mjc->ijc", geo.A_up, geo.A_up, self._w, d_low)
        return 0.5 * (d_up - corr)

    @cached_property
    def A_low(self) -> Jet:
        """A_{ijm} = 1/2 [d_j(A_i A_m) + d_i(A_j A_m) - d_m(A_i A_j)] with delta/delta x."""
        d = self.geo.delta_x(self.geo.AA)  # d[i, j, k] = delta_k (A_i A_j)
        return 0.5 * (d.transpose(0, 2, 1) + d.transpose(2, 0, 1) - d)

    @cached_property
    def C_low(self) -> Jet:
        """C_low[c, i, j, m] = C^c_{ijm}, the same pattern with d/dx^k_c."""
        d = self.geo.d_v(self.geo.AA)  # d[i, j, c, k] = d(A_i A_j)/dx^k_c
        return 0.5 * (d.transpose(2, 0, 3, 1) + d.transpose(2, 3, 0, 1) - d.transpose(2, 0, 1, 3))

    @cached_property
    def _gA_low(self) -> Jet:
        # gamma_{jkm} + A_{jkm}
        return self.geo.gamma_low + self.A_low

    @cached_property
    def L(self) -> Jet:
        return jeinsum("jkm,im->ijk", self._gA_low, self.geo.ginv)

    @cached_property
    def C(self) -> Jet:
        return jeinsum("cjkm,im->icjk", self.C_low, self.geo.ginv)

    @cached_property
    def Lam(self) -> Jet:
        """Lambda^i_{jk} = L^i_{jk} - gamma^i_{jk}."""
        geo = self.geo
        up = jeinsum("im,jkm->ijk", geo.phiinv, self.A_low)
        corr = jeinsum("jkm,m,i,->ijk", self._gA_low, geo.A_up, geo.A_up, self._w)
        return up - corr

    @cached_property
    def C1(self) -> Jet:
        """C1[c, i, j, k] = phi^{im} C^c_{jkm}."""
        return jeinsum("im,cjkm->cijk", self.geo.phiinv, self.C_low)

    @cached_property
    def C0(self) -> Jet:
        """C0[c, i, j, k] = -C^c_{jk0} A^i / (1 + A0)."""
        geo = self.geo
        return -jeinsum("cjkm,m,i,->cijk", self.C_low, geo.A_up, geo.A_up, self._w)

    def coefficients(self, connection: str = "cartan") -> dict[str, Jet]:
        geo = self.geo
        if connection == "cartan":
            return {"H": geo.H, "G": self.G, "L": self.L, "C": self.C}
        if connection == "berwald":
            B, n, p = geo.batch, self.n, self.p
            zG = Jet.zeros(geo.space, (B, n, n, p), geo.order - 1)
            zC = Jet.zeros(geo.space, (B, n, p, n, n), geo.order - 1)
            return {"H": geo.H, "G": zG, "L": geo.gamma, "C": zC}
        raise ValueError(f"unknown connection {connection!r}")

    # covariant derivatives ----------------------------------------------------
    def covariant(self, F: Jet, codes: str, direction: str, connection: str = "cartan") -> Jet:
        """Covariant derivative of a d-tensor with index kinds ``codes``.

        'T'/'t' temporal upper/lower, 'S'/'s' spatial upper/lower.  Direction
        't' appends one temporal index (/c), 'x' one spatial index (|k) and
        'v' a pair (c, k) for the vertical derivative.
        """
        if len(codes) != F.ndim:
            raise ValueError(f"{len(codes)} index codes for a rank-{F.ndim} tensor")
        co = self.coefficients(connection)
        geo = self.geo
        f = _FREE[:F.ndim]
        out = geo.adapted_derivative(F, direction)
        if direction == "v":
            tail, tab = "UV", {"S": co["C"], "s": co["C"]}
        elif direction == "t":
            tail, tab = "U", {"T": co["H"], "t": co["H"], "S": co["G"], "s": co["G"]}
        elif direction == "x":
            tail, tab = "U", {"S": co["L"], "s": co["L"]}
        else:
            raise ValueError(f"unknown direction {direction!r}")
        for slot, code in enumerate(codes):
            if code not in tab:
                continue
            a = f[slot]
            fw = f[:slot] + "W" + f[slot + 1:]
            coef = tab[code]
            if direction == "v":
                spec = f"{a}UWV" if code.isupper() else f"WU{a}V"
            else:
                spec = f"{a}W{tail}" if code.isupper() else f"W{a}{tail}"
            term = jeinsum(f"{fw},{spec}->{f}{tail}", F, coef)
            out = out + term if code.isupper() else out - term
        return out

    # torsion ------------------------------------------------------------------
    @cached_property
    def torsion_blocks(self) -> dict[str, Jet]:
        geo, et = self.geo, self.eye_t
        G, Lam, C = self.G, self.Lam, self.C
        return {
            # T^m_{aj} = -G^m_{ja}
            "T^m_aj": -G.transpose(0, 2, 1),
            "P^(m)(b)_(u)a(j)": -jeinsum("mja,bu->mbuaj", G, et),
            "P^(m)(b)_(u)i(j)": -jeinsum("mij,bu->mbuij", Lam, et),
            "P^m(b)_i(j)": (self.C1 + self.C0).transpose(1, 0, 2, 3),
            "S^(m)(a)(b)_(u)(i)(j)": jeinsum("au,mbij->mabuij", et, C)
            - jeinsum("bu,maij->mabuij", et, C),
            "R^(m)_(u)ab": -jeinsum("eucd,me->mucd", geo.H_curv, geo.v),
            "R^(m)_(u)aj": Jet.constant(geo.space, np.zeros((geo.batch, self.n, self.p, self.p, self.n)),
                                        geo.order - 2),
            "R^(m)_(u)ij": jeinsum("mkij,ku->muij", geo.r_curv, geo.v),
        }

    # curvature ----------------------------------------------------------------
    @cached_property
    def rho(self) -> Jet:
        """Deflection of the spatial curvature, R^l_{ijk} - r^l_{ijk}."""
        geo = self.geo
        Lam = self.Lam
        dk = self.covariant(Lam, "Sss", "x", "berwald")  # Lam^l_{ij||k}
        quad = jeinsum("mij,lmk->lijk", Lam, Lam)
        torsion = jeinsum("lumi,msjk,su->lijk", self.C, geo.r_curv, geo.v)
        return dk - _swap_last(dk) + quad - _swap_last(quad) + torsion

    @cached_property
    def curvature_blocks(self) -> dict[str, Jet]:
        geo = self.geo
        G, L, C = self.G, self.L, self.C
        # R^l_{ibc}
        dG = geo.delta_t(G)  # [l, i, b, c] = delta_c G^l_{ib}
        quad = jeinsum("mib,lmc->libc", G, G)
        vert = jeinsum("eucd,lumi,me->licd", geo.H_curv, C, geo.v)
        R_t = dG - _swap_last(dG) + quad - _swap_last(quad) - vert
        # R^l_{ibk}
        R_m = (geo.delta_x(G) - geo.delta_t(L).transpose(0, 1, 3, 2)
               + jeinsum("mib,lmk->libk", G, L) - jeinsum("mik,lmb->libk", L, G))
        # P^{l(c)}_{ib(k)}
        P_t = (geo.d_v(G).transpose(0, 3, 1, 2, 4) - self.covariant(C, "STss", "t").transpose(0, 1, 2, 4, 3)
               - jeinsum("lcim,mkb->lcibk", C, G))
        # P^{l(c)}_{ij(k)}
        Cs = self.C1 + self.C0
        P_s = (geo.d_v(self.Lam).transpose(0, 3, 1, 2, 4)
               - jeinsum("mjk,clim->lcijk", self.Lam, Cs)
               - self.covariant(Cs, "TSss", "x").transpose(1, 0, 2, 4, 3))
        S = self.S1 + self.S0
        return {
            "H^a_ebg": geo.H_curv,
            "R^l_ibg": R_t,
            "R^l_ibk": R_m,
            "R^l_ijk": geo.r_curv + self.rho,
            "P^l(g)_ib(k)": P_t,
            "P^l(g)_ij(k)": P_s,
            "S^l(b)(g)_i(j)(k)": S,
        }

    def _vertical_curv(self, Cpart: Jet) -> Jet:
        """Vertical curvature built from one part of C (layout c, l, i, j)."""
        dv = self.geo.d_v(Cpart)  # [b, l, i, j, c, k] = d Cpart^{b l}_{ij} / dx^k_c
        first = dv.transpose(1, 0, 4, 2, 3, 5)
        second = dv.transpose(1, 4, 0, 2, 5, 3)
        # quadratic terms contracted against the full C
        q1 = jeinsum("bmij,lcmk->lbcijk", Cpart, self.C)
        q2 = jeinsum("blmj,mcik->lbcijk", Cpart, self.C)
        return first - second + q1 - q2

    @cached_property
    def S1(self) -> Jet:
        return self._vertical_curv(self.C1)

    @cached_property
    def S0(self) -> Jet:
        return self._vertical_curv(self.C0)

    # frame oracle -------------------------------------------------------------
    def _vt(self, i, a):
        return self.p + self.n + i * self.p + a

    @cached_property
    def frame(self) -> Jet:
        """E[C, a]: component a of frame vector X_C over the coordinate basis (order 1)."""
        geo, p, n = self.geo, self.p, self.n
        D = geo.s.nvars
        M = geo.M.truncate(1)
        N = geo.N.truncate(1)
        c = np.zeros((geo.batch, D, D, M.c.shape[-1]))
        c[:, np.arange(D), np.arange(D), 0] = 1.0
        # M[j, b, a] sits at row a, column v(j, b)
        c[:, :p, p + n:, :] = -M.c.reshape(geo.batch, n * p, p, -1).transpose(0, 2, 1, 3)
        c[:, p:p + n, p + n:, :] = -N.c.reshape(geo.batch, n * p, n, -1).transpose(0, 2, 1, 3)
        return Jet(c, 1, geo.space)

    def frame_table(self, connection: str = "cartan") -> Jet:
        """Gam[D, B, C] with nabla_{X_C} X_B = Gam[D, B, C] X_D (order 1)."""
        geo, p, n = self.geo, self.p, self.n
        D = geo.s.nvars
        co = {k: v.truncate(1) for k, v in self.coefficients(connection).items()}
        H, G, L, C = co["H"], co["G"], co["L"], co["C"]
        B, m = geo.batch, geo.space.size(1)
        et, es = self.eye_t, self.eye_s
        out = np.zeros((B, D, D, D, m))
        T, S, Vs = slice(0, p), slice(p, p + n), slice(p + n, D)

        def vert(J_sp: Jet, extra: str, h_part: Jet | None):
            # delta^b_a J^i_j (+ optional -delta^i_j H^b_{a .}) on (i a),(j b)
            blk = jeinsum(f"ij{extra},ba->iajb{extra}", J_sp, et)
            if h_part is not None:
                blk = blk - jeinsum(f"ij,ba{extra}->iajb{extra}", es, h_part)
            return blk

        # direction temporal
        out[:, T, T, T] = H.c
        out[:, S, S, T] = G.c
        out[:, Vs, Vs, T] = vert(G, "g", H).c.reshape(B, n * p, n * p, p, m)
        # direction spatial
        out[:, S, S, S] = L.c
        out[:, Vs, Vs, S] = vert(L, "k", None).c.reshape(B, n * p, n * p, n, m)
        # direction vertical, C[i, g, j, k] placed at column v(k, g)
        Cc = C.transpose(0, 2, 3, 1)  # [i, j, k, g]
        out[:, S, S, Vs] = Cc.c.reshape(B, n, n, n * p, m)
        Cv = jeinsum("ijkg,ba->iajbkg", Cc, et)
        out[:, Vs, Vs, Vs] = Cv.c.reshape(B, n * p, n * p, n * p, m)
        return Jet(out, 1, geo.space)

    @cached_property
    def structure_constants(self) -> np.ndarray:
        """c[E, C, B] with [X_C, X_B] = c[E, C, B] X_E (values)."""
        E = self.frame
        e0 = E.value
        dE = E.grad().value  # [B, a, b] = d_b E[B, a]
        XE = np.einsum("zCb,zBab->zCBa", e0, dE)
        br = XE - XE.transpose(0, 2, 1, 3)
        W = np.linalg.inv(e0)  # d_a = W[a, E] X_E
        return np.einsum("zCBa,zaE->zECB", br, W)

    def curvature_oracle(self, connection: str = "cartan") -> np.ndarray:
        """R[D, A, B, C] = coefficient of X_D in R(X_B, X_C) X_A."""
        Gam = self.frame_table(connection)
        g0 = Gam.value
        dG = Gam.grad().value
        e0 = self.frame.value
        XG = np.einsum("zCb,zDABb->zDABC", e0, dG)
        quad = np.einsum("zEAB,zDEC->zDABC", g0, g0)
        cst = self.structure_constants
        brk = np.einsum("zECB,zDAE->zDABC", cst, g0)
        return XG - XG.transpose(0, 1, 2, 4, 3) + quad - quad.transpose(0, 1, 2, 4, 3) - brk

    def torsion_oracle(self, connection: str = "cartan") -> np.ndarray:
        """T[D, B, C] = coefficient of X_D in T(X_B, X_C)."""
        g0 = self.frame_table(connection).value
        return g0 - g0.transpose(0, 1, 3, 2) - self.structure_constants.transpose(0, 1, 3, 2)

    # block placement ----------------------------------------------------------
    def _ranges(self):
        p, n = self.p, self.n
        return {"t": np.arange(p), "s": p + np.arange(n),
                "v": (p + n + np.arange(n * p)).reshape(n, p)}

    def torsion_full(self) -> np.ndarray:
        """Closed-form torsion assembled into the frame layout T[D, B, C]."""
        r = self._ranges()
        Dn = self.geo.s.nvars
        out = np.zeros((self.geo.batch, Dn, Dn, Dn))
        for key, blk in self.torsion_blocks.items():
            Dx, Bx, Cx, data = self._torsion_slots(key, blk.value, r)
            out[(slice(None),) + np.ix_(Dx, Bx, Cx)] = data
            out[(slice(None),) + np.ix_(Dx, Cx, Bx)] = -data.transpose(0, 1, 3, 2)
        return out

    def _torsion_slots(self, key, val, r):
        t, s, v = r["t"], r["s"], r["v"]
        B = val.shape[0]
        n, p = self.n, self.p
        if key == "T^m_aj":
            return s, t, s, val
        if key == "P^(m)(b)_(u)a(j)":  # [m, b, u, a, j] -> D=(m,u), B=a, C=(j,b)
            d = val.transpose(0, 1, 3, 4, 5, 2).reshape(B, n * p, p, n * p)
            return v.ravel(), t, v.ravel(), d
        if key == "P^(m)(b)_(u)i(j)":
            d = val.transpose(0, 1, 3, 4, 5, 2).reshape(B, n * p, n, n * p)
            return v.ravel(), s, v.ravel(), d
        if key == "P^m(b)_i(j)":  # [m, b, i, j] -> D=m, B=i, C=(j,b)
            d = val.transpose(0, 1, 3, 4, 2).reshape(B, n, n, n * p)
            return s, s, v.ravel(), d
        if key == "S^(m)(a)(b)_(u)(i)(j)":  # [m,a,b,u,i,j] -> D=(m,u), B=(i,a), C=(j,b)
            d = val.transpose(0, 1, 4, 5, 2, 6, 3).reshape(B, n * p, n * p, n * p)
            return v.ravel(), v.ravel(), v.ravel(), d
        if key == "R^(m)_(u)ab":
            return v.ravel(), t, t, val.reshape(B, n * p, p, p)
        if key == "R^(m)_(u)aj":
            return v.ravel(), t, s, val.reshape(B, n * p, p, n)
        if key == "R^(m)_(u)ij":
            return v.ravel(), s, s, val.reshape(B, n * p, n, n)
        raise KeyError(key)

    def curvature_slots(self, key: str, oracle: np.ndarray) -> np.ndarray:
        """Extract a closed-form block's layout from the frame curvature R[D, A, B, C]."""
        r = self._ranges()
        t, s, v = r["t"], r["s"], r["v"]
        n, p = self.n, self.p
        z = (slice(None),)
        if key == "H^a_ebg":
            return oracle[z + np.ix_(t, t, t, t)]
        if key == "R^l_ibg":
            return oracle[z + np.ix_(s, s, t, t)]
        if key == "R^l_ibk":
            return oracle[z + np.ix_(s, s, t, s)]
        if key == "R^l_ijk":
            return oracle[z + np.ix_(s, s, s, s)]
        if key == "P^l(g)_ib(k)":  # [l, g, i, b, k]
            blk = oracle[z + np.ix_(s, s, t, v.ravel())].reshape(-1, n, n, p, n, p)
            return blk.transpose(0, 1, 5, 2, 3, 4)
        if key == "P^l(g)_ij(k)":
            blk = oracle[z + np.ix_(s, s, s, v.ravel())].reshape(-1, n, n, n, n, p)
            return blk.transpose(0, 1, 5, 2, 3, 4)
        if key == "S^l(b)(g)_i(j)(k)":  # [l, b, g, i, j, k]
            blk = oracle[z + np.ix_(s, s, v.ravel(), v.ravel())].reshape(-1, n, n, n, p, n, p)
            return blk.transpose(0, 1, 4, 6, 2, 3, 5)
        raise KeyError(key)

    # residuals ----------------------------------------------------------------
    def curvature_residual(self) -> np.ndarray:
        """Per point, max |closed form - frame commutator| over all curvature blocks."""
        oracle = self.curvature_oracle()
        worst = np.zeros(self.geo.batch)
        for key, blk in self.curvature_blocks.items():
            diff = np.abs(blk.value - self.curvature_slots(key, oracle))
            worst = np.maximum(worst, diff.reshape(self.geo.batch, -1).max(axis=1))
        return worst

    def torsion_residual(self) -> np.ndarray:
        diff = np.abs(self.torsion_full() - self.torsion_oracle())
        return diff.reshape(self.geo.batch, -1).max(axis=1)

    def metricity_residual(self, connection: str = "cartan") -> np.ndarray:
        """Per point, max over directions of |nabla h|, |nabla g|, |nabla (h^{ab} g_ij)|."""
        geo = self.geo
        worst = np.zeros(geo.batch)
        for F, codes in ((geo.h, "tt"), (geo.hinv, "TT"), (geo.g, "ss"), (geo.G_vert, "TTss")):
            for direction in ("t", "x", "v"):
                d = self.covariant(F, codes, direction, connection).value
                worst = np.maximum(worst, np.abs(d).reshape(geo.batch, -1).max(axis=1))
        return worst

    def berwald_metricity_residual(self) -> np.ndarray:
        """Berwald connection: |h_{/c}|, |phi_{|k}|, |phi_{/c}| and |d phi| vanish."""
        geo = self.geo
        worst = np.zeros(geo.batch)
        for F, codes, dirs in ((geo.h, "tt", "txv"), (geo.phi, "ss", "txv")):
            for direction in dirs:
                d = self.covariant(F, codes, direction, "berwald").value
                worst = np.maximum(worst, np.abs(d).reshape(geo.batch, -1).max(axis=1))
        return worst


# point API ------------------------------------------------------------------

@dataclass(frozen=True)
class CartanCoefficients:
    H: DTensor
    G: DTensor
    L: DTensor
    C: DTensor


_TORSION_CODES = {
    "T^m_aj": "Sts", "P^(m)(b)_(u)a(j)": "STtts", "P^(m)(b)_(u)i(j)": "STtss",
    "P^m(b)_i(j)": "STss", "S^(m)(a)(b)_(u)(i)(j)": "STTtss", "R^(m)_(u)ab": "Sttt",
    "R^(m)_(u)aj": "Stts", "R^(m)_(u)ij": "Stss",
}
_CURVATURE_CODES = {
    "H^a_ebg": "Tttt", "R^l_ibg": "Sstt", "R^l_ibk": "Ssts", "R^l_ijk": "Ssss",
    "P^l(g)_ib(k)": "STsts", "P^l(g)_ij(k)": "STsss", "S^l(b)(g)_i(j)(k)": "STTsss",
}


def _connection(s: Scenario, point: JetPoint, order: int = 3) -> CartanConnection:
    return CartanConnection(JetGeometry.at(s, point, order))


def cartan_coefficients(s: Scenario, point: JetPoint, connection: str = "cartan") -> CartanCoefficients:
    co = _connection(s, point, 1).coefficients(connection)
    return CartanCoefficients(DTensor("Ttt", co["H"].value[0]), DTensor("Sst", co["G"].value[0]),
                              DTensor("Sss", co["L"].value[0]), DTensor("STss", co["C"].value[0]))


def covariant_derivative(s: Scenario, tensor, codes: str, point: JetPoint, direction: str,
                         connection: str = "cartan") -> DTensor:
    """Covariant derivative of a tensor of scalar fields (nested lists allowed)."""
    from . import jets

    cc = _connection(s, point, 1)
    geo = cc.geo
    arr = np.asarray(tensor, dtype=object)
    F = jets.stack([f.jet(geo.V, geo._memo) for f in arr.ravel()], 0).reshape(arr.shape)
    out = cc.covariant(F, codes, direction, connection)
    extra = {"t": "t", "x": "s", "v": "Ts"}[direction]
    return DTensor(codes + extra, out.value[0])


def torsion(s: Scenario, point: JetPoint) -> dict[str, DTensor]:
    blocks = _connection(s, point, 2).torsion_blocks
    return {k: DTensor(_TORSION_CODES[k], v.value[0]) for k, v in blocks.items()}


def curvature(s: Scenario, point: JetPoint) -> dict[str, DTensor]:
    blocks = _connection(s, point, 3).curvature_blocks
    return {k: DTensor(_CURVATURE_CODES[k], v.value[0]) for k, v in blocks.items()}


def curvature_oracle(s: Scenario, point: JetPoint) -> dict[str, DTensor]:
    """Curvature blocks recomputed from frame commutators."""
    cc = _connection(s, point, 2)
    R = cc.curvature_oracle()
    return {k: DTensor(_CURVATURE_CODES[k], cc.curvature_slots(k, R)[0]) for k in _CURVATURE_CODES}


def torsion_oracle(s: Scenario, point: JetPoint) -> np.ndarray:
    """Frame torsion T[D, B, C] in the adapted frame ordering (t, x, v)."""
    return _connection(s, point, 2).torsion_oracle()[0]
