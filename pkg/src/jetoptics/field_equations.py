"""Ricci blocks, scalar curvature, stress-energy and conservation residuals.

Block layouts:

* ``H_ab[a, b]``, ``R_ib[i, b]``, ``R_ij[i, j]``
* ``P^(a)_(i)b[a, i, b]``, ``P^(a)_i(j)[a, i, j]``, ``P^(a)_(i)j[a, i, j]``
* ``S^(b)(g)_(j)(k)[b, g, j, k]``

The Einstein equations are taken in the definitional form
T_AB = (R_AB - Sc/2 G_AB) / K with the adapted block metric
G_AB = diag(h_ab, g_ij, h^{ab} g_ij); the scalar curvature contracts with the
inverse blocks (h^{ab}, g^{ij}, h_{ab} g^{ij}).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cartan_connection import CartanConnection
from .errors import DimensionNotice
from .jet_geometry import JetGeometry, Scenario
from .jets import Jet, jeinsum
from .tensor_core import DTensor, JetPoint

RICCI_KEYS = ("H_ab", "R_ib", "R_ij", "P^(a)_(i)b", "P^(a)_i(j)", "P^(a)_(i)j", "S^(b)(g)_(j)(k)")
_RICCI_CODES = {"H_ab": "tt", "R_ib": "st", "R_ij": "ss", "P^(a)_(i)b": "Tst",
                "P^(a)_i(j)": "Tss", "P^(a)_(i)j": "Tss", "S^(b)(g)_(j)(k)": "TTss"}


def _rows(x: np.ndarray) -> np.ndarray:
    return np.abs(x).reshape(x.shape[0], -1).max(axis=1) if x[0].size else np.zeros(x.shape[0])


class FieldEquations:
    """Einstein-equation quantities on the batch of a :class:`CartanConnection`."""

    def __init__(self, cc: CartanConnection, K: float | None = None):
        self.cc = cc
        self.geo: JetGeometry = cc.geo
        self.p, self.n = cc.p, cc.n
        self.K = float(self.geo.s.K if K is None else K)

    # Ricci ---------------------------------------------------------------------
    @cached_property
    def _vertical_ricci(self) -> tuple[Jet, Jet]:
        return _trace_vertical(self.cc.S1), _trace_vertical(self.cc.S0)

    @cached_property
    def ricci(self) -> dict[str, Jet]:
        cc, geo = self.cc, self.geo
        cb = cc.curvature_blocks
        eye_n = np.eye(self.n)
        S1, S0 = self._vertical_ricci
        return {
            "H_ab": jeinsum("mabn,mn->ab", geo.H_curv, np.eye(self.p)),
            "R_ib": jeinsum("mibk,mk->ib", cb["R^l_ibk"], eye_n),
            "R_ij": self.r_ij + self.rho_ij,
            "P^(a)_(i)b": jeinsum("maibk,mk->aib", cb["P^l(g)_ib(k)"], eye_n),
            "P^(a)_i(j)": -jeinsum("maikj,mk->aij", cb["P^l(g)_ij(k)"], eye_n),
            "P^(a)_(i)j": jeinsum("maijk,mk->aij", cb["P^l(g)_ij(k)"], eye_n),
            "S^(b)(g)_(j)(k)": S1 + S0,
        }

    @cached_property
    def r_ij(self) -> Jet:
        return jeinsum("mijk,mk->ij", self.geo.r_curv, np.eye(self.n))

    @cached_property
    def rho_ij(self) -> Jet:
        return jeinsum("mijk,mk->ij", self.cc.rho, np.eye(self.n))

    @cached_property
    def ricci_oracle(self) -> np.ndarray:
        """Ric[A, B] = R^D_{ABD} from the frame-commutator curvature (values)."""
        R = self.cc.curvature_oracle()
        return np.einsum("zDABD->zAB", R)

    def ricci_oracle_blocks(self) -> dict[str, np.ndarray]:
        r = self.cc._ranges()
        t, s, v = r["t"], r["s"], r["v"]
        Ric = self.ricci_oracle
        n, p = self.n, self.p
        z = (slice(None),)
        vv = Ric[z + np.ix_(v.ravel(), v.ravel())].reshape(-1, n, p, n, p)
        return {
            "H_ab": Ric[z + np.ix_(t, t)],
            "R_ib": Ric[z + np.ix_(s, t)],
            "R_ij": Ric[z + np.ix_(s, s)],
            "P^(a)_(i)b": Ric[z + np.ix_(v.ravel(), t)].reshape(-1, n, p, p).transpose(0, 2, 1, 3),
            "P^(a)_i(j)": Ric[z + np.ix_(s, v.ravel())].reshape(-1, n, n, p).transpose(0, 3, 1, 2),
            "P^(a)_(i)j": Ric[z + np.ix_(v.ravel(), s)].reshape(-1, n, p, n).transpose(0, 2, 1, 3),
            "S^(b)(g)_(j)(k)": vv.transpose(0, 2, 4, 1, 3),
        }

    def ricci_residual(self) -> np.ndarray:
        oracle = self.ricci_oracle_blocks()
        worst = np.zeros(self.geo.batch)
        for key, blk in self.ricci.items():
            worst = np.maximum(worst, _rows(blk.value - oracle[key]))
        return worst

    def e2_residual(self) -> np.ndarray:
        """Mixed Ricci blocks (temporal, spatial) and (temporal, vertical) must vanish."""
        r = self.cc._ranges()
        Ric = self.ricci_oracle
        z = (slice(None),)
        a = Ric[z + np.ix_(r["t"], r["s"])]
        b = Ric[z + np.ix_(r["t"], r["v"].ravel())]
        return np.maximum(_rows(a), _rows(b))

    def displayed_p_relation(self) -> np.ndarray:
        """|P^(a)_(i)j + P^(a)_i(j)|, the sign relation between the two mixed blocks."""
        ric = self.ricci
        return _rows(ric["P^(a)_(i)j"].value + ric["P^(a)_i(j)"].value)

    # scalar curvature ----------------------------------------------------------
    @cached_property
    def scalar_parts(self) -> dict[str, Jet]:
        geo = self.geo
        w = self.cc._w
        ric = self.ricci
        S1, S0 = self._vertical_ricci
        H = jeinsum("ab,ab->", geo.hinv, ric["H_ab"])
        r = jeinsum("ij,ij->", geo.phiinv, self.r_ij)
        rho = jeinsum("ij,ij->", geo.phiinv, self.rho_ij)
        r00 = jeinsum("ij,i,j->", self.r_ij, geo.A_up, geo.A_up)
        rho00 = jeinsum("ij,i,j->", self.rho_ij, geo.A_up, geo.A_up)
        R = r + rho - (r00 + rho00) * w

        def split(Sb):
            full = jeinsum("ab,ij,abij->", geo.h, geo.phiinv, Sb)
            prime = jeinsum("ab,i,j,abij,->", geo.h, geo.A_up, geo.A_up, Sb, w)
            return full, prime

        s1, s1p = split(S1)
        s0, s0p = split(S0)
        S = s1 - s1p + s0 - s0p
        return {"H": H, "R": R, "S": S, "Sc": H + R + S, "r": r, "rho": rho, "r00": r00,
                "rho00": rho00, "S1": s1, "S1'": s1p, "S0": s0, "S0'": s0p}

    def scalar_contracted(self) -> np.ndarray:
        """Sc = G^{AB} R_AB from the oracle Ricci tensor."""
        geo, r = self.geo, self.cc._ranges()
        Ric = self.ricci_oracle
        z = (slice(None),)
        n, p = self.n, self.p
        ginv, hinv, h = geo.ginv.value, geo.hinv.value, geo.h.value
        vv = Ric[z + np.ix_(r["v"].ravel(), r["v"].ravel())].reshape(-1, n, p, n, p)
        return (np.einsum("zab,zab->z", hinv, Ric[z + np.ix_(r["t"], r["t"])])
                + np.einsum("zij,zij->z", ginv, Ric[z + np.ix_(r["s"], r["s"])])
                + np.einsum("zab,zij,ziajb->z", h, ginv, vv))

    def scalar_residual(self) -> np.ndarray:
        return np.abs(self.scalar_parts["Sc"].value - self.scalar_contracted())

    # stress-energy -------------------------------------------------------------
    @cached_property
    def hg(self) -> Jet:
        return self.geo.G_vert

    @cached_property
    def stress_energy(self) -> dict[str, Jet]:
        """Definitional T blocks and the tilde variants."""
        geo, K = self.geo, self.K
        ric, sp = self.ricci, self.scalar_parts
        half = 0.5 * sp["Sc"]
        T_tt = (ric["H_ab"] - jeinsum("ab,->ab", geo.h, half)) * (1 / K)
        T_ss = (ric["R_ij"] - jeinsum("ij,->ij", geo.g, half)) * (1 / K)
        T_vv = (ric["S^(b)(g)_(j)(k)"] - jeinsum("abij,->abij", self.hg, half)) * (1 / K)
        return {
            "T_ab": T_tt,
            "T_ij": T_ss,
            "T^(a)(b)_(i)(j)": T_vv,
            "T_ia": ric["R_ib"] * (1 / K),
            "T^(a)_(i)b": ric["P^(a)_(i)b"] * (1 / K),
            "T^(a)_i(j)": ric["P^(a)_i(j)"] * (1 / K),
            "T^(a)_(i)j": ric["P^(a)_(i)j"] * (1 / K),
            "~T_ab": T_tt + jeinsum("ab,->ab", geo.h, (sp["R"] + sp["S"]) * (0.5 / K)),
            "~T_ij": T_ss + jeinsum("ij,->ij", geo.g, (sp["H"] + sp["S"]) * (0.5 / K)),
            "~T^(a)(b)_(i)(j)": T_vv + jeinsum("abij,->abij", self.hg, (sp["H"] + sp["R"]) * (0.5 / K)),
        }

    def _tilde_from_oracle(self) -> dict[str, np.ndarray]:
        """Tilde blocks built from the oracle Ricci tensor and its direct contraction."""
        geo, K = self.geo, self.K
        o = self.ricci_oracle_blocks()
        Sc = self.scalar_contracted()
        sp = {k: v.value for k, v in self.scalar_parts.items()}
        h, g, hg = geo.h.value, geo.g.value, self.hg.value
        T_tt = (o["H_ab"] - 0.5 * Sc[:, None, None] * h) / K
        T_ss = (o["R_ij"] - 0.5 * Sc[:, None, None] * g) / K
        T_vv = (o["S^(b)(g)_(j)(k)"] - 0.5 * Sc[:, None, None, None, None] * hg) / K
        return {
            "~T_ab": T_tt + ((sp["R"] + sp["S"]) / (2 * K))[:, None, None] * h,
            "~T_ij": T_ss + ((sp["H"] + sp["S"]) / (2 * K))[:, None, None] * g,
            "~T^(a)(b)_(i)(j)": T_vv + ((sp["H"] + sp["R"]) / (2 * K))[:, None, None, None, None] * hg,
        }

    def e1_left_sides(self, literal: bool = False) -> dict[str, np.ndarray]:
        """Left-hand sides of the reduced Einstein system from closed-form pieces.

        ``literal=True`` uses phi_ij in the spatial line and S + (S1 - S1')/2 hg
        in the vertical line; the default uses the forms that follow from the
        definitional equation (g_ij and S1 - (S1 - S1')/2 hg).
        """
        geo = self.geo
        sp = {k: v.value for k, v in self.scalar_parts.items()}
        S1b, S0b = (x.value for x in self._vertical_ricci)
        h, g, phi, hg = geo.h.value, geo.g.value, geo.phi.value, self.hg.value
        e = lambda x, k: x.reshape(x.shape + (1,) * k)
        H_ab = self.ricci["H_ab"].value
        line1 = H_ab - 0.5 * e(sp["H"], 2) * h
        w = 1.0 / (1.0 + geo.A0.value)
        theta = self.rho_ij.value - 0.5 * e(sp["rho"] - (sp["r00"] + sp["rho00"]) * w, 2) * g
        metric = phi if literal else g
        line2 = self.r_ij.value - 0.5 * e(sp["r"], 2) * metric + theta
        S00 = S0b - 0.5 * e(sp["S0"] - sp["S0'"], 4) * hg
        d1 = e(sp["S1"] - sp["S1'"], 4) * hg
        if literal:
            line3 = (S1b + S0b) + 0.5 * d1 + S00
        else:
            line3 = S1b - 0.5 * d1 + S00
        return {"~T_ab": line1, "~T_ij": line2, "~T^(a)(b)_(i)(j)": line3}

    def e1_residual(self, literal: bool = False) -> np.ndarray:
        """Per point, max |LHS - K T~| over the three lines."""
        lhs = self.e1_left_sides(literal)
        tilde = self._tilde_from_oracle()
        worst = np.zeros(self.geo.batch)
        for key in lhs:
            worst = np.maximum(worst, _rows(lhs[key] - self.K * tilde[key]))
        return worst

    def tilde_identity_residual(self) -> np.ndarray:
        """Closed-form T~ against the tilde definitions re-applied to T (machine path)."""
        se, sp = self.stress_energy, self.scalar_parts
        geo, K = self.geo, self.K
        a = se["~T_ab"].value - se["T_ab"].value - ((sp["R"] + sp["S"]).value / (2 * K))[:, None, None] * geo.h.value
        return _rows(a)

    # conservation laws ---------------------------------------------------------
    def _check_dimensions(self):
        p, n = self.p, self.n
        bad = [name for name, d in (("2-p", 2 - p), ("2-n", 2 - n), ("2-pn", 2 - p * n)) if d == 0]
        if bad:
            raise DimensionNotice(f"conservation-law coefficient 1/({', '.join(bad)}) is undefined "
                                  f"for p={p}, n={n}")

    def conservation_residuals(self) -> np.ndarray:
        """(B, 3) residuals of the three conservation laws, left minus right."""
        self._check_dimensions()
        cc, geo = self.cc, self.geo
        p, n = self.p, self.n
        se, ric = self.stress_energy, self.ricci
        hinv, h, ginv = geo.hinv, geo.h, geo.ginv
        Tt, Ts, Tv = se["~T_ab"], se["~T_ij"], se["~T^(a)(b)_(i)(j)"]
        T_T = jeinsum("ab,ab->", hinv, Tt)
        T_M = jeinsum("ij,ij->", ginv, Ts)
        T_v = jeinsum("ab,ij,abij->", h, ginv, Tv)
        et, es = np.eye(p), np.eye(n)

        # first law, free index beta
        Tmix = jeinsum("am,mb->ab", hinv, Tt)
        lhs1 = (jeinsum("abg,ag->b", cc.covariant(Tmix, "Tt", "t"), et)
                + cc.covariant(T_M, "", "t") * (1 / (2 - n))
                + cc.covariant(T_v, "", "t") * (1 / (2 - p * n)))
        Rup = jeinsum("im,mb->ib", ginv, ric["R_ib"])
        Pup = jeinsum("im,au,umb->iab", ginv, h, ric["P^(a)_(i)b"])
        rhs1 = -(jeinsum("ibk,ik->b", cc.covariant(Rup, "St", "x"), es)
                 + jeinsum("iabgk,ik,ag->b", cc.covariant(Pup, "Stt", "v"), es, et))

        # second law, free index j
        Tsmix = jeinsum("im,mj->ij", ginv, Ts)
        lhs2 = (cc.covariant(T_T, "", "x") * (1 / (2 - p))
                + jeinsum("ijk,ik->j", cc.covariant(Tsmix, "Ss", "x"), es)
                + cc.covariant(T_v, "", "x") * (1 / (2 - p * n)))
        Pj = jeinsum("im,au,umj->iaj", ginv, h, ric["P^(a)_(i)j"])
        rhs2 = -jeinsum("iajgk,ik,ag->j", cc.covariant(Pj, "Sts", "v"), es, et)

        # third law, free indices (alpha, i)
        Tvmix = jeinsum("au,im,ubmj->iabj", h, ginv, Tv)
        lhs3 = (cc.covariant(T_T, "", "v") * (1 / (2 - p))
                + cc.covariant(T_M, "", "v") * (1 / (2 - n))
                + jeinsum("mubjgk,mk,ug->bj", cc.covariant(Tvmix, "StTs", "v"), es, et))
        Pv = jeinsum("im,bmj->ibj", ginv, ric["P^(a)_i(j)"])
        rhs3 = -jeinsum("ibjk,ik->bj", cc.covariant(Pv, "STs", "x"), es)

        return np.stack([_rows((lhs1 - rhs1).value), _rows((lhs2 - rhs2).value),
                         _rows((lhs3 - rhs3).value)], axis=1)


def _trace_vertical(S: Jet) -> Jet:
    """S^{m(g)(b)}_{j(k)(m)} with S stored as [l, b, g, i, j, k]."""
    n = S.shape[0]
    return jeinsum("mgbjkn,mn->bgjk", S, np.eye(n))


# point API ------------------------------------------------------------------

def _equations(s: Scenario, point: JetPoint, K: float | None = None) -> FieldEquations:
    return FieldEquations(CartanConnection(JetGeometry.at(s, point, 3)), K)


def ricci_dtensors(s: Scenario, point: JetPoint) -> dict[str, DTensor]:
    ric = _equations(s, point).ricci
    return {k: DTensor(_RICCI_CODES[k], v.value[0]) for k, v in ric.items()}


@dataclass(frozen=True)
class ScalarParts:
    H: float
    R: float
    S: float
    Sc: float
    contracted: float
    auxiliaries: dict


def scalar_curvature(s: Scenario, point: JetPoint) -> ScalarParts:
    fe = _equations(s, point)
    sp = {k: float(v.value[0]) for k, v in fe.scalar_parts.items()}
    aux = {k: sp[k] for k in ("r", "rho", "r00", "rho00", "S1", "S1'", "S0", "S0'")}
    return ScalarParts(sp["H"], sp["R"], sp["S"], sp["Sc"], float(fe.scalar_contracted()[0]), aux)


_SE_CODES = {"T_ab": "tt", "T_ij": "ss", "T^(a)(b)_(i)(j)": "TTss", "T_ia": "st",
             "T^(a)_(i)b": "Tst", "T^(a)_i(j)": "Tss", "T^(a)_(i)j": "Tss",
             "~T_ab": "tt", "~T_ij": "ss", "~T^(a)(b)_(i)(j)": "TTss"}


@dataclass(frozen=True)
class StressEnergy:
    blocks: dict
    K: float
    e1_residual: float | None
    e2_residual: float


def stress_energy(s: Scenario, point: JetPoint, K: float | None = None) -> StressEnergy:
    """Stress-energy blocks; the reduced (E1') check needs p > 2 and n > 2."""
    fe = _equations(s, point, K)
    blocks = {k: DTensor(_SE_CODES[k], v.value[0]) for k, v in fe.stress_energy.items()}
    if s.p > 2 and s.n > 2:
        e1 = float(fe.e1_residual()[0])
    else:
        warnings.warn(DimensionNotice(f"reduced Einstein form needs p > 2 and n > 2 (p={s.p}, n={s.n})"),
                      stacklevel=2)
        e1 = None
    return StressEnergy(blocks, fe.K, e1, float(fe.e2_residual()[0]))


def conservation_residuals(s: Scenario, point: JetPoint, K: float | None = None) -> tuple[float, float, float]:
    res = _equations(s, point, K).conservation_residuals()[0]
    return tuple(float(x) for x in res)
