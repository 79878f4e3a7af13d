"""The compare-connections and classical-reduction commands.

Both return plain dicts ready for JSON; neither asserts anything beyond the
stated tolerance of the classical reduction.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import base_geometry as bg
from .cartan_connection import CartanConnection
from .electromagnetism import Electromagnetism
from .errors import NotClassical, NotIsotropic
from .jet_geometry import JetGeometry, Scenario
from .scenario import ScenarioConfig, parse_expression, sample_points
from .tensor_core import JetPoint, coordinate_names

CLASSICAL_TOL = 1e-12


class CanonicalNLCGeometry(JetGeometry):
    """Same space, with the spatial nonlinear connection replaced by N-bar."""

    @cached_property
    def N(self):
        return self.canonical_nlc


def _lists(j) -> list:
    return np.asarray(j.value[0]).tolist()


def run_compare_connections(cfg: ScenarioConfig, u: np.ndarray) -> dict:
    """N, N-bar, their difference and the resulting differences downstream."""
    s = cfg.scenario
    fixed = JetGeometry(s, u[None, :], 3)
    dep = float(fixed.fiber_dependence()[0])
    if dep > 1e-12 or s.isotropic is False:
        raise NotIsotropic(f"N-bar needs A independent of the fibers (|dA/dv| = {dep:.3g})")
    canon = CanonicalNLCGeometry(s, u[None, :], 3)
    cf, cc_ = CartanConnection(fixed), CartanConnection(canon)
    ef, ec = Electromagnetism(cf), Electromagnetism(cc_)
    diff = canon.N - fixed.N
    # the part of N-bar - N coming from the time dependence of g
    dgt = fixed.g.grad(np.arange(s.p)).value[0]
    time_term = 0.5 * np.einsum("im,mja->iaj", fixed.ginv.value[0], dgt)
    out = {
        "scenario": {"name": s.name, "digest": cfg.digest},
        "coordinates": coordinate_names(s.p, s.n),
        "point": u.tolist(),
        "N^(i)_(a)j": _lists(fixed.N),
        "Nbar^(i)_(a)j": _lists(canon.N),
        "Nbar - N": _lists(diff),
        "time_derivative_term": time_term.tolist(),
        "max_abs_difference": float(np.abs(diff.value).max()),
        "L^i_jk difference": _lists(cc_.L - cf.L),
        "D^(a)_(i)j difference": _lists(ec.deflection["D"] - ef.deflection["D"]),
        "F^(a)_(i)j difference": _lists(ec.F - ef.F),
    }
    return out


def _is_unit(h) -> bool:
    comp = h.components
    return len(comp) == 1 and comp[0][0].text in ("1", "1.0")


def run_classical(cfg: ScenarioConfig, sections: list[str] | None = None,
                  count: int = 20, seed: int | None = None) -> dict:
    """Single-time Synge medium: compare g and N with their classical forms."""
    s = cfg.scenario
    if s.p != 1 or not _is_unit(s.h) or s.refractive_index is None:
        raise NotClassical("the classical reduction needs p = 1, h = 1 and the synge refractive index")
    seed = cfg.seed if seed is None else seed
    u = sample_points(cfg, count, seed)
    geo = JetGeometry(s, u, 1)
    n = s.n
    y = u[:, 1 + n:]  # y^i = x^i_1
    phi, _ = s.phi.values(u)
    idx, _ = s.refractive_index.evaluate_many(u)
    y_low = np.einsum("bij,bj->bi", phi, y)
    classical = phi + (1 - 1 / idx**2)[:, None, None] * np.einsum("bi,bj->bij", y_low, y_low)
    g_err = np.abs(geo.g.value - classical).reshape(len(u), -1).max(axis=1)
    # N^i_j = gamma^i_jk y^k from an independent Christoffel evaluation
    n_err = np.zeros(len(u))
    for b in range(len(u)):
        gam = np.asarray(bg.christoffel(s.phi, JetPoint.from_flat(u[b], 1, n)))
        n_err[b] = np.abs(geo.N.value[b][:, 0, :] - np.einsum("ijk,k->ij", gam, y[b])).max()
    out = {
        "scenario": {"name": s.name, "digest": cfg.digest},
        "points": count,
        "seed": seed,
        "fundamental_tensor_max_error": float(g_err.max()),
        "nonlinear_connection_max_error": float(n_err.max()),
        "tolerance": CLASSICAL_TOL,
        "passed": bool(g_err.max() < CLASSICAL_TOL and n_err.max() < CLASSICAL_TOL),
    }
    if sections:
        out["sections"] = synge_restriction(s, sections, u)
    return out


def synge_restriction(s: Scenario, sections: list[str], u: np.ndarray) -> dict:
    """g_ij(x, V(x)) along a section y = V(x), next to the direct Synge formula."""
    n = s.n
    if len(sections) != n:
        raise NotClassical(f"a section needs {n} components, got {len(sections)}")
    V = [parse_expression(e, 1, n) for e in sections]
    on = u.copy()
    for i, f in enumerate(V):
        vals, bad = f.evaluate_many(u)
        if np.any(bad):
            raise NotClassical(f"section component {f.text} is undefined at a sampled point")
        on[:, 1 + n + i] = vals
    g = JetGeometry(s, on, 0).g.value
    phi, _ = s.phi.values(on)
    idx, _ = s.refractive_index.evaluate_many(on)
    Vl = np.einsum("bij,bj->bi", phi, on[:, 1 + n:])
    direct = phi + (1 - 1 / idx**2)[:, None, None] * np.einsum("bi,bj->bij", Vl, Vl)
    return {
        "components": [f.text for f in V],
        "x": on[:, 1:1 + n].tolist(),
        "g_ij": g.tolist(),
        "max_error_vs_formula": float(np.abs(g - direct).max()),
    }
