"""Residual evaluation over sampled points and the JSON geometry report.

Every named residual is a per-point max-abs discrepancy between two
independent evaluations of the same quantity (or a quantity that must vanish).
A residual with a tolerance is a check; one without is reported only.
"""

from __future__ import annotations

import json
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cartan_connection import CartanConnection
from .electromagnetism import Electromagnetism
from .errors import DimensionNotice, JetOpticsError
from .field_equations import FieldEquations
from .jet_geometry import JetGeometry, Scenario
from .scenario import ScenarioConfig, sample_points, scenario_from_document
from .tensor_core import coordinate_names

SCHEMA_VERSION = 1
CHUNK = 64


@dataclass(frozen=True)
class Check:
    anchor: str
    tolerance: float | None


MACHINE, DERIVED, ORACLE, BERWALD, MAXWELL = 1e-12, 1e-8, 1e-7, 1e-9, 1e-6

CHECKS: dict[str, Check] = {
    "inverse_identity": Check("closed-form rank-one inverse of the optical metric: g g^-1 = I", MACHINE),
    "metricity": Check("Cartan connection annihilates h, h^-1, g and h^{ab} g_ij in every direction", DERIVED),
    "berwald_metricity": Check("Berwald connection annihilates h and phi in every direction", BERWALD),
    "curvature_vs_oracle": Check("closed-form curvature blocks vs adapted-frame commutator", ORACLE),
    "torsion_vs_oracle": Check("closed-form torsion blocks vs adapted-frame commutator", ORACLE),
    "ricci_vs_oracle": Check("Ricci blocks vs trace of the commutator curvature", ORACLE),
    "scalar_decomposition": Check("H + R + S equals the full contraction G^{AB} R_AB", DERIVED),
    "einstein_E1_reconstruction": Check("reduced Einstein equations rebuilt from the shifted stress-energy", ORACLE),
    "E2_compatibility": Check("mixed temporal-spatial and temporal-vertical Ricci blocks", None),
    "conservation_1": Check("temporal conservation law of the stress-energy", None),
    "conservation_2": Check("spatial conservation law of the stress-energy", None),
    "conservation_3": Check("vertical conservation law of the stress-energy", None),
    "deflection_two_path": Check("deflection tensors: covariant derivative vs closed form", DERIVED),
    "em_two_path": Check("F and f: antisymmetrized deflection vs closed form", DERIVED),
    "maxwell_1": Check("Maxwell: temporal derivative of F", MAXWELL),
    "maxwell_2": Check("Maxwell: temporal derivative of f", MAXWELL),
    "maxwell_3": Check("Maxwell: cyclic spatial derivative of F", MAXWELL),
    "maxwell_4": Check("Maxwell: mixed cyclic derivative of F and f", MAXWELL),
    "maxwell_5": Check("Maxwell: cyclic vertical derivative of f", MAXWELL),
}

# printed-form variants kept for traceability; never asserted
DIAGNOSTICS = ("einstein_E1_literal", "p_block_relation", "em_closed_without_half",
               "maxwell_1_literal", "maxwell_2_literal", "maxwell_5_literal")

GROUPS = {"maxwell": [f"maxwell_{k}" for k in range(1, 6)],
          "conservation": [f"conservation_{k}" for k in range(1, 4)],
          "machine": [k for k, c in CHECKS.items() if c.tolerance == MACHINE],
          "derived": [k for k, c in CHECKS.items() if c.tolerance == DERIVED],
          "oracle": [k for k, c in CHECKS.items() if c.tolerance == ORACLE]}


def tolerances(overrides: dict | None = None) -> dict[str, float | None]:
    """Default tolerances updated by name or by group name."""
    tol = {k: c.tolerance for k, c in CHECKS.items()}
    for name, val in (overrides or {}).items():
        targets = GROUPS.get(name, [name])
        for t in targets:
            if t not in tol:
                raise KeyError(f"unknown residual {name!r}")
            tol[t] = float(val)
    return tol


def evaluate_residuals(s: Scenario, u: np.ndarray) -> dict[str, np.ndarray]:
    """All residuals (and diagnostics) at the points ``u``; NaN marks not applicable."""
    geo = JetGeometry(s, u, 3)
    cc = CartanConnection(geo)
    fe = FieldEquations(cc, s.K)
    em = Electromagnetism(cc)
    B, p, n = geo.batch, s.p, s.n
    nan = np.full(B, np.nan)
    gi = np.einsum("bij,bjk->bik", geo.g.value, geo.ginv.value) - np.eye(n)
    out = {
        "inverse_identity": np.abs(gi).reshape(B, -1).max(axis=1),
        "metricity": cc.metricity_residual(),
        "berwald_metricity": cc.berwald_metricity_residual(),
        "curvature_vs_oracle": cc.curvature_residual(),
        "torsion_vs_oracle": cc.torsion_residual(),
        "ricci_vs_oracle": fe.ricci_residual(),
        "scalar_decomposition": fe.scalar_residual(),
        "E2_compatibility": fe.e2_residual(),
        "deflection_two_path": em.deflection_residual(),
        "em_two_path": em.em_residual(),
        "p_block_relation": fe.displayed_p_relation(),
        "em_closed_without_half": em.em_residual(half=False),
    }
    if p > 2 and n > 2:
        out["einstein_E1_reconstruction"] = fe.e1_residual()
        out["einstein_E1_literal"] = fe.e1_residual(literal=True)
    else:
        out["einstein_E1_reconstruction"] = out["einstein_E1_literal"] = nan
    try:
        cons = fe.conservation_residuals()
    except DimensionNotice:
        cons = np.full((B, 3), np.nan)
    for k in range(3):
        out[f"conservation_{k + 1}"] = cons[:, k]
    mx, lit = em.maxwell_residuals(), em.maxwell_residuals(literal=True)
    for k in range(5):
        out[f"maxwell_{k + 1}"] = mx[:, k]
    for k in (1, 2, 5):
        out[f"maxwell_{k}_literal"] = lit[:, k - 1]
    return out


def _chunk_residuals(s: Scenario, u: np.ndarray):
    """Residuals for a chunk; points that raise are isolated and reported."""
    try:
        return evaluate_residuals(s, u), []
    except JetOpticsError:
        if len(u) == 1:
            raise
    parts, failed = [], []
    for k in range(len(u)):
        try:
            parts.append((k, evaluate_residuals(s, u[k:k + 1])))
        except JetOpticsError as exc:
            failed.append((k, f"{type(exc).__name__}: {exc}"))
    names = list(CHECKS) + list(DIAGNOSTICS)
    res = {nm: np.full(len(u), np.nan) for nm in names}
    for k, r in parts:
        for nm in names:
            res[nm][k] = r[nm][0]
    return res, failed


_WORKER_CACHE: dict = {}


def _worker(doc: dict, u: np.ndarray):
    key = json.dumps(doc, sort_keys=True)
    if key not in _WORKER_CACHE:
        _WORKER_CACHE[key] = scenario_from_document(doc).scenario
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _chunk_residuals(_WORKER_CACHE[key], u)


def thread_count() -> int:
    raw = os.environ.get("JETOPTICS_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        k = 0
    return max(1, os.cpu_count() or 1) if k <= 0 else k


def residual_table(cfg: ScenarioConfig, u: np.ndarray, workers: int | None = None):
    """Per-point residual arrays and the list of failed points for all of ``u``."""
    workers = thread_count() if workers is None else workers
    chunks = [(start, u[start:start + CHUNK]) for start in range(0, len(u), CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
            results = list(pool.map(_worker, [cfg.document] * len(chunks), [c for _, c in chunks]))
    else:
        results = [_chunk_residuals(cfg.scenario, c) for _, c in chunks]
    names = list(CHECKS) + list(DIAGNOSTICS)
    table = {nm: np.concatenate([r[nm] for r, _ in results]) for nm in names}
    failed = [(start + k, msg) for (start, _), (_, f) in zip(chunks, results) for k, msg in f]
    return table, failed


def _entry(values: np.ndarray, tol: float | None, anchor: str | None = None) -> dict:
    finite = values[np.isfinite(values)]
    entry: dict = {}
    if anchor is not None:
        entry["anchor"] = anchor
    if finite.size == 0:
        entry.update({"max": None, "tolerance": tol, "pass": None, "worst_point": None})
        return entry
    worst = int(np.nanargmax(values))
    mx = float(values[worst])
    entry.update({"max": mx, "tolerance": tol, "pass": None if tol is None else bool(mx < tol),
                  "worst_point": worst})
    return entry


@dataclass
class GeometryReport:
    document: dict
    exit_code: int
    timings: dict

    def to_json(self, timings: bool = False) -> str:
        doc = dict(self.document)
        if timings:
            doc["timings"] = self.timings
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _scenario_block(cfg: ScenarioConfig) -> dict:
    s = cfg.scenario
    return {"name": s.name, "digest": cfg.digest, "p": s.p, "n": s.n, "K": s.K,
            "isotropic": s.isotropic, "static": s.static}


def _summaries(table: dict, tol: dict) -> tuple[dict, dict, bool]:
    residuals = {nm: _entry(table[nm], tol[nm], CHECKS[nm].anchor) for nm in CHECKS}
    diagnostics = {nm: _entry(table[nm], None) for nm in DIAGNOSTICS}
    ok = all(r["pass"] is not False for r in residuals.values())
    return residuals, diagnostics, ok


def run_verify(cfg: ScenarioConfig, count: int = 50, seed: int | None = None,
               tol_overrides: dict | None = None, workers: int | None = None) -> GeometryReport:
    """Sample ``count`` points, evaluate every identity, compare with tolerances."""
    seed = cfg.seed if seed is None else seed
    tol = tolerances({**cfg.tolerances, **(tol_overrides or {})})
    t0 = time.perf_counter()
    u = sample_points(cfg, count, seed)
    t1 = time.perf_counter()
    table, failed = residual_table(cfg, u, workers)
    t2 = time.perf_counter()
    residuals, diagnostics, ok = _summaries(table, tol)
    ok = ok and not failed
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "scenario": _scenario_block(cfg),
        "seed": seed,
        "coordinates": coordinate_names(cfg.scenario.p, cfg.scenario.n),
        "points": u.tolist(),
        "residuals": residuals,
        "diagnostics": diagnostics,
        "failures": [{"point": k, "error": msg} for k, msg in failed],
        "passed": ok,
    }
    timings = {"sampling_s": t1 - t0, "evaluation_s": t2 - t1, "points": count}
    return GeometryReport(doc, 0 if ok else 1, timings)


def _nested(x) -> object:
    return np.asarray(x, dtype=float).tolist()


def tensor_blocks(s: Scenario, u: np.ndarray) -> dict:
    """Every tensor block at one point, keyed by symbol, as nested lists."""
    geo = JetGeometry(s, u[None, :], 3)
    cc = CartanConnection(geo)
    fe = FieldEquations(cc, s.K)
    em = Electromagnetism(cc)
    val = lambda j: _nested(j.value[0])
    out = {
        "metric": {"h_ab": val(geo.h), "phi_ij": val(geo.phi), "A_i": val(geo.A), "g_ij": val(geo.g),
                   "g^ij": val(geo.ginv), "A0": float(geo.A0.value[0]),
                   "G^(a)(b)_(i)(j)": val(geo.G_vert), "E": float(geo.energy.value[0]),
                   "x^(a)_(i)": val(geo.liouville)},
        "nonlinear_connection": {"M^(i)_(a)b": val(geo.M), "N^(i)_(a)j": val(geo.N)},
        "cartan": {"H^a_bc": val(geo.H), "G^i_ja": val(cc.G), "L^i_jk": val(cc.L),
                   "C^i(a)_j(k)": val(cc.C)},
        "torsion": {k: val(v) for k, v in cc.torsion_blocks.items()},
        "curvature": {k: val(v) for k, v in cc.curvature_blocks.items()},
        "ricci": {k: val(v) for k, v in fe.ricci.items()},
        "scalar": {k: float(v.value[0]) for k, v in fe.scalar_parts.items()},
        "stress_energy": {k: val(v) for k, v in fe.stress_energy.items()},
        "deflection": {"Dbar^(a)_(i)b": val(em.deflection["Dbar"]), "D^(a)_(i)j": val(em.deflection["D"]),
                       "d^(a)(b)_(i)(j)": val(em.deflection["d"])},
        "electromagnetic": {"F^(a)_(i)j": val(em.F), "f^(a)(b)_(i)(j)": val(em.f)},
    }
    return out


def parse_point(text: str, p: int, n: int) -> np.ndarray:
    """Parse "t=..;x=..;v=.." (comma separated values, v row-major as v[i][a])."""
    parts: dict[str, list[float]] = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        key, _, vals = chunk.partition("=")
        key = key.strip()
        if key not in ("t", "x", "v") or key in parts:
            raise ValueError(f"bad point component {chunk!r}")
        parts[key] = [float(x) for x in vals.replace(" ", "").split(",") if x]
    want = {"t": p, "x": n, "v": n * p}
    for key, k in want.items():
        got = parts.get(key, [0.0] * k if key == "v" else None)
        if got is None or len(got) != k:
            raise ValueError(f"point component {key} needs {k} values")
        parts[key] = got
    return np.array(parts["t"] + parts["x"] + parts["v"])


def run_report(cfg: ScenarioConfig, u: np.ndarray, tol_overrides: dict | None = None) -> GeometryReport:
    """Full report at a single point: tensor blocks plus every residual."""
    t0 = time.perf_counter()
    tol = tolerances({**cfg.tolerances, **(tol_overrides or {})})
    table, failed = _chunk_residuals(cfg.scenario, u[None, :])
    blocks = tensor_blocks(cfg.scenario, u)
    residuals, diagnostics, ok = _summaries(table, tol)
    ok = ok and not failed
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "report",
        "scenario": _scenario_block(cfg),
        "coordinates": coordinate_names(cfg.scenario.p, cfg.scenario.n),
        "points": [u.tolist()],
        "tensors": blocks,
        "residuals": residuals,
        "diagnostics": diagnostics,
        "failures": [{"point": k, "error": msg} for k, msg in failed],
        "passed": ok,
    }
    return GeometryReport(doc, 0 if ok else 1, {"total_s": time.perf_counter() - t0})


def summary_lines(report: GeometryReport) -> list[str]:
    """Human-readable residual table."""
    doc = report.document
    lines = [f"scenario {doc['scenario']['name'] or '(unnamed)'}  p={doc['scenario']['p']} "
             f"n={doc['scenario']['n']}  points={len(doc['points'])}"]
    for nm, r in doc["residuals"].items():
        mx = "n/a" if r["max"] is None else f"{r['max']:.3e}"
        tol = "report" if r["tolerance"] is None else f"< {r['tolerance']:.0e}"
        status = {True: "ok", False: "FAIL", None: "-"}[r["pass"]]
        lines.append(f"  {nm:28s} {mx:>10s}  {tol:>9s}  {status}")
    for f in doc["failures"]:
        lines.append(f"  point {f['point']}: {f['error']}")
    lines.append("PASS" if doc["passed"] else "FAIL")
    return lines


def print_summary(report: GeometryReport, stream=None) -> None:
    stream = sys.stderr if stream is None else stream
    for line in summary_lines(report):
        print(line, file=stream)
    for k, v in report.timings.items():
        print(f"  {k}: {v:.3f}" if isinstance(v, float) else f"  {k}: {v}", file=stream)
