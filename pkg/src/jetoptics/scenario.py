"""Scenario documents: JSON schema, loading, validation and point sampling.

A scenario file looks like::

    {
      "name": "anisotropic",
      "p": 2, "n": 3,
      "h": [["1", "0"], ["0", "1"]],
      "phi": [["1", "0", "0"], ...],
      "A": ["0.1*v11", "0", "0"],          # or "synge": "1.3 + 0.1*x1"
      "K": 1.0, "seed": 7,
      "tolerances": {"maxwell": 1e-6},
      "ranges": {"x1": [0.3, 2.8]}
    }

``synge`` replaces ``A`` by a refractive-index expression n(t, x, v) and builds
A_i = sqrt(1 - 1/n^2) phi_im x^m_1.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import expression as ex
from .base_geometry import MetricField, singular_mask
from .errors import SchemaError, ValidationError
from .jet_geometry import MEDIUM_EPS, Scenario
from .jets import Jet, jet_space
from .tensor_core import Axis, ScalarField, coordinate_names

FLAG_POINTS = 20
FLAG_TOL = 1e-12
SAMPLE_RANGE = (-1.0, 1.0)

_expr_matrix = {"type": "array", "minItems": 1,
                "items": {"type": "array", "minItems": 1, "items": {"type": ["string", "number"]}}}

SCHEMA = {
    "type": "object",
    "required": ["p", "n", "h", "phi"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "p": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "h": _expr_matrix,
        "phi": _expr_matrix,
        "A": {"type": "array", "items": {"type": ["string", "number"]}},
        "synge": {"type": ["string", "number"]},
        "K": {"type": "number", "not": {"const": 0}},
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
        "ranges": {"type": "object",
                   "additionalProperties": {"type": "array", "minItems": 2, "maxItems": 2,
                                            "items": {"type": "number"}}},
        "isotropic": {"type": "boolean"},
        "static": {"type": "boolean"},
    },
    "oneOf": [{"required": ["A"]}, {"required": ["synge"]}],
}


def parse_expression(text: str, p: int, n: int) -> ScalarField:
    """Parse an expression in t1..tp, x1..xn, v11..vnp into a field."""
    return ScalarField.parse(str(text), p, n)


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario plus the run settings stored next to it."""

    scenario: Scenario
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    ranges: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict, compare=False)

    @property
    def digest(self) -> str:
        canon = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _matrix(rows, dim: int, label: str, axis: Axis, p: int, n: int) -> MetricField:
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise SchemaError(f"{label} must be a {dim}x{dim} matrix")
    texts = [[ex.parse(str(e), p, n).text() for e in row] for row in rows]
    for a in range(dim):
        for b in range(a + 1, dim):
            if texts[a][b] != texts[b][a]:
                warnings.warn(f"{label}[{a}][{b}] and {label}[{b}][{a}] differ; using their mean",
                              stacklevel=3)
                texts[a][b] = texts[b][a] = f"(({texts[a][b]}) + ({texts[b][a]}))/2"
    return MetricField.from_strings(texts, axis, p, n)


def synge_components(index: str, phi_rows, p: int, n: int) -> list[str]:
    """A_i = sqrt(1 - 1/n^2) phi_im x^m_1 as expression text."""
    k = f"sqrt(1 - 1/({index})^2)"
    out = []
    for i in range(n):
        terms = [f"({phi_rows[i][m]})*v{m + 1}1" for m in range(n)]
        out.append(f"{k}*({' + '.join(terms)})")
    return out


def scenario_from_document(doc: dict) -> ScenarioConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "document"
        raise SchemaError(f"{where}: {exc.message}") from None
    p, n = doc["p"], doc["n"]
    h = _matrix(doc["h"], p, "h", Axis.TEMPORAL, p, n)
    phi = _matrix(doc["phi"], n, "phi", Axis.SPATIAL, p, n)
    index = None
    if "synge" in doc:
        index = parse_expression(doc["synge"], p, n)
        rows = [[phi.components[i][j].text for j in range(n)] for i in range(n)]
        a_text = synge_components(index.text, rows, p, n)
    else:
        if len(doc["A"]) != n:
            raise SchemaError(f"A needs {n} components, got {len(doc['A'])}")
        a_text = doc["A"]
    A = tuple(parse_expression(e, p, n) for e in a_text)
    names = set(coordinate_names(p, n))
    ranges = {}
    for name, (lo, hi) in doc.get("ranges", {}).items():
        if name not in names:
            raise SchemaError(f"ranges: unknown coordinate {name!r}")
        if not lo < hi:
            raise SchemaError(f"ranges: empty interval for {name}")
        ranges[name] = (float(lo), float(hi))
    s = Scenario(p, n, h, phi, A, name=doc.get("name", ""), K=float(doc.get("K", 1.0)),
                 refractive_index=index)
    cfg = ScenarioConfig(s, int(doc.get("seed", 0)), dict(doc.get("tolerances", {})), ranges, doc)
    return _with_flags(cfg, doc)


def _with_flags(cfg: ScenarioConfig, doc: dict) -> ScenarioConfig:
    s = cfg.scenario
    u = sample_points(cfg, FLAG_POINTS, cfg.seed)
    if s.refractive_index is not None:
        vals, bad = s.refractive_index.evaluate_many(u)
        if np.any(bad) or np.any(vals < 1.0):
            raise ValidationError("synge refractive index must be >= 1 at the sampled points")
    fiber, temporal = flag_partials(s, u)
    iso, static = bool(fiber < FLAG_TOL), bool(temporal < FLAG_TOL)
    for key, found in (("isotropic", iso), ("static", static)):
        if key in doc and doc[key] and not found:
            raise ValidationError(f"scenario declares {key} but sampled partials of A do not vanish")
    return replace(cfg, scenario=s.with_flags(isotropic=iso, static=static))


def flag_partials(s: Scenario, u: np.ndarray) -> tuple[float, float]:
    """Max |dA/dv| and max |dA/dt| over the points ``u``."""
    p, n = s.p, s.n
    space = jet_space(s.nvars, 1)
    V = Jet.variables(space, u, 1)
    memo: dict = {}
    fiber = temporal = 0.0
    for a in s.A:
        g = a.jet(V, memo).grad().value
        fiber = max(fiber, float(np.abs(g[:, p + n:]).max(initial=0.0)))
        temporal = max(temporal, float(np.abs(g[:, :p]).max(initial=0.0)))
    return fiber, temporal


def admissible(s: Scenario, u: np.ndarray) -> np.ndarray:
    """Mask of points where every field is defined, h and phi are nonsingular and 1 + A0 > eps."""
    hv, bad_h = s.h.values(u)
    pv, bad_p = s.phi.values(u)
    ok = ~(bad_h | bad_p)
    A = np.zeros((len(u), s.n))
    for i, a in enumerate(s.A):
        A[:, i], bad = a.evaluate_many(u)
        ok &= ~bad
    fin = np.isfinite(hv).all(axis=(1, 2)) & np.isfinite(pv).all(axis=(1, 2)) & np.isfinite(A).all(axis=1)
    ok &= fin
    hv[~ok], pv[~ok] = np.eye(s.p), np.eye(s.n)
    A[~ok] = 0.0
    ok &= ~singular_mask(hv) & ~singular_mask(pv)
    pv[~ok] = np.eye(s.n)
    a0 = np.einsum("bi,bi->b", A, np.linalg.solve(pv, A[..., None])[..., 0])
    return ok & (1.0 + a0 > MEDIUM_EPS)


def sample_points(cfg: ScenarioConfig, count: int, seed: int, max_rounds: int = 50) -> np.ndarray:
    """``count`` admissible points drawn uniformly (per-coordinate ranges honoured)."""
    s = cfg.scenario
    names = coordinate_names(s.p, s.n)
    lo = np.array([cfg.ranges.get(nm, SAMPLE_RANGE)[0] for nm in names])
    hi = np.array([cfg.ranges.get(nm, SAMPLE_RANGE)[1] for nm in names])
    rng = np.random.default_rng(seed)
    kept = []
    have = 0
    for _ in range(max_rounds):
        if have >= count:
            break
        u = lo + (hi - lo) * rng.random((max(2 * (count - have), 8), len(names)))
        u = u[admissible(s, u)]
        kept.append(u)
        have += len(u)
    if have < count:
        raise ValidationError(f"could only sample {have} of {count} admissible points")
    return np.concatenate(kept)[:count]


def load_config(path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SchemaError(f"no such scenario file: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("scenario must be a JSON object")
    return scenario_from_document(doc)


def load_scenario(path) -> Scenario:
    return load_config(path).scenario


def catalog_names() -> list[str]:
    root = resources.files("jetoptics") / "catalog"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def catalog_path(name: str) -> Path:
    name = name[:-5] if name.endswith(".json") else name
    path = Path(str(resources.files("jetoptics") / "catalog" / f"{name}.json"))
    if not path.exists():
        raise SchemaError(f"no catalog scenario named {name!r}")
    return path


def load_catalog(name: str) -> ScenarioConfig:
    return load_config(catalog_path(name))


def resolve(path_or_name: str) -> ScenarioConfig:
    """A file path, or the name of a bundled catalog scenario."""
    p = Path(path_or_name)
    if p.exists():
        return load_config(p)
    return load_catalog(path_or_name)


__all__ = ["SCHEMA", "ScenarioConfig", "admissible", "catalog_names", "catalog_path",
           "load_catalog", "load_config", "load_scenario", "parse_expression", "resolve",
           "sample_points", "scenario_from_document"]
