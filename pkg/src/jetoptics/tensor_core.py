"""Typed tensors, jet points and expression-backed scalar fields."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations_with_replacement, product

import numpy as np

from . import expression as ex
from .errors import DomainError, OrderError, ShapeError
from .jets import MAX_ORDER, Jet, jet_space


class Axis(enum.Enum):
    TEMPORAL = "temporal"
    SPATIAL = "spatial"


class Variance(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class IndexKind:
    axis: Axis
    variance: Variance

    _CODES = {"T": (Axis.TEMPORAL, Variance.UPPER), "t": (Axis.TEMPORAL, Variance.LOWER),
              "S": (Axis.SPATIAL, Variance.UPPER), "s": (Axis.SPATIAL, Variance.LOWER)}

    @classmethod
    def parse(cls, codes: str) -> tuple["IndexKind", ...]:
        """'T'/'t' temporal upper/lower, 'S'/'s' spatial upper/lower."""
        try:
            return tuple(cls(*cls._CODES[ch]) for ch in codes)
        except KeyError as exc:
            raise ShapeError(f"unknown index code in {codes!r}") from exc

    @property
    def code(self) -> str:
        ch = "t" if self.axis is Axis.TEMPORAL else "s"
        return ch.upper() if self.variance is Variance.UPPER else ch

    def extent(self, p: int, n: int) -> int:
        return p if self.axis is Axis.TEMPORAL else n


@dataclass(frozen=True)
class JetPoint:
    """A point (t^a, x^i, x^i_a) of the jet space; ``v[i][a]`` is x^i_a."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray

    def __init__(self, t, x, v):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = np.asarray(v, dtype=float).reshape(x.size, t.size)
        if t.size < 1 or x.size < 1:
            raise ShapeError("p and n must be at least 1")
        for arr in (t, x, v):
            if not np.all(np.isfinite(arr)):
                raise DomainError("jet point coordinates must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def p(self) -> int:
        return self.t.size

    @property
    def n(self) -> int:
        return self.x.size

    def flat(self) -> np.ndarray:
        """Coordinates in jet-variable order (t, x, v row-major)."""
        return np.concatenate([self.t, self.x, self.v.ravel()])

    @classmethod
    def from_flat(cls, u, p: int, n: int) -> "JetPoint":
        u = np.asarray(u, dtype=float)
        return cls(u[:p], u[p:p + n], u[p + n:].reshape(n, p))

    def __eq__(self, other) -> bool:
        return isinstance(other, JetPoint) and np.array_equal(self.flat(), other.flat()) and \
            (self.p, self.n) == (other.p, other.n)

    def __hash__(self) -> int:
        return hash((self.p, self.n, self.flat().tobytes()))


@dataclass(frozen=True)
class DTensor:
    """Dense component array with typed indices (row-major over ``kinds``)."""

    kinds: tuple[IndexKind, ...]
    data: np.ndarray

    def __init__(self, kinds, data):
        if isinstance(kinds, str):
            kinds = IndexKind.parse(kinds)
        data = np.array(data, dtype=float)
        if data.ndim != len(kinds):
            raise ShapeError(f"{len(kinds)} index kinds for an array of rank {data.ndim}")
        data.setflags(write=False)
        object.__setattr__(self, "kinds", tuple(kinds))
        object.__setattr__(self, "data", data)

    @property
    def codes(self) -> str:
        return "".join(k.code for k in self.kinds)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    def __repr__(self) -> str:
        return f"DTensor({self.codes!r}, shape={self.shape})"


def contract(a: DTensor, slot_a: int, b: DTensor, slot_b: int) -> DTensor:
    """Contract one upper and one lower index of the same axis."""
    ka, kb = a.kinds[slot_a], b.kinds[slot_b]
    if ka.axis is not kb.axis or ka.variance is kb.variance:
        raise ShapeError(f"cannot contract {ka.code!r} with {kb.code!r}")
    if a.shape[slot_a] != b.shape[slot_b]:
        raise ShapeError("contracted index ranges differ")
    data = np.tensordot(a.data, b.data, axes=(slot_a, slot_b))
    kinds = a.kinds[:slot_a] + a.kinds[slot_a + 1:] + b.kinds[:slot_b] + b.kinds[slot_b + 1:]
    return DTensor(kinds, data)


@dataclass(frozen=True)
class ScalarField:
    """A function on the jet space given by a closed-form expression."""

    expr: ex.Node
    p: int
    n: int

    @classmethod
    def parse(cls, text: str, p: int, n: int) -> "ScalarField":
        return cls(ex.parse(text, p, n), p, n)

    @property
    def nvars(self) -> int:
        return self.p + self.n + self.n * self.p

    @property
    def text(self) -> str:
        return self.expr.text()

    def __str__(self) -> str:
        return self.text

    def variables(self) -> set[int]:
        return ex.variables(self.expr)

    def evaluate_many(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values on points ``u`` (B, N) and a mask of points outside the domain."""
        return ex.evaluate(self.expr, u)

    def jet(self, variables_jet: Jet, memo: dict | None = None) -> Jet:
        return ex.jet(self.expr, variables_jet, memo)

    def _check(self, point: JetPoint) -> np.ndarray:
        if (point.p, point.n) != (self.p, self.n):
            raise ShapeError(f"point has (p, n) = {(point.p, point.n)}, field expects {(self.p, self.n)}")
        return point.flat()


def evaluate(field: ScalarField, point: JetPoint) -> float:
    u = field._check(point)
    values, bad = field.evaluate_many(u[None, :])
    if bad[0]:
        raise DomainError(f"{field.text} is undefined at this point")
    return float(values[0])


def coordinate_names(p: int, n: int) -> list[str]:
    names = [f"t{a + 1}" for a in range(p)] + [f"x{i + 1}" for i in range(n)]
    names += [f"v{i + 1}{a + 1}" for i in range(n) for a in range(p)]
    return names


@dataclass(frozen=True)
class DerivativeRequest:
    target: ScalarField
    point: JetPoint
    multi_index: tuple[str, ...]

    def __init__(self, target, point, multi_index):
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "multi_index", tuple(multi_index))


def partial(req: DerivativeRequest) -> float:
    """Exact partial derivative of order <= 3 by Taylor-mode propagation."""
    field = req.target
    u = field._check(req.point)
    order = len(req.multi_index)
    if order > MAX_ORDER:
        raise OrderError(f"derivative order {order} exceeds {MAX_ORDER}")
    idx = [ex.variable_index(name, field.p, field.n) for name in req.multi_index]
    if order == 0:
        return evaluate(field, req.point)
    if not set(idx) <= field.variables():
        evaluate(field, req.point)  # still report domain errors
        return 0.0
    # seed only the variables that are differentiated
    active = sorted(set(idx))
    local = {v: k for k, v in enumerate(active)}
    space = jet_space(len(active), order)
    V = _seeded_variables(space, u, active, order)
    f = field.jet(V)
    return float(f.partial([local[i] for i in idx])[0])


def _seeded_variables(space, u: np.ndarray, active, order) -> Jet:
    u = np.atleast_2d(u)
    c = np.zeros(u.shape + (space.size(order),))
    c[..., 0] = u
    for k, var in enumerate(active):
        c[:, var, 1 + k] = 1.0
    return Jet(c, order, space)


def all_partials(field: ScalarField, u: np.ndarray, order: int) -> tuple[list, np.ndarray]:
    """Every partial of exactly ``order`` at points ``u``: (multi-indices, (B, K) values)."""
    N = field.nvars
    space = jet_space(N, order)
    f = field.jet(Jet.variables(space, np.atleast_2d(u), order))
    multis = list(combinations_with_replacement(range(N), order))
    values = np.stack([f.partial(m) for m in multis], axis=-1) if multis else np.zeros((len(u), 0))
    return multis, values


_DEFAULT_STEP = {1: 1e-3, 2: 1e-3, 3: 5e-3}


def finite_difference(field: ScalarField, u: np.ndarray, multis, step: float) -> np.ndarray:
    """Nested central differences with one Richardson step; shape (B, len(multis))."""
    u = np.atleast_2d(np.asarray(u, dtype=float))

    order = len(multis[0]) if multis else 0
    signs = np.array(list(product((1.0, -1.0), repeat=order)))  # (S, order)
    weights = np.prod(signs, axis=1)
    shifts = np.zeros((len(multis), len(signs), u.shape[1]))
    for k, multi in enumerate(multis):
        for slot, var in enumerate(multi):
            shifts[k, :, var] += signs[:, slot]

    def stencil(h):
        pts = (u[:, None, None, :] + h * shifts[None]).reshape(-1, u.shape[1])
        vals, bad = field.evaluate_many(pts)
        if np.any(bad):
            raise DomainError("finite-difference stencil leaves the domain")
        vals = vals.reshape(u.shape[0], len(multis), len(signs))
        return vals @ weights / (2 * h) ** order

    if not multis:
        return np.zeros((u.shape[0], 0))
    coarse, fine = stencil(step), stencil(step / 2)
    return (4 * fine - coarse) / 3


def fd_crosscheck(field: ScalarField, point, order: int, step: float | None = None) -> float:
    """Max |partial - finite difference| over all multi-indices of ``order``.

    ``point`` may be a JetPoint or an array of flat points (B, N).
    """
    if not 1 <= order <= MAX_ORDER:
        raise OrderError(f"order must be in 1..{MAX_ORDER}")
    u = field._check(point)[None, :] if isinstance(point, JetPoint) else np.atleast_2d(point)
    multis, exact = all_partials(field, u, order)
    approx = finite_difference(field, u, multis, step or _DEFAULT_STEP[order])
    return float(np.max(np.abs(exact - approx))) if exact.size else 0.0
