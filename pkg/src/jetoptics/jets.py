"""Truncated multivariate Taylor arithmetic with tensor-valued coefficients.

A :class:`Jet` holds the Taylor coefficients of a batch of tensor-valued
functions about a batch of base points.  The coefficient array has shape
``(B, *tensor_shape, M)``: the first axis indexes the base points, the last
axis the monomials of total degree <= ``order`` in graded order, so that
truncation is a prefix slice.  Coefficients are Taylor coefficients, i.e. the
partial derivative of multi-index ``e`` equals ``e! * c[e]``.

Arithmetic with plain numbers or numpy arrays broadcasts numpy style against
``(B, *tensor_shape)``; such operands are treated as constants.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from . import kernels
from .errors import DomainError, OrderError, ShapeError, SingularMetric

MAX_ORDER = 3


class JetSpace:
    """Monomial tables for ``nvars`` variables up to total degree ``order``."""

    def __init__(self, nvars: int, order: int):
        if not 0 <= order <= MAX_ORDER:
            raise OrderError(f"jet order {order} outside 0..{MAX_ORDER}")
        self.nvars = nvars
        self.order = order
        monos: list[tuple[int, ...]] = []
        offsets = [0]
        for d in range(order + 1):
            monos.extend(combinations_with_replacement(range(nvars), d))
            offsets.append(len(monos))
        self.monomials = monos
        self.offsets = offsets
        self.index = {m: i for i, m in enumerate(monos)}
        self._pairs: dict[int, tuple] = {}
        self._deriv: dict[int, tuple] = {}

    def size(self, k: int) -> int:
        """Number of monomials of degree <= k."""
        return self.offsets[k + 1]

    def pairs(self, k: int):
        """Product table for order ``k``, sorted by target monomial."""
        if k not in self._pairs:
            pa, pb, pc = [], [], []
            for a in range(self.size(k)):
                ma = self.monomials[a]
                for b in range(self.size(k - len(ma))):
                    pa.append(a)
                    pb.append(b)
                    pc.append(self.index[tuple(sorted(ma + self.monomials[b]))])
            pa, pb, pc = (np.asarray(x, dtype=np.intp) for x in (pa, pb, pc))
            perm = np.argsort(pc, kind="stable")
            pa, pb, pc = pa[perm], pb[perm], pc[perm]
            starts = np.searchsorted(pc, np.arange(self.size(k))).astype(np.intp)
            self._pairs[k] = (pa, pb, pc, starts)
        return self._pairs[k]

    def deriv_table(self, k: int):
        """Index and factor arrays mapping order-k coefficients to d/du_j at order k-1."""
        if k not in self._deriv:
            m = self.size(k - 1)
            src = np.zeros((self.nvars, m), dtype=np.intp)
            fac = np.zeros((self.nvars, m))
            for j in range(self.nvars):
                for t in range(m):
                    mono = tuple(sorted(self.monomials[t] + (j,)))
                    src[j, t] = self.index[mono]
                    fac[j, t] = mono.count(j)
            self._deriv[k] = (src, fac)
        return self._deriv[k]

    def coefficient(self, variables) -> tuple[int, float]:
        """Monomial index and the factorial turning its coefficient into a partial."""
        mono = tuple(sorted(variables))
        if len(mono) > self.order:
            raise OrderError(f"derivative of order {len(mono)} exceeds jet order {self.order}")
        fact = 1.0
        for j in set(mono):
            fact *= math.factorial(mono.count(j))
        return self.index[mono], fact


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


def _bmm(x: np.ndarray, y: np.ndarray, space: JetSpace, k: int) -> np.ndarray:
    m = space.size(k)
    x = np.ascontiguousarray(x[..., :m], dtype=float)
    y = np.ascontiguousarray(y[..., :m], dtype=float)
    pa, pb, pc, starts = space.pairs(k)
    return kernels.jet_bmm(x, y, pa, pb, pc, starts, m)


class Jet:
    """Batch of truncated Taylor expansions of a tensor-valued function."""

    __slots__ = ("c", "order", "space")
    __array_ufunc__ = None

    def __init__(self, c: np.ndarray, order: int, space: JetSpace):
        self.c = c
        self.order = order
        self.space = space

    # construction
    @classmethod
    def constant(cls, space: JetSpace, value, order: int | None = None) -> "Jet":
        order = space.order if order is None else order
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (space.size(order),))
        c[..., 0] = value
        return cls(c, order, space)

    @classmethod
    def zeros(cls, space: JetSpace, shape, order: int | None = None) -> "Jet":
        order = space.order if order is None else order
        return cls(np.zeros(tuple(shape) + (space.size(order),)), order, space)

    @classmethod
    def variables(cls, space: JetSpace, u: np.ndarray, order: int | None = None) -> "Jet":
        """Coordinate jets u_j + du_j for base points ``u`` of shape (B, nvars)."""
        order = space.order if order is None else order
        u = np.asarray(u, dtype=float)
        c = np.zeros(u.shape + (space.size(order),))
        c[..., 0] = u
        if order >= 1:
            j = np.arange(space.nvars)
            c[:, j, 1 + j] = 1.0
        return cls(c, order, space)

    # structure
    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[1:-1]

    @property
    def batch(self) -> int:
        return self.c.shape[0]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 2

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def __repr__(self) -> str:
        return f"Jet(batch={self.batch}, shape={self.shape}, order={self.order})"

    def truncate(self, k: int) -> "Jet":
        if k >= self.order:
            return self
        if k < 0:
            raise OrderError("cannot truncate below order 0")
        return Jet(self.c[..., : self.space.size(k)], k, self.space)

    def nilpotent(self) -> "Jet":
        c = self.c.copy()
        c[..., 0] = 0.0
        return Jet(c, self.order, self.space)

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            raise ShapeError("ellipsis indexing is not supported on jets")
        return Jet(self.c[(slice(None),) + key], self.order, self.space)

    def transpose(self, *axes) -> "Jet":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        perm = (0,) + tuple(a + 1 for a in axes) + (self.c.ndim - 1,)
        return Jet(self.c.transpose(perm), self.order, self.space)

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet(self.c.reshape((self.batch,) + shape + (self.c.shape[-1],)), self.order, self.space)

    def sum(self, axis) -> "Jet":
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        return Jet(self.c.sum(axis=tuple(a + 1 for a in axes)), self.order, self.space)

    # derivatives
    def d(self, var: int) -> "Jet":
        """Partial derivative with respect to variable ``var`` (order drops by one)."""
        if self.order == 0:
            raise OrderError("cannot differentiate an order-0 jet")
        src, fac = self.space.deriv_table(self.order)
        return Jet(self.c[..., src[var]] * fac[var], self.order - 1, self.space)

    def _grad(self, variables) -> "Jet":
        if self.order == 0:
            raise OrderError("cannot differentiate an order-0 jet")
        src, fac = self.space.deriv_table(self.order)
        src, fac = src[variables], fac[variables]
        return Jet(self.c[..., src] * fac, self.order - 1, self.space)

    def grad(self, variables=None) -> "Jet":
        """Gradient appended as a trailing tensor axis."""
        if variables is None:
            variables = np.arange(self.space.nvars)
        return self._grad(np.asarray(variables, dtype=np.intp))

    def partial(self, variables) -> np.ndarray:
        """Numeric partial derivative for a multiset of variable indices."""
        idx, fact = self.space.coefficient(variables)
        if len(tuple(variables)) > self.order:
            raise OrderError("derivative order exceeds jet order")
        return self.c[..., idx] * fact

    # arithmetic
    def _align(self, other: "Jet") -> tuple["Jet", "Jet"]:
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.c + b.c, a.order, a.space)
        other = np.asarray(other, dtype=float)
        full = np.broadcast_shapes(self.c.shape[:-1], other.shape)
        c = np.array(np.broadcast_to(self.c, full + self.c.shape[-1:]))
        c[..., 0] += other
        return Jet(c, self.order, self.space)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.order, self.space)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return _elementwise(self, other)
        other = np.asarray(other, dtype=float)
        return Jet(self.c * other[..., None], self.order, self.space)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, e):
        if isinstance(e, Jet):
            return exp(e * log(self))
        e = float(e)
        if e.is_integer():
            return _ipow(self, int(e))
        return _fpow(self, e)

    def __rpow__(self, base):
        base = np.asarray(base, dtype=float)
        if np.any(base <= 0):
            raise DomainError("non-positive base raised to a jet power")
        return exp(self * np.log(base))

    def compose(self, coeffs) -> "Jet":
        """Evaluate sum_k coeffs[k] * (self - value)^k (coefficients per entry)."""
        k = self.order
        if k == 0:
            return Jet(np.asarray(coeffs[0], dtype=float)[..., None], 0, self.space)
        xt = self.nilpotent()
        acc = xt * coeffs[k]
        for j in range(k - 1, 0, -1):
            acc = (acc + coeffs[j]) * xt
        return acc + coeffs[0]

    def reciprocal(self) -> "Jet":
        v = self.value
        bad = v == 0
        if np.any(bad):
            raise DomainError("division by zero", _batch_mask(bad))
        r = 1.0 / v
        return self.compose([(-1) ** k * r ** (k + 1) for k in range(self.order + 1)])


def _batch_mask(bad: np.ndarray) -> np.ndarray:
    return bad.reshape(bad.shape[0], -1).any(axis=1)


def _elementwise(a: Jet, b: Jet) -> Jet:
    a, b = a._align(b)
    full = np.broadcast_shapes(a.c.shape[:-1], b.c.shape[:-1])
    m = a.c.shape[-1]
    xa = np.broadcast_to(a.c, full + (m,)).reshape(-1, 1, 1, m)
    xb = np.broadcast_to(b.c, full + (m,)).reshape(-1, 1, 1, m)
    z = _bmm(xa, xb, a.space, a.order)
    return Jet(z.reshape(full + (m,)), a.order, a.space)


def _ipow(x: Jet, e: int) -> Jet:
    if e < 0:
        return _ipow(x.reciprocal(), -e)
    result = None
    base = x
    while e:
        if e & 1:
            result = base if result is None else result * base
        e >>= 1
        if e:
            base = base * base
    if result is None:
        return Jet.constant(x.space, np.ones(x.c.shape[:-1]), x.order)
    return result


def _fpow(x: Jet, e: float) -> Jet:
    v = x.value
    bad = v < 0 if x.order == 0 else v <= 0
    if np.any(bad):
        raise DomainError("non-integer power of a non-positive base", _batch_mask(bad))
    coeffs = []
    binom = 1.0
    for k in range(x.order + 1):
        coeffs.append(binom * v ** (e - k))
        binom *= (e - k) / (k + 1)
    return x.compose(coeffs)


# elementary functions -------------------------------------------------------

def exp(x: Jet) -> Jet:
    e = np.exp(x.value)
    return x.compose([e / math.factorial(k) for k in range(x.order + 1)])


def log(x: Jet) -> Jet:
    v = x.value
    bad = v <= 0
    if np.any(bad):
        raise DomainError("log of a non-positive number", _batch_mask(bad))
    coeffs = [np.log(v)] + [(-1) ** (k + 1) / (k * v**k) for k in range(1, x.order + 1)]
    return x.compose(coeffs)


def sqrt(x: Jet) -> Jet:
    v = x.value
    if np.any(v < 0):
        raise DomainError("sqrt of a negative number", _batch_mask(v < 0))
    zero = v == 0
    if x.order > 0 and np.any(zero):
        # exact zero is fine only where the whole expansion vanishes
        if np.any(x.c[zero][:, 1:] != 0):
            raise DomainError("sqrt is not differentiable at zero", _batch_mask(zero))
        out = _fpow(Jet(np.where(zero[..., None], 1.0, x.c), x.order, x.space), 0.5)
        out.c[zero] = 0.0
        return out
    if x.order == 0:
        return Jet(np.sqrt(v)[..., None], 0, x.space)
    return _fpow(x, 0.5)


def sin(x: Jet) -> Jet:
    s, c = np.sin(x.value), np.cos(x.value)
    return x.compose([s, c, -s / 2, -c / 6][: x.order + 1])


def cos(x: Jet) -> Jet:
    s, c = np.sin(x.value), np.cos(x.value)
    return x.compose([c, -s, -c / 2, s / 6][: x.order + 1])


def tan(x: Jet) -> Jet:
    c = np.cos(x.value)
    if np.any(c == 0):
        raise DomainError("tan at a pole", _batch_mask(c == 0))
    t = np.tan(x.value)
    s = 1 + t * t
    return x.compose([t, s, t * s, s * (1 + 3 * t * t) / 3][: x.order + 1])


def sinh(x: Jet) -> Jet:
    s, c = np.sinh(x.value), np.cosh(x.value)
    return x.compose([s, c, s / 2, c / 6][: x.order + 1])


def cosh(x: Jet) -> Jet:
    s, c = np.sinh(x.value), np.cosh(x.value)
    return x.compose([c, s, c / 2, s / 6][: x.order + 1])


# tensor operations ----------------------------------------------------------

def stack(jets, axis: int = 0) -> Jet:
    k = min(j.order for j in jets)
    arrays = [j.truncate(k).c for j in jets]
    batch = max(a.shape[0] for a in arrays)
    arrays = [np.broadcast_to(a, (batch,) + a.shape[1:]) for a in arrays]
    ax = axis + 1 if axis >= 0 else axis - 1
    return Jet(np.stack(arrays, axis=ax), k, jets[0].space)


def matmul(a: Jet, b: Jet) -> Jet:
    """Matrix product over the last two tensor axes (leading axes must agree)."""
    a, b = a._align(b)
    if a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape}")
    batch = max(a.batch, b.batch)
    lead = a.shape[:-2]
    m = a.c.shape[-1]
    xa = np.broadcast_to(a.c, (batch,) + a.c.shape[1:]).reshape((-1,) + a.shape[-2:] + (m,))
    xb = np.broadcast_to(b.c, (batch,) + b.c.shape[1:]).reshape((-1,) + b.shape[-2:] + (m,))
    z = _bmm(xa, xb, a.space, a.order)
    return Jet(z.reshape((batch,) + lead + (a.shape[-2], b.shape[-1], m)), a.order, a.space)


def inv(x: Jet) -> Jet:
    """Inverse of a jet-valued square matrix (last two tensor axes)."""
    v = x.value
    try:
        y0 = np.linalg.inv(v)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric("singular matrix in jet inverse") from exc
    base = Jet.constant(x.space, y0, x.order)
    if x.order == 0:
        return base
    e = x.nilpotent().c
    ye = Jet(np.einsum("...ij,...jkm->...ikm", y0, e), x.order, x.space)
    s = base
    for _ in range(x.order):
        s = base - matmul(ye, s)
    return s


def jeinsum(subscripts: str, *operands) -> Jet:
    """Einstein summation over tensor axes of jets and constant arrays.

    Letters refer to tensor axes only; the batch and coefficient axes are
    implicit.  Non-jet operands are constants without a batch axis.  The
    letters ``Y`` and ``Z`` are reserved.
    """
    inputs, output = subscripts.replace(" ", "").split("->")
    specs = inputs.split(",")
    if len(specs) != len(operands):
        raise ShapeError("subscripts do not match the number of operands")
    for spec, op in zip(specs, operands):
        if len(set(spec)) != len(spec):
            raise ShapeError(f"repeated index within one operand: {spec!r}")
        ndim = op.ndim if isinstance(op, Jet) else np.ndim(op)
        if ndim != len(spec):
            raise ShapeError(f"operand with {ndim} axes given subscripts {spec!r}")
    jet_pos = [i for i, op in enumerate(operands) if isinstance(op, Jet)]
    if not jet_pos:
        raise ShapeError("jeinsum needs at least one jet operand")
    first = jet_pos[0]
    cur, cur_l = operands[first], specs[first]
    rest = [i for i in range(len(operands)) if i != first]
    for pos, i in enumerate(rest):
        later = set(output).union(*(specs[j] for j in rest[pos + 1:]))
        op, spec = operands[i], specs[i]
        keep = "".join(ch for ch in dict.fromkeys(cur_l + spec) if ch in later)
        if isinstance(op, Jet):
            cur, cur_l = _pair(cur, cur_l, op, spec, keep)
        else:
            c = np.einsum(f"Z{cur_l}Y,{spec}->Z{keep}Y", cur.c, np.asarray(op, dtype=float))
            cur, cur_l = Jet(c, cur.order, cur.space), keep
    extra = [cur_l.index(ch) for ch in cur_l if ch not in output]
    if extra:
        cur = cur.sum(tuple(extra))
        cur_l = "".join(ch for ch in cur_l if ch in output)
    if sorted(cur_l) != sorted(output):
        raise ShapeError(f"output subscripts {output!r} not produced by inputs")
    return cur.transpose(tuple(cur_l.index(ch) for ch in output))


def _pair(x: Jet, xl: str, y: Jet, yl: str, keep: str) -> tuple[Jet, str]:
    xs = tuple(xl.index(ch) for ch in xl if ch not in yl and ch not in keep)
    if xs:
        x = x.sum(xs)
        xl = "".join(ch for ch in xl if ch in yl or ch in keep)
    ys = tuple(yl.index(ch) for ch in yl if ch not in xl and ch not in keep)
    if ys:
        y = y.sum(ys)
        yl = "".join(ch for ch in yl if ch in xl or ch in keep)
    k = min(x.order, y.order)
    m = x.space.size(k)
    sizes = dict(zip(xl, x.shape))
    for ch, n in zip(yl, y.shape):
        if sizes.setdefault(ch, n) != n:
            raise ShapeError(f"index {ch!r} has sizes {sizes[ch]} and {n}")
    batch = [ch for ch in xl if ch in yl and ch in keep]
    contr = [ch for ch in xl if ch in yl and ch not in keep]
    xf = [ch for ch in xl if ch not in yl]
    yf = [ch for ch in yl if ch not in xl]
    last_x, last_y = x.c.ndim - 1, y.c.ndim - 1
    xc = x.c[..., :m].transpose([0] + [1 + xl.index(ch) for ch in batch + xf + contr] + [last_x])
    yc = y.c[..., :m].transpose([0] + [1 + yl.index(ch) for ch in batch + contr + yf] + [last_y])
    nbat = max(xc.shape[0], yc.shape[0])
    prod = lambda letters: int(np.prod([sizes[ch] for ch in letters], dtype=np.int64))
    nb, ni, nj, nk = prod(batch), prod(xf), prod(contr), prod(yf)
    xc = np.broadcast_to(xc, (nbat,) + xc.shape[1:]).reshape(nbat * nb, ni, nj, m)
    yc = np.broadcast_to(yc, (nbat,) + yc.shape[1:]).reshape(nbat * nb, nj, nk, m)
    z = _bmm(xc, yc, x.space, k)
    shape = (nbat,) + tuple(sizes[ch] for ch in batch + xf + yf) + (m,)
    return Jet(z.reshape(shape), k, x.space), "".join(batch + xf + yf)
