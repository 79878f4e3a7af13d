"""Levi-Civita geometry of the temporal metric h(t) and the spatial metric phi(x).

Jet-level helpers take the metric as a :class:`~jetoptics.jets.Jet` of tensor
shape (d, d) plus the index ``offset`` of its first coordinate among the jet
variables (0 for t, p for x).  Index layouts:

* Christoffel symbols ``G[a, b, c]`` = Gamma^a_{bc}
* lowered symbols ``L[b, c, a]`` = Gamma_{bca} = 1/2 (d_b m_ca + d_c m_ba - d_a m_bc)
* curvature ``R[a, b, c, d]`` = R^a_{bcd}
  = d_d Gamma^a_{bc} - d_c Gamma^a_{bd} + Gamma^m_{bc} Gamma^a_{md} - Gamma^m_{bd} Gamma^a_{mc}
* Ricci ``Ric[a, b]`` = R^m_{abm}
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import ShapeError, SingularMetric
from .jets import Jet, jeinsum, jet_space
from .tensor_core import Axis, DTensor, JetPoint, ScalarField

REL_DET_EPS = 1e-13


@dataclass(frozen=True)
class MetricField:
    """Symmetric matrix of scalar fields over the temporal or spatial coordinates."""

    components: tuple[tuple[ScalarField, ...], ...]
    axis: Axis

    def __post_init__(self):
        d = len(self.components)
        if any(len(row) != d for row in self.components):
            raise ShapeError("metric components must form a square matrix")

    @classmethod
    def from_strings(cls, rows, axis: Axis, p: int, n: int) -> "MetricField":
        comps = tuple(tuple(ScalarField.parse(str(e), p, n) for e in row) for row in rows)
        return cls(comps, axis)

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.components[0][0].p

    @property
    def n(self) -> int:
        return self.components[0][0].n

    @property
    def offset(self) -> int:
        return 0 if self.axis is Axis.TEMPORAL else self.p

    @property
    def codes(self) -> str:
        return "t" if self.axis is Axis.TEMPORAL else "s"

    def values(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Component values (B, d, d) and the mask of points outside the domain."""
        u = np.atleast_2d(u)
        out = np.zeros((u.shape[0], self.dim, self.dim))
        bad = np.zeros(u.shape[0], dtype=bool)
        for a in range(self.dim):
            for b in range(a, self.dim):
                val, mask = self.components[a][b].evaluate_many(u)
                out[:, a, b] = out[:, b, a] = val
                bad |= mask
        return out, bad

    def jet(self, V: Jet, memo: dict | None = None) -> Jet:
        memo = {} if memo is None else memo
        d = self.dim
        entries = {}
        for a in range(d):
            for b in range(a, d):
                entries[a, b] = self.components[a][b].jet(V, memo)
        rows = [jets.stack([entries[min(a, b), max(a, b)] for b in range(d)], 0) for a in range(d)]
        return jets.stack(rows, 0)


def singular_mask(values: np.ndarray) -> np.ndarray:
    """Points whose matrix has |det| below REL_DET_EPS times the Hadamard bound."""
    values = np.asarray(values, dtype=float)
    det = np.abs(np.linalg.det(values))
    scale = np.prod(np.linalg.norm(values, axis=-1), axis=-1)
    return ~(det > REL_DET_EPS * scale)


def inverse_jet(m: Jet) -> Jet:
    bad = singular_mask(m.value)
    if np.any(bad):
        raise SingularMetric("metric is singular", bad)
    return jets.inv(m)


def _metric_derivative(m: Jet, offset: int) -> Jet:
    """dm[a, b, c] = d m_ab / du^c over the metric's own coordinates."""
    d = m.shape[-1]
    return m.grad(np.arange(offset, offset + d))


def lowered_christoffel_jet(m: Jet, offset: int) -> Jet:
    dm = _metric_derivative(m, offset)
    # L[b, c, a] = 1/2 (d_b m_ca + d_c m_ba - d_a m_bc)
    return 0.5 * (dm.transpose(2, 0, 1) + dm.transpose(0, 2, 1) - dm)


def christoffel_jet(m: Jet, minv: Jet, offset: int) -> Jet:
    low = lowered_christoffel_jet(m, offset)
    return jeinsum("ad,bcd->abc", minv, low)


def riemann_jet(gamma: Jet, offset: int) -> Jet:
    d = gamma.shape[0]
    dg = gamma.grad(np.arange(offset, offset + d))  # dg[a, b, c, e] = d_e Gamma^a_bc
    quad = jeinsum("mbc,amd->abcd", gamma, gamma)
    half = dg + quad
    return half - half.transpose(0, 1, 3, 2)  # exactly antisymmetric in the last pair


def ricci_jet(riem: Jet) -> Jet:
    d = riem.shape[0]
    return jeinsum("mabn,mn->ab", riem, np.eye(d))


# point API ------------------------------------------------------------------

def _metric_at(m: MetricField, point: JetPoint, order: int) -> Jet:
    if (point.p, point.n) != (m.p, m.n):
        raise ShapeError("point dimensions do not match the metric")
    space = jet_space(m.p + m.n + m.n * m.p, order)
    return m.jet(Jet.variables(space, point.flat()[None, :], order))


def metric_inverse(m: MetricField, point: JetPoint) -> DTensor:
    g = _metric_at(m, point, 0)
    return DTensor(m.codes.upper() * 2, inverse_jet(g).value[0])


def christoffel(m: MetricField, point: JetPoint) -> DTensor:
    g = _metric_at(m, point, 1)
    gam = christoffel_jet(g, inverse_jet(g), m.offset)
    c = m.codes
    return DTensor(c.upper() + c + c, gam.value[0])


def riemann(m: MetricField, point: JetPoint) -> DTensor:
    g = _metric_at(m, point, 2)
    riem = riemann_jet(christoffel_jet(g, inverse_jet(g), m.offset), m.offset)
    c = m.codes
    return DTensor(c.upper() + c * 3, riem.value[0])


def ricci_and_scalar(m: MetricField, point: JetPoint) -> tuple[DTensor, float]:
    g = _metric_at(m, point, 2)
    ginv = inverse_jet(g)
    ric = ricci_jet(riemann_jet(christoffel_jet(g, ginv, m.offset), m.offset)).value[0]
    scalar = float(np.einsum("ab,ab->", ginv.value[0], ric))
    return DTensor(m.codes * 2, ric), scalar
