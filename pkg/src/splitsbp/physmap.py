"""Simplex operators on physical elements under affine vertex maps.

An element with vertices ``X_0 .. X_d`` is the affine image of the
reference simplex; the Jacobian is constant, so the metric terms reduce to
the adjugate of one d-by-d matrix and the physical operators are sparse
rescalings/combinations of the reference ones:

* ``H_k = |J| H``
* ``S_xi = sum_j adj(J)[j, i] S_xij`` (skew parts combine directly)
* ``E_xi = sum_facets R^T B N_xi R`` with ``N_xi`` constant per facet
* ``Q_xi = S_xi + E_xi / 2``,  ``D_xi = H_k^{-1} Q_xi``

Uniform meshes contain only a handful of element shapes up to translation,
so built operators are cached by the rounded edge-vector matrix; cache
lookups are thread safe (single writer, many readers).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .assembly import SimplexOperator
from .split import reference_simplex_vertices

__all__ = ["ElementError", "ElementFacet", "ElementOperators", "ElementOperatorCache",
           "build_element_operators"]

_CACHE_DECIMALS = 12


class ElementError(RuntimeError):
    """A physical element is degenerate or inverted."""


@dataclass(frozen=True)
class ElementFacet:
    """Facet data of a physical element in reference-quadrature form.

    ``B`` is the reference facet quadrature; ``scaled_normal`` carries the
    constant outward normal scaled by the facet area ratio, so
    ``B * scaled_normal[i]`` is the physical area-weighted normal
    quadrature. ``nodes`` indexes the element's volume nodes.
    """

    index: int
    nodes: np.ndarray
    B: np.ndarray
    scaled_normal: np.ndarray

    @property
    def unit_normal(self) -> np.ndarray:
        return self.scaled_normal / np.linalg.norm(self.scaled_normal)


@dataclass(frozen=True)
class _ShapeOperators:
    """Shape-dependent element data, shared between congruent elements."""

    jac: np.ndarray
    jdet: float
    H: np.ndarray
    Q: tuple[sparse.csr_matrix, ...]
    D: tuple[sparse.csr_matrix, ...]
    E: tuple[np.ndarray, ...]
    facets: tuple[ElementFacet, ...]


@dataclass(frozen=True)
class ElementOperators:
    """Operators and node coordinates of one physical element."""

    elem: int
    vertices: np.ndarray
    jac: np.ndarray
    jdet: float
    coords: np.ndarray
    H: np.ndarray
    Q: tuple[sparse.csr_matrix, ...]
    D: tuple[sparse.csr_matrix, ...]
    E: tuple[np.ndarray, ...]
    facets: tuple[ElementFacet, ...]

    @property
    def volume(self) -> float:
        return float(np.sum(self.H))


def _affine_map(vertices: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (A, b) with x = A xi + b mapping the reference simplex."""
    ref = reference_simplex_vertices(d)
    a = 0.5 * (vertices[1:] - vertices[0]).T
    b = vertices[0] - a @ ref[0]
    return a, b


def _adjugate(a: np.ndarray) -> np.ndarray:
    d = a.shape[0]
    if d == 2:
        return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]])
    adj = np.empty((3, 3))
    for j in range(3):
        for i in range(3):
            rows = [r for r in range(3) if r != i]
            cols = [c for c in range(3) if c != j]
            minor = (
                a[rows[0], cols[0]] * a[rows[1], cols[1]]
                - a[rows[0], cols[1]] * a[rows[1], cols[0]]
            )
            adj[j, i] = (-1.0) ** (i + j) * minor
    return adj


def _build_shape(op: SimplexOperator, amat: np.ndarray, elem: int) -> _ShapeOperators:
    d = op.d
    jdet = float(np.linalg.det(amat))
    if jdet <= 0.0:
        raise ElementError(f"element {elem}: inverted or degenerate (|J| = {jdet:.3e})")
    lam = _adjugate(amat)  # lam[j, i] = |J| d(xi_j)/d(x_i)
    h = op.H * jdet

    facets = []
    e_diags = [np.zeros(op.n_nodes) for _ in range(d)]
    for f in op.facets:
        scaled = lam.T @ f.normal  # scaled[i] = sum_j n_xij lam[j, i]
        facets.append(
            ElementFacet(index=f.index, nodes=f.nodes, B=f.B, scaled_normal=scaled)
        )
        for i in range(d):
            e_diags[i][f.nodes] += f.B * scaled[i]

    q_mats, d_mats = [], []
    inv_h = sparse.diags(1.0 / h)
    for i in range(d):
        s = sum(lam[j, i] * op.S[j] for j in range(d))
        q = (s + sparse.diags(0.5 * e_diags[i])).tocsr()
        q.sort_indices()
        q_mats.append(q)
        dm = (inv_h @ q).tocsr()
        dm.sort_indices()
        d_mats.append(dm)
    return _ShapeOperators(
        jac=amat,
        jdet=jdet,
        H=h,
        Q=tuple(q_mats),
        D=tuple(d_mats),
        E=tuple(e_diags),
        facets=tuple(facets),
    )


def build_element_operators(
    op: SimplexOperator, vertices: np.ndarray, elem: int = 0
) -> ElementOperators:
    """Build the operator set of one affine physical element."""
    vertices = np.asarray(vertices, dtype=float)
    amat, b = _affine_map(vertices, op.d)
    shape = _build_shape(op, amat, elem)
    coords = op.coords @ amat.T + b
    return ElementOperators(
        elem=elem,
        vertices=vertices,
        jac=shape.jac,
        jdet=shape.jdet,
        coords=coords,
        H=shape.H,
        Q=shape.Q,
        D=shape.D,
        E=shape.E,
        facets=shape.facets,
    )


class ElementOperatorCache:
    """Share matrices between congruent (translated) elements.

    Keyed by the rounded edge-vector matrix, which fixes the affine part of
    the vertex map; node coordinates are recomputed per element.
    """

    def __init__(self, op: SimplexOperator):
        self.op = op
        self._shapes: dict[bytes, _ShapeOperators] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._shapes)

    def build(self, vertices: np.ndarray, elem: int = 0) -> ElementOperators:
        vertices = np.asarray(vertices, dtype=float)
        amat, b = _affine_map(vertices, self.op.d)
        key = np.round(amat, _CACHE_DECIMALS).tobytes()
        shape = self._shapes.get(key)
        if shape is None:
            with self._lock:
                shape = self._shapes.get(key)
                if shape is None:
                    shape = _build_shape(self.op, amat, elem)
                    self._shapes[key] = shape
        coords = self.op.coords @ shape.jac.T + b
        return ElementOperators(
            elem=elem,
            vertices=vertices,
            jac=shape.jac,
            jdet=shape.jdet,
            coords=coords,
            H=shape.H,
            Q=shape.Q,
            D=shape.D,
            E=shape.E,
            facets=shape.facets,
        )
