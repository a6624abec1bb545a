"""Splitting of the reference simplices into quadrilateral / hexahedral parts.

The reference triangle ``{xi >= -1, xi1 + xi2 <= 0}`` is cut into three
quadrilaterals by connecting its centroid to the edge midpoints. The
reference tetrahedron ``{xi >= -1, xi1 + xi2 + xi3 <= -1}`` is cut into
four hexahedra by the planes spanned by edge midpoints, the centroids of
the adjacent faces, and the cell centroid. Each subdomain carries one
simplex vertex; its multilinear map, Jacobian, and metric terms are
evaluated analytically so that the metric identity holds to round-off.

The corner ordering of each subdomain follows the reference-element node
numbering baked into :func:`shape_functions` (counter-clockwise bottom
face, then the matching top-face circuit in 3D). In 2D the chosen circuit
is ``[preceding edge midpoint, simplex vertex, following edge midpoint,
centroid]``, which is the labeling under which the four-node worked
example reproduces published values entry for entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryError",
    "SubdomainGeometry",
    "reference_simplex_vertices",
    "simplex_measure",
    "split_vertices",
    "shape_functions",
    "shape_gradients",
    "map_point",
    "jacobian_and_metrics",
    "split_subdomains",
]


class GeometryError(RuntimeError):
    """A split subdomain is degenerate or inverted."""


def reference_simplex_vertices(d: int) -> np.ndarray:
    """Vertices of the right-angle reference triangle / tetrahedron."""
    if d == 2:
        return np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    if d == 3:
        return np.array(
            [
                [-1.0, -1.0, -1.0],
                [1.0, -1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
            ]
        )
    raise ValueError(f"dimension must be 2 or 3, got {d}")


def simplex_measure(d: int) -> float:
    """Area / volume of the reference simplex (2 for d=2, 4/3 for d=3)."""
    return 2.0 if d == 2 else 4.0 / 3.0


@dataclass(frozen=True)
class SubdomainGeometry:
    """One quadrilateral / hexahedral subdomain of the split simplex."""

    ell: int                 # subdomain index, equals its simplex-vertex index
    d: int
    vertices: np.ndarray     # (2^d, d) corner coordinates in simplex coords


def shape_functions(d: int, eta: np.ndarray) -> np.ndarray:
    """Multilinear vertex shape functions at points ``eta``.

    Accepts ``eta`` of shape (..., d) and returns shape (..., 2^d). The
    vertex order is the reference-element numbering: in 2D the corners
    (-1,-1), (1,-1), (1,1), (-1,1); in 3D that bottom circuit followed by
    the top-face corners (-1,1,1), (-1,-1,1), (1,-1,1), (1,1,1).
    """
    eta = np.asarray(eta, dtype=float)
    if d == 2:
        e1, e2 = eta[..., 0], eta[..., 1]
        return 0.25 * np.stack(
            [
                (1 - e1) * (1 - e2),
                (1 + e1) * (1 - e2),
                (1 + e1) * (1 + e2),
                (1 - e1) * (1 + e2),
            ],
            axis=-1,
        )
    if d == 3:
        e1, e2, e3 = eta[..., 0], eta[..., 1], eta[..., 2]
        return 0.125 * np.stack(
            [
                (1 - e1) * (1 - e2) * (1 - e3),
                (1 + e1) * (1 - e2) * (1 - e3),
                (1 + e1) * (1 + e2) * (1 - e3),
                (1 - e1) * (1 + e2) * (1 - e3),
                (1 - e1) * (1 + e2) * (1 + e3),
                (1 - e1) * (1 - e2) * (1 + e3),
                (1 + e1) * (1 - e2) * (1 + e3),
                (1 + e1) * (1 + e2) * (1 + e3),
            ],
            axis=-1,
        )
    raise ValueError(f"dimension must be 2 or 3, got {d}")


def shape_gradients(d: int, eta: np.ndarray) -> np.ndarray:
    """d(shape)/d(eta): shape (..., 2^d, d), same vertex order as above."""
    eta = np.asarray(eta, dtype=float)
    if d == 2:
        e1, e2 = eta[..., 0], eta[..., 1]
        one = np.ones_like(e1)
        g1 = 0.25 * np.stack([-(1 - e2), (1 - e2), (1 + e2), -(1 + e2)], axis=-1)
        g2 = 0.25 * np.stack([-(1 - e1), -(1 + e1), (1 + e1), (1 - e1)], axis=-1)
        del one
        return np.stack([g1, g2], axis=-1)
    if d == 3:
        e1, e2, e3 = eta[..., 0], eta[..., 1], eta[..., 2]
        g1 = 0.125 * np.stack(
            [
                -(1 - e2) * (1 - e3),
                (1 - e2) * (1 - e3),
                (1 + e2) * (1 - e3),
                -(1 + e2) * (1 - e3),
                -(1 + e2) * (1 + e3),
                -(1 - e2) * (1 + e3),
                (1 - e2) * (1 + e3),
                (1 + e2) * (1 + e3),
            ],
            axis=-1,
        )
        g2 = 0.125 * np.stack(
            [
                -(1 - e1) * (1 - e3),
                -(1 + e1) * (1 - e3),
                (1 + e1) * (1 - e3),
                (1 - e1) * (1 - e3),
                (1 - e1) * (1 + e3),
                -(1 - e1) * (1 + e3),
                -(1 + e1) * (1 + e3),
                (1 + e1) * (1 + e3),
            ],
            axis=-1,
        )
        g3 = 0.125 * np.stack(
            [
                -(1 - e1) * (1 - e2),
                -(1 + e1) * (1 - e2),
                -(1 + e1) * (1 + e2),
                -(1 - e1) * (1 + e2),
                (1 - e1) * (1 + e2),
                (1 - e1) * (1 - e2),
                (1 + e1) * (1 - e2),
                (1 + e1) * (1 + e2),
            ],
            axis=-1,
        )
        return np.stack([g1, g2, g3], axis=-1)
    raise ValueError(f"dimension must be 2 or 3, got {d}")


def split_vertices(d: int) -> list[np.ndarray]:
    """Corner tuples of the d+1 split subdomains, in shape-function order."""
    v = reference_simplex_vertices(d)
    centroid = v.mean(axis=0)
    if d == 2:
        subs = []
        for ell in range(3):
            prv, nxt = v[(ell - 1) % 3], v[(ell + 1) % 3]
            m_prev = 0.5 * (v[ell] + prv)
            m_next = 0.5 * (v[ell] + nxt)
            subs.append(np.array([m_prev, v[ell], m_next, centroid]))
        return subs
    if d == 3:
        subs = []
        for ell in range(4):
            u = v[ell]
            others = [v[j] for j in range(4) if j != ell]
            a, b, c = others
            # right-handed local frame so the multilinear map is orientation
            # preserving everywhere
            if np.linalg.det(np.column_stack([a - u, b - u, c - u])) < 0:
                b, c = c, b
            mid = lambda p, q: 0.5 * (p + q)
            face = lambda p, q, r: (p + q + r) / 3.0
            subs.append(
                np.array(
                    [
                        u,
                        mid(u, a),
                        face(u, a, b),
                        mid(u, b),
                        face(u, b, c),
                        mid(u, c),
                        face(u, a, c),
                        centroid,
                    ]
                )
            )
        return subs
    raise ValueError(f"dimension must be 2 or 3, got {d}")


def split_subdomains(d: int) -> list[SubdomainGeometry]:
    return [
        SubdomainGeometry(ell=ell, d=d, vertices=verts)
        for ell, verts in enumerate(split_vertices(d))
    ]


def map_point(geom: SubdomainGeometry, eta: np.ndarray) -> np.ndarray:
    """Map points from the tensor reference element into the simplex."""
    psi = shape_functions(geom.d, eta)
    return psi @ geom.vertices


def jacobian_and_metrics(
    geom: SubdomainGeometry, eta: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Jacobian determinant and metric terms at points ``eta``.

    Returns ``(jdet, lam)`` with ``jdet`` of shape (n,) and ``lam`` of
    shape (n, d, d), where ``lam[m, j, i]`` holds the metric term
    ``|J| d(eta_j)/d(xi_i)`` at node m: the (j, i) entry of the adjugate
    of J, a polynomial of degree d-1 in eta, computed without division so
    the metric identity is exact.
    """
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    d = geom.d
    grads = shape_gradients(d, eta)                    # (n, 2^d, d)
    jac = np.einsum("ai,naj->nij", geom.vertices, grads)  # J[i,j]=dxi_i/deta_j
    if d == 2:
        jdet = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        lam = np.empty((eta.shape[0], 2, 2))
        lam[:, 0, 0] = jac[:, 1, 1]
        lam[:, 0, 1] = -jac[:, 0, 1]
        lam[:, 1, 0] = -jac[:, 1, 0]
        lam[:, 1, 1] = jac[:, 0, 0]
    else:
        jdet = np.linalg.det(jac)
        # adj(J)[j, i] = cofactor_{ij}: 2x2 minors with alternating signs
        lam = np.empty((eta.shape[0], 3, 3))
        for j in range(3):
            for i in range(3):
                rows = [r for r in range(3) if r != i]
                cols = [c for c in range(3) if c != j]
                minor = (
                    jac[:, rows[0], cols[0]] * jac[:, rows[1], cols[1]]
                    - jac[:, rows[0], cols[1]] * jac[:, rows[1], cols[0]]
                )
                lam[:, j, i] = (-1.0) ** (i + j) * minor
    bad = np.nonzero(jdet <= 0.0)[0]
    if bad.size:
        raise GeometryError(
            f"nonpositive Jacobian in subdomain {geom.ell} at node {bad[0]} "
            f"(|J| = {jdet[bad[0]]:.3e})"
        )
    return jdet, lam
