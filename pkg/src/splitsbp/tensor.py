"""Tensor-product SBP operator sets on [-1, 1]^2 and [-1, 1]^3.

Node ordering convention, fixed here and inherited everywhere downstream:
the tensor grid is enumerated with eta_1 varying fastest, so the flat index
of the multi-index ``(i1, ..., id)`` is ``i1 + n1*i2 (+ n1^2*i3)``. Under
this ordering the derivative-direction factor of each Kronecker product
sits last, e.g. ``Q_eta1 = H (x) Q`` in 2D and ``H (x) H (x) Q`` in 3D.

Facets are numbered per axis: facet ``2k`` is ``{eta_{k+1} = -1}`` and
facet ``2k + 1`` is ``{eta_{k+1} = +1}`` for ``k = 0..d-1``. Facet node
lists are ordered lexicographically in the remaining coordinates (lowest
axis fastest), matching the volume convention. Because the operators are
diagonal-E, extrapolation to a facet is a pure node gather, so facet
operators are stored as index lists rather than matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oned import Operator1D

__all__ = ["FacetData", "TensorOperatorSet", "tensor_product", "facet_layout"]


@dataclass(frozen=True)
class FacetData:
    """One axis-aligned facet of the tensor element.

    ``nodes`` holds the volume indices of the facet nodes (the gather
    realization of the extrapolation operator); ``B`` the facet quadrature
    weights; ``normal`` the outward unit normal (+/- a coordinate axis).
    """

    facet: int
    axis: int
    sign: int
    nodes: np.ndarray
    B: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class TensorOperatorSet:
    """Kronecker-product SBP operators on the reference quad / hex."""

    d: int
    n1: int
    op1d: Operator1D
    nodes: np.ndarray          # (n1^d, d)
    H: np.ndarray              # (n1^d,)
    Q: tuple[np.ndarray, ...]  # d dense (n1^d, n1^d) matrices
    D: tuple[np.ndarray, ...]
    facets: tuple[FacetData, ...]

    @property
    def n_nodes(self) -> int:
        return self.n1**self.d


def _flat_multi_index(d: int, n1: int) -> np.ndarray:
    """(n1^d, d) array of multi-indices with axis 0 varying fastest."""
    idx = np.arange(n1)
    grids = np.meshgrid(*([idx] * d), indexing="ij")  # grids[0] slowest
    return np.column_stack([g.ravel() for g in grids[::-1]])


def _kron_chain(factors: list[np.ndarray]) -> np.ndarray:
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out


def facet_layout(d: int, n1: int, weights: np.ndarray) -> tuple[FacetData, ...]:
    """Enumerate the 2d axis-aligned facets with nodes, weights, normals."""
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    multi = _flat_multi_index(d, n1)
    strides = n1 ** np.arange(d)
    facets = []
    for axis in range(d):
        rest = [a for a in range(d) if a != axis]
        rest_multi = _flat_multi_index(d - 1, n1)
        b = _kron_chain([weights] * (d - 1)) if d > 1 else np.ones(1)
        for side, fixed in ((0, 0), (1, n1 - 1)):
            vol = fixed * strides[axis] + rest_multi @ strides[rest]
            normal = np.zeros(d)
            normal[axis] = -1.0 if side == 0 else 1.0
            facets.append(
                FacetData(
                    facet=2 * axis + side,
                    axis=axis,
                    sign=-1 if side == 0 else 1,
                    nodes=vol.astype(np.intp),
                    B=b,
                    normal=normal,
                )
            )
    assert all(np.all(multi[f.nodes, f.axis] == (0 if f.sign < 0 else n1 - 1))
               for f in facets)
    return tuple(facets)


def tensor_product(op: Operator1D, d: int) -> TensorOperatorSet:
    """Lift a 1D operator to the reference quadrilateral or hexahedron."""
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    n1 = op.n1
    multi = _flat_multi_index(d, n1)
    nodes = op.nodes[multi]
    h_diag = np.diag(op.H)
    h = _kron_chain([op.H] * d) if d > 1 else op.H
    # Q for axis k: Kronecker factors run slowest-to-fastest axis, so the
    # axis-k slot (fastest = last) carries Q_1D and the others carry H_1D.
    q_mats = []
    for axis in range(d):
        factors = [h_diag if a != axis else op.Q for a in range(d - 1, -1, -1)]
        q_mats.append(_kron_chain(factors))
    d_mats = tuple(q / h[:, None] for q in q_mats)
    return TensorOperatorSet(
        d=d,
        n1=n1,
        op1d=op,
        nodes=nodes,
        H=h,
        Q=tuple(q_mats),
        D=d_mats,
        facets=facet_layout(d, n1, op.H),
    )
