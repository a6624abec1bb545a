"""Assembly of sparse SBP operators on the reference triangle / tetrahedron.

Tensor-product operators are mapped onto the subdomains of the split
simplex, and the subdomain matrices are scatter-added into global sparse
matrices through a shared node numbering. Nodes on subdomain interfaces
are merged, so the assembled operator has no duplicated degrees of
freedom, and the boundary contributions of interior interfaces cancel in
pairs, leaving a diagonal boundary operator supported on the simplex
facets. A derivative operator built this way from a degree ``q`` 1D
operator is exact for total degree ``q - d + 1``.

Global node numbering is canonical: merged nodes are sorted
lexicographically by their simplex coordinates (first coordinate primary).
Facet node lists use the same order. Sparse matrices are CSR with sorted
indices, so rebuilt operators are bit-identical.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .checks import VerificationReport
from .oned import Operator1D
from .split import (
    GeometryError,
    SubdomainGeometry,
    jacobian_and_metrics,
    map_point,
    simplex_measure,
    split_subdomains,
)
from .tensor import TensorOperatorSet, tensor_product

__all__ = [
    "AssemblyError",
    "AssemblyMap",
    "SimplexFacet",
    "SimplexOperator",
    "SparsityStats",
    "node_count_formula",
    "nnz_estimate",
    "sparsity_formula",
    "simplex_monomial_integral",
    "monomial_exponents",
    "subdomain_operators",
    "global_numbering",
    "assemble",
    "sparsity_stats",
    "verify_simplex_operator",
]

_MERGE_TOL = 1e-12
_FACET_TOL = 1e-10


class AssemblyError(RuntimeError):
    """Operator assembly failed or an assembled invariant is violated."""


# ---------------------------------------------------------------------------
# closed-form counts


def node_count_formula(d: int, n1: int) -> int:
    """Unique node count of the assembled operator."""
    return (
        (d + 1) * n1**d
        - (d + d ** (d - 2)) * n1 ** (d - 1)
        + (d - 2) * ((d + 1) * n1 - 2)
        + 1
    )


def facet_node_count(d: int, n1: int) -> int:
    """Unique node count on one simplex facet."""
    return 2 * n1 - 1 if d == 2 else node_count_formula(2, n1)


def nnz_estimate(d: int, n1: int) -> int:
    """Estimated nonzeros of one derivative matrix (not an upper bound)."""
    return (n1 * d - d + 1) * node_count_formula(d, n1)


def sparsity_formula(d: int, n1: int) -> float:
    """Closed-form sparsity of the derivative matrices."""
    if d == 2:
        return 1.0 - (2 * n1 - 1) / (3 * n1**2 - 3 * n1 + 1)
    return 1.0 - (3 * n1 - 2) / (4 * n1**3 - 6 * n1**2 + 4 * n1 - 1)


# ---------------------------------------------------------------------------
# exact reference integrals (used by the verification suite)


def simplex_monomial_integral(d: int, alpha: tuple[int, ...]) -> float:
    """Exact integral of ``prod xi_i^alpha_i`` over the reference simplex.

    Computed with rational arithmetic by shifting to the unit simplex,
    where ``int u^k du = prod(k_i!) / (sum(k_i) + d)!``.
    """
    total = Fraction(0)
    for ks in itertools.product(*[range(a + 1) for a in alpha]):
        coef = Fraction(2 ** (sum(ks) + d))
        for a, k in zip(alpha, ks):
            coef *= comb(a, k) * (-1) ** (a - k)
        num = Fraction(1)
        for k in ks:
            num *= factorial(k)
        total += coef * num / factorial(sum(ks) + d)
    return float(total)


def monomial_exponents(d: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree exactly ``degree``."""
    return [
        alpha
        for alpha in itertools.product(range(degree + 1), repeat=d)
        if sum(alpha) == degree
    ]


# ---------------------------------------------------------------------------
# simplex facet description


def _facet_planes(d: int) -> list[tuple[np.ndarray, float, np.ndarray]]:
    """(coefficients, offset, outward unit normal) of each simplex facet.

    Facet k is opposite reference vertex k: facet 0 is the slanted facet
    ``sum(xi) = 2 - d``, facet k >= 1 is ``xi_k = -1``. A point lies on the
    facet when ``coefficients @ xi - offset == 0``.
    """
    planes = []
    ones = np.ones(d)
    planes.append((ones, float(2 - d), ones / np.sqrt(d)))
    for k in range(d):
        coef = np.zeros(d)
        coef[k] = 1.0
        planes.append((coef, -1.0, -coef))
    return planes


# ---------------------------------------------------------------------------
# per-subdomain operators


@dataclass(frozen=True)
class SubdomainOperators:
    """Tensor operators mapped onto one split subdomain (simplex coords)."""

    ell: int
    xi: np.ndarray                 # (n, d) mapped node coordinates
    jdet: np.ndarray               # (n,)
    lam: np.ndarray                # (n, d, d) metric terms
    H: np.ndarray                  # (n,)
    Q: tuple[np.ndarray, ...]      # d dense matrices
    E: tuple[np.ndarray, ...]      # d diagonal vectors
    facet_scaled_normals: tuple[np.ndarray, ...]  # per tensor facet, (n_f, d)


def subdomain_operators(
    geom: SubdomainGeometry, tset: TensorOperatorSet
) -> SubdomainOperators:
    """Map a tensor operator set onto one subdomain of the split simplex."""
    d = geom.d
    xi = map_point(geom, tset.nodes)
    jdet, lam = jacobian_and_metrics(geom, tset.nodes)
    h = tset.H * jdet

    scaled_normals = []
    e_diags = [np.zeros(tset.n_nodes) for _ in range(d)]
    for f in tset.facets:
        nvec = f.sign * lam[f.nodes, f.axis, :]     # (n_f, d) scaled normals
        scaled_normals.append(nvec)
        for i in range(d):
            e_diags[i][f.nodes] += f.B * nvec[:, i]

    q_mats = []
    for i in range(d):
        s = np.zeros((tset.n_nodes, tset.n_nodes))
        for j in range(d):
            a = lam[:, j, i][:, None] * tset.Q[j]
            s += 0.5 * (a - a.T)
        q = s + 0.5 * np.diag(e_diags[i])
        q_mats.append(q)
        resid = np.max(np.abs(q.sum(axis=1)))
        if resid > 1e-13:
            raise AssemblyError(
                f"subdomain {geom.ell}: rows of Q_xi{i + 1} sum to {resid:.3e}, "
                "metric identity violated"
            )
    return SubdomainOperators(
        ell=geom.ell,
        xi=xi,
        jdet=jdet,
        lam=lam,
        H=h,
        Q=tuple(q_mats),
        E=tuple(e_diags),
        facet_scaled_normals=tuple(scaled_normals),
    )


# ---------------------------------------------------------------------------
# global numbering


@dataclass(frozen=True)
class AssemblyMap:
    """Merged node numbering shared by the split subdomains."""

    n_p: int
    coords: np.ndarray                    # (n_p, d)
    local_to_global: tuple[np.ndarray, ...]


def global_numbering(coords_list: list[np.ndarray], tol: float = _MERGE_TOL) -> AssemblyMap:
    """Merge coincident subdomain nodes into one global numbering.

    Nodes closer than ``tol`` are identified (union-find over KD-tree
    pairs); the merged nodes are numbered lexicographically by coordinate.
    """
    if tol <= 0:
        raise ValueError("merge tolerance must be positive")
    stacked = np.vstack(coords_list)
    n = stacked.shape[0]
    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in cKDTree(stacked).query_pairs(tol, output_type="ndarray"):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    roots = np.array([find(i) for i in range(n)])
    uniq, inverse = np.unique(roots, return_inverse=True)
    reps = np.zeros((uniq.size, stacked.shape[1]))
    counts = np.bincount(inverse)
    np.add.at(reps, inverse, stacked)
    reps /= counts[:, None]

    rounded = np.round(reps, 9)
    order = np.lexsort(tuple(rounded[:, j] for j in range(reps.shape[1] - 1, -1, -1)))
    rank = np.empty(uniq.size, dtype=np.intp)
    rank[order] = np.arange(uniq.size)
    global_ids = rank[inverse]

    l2g = []
    offset = 0
    for coords in coords_list:
        m = coords.shape[0]
        l2g.append(global_ids[offset : offset + m].copy())
        offset += m
    return AssemblyMap(n_p=uniq.size, coords=reps[order], local_to_global=tuple(l2g))


# ---------------------------------------------------------------------------
# assembled operator


@dataclass(frozen=True)
class SimplexFacet:
    """Quadrature and normal data for one facet of the reference simplex."""

    index: int
    nodes: np.ndarray     # (n_f,) global volume node ids, lexicographic
    B: np.ndarray         # (n_f,) facet quadrature weights
    normal: np.ndarray    # (d,) outward unit normal


@dataclass(frozen=True)
class SimplexOperator:
    """Assembled diagonal-norm SBP operator set on the reference simplex.

    ``E`` is stored as per-direction diagonal vectors; it is supported on
    the simplex boundary only and satisfies both ``Q + Q.T = diag(E)`` and
    the facet decomposition through ``facets``. ``degree`` is the
    polynomial exactness of ``D`` (one-dimensional degree minus d - 1).
    """

    d: int
    family: str
    n1: int
    degree: int
    coords: np.ndarray
    H: np.ndarray
    Q: tuple[sparse.csr_matrix, ...]
    D: tuple[sparse.csr_matrix, ...]
    S: tuple[sparse.csr_matrix, ...]
    E: tuple[np.ndarray, ...]
    facets: tuple[SimplexFacet, ...]
    local_to_global: tuple[np.ndarray, ...]

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_facet_nodes(self) -> int:
        return int(self.facets[0].nodes.size)

    def boundary_nodes(self) -> np.ndarray:
        """Sorted global ids of nodes lying on any simplex facet."""
        return np.unique(np.concatenate([f.nodes for f in self.facets]))


def _scatter_csr(
    n_p: int, subs: list[SubdomainOperators], l2g: tuple[np.ndarray, ...], i: int
) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for sub, g in zip(subs, l2g):
        r, c = np.nonzero(sub.Q[i])
        rows.append(g[r])
        cols.append(g[c])
        vals.append(sub.Q[i][r, c])
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_p, n_p),
    ).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble(d: int, op1d: Operator1D, *, merge_tol: float = _MERGE_TOL) -> SimplexOperator:
    """Assemble the simplex operator set from a 1D SBP operator.

    Raises
    ------
    AssemblyError
        If the 1D degree is below ``d - 1`` (the metric terms could not be
        differentiated exactly), or an assembled invariant fails.
    """
    if d not in (2, 3):
        raise AssemblyError(f"dimension must be 2 or 3, got {d}")
    if op1d.degree < d - 1:
        raise AssemblyError(
            f"1D operator degree {op1d.degree} is below d - 1 = {d - 1}; "
            "the split-subdomain metric terms cannot be handled exactly"
        )
    tset = tensor_product(op1d, d)
    geoms = split_subdomains(d)
    subs = [subdomain_operators(g, tset) for g in geoms]

    amap = global_numbering([s.xi for s in subs], merge_tol)
    expected = node_count_formula(d, op1d.n1)
    if amap.n_p != expected:
        raise AssemblyError(
            f"merged node count {amap.n_p} != closed-form count {expected} "
            f"(d={d}, n1={op1d.n1}); geometry or merge tolerance defect"
        )

    h = np.zeros(amap.n_p)
    for sub, g in zip(subs, amap.local_to_global):
        np.add.at(h, g, sub.H)

    q_mats = tuple(_scatter_csr(amap.n_p, subs, amap.local_to_global, i) for i in range(d))

    # facet quadratures: scatter-add |scaled normal| * tensor facet weights
    # of every subdomain facet lying on a simplex facet
    planes = _facet_planes(d)
    facet_b = [dict() for _ in planes]
    facet_dev = 0.0
    for sub, geom, g in zip(subs, geoms, amap.local_to_global):
        for f, nvec in zip(tset.facets, sub.facet_scaled_normals):
            xi_f = sub.xi[f.nodes]
            for k, (coef, offset, normal) in enumerate(planes):
                if np.max(np.abs(xi_f @ coef - offset)) <= _FACET_TOL:
                    mags = np.linalg.norm(nvec, axis=1)
                    facet_dev = max(
                        facet_dev,
                        float(np.max(np.abs(nvec / mags[:, None] - normal))),
                    )
                    gids = g[f.nodes]
                    for gid, bval in zip(gids, f.B * mags):
                        facet_b[k][int(gid)] = facet_b[k].get(int(gid), 0.0) + bval
                    break
    if facet_dev > 1e-12:
        raise AssemblyError(
            f"facet normal deviates from the simplex facet normal by {facet_dev:.3e}"
        )

    facets = []
    nf_expected = facet_node_count(d, op1d.n1)
    for k, (coef, offset, normal) in enumerate(planes):
        ids = np.array(sorted(facet_b[k]), dtype=np.intp)
        if ids.size != nf_expected:
            raise AssemblyError(
                f"facet {k} has {ids.size} nodes, expected {nf_expected}"
            )
        coords = amap.coords[ids]
        order = np.lexsort(tuple(np.round(coords[:, j], 9) for j in range(d - 1, -1, -1)))
        ids = ids[order]
        b = np.array([facet_b[k][int(i)] for i in ids])
        facets.append(SimplexFacet(index=k, nodes=ids, B=b, normal=normal))

    e_diags = []
    for i in range(d):
        e = np.zeros(amap.n_p)
        for f in facets:
            e[f.nodes] += f.B * f.normal[i]
        e_diags.append(e)

    sbp_resid = max(
        float(np.max(np.abs((q + q.T) - sparse.diags(e))))
        for q, e in zip(q_mats, e_diags)
    )
    if sbp_resid > 1e-12:
        raise AssemblyError(f"assembled operator violates Q + Q^T = E by {sbp_resid:.3e}")

    s_mats = []
    d_mats = []
    inv_h = sparse.diags(1.0 / h)
    for q in q_mats:
        s = (0.5 * (q - q.T)).tocsr()
        s.sort_indices()
        s_mats.append(s)
        dm = (inv_h @ q).tocsr()
        dm.sort_indices()
        d_mats.append(dm)

    return SimplexOperator(
        d=d,
        family=op1d.family,
        n1=op1d.n1,
        degree=op1d.degree - d + 1,
        coords=amap.coords,
        H=h,
        Q=q_mats,
        D=tuple(d_mats),
        S=tuple(s_mats),
        E=tuple(e_diags),
        facets=tuple(facets),
        local_to_global=amap.local_to_global,
    )


# ---------------------------------------------------------------------------
# sparsity accounting


@dataclass(frozen=True)
class SparsityStats:
    d: int
    n1: int
    n_p: int
    nnz_actual: int
    nnz_estimate: int
    s_actual: float
    s_formula: float


def sparsity_stats(op: SimplexOperator, drop_tol: float = 1e-14) -> SparsityStats:
    """Count derivative-matrix nonzeros and compare with the closed forms."""
    nnz = 0
    for dm in op.D:
        nnz = max(nnz, int(np.count_nonzero(np.abs(dm.data) > drop_tol)))
    n_p = op.n_nodes
    return SparsityStats(
        d=op.d,
        n1=op.n1,
        n_p=n_p,
        nnz_actual=nnz,
        nnz_estimate=nnz_estimate(op.d, op.n1),
        s_actual=1.0 - nnz / n_p**2,
        s_formula=sparsity_formula(op.d, op.n1),
    )


# ---------------------------------------------------------------------------
# verification suite


def verify_simplex_operator(op: SimplexOperator) -> VerificationReport:
    """Run every algebraic invariant of an assembled operator."""
    d, p = op.d, op.degree
    rep = VerificationReport(subject=f"{op.family} d={d} n1={op.n1} degree={p}")
    rep.add_flag(
        f"node count = {node_count_formula(d, op.n1)}",
        op.n_nodes == node_count_formula(d, op.n1),
    )
    rep.add("H positive", max(0.0, -float(np.min(op.H))), 0.0)
    rep.add(
        f"sum(H) = simplex measure {simplex_measure(d):g}",
        abs(float(np.sum(op.H)) - simplex_measure(d)),
        1e-12,
    )

    boundary = op.boundary_nodes()
    interior = np.setdiff1d(np.arange(op.n_nodes), boundary)
    for i in range(d):
        q, e = op.Q[i], op.E[i]
        rep.add(
            f"SBP property Q+Q^T = E (xi{i + 1})",
            float(np.max(np.abs((q + q.T) - sparse.diags(e)))),
            1e-12,
        )
        qqt = (q + q.T).tocsr()
        off = qqt - sparse.diags(qqt.diagonal())
        rep.add(
            f"E diagonal (xi{i + 1})",
            float(np.max(np.abs(off.data))) if off.nnz else 0.0,
            1e-13,
        )
        rep.add(
            f"E facet decomposition (xi{i + 1})",
            float(np.max(np.abs(qqt.diagonal() - e))),
            1e-13,
        )
        rep.add(
            f"E zero at interior nodes (xi{i + 1})",
            float(np.max(np.abs(e[interior]))) if interior.size else 0.0,
            1e-13,
        )
        s = op.S[i]
        q_half_e = q - sparse.diags(0.5 * e)
        rep.add(
            f"S = Q - E/2 antisymmetric (xi{i + 1})",
            float(np.max(np.abs((q_half_e + q_half_e.T)))),
            1e-13,
        )
        rep.add(
            f"stored S matches Q - E/2 (xi{i + 1})",
            float(np.max(np.abs((s - q_half_e)))) if (s - q_half_e).nnz else 0.0,
            1e-13,
        )

    # derivative exactness up to p, sharpness at p + 1
    derr = 0.0
    for q_deg in range(p + 1):
        for alpha in monomial_exponents(d, q_deg):
            vals = np.prod(op.coords ** np.array(alpha), axis=1)
            for i in range(d):
                a = np.array(alpha, dtype=float)
                if alpha[i] == 0:
                    exact = np.zeros(op.n_nodes)
                else:
                    a[i] -= 1
                    exact = alpha[i] * np.prod(op.coords**a, axis=1)
                derr = max(derr, float(np.max(np.abs(op.D[i] @ vals - exact))))
    rep.add(f"D exact for total degree <= {p}", derr, 1e-10)

    sharp = 0.0
    for alpha in monomial_exponents(d, p + 1):
        vals = np.prod(op.coords ** np.array(alpha), axis=1)
        for i in range(d):
            a = np.array(alpha, dtype=float)
            if alpha[i] == 0:
                exact = np.zeros(op.n_nodes)
            else:
                a[i] -= 1
                exact = alpha[i] * np.prod(op.coords**a, axis=1)
            sharp = max(sharp, float(np.max(np.abs(op.D[i] @ vals - exact))))
    rep.add_flag(f"some degree {p + 1} monomial inexact (> 1e-6)", sharp > 1e-6)
    rep.notes["degree_sharpness_error"] = sharp

    qerr = 0.0
    for q_deg in range(max(2 * p - 1, 0) + 1):
        for alpha in monomial_exponents(d, q_deg):
            exact = simplex_monomial_integral(d, alpha)
            approx = float(np.dot(op.H, np.prod(op.coords ** np.array(alpha), axis=1)))
            qerr = max(qerr, abs(approx - exact) / max(1.0, abs(exact)))
    rep.add(f"norm quadrature exact for |alpha| <= {max(2 * p - 1, 0)}", qerr, 1e-12)

    # facet quadrature measures: legs are (d-1)-cubes of the right simplex,
    # the slanted facet picks up the sqrt(d) area factor
    leg_measure = 2.0 if d == 2 else 2.0
    slant_measure = leg_measure * np.sqrt(d)
    for f in op.facets:
        expected = slant_measure if f.index == 0 else leg_measure
        rep.add(
            f"facet {f.index} quadrature measure",
            abs(float(np.sum(f.B)) - expected),
            1e-12,
        )
        rep.add(f"facet {f.index} weights positive", max(0.0, -float(np.min(f.B))), 0.0)

    # metric identity, recomputed per subdomain
    from .oned import build_csbp_operator, build_lgl_operator

    op1d = (
        build_lgl_operator(op.n1) if op.family == "lgl" else build_csbp_operator(op.n1)
    )
    tset = tensor_product(op1d, d)
    mid_err = 0.0
    for geom in split_subdomains(d):
        _, lam = jacobian_and_metrics(geom, tset.nodes)
        for i in range(d):
            acc = np.zeros(tset.n_nodes)
            for j in range(d):
                acc += tset.D[j] @ lam[:, j, i]
            mid_err = max(mid_err, float(np.max(np.abs(acc))))
    rep.add("discrete metric identity per subdomain", mid_err, 1e-12)

    # The nnz estimate assumes dense 1D stencils; banded families (csbp)
    # land far below it, which is not a defect, so only inflation is flagged
    # for them.
    stats = sparsity_stats(op)
    within_upper = stats.nnz_actual <= 1.5 * stats.nnz_estimate
    if op.family == "lgl":
        rep.add_flag(
            "nnz within 1.5x of the closed-form estimate",
            within_upper and stats.nnz_actual >= stats.nnz_estimate / 1.5,
        )
    else:
        rep.add_flag("nnz below 1.5x of the closed-form estimate", within_upper)
    rep.notes["sparsity"] = stats
    return rep
