"""Plain-text exchange format for assembled simplex operators.

The file is line oriented and byte-stable across runs:

.. code-block:: text

    splitsbp-operator 1
    d <d>
    family <lgl|csbp>
    n1 <n1>
    degree <p>
    nodes <n_p>
    <x1> <x2> [<x3>]          # one line per node, canonical order
    H <n_p>
    <index> <value>
    Q <i> <nnz>               # one block per direction, CSR traversal order
    <row> <col> <value>
    facet <k> <n_f> <normal components>
    <volume node index> <B value>

Floating-point values are written with ``repr``-faithful precision
(17 significant digits). Loading rebuilds ``D``, ``S``, and ``E`` from the
stored ``H``, ``Q``, and facet data, so a file edited by hand (or a
corrupted one) is re-verified by the same invariant suite as a freshly
assembled operator.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import sparse

from .assembly import SimplexFacet, SimplexOperator

__all__ = ["write_operator", "read_operator"]

_MAGIC = "splitsbp-operator 1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_operator(op: SimplexOperator, path: str | Path) -> None:
    """Write an operator to the plain-text exchange format."""
    lines = [_MAGIC]
    lines.append(f"d {op.d}")
    lines.append(f"family {op.family}")
    lines.append(f"n1 {op.n1}")
    lines.append(f"degree {op.degree}")
    lines.append(f"nodes {op.n_nodes}")
    for row in op.coords:
        lines.append(" ".join(_fmt(v) for v in row))
    lines.append(f"H {op.n_nodes}")
    for i, v in enumerate(op.H):
        lines.append(f"{i} {_fmt(v)}")
    for i, q in enumerate(op.Q):
        coo = q.tocoo()
        lines.append(f"Q {i + 1} {coo.nnz}")
        order = np.lexsort((coo.col, coo.row))
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            lines.append(f"{r} {c} {_fmt(v)}")
    for f in op.facets:
        normal = " ".join(_fmt(v) for v in f.normal)
        lines.append(f"facet {f.index} {f.nodes.size} {normal}")
        for nid, b in zip(f.nodes, f.B):
            lines.append(f"{nid} {_fmt(b)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_operator(path: str | Path) -> SimplexOperator:
    """Load an operator file; derived matrices are rebuilt from H, Q, facets."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != _MAGIC:
        raise ValueError(f"{path}: not a splitsbp operator file")
    pos = 1

    def keyval(key: str) -> str:
        nonlocal pos
        name, _, val = text[pos].partition(" ")
        if name != key:
            raise ValueError(f"{path}: expected '{key}' at line {pos + 1}")
        pos += 1
        return val

    d = int(keyval("d"))
    family = keyval("family")
    n1 = int(keyval("n1"))
    degree = int(keyval("degree"))
    n_p = int(keyval("nodes"))
    coords = np.array(
        [[float(v) for v in text[pos + i].split()] for i in range(n_p)]
    )
    pos += n_p
    if coords.shape != (n_p, d):
        raise ValueError(f"{path}: node table has wrong shape")

    if int(keyval("H")) != n_p:
        raise ValueError(f"{path}: H length mismatch")
    h = np.zeros(n_p)
    for i in range(n_p):
        idx, val = text[pos + i].split()
        h[int(idx)] = float(val)
    pos += n_p

    q_mats = []
    for i in range(d):
        head = keyval("Q").split()
        if int(head[0]) != i + 1:
            raise ValueError(f"{path}: Q blocks out of order")
        nnz = int(head[1])
        rows = np.empty(nnz, dtype=np.intp)
        cols = np.empty(nnz, dtype=np.intp)
        vals = np.empty(nnz)
        for k in range(nnz):
            r, c, v = text[pos + k].split()
            rows[k], cols[k], vals[k] = int(r), int(c), float(v)
        pos += nnz
        q = sparse.coo_matrix((vals, (rows, cols)), shape=(n_p, n_p)).tocsr()
        q.sort_indices()
        q_mats.append(q)

    facets = []
    for _ in range(d + 1):
        head = keyval("facet").split()
        k, n_f = int(head[0]), int(head[1])
        normal = np.array([float(v) for v in head[2 : 2 + d]])
        ids = np.empty(n_f, dtype=np.intp)
        b = np.empty(n_f)
        for j in range(n_f):
            nid, bv = text[pos + j].split()
            ids[j], b[j] = int(nid), float(bv)
        pos += n_f
        facets.append(SimplexFacet(index=k, nodes=ids, B=b, normal=normal))
    facets.sort(key=lambda f: f.index)

    e_diags = []
    for i in range(d):
        e = np.zeros(n_p)
        for f in facets:
            e[f.nodes] += f.B * f.normal[i]
        e_diags.append(e)
    inv_h = sparse.diags(1.0 / h)
    s_mats, d_mats = [], []
    for q, e in zip(q_mats, e_diags):
        s = (q - sparse.diags(0.5 * e)).tocsr()
        s.sort_indices()
        s_mats.append(s)
        dm = (inv_h @ q).tocsr()
        dm.sort_indices()
        d_mats.append(dm)

    return SimplexOperator(
        d=d,
        family=family,
        n1=n1,
        degree=degree,
        coords=coords,
        H=h,
        Q=tuple(q_mats),
        D=tuple(d_mats),
        S=tuple(s_mats),
        E=tuple(e_diags),
        facets=tuple(facets),
        local_to_global=(),
    )
