"""Periodic simplicial meshes on box domains, with distortion maps.

Uniform meshes triangulate a structured grid: each quad cell splits along
its lower-left to upper-right diagonal; each cube splits into the six
tetrahedra sharing the main diagonal (one per permutation of the axes),
with the same diagonal direction in every cube so facet triangulations
match across cells and across the periodic wrap.

Interfaces are matched combinatorially on the integer vertex lattice
(facet corner-coordinate sums, wrapped modulo the lattice period), so the
pairing is exact and survives the boundary-preserving distortion maps.
Each interface records the paired (element, facet) sides, the periodic
shift taking side A coordinates onto side B, and the corner permutation.

Element facet ``k`` is the facet opposite local vertex ``k``; its corner
list is the element's vertices without ``k``, in ascending local order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "MeshError",
    "Interface",
    "Mesh",
    "MeshQuality",
    "uniform_tri_mesh",
    "uniform_tet_mesh",
    "perturb_mesh_2d",
    "perturb_mesh_3d",
    "quality_report",
    "write_mesh",
    "read_mesh",
]


class MeshError(RuntimeError):
    """Mesh construction or perturbation produced an invalid mesh."""


@dataclass(frozen=True)
class Interface:
    """A paired facet: side A coordinates + shift = side B coordinates."""

    elem_a: int
    facet_a: int
    elem_b: int
    facet_b: int
    shift: tuple[float, ...]
    vperm: tuple[int, ...]   # corner i of facet A matches corner vperm[i] of B


@dataclass(frozen=True)
class Mesh:
    """Fully periodic simplicial mesh on the box ``[0, box_i]^d``."""

    d: int
    vertices: np.ndarray          # (nv, d)
    elements: np.ndarray          # (ne, d+1) vertex indices, |J| > 0
    interfaces: tuple[Interface, ...]
    box: tuple[float, ...]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def element_vertices(self, k: int) -> np.ndarray:
        return self.vertices[self.elements[k]]

    def facet_corners(self, elem: int, facet: int) -> np.ndarray:
        """Physical corner coordinates of one element facet."""
        ids = [v for i, v in enumerate(self.elements[elem]) if i != facet]
        return self.vertices[ids]

    def element_volumes(self) -> np.ndarray:
        verts = self.vertices[self.elements]
        edges = verts[:, 1:, :] - verts[:, :1, :]
        from math import factorial

        return np.linalg.det(edges) / factorial(self.d)

    def nominal_sizes(self) -> np.ndarray:
        """Per-element longest edge (the nominal element size)."""
        verts = self.vertices[self.elements]
        n = self.d + 1
        h = np.zeros(self.n_elements)
        for i in range(n):
            for j in range(i + 1, n):
                h = np.maximum(h, np.linalg.norm(verts[:, i] - verts[:, j], axis=1))
        return h


def _facet_local_corners(d: int, facet: int) -> list[int]:
    return [i for i in range(d + 1) if i != facet]


def _pair_interfaces(
    elements: np.ndarray,
    lattice: np.ndarray,
    periods: tuple[int, ...],
    cell: np.ndarray,
) -> list[Interface]:
    """Pair element facets by wrapped integer corner-coordinate sums."""
    d = lattice.shape[1]
    buckets: dict[tuple, list[tuple[int, int, np.ndarray]]] = {}
    for e, elem in enumerate(elements):
        for f in range(d + 1):
            corners = lattice[[elem[i] for i in _facet_local_corners(d, f)]]
            s = corners.sum(axis=0)
            key = tuple(int(s[a]) % (d * periods[a]) for a in range(d))
            buckets.setdefault(key, []).append((e, f, corners))
    interfaces: list[Interface] = []
    for key, members in buckets.items():
        if len(members) != 2:
            raise MeshError(
                f"facet bucket {key} has {len(members)} members; "
                "periodic pairing failed"
            )
        (ea, fa, ca), (eb, fb, cb) = members
        shift_lattice = (cb.sum(axis=0) - ca.sum(axis=0)) // d
        wrapped_a = ca + shift_lattice
        perm = []
        for row in wrapped_a:
            matches = np.nonzero((cb == row).all(axis=1))[0]
            if matches.size != 1:
                raise MeshError(f"corner match failed on facet bucket {key}")
            perm.append(int(matches[0]))
        interfaces.append(
            Interface(
                elem_a=ea,
                facet_a=fa,
                elem_b=eb,
                facet_b=fb,
                shift=tuple(float(s) for s in shift_lattice * cell),
                vperm=tuple(perm),
            )
        )
    return interfaces


def uniform_tri_mesh(nx: int, ny: int, box: tuple[float, float] = (1.0, 1.0)) -> Mesh:
    """Structured periodic triangle mesh: 2 triangles per grid cell."""
    if nx < 1 or ny < 1:
        raise MeshError("grid must have at least one cell per direction")
    cell = np.array([box[0] / nx, box[1] / ny])
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    lattice = np.column_stack([ii.ravel(), jj.ravel()])
    vertices = lattice * cell

    def vid(i: int, j: int) -> int:
        return i * (ny + 1) + j

    elems = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            elems.append([v00, v10, v11])   # below the ll-ur diagonal
            elems.append([v00, v11, v01])   # above it
    elements = np.array(elems, dtype=np.intp)
    interfaces = _pair_interfaces(elements, lattice, (nx, ny), cell)
    mesh = Mesh(
        d=2,
        vertices=vertices,
        elements=elements,
        interfaces=tuple(interfaces),
        box=tuple(float(b) for b in box),
    )
    _check_volumes(mesh)
    return mesh


_KUHN_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def uniform_tet_mesh(n: int, box: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> Mesh:
    """Periodic tetrahedral mesh: 6 tets per cube along the main diagonal."""
    if n < 1:
        raise MeshError("grid must have at least one cell per direction")
    cell = np.array([box[0] / n, box[1] / n, box[2] / n])
    rng = np.arange(n + 1)
    ii, jj, kk = np.meshgrid(rng, rng, rng, indexing="ij")
    lattice = np.column_stack([ii.ravel(), jj.ravel(), kk.ravel()])
    vertices = lattice * cell

    def vid(i: int, j: int, k: int) -> int:
        return (i * (n + 1) + j) * (n + 1) + k

    elems = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                base = np.array([i, j, k])
                for perm in _KUHN_PERMS:
                    path = [base.copy()]
                    for axis in perm:
                        nxt = path[-1].copy()
                        nxt[axis] += 1
                        path.append(nxt)
                    ids = [vid(*p) for p in path]
                    sign = np.linalg.det(
                        np.array([path[m + 1] - path[0] for m in range(3)], dtype=float)
                    )
                    if sign < 0:
                        ids[1], ids[2] = ids[2], ids[1]
                    elems.append(ids)
    elements = np.array(elems, dtype=np.intp)
    interfaces = _pair_interfaces(elements, lattice, (n, n, n), cell)
    mesh = Mesh(
        d=3,
        vertices=vertices,
        elements=elements,
        interfaces=tuple(interfaces),
        box=tuple(float(b) for b in box),
    )
    _check_volumes(mesh)
    return mesh


def _check_volumes(mesh: Mesh) -> None:
    vols = mesh.element_volumes()
    if np.any(vols <= 0):
        k = int(np.argmin(vols))
        raise MeshError(f"element {k} has nonpositive volume {vols[k]:.3e}")


def perturb_mesh_2d(mesh: Mesh, alpha_m: float) -> Mesh:
    """Distort a unit-square triangle mesh; boundary identification is kept.

    The first coordinate is stretched toward the right edge with a
    sinusoidal shear, the second compressed toward the bottom with rate
    ``alpha_m``.
    """
    if mesh.d != 2:
        raise MeshError("2D perturbation applied to a non-2D mesh")
    x1, x2 = mesh.vertices[:, 0], mesh.vertices[:, 1]
    new = np.column_stack(
        [
            x1 * np.exp(0.5 * (x1 - 1.0)) + 0.4 * np.sin(np.pi * x1) * np.sin(np.pi * x2),
            x2 * np.exp(alpha_m * (x2 - 1.0)),
        ]
    )
    out = replace(mesh, vertices=new)
    _check_volumes(out)
    return out


def perturb_mesh_3d(mesh: Mesh, alpha_m: float) -> Mesh:
    """3D analogue of :func:`perturb_mesh_2d` (compression along x3)."""
    if mesh.d != 3:
        raise MeshError("3D perturbation applied to a non-3D mesh")
    x1, x2, x3 = mesh.vertices.T
    bump = 0.4 * np.sin(np.pi * x1) * np.sin(np.pi * x2) * np.sin(np.pi * x3)
    new = np.column_stack(
        [
            x1 * np.exp(0.5 * (x1 - 1.0)) + bump,
            x2 * np.exp(0.5 * (x2 - 1.0)) + bump,
            x3 * np.exp(alpha_m * (x3 - 1.0)),
        ]
    )
    out = replace(mesh, vertices=new)
    _check_volumes(out)
    return out


@dataclass(frozen=True)
class MeshQuality:
    """Per-element quality: aspect ratios and (2D) maximum interior angle.

    ``aspect`` is longest edge over ``d`` times the inradius;
    ``aspect_normalized`` rescales it so a regular simplex scores exactly 1
    (divide by sqrt(3) in 2D, multiply by 3/(2 sqrt(6)) in 3D), which is
    the form usually quoted for distorted-mesh studies.
    """

    aspect: np.ndarray
    aspect_normalized: np.ndarray
    max_angle_deg: np.ndarray | None

    @property
    def max_aspect(self) -> float:
        return float(np.max(self.aspect))

    @property
    def max_aspect_normalized(self) -> float:
        return float(np.max(self.aspect_normalized))

    @property
    def max_angle(self) -> float | None:
        if self.max_angle_deg is None:
            return None
        return float(np.max(self.max_angle_deg))


def quality_report(mesh: Mesh) -> MeshQuality:
    """Aspect ratio (longest edge over d times the inradius) per element."""
    verts = mesh.vertices[mesh.elements]
    n = mesh.d + 1
    longest = np.zeros(mesh.n_elements)
    for i in range(n):
        for j in range(i + 1, n):
            longest = np.maximum(
                longest, np.linalg.norm(verts[:, i] - verts[:, j], axis=1)
            )
    vols = mesh.element_volumes()
    if mesh.d == 2:
        # inradius = 2 * area / perimeter
        per = sum(
            np.linalg.norm(verts[:, i] - verts[:, (i + 1) % 3], axis=1)
            for i in range(3)
        )
        inradius = 2.0 * vols / per
        angles = np.zeros((mesh.n_elements, 3))
        for i in range(3):
            a = verts[:, (i + 1) % 3] - verts[:, i]
            b = verts[:, (i + 2) % 3] - verts[:, i]
            cosang = np.sum(a * b, axis=1) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            angles[:, i] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        max_angle = angles.max(axis=1)
    else:
        # inradius = 3 * volume / surface area
        area = np.zeros(mesh.n_elements)
        for f in range(4):
            tri = verts[:, [i for i in range(4) if i != f], :]
            cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
            area += 0.5 * np.linalg.norm(cross, axis=1)
        inradius = 3.0 * vols / area
        max_angle = None
    aspect = longest / (mesh.d * inradius)
    norm_factor = 1.0 / np.sqrt(3.0) if mesh.d == 2 else 3.0 / (2.0 * np.sqrt(6.0))
    return MeshQuality(
        aspect=aspect, aspect_normalized=aspect * norm_factor, max_angle_deg=max_angle
    )


# ---------------------------------------------------------------------------
# plain-text mesh files


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    lines = ["splitsbp-mesh 1", f"d {mesh.d}", "box " + " ".join(_fmt(b) for b in mesh.box)]
    lines.append(f"vertices {mesh.vertices.shape[0]}")
    for row in mesh.vertices:
        lines.append(" ".join(_fmt(v) for v in row))
    lines.append(f"elements {mesh.n_elements}")
    for row in mesh.elements:
        lines.append(" ".join(str(int(v)) for v in row))
    lines.append(f"interfaces {len(mesh.interfaces)}")
    for itf in mesh.interfaces:
        lines.append(
            " ".join(
                [str(itf.elem_a), str(itf.facet_a), str(itf.elem_b), str(itf.facet_b)]
                + [_fmt(s) for s in itf.shift]
                + [str(p) for p in itf.vperm]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path: str | Path) -> Mesh:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != "splitsbp-mesh 1":
        raise MeshError(f"{path}: not a splitsbp mesh file")
    pos = 1

    def keyval(key: str) -> str:
        nonlocal pos
        name, _, val = text[pos].partition(" ")
        if name != key:
            raise MeshError(f"{path}: expected '{key}' at line {pos + 1}")
        pos += 1
        return val

    d = int(keyval("d"))
    box = tuple(float(v) for v in keyval("box").split())
    nv = int(keyval("vertices"))
    vertices = np.array([[float(v) for v in text[pos + i].split()] for i in range(nv)])
    pos += nv
    ne = int(keyval("elements"))
    elements = np.array(
        [[int(v) for v in text[pos + i].split()] for i in range(ne)], dtype=np.intp
    )
    pos += ne
    ni = int(keyval("interfaces"))
    interfaces = []
    for i in range(ni):
        parts = text[pos + i].split()
        ea, fa, eb, fb = (int(v) for v in parts[:4])
        shift = tuple(float(v) for v in parts[4 : 4 + d])
        vperm = tuple(int(v) for v in parts[4 + d :])
        interfaces.append(Interface(ea, fa, eb, fb, shift, vperm))
    return Mesh(d=d, vertices=vertices, elements=elements,
                interfaces=tuple(interfaces), box=box)
