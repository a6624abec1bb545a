"""Linear advection on periodic simplicial meshes, SBP-SAT semi-discrete form.

The semi-discretization couples per-element operators with interface
penalties on the collocated facet traces:

    du_k/dt = - sum_i c_i D_xi u_k
              + H_k^{-1} sum_facets R^T [ tau * (neighbor trace - own trace) ]

with the nodal penalty built from ``a = sum_i c_i B N_xi`` (the
area-weighted normal wave speed): ``tau = max(-a, 0)`` for the upwind
variant and ``tau = -a / 2`` for the energy-conservative central variant.
Either choice telescopes over an interface, so the scheme is discretely
conservative; upwinding makes the semi-discrete energy rate
``-sum tau (jump)^2 <= 0``.

Element volume terms are evaluated in batches grouped by element shape
class, and all SAT terms through flat gather / scatter index arrays, so a
residual evaluation is a handful of sparse-matrix products and vector
operations regardless of the element count. Summations run in a fixed
index order; results do not depend on the thread count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .assembly import SimplexOperator, assemble
from .mesh import Mesh
from .oned import build_csbp_operator, build_lgl_operator
from .physmap import ElementOperatorCache

__all__ = [
    "AdvectionConfig",
    "SolveReport",
    "ConvergenceRow",
    "ConvergenceStudy",
    "MaxDtResult",
    "default_wave_speed",
    "default_omega",
    "exact_solution",
    "operator_for_config",
    "AdvectionDiscretization",
    "rk4_step",
    "solve",
    "convergence_study",
    "max_stable_dt",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def default_wave_speed(d: int) -> np.ndarray:
    """Reference wave speeds of magnitude sqrt(d), misaligned with the mesh."""
    if d == 2:
        return np.array([5.0 / 4.0, math.sqrt(7.0) / 4.0])
    if d == 3:
        return np.array([3.0 / 2.0, 1.0 / 2.0, 1.0 / math.sqrt(2.0)])
    raise ValueError(f"dimension must be 2 or 3, got {d}")


def default_omega(d: int) -> int:
    return 8 if d == 2 else 2


@dataclass(frozen=True)
class AdvectionConfig:
    """Problem and discretization parameters.

    ``degree`` is the simplex-operator degree for the LGL family; for the
    csbp family the node count ``n1`` is the resolution knob instead (the
    assembled operator is formally degree ``2 - d`` + ... i.e. degree 0 on
    triangles). ``cfl`` scales ``dt = cfl * h_min / |c|``; when neither
    ``cfl`` nor ``dt`` is given a family-dependent stable default is used.
    """

    d: int
    degree: int = 1
    family: str = "lgl"
    n1: int | None = None
    c: tuple[float, ...] | None = None
    omega: int | None = None
    t_final: float = 1.0
    cfl: float | None = None
    dt: float | None = None
    sat: str = "upwind"
    threads: int = 1

    def wave_speed(self) -> np.ndarray:
        if self.c is None:
            c = default_wave_speed(self.d)
            assert abs(np.linalg.norm(c) - math.sqrt(self.d)) <= 1e-12
            return c
        return np.asarray(self.c, dtype=float)

    def omega_value(self) -> int:
        return self.omega if self.omega is not None else default_omega(self.d)

    def validate(self) -> None:
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if self.sat not in ("upwind", "central"):
            raise ValueError(f"unknown SAT kind {self.sat!r}")
        if self.family == "lgl":
            if self.degree < 1:
                raise ValueError("LGL runs need degree >= 1")
        elif self.family == "csbp":
            if self.d != 2:
                raise ValueError("csbp operators are only assembled on triangles")
        else:
            raise ValueError(f"unknown family {self.family!r}")
        for name in ("t_final", "cfl", "dt"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def operator_for_config(cfg: AdvectionConfig) -> SimplexOperator:
    """Assemble the simplex operator requested by a config."""
    cfg.validate()
    if cfg.family == "lgl":
        n1 = cfg.n1 if cfg.n1 is not None else cfg.degree + cfg.d
        return assemble(cfg.d, build_lgl_operator(n1))
    n1 = cfg.n1 if cfg.n1 is not None else 8
    return assemble(cfg.d, build_csbp_operator(n1))


def exact_solution(x: np.ndarray, t: float, cfg: AdvectionConfig) -> np.ndarray:
    """Product-of-sines traveling wave; also the initial condition at t=0."""
    x = np.asarray(x, dtype=float)
    c = cfg.wave_speed()
    w = cfg.omega_value() * np.pi
    out = np.ones(x.shape[:-1])
    for i in range(cfg.d):
        out = out * np.sin(w * (x[..., i] - c[i] * t))
    return out


def _default_cfl(family: str, n1: int) -> float:
    # calibrated against golden-section stability searches; ~2x safety
    if family == "lgl":
        return 0.5 / n1**2
    return 0.25 / n1


@dataclass
class _SideArrays:
    rows: np.ndarray
    neighbor: np.ndarray
    a: np.ndarray


class AdvectionDiscretization:
    """Mesh-level residual evaluator for one operator / config pair."""

    def __init__(self, mesh: Mesh, op: SimplexOperator, cfg: AdvectionConfig):
        cfg.validate()
        if mesh.d != cfg.d or mesh.d != op.d:
            raise ValueError("mesh, operator, and config dimensions disagree")
        self.mesh = mesh
        self.op = op
        self.cfg = cfg
        self.c = cfg.wave_speed()
        n_p = op.n_nodes
        ne = mesh.n_elements
        self.n_p, self.ne = n_p, ne
        self.dof = ne * n_p

        cache = ElementOperatorCache(op)
        elems = [cache.build(mesh.element_vertices(k), elem=k) for k in range(ne)]
        self.elements = elems
        self.coords = np.stack([e.coords for e in elems])          # (ne, n_p, d)
        self.h_flat = np.concatenate([e.H for e in elems])          # (ne*n_p,)

        # shape classes for batched volume terms
        class_index: dict[int, int] = {}
        class_rows: list[list[int]] = []
        class_ops: list = []
        for k, e in enumerate(elems):
            key = id(e.D[0])  # shared arrays identify the shape class
            if key not in class_index:
                class_index[key] = len(class_rows)
                class_rows.append([])
                class_ops.append(e.D)
            class_rows[class_index[key]].append(k)
        self.classes = [
            (np.array(rows, dtype=np.intp), ops)
            for rows, ops in zip(class_rows, class_ops)
        ]

        # SAT gather / scatter arrays, both orientations of every interface
        tol = 1e-10 * max(mesh.box)
        sides: list[_SideArrays] = []
        for itf in mesh.interfaces:
            for (ea, fa, eb, fb, sgn) in (
                (itf.elem_a, itf.facet_a, itf.elem_b, itf.facet_b, 1.0),
                (itf.elem_b, itf.facet_b, itf.elem_a, itf.facet_a, -1.0),
            ):
                fa_data = elems[ea].facets[fa]
                fb_data = elems[eb].facets[fb]
                xa = elems[ea].coords[fa_data.nodes] + sgn * np.asarray(itf.shift)
                xb = elems[eb].coords[fb_data.nodes]
                dist, perm = cKDTree(xb).query(xa)
                if np.max(dist) > tol or len(set(perm)) != perm.size:
                    raise ValueError(
                        f"interface ({ea},{fa})<->({eb},{fb}): facet nodes do not "
                        f"match (max offset {np.max(dist):.3e})"
                    )
                a = fa_data.B * (fa_data.scaled_normal @ self.c)
                sides.append(
                    _SideArrays(
                        rows=ea * n_p + fa_data.nodes,
                        neighbor=eb * n_p + fb_data.nodes[perm],
                        a=a,
                    )
                )
        self.rows_all = np.concatenate([s.rows for s in sides])
        self.nb_all = np.concatenate([s.neighbor for s in sides])
        a_all = np.concatenate([s.a for s in sides])
        if cfg.sat == "upwind":
            tau = np.maximum(-a_all, 0.0)
        else:
            tau = -0.5 * a_all
        self.sat_coef = tau / self.h_flat[self.rows_all]
        self._pool = (
            ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
        )

    # -- core evaluations ---------------------------------------------------

    def _volume_block(self, rows: np.ndarray, ops, u2: np.ndarray) -> np.ndarray:
        ue = u2[rows]
        out = np.zeros_like(ue)
        for i in range(self.cfg.d):
            out -= self.c[i] * (ops[i] @ ue.T).T
        return out

    def residual(self, u: np.ndarray) -> np.ndarray:
        """du/dt for the flat state vector (length ne * n_p)."""
        u2 = u.reshape(self.ne, self.n_p)
        r2 = np.empty_like(u2)
        if self._pool is None or len(self.classes) == 1:
            for rows, ops in self.classes:
                r2[rows] = self._volume_block(rows, ops, u2)
        else:
            futures = [
                (rows, self._pool.submit(self._volume_block, rows, ops, u2))
                for rows, ops in self.classes
            ]
            for rows, fut in futures:
                r2[rows] = fut.result()
        r = r2.ravel()
        jump = u[self.nb_all] - u[self.rows_all]
        r += np.bincount(self.rows_all, weights=self.sat_coef * jump,
                         minlength=self.dof)
        return r

    def energy(self, u: np.ndarray) -> float:
        return float(np.dot(u * u, self.h_flat))

    def exact_field(self, t: float) -> np.ndarray:
        return exact_solution(self.coords, t, self.cfg).ravel()

    def h_norm(self, e: np.ndarray) -> float:
        return math.sqrt(float(np.dot(e * e, self.h_flat)))

    def default_dt(self) -> float:
        h_min = float(np.min(self.mesh.nominal_sizes()))
        speed = float(np.linalg.norm(self.c))
        cfl = self.cfg.cfl
        if cfl is None:
            cfl = _default_cfl(self.op.family, self.op.n1)
        return cfl * h_min / speed

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()


def rk4_step(u: np.ndarray, dt: float, rhs) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    k1 = rhs(u)
    k2 = rhs(u + 0.5 * dt * k1)
    k3 = rhs(u + 0.5 * dt * k2)
    k4 = rhs(u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class SolveReport:
    """Final-time errors and the recorded energy history of one run."""

    d: int
    n_e: int
    dof: int
    dt: float
    steps: int
    h_norm_error: float
    linf_error: float
    energy: np.ndarray          # (steps+1, 2) columns (t, E)
    wall_time: float
    aborted: bool = False

    @property
    def energy_drift(self) -> float:
        return float(self.energy[-1, 1] - self.energy[0, 1])


def solve(
    mesh: Mesh,
    cfg: AdvectionConfig,
    op: SimplexOperator | None = None,
    disc: AdvectionDiscretization | None = None,
) -> SolveReport:
    """March the advection problem to ``cfg.t_final`` and measure errors."""
    if disc is None:
        if op is None:
            op = operator_for_config(cfg)
        disc = AdvectionDiscretization(mesh, op, cfg)
    dt = cfg.dt if cfg.dt is not None else disc.default_dt()
    steps = max(1, math.ceil(cfg.t_final / dt - 1e-12))
    dt = cfg.t_final / steps
    u = disc.exact_field(0.0)
    e0 = disc.energy(u)
    energy = [(0.0, e0)]
    t0 = time.perf_counter()
    aborted = False
    for n in range(steps):
        u = rk4_step(u, dt, disc.residual)
        e = disc.energy(u)
        energy.append(((n + 1) * dt, e))
        if not math.isfinite(e) or e > 10.0 * e0:
            aborted = True
            break
    wall = time.perf_counter() - t0
    if aborted:
        err_h = err_inf = math.inf
    else:
        diff = u - disc.exact_field(cfg.t_final)
        err_h = disc.h_norm(diff)
        err_inf = float(np.max(np.abs(diff)))
    disc.close()
    return SolveReport(
        d=cfg.d,
        n_e=mesh.n_elements,
        dof=disc.dof,
        dt=dt,
        steps=len(energy) - 1,
        h_norm_error=err_h,
        linf_error=err_inf,
        energy=np.array(energy),
        wall_time=wall,
        aborted=aborted,
    )


@dataclass(frozen=True)
class ConvergenceRow:
    n_e: int
    dof: int
    h: float
    h_norm_error: float
    linf_error: float
    rate: float | None       # incremental rate against the previous row


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: tuple[ConvergenceRow, ...]
    ls_rate: float | None    # least-squares slope; None when degenerate


def convergence_study(cfg: AdvectionConfig, meshes: list[Mesh]) -> ConvergenceStudy:
    """Run a mesh sequence and fit the observed convergence rate."""
    rows: list[ConvergenceRow] = []
    for mesh in meshes:
        rep = solve(mesh, cfg)
        h = rep.n_e ** (-1.0 / cfg.d)
        rate = None
        if rows:
            prev = rows[-1]
            if rep.h_norm_error > 0 and prev.h_norm_error > 0:
                rate = math.log(prev.h_norm_error / rep.h_norm_error) / math.log(
                    prev.h / h
                )
        rows.append(
            ConvergenceRow(
                n_e=rep.n_e,
                dof=rep.dof,
                h=h,
                h_norm_error=rep.h_norm_error,
                linf_error=rep.linf_error,
                rate=rate,
            )
        )
    errs = np.array([r.h_norm_error for r in rows])
    hs = np.array([r.h for r in rows])
    if np.any(errs <= 0) or not np.all(np.isfinite(errs)) or len(rows) < 2:
        ls_rate = None
    else:
        ls_rate = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return ConvergenceStudy(rows=tuple(rows), ls_rate=ls_rate)


@dataclass(frozen=True)
class MaxDtResult:
    dt_max: float
    trace: tuple[tuple[float, float, bool], ...]   # (dt, energy change, stable)


def max_stable_dt(
    mesh: Mesh,
    cfg: AdvectionConfig,
    t_test: float = 5.0,
    bracket: tuple[float, float] = (1e-4, 1e-1),
    rel_width: float = 1e-3,
    max_doublings: int = 60,
) -> MaxDtResult:
    """Largest dt whose energy change stays nonpositive after ``t_test``.

    Golden-section shrinking of a stable/unstable bracket; the bracket is
    first expanded by doubling/halving if its ends do not classify as
    expected. Returns the largest verified-stable probe.
    """
    op = operator_for_config(cfg)
    disc = AdvectionDiscretization(mesh, op, cfg)
    trace: list[tuple[float, float, bool]] = []

    def stable(dt: float) -> bool:
        steps = max(1, round(t_test / dt))
        u = disc.exact_field(0.0)
        e0 = disc.energy(u)
        de = math.inf
        for _ in range(steps):
            u = rk4_step(u, dt, disc.residual)
            e = disc.energy(u)
            if not math.isfinite(e) or e > 10.0 * e0:
                de = math.inf
                break
            de = e - e0
        ok = de <= 0.0
        trace.append((dt, de, ok))
        return ok

    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < dt_lo < dt_hi")
    for _ in range(max_doublings):
        if stable(lo):
            break
        hi = lo
        lo /= 2.0
    else:
        raise RuntimeError("no stable lower bracket found")
    for _ in range(max_doublings):
        if not stable(hi):
            break
        lo = hi
        hi *= 2.0
    else:
        raise RuntimeError("no unstable upper bracket found")

    while (hi - lo) > rel_width * lo:
        probe = hi - _GOLDEN * (hi - lo)
        if stable(probe):
            lo = probe
        else:
            hi = probe
    disc.close()
    return MaxDtResult(dt_max=lo, trace=tuple(trace))
