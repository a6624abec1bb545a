"""Command-line driver: build, verify, mesh, solve, converge, maxdt, sparsity.

Conventions shared by all subcommands:

* output directory: ``--outdir`` flag, else the ``SPLITSBP_OUTDIR``
  environment variable, else the current directory;
* an optional JSON config file (``--config``) supplies flag defaults;
  explicit flags win;
* CSV files carry 17 significant digits and no timestamps, so identical
  configurations produce byte-identical files; human summaries print 4-6
  digits;
* figures (PNG) are rendered next to each CSV unless ``--no-plots``;
* exit codes: 0 success, 1 invalid usage/parameters, 2 numerical check
  failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import advect, plots
from .assembly import (
    AssemblyError,
    assemble,
    sparsity_stats,
    verify_simplex_operator,
)
from .exchange import read_operator, write_operator
from .mesh import (
    MeshError,
    quality_report,
    read_mesh,
    uniform_tet_mesh,
    uniform_tri_mesh,
    perturb_mesh_2d,
    perturb_mesh_3d,
    write_mesh,
)
from .oned import ConstructionError, build_csbp_operator, build_lgl_operator

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _outdir(args) -> Path:
    out = args.outdir or os.environ.get("SPLITSBP_OUTDIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_fmt(v) if isinstance(v, float) else v for v in row]
            )


def _operator_from_args(args):
    if getattr(args, "operator_file", None):
        return read_operator(args.operator_file)
    family = args.family.lower()
    if family == "lgl":
        if args.p < 1:
            raise UsageError("LGL operators need degree >= 1")
        n1 = args.n1 or (args.p + args.d)
        return assemble(args.d, build_lgl_operator(n1))
    if family == "csbp":
        if args.d != 2:
            raise UsageError("csbp operators are only assembled on triangles (d=2)")
        if args.p != 1:
            raise UsageError("csbp runs are limited to the p=1 family")
        return assemble(args.d, build_csbp_operator(args.n1 or 8))
    raise UsageError(f"unknown family {args.family!r}")


def _mesh_from_args(args):
    if getattr(args, "mesh_file", None):
        return read_mesh(args.mesh_file)
    if args.d == 2:
        mesh = uniform_tri_mesh(args.nx, args.ny or args.nx)
        if args.alpha is not None:
            mesh = perturb_mesh_2d(mesh, args.alpha)
    else:
        mesh = uniform_tet_mesh(args.nx)
        if args.alpha is not None:
            mesh = perturb_mesh_3d(mesh, args.alpha)
    return mesh


def _advect_config(args) -> advect.AdvectionConfig:
    return advect.AdvectionConfig(
        d=args.d,
        degree=args.p,
        family=args.family.lower(),
        n1=args.n1,
        omega=args.omega,
        t_final=args.t_final,
        cfl=args.cfl,
        dt=args.dt,
        sat=args.sat,
        threads=args.threads,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(args) -> int:
    op = _operator_from_args(args)
    out = _outdir(args)
    path = Path(args.output) if args.output else out / (
        f"operator_{op.family}_d{op.d}_n1{op.n1}.ops"
    )
    write_operator(op, path)
    stats = sparsity_stats(op)
    print(
        f"{op.family} d={op.d} n1={op.n1} degree={op.degree}: "
        f"n_p={op.n_nodes}, nnz={stats.nnz_actual} "
        f"(estimate {stats.nnz_estimate}), sparsity {stats.s_actual:.4f}"
    )
    print(f"wrote {path}")
    if not args.no_plots:
        print(f"wrote {plots.save_operator_nodes_plot(op, path.with_suffix('.png'))}")
    return EXIT_OK


def cmd_verify(args) -> int:
    op = _operator_from_args(args)
    rep = verify_simplex_operator(op)
    for line in rep.lines():
        print(line)
    print(f"{'PASS' if rep.passed else 'FAIL'}  {rep.subject}")
    return EXIT_OK if rep.passed else EXIT_NUMERICAL


def cmd_mesh(args) -> int:
    mesh = _mesh_from_args(args)
    q = quality_report(mesh)
    out = _outdir(args)
    stem = f"mesh_d{args.d}_{args.nx}" + (f"_a{args.alpha}" if args.alpha else "")
    mesh_path = out / f"{stem}.mesh"
    write_mesh(mesh, mesh_path)
    rows = [
        [k, q.aspect[k], q.aspect_normalized[k]]
        + ([q.max_angle_deg[k]] if mesh.d == 2 else [])
        for k in range(mesh.n_elements)
    ]
    header = ["element", "aspect", "aspect_normalized"] + (
        ["max_angle_deg"] if mesh.d == 2 else []
    )
    csv_path = out / f"{stem}_quality.csv"
    _write_csv(csv_path, header, rows)
    print(
        f"{mesh.n_elements} elements, {len(mesh.interfaces)} interfaces; "
        f"max aspect {q.max_aspect:.1f} (normalized {q.max_aspect_normalized:.1f})"
        + (f", max angle {q.max_angle:.2f} deg" if mesh.d == 2 else "")
    )
    print(f"wrote {mesh_path}")
    print(f"wrote {csv_path}")
    if not args.no_plots:
        print(f"wrote {plots.save_mesh_plot(mesh, q, out / f'{stem}.png')}")
    return EXIT_OK


def cmd_solve(args) -> int:
    mesh = _mesh_from_args(args)
    cfg = _advect_config(args)
    report = advect.solve(mesh, cfg)
    out = _outdir(args)
    stem = f"solve_d{args.d}_p{args.p}_ne{report.n_e}"
    energy_path = out / f"{stem}_energy.csv"
    _write_csv(
        energy_path, ["t", "energy"], [[t, e] for t, e in report.energy]
    )
    summary_path = out / f"{stem}_summary.csv"
    _write_csv(
        summary_path,
        ["n_e", "dof", "dt", "steps", "h_norm_error", "linf_error", "aborted"],
        [[report.n_e, report.dof, report.dt, report.steps,
          report.h_norm_error, report.linf_error, int(report.aborted)]],
    )
    print(
        f"n_e={report.n_e} dof={report.dof} dt={report.dt:.4e} "
        f"steps={report.steps} t={cfg.t_final:g}"
    )
    if report.aborted:
        print("run ABORTED: energy grew beyond 10x the initial energy")
    else:
        print(
            f"H-norm error {report.h_norm_error:.6e}, "
            f"max error {report.linf_error:.6e}, "
            f"energy drift {report.energy_drift:.3e}"
        )
    print(f"wrote {energy_path}")
    print(f"wrote {summary_path}")
    if not args.no_plots:
        print(f"wrote {plots.save_energy_plot(report.energy, out / f'{stem}_energy.png')}")
    return EXIT_NUMERICAL if report.aborted else EXIT_OK


def cmd_converge(args) -> int:
    sizes = [int(s) for s in args.meshes.split(",")]
    if len(sizes) < 2:
        raise UsageError("need at least two mesh sizes, e.g. --meshes 20,30,40")
    cfg = _advect_config(args)
    meshes = [
        uniform_tri_mesh(n, n) if args.d == 2 else uniform_tet_mesh(n)
        for n in sizes
    ]
    study = advect.convergence_study(cfg, meshes)
    out = _outdir(args)
    stem = f"converge_d{args.d}_p{args.p}"
    rows = [
        [r.n_e, r.dof, r.h, r.h_norm_error, r.linf_error,
         "" if r.rate is None else _fmt(r.rate)]
        for r in study.rows
    ]
    csv_path = out / f"{stem}.csv"
    _write_csv(
        csv_path, ["n_e", "dof", "h", "h_norm_error", "linf_error", "rate"], rows
    )
    print(f"{'n_e':>8s} {'dof':>9s} {'H-norm':>12s} {'max':>12s} {'rate':>6s}")
    for r in study.rows:
        rate = "--" if r.rate is None else f"{r.rate:.2f}"
        print(
            f"{r.n_e:8d} {r.dof:9d} {r.h_norm_error:12.4e} "
            f"{r.linf_error:12.4e} {rate:>6s}"
        )
    if study.ls_rate is None:
        print("least-squares rate: undefined (degenerate error sequence)")
    else:
        print(f"least-squares rate: {study.ls_rate:.2f}")
    print(f"wrote {csv_path}")
    if not args.no_plots:
        prows = [
            (r.n_e, r.dof, r.h, r.h_norm_error, r.linf_error) for r in study.rows
        ]
        print(f"wrote {plots.save_convergence_plot(prows, out / f'{stem}.png')}")
    return EXIT_OK


def cmd_maxdt(args) -> int:
    if args.dt_lo >= args.dt_hi:
        raise UsageError("--dt-lo must be smaller than --dt-hi")
    mesh = _mesh_from_args(args)
    cfg = _advect_config(args)
    result = advect.max_stable_dt(
        mesh, cfg, t_test=args.t_test, bracket=(args.dt_lo, args.dt_hi)
    )
    out = _outdir(args)
    stem = f"maxdt_d{args.d}_p{args.p}"
    csv_path = out / f"{stem}.csv"
    _write_csv(
        csv_path,
        ["probe", "dt", "energy_change", "stable"],
        [[i, dt, de, int(ok)] for i, (dt, de, ok) in enumerate(result.trace)],
    )
    print(f"max stable dt = {result.dt_max:.6g}  ({len(result.trace)} probes)")
    print(f"wrote {csv_path}")
    if not args.no_plots:
        print(f"wrote {plots.save_maxdt_plot(result.trace, out / f'{stem}.png')}")
    return EXIT_OK


def cmd_sparsity(args) -> int:
    op = _operator_from_args(args)
    stats = sparsity_stats(op)
    out = _outdir(args)
    csv_path = out / f"sparsity_{op.family}_d{op.d}_n1{op.n1}.csv"
    _write_csv(
        csv_path,
        ["d", "n1", "n_p", "nnz_actual", "nnz_estimate", "s_actual", "s_formula"],
        [[stats.d, stats.n1, stats.n_p, stats.nnz_actual, stats.nnz_estimate,
          stats.s_actual, stats.s_formula]],
    )
    print(
        f"d={stats.d} n1={stats.n1}: n_p={stats.n_p}, "
        f"nnz={stats.nnz_actual} (estimate {stats.nnz_estimate}), "
        f"s={stats.s_actual:.4f} (formula {stats.s_formula:.4f})"
    )
    print(f"wrote {csv_path}")
    if not args.no_plots:
        print(f"wrote {plots.save_spy_plot(op, csv_path.with_suffix('.png'))}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def _add_common(sp, mesh_opts=False, advect_opts=False):
    sp.add_argument("-d", type=int, default=2, choices=(2, 3), help="dimension")
    sp.add_argument("--family", default="lgl", help="operator family (lgl, csbp)")
    sp.add_argument("-p", type=int, default=1, help="operator degree")
    sp.add_argument("--n1", type=int, default=None,
                    help="1D node count override (csbp refinement)")
    sp.add_argument("--outdir", default=None, help="output directory")
    sp.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    if mesh_opts:
        sp.add_argument("--nx", type=int, default=4, help="cells per direction")
        sp.add_argument("--ny", type=int, default=None, help="cells in y (2D only)")
        sp.add_argument("--alpha", type=float, default=None,
                        help="distortion parameter; omit for a uniform mesh")
        sp.add_argument("--mesh-file", default=None, help="read mesh from file")
    if advect_opts:
        sp.add_argument("--omega", type=int, default=None, help="wavenumber")
        sp.add_argument("--t-final", type=float, default=1.0, dest="t_final")
        sp.add_argument("--cfl", type=float, default=None)
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--sat", default="upwind", choices=("upwind", "central"))
        sp.add_argument("--threads", type=int, default=1)


def build_parser() -> _Parser:
    parser = _Parser(prog="splitsbp", description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None,
                        help="JSON file of flag defaults (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("build", help="assemble an operator and write it to a file")
    _add_common(sp)
    sp.add_argument("-o", "--output", default=None, help="operator file path")
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("verify", help="run the invariant suite on an operator")
    _add_common(sp)
    sp.add_argument("--operator-file", default=None, help="verify a stored operator")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("mesh", help="generate a periodic mesh and quality report")
    _add_common(sp, mesh_opts=True)
    sp.set_defaults(func=cmd_mesh)

    sp = sub.add_parser("solve", help="run the advection problem on one mesh")
    _add_common(sp, mesh_opts=True, advect_opts=True)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("converge", help="grid convergence study")
    _add_common(sp, advect_opts=True)
    sp.add_argument("--meshes", default="20,30,40",
                    help="comma-separated cells per direction")
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("maxdt", help="golden-section search for the stable dt")
    _add_common(sp, mesh_opts=True, advect_opts=True)
    sp.add_argument("--t-test", type=float, default=5.0, dest="t_test")
    sp.add_argument("--dt-lo", type=float, default=1e-4, dest="dt_lo")
    sp.add_argument("--dt-hi", type=float, default=1e-1, dest="dt_hi")
    sp.set_defaults(func=cmd_maxdt)

    sp = sub.add_parser("sparsity", help="sparsity accounting for one operator")
    _add_common(sp)
    sp.set_defaults(func=cmd_sparsity)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # pre-scan for --config so file values become defaults, flags override
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        try:
            defaults = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {cfg_path}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        for action in parser._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, MeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AssemblyError, ConstructionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
