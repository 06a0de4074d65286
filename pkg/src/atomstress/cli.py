"""``atomstress`` command-line entry point.

Exit status: 0 success, 1 usage or configuration error, 2 numerical failure
(and, for ``distgeo check``, a non-embeddable table).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .core import GeometryError, Snapshot, Trajectory, build_fcc_lattice, carve_plate_with_hole
from .distgeo import SquaredDistanceSet, embeddability_check
from .dynamics import IntegratorConfig, MinimizerConfig, NumericalFailure, initialize_velocities, iter_nve, minimize
from .elasticity import CubicConstants, kirsch_anisotropic
from .estimators import FieldGrid, PlanarProbe, da_stress, hardy_stress, tsai_traction, virial_stress_many
from .io import TrajectoryFormatError, read_xyz, write_csv, write_xyz
from .potentials import SingularityError, model_from_config
from .runconfig import ConfigError, load_config
from .weighting import weighting_from_config

log = logging.getLogger("atomstress")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def resolve_threads(requested: int | None) -> int:
    """``--threads`` wins over ``ATOMSTRESS_THREADS``; the engine itself runs on one thread."""
    if requested is None:
        env = os.environ.get("ATOMSTRESS_THREADS", "").strip()
        if not env:
            return 1
        try:
            requested = int(env)
        except ValueError:
            raise UsageError(f"ATOMSTRESS_THREADS={env!r} is not an integer") from None
    if requested < 1:
        raise UsageError("thread count must be at least 1")
    return requested


def _config(args, experiment=None, full_plate=False):
    cfg = load_config(args.config, experiment=experiment, full_plate=full_plate)
    if args.seed is not None:
        cfg.set("md", "seed", args.seed)
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------ subcommands


def cmd_gen(args):
    cfg = _config(args)
    a = args.a if args.a is not None else cfg["experiment"]["lattice_constant"]
    periodic = tuple(c == "p" for c in args.boundary)
    s = build_fcc_lattice(*args.cells, a, periodic=periodic)
    if args.hole > 0:
        L = s.cell.lengths
        s = carve_plate_with_hole(s, 0.5 * L[:2], args.hole * a)
    if args.temperature > 0:
        s = initialize_velocities(s, args.temperature, cfg["md"]["seed"])
    out = _outdir(args)
    cfg.echo(out)
    write_xyz(out / args.name, [Snapshot(0.0, s)])
    print(f"{s.n} particles -> {out / args.name}")


def _last_state(path):
    traj = read_xyz(path)
    return traj[-1].state


def cmd_md(args):
    cfg = _config(args)
    model = model_from_config(cfg["potential"])
    md = cfg["md"]
    state = _last_state(args.input)
    if args.temperature is not None:
        state = initialize_velocities(state, args.temperature, md["seed"])
    ic = IntegratorConfig(md["dt"], md["steps"], md["stride"], md["seed"], md["skin"])
    out = _outdir(args)
    cfg.echo(out)
    snaps, rows = [], []
    for snap in iter_nve(state, model, ic):
        snaps.append(Snapshot(snap.time, snap.state))
        ke = snap.state.kinetic_energy()
        rows.append([snap.time, snap.report.energy, ke, snap.report.energy + ke])
    write_xyz(out / "trajectory.xyz", snaps)
    write_csv(out / "energy.csv", ["time", "potential", "kinetic", "total"], rows)
    print(f"{len(snaps)} frames -> {out / 'trajectory.xyz'}")


def cmd_minimize(args):
    cfg = _config(args)
    model = model_from_config(cfg["potential"])
    mc = cfg["minimize"]
    res = minimize(_last_state(args.input), model, MinimizerConfig(ftol=mc["ftol"], maxiter=mc["maxiter"]))
    out = _outdir(args)
    cfg.echo(out)
    write_xyz(out / "minimized.xyz", [Snapshot(0.0, res.state)])
    print(f"converged={res.converged} iterations={res.iterations} energy={res.energy:.17g} fmax={res.fmax:.3g}")
    if not res.converged:
        raise NumericalFailure("minimizer did not reach the force tolerance")


def _window(traj: Trajectory, args) -> Trajectory:
    if args.tau is None:
        return traj
    w = traj.window(args.t0, args.tau)
    if len(w) == 0:
        raise UsageError(f"no snapshots in [{args.t0}, {args.t0 + args.tau}]")
    return w


def _points(args, cell) -> np.ndarray:
    if args.at:
        return np.array(args.at, dtype=float)
    n = np.array(args.grid, dtype=int)
    L = cell.lengths
    spacing = L / n
    return FieldGrid.regular(cell.origin + 0.5 * spacing, spacing, n).points


def cmd_stress(args):
    cfg = _config(args)
    model = model_from_config(cfg["potential"])
    traj = _window(read_xyz(args.input), args)
    pts = _points(args, traj[0].state.cell)
    r = 0.5 * args.diameter
    if args.estimator == "virial":
        f = virial_stress_many(traj, pts, r, model)
    else:
        wf = weighting_from_config(cfg["weighting"], r)
        fn = hardy_stress if args.estimator == "hardy" else da_stress
        f = fn(traj, wf, FieldGrid(pts), model)
    header, rows = f.csv_header(), list(f.csv_rows())
    out = _outdir(args)
    cfg.echo(out)
    write_csv(out / f"stress_{args.estimator}.csv", header, rows)
    print(f"{len(rows)} points -> {out / f'stress_{args.estimator}.csv'}")


def cmd_traction(args):
    cfg = _config(args)
    model = model_from_config(cfg["potential"])
    traj = _window(read_xyz(args.input), args)
    probe = PlanarProbe.square(args.center, args.normal, args.width)
    sample = tsai_traction(traj, probe, model)
    out = _outdir(args)
    cfg.echo(out)
    write_csv(out / "traction.csv", sample.CSV_HEADER, [sample.csv_row()])
    print(" ".join(f"{v:.10g}" for v in sample.total))


KIRSCH_HEADER = ["x1", "x2", "u1", "u2", "sigma11", "sigma22", "sigma12"]


def cmd_ref_kirsch(args):
    c = CubicConstants(args.c11, args.c12, args.c44)
    extent = args.extent if args.extent is not None else 4.0 * args.radius
    g = np.linspace(-extent, extent, args.grid)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    f = kirsch_anisotropic(c, args.sigma, args.radius, pts)
    rows = [
        [p[0], p[1], u[0], u[1], s[0, 0], s[1, 1], s[0, 1]]
        for p, u, s in zip(pts, f.displacement, f.stress)
    ]
    if args.out is None:
        write_csv(sys.stdout, KIRSCH_HEADER, rows)
    else:
        write_csv(_outdir(args) / "kirsch.csv", KIRSCH_HEADER, rows)


def cmd_distgeo_check(args):
    d = np.loadtxt(args.table, delimiter=",", ndmin=2)
    verdict = embeddability_check(SquaredDistanceSet.from_distances(d), tolerance=args.tolerance)
    if verdict:
        print("embeddable")
        return EXIT_OK
    cond, idx, chi = verdict.first_violated
    print(f"not embeddable: condition {cond} fails on points {idx} (chi={chi:.6g})")
    return EXIT_NUMERICAL


def cmd_experiment(args):
    from .experiments import run_experiment

    cfg = _config(args, experiment=args.number, full_plate=args.full_plate)
    res = run_experiment(args.number, cfg, _outdir(args))
    for k, v in res.summary.items():
        print(f"{k}: {v}")


# ------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI file with [potential] [weighting] [md] [minimize] [grid] [experiment]")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads (fallback: ATOMSTRESS_THREADS)")
    common.add_argument("--seed", type=int, help="overrides [md] seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="atomstress", description="Continuum stress fields from particle data.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="generate an fcc crystal (optionally a plate with a hole)")
    g.add_argument("--cells", type=int, nargs=3, default=[10, 10, 10])
    g.add_argument("--a", type=float, help="lattice constant (default: [experiment] lattice_constant)")
    g.add_argument("--boundary", default="ppp", help="p or f per axis, e.g. ffp")
    g.add_argument("--hole", type=float, default=0.0, help="hole radius in lattice constants")
    g.add_argument("--temperature", type=float, default=0.0)
    g.add_argument("--name", default="structure.xyz")
    g.set_defaults(func=cmd_gen)

    m = sub.add_parser("md", parents=[common], help="NVE run from the last frame of an XYZ file")
    m.add_argument("input")
    m.add_argument("--temperature", type=float, help="re-draw velocities at this temperature")
    m.set_defaults(func=cmd_md)

    mn = sub.add_parser("minimize", parents=[common], help="FIRE relaxation of the last frame")
    mn.add_argument("input")
    mn.set_defaults(func=cmd_minimize)

    st = sub.add_parser("stress", parents=[common], help="Hardy, virial or DA stress of a trajectory")
    st.add_argument("input")
    st.add_argument("--estimator", choices=["hardy", "virial", "da"], default="hardy")
    st.add_argument("--diameter", type=float, required=True, help="averaging-domain diameter")
    where = st.add_mutually_exclusive_group(required=True)
    where.add_argument("--at", type=float, nargs=3, action="append", metavar=("X", "Y", "Z"))
    where.add_argument("--grid", type=int, nargs=3, metavar=("NX", "NY", "NZ"))
    st.add_argument("--t0", type=float, default=0.0)
    st.add_argument("--tau", type=float, help="averaging window length (default: whole trajectory)")
    st.set_defaults(func=cmd_stress)

    tr = sub.add_parser("traction", parents=[common], help="Tsai traction on a square plane")
    tr.add_argument("input")
    tr.add_argument("--center", type=float, nargs=3, required=True)
    tr.add_argument("--normal", type=float, nargs=3, required=True)
    tr.add_argument("--width", type=float, required=True)
    tr.add_argument("--t0", type=float, default=0.0)
    tr.add_argument("--tau", type=float)
    tr.set_defaults(func=cmd_traction)

    ref = sub.add_parser("ref", help="reference elasticity solutions")
    rsub = ref.add_subparsers(dest="solution", required=True, parser_class=_Parser)
    k = rsub.add_parser("kirsch", parents=[common], help="plate with a hole, cubic crystal, CSV field")
    k.set_defaults(out=None)
    k.add_argument("--c11", type=float, required=True)
    k.add_argument("--c12", type=float, required=True)
    k.add_argument("--c44", type=float, required=True)
    k.add_argument("--sigma", type=float, default=1.0)
    k.add_argument("--radius", type=float, default=1.0)
    k.add_argument("--grid", type=int, default=41, help="points per axis")
    k.add_argument("--extent", type=float, help="half-width of the square grid (default 4 radii)")
    k.set_defaults(func=cmd_ref_kirsch)

    dg = sub.add_parser("distgeo", help="distance-geometry tools")
    dsub = dg.add_subparsers(dest="tool", required=True, parser_class=_Parser)
    ck = dsub.add_parser("check", parents=[common], help="is an n x n distance table embeddable in R^3")
    ck.add_argument("table")
    ck.add_argument("--tolerance", type=float, default=1e-8)
    ck.set_defaults(func=cmd_distgeo_check)

    ex = sub.add_parser("experiment", parents=[common], help="run numerical experiment 1-4")
    ex.add_argument("number", type=int, choices=[1, 2, 3, 4])
    ex.add_argument("--full-plate", action="store_true", help="full-size plate for experiment 4")
    ex.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        threads = resolve_threads(args.threads)
        if threads > 1:
            log.info("requested %d threads; kernels run single-threaded", threads)
        status = args.func(args)
        return EXIT_OK if status is None else status
    except (UsageError, ConfigError, TrajectoryFormatError, FileNotFoundError) as exc:
        print(f"atomstress: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, SingularityError, FloatingPointError, GeometryError) as exc:
        print(f"atomstress: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"atomstress: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
