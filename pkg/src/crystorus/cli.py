"""Command line entry point: ``crystorus <verb> [options]``.

Exit codes: 0 success, 1 usage or schema error, 2 domain validation error,
3 numerical instability refusal.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from typing import Sequence, TextIO

import numpy as np

from . import bundle as bd
from . import crystal as cr
from . import exactalg as ea
from . import fixtures
from . import phonon as ph
from .config import ConfigError, CrystalConfig, load, section_from_spec

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_UNSTABLE = 0, 1, 2, 3


class Refusal(Exception):
    """Numerical instability; maps to exit code 3."""


def _load_config(args) -> CrystalConfig:
    if args.config and args.fixture:
        raise ConfigError("give either --config or --fixture, not both")
    if args.fixture:
        try:
            return fixtures.load_fixture(args.fixture)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
    if not args.config:
        raise ConfigError("--config <path> or --fixture <name> is required")
    try:
        return load(args.config)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None


def _vec(v) -> str:
    return "(" + ", ".join(str(x) for x in v) + ")"


def _emit(text: str, out: str | None, stdout: TextIO) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


# ---------------------------------------------------------------------------
# verbs


def cmd_analyze(cfg: CrystalConfig, args, stdout: TextIO) -> int:
    sg = cfg.space_group()
    pg = sg.point_group
    w = stdout.write
    w(f"config: {cfg.name}\n")
    w(f"dimension: {sg.dim}\n")
    w(f"point group order: {sg.order}\n")
    table = cr.cocycle_table(sg)
    nonzero = {k: v for k, v in table.items() if any(v)}
    if not nonzero:
        w("cocycle table: all zero\n")
    else:
        w(f"cocycle table: {len(nonzero)} nonzero entries\n")
        for (p, q), c in sorted(nonzero.items()):
            w(f"  c({p},{q}) = {_vec(c)}\n")
    rep = cr.verify_cocycle_identity(sg)
    verdict = "holds" if rep.ok else f"FAILS on {len(rep.violations)} triples"
    w(f"cocycle identity: {verdict} ({rep.triples_checked} triples)\n")
    sym = cr.is_symmorphic(sg)
    if sym.symmorphic:
        w(f"symmorphic: yes, witness shift t = {_vec(sym.origin_shift)}\n")
    else:
        w("symmorphic: no\n")
    for i in range(pg.order):
        w(f"  element {i}: A = {[list(r) for r in pg.elements[i]]}, a = {_vec(sg.translation(i))}\n")
    return EXIT_OK


def _gluing_csv(glue: bd.GluingReport, dglue: bd.DerivativeGluingReport | None) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["source", "target", "element", "section_residual", "lattice_vector",
                 "derivative_residual", "derivative_interior", "derivative_boundary"])
    dmap = {e.edge: e for e in (dglue.edges if dglue else ())}
    for e in glue.edges:
        de = dmap.get(e.edge)
        lat = " ".join(str(x) for x in e.lattice_vector) if e.lattice_vector is not None else ""
        row = [e.edge[0], e.edge[1], e.element, repr(e.max_residual), lat]
        row += [repr(de.residual), repr(de.interior_residual), repr(de.boundary_residual)] if de else ["", "", ""]
        wr.writerow(row)
    return buf.getvalue()


def cmd_holonomy(cfg: CrystalConfig, args, stdout: TextIO) -> int:
    if cfg.bundle is None:
        raise ConfigError("no [bundle] table", "bundle")
    sg = cfg.space_group()
    b = cfg.flat_bundle(sg)
    w = stdout.write
    w(f"config: {cfg.name}\n")
    rep = bd.validate_bundle(b)
    if not rep.ok:
        w("bundle: INVALID\n")
        for e in rep.inverse_violations:
            w(f"  edge {e}: reverse transition is not the inverse\n")
        for t in rep.triangle_violations:
            w(f"  triangle {t}: cocycle condition fails\n")
        return EXIT_DOMAIN
    w(f"bundle: valid ({b.base.n_charts} charts, {len(b.base.undirected_edges())} edges, "
      f"{len(b.base.triangles)} triangles)\n")
    root = cfg.bundle.basepoint
    loops = bd.loop_basis(b.base, root)
    w(f"holonomy generators at chart {root}: {len(loops)}\n")
    for loop in loops:
        charts = [loop[0][0]] + [e[1] for e in loop]
        w(f"  loop {' -> '.join(map(str, charts))}: {bd.holonomy(b, loop)}\n")
    fps = bd.equilibrium_sections(b, root)
    w(f"fixed points: {fps.describe()}\n")
    w(f"equilibrium sections: {'none' if fps.empty else 'exist'}\n")

    spec = cfg.bundle.section
    if spec is None:
        return EXIT_OK
    s = section_from_spec(b, spec, args.samples, root)
    glue = bd.check_section_gluing(b, s, tol=spec.tolerance)
    df = bd.covariant_differential(s)
    dglue = bd.check_derivative_gluing(b, df, tol=spec.tolerance)
    h = s.charts[0].step
    w(f"section: {len(s.charts)} charts, spacing h = {h!r}\n")
    w(f"section gluing: {'pass' if glue.passed else 'FAIL'}, max residual {glue.max_residual:.3e}\n")
    for e in glue.edges:
        lat = _vec(e.lattice_vector) if e.lattice_vector is not None else "inconsistent"
        w(f"  edge {e.edge} g={e.element}: residual {e.max_residual:.3e}, lattice vector {lat}\n")
    w(f"derivative gluing: max residual {dglue.max_residual:.3e} "
      f"(interior {dglue.interior_residual:.3e}, boundary {dglue.boundary_residual:.3e})\n")
    if args.out:
        _emit(_gluing_csv(glue, dglue), args.out, stdout)
    return EXIT_OK if glue.passed else EXIT_DOMAIN


def _elastic(cfg: CrystalConfig, args):
    rho, C, moduli = cfg.elastic_system()
    if moduli is not None and not args.allow_unstable:
        try:
            moduli.check()
        except ph.PhononError as exc:
            raise Refusal(f"stability conditions violated: {exc}") from None
    if args.project_invariant:
        R = cr.cartesian_representation(cfg.space_group())
        C = ph.project_invariant(C, R)
        rho = ph.project_invariant_density(rho, R)
    return rho, C


def cmd_dispersion(cfg: CrystalConfig, args, stdout: TextIO) -> int:
    if cfg.kpath is None:
        raise ConfigError("no [kpath] table", "kpath")
    rho, C = _elastic(cfg, args)
    samples = args.samples or cfg.kpath.samples
    table = ph.kpath_sweep(rho, C, cfg.kpath.waypoints, samples)
    if table.unstable and not args.allow_unstable:
        raise Refusal("negative squared frequency on the k-path; rerun with --allow-unstable to emit anyway")
    _emit(table.to_csv(), args.out, stdout)
    return EXIT_OK


def cmd_simulate(cfg: CrystalConfig, args, stdout: TextIO) -> int:
    sim = cfg.simulation
    if sim is None:
        raise ConfigError("no [simulation] table", "simulation")
    if len(sim.direction) != cfg.dim:
        raise ConfigError(f"direction must have {cfg.dim} entries", "simulation.direction")
    rho, C = _elastic(cfg, args)
    if not 0 <= sim.branch < rho.dim:
        raise ConfigError(f"branch must be below {rho.dim}", "simulation.branch")
    cfl = args.cfl if args.cfl is not None else sim.cfl
    state = ph.plane_wave_state(rho, C, sim.direction, sim.n, sim.length, sim.mode, sim.branch, sim.amplitude)
    dt_max = ph.stable_dt(rho, C, state, cfl)
    dt = sim.dt if sim.dt is not None else dt_max
    if not np.isfinite(dt):
        raise Refusal("no finite time step: the sound speed along the direction is zero")
    try:
        traj = ph.simulate_wave(rho, C, state, dt, sim.steps, cfl)
    except ph.CFLViolation as exc:
        raise Refusal(f"dt = {exc.dt:.6g} violates the stability bound at CFL {cfl}; "
                      f"suggested dt <= {exc.dt_max:.6g}") from None
    report = stdout if args.out else args.stderr
    _emit(traj.energy_csv(), args.out, stdout)
    r = report.write
    r(f"config: {cfg.name}\n")
    r(f"grid n = {sim.n}, dt = {dt:.6g}, steps = {sim.steps}\n")
    r(f"relative energy drift: {traj.relative_drift:.3e}\n")
    for j, (obs, pred) in enumerate(zip(traj.observed_omegas, traj.predicted_omegas)):
        if obs == 0:
            r(f"  branch {j}: not excited, predicted {pred:.6g}\n")
            continue
        rel = abs(obs - pred) / pred if pred else float("nan")
        r(f"  branch {j}: observed {obs:.6g}, predicted {pred:.6g}, relative error {rel:.2e}\n")
    return EXIT_OK


def cmd_fixtures(args, stdout: TextIO) -> int:
    if args.action == "list":
        for name in fixtures.names():
            stdout.write(f"{name}\t{fixtures.describe(name)}\n")
        return EXIT_OK
    if not args.name:
        raise ConfigError("fixtures dump needs a fixture name")
    try:
        cfg = fixtures.load_fixture(args.name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    _emit(cfg.to_toml(), args.out, stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# dispatch


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a TOML configuration")
    common.add_argument("--fixture", help="use a built-in fixture instead of --config")
    common.add_argument("--out", help="write CSV or TOML output here instead of stdout")
    common.add_argument("--allow-unstable", action="store_true", help="emit output despite instability")
    common.add_argument("--project-invariant", action="store_true",
                        help="average the elastic data over the point group first")
    common.add_argument("--samples", type=int, help="samples per k-path segment or per unit length of the base")
    common.add_argument("--cfl", type=float, help="Courant number for the simulation")

    parser = argparse.ArgumentParser(prog="crystorus", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("analyze", parents=[common], help="space-group cocycle and symmorphicity report")
    sub.add_parser("holonomy", parents=[common], help="bundle holonomy and section gluing report")
    sub.add_parser("dispersion", parents=[common], help="k-path dispersion table as CSV")
    sub.add_parser("simulate", parents=[common], help="leapfrog plane-wave run with energy CSV")
    fx = sub.add_parser("fixtures", parents=[common], help="list or dump built-in configurations")
    fx.add_argument("action", choices=["list", "dump"])
    fx.add_argument("name", nargs="?")
    return parser


_VERBS = {
    "analyze": cmd_analyze,
    "holonomy": cmd_holonomy,
    "dispersion": cmd_dispersion,
    "simulate": cmd_simulate,
}


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.samples is not None and args.samples < 1:
        stderr.write("error: --samples must be positive\n")
        return EXIT_USAGE
    if args.cfl is not None and args.cfl <= 0:
        stderr.write("error: --cfl must be positive\n")
        return EXIT_USAGE
    args.stderr = stderr
    try:
        if args.verb == "fixtures":
            return cmd_fixtures(args, stdout)
        cfg = _load_config(args)
        return _VERBS[args.verb](cfg, args, stdout)
    except ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_USAGE
    except Refusal as exc:
        stderr.write(f"refused: {exc}\n")
        return EXIT_UNSTABLE
    except (cr.CrystalError, bd.BundleError, ph.PhononError, ea.DimensionError, ValueError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
