"""Command-line interface.

Subcommands: simulate, spectrum, extract, reduced, compare, diagnose,
pipeline, selftest.  Common flags: --config PATH, --output DIR, --resume,
--seed N, --threads N.  Configuration values may also be overridden through
environment variables prefixed KPSIM_ (KPSIM_GRID_NX=256 overrides grid.nx).

Exit codes: 0 ok, 2 config error, 3 numeric halt, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def _load_cfg(args):
    from .config import ConfigError, RunConfig, load_config

    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.output:
            cfg.experiment.output_dir = args.output
        if getattr(args, "seed", None) is not None:
            cfg.perturbation.seed = args.seed
        cfg.validate()
        return cfg
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        sys.exit(2)


def cmd_simulate(args) -> int:
    from . import kp2, pipeline, runio
    from .grid import Grid2D, RealField2D
    from .soliton import phi_c, split_initial_data

    user_cfg = _load_cfg(args)
    cfg, scale = user_cfg.normalized()
    g = cfg.grid
    grid = Grid2D(nx=g.nx, ny=g.ny, lx=g.lx, ly=g.ly)
    out_dir = os.path.join(user_cfg.experiment.output_dir, user_cfg.experiment.name)
    v0 = pipeline.make_perturbation(grid, cfg)
    c1, v_star = split_initial_data(v0, 2.0)
    X, _ = grid.meshgrid()
    u0 = RealField2D(grid, phi_c(X, c1[:, None]) + v_star.values)
    sol_cfg = kp2.SolverConfig(
        dt=cfg.solver.dt, t_end=cfg.solver.t_end, frame_speed=cfg.solver.frame_speed,
        snapshot_every=cfg.solver.snapshot_every, dealias=cfg.solver.dealias,
    )
    sink = runio.SnapshotSink(
        out_dir, cfg, scale, field_name="u",
        run_id=user_cfg.experiment.name, frame_speed=user_cfg.solver.frame_speed,
    )
    t0, state0 = 0.0, None
    if args.resume and os.path.exists(os.path.join(out_dir, "state_latest.json")):
        _, t0, state0 = runio.load_resume_state(out_dir, grid)
    try:
        series = kp2.run(u0, sol_cfg, sink=sink, t0=t0, state0=state0)
    except kp2.NumericsError as e:
        sink.mark(f"halted: {e}")
        print(f"numeric halt: {e}", file=sys.stderr)
        return 3
    series.to_csv(os.path.join(out_dir, "diagnostics.csv"))
    sink.mark("complete")
    print(out_dir)
    return 0


def cmd_spectrum(args) -> int:
    import numpy as np

    from . import report, resonant

    user_cfg = _load_cfg(args)
    out_dir = os.path.join(user_cfg.experiment.output_dir, user_cfg.experiment.name)
    os.makedirs(out_dir, exist_ok=True)
    etas = np.linspace(-args.eta_max, args.eta_max, args.n_eta)
    alpha = user_cfg.physics.alpha
    rows = []
    for eta in etas:
        lam = resonant.lam(eta)
        resid = resonant.eigen_residual(eta, alpha=alpha) if abs(eta) > resonant.SERIES_ETA else 0.0
        rows.append((eta, lam.real, lam.imag, resid))
    path = os.path.join(out_dir, "spectrum.csv")
    with open(path, "w") as fh:
        fh.write("eta,re_lambda,im_lambda,residual\n")
        for r in rows:
            fh.write(",".join(f"{v:.17g}" for v in r) + "\n")
    report.fig_eigenvalue_curve(
        [r[0] for r in rows],
        [complex(r[1], r[2]) for r in rows],
        [max(r[3], 1e-17) for r in rows],
        os.path.join(out_dir, "figures", "spectrum.png"),
    )
    print(path)
    return 0


def cmd_extract(args) -> int:
    import numpy as np

    from . import decomp, runio
    from .grid import forward, inverse, shift_x

    user_cfg = _load_cfg(args)
    cfg, scale = user_cfg.normalized()
    run_dir = args.run
    snaps = runio.list_snapshots(run_dir)
    if not snaps:
        print("no snapshots found", file=sys.stderr)
        return 2
    first, _, _ = runio.read_snapshot_internal(run_dir, snaps[0]["step"], scale, args.field)
    grid = first.grid
    solver = decomp.ModulationSolver(grid, cfg.physics.eta0, cfg.physics.L)
    out_dir = args.output or os.path.join(run_dir, "extract")
    os.makedirs(out_dir, exist_ok=True)
    guess = None
    summary = {"residual": [], "iterations": [], "norms": []}
    for snap in snaps:
        fld, t, _ = runio.read_snapshot_internal(run_dir, snap["step"], scale, args.field)
        v1m = None
        if args.v1_run:
            v1f, _, _ = runio.read_snapshot_internal(args.v1_run, snap["step"], scale, "v1")
            v1m = inverse(shift_x(forward(v1f), -4.0 * t))
        try:
            st = decomp.decompose(
                fld, t, v1m, solver, guess=guess,
                alpha=cfg.physics.alpha, z_cap=cfg.physics.z_cap,
            )
        except decomp.DecompositionError as e:
            print(f"extraction stopped at t={t}: {e}", file=sys.stderr)
            break
        guess = st.mod
        with open(os.path.join(out_dir, f"crest_{snap['step']:08d}.csv"), "w") as fh:
            fh.write("y,c,x\n")
            for j in range(grid.ny):
                fh.write(
                    f"{grid.y[j] * scale.y_factor:.17g},"
                    f"{st.mod.c.values[j] * scale.u_factor:.17g},"
                    f"{st.mod.x.values[j] * scale.x_factor:.17g}\n"
                )
        summary["residual"].append(st.residual)
        summary["iterations"].append(st.iterations)
        summary["norms"].append(st.v2.l2())
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print(out_dir)
    return 0


def cmd_reduced(args) -> int:
    import numpy as np

    from . import reduced
    from .decomp import ModulationState, YProfile
    from .grid import Grid2D
    from .pipeline import make_perturbation
    from .soliton import split_initial_data

    user_cfg = _load_cfg(args)
    cfg, scale = user_cfg.normalized()
    g = cfg.grid
    grid = Grid2D(nx=g.nx, ny=g.ny, lx=g.lx, ly=g.ly)
    out_dir = os.path.join(user_cfg.experiment.output_dir, user_cfg.experiment.name, "reduced")
    os.makedirs(out_dir, exist_ok=True)
    v0 = make_perturbation(grid, cfg)
    c1, _ = split_initial_data(v0, 2.0)
    mod = ModulationState(
        c=YProfile.from_values(c1, cfg.physics.eta0, grid.ly),
        x=YProfile(np.zeros(grid.ny), cfg.physics.eta0, grid.ly),
        t=0.0,
    )
    crest0 = reduced.crest_from_modulation(mod)
    states = reduced.run_reduced(crest0, dt=0.02, t_end=cfg.solver.t_end, record_every=25)
    path = os.path.join(out_dir, "series.csv")
    with open(path, "w") as fh:
        fh.write("t,y,b,x_y\n")
        for st in states:
            cprof, xy = reduced.modulation_from_crest(st)
            b = reduced.b_transform(cprof.values, grid.ly, cfg.physics.eta0)
            for j in range(grid.ny):
                fh.write(
                    f"{st.t * scale.t_factor:.17g},{grid.y[j] * scale.y_factor:.17g},"
                    f"{b[j]:.17g},{xy.values[j]:.17g}\n"
                )
    print(path)
    return 0


def cmd_compare(args) -> int:
    import csv
    import glob

    import numpy as np

    def read_full(path):
        """Extracted series: a directory of crest_<step>.csv (with the run
        manifest supplying step -> t), or a single CSV already carrying t."""
        if os.path.isdir(path):
            manifest = runio_read_manifest_nearby(path)
            t_of_step = {s["step"]: s["t"] for s in manifest["snapshots"]}
            rows = []
            for f in sorted(glob.glob(os.path.join(path, "crest_*.csv"))):
                step = int(os.path.basename(f)[6:-4])
                for r in csv.DictReader(open(f)):
                    r["t"] = t_of_step[step]
                    rows.append(r)
            return rows
        return list(csv.DictReader(open(path)))

    def runio_read_manifest_nearby(path):
        from . import runio

        parent = os.path.dirname(path.rstrip("/"))
        for cand in (os.path.join(path, "manifest.json"),
                     os.path.join(parent, "manifest.json"),
                     os.path.join(parent, "u", "manifest.json")):
            if os.path.exists(cand):
                return runio.read_manifest(cand)
        raise FileNotFoundError(f"no manifest.json next to {path}")

    red_path = args.reduced
    if os.path.isdir(red_path):
        red_path = os.path.join(red_path, "series.csv")
    full_rows = read_full(args.full)
    red_rows = list(csv.DictReader(open(red_path)))

    def series_by_t(rows, cols):
        out = {}
        for r in rows:
            out.setdefault(float(r["t"]), []).append([float(r[c]) for c in cols])
        return {t: np.array(v) for t, v in out.items()}

    full = series_by_t(full_rows, ["c"]) if full_rows and "c" in full_rows[0] else None
    red = series_by_t(red_rows, ["b", "x_y"])
    if full is None:
        print("full series must carry columns y,c,x", file=sys.stderr)
        return 2
    times = sorted(set(full) & set(red))
    if not times:
        print("no overlapping time stamps", file=sys.stderr)
        return 2
    out = args.output or "compare.csv"
    with open(out, "w") as fh:
        fh.write("t,err_c_l2,err_xy_l2,err_c_sup,err_xy_sup\n")
        for t in times:
            c_full = full[t][:, 0]
            b_red = red[t][:, 0]
            xy_red = red[t][:, 1]
            c_red = 2.0 + b_red  # leading-order inverse of the b-transform
            n = c_full.size
            dy = 1.0
            dc = c_full - c_red
            fh.write(
                f"{t:.17g},{np.sqrt(np.sum(dc**2)*dy):.17g},{np.sqrt(np.sum(xy_red**2)*dy):.17g},"
                f"{np.max(np.abs(dc)):.17g},{np.max(np.abs(xy_red)):.17g}\n"
            )
    print(out)
    return 0


def cmd_diagnose(args) -> int:
    from . import diagnostics, kp2, runio

    user_cfg = _load_cfg(args)
    cfg, scale = user_cfg.normalized()
    run_dir = args.run
    snaps = runio.list_snapshots(run_dir)
    fields = []
    for snap in snaps:
        fld, t, _ = runio.read_snapshot_internal(run_dir, snap["step"], scale, args.field)
        fields.append((t, fld))
    series = kp2.DiagnosticsSeries(
        columns=("t", "l2", "l3", "xnorm", "wnorm", "virial", "virial_dissip", "Q", "Qcompanion")
    )
    vir = diagnostics.virial_series(fields, eps=0.05, c1=2.0, x0=0.0)
    for (t, fld), row in zip(fields, vir.rows):
        series.append(
            t, fld.l2(), fld.lp(3.0),
            diagnostics.norm_X(fld, cfg.physics.alpha, cfg.physics.z_cap),
            diagnostics.norm_W(fld, cfg.physics.alpha, t, cfg.physics.L),
            row[1], row[2],
            diagnostics.Q_functional(fld, 2.0, t, cfg.physics.L),
            diagnostics.Q_companion(fld, 2.0, t, cfg.physics.L),
        )
    out = args.output or os.path.join(run_dir, "diagnose.csv")
    series.to_csv(out)
    from . import report

    report.fig_series(
        series, ("l2", "xnorm", "virial"),
        os.path.join(os.path.dirname(out), "figures", "diagnose.png"),
        title="run diagnostics",
    )
    print(out)
    return 0


def cmd_pipeline(args) -> int:
    import copy

    from . import kp2
    from .pipeline import run_pipeline

    user_cfg = _load_cfg(args)
    amplitudes = [user_cfg.perturbation.amplitude]
    if args.vary:
        amplitudes = [float(a) for a in args.vary.split(",")]
    payloads, worst = [], 0
    base_name = user_cfg.experiment.name
    for eps in amplitudes:
        cfg = copy.deepcopy(user_cfg)
        cfg.perturbation.amplitude = eps
        if len(amplitudes) > 1:
            cfg.experiment.name = f"{base_name}_eps{eps:g}"
        try:
            res = run_pipeline(cfg, resume=args.resume)
        except kp2.NumericsError as e:
            print(f"numeric halt (eps={eps}): {e}", file=sys.stderr)
            return 3
        payloads.append({"out_dir": res.out_dir, "stages": res.stages, "summary": res.summary})
        if any(not str(v).startswith("complete") for v in res.stages.values()):
            worst = 3
    print(json.dumps(payloads if len(payloads) > 1 else payloads[0], indent=2))
    return worst


def cmd_selftest(args) -> int:
    from .acceptance import run_acceptance

    out_dir = args.output or "out/selftest"
    verdict = run_acceptance(out_dir, fast=args.fast, only=args.only, force_fail=args.force_fail)
    print(json.dumps(verdict, indent=2))
    with open(os.path.join(out_dir, "selftest.json"), "w") as fh:
        json.dump(verdict, fh, indent=2)
    return 0 if verdict["passed"] else 4


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kpsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread cap")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--output", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--resume", action="store_true")

    p = sub.add_parser("simulate", help="run one KP-II evolution with snapshots")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="resonant eigenvalue curve CSV")
    common(p)
    p.add_argument("--eta-max", type=float, default=1.0)
    p.add_argument("--n-eta", type=int, default=41)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("extract", help="crest parameters from a snapshot directory")
    common(p)
    p.add_argument("--run", required=True, help="snapshot directory of the u run")
    p.add_argument("--v1-run", default=None, help="snapshot directory of the companion run")
    p.add_argument("--field", default="u")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("reduced", help="run the reduced crest model from a config")
    common(p)
    p.set_defaults(func=cmd_reduced)

    p = sub.add_parser("compare", help="compare extracted and reduced series CSVs")
    p.add_argument("--full", required=True, help="extracted crest CSV (y,c,x rows with t)")
    p.add_argument("--reduced", required=True, help="reduced series CSV (t,y,b,x_y)")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("diagnose", help="norm/virial/Q series for a run directory")
    common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--field", default="u")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("pipeline", help="full stability experiment")
    common(p)
    p.add_argument("--vary", default=None,
                   help="comma-separated amplitudes; repeats the pipeline per value")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--output", default=None)
    p.add_argument("--fast", action="store_true", help="desk-scale quick variant")
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")
    p.add_argument("--force-fail", type=int, default=None,
                   help="debug: mark this criterion as breached")
    p.set_defaults(func=cmd_selftest)

    args = parser.parse_args(argv)
    _set_threads(args.threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
