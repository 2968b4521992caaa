"""End-to-end stability experiment: perturbed soliton run, free companion
run, modulation tracking, reduced-model comparison, and diagnostics.

Stages (each failure is recorded; completed outputs are kept):

1. split    -- separate the initial perturbation's per-line mass into a
               locally amplified crest c1(y) and a zero-mean rest v*.
2. u-run    -- KP-II evolution of phi_{c1} + v* in the frame moving at
               speed 4 (canonical c0 = 2 units).
3. v1-run   -- free KP-II evolution of v* in the lab frame.
4. track    -- per-snapshot decomposition into (c, x, v1, v2) via the
               orthogonality conditions, warm-started in time.
5. reduced  -- crest-variable evolution from the t = 0 extracted state.
6. compare  -- tracked vs reduced crest parameters.
7. report   -- CSVs, JSON summary, figures.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import decomp, diagnostics, kp2, reduced, report, runio
from .config import RunConfig
from .grid import Grid2D, RealField2D, forward, inverse, shift_x
from .soliton import dphi_dc, phi_c, split_initial_data


def make_perturbation(grid: Grid2D, cfg: RunConfig) -> RealField2D:
    """Deterministic initial perturbation from the config (internal units)."""
    p = cfg.perturbation
    X, Y = grid.meshgrid()
    if p.kind == "none":
        return RealField2D(grid, np.zeros((grid.ny, grid.nx)))
    xprof = 1.0 / np.cosh((X - p.x_center) / p.x_width) ** 2
    m = np.cos(2 * np.pi * p.y_mode * Y / grid.ly)
    if p.kind == "line_mass_bump":
        vals = p.amplitude * xprof / (2.0 * p.x_width) * m
    elif p.kind == "crest_bump":
        # data on the modulated-soliton manifold: the split absorbs it
        # entirely into c1(y), leaving v* = O(amplitude^2)
        vals = p.amplitude * dphi_dc(X - p.x_center, 2.0) * m
    elif p.kind == "zero_mean_bump":
        tn = np.tanh((X - p.x_center) / p.x_width)
        vals = 2.0 * p.amplitude * xprof * tn * m
        vals = vals - vals.mean(axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown perturbation kind {p.kind!r}")
    if p.xi_min > 0.0:
        # drop the ultra-long x-waves: their transverse coupling gives them
        # near-infinite group speed, which on a periodic box wraps into the
        # weighted diagnostics region long before the physics of interest
        sp = np.fft.rfft2(vals, axes=(0, 1))
        sp[:, np.abs(grid.xi) < p.xi_min] = 0.0
        vals = np.fft.irfft2(sp, s=(grid.ny, grid.nx), axes=(0, 1))
        vals = vals - vals.mean(axis=1, keepdims=True)
    return RealField2D(grid, vals)


def _run_stage(directory, u0, solver_cfg, cfg, scale, field_name, frame_speed, resume):
    grid = u0.grid
    sink = runio.SnapshotSink(
        directory, cfg, scale, field_name=field_name,
        run_id=cfg.experiment.name + ":" + field_name, frame_speed=frame_speed,
    )
    t0, state0 = 0.0, None
    if resume and os.path.exists(os.path.join(directory, "state_latest.json")):
        _, t0, state0 = runio.load_resume_state(directory, grid)
    if t0 < solver_cfg.t_end - 1e-12:
        kp2.run(u0, solver_cfg, sink=sink, t0=t0, state0=state0)
    sink.mark("complete")
    return sink


def _load_fields(directory, scale, field_name):
    out = []
    for snap in runio.list_snapshots(directory):
        fld, t, _ = runio.read_snapshot_internal(directory, snap["step"], scale, field_name)
        out.append((t, fld))
    return out


@dataclass
class PipelineResult:
    out_dir: str
    stages: dict = field(default_factory=dict)
    track: decomp.TrackResult | None = None
    track_series: kp2.DiagnosticsSeries | None = None
    compare_series: kp2.DiagnosticsSeries | None = None
    free_series: kp2.DiagnosticsSeries | None = None
    summary: dict = field(default_factory=dict)


def run_pipeline(user_cfg: RunConfig, out_root: str | None = None, resume: bool = False) -> PipelineResult:
    cfg, scale = user_cfg.normalized()
    g = cfg.grid
    grid = Grid2D(nx=g.nx, ny=g.ny, lx=g.lx, ly=g.ly)
    out_dir = os.path.join(out_root or user_cfg.experiment.output_dir, user_cfg.experiment.name)
    os.makedirs(out_dir, exist_ok=True)
    res = PipelineResult(out_dir=out_dir)
    eps = cfg.perturbation.amplitude

    # -- split
    v0 = make_perturbation(grid, cfg)
    c1, v_star = split_initial_data(v0, 2.0)
    v_star = RealField2D(grid, v_star.values - v_star.values.mean(axis=1, keepdims=True))
    res.stages["split"] = "complete"

    # -- evolution runs
    X, _ = grid.meshgrid()
    u0 = RealField2D(grid, phi_c(X, c1[:, None]) + v_star.values)
    sol_cfg = kp2.SolverConfig(
        dt=cfg.solver.dt, t_end=cfg.solver.t_end, frame_speed=4.0,
        snapshot_every=cfg.solver.snapshot_every, dealias=cfg.solver.dealias,
    )
    free_cfg = kp2.SolverConfig(
        dt=cfg.solver.dt, t_end=cfg.solver.t_end, frame_speed=0.0,
        snapshot_every=cfg.solver.snapshot_every, dealias=cfg.solver.dealias,
    )
    try:
        _run_stage(os.path.join(out_dir, "u"), u0, sol_cfg, cfg, scale, "u", 4.0, resume)
        res.stages["u-run"] = "complete"
        _run_stage(os.path.join(out_dir, "v1"), v_star, free_cfg, cfg, scale, "v1", 0.0, resume)
        res.stages["v1-run"] = "complete"
    except kp2.NumericsError as e:
        res.stages["evolution"] = f"halted: {e}"
        _write_report(res, cfg)
        return res

    u_snaps = _load_fields(os.path.join(out_dir, "u"), scale, "u")
    v1_snaps = _load_fields(os.path.join(out_dir, "v1"), scale, "v1")

    # -- free-run diagnostics (virial on the companion run, lab frame)
    free = kp2.DiagnosticsSeries(
        columns=("t", "l2", "l3", "xnorm", "wnorm", "virial", "virial_dissip", "Q", "Qcompanion")
    )
    vir = diagnostics.virial_series(v1_snaps, eps=0.05, c1=2.0, x0=0.0)
    for (t, fld), (row) in zip(v1_snaps, vir.rows):
        free.append(
            t, fld.l2(), fld.lp(3.0),
            diagnostics.norm_X(fld, cfg.physics.alpha, cfg.physics.z_cap),
            diagnostics.norm_W(fld, cfg.physics.alpha, t, cfg.physics.L),
            row[1], row[2],
            diagnostics.Q_functional(fld, 2.0, t, cfg.physics.L),
            diagnostics.Q_companion(fld, 2.0, t, cfg.physics.L),
        )
    free.to_csv(os.path.join(out_dir, "diagnostics_v1.csv"))
    res.free_series = free
    res.stages["free-diagnostics"] = "complete"

    # -- tracking
    track_input = []
    for (t, u_f), (t2, v1_f) in zip(u_snaps, v1_snaps):
        v1_mov = inverse(shift_x(forward(v1_f), -4.0 * t))
        track_input.append((t, u_f, v1_mov))
    solver = decomp.ModulationSolver(grid, cfg.physics.eta0, cfg.physics.L)
    tr = decomp.track(
        track_input, cfg.physics.eta0, cfg.physics.L,
        alpha=cfg.physics.alpha, z_cap=cfg.physics.z_cap, solver=solver,
    )
    res.track = tr
    res.stages["track"] = "complete" if not tr.aborted else f"aborted: {tr.reason}"

    ext_dir = os.path.join(out_dir, "extract")
    os.makedirs(ext_dir, exist_ok=True)
    cols = ("t", "res", "iters", "c_dev_sup", "xy_sup", "v_l2", "v2_xnorm", "v1_wnorm",
            "Q", "Qcompanion", "line_mass_drift")
    tser = kp2.DiagnosticsSeries(columns=cols)
    line0 = None
    for (t, _, _), st in zip(track_input, tr.states):
        mod = st.mod
        v_field = RealField2D(grid, st.v1.values + st.v2.values)
        line = st.v2.values.sum(axis=1) * grid.dx
        if line0 is None:
            line0 = line
        tser.append(
            t, st.residual, st.iterations,
            np.max(np.abs(mod.c.values - 2.0)),
            np.max(np.abs(mod.x.dy(1))),
            v_field.l2(),
            diagnostics.norm_X(st.v2, cfg.physics.alpha, cfg.physics.z_cap),
            diagnostics.norm_W(st.v1, cfg.physics.alpha, t, cfg.physics.L),
            diagnostics.Q_functional(v_field, mod.c.values, t, cfg.physics.L),
            diagnostics.Q_companion(v_field, mod.c.values, t, cfg.physics.L),
            np.max(np.abs(line - line0)),
        )
        step = int(round(t / cfg.solver.dt))
        with open(os.path.join(ext_dir, f"crest_{step:08d}.csv"), "w") as fh:
            fh.write("y,c,x\n")
            for j in range(grid.ny):
                fh.write(
                    f"{grid.y[j] * scale.y_factor:.17g},"
                    f"{mod.c.values[j] * scale.u_factor:.17g},"
                    f"{mod.x.values[j] * scale.x_factor:.17g}\n"
                )
    tser.to_csv(os.path.join(out_dir, "track.csv"))
    res.track_series = tser
    with open(os.path.join(ext_dir, "summary.json"), "w") as fh:
        json.dump(
            {
                "residual_max": max((s.residual for s in tr.states), default=None),
                "iterations_max": max((s.iterations for s in tr.states), default=None),
                "norms": {
                    "v2_xnorm_peak": float(np.max(tser.column("v2_xnorm"))) if tr.states else None,
                },
                "aborted": tr.aborted,
                "reason": tr.reason,
            },
            fh,
            indent=2,
        )

    # -- reduced model + comparison
    if tr.states:
        crest0 = reduced.crest_from_modulation(tr.states[0].mod)
        times = [t for (t, _, _) in track_input[: len(tr.states)]]
        snap_dt = times[1] - times[0] if len(times) > 1 else cfg.solver.dt
        n_sub = max(1, int(round(snap_dt / 0.05)))
        red_states = reduced.run_reduced(
            crest0, dt=snap_dt / n_sub, t_end=times[-1], record_every=n_sub
        )
        red_at_snaps = red_states[: len(times)]
        cmp_series = reduced.compare([s.mod for s in tr.states], red_at_snaps)
        cmp_series.to_csv(os.path.join(out_dir, "compare.csv"))
        res.compare_series = cmp_series
        red_dir = os.path.join(out_dir, "reduced")
        os.makedirs(red_dir, exist_ok=True)
        with open(os.path.join(red_dir, "series.csv"), "w") as fh:
            fh.write("t,y,b,x_y\n")
            for st_red in red_at_snaps:
                b = reduced.b_transform(
                    reduced.modulation_from_crest(st_red)[0].values, grid.ly, cfg.physics.eta0
                )
                xy = reduced.modulation_from_crest(st_red)[1].values
                for j in range(grid.ny):
                    fh.write(
                        f"{st_red.t * scale.t_factor:.17g},{grid.y[j] * scale.y_factor:.17g},"
                        f"{b[j]:.17g},{xy[j]:.17g}\n"
                    )
        res.stages["reduced"] = "complete"
        res.stages["compare"] = "complete"

    _figures(res, grid, tr, out_dir)
    _summarize(res, eps)
    _write_report(res, cfg)
    return res


def _figures(res, grid, tr, out_dir):
    figdir = os.path.join(out_dir, "figures")
    try:
        if res.track_series is not None and tr.states:
            report.fig_series(
                res.track_series, ("c_dev_sup", "xy_sup", "v2_xnorm"),
                os.path.join(figdir, "track.png"), logy=True, title="crest deviation and remainder",
            )
            cmat = np.array([s.mod.c.values for s in tr.states])
            times = [s.mod.t for s in tr.states]
            report.fig_crest(times, grid.y, cmat, os.path.join(figdir, "crest_c.png"))
        if res.compare_series is not None:
            report.fig_series(
                res.compare_series, ("err_c_l2", "err_xy_l2"),
                os.path.join(figdir, "compare.png"), logy=True, title="tracked vs reduced",
            )
        if res.free_series is not None:
            report.fig_series(
                res.free_series, ("virial", "virial_dissip"),
                os.path.join(figdir, "virial.png"), title="free-run virial",
            )
        res.stages["figures"] = "complete"
    except Exception as e:  # figures must never sink the run
        res.stages["figures"] = f"failed: {e}"


def _summarize(res, eps):
    s = {"eps": eps}
    if res.track_series is not None and res.track_series.rows:
        ts = res.track_series
        s["stability_margin"] = float(np.max(ts.column("v_l2")) / eps) if eps else 0.0
        s["c_dev_sup"] = float(np.max(ts.column("c_dev_sup")))
        s["xy_sup"] = float(np.max(ts.column("xy_sup")))
        s["v2_xnorm_peak"] = float(np.max(ts.column("v2_xnorm")))
        s["v2_xnorm_final"] = float(ts.column("v2_xnorm")[-1])
        s["line_mass_drift"] = float(np.max(ts.column("line_mass_drift")))
        s["Q_companion_drift"] = float(
            np.max(np.abs(ts.column("Qcompanion") - ts.column("Qcompanion")[0]))
        )
    if res.compare_series is not None and res.compare_series.rows:
        s["compare_err_c_sup_t"] = float(np.max(res.compare_series.column("err_c_l2")))
    res.summary = s


def _write_report(res, cfg):
    payload = {"stages": res.stages, "summary": res.summary, "config": cfg.to_dict()}
    with open(os.path.join(res.out_dir, "report.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
