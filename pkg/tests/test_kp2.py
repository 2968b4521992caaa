import numpy as np
import pytest

from kpsim import grid as gr
from kpsim import kp2
from kpsim import soliton as sol


def test_linear_symbol_values():
    assert kp2.linear_symbol(1.0, 0.0, 0.0) == pytest.approx(1j)
    # direct arithmetic from the symbol formula
    assert kp2.linear_symbol(1.0, 1.0, 4.0) == pytest.approx(2j)
    assert kp2.linear_symbol(0.0, 3.0, 4.0) == 0.0


def test_linear_symbol_odd():
    xi = np.array([0.5, 1.0, 2.0])
    eta = np.array([0.3, -1.0, 2.0])
    a = kp2.linear_symbol(xi, eta, 4.0)
    b = kp2.linear_symbol(-xi, -eta, 4.0)
    assert np.max(np.abs(a + b)) < 1e-14


@pytest.fixture
def smallgrid():
    return gr.Grid2D(nx=128, ny=8, lx=64.0, ly=32.0)


def test_zero_stays_zero(smallgrid):
    u0 = gr.RealField2D(smallgrid, np.zeros((smallgrid.ny, smallgrid.nx)))
    series = kp2.run(u0, kp2.SolverConfig(dt=1e-2, t_end=1.0, snapshot_every=10))
    assert np.max(series.column("l2")) == 0.0


def test_linear_only_l2_conserved_per_step(smallgrid):
    # purely imaginary symbol: the linear propagator is an exact isometry
    rng = np.random.default_rng(0)
    u0 = gr.RealField2D(smallgrid, rng.standard_normal((smallgrid.ny, smallgrid.nx)))
    vals = u0.values - u0.values.mean(axis=1, keepdims=True)
    u0 = gr.RealField2D(smallgrid, vals)
    cfg = kp2.SolverConfig(dt=1e-2, t_end=0.0)
    stepper = kp2.ETDRK4Stepper(smallgrid, cfg, nonlinear=lambda v: np.zeros_like(v))
    spec = gr.forward(u0)
    n0 = spec.l2()
    state = kp2.EvolutionState(0.0, spec)
    for _ in range(20):
        state = kp2.step(state, cfg, stepper)
        assert abs(state.spectrum.l2() - n0) < 1e-13 * n0


def test_soliton_travels_at_speed_4_lab_frame():
    # phi_c(x - 2ct): c=2 -> speed 4; track the translation by Fourier phase
    g = gr.Grid2D(nx=512, ny=4, lx=128.0, ly=16.0)
    u0 = g.sample(lambda X, Y: sol.phi_c(X, 2.0))
    cfg = kp2.SolverConfig(dt=1e-3, t_end=1.0, frame_speed=0.0, snapshot_every=1000, dealias=False)
    snaps = []
    kp2.run(u0, cfg, sink=lambda n, t, u, s: snaps.append((t, s.coeffs.copy())))
    k1 = g.xi[1]
    (t0, c0), (t1, c1) = snaps[0], snaps[-1]
    dphase = np.angle(c1[0, 1] / c0[0, 1])
    speed = -dphase / (k1 * (t1 - t0))  # u(x-st): coefficient phase e^{-i k s t}
    assert speed == pytest.approx(4.0, rel=1e-4)
    # shape error after translating back
    shifted = gr.inverse(gr.shift_x(gr.ComplexSpectrum2D(g, c1), -4.0 * (t1 - t0))).values
    rel = np.sqrt(np.sum((shifted - u0.values) ** 2) / np.sum(u0.values**2))
    assert rel < 1e-6


def test_moving_frame_soliton_stationary():
    g = gr.Grid2D(nx=512, ny=8, lx=128.0, ly=64.0)
    u0 = g.sample(lambda X, Y: sol.phi_c(X, 2.0))
    cfg = kp2.SolverConfig(dt=1e-3, t_end=1.0, frame_speed=4.0, snapshot_every=1000, dealias=False)
    series = kp2.run(u0, cfg)
    spec = gr.forward(u0)
    state = kp2.EvolutionState(0.0, spec)
    stepper = kp2.ETDRK4Stepper(g, cfg)
    for _ in range(1000):
        state = kp2.step(state, cfg, stepper)
    u = gr.inverse(state.spectrum)
    rel = np.sqrt(np.sum((u.values - u0.values) ** 2) / np.sum(u0.values**2))
    assert rel < 1e-6


def test_l2_conservation_small_data(smallgrid):
    x = smallgrid.x
    pert = 0.05 * np.exp(-((x[None, :] + 10.0) ** 2) / 8.0) * np.ones((smallgrid.ny, 1))
    pert -= pert.mean(axis=1, keepdims=True)
    u0 = gr.RealField2D(smallgrid, pert)
    series = kp2.run(u0, kp2.SolverConfig(dt=2e-3, t_end=4.0, snapshot_every=200))
    l2 = series.column("l2")
    assert np.max(np.abs(l2 - l2[0])) < 1e-8 * l2[0]


def test_mean_row_exactly_invariant(smallgrid):
    rng = np.random.default_rng(1)
    vals = 0.1 * rng.standard_normal((smallgrid.ny, smallgrid.nx))
    vals -= vals.mean(axis=1, keepdims=True)
    u0 = gr.RealField2D(smallgrid, vals)
    spec = gr.forward(u0)
    row0 = spec.coeffs[:, 0].copy()
    cfg = kp2.SolverConfig(dt=1e-3, t_end=0.0)
    stepper = kp2.ETDRK4Stepper(smallgrid, cfg)
    state = kp2.EvolutionState(0.0, spec)
    for _ in range(50):
        state = kp2.step(state, cfg, stepper)  # step() asserts exact equality
    assert np.array_equal(state.spectrum.coeffs[:, 0], row0)


def test_fourth_order_in_dt(smallgrid):
    x = smallgrid.x
    pert = 0.5 * np.exp(-((x[None, :]) ** 2) / 8.0) * np.ones((smallgrid.ny, 1))
    pert -= pert.mean(axis=1, keepdims=True)
    u0 = gr.RealField2D(smallgrid, pert)

    def terminal(nsteps):
        cfg = kp2.SolverConfig(dt=0.5 / nsteps, t_end=0.0, dealias=True)
        stepper = kp2.ETDRK4Stepper(smallgrid, cfg)
        state = kp2.EvolutionState(0.0, gr.forward(u0))
        for _ in range(nsteps):
            state = kp2.step(state, cfg, stepper)
        return gr.inverse(state.spectrum).values

    ref = terminal(4096)
    errs = [np.sqrt(np.sum((terminal(n) - ref) ** 2)) for n in (256, 512)]
    ratio = errs[0] / errs[1]
    assert 12.0 < ratio < 20.0


def test_blowup_guard_halts():
    g = gr.Grid2D(nx=128, ny=4, lx=32.0, ly=16.0)
    u0 = g.sample(lambda X, Y: 4.0 * np.exp(-(X**2)))
    vals = u0.values - u0.values.mean(axis=1, keepdims=True)
    u0 = gr.RealField2D(g, vals)
    cfg = kp2.SolverConfig(dt=0.05, t_end=50.0, snapshot_every=5, blowup_factor=1.2)
    with pytest.raises(kp2.NumericsError):
        kp2.run(u0, cfg)


def test_v1_frame_shift_identity(smallgrid):
    # v1(t,z,y) = tv1(t, z + x(t,y), y): a lab-frame run followed by a phase
    # shift equals the moving-frame view of the same run
    x = smallgrid.x
    pert = 0.05 * np.exp(-(x[None, :] ** 2) / 8.0) * (1 + 0.3 * np.cos(2 * np.pi * smallgrid.y[:, None] / smallgrid.ly))
    pert -= pert.mean(axis=1, keepdims=True)
    u0 = gr.RealField2D(smallgrid, pert)
    t_end = 0.5
    cfg_lab = kp2.SolverConfig(dt=1e-3, t_end=t_end, frame_speed=0.0, snapshot_every=500)
    snaps = []
    kp2.run(u0, cfg_lab, sink=lambda n, t, u, s: snaps.append(s.copy()))
    lab_final = snaps[-1]
    x_shift = 4.0 * t_end  # uniform phase profile x(t,y) = 4t
    moved = gr.inverse(gr.shift_x(lab_final, -x_shift)).values

    cfg_mov = kp2.SolverConfig(dt=1e-3, t_end=t_end, frame_speed=4.0, snapshot_every=500)
    snaps2 = []
    kp2.run(u0, cfg_mov, sink=lambda n, t, u, s: snaps2.append(s.copy()))
    mov_final = gr.inverse(snaps2[-1]).values
    assert np.max(np.abs(moved - mov_final)) < 1e-10
