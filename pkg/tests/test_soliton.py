import numpy as np
import pytest

from kpsim import grid as gr
from kpsim import soliton as sol


def quad_line(f, a=-60.0, b=60.0, n=1 << 14):
    """Simple high-resolution trapezoid quadrature oracle on [a, b]."""
    x = np.linspace(a, b, n + 1)
    return np.trapezoid(f(x), x)


def test_peak_value_equals_c():
    assert sol.phi_c(0.0, 2.0) == pytest.approx(2.0, abs=1e-14)
    assert sol.phi_c(0.0, 3.7) == pytest.approx(3.7, abs=1e-14)


def test_rejects_nonpositive_c():
    with pytest.raises(sol.DomainError):
        sol.phi_c(0.0, -1.0)
    with pytest.raises(sol.DomainError):
        sol.phi_c(0.0, 0.0)


@pytest.mark.parametrize("c", [1.0, 2.0, 3.0, 4.0])
def test_mass_identity(c):
    # quadrature oracle against the closed form 2*sqrt(2c)
    got = quad_line(lambda x: sol.phi_c(x, c))
    assert got == pytest.approx(2.0 * np.sqrt(2.0 * c), abs=1e-10)


@pytest.mark.parametrize("c", [1.0, 2.0, 3.5])
def test_soliton_ode_residual_spectral(c):
    # phi'' - 2c phi + 3 phi^2 = 0, derivatives taken spectrally
    g = gr.Grid2D(nx=1024, ny=2, lx=100.0, ly=1.0)
    f = g.sample(lambda X, Y: sol.phi_c(X, c))
    d2 = gr.inverse(gr.deriv_x(gr.forward(f), order=2)).values
    res = d2 - 2 * c * f.values + 3 * f.values**2
    assert np.max(np.abs(res)) < 1e-9


def test_dphi_dc_matches_finite_differences():
    x = np.linspace(-10, 10, 401)
    h = 1e-6
    fd = (sol.phi_c(x, 2.0 + h) - sol.phi_c(x, 2.0 - h)) / (2 * h)
    assert np.max(np.abs(sol.dphi_dc(x, 2.0) - fd)) < 1e-8


def test_psi_bump_normalization_and_support():
    assert quad_line(sol.psi_bump, -2, 2, 1 << 16) == pytest.approx(1.0, abs=1e-12)
    x = np.linspace(-3, 3, 601)
    assert np.all(sol.psi_bump(x)[np.abs(x) >= 1.0] == 0.0)
    assert np.all(sol.psi_bump(x) >= 0.0)


def test_psi_cL_amplitude_vanishes_at_c2():
    x = np.linspace(-25, -15, 200)
    assert np.max(np.abs(sol.psi_cL(x, 2.0, 20.0))) == 0.0


def test_psi_cL_support_translated():
    x = np.linspace(-40, 10, 2001)
    vals = sol.psi_cL(x, 2.5, 20.0)
    inside = (x > -21.0) & (x < -19.0)
    assert np.any(vals[inside] != 0.0)
    assert np.all(vals[~inside][np.abs(x[~inside] + 20.0) > 1.0] == 0.0)


@pytest.mark.parametrize("c", [1.5, 2.5, 3.0])
def test_psi_cL_mass_matches_phi_difference(c):
    # int psi_{c,L} = int (phi_c - phi_2), both sides by quadrature
    lhs = quad_line(lambda x: sol.psi_cL(x, c, 20.0), -30, 30, 1 << 16)
    rhs = quad_line(lambda x: sol.phi_c(x, c) - sol.phi_c(x, 2.0))
    assert lhs == pytest.approx(rhs, abs=1e-10)
    assert lhs == pytest.approx(2.0 * np.sqrt(2.0 * c) - 4.0, abs=1e-10)


@pytest.fixture
def box():
    return gr.Grid2D(nx=512, ny=16, lx=128.0, ly=64.0)


def test_ansatz_pure_soliton(box):
    u = sol.assemble_ansatz(box, 2.0, 0.0, t=0.0, L=20.0)
    want = sol.phi_c(box.x, 2.0)[None, :]
    assert np.max(np.abs(u.values - want)) < 1e-14


def test_ansatz_uniform_shift_exact(box):
    # analytic translation oracle: shifting by s reproduces phi_2(x - s)
    s = 3.14159
    u = sol.assemble_ansatz(box, 2.0, s, t=0.0, L=20.0)
    want = sol.phi_c(box.x - s, 2.0)[None, :]
    assert np.max(np.abs(u.values - want)) < 1e-12


def test_ansatz_modulated_peak_follows_c(box):
    c_of_y = 2.0 + 0.1 * np.cos(2 * np.pi * box.y / box.ly)
    u = sol.assemble_ansatz(box, c_of_y, 0.0, t=0.0, L=20.0)
    # per-line max-finding oracle: peak sits at x = 0 with height c(y)
    peaks = u.values.max(axis=1)
    assert np.max(np.abs(peaks - c_of_y)) < 1e-8


def test_ansatz_carries_perturbation_in_crest_frame(box):
    s = 5.0
    v = box.sample(lambda X, Y: 0.01 * np.exp(-((X + 10.0) ** 2) / 4.0))
    u = sol.assemble_ansatz(box, 2.0, s, t=0.0, L=20.0, v=v)
    base = sol.assemble_ansatz(box, 2.0, s, t=0.0, L=20.0)
    got = u.values - base.values
    want = 0.01 * np.exp(-((box.x - s + 10.0) ** 2) / 4.0)[None, :]
    assert np.max(np.abs(got - want)) < 1e-9


def test_ansatz_rejects_bad_c(box):
    with pytest.raises(sol.DomainError):
        sol.assemble_ansatz(box, -1.0, 0.0, t=0.0, L=20.0)


def test_split_zero_perturbation(box):
    v0 = gr.RealField2D(box, np.zeros((box.ny, box.nx)))
    c1, v_star = sol.split_initial_data(v0, 2.0)
    assert np.max(np.abs(c1 - 2.0)) < 1e-14
    assert np.max(np.abs(v_star.values)) < 1e-14


def test_split_recovers_pure_amplitude_shift(box):
    # v0 = phi_{2.1} - phi_2 (y-independent) is absorbed entirely into c1
    v0 = box.sample(lambda X, Y: sol.phi_c(X, 2.1) - sol.phi_c(X, 2.0))
    c1, v_star = sol.split_initial_data(v0, 2.0)
    assert np.max(np.abs(c1 - 2.1)) < 1e-10
    assert np.max(np.abs(v_star.values)) < 1e-10


def test_split_kills_line_mass(box):
    rng = np.random.default_rng(5)
    m = 0.02 * np.cos(2 * np.pi * box.y / box.ly) + 0.01
    v0 = gr.RealField2D(
        box, m[:, None] * np.exp(-(box.x[None, :] ** 2) / 8.0) + 0.001 * rng.standard_normal((box.ny, box.nx)) * np.exp(-(box.x[None, :] ** 2) / 16.0)
    )
    c1, v_star = sol.split_initial_data(v0, 2.0)
    line = v_star.values.sum(axis=1) * box.dx
    assert np.max(np.abs(line)) < 1e-12


def test_split_rejects_huge_perturbation(box):
    v0 = box.sample(lambda X, Y: -10.0 * np.exp(-(X**2)))
    with pytest.raises(sol.DomainError, match="too large"):
        sol.split_initial_data(v0, 2.0)
