import numpy as np
import pytest

from kpsim import reduced as rd
from kpsim.decomp import ModulationState, YProfile

LY = 64.0
NY = 32
ETA0 = 0.25


def test_modulation_constants():
    assert rd.MU1 == pytest.approx(0.5 - np.pi**2 / 12.0, abs=1e-15)
    assert rd.MU2 == pytest.approx(np.pi**2 / 32.0 - 3.0 / 16.0, abs=1e-15)
    assert rd.MU3 == pytest.approx(0.5 + np.pi**2 / 24.0, abs=1e-15)
    assert rd.MU3 == pytest.approx(0.9112335, abs=1e-7)
    assert rd.MU3 > 1.0 / 8.0


def test_b_transform_trivials():
    y = np.linspace(0, LY, NY, endpoint=False)
    assert np.max(np.abs(rd.b_transform(np.full(NY, 2.0), LY, ETA0))) < 1e-14
    eps = 1e-4
    b = rd.b_transform(np.full(NY, 2.0 + eps), LY, ETA0)
    # Taylor: b = eps + O(eps^2)
    assert np.max(np.abs(b - eps)) < 1e-7


def test_b_round_trip_band_limited():
    y = np.linspace(0, LY, NY, endpoint=False)
    c = 2.0 + 0.05 * np.cos(2 * np.pi * y / LY) - 0.02 * np.sin(4 * np.pi * y / LY)
    b = rd.b_transform(c, LY, ETA0)
    back = rd.b_inverse(b, LY, ETA0)
    assert np.max(np.abs(back - c)) < 1e-10


def test_G_steady_state_vanishes():
    c = YProfile(np.full(NY, 2.0), ETA0, LY)
    x = YProfile(np.zeros(NY), ETA0, LY)
    G1, G2 = rd.G_eval(c, x, c_t=np.zeros(NY), x_t=np.full(NY, 4.0))
    assert np.max(np.abs(G1)) == 0.0
    assert np.max(np.abs(G2)) == 0.0


def test_G_y_independent_reduction():
    cval, ct, xt = 2.3, 0.17, 5.1
    c = YProfile(np.full(NY, cval), ETA0, LY)
    x = YProfile(np.zeros(NY), ETA0, LY)
    G1, G2 = rd.G_eval(c, x, c_t=np.full(NY, ct), x_t=np.full(NY, xt))
    assert G1 == pytest.approx(np.full(NY, -2.0 * ct * np.sqrt(cval / 2.0)), abs=1e-12)
    want2 = -2.0 * (xt - 2 * cval) * (cval / 2.0) ** 2 - 0.5 * ct * np.sqrt(cval / 2.0)
    assert G2 == pytest.approx(np.full(NY, want2), abs=1e-12)


def test_G_matches_termwise_quadrature_oracle():
    # independent reimplementation of each monomial via FFT derivatives
    rng = np.random.default_rng(0)
    y = np.linspace(0, LY, NY, endpoint=False)
    c = YProfile.from_values(2.0 + 0.05 * rng.standard_normal(NY), ETA0, LY)
    x = YProfile.from_values(0.05 * rng.standard_normal(NY), ETA0, LY)
    ct = 0.03 * np.cos(2 * np.pi * y / LY)
    xt = 4.0 + 0.02 * np.sin(2 * np.pi * y / LY)
    G1, G2 = rd.G_eval(c, x, ct, xt)

    eta = 2 * np.pi * np.fft.fftfreq(NY, LY / NY)
    d = lambda v, k: np.real(np.fft.ifft((1j * eta) ** k * np.fft.fft(v)))
    cv, xv = c.values, x.values
    cy, cyy, xy, xyy = d(cv, 1), d(cv, 2), d(xv, 1), d(xv, 2)
    o1 = (
        16 * xyy * (cv / 2) ** 1.5
        - 2 * (ct - 6 * cy * xy) * (cv / 2) ** 0.5
        + 6 * cyy
        - 3 / cv * cy**2
    )
    o2 = (
        -2 * (xt - 2 * cv - 3 * xy**2) * (cv / 2) ** 2
        + 6 * xyy * (cv / 2) ** 1.5
        - 0.5 * (ct - 6 * cy * xy) * (cv / 2) ** 0.5
        + rd.MU1 * cyy
        + rd.MU2 * cy**2 / (cv / 2)
    )
    assert np.max(np.abs(G1 - o1)) < 1e-12
    assert np.max(np.abs(G2 - o2)) < 1e-12


def test_dispersion_values():
    A, w0, Pi, lp, lm = rd.dispersion(0.0)
    assert w0 == pytest.approx(4.0)
    assert lp == 0.0 and lm == 0.0
    assert np.allclose(Pi, np.array([[2.0, 2.0], [1.0, -1.0]]))
    _, w1, _, _, _ = rd.dispersion(1.0)
    assert w1 == pytest.approx(np.sqrt(16.0 + 8.0 * rd.MU3 - 1.0), abs=1e-12)
    assert w1 == pytest.approx(4.72121, abs=1e-5)


@pytest.mark.parametrize("eta", [0.1, 0.3, 0.5, 0.7, 1.0, -0.4])
def test_dispersion_eigen_identities(eta):
    A, w, Pi, lp, lm = rd.dispersion(eta)
    # matrix-arithmetic oracle for the diagonalization
    D = np.linalg.inv(Pi) @ A @ Pi
    assert np.max(np.abs(D - np.diag([lp, lm]))) < 1e-12
    assert np.trace(A) == pytest.approx(lp + lm, abs=1e-12)
    assert np.trace(A) == pytest.approx(-4.0 * eta**2, abs=1e-12)
    assert np.linalg.det(A) == pytest.approx(lp * lm, abs=1e-12)
    assert lp.real == pytest.approx(-2.0 * eta**2, abs=1e-13)
    assert lm.real == pytest.approx(-2.0 * eta**2, abs=1e-13)


def test_omega_quadratic_deviation():
    # |omega - 4| <= C eta^2 with C = (8 mu3 - 1)/8
    eta = np.linspace(-1, 1, 101)
    dev = np.abs(rd.omega(eta) - 4.0)
    C = (8 * rd.MU3 - 1.0) / 8.0
    assert np.all(dev <= C * eta**2 + 1e-14)
    # fitted constant on small eta consistent with C
    small = np.abs(eta) < 0.3
    fit = np.polyfit(eta[small] ** 2, dev[small], 1)[0]
    assert fit == pytest.approx(C, rel=0.05)


def test_pi_near_identity_limit():
    for eta in (0.05, 0.1, 0.25):
        _, _, Pi, _, _ = rd.dispersion(eta)
        Pinv = np.linalg.inv(Pi)
        assert np.max(np.abs(Pi - np.array([[2, 2], [1, -1]]))) < 2.0 * abs(eta)
        assert np.max(np.abs(Pinv - 0.25 * np.array([[1, 2], [1, -2]]))) < 2.0 * abs(eta)


def test_crest_zero_stays_zero():
    z = YProfile(np.zeros(NY), ETA0, LY)
    state = rd.CrestState(z, z, 0.0)
    out = rd.run_reduced(state, dt=0.01, t_end=0.5)
    assert np.max(np.abs(out[-1].b1.values)) == 0.0
    assert np.max(np.abs(out[-1].b2.values)) == 0.0


def test_linear_run_matches_exponential_oracle():
    # exact per-mode exponential: each band mode evolves by e^{t lambda_pm}
    y = np.linspace(0, LY, NY, endpoint=False)
    b1 = 0.01 * np.cos(2 * np.pi * y / LY)
    b2 = 0.005 * np.sin(4 * np.pi * y / LY)
    s0 = rd.CrestState(YProfile(b1, ETA0, LY), YProfile(b2, ETA0, LY), 0.0)
    T = 1.0
    out = rd.run_reduced(s0, dt=1e-3, t_end=T, nonlinear=False)[-1]
    eta = 2 * np.pi * np.fft.fftfreq(NY, LY / NY)
    lp, lm = rd.lambda_pm(eta)
    want1 = np.real(np.fft.ifft(np.exp(T * lp) * np.fft.fft(b1)))
    want2 = np.real(np.fft.ifft(np.exp(T * lm) * np.fft.fft(b2)))
    assert np.max(np.abs(out.b1.values - want1)) < 1e-10
    assert np.max(np.abs(out.b2.values - want2)) < 1e-10


def test_crest_packets_travel_opposite_at_speed_4():
    # group speeds d/d eta [eta omega] -> +-4 as eta -> 0
    ny, ly = 512, 1024.0
    y = np.linspace(-ly / 2, ly / 2, ny, endpoint=False)
    bump = 0.001 * np.exp(-((y) ** 2) / 400.0)
    bump = rd.band_project(bump, ly, ETA0)
    z = np.zeros(ny)
    s1 = rd.CrestState(YProfile(bump, ETA0, ly), YProfile(z, ETA0, ly), 0.0)
    out = rd.run_reduced(s1, dt=0.02, t_end=20.0, nonlinear=False)[-1]

    def centroid(v):
        w = v**2
        return float(np.sum(y * w) / np.sum(w))

    sp1 = (centroid(out.b1.values) - centroid(bump)) / 20.0
    s2 = rd.CrestState(YProfile(z, ETA0, ly), YProfile(bump, ETA0, ly), 0.0)
    out2 = rd.run_reduced(s2, dt=0.02, t_end=20.0, nonlinear=False)[-1]
    sp2 = (centroid(out2.b2.values) - centroid(bump)) / 20.0
    speeds = sorted([sp1, sp2])
    assert speeds[0] == pytest.approx(-4.0, rel=0.05)
    assert speeds[1] == pytest.approx(4.0, rel=0.05)


def test_round_trip_modulation_crest():
    y = np.linspace(0, LY, NY, endpoint=False)
    c = YProfile.from_values(2.0 + 0.04 * np.cos(2 * np.pi * y / LY), ETA0, LY)
    x = YProfile.from_values(0.3 + 0.05 * np.sin(2 * np.pi * y / LY), ETA0, LY)
    mod = ModulationState(c=c, x=x, t=0.0)
    crest = rd.crest_from_modulation(mod)
    c2, xy2 = rd.modulation_from_crest(crest)
    assert np.max(np.abs(c2.values - c.values)) < 1e-10
    assert np.max(np.abs(xy2.values - x.dy(1))) < 1e-10


def test_compare_self_is_zero_and_csv(tmp_path):
    y = np.linspace(0, LY, NY, endpoint=False)
    c = YProfile.from_values(2.0 + 0.03 * np.cos(2 * np.pi * y / LY), ETA0, LY)
    x = YProfile.from_values(0.02 * np.sin(2 * np.pi * y / LY), ETA0, LY)
    mods, crests = [], []
    for t in (0.0, 0.5, 1.0):
        mod = ModulationState(c=c, x=x, t=t)
        mods.append(mod)
        crests.append(rd.crest_from_modulation(mod))
    series = rd.compare(mods, crests)
    assert np.max(series.column("err_c_l2")) < 1e-10
    assert np.max(series.column("err_xy_sup")) < 1e-10
    path = tmp_path / "cmp.csv"
    series.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t,err_c_l2,err_xy_l2,err_c_sup,err_xy_sup"


def test_compare_rejects_misaligned():
    c = YProfile(np.full(NY, 2.0), ETA0, LY)
    x = YProfile(np.zeros(NY), ETA0, LY)
    mod = ModulationState(c=c, x=x, t=0.0)
    crest = rd.crest_from_modulation(ModulationState(c=c, x=x, t=1.0))
    with pytest.raises(ValueError, match="misaligned"):
        rd.compare([mod], [crest])
