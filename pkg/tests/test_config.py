import pytest

from kpsim.config import ConfigError, RunConfig, parse_config


def test_defaults_valid():
    cfg = RunConfig()
    cfg.validate()


def test_parse_and_types():
    cfg = parse_config(
        """
        # a comment
        grid.nx=256
        grid.lx=64.0
        solver.dealias=false
        perturbation.kind=line_mass_bump
        perturbation.amplitude=0.02
        experiment.name=demo
        """,
        env={},
    )
    assert cfg.grid.nx == 256
    assert cfg.grid.lx == 64.0
    assert cfg.solver.dealias is False
    assert cfg.perturbation.amplitude == 0.02
    assert cfg.experiment.name == "demo"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("grid.bogus=1", env={})
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("nope.nx=1", env={})


def test_bad_value_names_key():
    with pytest.raises(ConfigError, match="grid.nx"):
        parse_config("grid.nx=abc", env={})


def test_validation_messages_name_fields():
    with pytest.raises(ConfigError, match="grid.nx"):
        parse_config("grid.nx=100", env={})
    with pytest.raises(ConfigError, match="physics.alpha"):
        parse_config("physics.alpha=3.0", env={})
    with pytest.raises(ConfigError, match="eta0"):
        parse_config("physics.eta0=0.01", env={})


def test_env_override():
    cfg = parse_config("grid.nx=256", env={"KPSIM_GRID_NX": "128"})
    assert cfg.grid.nx == 128


def test_rescaling_round_trip():
    # c0=8 maps onto the canonical c0=2 problem through the two-parameter
    # scaling symmetry; lam^2 = 2/c0 = 1/4
    cfg = RunConfig()
    cfg.physics.c0 = 8.0
    cfg.grid.lx, cfg.grid.ly = 64.0, 16.0
    cfg.solver.dt, cfg.solver.t_end = 1e-3, 1.0
    cfg.solver.frame_speed = 16.0  # 2*c0
    cfg.physics.L = 10.0
    cfg.physics.eta0 = 1.0
    internal, sc = cfg.normalized()
    lam = sc.lam
    assert lam == pytest.approx(0.5)
    assert internal.physics.c0 == 2.0
    assert internal.grid.lx == pytest.approx(64.0 / lam)      # x stretches
    assert internal.grid.ly == pytest.approx(16.0 / lam**2)
    assert internal.solver.dt == pytest.approx(1e-3 / lam**3)
    # the soliton frame maps to the canonical speed 4
    assert internal.solver.frame_speed == pytest.approx(4.0)
    assert internal.physics.eta0 == pytest.approx(1.0 * lam**2)


def test_identity_scale_for_c0_2():
    cfg = RunConfig()
    internal, sc = cfg.normalized()
    assert sc.is_identity
    assert internal is cfg
