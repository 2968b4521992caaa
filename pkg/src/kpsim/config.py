"""Run configuration: flat key=value files with dotted sections.

Example::

    # lines starting with '#' are comments
    grid.nx=512
    grid.ny=32
    physics.c0=2.0
    solver.dt=0.002
    perturbation.kind=line_mass_bump
    experiment.name=demo

Every key has a default; unknown keys are errors naming the key.  Environment
variables override file values with the prefix KPSIM_, dots replaced by
underscores and upper-cased (KPSIM_GRID_NX=256 overrides grid.nx).

Inputs with c0 != 2 are rescaled at ingestion through the two-parameter
scaling symmetry u -> lam^2 u(lam^3 t, lam x, lam^2 y) with lam^2 = 2/c0, so
the solver always works in the canonical c = 2 regime; ScaleInfo carries the
factors needed to map outputs back to user units.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

import numpy as np


class ConfigError(ValueError):
    pass


ENV_PREFIX = "KPSIM_"


@dataclass
class GridSection:
    nx: int = 512
    ny: int = 32
    lx: float = 128.0
    ly: float = 64.0


@dataclass
class PhysicsSection:
    c0: float = 2.0
    alpha: float = 0.5
    eta0: float = 0.25
    L: float = 20.0
    z_cap: float = 8.0  # weighted-norm truncation ahead of the crest


@dataclass
class SolverSection:
    dt: float = 2e-3
    t_end: float = 10.0
    frame_speed: float = 0.0
    snapshot_every: int = 200
    dealias: bool = True


@dataclass
class PerturbationSection:
    kind: str = "none"  # none | line_mass_bump | zero_mean_bump | crest_bump
    amplitude: float = 0.01
    seed: int = 1234
    x_width: float = 2.0
    x_center: float = 0.0
    y_mode: int = 1
    xi_min: float = 0.0  # high-pass cutoff on the x-spectrum of the datum


@dataclass
class ExperimentSection:
    name: str = "run"
    output_dir: str = "out"


@dataclass
class ScaleInfo:
    """lam of the rescaling symmetry; identity when the input c0 is 2."""

    lam: float = 1.0

    @property
    def is_identity(self) -> bool:
        return abs(self.lam - 1.0) < 1e-15

    # user = factor * internal
    @property
    def x_factor(self) -> float:
        return self.lam

    @property
    def y_factor(self) -> float:
        return self.lam**2

    @property
    def t_factor(self) -> float:
        return self.lam**3

    @property
    def u_factor(self) -> float:
        return self.lam**-2


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    solver: SolverSection = field(default_factory=SolverSection)
    perturbation: PerturbationSection = field(default_factory=PerturbationSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    def validate(self) -> None:
        g, p, s, pert = self.grid, self.physics, self.solver, self.perturbation
        problems = []
        for name, n in (("grid.nx", g.nx), ("grid.ny", g.ny)):
            if n < 2 or (n & (n - 1)) != 0:
                problems.append(f"{name}={n} must be a power of two")
        if g.lx <= 0 or g.ly <= 0:
            problems.append("grid.lx and grid.ly must be positive")
        if p.c0 <= 0:
            problems.append(f"physics.c0={p.c0} must be positive")
        if not (0.0 < p.alpha < 2.0):
            problems.append(f"physics.alpha={p.alpha} must lie in (0, 2)")
        if p.eta0 <= 0:
            problems.append(f"physics.eta0={p.eta0} must be positive")
        if p.eta0 < 2 * np.pi / g.ly:
            problems.append(
                f"physics.eta0={p.eta0} resolves no band mode (grid spacing {2*np.pi/g.ly:.4g})"
            )
        if p.L <= 0:
            problems.append(f"physics.L={p.L} must be positive")
        if p.L + 1.0 >= g.lx / 2.0:
            problems.append(f"physics.L={p.L} leaves the box of length lx={g.lx}")
        if s.dt <= 0:
            problems.append(f"solver.dt={s.dt} must be positive")
        if s.t_end < 0:
            problems.append(f"solver.t_end={s.t_end} must be nonnegative")
        if s.snapshot_every < 1:
            problems.append("solver.snapshot_every must be >= 1")
        if pert.kind not in ("none", "line_mass_bump", "zero_mean_bump", "crest_bump"):
            problems.append(f"perturbation.kind={pert.kind!r} unknown")
        if pert.x_width <= 0:
            problems.append("perturbation.x_width must be positive")
        if pert.xi_min < 0:
            problems.append("perturbation.xi_min must be nonnegative")
        if abs(pert.y_mode) * 2 * np.pi / g.ly > p.eta0 and pert.kind != "none":
            problems.append(
                f"perturbation.y_mode={pert.y_mode} falls outside the band [-eta0, eta0]"
            )
        if problems:
            raise ConfigError("; ".join(problems))

    def normalized(self) -> tuple["RunConfig", ScaleInfo]:
        """Return the canonical c0 = 2 configuration plus the scale factors."""
        self.validate()
        lam = float(np.sqrt(2.0 / self.physics.c0))
        if abs(lam - 1.0) < 1e-15:
            return self, ScaleInfo(1.0)
        sc = ScaleInfo(lam)
        g = GridSection(
            nx=self.grid.nx,
            ny=self.grid.ny,
            lx=self.grid.lx / sc.x_factor,
            ly=self.grid.ly / sc.y_factor,
        )
        p = PhysicsSection(
            c0=2.0,
            alpha=self.physics.alpha * sc.x_factor,
            eta0=self.physics.eta0 * sc.y_factor,
            L=self.physics.L / sc.x_factor,
            z_cap=self.physics.z_cap / sc.x_factor,
        )
        s = SolverSection(
            dt=self.solver.dt / sc.t_factor,
            t_end=self.solver.t_end / sc.t_factor,
            frame_speed=self.solver.frame_speed * sc.t_factor / sc.x_factor,
            snapshot_every=self.solver.snapshot_every,
            dealias=self.solver.dealias,
        )
        pert = PerturbationSection(
            kind=self.perturbation.kind,
            amplitude=self.perturbation.amplitude / sc.u_factor,
            seed=self.perturbation.seed,
            x_width=self.perturbation.x_width / sc.x_factor,
            x_center=self.perturbation.x_center / sc.x_factor,
            y_mode=self.perturbation.y_mode,
            xi_min=self.perturbation.xi_min * sc.x_factor,
        )
        cfg = RunConfig(grid=g, physics=p, solver=s, perturbation=pert, experiment=self.experiment)
        cfg.validate()
        return cfg, sc

    def to_dict(self) -> dict:
        out = {}
        for sec_field in fields(self):
            sec = getattr(self, sec_field.name)
            for f in fields(sec):
                out[f"{sec_field.name}.{f.name}"] = getattr(sec, f.name)
        return out


def _coerce(raw: str, target_type):
    if target_type is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return target_type(raw)


def parse_config(text: str, env: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    sections = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    assignments = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        assignments[key.strip()] = (raw.strip(), f"line {lineno}")
    env = os.environ if env is None else env
    for name, value in env.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower().replace("_", ".", 1)
            assignments[key] = (value, f"env {name}")
    for key, (raw, where) in assignments.items():
        if "." not in key:
            raise ConfigError(f"{where}: key {key!r} has no section")
        sec_name, _, field_name = key.partition(".")
        sec = sections.get(sec_name)
        if sec is None:
            raise ConfigError(f"{where}: unknown section {sec_name!r}")
        if not any(f.name == field_name for f in fields(sec)):
            raise ConfigError(f"{where}: unknown key {key!r}")
        target_type = type(getattr(sec, field_name))
        try:
            setattr(sec, field_name, _coerce(raw, target_type))
        except (ValueError, TypeError) as e:
            raise ConfigError(f"{where}: bad value for {key}: {e}") from e
    cfg.validate()
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text)
