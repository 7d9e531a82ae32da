"""INI run configuration.

Sections ``[grid]``, ``[physics]``, ``[u0]``, ``[u1]``, ``[scheme]``,
``[analyticity]`` and ``[run]`` map one-to-one onto the dataclasses below.
Any key can be overridden from the environment as
``BEAMGEVREY_<SECTION>__<KEY>`` (for example ``BEAMGEVREY_GRID__N=256``).
Validation errors name the offending field as ``section.key``.
"""
import configparser
import dataclasses
import hashlib
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .data import InitialDataSpec, build
from .spectral import OVERFLOW_CAP, Grid

ENV_PREFIX = "BEAMGEVREY_"
TASKS = ("simulate", "sweep-sigma", "track-radius", "fit-lower-bound", "dump-spectrum")


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass(frozen=True)
class GridSection:
    dim: int = 1
    n: int = 128
    length: float = 2 * np.pi


@dataclass(frozen=True)
class PhysicsSection:
    m: float = 1.0
    p: int = 3
    coupling: float = 1.0


@dataclass(frozen=True)
class SchemeSection:
    integrator: str = "strang"
    dt: float = 1e-3
    t_final: float = 1.0
    output_stride: int = 1
    max_drift: float = 1e-2
    c0: float = 0.5
    picard_tol: float = 1e-12
    picard_max_iter: int = 50


@dataclass(frozen=True)
class AnalyticitySection:
    sigma0: float = None
    sigmas: tuple = ()
    delta: float = 1.0
    noise_floor: float = 1e-13
    top_decades: float = 1.0
    fit_s: float = 0.0
    sigma_cap: float = None
    min_modes: int = 8
    superexp_ratio: float = 2.0
    cfit_sigma: float = 1e-2
    cfit_samples: int = 20
    cfit_band: int = 8
    cfit_quantile: float = 0.95

    def fit_policy(self):
        from .analyticity import FitPolicy
        return FitPolicy(self.noise_floor, self.top_decades, self.fit_s, self.sigma_cap,
                         self.min_modes, self.superexp_ratio)


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    tasks: tuple = ("simulate",)
    name: str = "run"


_SECTIONS = {
    "grid": GridSection,
    "physics": PhysicsSection,
    "u0": InitialDataSpec,
    "u1": InitialDataSpec,
    "scheme": SchemeSection,
    "analyticity": AnalyticitySection,
    "run": RunSection,
}

# element types of tuple-valued keys
_TUPLE_TYPES = {"sigmas": float, "k": int, "tasks": str}
# keys whose default is None
_OPTIONAL = {"sigma0", "sigma_cap"}


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    u0: InitialDataSpec = field(default_factory=lambda: InitialDataSpec("gaussian"))
    u1: InitialDataSpec = field(default_factory=InitialDataSpec)
    scheme: SchemeSection = field(default_factory=SchemeSection)
    analyticity: AnalyticitySection = field(default_factory=AnalyticitySection)
    run: RunSection = field(default_factory=RunSection)

    def make_grid(self):
        return Grid(self.grid.dim, self.grid.n, self.grid.length)

    def initial_state(self):
        from .beam import State
        g = self.make_grid()
        return State(build(self.u0, g), build(self.u1, g), 0.0, self.physics.m,
                     self.physics.p, self.physics.coupling)

    def integrate(self, st=None):
        from .beam import integrate
        st = self.initial_state() if st is None else st
        sc = self.scheme
        return integrate(st, sc.t_final, sc.dt, sc.integrator, sc.output_stride, sc.max_drift,
                         sc.c0, 0.0, sc.picard_tol, sc.picard_max_iter)

    def sigma0(self):
        """Configured ``sigma0``, else 0.9 times the known radius of ``u0``."""
        if self.analyticity.sigma0 is not None:
            return self.analyticity.sigma0
        radius = self.u0.known_radius
        if radius is None or not np.isfinite(radius):
            raise ConfigError("analyticity.sigma0", "required for data without a known radius")
        return 0.9 * radius

    def lemma_corpus(self, grid=None):
        from .lemmas import Sampler
        grid = self.make_grid() if grid is None else grid
        an = self.analyticity
        return list(Sampler(self.run.seed).fields(grid, an.cfit_band, an.cfit_samples))

    def lemma_constant(self, grid=None, p=None, workers=1):
        from .analyticity import fit_lemma_constant
        an = self.analyticity
        p = self.physics.p if p is None else p
        c, _ = fit_lemma_constant(self.lemma_corpus(grid), an.cfit_sigma, p, an.cfit_quantile)
        return c

    def to_ini(self):
        lines = []
        for name in _SECTIONS:
            lines.append(f"[{name}]")
            sec = getattr(self, name)
            for f in dataclasses.fields(sec):
                lines.append(f"{f.name} = {_format(getattr(sec, f.name))}")
            lines.append("")
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.to_ini().encode()).hexdigest()

    def with_seed(self, seed):
        return dataclasses.replace(self, run=dataclasses.replace(self.run, seed=int(seed)))


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(path, key, text, default):
    text = text.strip()
    try:
        if key in _TUPLE_TYPES:
            kind = _TUPLE_TYPES[key]
            return tuple(kind(t.strip()) for t in text.split(",") if t.strip())
        if key in _OPTIONAL:
            return None if text.lower() in ("none", "") else float(text)
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(path, f"cannot parse {text!r}") from None


def _section(name, items):
    cls = _SECTIONS[name]
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    if name == "u0":
        defaults["family"] = "gaussian"
    values = {}
    for key, text in items.items():
        path = f"{name}.{key}"
        if key not in defaults:
            raise ConfigError(path, "unknown key")
        values[key] = _parse(path, key, text, defaults[key])
    if name == "u0" and "family" not in values:
        values["family"] = "gaussian"
    try:
        return cls(**values)
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def _env_overrides(env):
    out = {}
    for var, text in env.items():
        if not var.startswith(ENV_PREFIX) or "__" not in var[len(ENV_PREFIX):]:
            continue
        sec, key = var[len(ENV_PREFIX):].split("__", 1)
        out.setdefault(sec.lower(), {})[key.lower()] = text
    return out


def loads(text, env=None):
    """Parse INI ``text`` into a validated :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    for sec, items in _env_overrides(os.environ if env is None else env).items():
        if sec in _SECTIONS:
            raw.setdefault(sec, {}).update(items)
    for sec in raw:
        if sec not in _SECTIONS:
            raise ConfigError(sec, "unknown section")
    cfg = RunConfig(**{s: _section(s, items) for s, items in raw.items()})
    validate(cfg)
    return cfg


def bundled_names():
    root = resources.files("beamgevrey") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load(path_or_name, env=None):
    """Load a config file, or a bundled config by name (``thm3_sweep``)."""
    if os.path.exists(path_or_name):
        with open(path_or_name) as fh:
            return loads(fh.read(), env)
    name = path_or_name[:-4] if path_or_name.endswith(".ini") else path_or_name
    if name in bundled_names():
        text = (resources.files("beamgevrey") / "configs" / f"{name}.ini").read_text()
        return loads(text, env)
    raise ConfigError("--config", f"no such file or bundled config {path_or_name!r}")


def validate(cfg):
    """Check every downstream precondition; raises ConfigError."""
    g = cfg.grid
    try:
        grid = Grid(g.dim, g.n, g.length)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None
    ph = cfg.physics
    if not ph.m > 0:
        raise ConfigError("physics.m", "must be positive")
    if ph.p < 1 or ph.p % 2 == 0:
        raise ConfigError("physics.p", "must be an odd integer >= 1")
    for name in ("u0", "u1"):
        spec = getattr(cfg, name)
        if spec.family == "random_band" and not 0 < spec.band < g.n // 2:
            raise ConfigError(f"{name}.band", "must satisfy 0 < band < N/2")
        if spec.family == "single_mode":
            if len(spec.k) > g.dim:
                raise ConfigError(f"{name}.k", f"has more than {g.dim} components")
            if any(abs(k) >= g.n // 2 for k in spec.k):
                raise ConfigError(f"{name}.k", "must be below the Nyquist index")
    sc = cfg.scheme
    if sc.integrator not in ("strang", "picard"):
        raise ConfigError("scheme.integrator", "must be 'strang' or 'picard'")
    if not sc.dt > 0:
        raise ConfigError("scheme.dt", "must be positive")
    if not sc.t_final > 0:
        raise ConfigError("scheme.t_final", "must be positive")
    if sc.output_stride < 1:
        raise ConfigError("scheme.output_stride", "must be >= 1")
    an = cfg.analyticity
    s = an.sigmas
    if any(x < 0 for x in s):
        raise ConfigError("analyticity.sigmas", "must be nonnegative")
    if any(b <= a for a, b in zip(s, s[1:])):
        raise ConfigError("analyticity.sigmas", "must be strictly increasing")
    if s and s[-1] * grid.xi_max > OVERFLOW_CAP:
        raise ConfigError("analyticity.sigmas",
                          f"sigma*|xi_max| = {s[-1] * grid.xi_max:.4g} exceeds {OVERFLOW_CAP:g}")
    if an.sigma0 is not None and not an.sigma0 > 0:
        raise ConfigError("analyticity.sigma0", "must be positive")
    if not an.delta > 0:
        raise ConfigError("analyticity.delta", "must be positive")
    if not 0 < an.noise_floor < 1:
        raise ConfigError("analyticity.noise_floor", "must lie in (0, 1)")
    if an.top_decades < 0:
        raise ConfigError("analyticity.top_decades", "must be >= 0")
    if an.min_modes < 2:
        raise ConfigError("analyticity.min_modes", "must be >= 2")
    if not 0 < an.cfit_band < g.n // 2:
        raise ConfigError("analyticity.cfit_band", "must satisfy 0 < band < N/2")
    if an.cfit_samples < 1:
        raise ConfigError("analyticity.cfit_samples", "must be >= 1")
    if not an.cfit_sigma > 0:
        raise ConfigError("analyticity.cfit_sigma", "must be positive")
    if not 0 < an.cfit_quantile <= 1:
        raise ConfigError("analyticity.cfit_quantile", "must lie in (0, 1]")
    if "sweep-sigma" in cfg.run.tasks and an.delta > sc.t_final:
        raise ConfigError("analyticity.delta", "exceeds scheme.t_final")
    for task in cfg.run.tasks:
        if task not in TASKS:
            raise ConfigError("run.tasks", f"unknown task {task!r}; expected one of {TASKS}")
    return cfg


def dumps(cfg):
    return cfg.to_ini()
