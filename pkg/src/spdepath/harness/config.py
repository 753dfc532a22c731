"""Experiment configuration and its flat ``key = value`` file format.

A config file has three sections and no nesting::

    [equation]
    operator_c = 9.8696044010893586
    drift = zero
    diffusion = constant
    noise = q-wiener
    noise_modes = 1024
    initial = smooth4

    [discretization]
    scheme = spectral
    levels = 8, 16, 32, 64, 128
    reference_level = 512
    horizon = 1.0
    steps = 1000

    [experiment]
    paths = 32
    p = 4
    seed = 42

Unknown keys are rejected so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from ..core import TimeGrid
from ..fem import FemRun, Mesh1D
from ..initial import InitialCondition
from ..noise import NoiseBasisSpec
from ..nonlinearity import CutoffLevel, DiffusionSpec, DriftSpec, make_diffusion, make_drift
from ..spectral import GalerkinRun, SpectralOperator

SCHEMES = ("spectral", "fem")
FEM_REFERENCES = ("self", "spectral")

SECTIONS = {
    "equation": ("operator_c", "operator_alpha", "coefficient", "drift", "drift_a", "drift_b",
                 "diffusion", "diffusion_scale", "noise", "noise_modes", "noise_decay",
                 "initial", "initial_amplitude"),
    "discretization": ("scheme", "levels", "reference_level", "reference", "horizon", "steps",
                       "stepper", "theta", "quad_size", "spectral_reference_level"),
    "experiment": ("paths", "p", "seed", "eta", "alpha", "theta_F", "theta_G", "noise_mode",
                   "cutoffs", "workers"),
}


class ConfigError(ValueError):
    """Raised for a syntactically or semantically invalid configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    # equation
    operator_c: float = math.pi**2
    operator_alpha: float = 2.0
    coefficient: float = 1.0
    drift: str = "zero"
    drift_a: float = 1.0
    drift_b: float = 0.0
    diffusion: str = "zero"
    diffusion_scale: float = 1.0
    noise: str = "q-wiener"
    noise_modes: int | None = None
    noise_decay: float = 0.0
    initial: str = "smooth4"
    initial_amplitude: float = 1.0
    # discretization
    scheme: str = "spectral"
    levels: tuple = (8, 16, 32)
    reference_level: int | None = None
    reference: str = "self"
    horizon: float = 1.0
    steps: int | None = None
    stepper: str = "exact-variance"
    theta: float = 1.0
    quad_size: int | None = None
    spectral_reference_level: int | None = None
    # experiment
    paths: int = 32
    p: float = 4.0
    seed: int = 0
    eta: float | None = None
    alpha: float | None = None
    theta_F: float | None = None
    theta_G: float | None = None
    noise_mode: str = "independent"
    cutoffs: tuple = (2.0, 4.0, 8.0)
    workers: int = 1
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.reference not in FEM_REFERENCES:
            raise ConfigError(f"reference must be one of {FEM_REFERENCES}")
        levels = tuple(int(v) for v in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels or min(levels) < 1 or list(levels) != sorted(set(levels)):
            raise ConfigError("levels must be distinct, increasing and positive")
        if self.reference_level is None:
            # reference = 4 x finest level
            object.__setattr__(self, "reference_level", 4 * levels[-1])
        if self.noise_modes is None:
            # truncation of cylindrical noise kept well above the reference level
            object.__setattr__(self, "noise_modes", max(4 * self.reference_level, 256))
        if self.steps is None:
            object.__setattr__(self, "steps", self.default_steps())
        if self.reference_level <= levels[-1]:
            raise ConfigError("reference_level must exceed every tested level")
        if self.scheme == "fem" and self.reference == "self":
            bad = [n for n in levels if self.reference_level % n]
            if bad:
                raise ConfigError(f"reference mesh must refine every mesh; not nested: {bad}")
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        if not self.p > 2:
            raise ConfigError("moment order p must exceed 2")
        if self.seed < 0 or self.seed >= 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "cutoffs", tuple(float(m) for m in self.cutoffs))
        try:
            self.time_grid()
            self.drift_spec()
            self.diffusion_spec()
            self.initial_condition()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.eta is not None and not self.constraint_holds():
            warnings.warn(
                f"eta={self.predicted_eta:.4g} violates eta + 1/(alpha p) < "
                f"min(1 + theta_F, 1/2 + theta_G - 1/p) at p={self.p}; "
                "the predicted rate lies outside the admissible range", stacklevel=2)

    def default_steps(self) -> int:
        """``T / dt`` with ``dt = 1e-3 T``.

        The plain exponential Euler stepper damps mode ``k`` by
        ``exp(lambda_k dt)`` on the noise as well, so for it ``dt`` must also
        resolve the stiffest reference mode: ``dt <= 1 / |lambda_ref|``.
        """
        steps = 1000
        if self.scheme == "spectral" and self.stepper == "euler":
            lam = abs(self.operator().eigenvalue(self.reference_level))
            steps = max(steps, math.ceil(self.horizon * lam))
        return steps

    # --- building blocks -------------------------------------------------
    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.horizon, self.steps)

    def operator(self) -> SpectralOperator:
        return SpectralOperator(self.operator_c, self.operator_alpha)

    def noise_basis(self) -> NoiseBasisSpec:
        decay = self.noise_decay if self.noise == "q-wiener" and self.noise_decay else None
        return NoiseBasisSpec(self.noise, self.noise_modes, decay=decay)

    def drift_spec(self) -> DriftSpec:
        spec = make_drift(self.drift, self.drift_a, self.drift_b)
        if self.theta_F is not None:
            spec = dataclasses.replace(spec, theta_F=self.theta_F)
        return spec

    def diffusion_spec(self) -> DiffusionSpec:
        spec = make_diffusion(self.diffusion, self.noise_basis(), self.diffusion_scale)
        if self.theta_G is not None:
            spec = dataclasses.replace(spec, theta_G=self.theta_G)
        return spec

    def initial_condition(self) -> InitialCondition:
        return InitialCondition(self.initial, self.initial_amplitude)

    def spectral_run(self, level: int, cutoff: float | None = None) -> GalerkinRun:
        quad = self.quad_size
        if quad is not None:
            quad = max(quad, 2 * max(2 * level, self.noise_modes) + 1)
        stepper = self.stepper
        if self.scheme == "fem":
            # a spectral reference for finite elements shares their time stepper,
            # so that the comparison isolates the spatial error
            stepper = "theta"
        return GalerkinRun(self.operator(), level, self.drift_spec(), self.diffusion_spec(),
                           self.time_grid(), self.initial_condition(), quad, stepper,
                           None if cutoff is None else CutoffLevel(cutoff), theta=self.theta)

    def fem_run(self, elements: int, cutoff: float | None = None) -> FemRun:
        return FemRun(Mesh1D(elements), self.coefficient, self.drift_spec(),
                      self.diffusion_spec(), self.time_grid(), self.initial_condition(),
                      None if cutoff is None else CutoffLevel(cutoff), theta=self.theta)

    def run_for(self, level: int, cutoff: float | None = None):
        if self.scheme == "spectral":
            return self.spectral_run(level, cutoff)
        return self.fem_run(level, cutoff)

    # --- rate prediction -------------------------------------------------
    @property
    def rate_alpha(self) -> float:
        return self.operator_alpha if self.alpha is None else self.alpha

    @property
    def predicted_eta(self) -> float:
        """``eta`` if set, else its supremum as ``p -> infinity``.

        The default is the almost-sure rate exponent; every smaller eta is
        admissible for large enough p. Capped at 1, where the interpolation
        argument for P1 elements stops.
        """
        if self.eta is not None:
            return self.eta
        tF = self.drift_spec().theta_F
        tG = self.diffusion_spec().theta_G
        return max(0.0, min(1.0 + tF, 0.5 + tG, 1.0))

    @property
    def predicted_rate(self) -> float:
        """``alpha * eta`` in ``n`` for spectral runs, ``2 eta`` in ``N_e`` for FEM."""
        if self.scheme == "spectral":
            return self.rate_alpha * self.predicted_eta
        return 2.0 * self.predicted_eta

    def admissible_eta(self) -> float:
        """Supremum of the eta allowed at the configured p (negative: none)."""
        tF = self.drift_spec().theta_F
        tG = self.diffusion_spec().theta_G
        bound = min(1.0 + tF, 0.5 + tG - 1.0 / self.p) - 1.0 / (self.rate_alpha * self.p)
        return min(bound, 1.0)

    def constraint_holds(self) -> bool:
        tF = self.drift_spec().theta_F
        tG = self.diffusion_spec().theta_G
        lhs = self.predicted_eta + 1.0 / (self.rate_alpha * self.p)
        return lhs < min(1.0 + tF, 0.5 + tG - 1.0 / self.p)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        if not changes:
            return self
        with warnings.catch_warnings():
            # the original construction already warned about the rate constraint
            warnings.simplefilter("ignore")
            return dataclasses.replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _convert(key: str, raw: str):
    raw = raw.strip()
    kind = _FIELD_TYPES[key]
    if key in ("levels", "cutoffs"):
        parts = [p for p in raw.replace(",", " ").split() if p]
        conv = int if key == "levels" else float
        try:
            return tuple(conv(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{key}: expected a list of numbers, got {raw!r}") from None
    if raw.lower() in ("", "none", "auto") and "None" in kind:
        return None
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = _convert(key, raw)
    return ExperimentConfig(source=source, **values)


def shipped_config_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "configs"


def resolve_config_path(name) -> Path:
    """``name`` as given if it exists, else a config shipped with the package."""
    path = Path(name)
    if path.exists():
        return path
    shipped = shipped_config_dir() / path.name
    if shipped.exists():
        return shipped
    raise FileNotFoundError(f"config file not found: {name}")


def load_config(name) -> ExperimentConfig:
    path = resolve_config_path(name)
    return parse_config(path.read_text(), source=str(path))


def format_config(config: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` (round-trips every field)."""
    lines = []
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = getattr(config, key)
            if isinstance(value, tuple):
                value = ", ".join(repr(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            elif value is None:
                value = "none"
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
