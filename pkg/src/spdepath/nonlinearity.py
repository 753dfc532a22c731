"""Nemytskii drift and diffusion maps, plus the norm cutoff used for localization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .noise import NoiseBasisSpec

LIPSCHITZ_KINDS = ("global", "local")


@dataclass(frozen=True)
class DriftSpec:
    f: Callable
    theta_F: float = 0.0
    lipschitz_kind: str = "global"
    label: str = "custom"
    form: str = "general"

    def __post_init__(self):
        if not self.theta_F > -1:
            raise ValueError("theta_F must exceed -1")
        if self.lipschitz_kind not in LIPSCHITZ_KINDS:
            raise ValueError(f"unknown lipschitz kind {self.lipschitz_kind!r}")

    @property
    def is_zero(self) -> bool:
        return self.form == "zero"


@dataclass(frozen=True)
class DiffusionSpec:
    """Pointwise multiplier ``g`` acting on the noise ``basis``.

    ``form`` tells the solvers which fast path applies: ``zero``,
    ``constant`` (additive, ``scale`` is the constant), ``identity``
    (``g(u) = scale * u``) or ``general`` (quadrature only).
    """

    g: Callable
    basis: NoiseBasisSpec = field(default_factory=NoiseBasisSpec)
    theta_G: float | None = None
    lipschitz_kind: str = "global"
    label: str = "custom"
    form: str = "general"
    scale: float = 1.0

    def __post_init__(self):
        if self.theta_G is None:
            object.__setattr__(self, "theta_G", self.basis.regularity())
        if not self.theta_G > -0.5:
            raise ValueError("theta_G must exceed -1/2")
        if self.lipschitz_kind not in LIPSCHITZ_KINDS:
            raise ValueError(f"unknown lipschitz kind {self.lipschitz_kind!r}")

    @property
    def is_zero(self) -> bool:
        return self.form == "zero"


def make_drift(label: str, a: float = 1.0, b: float = 0.0) -> DriftSpec:
    """Catalog: ``zero``, ``identity``, ``affine`` (a*u + b), ``sin-square``."""
    if label == "zero":
        return DriftSpec(lambda t, u: np.zeros_like(u), label=label, form="zero")
    if label == "identity":
        return DriftSpec(lambda t, u: np.array(u, dtype=float, copy=True), label=label)
    if label == "affine":
        return DriftSpec(lambda t, u: a * u + b, label=label)
    if label == "sin-square":
        return DriftSpec(lambda t, u: np.sin(u * u), lipschitz_kind="local", label=label)
    raise ValueError(f"unknown drift {label!r}")


def make_diffusion(label: str, basis: NoiseBasisSpec, scale: float = 1.0) -> DiffusionSpec:
    """Catalog: ``zero``, ``constant`` (additive), ``identity``, ``bounded``."""
    if label == "zero":
        # G = 0 is as smooth as it gets: no constraint from the noise side
        return DiffusionSpec(lambda t, u: np.zeros_like(u), basis, theta_G=float("inf"),
                             label=label, form="zero", scale=0.0)
    if label in ("constant", "additive"):
        return DiffusionSpec(lambda t, u: np.full_like(u, scale, dtype=float), basis,
                             label="constant", form="constant", scale=scale)
    if label in ("identity", "multiplicative"):
        return DiffusionSpec(lambda t, u: scale * u, basis, label="identity",
                             form="identity", scale=scale)
    if label == "bounded":
        return DiffusionSpec(lambda t, u: scale * u / (1.0 + u * u), basis, label=label,
                             scale=scale)
    raise ValueError(f"unknown diffusion {label!r}")


def _checked(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.isnan(u).any():
        raise ValueError("NaN in nonlinearity input")
    return u


def apply_drift(spec: DriftSpec, t: float, u_values) -> np.ndarray:
    return spec.f(t, _checked(u_values))


def apply_diffusion(spec: DiffusionSpec, t: float, u_values) -> np.ndarray:
    return spec.g(t, _checked(u_values))


@dataclass(frozen=True)
class CutoffLevel:
    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("cutoff level must be positive")


def scale_factor(level: CutoffLevel | None, norm_of_state: float) -> float:
    """``min(1, m / |x|)``; exactly 1 inside the ball and for ``|x| = 0``."""
    if level is None or norm_of_state <= level.m:
        return 1.0
    return level.m / norm_of_state


@dataclass(frozen=True)
class CutoffContext:
    """Evaluates the drift and diffusion at the rescaled state ``s * x``."""

    drift: DriftSpec
    diffusion: DiffusionSpec
    scale: float

    @property
    def active(self) -> bool:
        return self.scale != 1.0

    def rescale(self, u):
        # identity context must leave the state untouched, bit for bit
        return self.scale * u if self.active else u

    def f(self, t, u_values):
        return apply_drift(self.drift, t, self.rescale(u_values))

    def g(self, t, u_values):
        return apply_diffusion(self.diffusion, t, self.rescale(u_values))


def cutoff(spec_f: DriftSpec, spec_g: DiffusionSpec, level: CutoffLevel | None,
           norm_of_state: float) -> CutoffContext:
    if norm_of_state < 0:
        raise ValueError("a norm cannot be negative")
    return CutoffContext(spec_f, spec_g, scale_factor(level, norm_of_state))


def first_exit_step(path_norms, level: CutoffLevel) -> int | None:
    """First grid index whose norm reaches the cutoff, ``None`` if it never does."""
    hits = np.flatnonzero(np.asarray(path_norms, dtype=float) >= level.m)
    return int(hits[0]) if hits.size else None
