"""Shared building blocks: time grids, keyed random streams, fractional norms.

Random draws are counter based. A :class:`StreamKey` selects a Philox key from
``(master_seed, path, purpose, component)``; the Philox counter then runs over
the time steps. The ``m``-th normal drawn from a stream is therefore a pure
function of ``(seed, path, purpose, component, m)``, which is what lets a
coarse and a fine truncation level consume identical Brownian increments for
the modes they share.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


class Purpose(enum.IntEnum):
    """What a stream is used for; part of the key so purposes never collide."""

    NOISE = 1
    NESTED_NOISE = 2
    INITIAL = 3
    TEST = 15


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_m = m * dt`` on ``[0, horizon]`` with ``steps`` intervals."""

    horizon: float = 1.0
    steps: int = 1000

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.steps + 1) * self.dt
        t[-1] = self.horizon
        return t

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * factor)


@dataclass(frozen=True)
class StreamKey:
    """Address of one random stream.

    ``component`` is the noise mode index for noise streams. The time step is
    not part of the key: it is the position inside the stream.
    """

    master_seed: int
    path_index: int = 0
    purpose: Purpose = Purpose.NOISE
    component: int = 0

    def __post_init__(self):
        if not 0 <= self.path_index < (1 << 32):
            raise ValueError("path_index must fit in 32 bits")
        if not 0 <= self.component < (1 << 28):
            raise ValueError("component must fit in 28 bits")
        if not 0 <= int(self.purpose) < 16:
            raise ValueError("purpose must fit in 4 bits")

    def with_component(self, component: int) -> "StreamKey":
        return StreamKey(self.master_seed, self.path_index, self.purpose, component)

    def philox_key(self) -> np.ndarray:
        lo = self.master_seed & _MASK64
        hi = (self.path_index << 32) | (int(self.purpose) << 28) | self.component
        return np.array([lo, hi], dtype=np.uint64)


def derive_stream(key: StreamKey) -> np.random.Generator:
    """Deterministic generator for ``key`` (fresh Philox counter at zero)."""
    return np.random.Generator(np.random.Philox(key=key.philox_key()))


def standard_normals(key: StreamKey, count: int) -> np.ndarray:
    """First ``count`` standard normals of the stream addressed by ``key``."""
    return derive_stream(key).standard_normal(count)


def check_finite(v, what: str = "state") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise FloatingPointError(f"non-finite entries in {what}")
    return v


def default_lambda0(eigenvalues) -> float:
    """Resolvent shift used throughout: ``1 + max(0, sup_k lambda_k)``."""
    lam = np.asarray(eigenvalues, dtype=float)
    top = float(lam.max()) if lam.size else 0.0
    return 1.0 + max(0.0, top)


def fractional_norm(v, eta: float, lambda0: float, eigenvalues) -> float:
    """Norm of ``v`` in the fractional domain space of order ``eta``.

    ``v`` holds coefficients in the (orthonormal) eigenbasis, so the norm is
    ``sqrt(sum_k |lambda0 - lambda_k|^(2 eta) v_k^2)``.
    """
    v = np.asarray(v, dtype=float)
    lam = np.asarray(eigenvalues, dtype=float)
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if v.shape[-1] > lam.size:
        raise ValueError("more coefficients than eigenvalues")
    lam = lam[: v.shape[-1]]
    if not lambda0 > lam.max():
        raise ValueError("lambda0 must lie strictly right of the spectrum")
    a = np.abs(v) if eta == 0 else np.abs(lambda0 - lam) ** eta * np.abs(v)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0 or not np.isfinite(top):
        return top
    # scale first so that tiny or huge coefficients neither underflow nor overflow
    return top * float(np.sqrt(((a / top) ** 2).sum()))
