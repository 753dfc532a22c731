"""Brownian increments for truncated cylindrical and Q-Wiener noise.

Noise is represented as ``W = sum_l sqrt(q_l) W_l h_l`` over an orthonormal
basis ``h_l`` of L2(0, 1). Three bases are supported:

* ``cosine``  : ``h_l = sqrt(2) cos(l pi x)``, ``q_l = 1`` (cylindrical)
* ``sine``    : ``h_l = sqrt(2) sin(l pi x)``, ``q_l = 1`` (cylindrical)
* ``q-wiener``: ``h_l = sqrt(2) sin(l pi x)``, ``q_l`` given explicitly or ``l^(-2 decay)``

Increment ``(l, m)`` is drawn from the stream keyed by ``(seed, path, l)`` at
position ``m``; it never depends on how many modes a table holds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Purpose, StreamKey, TimeGrid, standard_normals

KINDS = ("cosine", "sine", "q-wiener")
MODES = ("independent", "bridge")


@dataclass(frozen=True)
class NoiseBasisSpec:
    kind: str = "cosine"
    modes: int = 64
    q: tuple | None = None
    decay: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.modes < 1:
            raise ValueError("need at least one noise mode")
        if self.q is not None:
            if self.kind != "q-wiener":
                raise ValueError("explicit q only for q-wiener noise")
            if len(self.q) < self.modes or min(self.q) < 0:
                raise ValueError("q must be non-negative with one entry per mode")

    @classmethod
    def power_law(cls, modes: int, decay: float) -> "NoiseBasisSpec":
        """Q-Wiener noise with ``q_j = j^(-2 decay)``."""
        return cls("q-wiener", modes, decay=decay)

    @property
    def is_cylindrical(self) -> bool:
        return self.kind != "q-wiener" or (self.q is None and not self.decay)

    def sqrt_q(self, count: int | None = None) -> np.ndarray:
        count = self.modes if count is None else count
        if self.kind != "q-wiener":
            return np.ones(count)
        if self.q is not None:
            return np.sqrt(np.asarray(self.q[:count], dtype=float))
        j = np.arange(1, count + 1, dtype=float)
        return j ** (-(self.decay or 0.0))

    def trace(self) -> float:
        return float(np.sum(self.sqrt_q() ** 2))

    def basis(self, x, count: int | None = None) -> np.ndarray:
        """Scaled basis ``sqrt(q_l) h_l(x)``, shape ``(len(x), count)``."""
        count = self.modes if count is None else count
        x = np.asarray(x, dtype=float)[:, None]
        ell = np.arange(1, count + 1)
        trig = np.cos if self.kind == "cosine" else np.sin
        return np.sqrt(2.0) * trig(np.pi * ell * x) * self.sqrt_q(count)

    def regularity(self, eps: float = 1e-3) -> float:
        """Smoothness exponent of the noise for the Dirichlet Laplacian.

        Cylindrical noise gives ``-1/4 - eps``; ``q_j = j^(-2 rho)`` gives
        ``(2 rho - 1)/4 - eps`` (Hilbert-Schmidt into the fractional space).
        """
        if self.is_cylindrical:
            return -0.25 - eps
        if self.q is not None:
            return 0.0
        return (2.0 * self.decay - 1.0) / 4.0 - eps


@dataclass
class IncrementTable:
    """``increments[l-1, m-1]`` is the increment of ``W_l`` over step ``m``."""

    increments: np.ndarray
    grid: TimeGrid
    path_index: int = 0
    mode: str = "independent"
    meta: dict = field(default_factory=dict)

    @property
    def modes(self) -> int:
        return self.increments.shape[0]

    @property
    def steps(self) -> int:
        return self.increments.shape[1]

    def truncated(self, modes: int) -> "IncrementTable":
        if modes > self.modes:
            raise ValueError(f"table holds {self.modes} modes, asked for {modes}")
        return IncrementTable(self.increments[:modes], self.grid, self.path_index,
                              self.mode, dict(self.meta))

    def by_step(self) -> np.ndarray:
        """Contiguous ``(steps, modes)`` view for time stepping."""
        return np.ascontiguousarray(self.increments.T)


def sample_increments(spec: NoiseBasisSpec, grid: TimeGrid, key: StreamKey,
                      modes: int | None = None, mode: str = "independent",
                      finest_steps: int | None = None) -> IncrementTable:
    """Draw ``modes x steps`` independent N(0, dt) increments.

    In ``bridge`` mode the increments are generated on the dyadic refinement
    with ``finest_steps`` steps and summed pairwise down to ``grid.steps``.
    Tables produced this way for grids ``M`` and ``2M`` satisfy
    ``coarse[m] == fine[2m-1] + fine[2m]`` bit for bit.
    """
    if mode not in MODES:
        raise ValueError(f"unknown increment mode {mode!r}")
    count = spec.modes if modes is None else modes
    if mode == "independent":
        sd = np.sqrt(grid.dt)
        rows = [standard_normals(_noise_key(key, ell, Purpose.NOISE), grid.steps)
                for ell in range(1, count + 1)]
        inc = sd * np.array(rows).reshape(count, grid.steps)
        return IncrementTable(inc, grid, key.path_index, mode)

    finest = grid.steps if finest_steps is None else finest_steps
    levels = _dyadic_depth(finest, grid.steps)
    fine_grid = TimeGrid(grid.horizon, finest)
    sd = np.sqrt(fine_grid.dt)
    rows = [standard_normals(_noise_key(key, ell, Purpose.NESTED_NOISE), finest)
            for ell in range(1, count + 1)]
    inc = sd * np.array(rows).reshape(count, finest)
    for _ in range(levels):
        inc = inc[:, 0::2] + inc[:, 1::2]
    return IncrementTable(inc, grid, key.path_index, mode, {"finest_steps": finest})


def check_refinement_consistency(coarse: IncrementTable, fine: IncrementTable) -> bool:
    """True iff each coarse increment is exactly the sum of its two fine halves.

    Tables drawn in independent mode are never refinement consistent, so the
    answer is ``False`` for them without looking at the numbers.
    """
    if not np.isclose(coarse.grid.horizon, fine.grid.horizon, rtol=0, atol=1e-14):
        raise ValueError("tables cover different horizons")
    if fine.steps != 2 * coarse.steps or fine.modes != coarse.modes:
        raise ValueError("fine table must have twice the steps and the same modes")
    if coarse.mode != "bridge" or fine.mode != "bridge":
        return False
    summed = fine.increments[:, 0::2] + fine.increments[:, 1::2]
    return bool(np.array_equal(summed, coarse.increments))


def noise_field(spec: NoiseBasisSpec, x, dW) -> np.ndarray:
    """Spatial increment ``sum_l sqrt(q_l) h_l(x) dW_l`` at points ``x``.

    ``dW`` has the modes on its last axis; leading axes are kept, so the
    result has shape ``dW.shape[:-1] + (len(x),)``.
    """
    dW = np.asarray(dW, dtype=float)
    return dW @ spec.basis(x, dW.shape[-1]).T


def _noise_key(key: StreamKey, ell: int, purpose: Purpose) -> StreamKey:
    return StreamKey(key.master_seed, key.path_index, purpose, ell)


def _dyadic_depth(finest: int, steps: int) -> int:
    depth = 0
    while finest > steps:
        if finest % 2:
            raise ValueError("finest_steps must be steps times a power of two")
        finest //= 2
        depth += 1
    if finest != steps:
        raise ValueError("finest_steps must be steps times a power of two")
    return depth
