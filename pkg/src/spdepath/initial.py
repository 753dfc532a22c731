"""Initial conditions on (0, 1) with homogeneous Dirichlet data.

Each entry gives the function itself (for finite-element projection) and its
coefficients in the orthonormal sine basis ``sqrt(2) sin(k pi x)`` (for the
Galerkin solver). Closed forms are used where they exist.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dst

LABELS = ("zero", "sine", "smooth4", "parabola")


@dataclass(frozen=True)
class InitialCondition:
    label: str = "smooth4"
    amplitude: float = 1.0

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown initial condition {self.label!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.label == "zero":
            u = np.zeros_like(x)
        elif self.label == "sine":
            u = np.sin(np.pi * x)
        elif self.label == "smooth4":
            k = np.arange(1, 5)
            u = (np.sqrt(2.0) * np.sin(np.pi * np.multiply.outer(x, k)) / k**2).sum(axis=-1)
        else:
            u = x * (1.0 - x)
        return self.amplitude * u

    def coefficients(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=float)
        c = np.zeros(n)
        if self.label == "sine":
            c[0] = 1.0 / np.sqrt(2.0)
        elif self.label == "smooth4":
            m = min(n, 4)
            c[:m] = 1.0 / k[:m] ** 2
        elif self.label == "parabola":
            odd = (k % 2) == 1
            c[odd] = 4.0 * np.sqrt(2.0) / (np.pi * k[odd]) ** 3
        return self.amplitude * c


def sine_coefficients(func, n: int, nodes: int = 1 << 15) -> np.ndarray:
    """Numerical sine coefficients by a discrete sine transform on ``nodes`` points."""
    x = np.arange(1, nodes + 1) / (nodes + 1)
    c = dst(func(x), type=1, norm="ortho") / np.sqrt(nodes + 1)
    return c[:n]
