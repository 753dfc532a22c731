"""Resolvent-defect tables for both discretizations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fem import Mesh1D, elliptic_defect, elliptic_defect_norm
from ..spectral import SpectralOperator, resolvent_defect_spectral
from .convergence import OrderFit, fit_order

DEFAULT_DELTAS = (0.0, 0.25, 0.5, 1.0)


@dataclass
class DefectTable:
    kind: str
    levels: tuple
    columns: dict
    fits: dict

    def summary(self) -> str:
        names = list(self.columns)
        out = [f"{self.kind} defects", f"{'level':>8} " + " ".join(f"{c:>18}" for c in names)]
        for i, n in enumerate(self.levels):
            out.append(f"{n:>8} " + " ".join(f"{self.columns[c][i]:>18.10e}" for c in names))
        for c, fit in self.fits.items():
            out.append(f"{c}: {fit}")
        return "\n".join(out) + "\n"

    def csv_text(self) -> str:
        names = list(self.columns)
        lines = ["level," + ",".join(names)]
        for i, n in enumerate(self.levels):
            lines.append(f"{n}," + ",".join(f"{self.columns[c][i]:.17g}" for c in names))
        return "\n".join(lines) + "\n"


def spectral_slope(op: SpectralOperator, levels, delta: float) -> OrderFit:
    """Decay order of ``|lambda0 - lambda_{n+1}|^-delta`` in ``n``.

    With ``lambda0 = 0`` and abscissa ``n + 1`` the defect is exactly
    ``c^-delta (n+1)^(-alpha delta)``, so the fitted slope is ``alpha delta``
    up to rounding. (``lambda0 = 0`` is admissible because the spectrum lies
    strictly below zero.)
    """
    values = [resolvent_defect_spectral(op, n, delta, lambda0=0.0) for n in levels]
    return fit_order(np.asarray(levels) + 1, values) if delta > 0 else OrderFit(
        0.0, float(np.log(values[0])), 0.0, 1.0, tuple(int(n) + 1 for n in levels))


def spectral_defects(levels, deltas=DEFAULT_DELTAS, op: SpectralOperator | None = None,
                     lambda0: float | None = None) -> DefectTable:
    op = op or SpectralOperator.heat()
    levels = tuple(int(n) for n in levels)
    columns = {f"delta={d:g}": np.array([resolvent_defect_spectral(op, n, d, lambda0)
                                         for n in levels]) for d in deltas}
    fits = {}
    if len(levels) >= 3:
        fits = {f"delta={d:g} slope in n+1 (lambda0=0)": spectral_slope(op, levels, d)
                for d in deltas}
    return DefectTable("spectral", levels, columns, fits)


def fem_defects(elements=(8, 16, 32, 64, 128)) -> DefectTable:
    """Elliptic defect for ``f = sin(pi x)`` plus the operator-norm proxies."""
    elements = tuple(int(n) for n in elements)
    f = lambda x: np.sin(np.pi * x)  # noqa: E731
    w = lambda x: np.sin(np.pi * x) / np.pi**2  # noqa: E731
    columns = {
        "elliptic sin": np.array([elliptic_defect(Mesh1D(n), f, exact=w) for n in elements]),
        "norm delta=1": np.array([elliptic_defect_norm(Mesh1D(n), 1.0) for n in elements]),
        "norm delta=0.5": np.array([elliptic_defect_norm(Mesh1D(n), 0.5) for n in elements]),
    }
    fits = {}
    if len(elements) >= 3:
        fits = {name: fit_order(elements, col) for name, col in columns.items()}
    return DefectTable("fem", elements, columns, fits)


def defect_study(config) -> DefectTable:
    if config.scheme == "spectral":
        return spectral_defects(config.levels, op=config.operator())
    return fem_defects(config.levels)
