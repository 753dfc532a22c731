"""Localization by norm cutoffs: nested cutoff solutions agree until the first exit.

For cutoffs ``m1 < m2`` driven by the same noise, the two solutions are
computed by identical floating-point operations as long as the state stays
inside the ball of radius ``m1``; they must therefore agree bit for bit up to
and including the first grid step where the norm reaches ``m1``.

Each cutoff solution starts from ``1{|x0| <= m} x0``. When ``|x0| > m1`` the
two runs start from different data, the exit time of ``m1`` is 0 and the
agreement window is empty.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Purpose, StreamKey
from ..fem import FemSolver, l2_project, solve_fem
from ..noise import sample_increments
from ..nonlinearity import CutoffLevel, first_exit_step
from ..spectral import solve_spectral
from .config import ExperimentConfig


class ConsistencyError(RuntimeError):
    """Nested cutoff solutions disagreed before the smaller cutoff was reached."""


@dataclass
class PairCheck:
    path: int
    m1: float
    m2: float
    exit_step: int | None
    compared_steps: int
    agree: bool

    @property
    def vacuous(self) -> bool:
        return self.exit_step == 0


@dataclass
class LocalizationReport:
    cutoffs: tuple
    level: int
    paths: int
    exit_steps: dict = field(default_factory=dict)
    pairs: list = field(default_factory=list)

    def survival_fraction(self, m: float) -> float:
        """Fraction of paths with ``tau_m = T`` (the norm never reached ``m``)."""
        steps = self.exit_steps[m]
        return sum(e is None for e in steps) / len(steps)

    @property
    def fractions(self) -> list:
        return [self.survival_fraction(m) for m in self.cutoffs]

    @property
    def all_agree(self) -> bool:
        return all(p.agree for p in self.pairs)

    @property
    def monotone(self) -> bool:
        f = self.fractions
        return all(a <= b for a, b in zip(f, f[1:]))

    def summary(self) -> str:
        out = [f"level {self.level}, {self.paths} paths",
               f"{'m':>8} {'P(tau_m = T)':>14} {'paths exited':>14}"]
        for m in self.cutoffs:
            exited = sum(e is not None for e in self.exit_steps[m])
            out.append(f"{m:>8g} {self.survival_fraction(m):>14.4f} {exited:>14}")
        vac = sum(p.vacuous for p in self.pairs)
        bad = [p for p in self.pairs if not p.agree]
        out.append(f"pair checks: {len(self.pairs)} ({vac} vacuous), disagreements: {len(bad)}")
        out.append(f"survival fraction nondecreasing in m: {self.monotone}")
        return "\n".join(out) + "\n"

    def csv_text(self) -> str:
        lines = ["path,m1,m2,exit_step,compared_steps,agree"]
        for p in self.pairs:
            e = "" if p.exit_step is None else p.exit_step
            lines.append(f"{p.path},{p.m1:.17g},{p.m2:.17g},{e},{p.compared_steps},{int(p.agree)}")
        return "\n".join(lines) + "\n"


def _initial_norm(config: ExperimentConfig, level: int) -> float:
    """Discrete L2 norm of the initial data before the indicator is applied."""
    if config.scheme == "spectral":
        return float(np.linalg.norm(config.initial_condition().coefficients(level)))
    run = config.fem_run(level)
    solver = FemSolver(run)
    return float(solver.mats.l2_norm(l2_project(run.mesh, solver.mats, run.initial)))


def _trajectory_and_norms(config: ExperimentConfig, level: int, m: float, table):
    run = config.run_for(level, cutoff=m)
    if config.scheme == "spectral":
        traj = solve_spectral(run, table=table)
        return traj, np.linalg.norm(traj, axis=-1)
    traj = solve_fem(run, table=table)
    return traj, FemSolver(run).mats.l2_norm(traj)


def run_localization(config: ExperimentConfig, cutoffs=None, level: int | None = None,
                     strict: bool = True) -> LocalizationReport:
    """Solve every path under every cutoff and compare nested pairs.

    ``level`` defaults to the finest configured level. With ``strict`` a
    disagreement inside the agreement window raises :class:`ConsistencyError`.
    """
    cutoffs = tuple(sorted(float(m) for m in (cutoffs or config.cutoffs)))
    level = config.levels[-1] if level is None else level
    probe = config.run_for(level)
    x0_norm = _initial_norm(config, level)
    report = LocalizationReport(cutoffs, level, config.paths, {m: [] for m in cutoffs})
    for path in range(config.paths):
        table = None
        if probe.noise_modes:
            key = StreamKey(config.seed, path, Purpose.NOISE)
            table = sample_increments(config.noise_basis(), config.time_grid(), key,
                                      modes=probe.noise_modes, mode=config.noise_mode)
        trajs, exits = {}, {}
        for m in cutoffs:
            traj, norms = _trajectory_and_norms(config, level, m, table)
            trajs[m] = traj
            # initial data outside the ball are replaced by 0: immediate exit
            exits[m] = 0 if x0_norm > m else first_exit_step(norms, CutoffLevel(m))
            report.exit_steps[m].append(exits[m])
        for i, m1 in enumerate(cutoffs):
            e = exits[m1]
            if e is None:
                upto = len(trajs[m1])
            elif x0_norm > m1:
                upto = 0  # different initial data: nothing to compare
            else:
                upto = e + 1
            for m2 in cutoffs[i + 1:]:
                agree = bool(np.array_equal(trajs[m1][:upto], trajs[m2][:upto]))
                check = PairCheck(path, m1, m2, e, upto, agree)
                report.pairs.append(check)
                if strict and not agree:
                    raise ConsistencyError(
                        f"path {path}: cutoffs {m1:g} and {m2:g} disagree before step {upto}")
    return report
