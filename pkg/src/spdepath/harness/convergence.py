"""Coupled-path convergence studies, order fitting and pathwise chi statistics.

Every path runs its reference and all tested levels on one worker, from noise
streams keyed by ``(seed, path)``. Results are reduced in path order, so the
output does not depend on how many workers were used.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import linregress

from ..core import Purpose, StreamKey
from ..fem import assemble, nested_errors, solve_fem, spectral_errors
from ..noise import sample_increments
from ..spectral import initial_fractional_norm, mode_errors, solve_spectral
from .config import ExperimentConfig

EXCLUSION_LIMIT = 0.05
CSV_HEADER = "scheme,level,path,sup_error,lp_error,p,n_paths"


class NumericalFailure(RuntimeError):
    """Too many paths produced non-finite states."""


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    stderr: float
    r2: float
    levels: tuple = ()

    def __str__(self):
        return (f"order {self.slope:.4f} +/- {self.stderr:.4f} "
                f"(R^2 = {self.r2:.6f}, {len(self.levels)} levels)")


def fit_order(levels, errors) -> OrderFit:
    """Least squares on ``(log level, log error)``; error ~ level^(-slope).

    Non-positive errors cannot be placed on a log scale; those levels are
    dropped with a warning. Fewer than three remaining points is an error.
    """
    levels = np.asarray(levels, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if levels.shape != errors.shape:
        raise ValueError("levels and errors differ in length")
    keep = errors > 0
    if not keep.all():
        warnings.warn(f"dropping levels {levels[~keep].tolist()} with non-positive error",
                      stacklevel=2)
    levels, errors = levels[keep], errors[keep]
    if levels.size < 3:
        raise ValueError("need at least three levels with positive error to fit an order")
    x, y = np.log(levels), np.log(errors)
    res = linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float((resid**2).sum()) / ss_tot
    return OrderFit(-float(res.slope), float(res.intercept), float(res.stderr), r2,
                    tuple(levels.astype(int).tolist()))


@dataclass
class ChiStatistics:
    rate_exponent: float
    chi: np.ndarray
    trend: float
    moment: float
    p: float

    def __str__(self):
        return (f"chi at rate {self.rate_exponent:.4g}: L^{self.p:g} moment {self.moment:.6g}, "
                f"max {self.chi.max():.6g}, trend slope {self.trend:+.4f}")


@dataclass
class ConvergenceReport:
    scheme: str
    levels: tuple
    reference_level: int
    paths: tuple
    errors: np.ndarray
    p: float
    excluded: tuple = ()
    predicted_rate: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    @property
    def lp_errors(self) -> np.ndarray:
        return ((self.errors**self.p).mean(axis=0)) ** (1.0 / self.p)

    def fit(self) -> OrderFit:
        return fit_order(self.levels, self.lp_errors)

    def csv_text(self) -> str:
        lines = [CSV_HEADER]
        for j, level in enumerate(self.levels):
            for i, path in enumerate(self.paths):
                lines.append(f"{self.scheme},{level},{path},{self.errors[i, j]:.17g},,,")
        for level, lp in zip(self.levels, self.lp_errors):
            lines.append(f"{self.scheme},{level},,,{lp:.17g},{self.p:.17g},{self.n_paths}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        out = [f"scheme: {self.scheme}",
               f"levels: {', '.join(map(str, self.levels))}  (reference {self.reference_level})",
               f"paths: {self.n_paths} used, {len(self.excluded)} excluded"
               + (f" {list(self.excluded)}" if self.excluded else "")]
        for key, value in self.metadata.items():
            out.append(f"{key}: {value}")
        out.append("")
        out.append(f"{'level':>8} {'L^p error':>14}")
        for level, lp in zip(self.levels, self.lp_errors):
            out.append(f"{level:>8} {lp:>14.6e}")
        out.append("")
        try:
            out.append(f"fitted {self.fit()}")
        except ValueError as exc:
            out.append(f"fitted order unavailable: {exc}")
        if self.predicted_rate is not None:
            out.append(f"predicted order {self.predicted_rate:.4f}")
            out.append(str(pathwise_chi(self, self.predicted_rate)))
        return "\n".join(out) + "\n"

    def write(self, outdir) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "errors.csv").write_text(self.csv_text())
        (outdir / "report.txt").write_text(self.summary())


def pathwise_chi(report: ConvergenceReport, rate_exponent: float) -> ChiStatistics:
    """``chi_i = max_n eps_n^(i) n^r`` and the trend of ``max_i eps_n^(i) n^r`` in ``n``.

    A trend slope near zero (or negative) means the rate holds pathwise; a
    rate chosen too optimistic by ``d`` shows up as a slope of about ``+d``.
    """
    levels = np.asarray(report.levels, dtype=float)
    scaled = report.errors * levels**rate_exponent
    chi = scaled.max(axis=1)
    worst = scaled.max(axis=0)
    if np.all(worst > 0) and levels.size >= 2:
        trend = float(np.polyfit(np.log(levels), np.log(worst), 1)[0])
    else:
        trend = float("nan")
    moment = float(np.mean(chi**report.p) ** (1.0 / report.p))
    return ChiStatistics(rate_exponent, chi, trend, moment, report.p)


# --- per-path work ------------------------------------------------------------

def _noise_table(config: ExperimentConfig, runs, path: int):
    modes = max(r.noise_modes for r in runs)
    if modes == 0:
        return None
    key = StreamKey(config.seed, path, Purpose.NOISE)
    basis = config.noise_basis()
    return sample_increments(basis, config.time_grid(), key, modes=modes, mode=config.noise_mode)


def path_errors(config: ExperimentConfig, path: int) -> np.ndarray:
    """Sup-in-time L2 errors of every level against the reference for one path.

    Raises ``FloatingPointError`` if any of the runs blows up.
    """
    if config.scheme == "spectral":
        ref_run = config.spectral_run(config.reference_level)
        runs = [config.spectral_run(n) for n in config.levels]
        table = _noise_table(config, [ref_run], path)
        ref = solve_spectral(ref_run, table=table)
        return np.array([mode_errors(ref, solve_spectral(r, table=table)).max() for r in runs])
    runs = [config.fem_run(n) for n in config.levels]
    if config.reference == "self":
        ref_run = config.fem_run(config.reference_level)
        table = _noise_table(config, [ref_run] + runs, path)
        ref = solve_fem(ref_run, table=table)
        mats = assemble(ref_run.mesh, config.coefficient)
        return np.array([nested_errors(solve_fem(r, table=table), ref, mats).max() for r in runs])
    ref_run = config.spectral_run(config.reference_level)
    table = _noise_table(config, [ref_run] + runs, path)
    coeffs = solve_spectral(ref_run, table=table)
    return np.array([spectral_errors(r.mesh, solve_fem(r, table=table), coeffs).max()
                     for r in runs])


def _path_task(args):
    config, path = args
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            errs = path_errors(config, path)
        if not np.all(np.isfinite(errs)):
            return path, None
        return path, errs
    except FloatingPointError:
        return path, None


def _metadata(config: ExperimentConfig) -> dict:
    meta = {"seed": config.seed, "dt": f"{config.time_grid().dt:.6g}",
            "horizon": config.horizon, "p": config.p, "noise": f"{config.noise} "
            f"(J={config.noise_modes}, decay={config.noise_decay:g}, {config.noise_mode})",
            "drift": config.drift, "diffusion": f"{config.diffusion} x {config.diffusion_scale:g}",
            "initial": config.initial,
            "admissible eta at p": f"{config.admissible_eta():.4g}"}
    eta = config.predicted_eta
    # spectral-equivalent proxy, also for FEM studies (no W^{2 eta,2} recipe there)
    probe = config.spectral_run(max(config.levels[-1], 256))
    meta[f"initial fractional norm (sine-series proxy, eta={eta:.3g})"] = (
        f"{initial_fractional_norm(probe, eta):.6g}")
    if config.scheme == "spectral":
        meta["stepper"] = config.stepper
        meta["quadrature sizes"] = ", ".join(
            str(config.spectral_run(n).nq) for n in config.levels + (config.reference_level,))
    else:
        meta["reference"] = config.reference
        meta["theta"] = config.theta
    return meta


def run_convergence(config: ExperimentConfig, workers: int | None = None,
                    progress=None) -> ConvergenceReport:
    """Coupled-path study described by ``config``.

    Paths whose states become non-finite are excluded and listed; more than
    5% exclusions raises :class:`NumericalFailure`.
    """
    workers = config.workers if workers is None else workers
    tasks = [(config, i) for i in range(config.paths)]
    results = {}
    if workers > 1 and config.paths > 1:
        with ProcessPoolExecutor(max_workers=min(workers, config.paths)) as pool:
            for path, errs in pool.map(_path_task, tasks):
                results[path] = errs
                if progress:
                    progress(path)
    else:
        for task in tasks:
            path, errs = _path_task(task)
            results[path] = errs
            if progress:
                progress(path)
    order = sorted(results)
    excluded = tuple(i for i in order if results[i] is None)
    kept = tuple(i for i in order if results[i] is not None)
    if len(excluded) > EXCLUSION_LIMIT * config.paths:
        raise NumericalFailure(f"{len(excluded)} of {config.paths} paths produced non-finite "
                               f"states (limit {EXCLUSION_LIMIT:.0%})")
    errors = np.array([results[i] for i in kept]).reshape(len(kept), len(config.levels))
    return ConvergenceReport(config.scheme, config.levels, config.reference_level, kept, errors,
                             config.p, excluded, config.predicted_rate, _metadata(config))
