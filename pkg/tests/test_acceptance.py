"""End-to-end acceptance checks, one test per criterion.

Each test records ``criterion``, ``measured`` and ``target`` properties; the
terminal summary (see ``conftest.py``) prints one PASS/FAIL line per
criterion. Tolerances are the stated ones and are not to be relaxed.
"""
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from spdepath.core import Purpose, StreamKey, TimeGrid
from spdepath.fem import FemRun, Mesh1D, elliptic_defect, l2_error_vs_function, solve_fem
from spdepath.harness.config import load_config
from spdepath.harness.convergence import fit_order, run_convergence
from spdepath.harness.defects import spectral_slope
from spdepath.harness.localization import run_localization
from spdepath.initial import InitialCondition
from spdepath.noise import NoiseBasisSpec, sample_increments
from spdepath.spectral import (SpectralOperator, build_coupling_table,
                               resolvent_defect_spectral, solve_spectral_final)

pytestmark = pytest.mark.acceptance


def _record(record_property, number, measured, target):
    record_property("criterion", number)
    record_property("measured", measured)
    record_property("target", target)


def test_criterion_01_white_noise_spectral_rate(report_of, record_property):
    fit = report_of("heat_white.cfg").fit()
    _record(record_property, 1, f"order {fit.slope:.4f}", "[0.40, 0.60]")
    assert 0.40 <= fit.slope <= 0.60


def test_criterion_02_multiplicative_spectral_rate(report_of, record_property):
    fit = report_of("heat_mult.cfg").fit()
    _record(record_property, 2, f"order {fit.slope:.4f}", "[0.35, 0.65]")
    assert 0.35 <= fit.slope <= 0.65


def _overlap(j, k, ell):
    f = lambda x: np.sin(j * np.pi * x) * np.sin(k * np.pi * x) * np.cos(ell * np.pi * x)  # noqa: E731
    return quad(f, 0.0, 1.0, limit=200, epsabs=1e-14, epsrel=1e-14)[0]


def test_criterion_03_coupling_table_oracle(record_property):
    worst, max_excess = 0.0, -np.inf
    for n in range(1, 17):
        dense = build_coupling_table(n).dense()
        table = build_coupling_table(n)
        max_excess = max(max_excess, int(table.counts().max()) - (2 * n - 1))
        for k in range(1, n + 1):
            for j in range(1, n + 1):
                for ell in range(1, 2 * n + 1):
                    expect = np.sqrt(2.0) * _overlap(j, k, ell)
                    worst = max(worst, abs(dense[k - 1, j - 1, ell - 1] - expect))
    _record(record_property, 3, f"max |entry - quadrature| {worst:.2e}, "
            f"max(count - (2n-1)) {max_excess}", "<= 1e-10 and <= 0")
    assert worst <= 1e-10
    assert max_excess <= 0


def test_criterion_04_spectral_resolvent_defect(record_property):
    op = SpectralOperator.heat()
    worst = 0.0
    for delta in (0.0, 0.25, 0.5, 1.0):
        for n in range(1, 1001):
            value = resolvent_defect_spectral(op, n, delta)
            expect = abs(op.lambda0 - op.eigenvalue(n + 1)) ** (-delta)
            worst = max(worst, abs(value - expect) / expect)
    levels = np.unique(np.geomspace(1, 1000, 25).astype(int))
    slope_err = max(abs(spectral_slope(op, levels, d).slope - op.alpha * d)
                    for d in (0.0, 0.25, 0.5, 1.0))
    _record(record_property, 4, f"max rel. deviation {worst:.1e}, max slope error "
            f"{slope_err:.1e}", "machine precision, slope alpha*delta +/- 1e-6")
    assert worst <= 4 * np.finfo(float).eps
    assert slope_err <= 1e-6


def test_criterion_05_fem_elliptic_slope(record_property):
    elements = (8, 16, 32, 64, 128)
    f = lambda x: np.sin(np.pi * x)  # noqa: E731
    w = lambda x: np.sin(np.pi * x) / np.pi**2  # noqa: E731
    fit = fit_order(elements, [elliptic_defect(Mesh1D(n), f, exact=w) for n in elements])
    _record(record_property, 5, f"slope {fit.slope:.4f}", "2.0 +/- 0.1")
    assert fit.slope == pytest.approx(2.0, abs=0.1)


def test_criterion_06_fem_deterministic_order(record_property):
    # Crank-Nicolson (theta = 1/2) keeps the time error below the spatial
    # error at dt = 1e-5; backward Euler contaminates the finest meshes
    elements = (8, 16, 32, 64, 128)
    horizon = 0.1
    exact = lambda x: np.exp(-np.pi**2 * horizon) * np.sin(np.pi * x)  # noqa: E731
    errors = []
    for n in elements:
        run = FemRun(mesh=Mesh1D(n), grid=TimeGrid(horizon, 10000),
                     initial=InitialCondition("sine"), theta=0.5)
        errors.append(l2_error_vs_function(run.mesh, solve_fem(run)[-1], exact))
    fit = fit_order(elements, errors)
    _record(record_property, 6, f"slope {fit.slope:.4f}", "2.0 +/- 0.15")
    assert fit.slope == pytest.approx(2.0, abs=0.15)


def test_criterion_07_fem_stochastic_rate(report_of, record_property):
    fit = report_of("fem_smooth.cfg").fit()
    _record(record_property, 7, f"order {fit.slope:.4f}", ">= 1.2")
    assert fit.slope >= 1.2


def test_criterion_08_ou_variance(record_property):
    config = load_config("ou.cfg")
    run = config.spectral_run(1)
    assert run.operator.eigenvalue(1) == -1.0
    keys = [StreamKey(config.seed, i, Purpose.NOISE) for i in range(config.paths)]
    x = solve_spectral_final(run, keys)[:, 0]
    var = x.var(ddof=1)
    target = (1.0 - np.exp(-2.0 * config.horizon)) / 2.0
    # standard error of the sample variance of a Gaussian sample
    se = target * np.sqrt(2.0 / (x.size - 1))
    z = (var - target) / se
    _record(record_property, 8, f"variance {var:.5f} vs {target:.5f} ({z:+.2f} SE)",
            "within 3 SE")
    assert config.paths == 10_000
    assert abs(z) <= 3.0


def test_criterion_09_localization(record_property):
    config = load_config("localize.cfg")
    report = run_localization(config, strict=False)
    fractions = report.fractions
    _record(record_property, 9, f"survival {fractions}, pairs agree {report.all_agree}",
            "all pairs agree, nondecreasing, 1 at m=8")
    assert report.cutoffs == (2.0, 4.0, 8.0)
    assert config.paths == 64
    assert report.all_agree
    assert report.monotone
    assert report.survival_fraction(8.0) == 1.0


def test_criterion_10_determinism(record_property):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        config = load_config("heat_white.cfg").with_overrides(paths=4)
    serial = run_convergence(config, workers=1).csv_text()
    parallel = run_convergence(config, workers=4).csv_text()

    basis = NoiseBasisSpec("q-wiener", 64)
    grid = TimeGrid(1.0, 256)
    key = StreamKey(42, 3, Purpose.NOISE)
    shared = True
    for mode in ("independent", "bridge"):
        full = sample_increments(basis, grid, key, modes=64, mode=mode, finest_steps=1024)
        for modes in (1, 8, 16, 33):
            part = sample_increments(basis, grid, key, modes=modes, mode=mode, finest_steps=1024)
            shared &= np.array_equal(part.increments, full.increments[:modes])
    _record(record_property, 10, f"csv identical {serial == parallel}, "
            f"shared modes identical {shared}", "byte-identical")
    assert serial == parallel
    assert shared
