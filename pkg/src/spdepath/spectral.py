"""Spectral Galerkin semidiscretization on (0, 1) with Dirichlet conditions.

States are coefficient vectors ``u_k`` in the orthonormal basis
``phi_k(x) = sqrt(2) sin(k pi x)``; ``u_k`` is the coefficient of ``phi_k``.
Nonlinear terms are projected by a discrete sine transform pair on an
oversampled interior grid, except for ``g(u) = u`` under cosine noise, where
the closed-form coupling table is used.

Time stepping is exponential: the linear part is integrated exactly, so the
mode-wise factor ``exp(lambda_k dt)`` never restricts the step size.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.fft import dst

from .core import StreamKey, TimeGrid, check_finite, default_lambda0, fractional_norm
from .initial import InitialCondition
from .noise import IncrementTable, NoiseBasisSpec, sample_increments
from .nonlinearity import CutoffLevel, DiffusionSpec, DriftSpec, make_diffusion, make_drift

STEPPERS = ("exact-variance", "euler", "theta")

# sqrt(2) (cosine basis) times the 1/4 of the triple-product integral
TABLE_COEFFICIENT = 2.0 ** -1.5
# the table is built for unnormalized sin(k pi x); the orthonormal basis sqrt(2) sin(k pi x)
# contributes two more factors of sqrt(2)
BASIS_NORMALIZATION = 2.0


@dataclass(frozen=True)
class SpectralOperator:
    """Self-adjoint operator with eigenvalues ``-c k^alpha`` and sine eigenfunctions."""

    c: float = np.pi**2
    alpha: float = 2.0

    def __post_init__(self):
        if not (self.c > 0 and self.alpha > 0):
            raise ValueError("growth constant and exponent must be positive")

    @classmethod
    def heat(cls) -> "SpectralOperator":
        return cls(np.pi**2, 2.0)

    def eigenvalues(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=float)
        return -self.c * k**self.alpha

    def eigenvalue(self, k: int) -> float:
        return -self.c * float(k) ** self.alpha

    @property
    def omega(self) -> float:
        """Upper bound of the spectrum."""
        return self.eigenvalue(1)

    @property
    def lambda0(self) -> float:
        return default_lambda0([self.omega])


def heat_eigenvalues(n: int) -> np.ndarray:
    """``(-pi^2, -4 pi^2, ..., -n^2 pi^2)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return SpectralOperator.heat().eigenvalues(n)


def sine_cos_overlap(j: int, k: int, ell: int) -> float:
    """``int_0^1 sin(j pi x) sin(k pi x) cos(l pi x) dx``."""
    if min(j, k, ell) < 1:
        raise ValueError("indices start at 1")
    return 0.25 * (float(abs(j - k) == ell) - float(j + k == ell))


@dataclass(frozen=True)
class CouplingTable:
    """Noise coupling for ``g(u) = u`` under ``W = sqrt(2) sum_l W_l cos(l pi x)``.

    Entry ``e`` says that equation ``target[e]`` receives
    ``coeff[e] * u_{source[e]} dW_{noise[e]}``, with ``coeff`` in the
    unnormalized-sine convention (magnitude ``2^(-3/2)``). Indices are 1-based.
    """

    level: int
    target: np.ndarray
    source: np.ndarray
    noise: np.ndarray
    coeff: np.ndarray
    _gather: sp.csr_matrix = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        for name in ("target", "source", "noise", "coeff"):
            getattr(self, name).setflags(write=False)
        scatter = sp.csr_matrix(
            (np.ones(self.target.size), (self.target - 1, np.arange(self.target.size))),
            shape=(self.level, self.target.size))
        object.__setattr__(self, "_gather", scatter)

    @property
    def noise_modes(self) -> int:
        return int(self.noise.max()) if self.noise.size else 0

    def counts(self) -> np.ndarray:
        return np.bincount(self.target - 1, minlength=self.level)

    def rows(self):
        for e in range(self.target.size):
            yield (int(self.target[e]), int(self.noise[e]), int(self.source[e]),
                   float(self.coeff[e]))

    def dense(self) -> np.ndarray:
        """Array ``C[k-1, j-1, l-1]`` of coefficients."""
        out = np.zeros((self.level, self.level, 2 * self.level))
        out[self.target - 1, self.source - 1, self.noise - 1] = self.coeff
        return out

    def apply(self, u, dW, normalization: float = BASIS_NORMALIZATION) -> np.ndarray:
        """Diffusion increment for orthonormal coefficients ``u`` (last axis)."""
        u = np.asarray(u, dtype=float)
        dW = np.asarray(dW, dtype=float)
        terms = (normalization * self.coeff) * u[..., self.source - 1] * dW[..., self.noise - 1]
        return np.asarray(self._gather @ terms.T).T


@lru_cache(maxsize=64)
def build_coupling_table(n: int) -> CouplingTable:
    if n < 1:
        raise ValueError("n must be >= 1")
    target, source, noise, coeff = [], [], [], []
    for k in range(1, n + 1):
        for ell in range(1, n + k + 1):
            if ell == k:
                continue
            target.append(k)
            source.append(abs(k - ell))
            noise.append(ell)
            coeff.append(np.sign(k - ell) * TABLE_COEFFICIENT)
        for ell in range(1, n - k + 1):
            target.append(k)
            source.append(k + ell)
            noise.append(ell)
            coeff.append(TABLE_COEFFICIENT)
    return CouplingTable(n, np.array(target), np.array(source), np.array(noise),
                         np.array(coeff, dtype=float))


def quadrature_nodes(nq: int) -> np.ndarray:
    return np.arange(1, nq + 1) / (nq + 1)


def synthesize(coeffs, nq: int) -> np.ndarray:
    """Values of ``sum_k u_k phi_k`` at the ``nq`` interior nodes."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    if n > nq:
        raise ValueError("quadrature grid too small for the coefficients")
    pad = np.zeros(coeffs.shape[:-1] + (nq,))
    pad[..., :n] = coeffs
    return np.sqrt(nq + 1.0) * dst(pad, type=1, norm="ortho", axis=-1)


def analyze(values, n: int) -> np.ndarray:
    """First ``n`` sine coefficients of grid values (inverse of :func:`synthesize`)."""
    values = np.asarray(values, dtype=float)
    nq = values.shape[-1]
    return dst(values, type=1, norm="ortho", axis=-1)[..., :n] / np.sqrt(nq + 1.0)


def phi1(z) -> np.ndarray:
    """``(exp(z) - 1) / z`` with a 6-term Taylor series near zero."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-5
    zs = z[small]
    out[small] = 1 + zs / 2 + zs**2 / 6 + zs**3 / 24 + zs**4 / 120 + zs**5 / 720
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


@dataclass(frozen=True)
class GalerkinRun:
    """Everything that defines one Galerkin simulation except the noise path."""

    operator: SpectralOperator = field(default_factory=SpectralOperator.heat)
    level: int = 8
    drift: DriftSpec = field(default_factory=lambda: make_drift("zero"))
    diffusion: DiffusionSpec = field(default_factory=lambda: make_diffusion("zero", NoiseBasisSpec("cosine", 1)))
    grid: TimeGrid = field(default_factory=TimeGrid)
    initial: InitialCondition = field(default_factory=InitialCondition)
    quad_size: int | None = None
    stepper: str = "exact-variance"
    cutoff: CutoffLevel | None = None
    initial_indicator: bool = True
    theta: float = 1.0

    def __post_init__(self):
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [1/2, 1]")
        if self.level < 1:
            raise ValueError("level must be >= 1")
        if self.stepper not in STEPPERS:
            raise ValueError(f"unknown stepper {self.stepper!r}")
        if self.quad_size is not None and self.quad_size < 2 * max(self.level, self.noise_modes):
            raise ValueError("quadrature size must be at least 2 * max(n, J)")

    @property
    def diffusion_route(self) -> str:
        d = self.diffusion
        if d.is_zero:
            return "zero"
        if d.form == "constant" and d.basis.kind != "cosine":
            return "diagonal"
        if d.form == "identity" and d.basis.kind == "cosine" and d.basis.is_cylindrical:
            return "table"
        return "quadrature"

    @property
    def noise_modes(self) -> int:
        """Number of noise modes the level-``n`` system actually consumes."""
        route = self.diffusion_route
        J = self.diffusion.basis.modes
        if route == "zero":
            return 0
        if route == "diagonal":
            return min(self.level, J)
        if route == "table":
            return min(2 * self.level, J)
        return J

    @property
    def nq(self) -> int:
        if self.quad_size is not None:
            return self.quad_size
        return 2 * max(2 * self.level, self.noise_modes) + 1

    def initial_modes(self) -> np.ndarray:
        u0 = self.initial.coefficients(self.level)
        if self.cutoff is not None and self.initial_indicator and np.linalg.norm(u0) > self.cutoff.m:
            return np.zeros_like(u0)
        return u0


class GalerkinSolver:
    """Precomputed stepping coefficients for a :class:`GalerkinRun`."""

    def __init__(self, run: GalerkinRun):
        self.run = run
        n, dt = run.level, run.grid.dt
        lam = run.operator.eigenvalues(n)
        self.E = np.exp(lam * dt)
        if run.stepper == "euler":
            self.W_drift = dt * self.E
            self.W_noise = self.E
        elif run.stepper == "theta":
            # same linearly implicit step as the finite element solver, mode by mode
            inv = 1.0 / (1.0 - run.theta * lam * dt)
            self.E = (1.0 + (1.0 - run.theta) * lam * dt) * inv
            self.W_drift = dt * inv
            self.W_noise = inv
        else:
            self.W_drift = dt * phi1(lam * dt)
            # stochastic convolution over one step has variance dt * phi1(2 lambda dt)
            self.W_noise = np.sqrt(phi1(2 * lam * dt))
        self.route = run.diffusion_route
        self.J = run.noise_modes
        self.nq = run.nq
        self.table = build_coupling_table(n) if self.route == "table" else None
        if self.table is not None and self.J < 2 * n:
            self.table = _truncate_table(self.table, self.J)
        if self.route == "diagonal":
            d = run.diffusion
            self.diag = d.scale * d.basis.sqrt_q(self.J)
        if self.route == "quadrature":
            self.noise_basis = run.diffusion.basis.basis(quadrature_nodes(self.nq), self.J)

    def drift_term(self, t, u, scale):
        run = self.run
        if run.drift.is_zero:
            return None
        vals = synthesize(u, self.nq)
        if scale is not None:
            vals = vals * scale[..., None]
        return analyze(run.drift.f(t, vals), run.level)

    def noise_term(self, t, u, dW, scale):
        run = self.run
        if self.route == "zero":
            return None
        if self.route == "diagonal":
            out = np.zeros(np.shape(u))
            m = self.J
            out[..., :m] = self.diag * dW[..., :m]
            return out
        if self.route == "table":
            us = u if scale is None else u * scale[..., None]
            return run.diffusion.scale * self.table.apply(us, dW[..., : self.J])
        vals = synthesize(u, self.nq)
        if scale is not None:
            vals = vals * scale[..., None]
        gvals = run.diffusion.g(t, vals)
        field_ = dW[..., : self.J] @ self.noise_basis.T
        return analyze(gvals * field_, run.level)

    def cutoff_scale(self, u):
        level = self.run.cutoff
        if level is None:
            return None
        norms = np.linalg.norm(u, axis=-1)
        if np.all(norms <= level.m):
            return None
        return np.where(norms > level.m, level.m / np.where(norms > 0, norms, 1.0), 1.0)

    def step(self, u, t, dW):
        scale = self.cutoff_scale(u)
        out = self.E * u
        d = self.drift_term(t, u, scale)
        if d is not None:
            out = out + self.W_drift * d
        g = self.noise_term(t, u, dW, scale)
        if g is not None:
            out = out + self.W_noise * g
        return out


def _truncate_table(table: CouplingTable, J: int) -> CouplingTable:
    keep = table.noise <= J
    return CouplingTable(table.level, table.target[keep].copy(), table.source[keep].copy(),
                         table.noise[keep].copy(), table.coeff[keep].copy())


def project_drift(run: GalerkinRun, t: float, u) -> np.ndarray:
    """Sine coefficients ``<f(t, u(.)), phi_k>`` for ``k <= n``."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != run.level:
        raise ValueError("state length does not match the level")
    if run.nq < 2 * run.level:
        raise ValueError("quadrature size below 2n")
    return analyze(run.drift.f(t, synthesize(u, run.nq)), run.level)


def project_diffusion(run: GalerkinRun, t: float, u, dW) -> np.ndarray:
    """Projected diffusion increment ``P_n G(t, u) dW`` (before time weighting)."""
    solver = GalerkinSolver(run)
    g = solver.noise_term(t, np.asarray(u, dtype=float), np.asarray(dW, dtype=float), None)
    return np.zeros(run.level) if g is None else g


def step_exponential_euler(run: GalerkinRun, state, t: float, dW, solver=None) -> np.ndarray:
    """One exponential step.

    With ``stepper='euler'``: ``u+ = e^{dt L} (u + dt P_n F + P_n G dW)``.
    With ``stepper='exact-variance'``: the drift is weighted by
    ``dt phi1(dt L)`` and the noise by ``sqrt(phi1(2 dt L))``, which gives each
    mode the exact one-step variance of its stochastic convolution.
    With ``stepper='theta'``: the linearly implicit theta step used by the
    finite element solver, ``u+ = (u + (1-theta) dt L u + dt F + G dW) / (1 - theta dt L)``.
    """
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != run.level:
        raise ValueError("state length does not match the level")
    solver = solver or GalerkinSolver(run)
    out = solver.step(state, t, np.asarray(dW, dtype=float))
    return check_finite(out, "Galerkin state")


def resolvent_defect_spectral(op: SpectralOperator, n: int, delta: float,
                              lambda0: float | None = None) -> float:
    """``sup_{k>n} |lambda0 - lambda_k|^(-delta)``, attained at ``k = n + 1``."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    lambda0 = op.lambda0 if lambda0 is None else lambda0
    if not lambda0 > op.omega:
        raise ValueError("lambda0 must exceed the top eigenvalue")
    return abs(lambda0 - op.eigenvalue(n + 1)) ** (-delta)


def noise_table_for(run: GalerkinRun, key: StreamKey, modes: int | None = None) -> IncrementTable:
    modes = max(run.noise_modes, 1) if modes is None else modes
    return sample_increments(run.diffusion.basis, run.grid, key, modes=modes)


def solve_spectral(run: GalerkinRun, key: StreamKey | None = None,
                   table: IncrementTable | None = None) -> np.ndarray:
    """Trajectory ``(steps + 1, n)`` of Galerkin coefficients on the grid."""
    solver = GalerkinSolver(run)
    if table is None and solver.J:
        if key is None:
            raise ValueError("need a stream key or an increment table")
        table = noise_table_for(run, key)
    if table is None:
        dW = np.zeros((run.grid.steps, 1))
    else:
        if table.modes < solver.J:
            raise ValueError(f"run needs {solver.J} noise modes, table has {table.modes}")
        dW = table.by_step()
    t = run.grid.nodes
    traj = np.empty((run.grid.steps + 1, run.level))
    u = run.initial_modes()
    traj[0] = u
    for m in range(run.grid.steps):
        u = solver.step(u, t[m], dW[m])
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite Galerkin state at step {m + 1}")
        traj[m + 1] = u
    return traj


def solve_spectral_final(run: GalerkinRun, keys) -> np.ndarray:
    """Final states for many paths at once, shape ``(paths, n)``."""
    solver = GalerkinSolver(run)
    J = max(solver.J, 1)
    tables = np.stack([noise_table_for(run, k, J).by_step() for k in keys], axis=1)
    t = run.grid.nodes
    u = np.tile(run.initial_modes(), (len(keys), 1))
    for m in range(run.grid.steps):
        u = solver.step(u, t[m], tables[m])
    return check_finite(u, "Galerkin states")


def mode_errors(reference, approx) -> np.ndarray:
    """L2 distance at every grid time between a level-N and a level-n trajectory."""
    reference = np.asarray(reference)
    approx = np.asarray(approx)
    n = approx.shape[-1]
    if reference.shape[-1] < n:
        raise ValueError("reference must have at least as many modes")
    head = reference[..., :n] - approx
    tail = reference[..., n:]
    return np.sqrt((head**2).sum(axis=-1) + (tail**2).sum(axis=-1))


def initial_fractional_norm(run: GalerkinRun, eta: float) -> float:
    lam = run.operator.eigenvalues(run.level)
    return fractional_norm(run.initial.coefficients(run.level), eta, run.operator.lambda0, lam)
