"""Piecewise-linear finite elements on a uniform mesh of (0, 1), Dirichlet BCs.

Unknowns are the values at the ``N = N_e - 1`` interior nodes. All element
integrals use 3-point Gauss quadrature. Matrices are symmetric tridiagonal and
stored as ``(diag, off)`` pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, LinAlgError

from .core import StreamKey, TimeGrid, check_finite
from .initial import InitialCondition
from .noise import IncrementTable, NoiseBasisSpec, sample_increments
from .nonlinearity import CutoffLevel, DiffusionSpec, DriftSpec, make_diffusion, make_drift

GAUSS_XI = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass(frozen=True)
class Mesh1D:
    n_elements: int

    def __post_init__(self):
        if self.n_elements < 2:
            raise ValueError("need at least two elements")

    @property
    def h(self) -> float:
        return 1.0 / self.n_elements

    @property
    def n_interior(self) -> int:
        return self.n_elements - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_elements + 1) / self.n_elements

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def gauss_points(self) -> np.ndarray:
        """Quadrature points, shape ``(N_e, 3)``."""
        return (np.arange(self.n_elements)[:, None] + GAUSS_XI) * self.h

    @property
    def gauss_weights(self) -> np.ndarray:
        return self.h * GAUSS_W

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_elements) + 0.5) * self.h


@dataclass(frozen=True)
class FemMatrices:
    mesh: Mesh1D
    mass_diag: np.ndarray
    mass_off: np.ndarray
    stiff_diag: np.ndarray
    stiff_off: np.ndarray
    coefficient: np.ndarray = field(repr=False, default=None)

    def mass(self, u):
        return _tri_matvec(self.mass_diag, self.mass_off, u)

    def stiffness(self, u):
        return _tri_matvec(self.stiff_diag, self.stiff_off, u)

    def dense_mass(self) -> np.ndarray:
        return _tri_dense(self.mass_diag, self.mass_off)

    def dense_stiffness(self) -> np.ndarray:
        return _tri_dense(self.stiff_diag, self.stiff_off)

    def l2_norm(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.sqrt(np.maximum((u * self.mass(u)).sum(axis=-1), 0.0))

    def triplets(self, which: str = "mass"):
        d, o = ((self.mass_diag, self.mass_off) if which == "mass"
                else (self.stiff_diag, self.stiff_off))
        for i in range(d.size):
            if i > 0:
                yield i, i - 1, float(o[i - 1])
            yield i, i, float(d[i])
            if i < o.size:
                yield i, i + 1, float(o[i])


def _tri_matvec(diag, off, u):
    u = np.asarray(u, dtype=float)
    out = diag * u
    out[..., :-1] += off * u[..., 1:]
    out[..., 1:] += off * u[..., :-1]
    return out


def _tri_dense(diag, off):
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def assemble(mesh: Mesh1D, a: float | Callable = 1.0) -> FemMatrices:
    """Mass and stiffness matrices for ``-(a u')'`` with ``a`` frozen at element midpoints."""
    if callable(a):
        a_e = np.asarray(a(mesh.midpoints), dtype=float) * np.ones(mesh.n_elements)
    else:
        a_e = np.full(mesh.n_elements, float(a))
    if not np.all(a_e > 0):
        raise ValueError("diffusion coefficient must be positive")
    h, N = mesh.h, mesh.n_interior
    mass_diag = np.full(N, 2.0 * h / 3.0)
    mass_off = np.full(N - 1, h / 6.0)
    stiff_diag = (a_e[:-1] + a_e[1:]) / h
    stiff_off = -a_e[1:-1] / h
    return FemMatrices(mesh, mass_diag, mass_off, stiff_diag, stiff_off, a_e)


def with_boundary(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    pad = [(0, 0)] * (u.ndim - 1) + [(1, 1)]
    return np.pad(u, pad)


def at_gauss(mesh: Mesh1D, u) -> np.ndarray:
    """Values of the P1 function with interior nodal values ``u`` at the Gauss points."""
    full = with_boundary(u)
    left = full[..., :-1, None]
    right = full[..., 1:, None]
    return left * (1.0 - GAUSS_XI) + right * GAUSS_XI


def load_vector(mesh: Mesh1D, values) -> np.ndarray:
    """``b_i = int f hat_i`` from ``f`` sampled at the Gauss points ``(..., N_e, 3)``."""
    values = np.asarray(values, dtype=float)
    wf = values * mesh.gauss_weights
    to_left = (wf * (1.0 - GAUSS_XI)).sum(axis=-1)
    to_right = (wf * GAUSS_XI).sum(axis=-1)
    return to_right[..., :-1] + to_left[..., 1:]


def thomas(lower, diag, upper, rhs) -> np.ndarray:
    """Tridiagonal solve by forward elimination and back substitution.

    Raises ``LinAlgError`` on a non-positive pivot, which cannot happen for a
    symmetric positive definite matrix.
    """
    diag = np.asarray(diag, dtype=float)
    n = diag.size
    c = np.zeros(n)
    d = np.array(rhs, dtype=float, copy=True)
    for i in range(n):
        piv = diag[i] - (lower[i - 1] * c[i - 1] if i else 0.0)
        if not piv > 0:
            raise LinAlgError(f"non-positive pivot at row {i}")
        if i < n - 1:
            c[i] = upper[i] / piv
        d[i] = (d[i] - (lower[i - 1] * d[i - 1] if i else 0.0)) / piv
    for i in range(n - 2, -1, -1):
        d[i] = d[i] - c[i] * d[i + 1]
    return d


class BandedSPD:
    """Cholesky factor of a symmetric tridiagonal matrix, reused across solves."""

    def __init__(self, diag, off):
        ab = np.zeros((2, diag.size))
        ab[0, 1:] = off
        ab[1] = diag
        # raises LinAlgError on a non-positive pivot
        self.factor = cholesky_banded(ab, lower=False)

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        return cho_solve_banded((self.factor, False), rhs.T).T


def l2_project(mesh: Mesh1D, matrices: FemMatrices, func) -> np.ndarray:
    """Nodal values of the L2 projection of ``func`` onto the P1 space."""
    b = load_vector(mesh, func(mesh.gauss_points))
    return BandedSPD(matrices.mass_diag, matrices.mass_off).solve(b)


def step_semi_implicit(matrices: FemMatrices, state, dt: float, b_drift=None, b_noise=None,
                       system: BandedSPD | None = None, theta: float = 1.0) -> np.ndarray:
    """Solve ``(M + theta dt K) u+ = (M - (1 - theta) dt K) u + dt b_F + b_G``.

    ``theta = 1`` (the default) is backward Euler in the stiffness term;
    ``theta = 1/2`` is Crank-Nicolson, only meant for deterministic benchmarks
    where the first-order time error would otherwise pollute spatial rates.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not 0.5 <= theta <= 1.0:
        raise ValueError("theta must lie in [1/2, 1]")
    rhs = matrices.mass(state)
    if theta != 1.0:
        rhs = rhs - (1.0 - theta) * dt * matrices.stiffness(state)
    if b_drift is not None:
        rhs = rhs + dt * b_drift
    if b_noise is not None:
        rhs = rhs + b_noise
    if system is None:
        system = BandedSPD(matrices.mass_diag + theta * dt * matrices.stiff_diag,
                           matrices.mass_off + theta * dt * matrices.stiff_off)
    return system.solve(rhs)


def l2_error_vs_function(mesh: Mesh1D, u, func) -> float:
    """``|u_h - func|`` in L2 by element-wise Gauss quadrature."""
    diff = at_gauss(mesh, u) - func(mesh.gauss_points)
    return float(np.sqrt((diff**2 * mesh.gauss_weights).sum()))


def elliptic_solve(matrices: FemMatrices, f) -> np.ndarray:
    """``w_h`` with ``K w_h = b``, ``b_i = <f, hat_i>``."""
    mesh = matrices.mesh
    b = load_vector(mesh, f(mesh.gauss_points))
    return thomas(matrices.stiff_off, matrices.stiff_diag, matrices.stiff_off, b)


def elliptic_defect(mesh: Mesh1D, f, exact=None, a: float | Callable = 1.0,
                    reference_elements: int = 1 << 12) -> float:
    """``|w - w_h|_L2`` for ``-(a w')' = f``, ``w(0) = w(1) = 0``.

    ``exact`` is the continuous solution if known; otherwise a P1 solution on a
    mesh with ``reference_elements`` elements stands in for it.
    """
    mats = assemble(mesh, a)
    w_h = elliptic_solve(mats, f)
    xg = mesh.gauss_points
    if exact is not None:
        w = exact(xg)
    else:
        fine = Mesh1D(max(reference_elements, 4 * mesh.n_elements))
        w_ref = elliptic_solve(assemble(fine, a), f)
        w = np.interp(xg, fine.nodes, with_boundary(w_ref))
    diff = at_gauss(mesh, w_h) - w
    return float(np.sqrt((diff**2 * mesh.gauss_weights).sum()))


def elliptic_defect_norm(mesh: Mesh1D, delta: float, kmax: int | None = None) -> float:
    """Operator-norm proxy ``max_k |A^-1 f_k - A_h^-1 P_h f_k| / |f_k|_{delta-1}``.

    Probes with ``f_k = phi_k`` for the Dirichlet Laplacian, for which
    ``|phi_k|_{delta-1} = (pi k)^(2 delta - 2)`` and ``A^-1 phi_k = phi_k / (pi k)^2``.
    """
    kmax = 2 * mesh.n_elements if kmax is None else kmax
    mats = assemble(mesh, 1.0)
    k = np.arange(1, kmax + 1)[:, None, None]
    xg = mesh.gauss_points
    phi = np.sqrt(2.0) * np.sin(np.pi * k * xg)
    # exact loads <phi_k, hat_i>; Gauss quadrature would alias modes k > N_e
    kk = np.pi * k[:, 0, 0:1]
    h = mesh.h
    B = (np.sqrt(2.0) * 2.0 * (1.0 - np.cos(kk * h)) / (h * kk**2)
         * np.sin(kk * mesh.interior_nodes))
    W = BandedSPD(mats.stiff_diag, mats.stiff_off).solve(B)
    diff = at_gauss(mesh, W) - phi / (np.pi * k) ** 2
    defects = np.sqrt((diff**2 * mesh.gauss_weights).sum(axis=(-1, -2)))
    ratio = defects * (np.pi * k[:, 0, 0]) ** (2.0 - 2.0 * delta)
    return float(ratio.max())


@dataclass(frozen=True)
class FemRun:
    mesh: Mesh1D = field(default_factory=lambda: Mesh1D(16))
    coefficient: float | Callable = 1.0
    drift: DriftSpec = field(default_factory=lambda: make_drift("zero"))
    diffusion: DiffusionSpec = field(
        default_factory=lambda: make_diffusion("zero", NoiseBasisSpec("q-wiener", 1)))
    grid: TimeGrid = field(default_factory=TimeGrid)
    initial: InitialCondition = field(default_factory=InitialCondition)
    cutoff: CutoffLevel | None = None
    initial_indicator: bool = True
    theta: float = 1.0

    @property
    def noise_modes(self) -> int:
        return 0 if self.diffusion.is_zero else self.diffusion.basis.modes


class FemSolver:
    def __init__(self, run: FemRun):
        self.run = run
        self.mesh = run.mesh
        self.mats = assemble(run.mesh, run.coefficient)
        dt = run.grid.dt
        th = run.theta
        self.system = BandedSPD(self.mats.mass_diag + th * dt * self.mats.stiff_diag,
                                self.mats.mass_off + th * dt * self.mats.stiff_off)
        self.J = run.noise_modes
        if self.J:
            xg = self.mesh.gauss_points.ravel()
            self.noise_basis = run.diffusion.basis.basis(xg, self.J)

    def initial_state(self) -> np.ndarray:
        u0 = l2_project(self.mesh, self.mats, self.run.initial)
        level = self.run.cutoff
        if level is not None and self.run.initial_indicator and self.mats.l2_norm(u0) > level.m:
            return np.zeros_like(u0)
        return u0

    def cutoff_scale(self, u):
        level = self.run.cutoff
        if level is None:
            return None
        norms = self.mats.l2_norm(u)
        if np.all(norms <= level.m):
            return None
        return np.where(norms > level.m, level.m / np.where(norms > 0, norms, 1.0), 1.0)

    def step(self, u, t, dW):
        run, mesh = self.run, self.mesh
        scale = self.cutoff_scale(u)
        needs_values = not run.drift.is_zero or (self.J and run.diffusion.form != "constant")
        ug = None
        if needs_values:
            ug = at_gauss(mesh, u)
            if scale is not None:
                ug = ug * np.asarray(scale)[..., None, None]
        b_drift = None if run.drift.is_zero else load_vector(mesh, run.drift.f(t, ug))
        b_noise = None
        if self.J:
            field_ = (dW[..., : self.J] @ self.noise_basis.T).reshape(
                np.shape(dW)[:-1] + (mesh.n_elements, 3))
            if run.diffusion.form == "constant":
                gvals = run.diffusion.scale
            else:
                gvals = run.diffusion.g(t, ug)
            b_noise = load_vector(mesh, gvals * field_)
        return step_semi_implicit(self.mats, u, run.grid.dt, b_drift, b_noise, self.system,
                                  run.theta)


def solve_fem(run: FemRun, key: StreamKey | None = None,
              table: IncrementTable | None = None) -> np.ndarray:
    """Nodal trajectory ``(steps + 1, N)`` starting from the L2 projection of ``u_0``."""
    solver = FemSolver(run)
    if solver.J:
        if table is None:
            if key is None:
                raise ValueError("need a stream key or an increment table")
            table = sample_increments(run.diffusion.basis, run.grid, key, modes=solver.J)
        if table.modes < solver.J:
            raise ValueError(f"run needs {solver.J} noise modes, table has {table.modes}")
        dW = table.by_step()
    else:
        dW = np.zeros((run.grid.steps, 0))
    t = run.grid.nodes
    traj = np.empty((run.grid.steps + 1, run.mesh.n_interior))
    u = solver.initial_state()
    traj[0] = u
    for m in range(run.grid.steps):
        u = solver.step(u, t[m], dW[m])
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite FEM state at step {m + 1}")
        traj[m + 1] = u
    return traj


def prolong(u, factor: int) -> np.ndarray:
    """Interior nodal values of a P1 function on a mesh refined ``factor`` times."""
    full = with_boundary(u)
    n_el = full.shape[-1] - 1
    fine = np.arange(n_el * factor + 1) / factor
    coarse = np.arange(n_el + 1)
    if full.ndim == 1:
        return np.interp(fine, coarse, full)[1:-1]
    return np.stack([np.interp(fine, coarse, row) for row in full])[..., 1:-1]


def nested_errors(coarse_traj, fine_traj, fine_matrices: FemMatrices) -> np.ndarray:
    """L2 distance at every grid time between P1 functions on nested meshes."""
    fine_traj = np.asarray(fine_traj)
    coarse_traj = np.asarray(coarse_traj)
    factor = (fine_traj.shape[-1] + 1) // (coarse_traj.shape[-1] + 1)
    if factor * (coarse_traj.shape[-1] + 1) != fine_traj.shape[-1] + 1:
        raise ValueError("meshes are not nested")
    diff = fine_traj - prolong(coarse_traj, factor)
    return fine_matrices.l2_norm(diff)


def spectral_errors(mesh: Mesh1D, fem_traj, coeff_traj, subdivide: int | None = None) -> np.ndarray:
    """L2 distance at every grid time between P1 nodal states and sine series.

    Quadrature runs on a refinement of ``mesh`` fine enough to resolve the
    highest sine mode present.
    """
    fem_traj = np.atleast_2d(fem_traj)
    coeff_traj = np.atleast_2d(coeff_traj)
    n_modes = coeff_traj.shape[-1]
    if subdivide is None:
        subdivide = max(1, int(np.ceil(4 * n_modes / mesh.n_elements)))
    fine = Mesh1D(mesh.n_elements * subdivide)
    fem_fine = prolong(fem_traj, subdivide) if subdivide > 1 else fem_traj
    xg = fine.gauss_points.ravel()
    k = np.arange(1, n_modes + 1)
    phi = np.sqrt(2.0) * np.sin(np.pi * np.outer(xg, k))
    series = (coeff_traj @ phi.T).reshape(coeff_traj.shape[:-1] + fine.gauss_points.shape)
    diff = at_gauss(fine, fem_fine) - series
    return np.sqrt((diff**2 * fine.gauss_weights).sum(axis=(-1, -2)))
