import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spdepath.core import StreamKey, TimeGrid
from spdepath.initial import InitialCondition, sine_coefficients
from spdepath.noise import NoiseBasisSpec, sample_increments
from spdepath.nonlinearity import CutoffLevel, make_diffusion, make_drift
from spdepath.spectral import (BASIS_NORMALIZATION, TABLE_COEFFICIENT, GalerkinRun,
                               GalerkinSolver, SpectralOperator, analyze, build_coupling_table,
                               heat_eigenvalues, mode_errors, noise_table_for, phi1,
                               project_diffusion, project_drift, quadrature_nodes,
                               resolvent_defect_spectral, sine_cos_overlap, solve_spectral,
                               solve_spectral_final, step_exponential_euler, synthesize)

COS = NoiseBasisSpec("cosine", 64)


def overlap_quadrature(j, k, ell, nodes=20_000):
    """Midpoint rule; exact for trigonometric polynomials of this degree."""
    x = (np.arange(nodes) + 0.5) / nodes
    return float(np.mean(np.sin(j * np.pi * x) * np.sin(k * np.pi * x) * np.cos(ell * np.pi * x)))


class TestEigenvalues:
    def test_heat(self):
        assert np.allclose(heat_eigenvalues(1), [-np.pi**2])
        assert np.allclose(heat_eigenvalues(3), -np.pi**2 * np.array([1, 4, 9]))
        assert np.all(np.diff(heat_eigenvalues(50)) < 0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            heat_eigenvalues(0)
        with pytest.raises(ValueError):
            SpectralOperator(-1.0, 2.0)

    def test_growth_bound(self):
        op = SpectralOperator(3.0, 1.5)
        k = np.arange(1, 30)
        assert np.all(np.abs(op.eigenvalues(29)) >= 3.0 * k**1.5 - 1e-12)

    def test_lambda0_convention(self):
        assert SpectralOperator.heat().lambda0 == 1.0


class TestOverlap:
    @pytest.mark.parametrize("j,k,ell,value", [(1, 2, 1, 0.25), (1, 1, 2, -0.25), (1, 2, 5, 0.0)])
    def test_examples(self, j, k, ell, value):
        assert sine_cos_overlap(j, k, ell) == pytest.approx(value, abs=1e-15)
        assert overlap_quadrature(j, k, ell) == pytest.approx(value, abs=1e-10)

    @settings(max_examples=60)
    @given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 25))
    def test_matches_quadrature(self, j, k, ell):
        assert sine_cos_overlap(j, k, ell) == pytest.approx(overlap_quadrature(j, k, ell),
                                                            abs=1e-10)


class TestCouplingTable:
    def test_level_one(self):
        t = build_coupling_table(1)
        assert list(t.rows()) == [(1, 2, 1, -TABLE_COEFFICIENT)]

    @pytest.mark.parametrize("n", [1, 2, 3, 7, 16])
    def test_counts(self, n):
        assert np.all(build_coupling_table(n).counts() == 2 * n - 1)

    @pytest.mark.parametrize("n", [1, 3, 8])
    def test_dense_equals_overlap(self, n):
        dense = build_coupling_table(n).dense()
        oracle = np.array([[[np.sqrt(2) * sine_cos_overlap(j, k, ell)
                             for ell in range(1, 2 * n + 1)] for j in range(1, n + 1)]
                           for k in range(1, n + 1)])
        assert np.abs(dense - oracle).max() < 1e-14

    def test_noise_range(self):
        t = build_coupling_table(5)
        assert t.noise_modes == 10 and t.noise.min() == 1

    def test_magnitudes(self):
        assert np.all(np.abs(build_coupling_table(6).coeff) == 2**-1.5)

    @settings(max_examples=30)
    @given(st.integers(1, 10), st.integers(0, 10_000))
    def test_apply_matches_dense(self, n, seed):
        rng = np.random.default_rng(seed)
        u, dW = rng.standard_normal(n), rng.standard_normal(2 * n)
        t = build_coupling_table(n)
        expect = BASIS_NORMALIZATION * np.einsum("kjl,j,l->k", t.dense(), u, dW)
        assert np.allclose(t.apply(u, dW), expect, atol=1e-13)

    def test_apply_equals_quadrature_projection(self):
        """Table route and brute-force quadrature of g(u) dW agree."""
        n = 6
        rng = np.random.default_rng(3)
        u, dW = rng.standard_normal(n), rng.standard_normal(2 * n)
        table = build_coupling_table(n).apply(u, dW)
        x = (np.arange(40_000) + 0.5) / 40_000
        phi = np.sqrt(2) * np.sin(np.pi * np.outer(x, np.arange(1, n + 1)))
        noise = np.sqrt(2) * np.cos(np.pi * np.outer(x, np.arange(1, 2 * n + 1))) @ dW
        brute = ((phi @ u) * noise) @ phi / x.size
        assert np.allclose(table, brute, atol=1e-10)


class TestTransforms:
    @given(st.integers(1, 20), st.integers(0, 1000))
    def test_round_trip(self, n, seed):
        c = np.random.default_rng(seed).standard_normal(n)
        nq = 2 * n + 1
        assert np.allclose(analyze(synthesize(c, nq), n), c, atol=1e-12)

    def test_synthesize_values(self):
        c = np.array([0.0, 2.0])
        x = quadrature_nodes(9)
        assert np.allclose(synthesize(c, 9), 2 * np.sqrt(2) * np.sin(2 * np.pi * x))

    def test_phi1(self):
        z = np.array([0.0, 1e-7, -1e-6, 1e-3, -2.0, -50.0])
        ref = np.array([1.0] + [np.expm1(v) / v for v in z[1:]])
        assert np.allclose(phi1(z), ref, rtol=1e-14)
        assert phi1(np.array([0.0]))[0] == 1.0


class TestProjections:
    def run(self, drift, n=8):
        return GalerkinRun(level=n, drift=drift)

    def test_zero(self):
        assert np.all(project_drift(self.run(make_drift("zero")), 0, np.ones(8)) == 0)

    def test_identity(self):
        u = np.random.default_rng(0).standard_normal(8)
        assert np.allclose(project_drift(self.run(make_drift("identity")), 0, u), u, atol=1e-12)

    def test_affine(self):
        u = np.random.default_rng(1).standard_normal(8)
        k = np.arange(1, 9)
        out = project_drift(self.run(make_drift("affine", 2.0, 0.5)), 0, u)
        ones = np.sqrt(2) * (1 - (-1.0) ** k) / (k * np.pi)
        # the DST pair projects the constant through its first nq modes only
        assert np.allclose(out, 2.0 * u + 0.5 * ones, atol=0.5 * 2 / (np.pi * 33))

    def test_affine_fine_quadrature(self):
        u = np.zeros(8)
        k = np.arange(1, 9)
        run = GalerkinRun(level=8, drift=make_drift("affine", 1.0, 1.0), quad_size=2**14 - 1)
        ones = np.sqrt(2) * (1 - (-1.0) ** k) / (k * np.pi)
        assert np.allclose(project_drift(run, 0, u), ones, atol=1e-4)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            project_drift(self.run(make_drift("zero")), 0, np.ones(3))

    def test_small_quadrature_rejected(self):
        with pytest.raises(ValueError):
            GalerkinRun(level=8, quad_size=10)

    def test_diffusion_routes_agree(self):
        """Table route vs quadrature route for g(u)=u under cosine noise."""
        n = 5
        rng = np.random.default_rng(5)
        u, dW = rng.standard_normal(n), rng.standard_normal(2 * n)
        table = GalerkinRun(level=n, diffusion=make_diffusion("identity",
                                                              NoiseBasisSpec("cosine", 2 * n)))
        quad = GalerkinRun(level=n, diffusion=make_diffusion("bounded",
                                                             NoiseBasisSpec("cosine", 2 * n)))
        assert table.diffusion_route == "table" and quad.diffusion_route == "quadrature"
        # identity through the general route
        general = GalerkinRun(level=n, diffusion=make_diffusion("identity",
                                                                NoiseBasisSpec("sine", 2 * n)))
        assert general.diffusion_route == "quadrature"
        a = project_diffusion(table, 0, u, dW)
        x = (np.arange(20_000) + 0.5) / 20_000
        phi = np.sqrt(2) * np.sin(np.pi * np.outer(x, np.arange(1, n + 1)))
        field = NoiseBasisSpec("cosine", 2 * n).basis(x) @ dW
        assert np.allclose(a, ((phi @ u) * field) @ phi / x.size, atol=1e-9)

    def test_noise_mode_counts(self):
        assert GalerkinRun(level=7, diffusion=make_diffusion("identity", COS)).noise_modes == 14
        white = NoiseBasisSpec("q-wiener", 64)
        assert GalerkinRun(level=7, diffusion=make_diffusion("constant", white)).noise_modes == 7
        assert GalerkinRun(level=7).noise_modes == 0


class TestStepping:
    def test_semigroup_exact(self):
        grid = TimeGrid(0.37, 13)
        run = GalerkinRun(level=6, grid=grid, initial=InitialCondition("parabola"))
        traj = solve_spectral(run, table=noise_table_for(run, StreamKey(0), 1))
        lam = heat_eigenvalues(6)
        expect = np.exp(lam * 0.37) * run.initial.coefficients(6)
        assert np.allclose(traj[-1], expect, rtol=1e-12, atol=1e-300)

    def test_zero_data(self):
        run = GalerkinRun(level=4, initial=InitialCondition("zero"), grid=TimeGrid(1, 10))
        traj = solve_spectral(run, StreamKey(1))
        assert np.all(traj == 0)

    def test_single_step_forms(self):
        n, dt = 4, 0.01
        run = GalerkinRun(level=n, drift=make_drift("affine", 0.5, 0.2),
                          grid=TimeGrid(dt, 1), stepper="euler")
        u = np.random.default_rng(2).standard_normal(n)
        E = np.exp(heat_eigenvalues(n) * dt)
        expect = E * (u + dt * project_drift(run, 0, u))
        assert np.allclose(step_exponential_euler(run, u, 0.0, np.zeros(1)), expect, atol=1e-14)
        ev = GalerkinRun(level=n, drift=run.drift, grid=run.grid)
        lam = heat_eigenvalues(n)
        expect = E * u + (E - 1) / lam * project_drift(run, 0, u)
        assert np.allclose(step_exponential_euler(ev, u, 0.0, np.zeros(1)), expect, atol=1e-14)

    @pytest.mark.parametrize("theta", [0.5, 1.0])
    def test_theta_step(self, theta):
        n, dt = 5, 0.02
        basis = NoiseBasisSpec.power_law(n, 1.0)
        run = GalerkinRun(level=n, drift=make_drift("affine", 0.3, 0.1),
                          diffusion=make_diffusion("constant", basis, 2.0),
                          grid=TimeGrid(dt, 1), stepper="theta", theta=theta)
        rng = np.random.default_rng(4)
        u, dW = rng.standard_normal(n), rng.standard_normal(n)
        lam = heat_eigenvalues(n)
        rhs = u + (1 - theta) * dt * lam * u + dt * project_drift(run, 0, u) \
            + 2.0 * basis.sqrt_q() * dW
        expect = rhs / (1 - theta * dt * lam)
        assert np.allclose(step_exponential_euler(run, u, 0.0, dW), expect, atol=1e-14)

    def test_step_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            step_exponential_euler(GalerkinRun(level=3), np.ones(2), 0.0, np.zeros(1))

    def test_diagonal_nesting_bitwise(self):
        basis = NoiseBasisSpec.power_law(4, 1.0)
        grid = TimeGrid(1.0, 100)
        mk = lambda n: GalerkinRun(level=n, diffusion=make_diffusion("constant", basis),
                                   grid=grid)  # noqa: E731
        table = sample_increments(basis, grid, StreamKey(9, 1))
        small = solve_spectral(mk(4), table=table)
        big = solve_spectral(mk(16), table=table)
        assert np.array_equal(small, big[:, :4])
        assert np.all(big[:, 4:] == 0)
        assert np.all(mode_errors(big, small) == 0)

    def test_multiplicative_consumes_2n_modes(self):
        run = GalerkinRun(level=5, diffusion=make_diffusion("identity", COS), grid=TimeGrid(1, 5))
        assert GalerkinSolver(run).J == 10
        table = noise_table_for(run, StreamKey(0))
        assert table.modes == 10
        with pytest.raises(ValueError):
            solve_spectral(run, table=table.truncated(9))

    def test_batched_matches_single(self):
        run = GalerkinRun(level=6, diffusion=make_diffusion("identity", COS),
                          drift=make_drift("sin-square"), grid=TimeGrid(0.2, 50))
        keys = [StreamKey(3, p) for p in range(3)]
        batch = solve_spectral_final(run, keys)
        for p, key in enumerate(keys):
            assert np.allclose(batch[p], solve_spectral(run, key)[-1], rtol=1e-13, atol=1e-15)

    def test_cutoff_inactive_matches_plain(self):
        grid = TimeGrid(1.0, 100)
        base = dict(level=8, diffusion=make_diffusion("identity", COS), grid=grid)
        plain = solve_spectral(GalerkinRun(**base), StreamKey(4))
        cut = solve_spectral(GalerkinRun(**base, cutoff=CutoffLevel(1e6)), StreamKey(4))
        assert np.array_equal(plain, cut)

    def test_initial_indicator(self):
        run = GalerkinRun(level=4, initial=InitialCondition("smooth4"), cutoff=CutoffLevel(0.5))
        assert np.all(run.initial_modes() == 0)
        run = GalerkinRun(level=4, initial=InitialCondition("smooth4"), cutoff=CutoffLevel(0.5),
                          initial_indicator=False)
        assert run.initial_modes()[0] == 1.0

    def test_blow_up_detected(self):
        run = GalerkinRun(level=2, drift=make_drift("affine", 1e6, 0.0),
                          grid=TimeGrid(1.0, 200), stepper="euler")
        with pytest.raises(FloatingPointError):
            solve_spectral(run, StreamKey(0))


class TestResolventDefect:
    def test_example(self):
        op = SpectralOperator.heat()
        assert resolvent_defect_spectral(op, 2, 1.0, 1.0) == pytest.approx(1 / (1 + 9 * np.pi**2))

    def test_brute_force_supremum(self):
        op = SpectralOperator.heat()
        for n in (1, 2, 5):
            for delta in (0.25, 0.5, 1.0):
                brute = max(abs(1.0 - op.eigenvalue(k)) ** -delta for k in range(n + 1, 10_001))
                assert resolvent_defect_spectral(op, n, delta) == brute

    def test_delta_zero(self):
        assert resolvent_defect_spectral(SpectralOperator.heat(), 17, 0.0) == 1.0

    @given(st.integers(1, 500), st.floats(0, 1))
    def test_monotone(self, n, delta):
        op = SpectralOperator.heat()
        assert resolvent_defect_spectral(op, n + 1, delta) <= resolvent_defect_spectral(op, n, delta)

    def test_invalid(self):
        op = SpectralOperator.heat()
        with pytest.raises(ValueError):
            resolvent_defect_spectral(op, 2, 1.5)
        with pytest.raises(ValueError):
            resolvent_defect_spectral(op, 2, 0.5, lambda0=-20.0)


class TestInitial:
    @pytest.mark.parametrize("label", ["zero", "sine", "smooth4", "parabola"])
    def test_closed_forms_match_transform(self, label):
        ic = InitialCondition(label, 1.3)
        assert np.allclose(ic.coefficients(12), sine_coefficients(ic, 12), atol=1e-8)

    def test_unknown(self):
        with pytest.raises(ValueError):
            InitialCondition("square")
