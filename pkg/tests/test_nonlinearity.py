import numpy as np
import pytest
from hypothesis import given, strategies as st

from spdepath.noise import NoiseBasisSpec
from spdepath.nonlinearity import (CutoffLevel, DiffusionSpec, DriftSpec, apply_diffusion,
                                   apply_drift, cutoff, first_exit_step, make_diffusion,
                                   make_drift, scale_factor)

BASIS = NoiseBasisSpec("cosine", 8)


class TestCatalog:
    def test_zero_drift(self):
        assert np.array_equal(apply_drift(make_drift("zero"), 0.0, [1.0, -2.0]), [0.0, 0.0])

    def test_identity_drift(self):
        assert np.array_equal(apply_drift(make_drift("identity"), 0.0, [1, -2, 3]), [1, -2, 3])

    def test_affine_drift(self):
        out = apply_drift(make_drift("affine", 2.0, -1.0), 0.0, [0.0, 1.5])
        assert np.allclose(out, [-1.0, 2.0])

    def test_sin_square(self):
        spec = make_drift("sin-square")
        out = apply_drift(spec, 0.0, [0.0, np.sqrt(np.pi / 2)])
        assert np.allclose(out, [0.0, 1.0], atol=1e-15)
        assert spec.lipschitz_kind == "local"

    def test_diffusions(self):
        u = np.array([0.5, -2.0])
        assert np.allclose(apply_diffusion(make_diffusion("constant", BASIS, 3.0), 0, u), 3.0)
        assert np.allclose(apply_diffusion(make_diffusion("identity", BASIS), 0, u), u)
        assert np.allclose(apply_diffusion(make_diffusion("bounded", BASIS), 0, u),
                           u / (1 + u * u))
        assert np.all(apply_diffusion(make_diffusion("zero", BASIS), 0, u) == 0)

    def test_theta_g_defaults_to_basis_regularity(self):
        assert make_diffusion("identity", BASIS).theta_G == BASIS.regularity()

    def test_unknown_labels(self):
        with pytest.raises(ValueError):
            make_drift("cubic")
        with pytest.raises(ValueError):
            make_diffusion("cubic", BASIS)

    def test_nan_rejected(self):
        with pytest.raises(ValueError, match="NaN"):
            apply_drift(make_drift("identity"), 0.0, [1.0, np.nan])
        with pytest.raises(ValueError, match="NaN"):
            apply_diffusion(make_diffusion("identity", BASIS), 0.0, [np.nan])

    def test_metadata_ranges(self):
        with pytest.raises(ValueError):
            DriftSpec(lambda t, u: u, theta_F=-1.0)
        with pytest.raises(ValueError):
            DiffusionSpec(lambda t, u: u, BASIS, theta_G=-0.5)
        with pytest.raises(ValueError):
            DriftSpec(lambda t, u: u, lipschitz_kind="sometimes")


class TestCutoff:
    def test_inside_ball(self):
        assert scale_factor(CutoffLevel(2.0), 1.0) == 1.0
        assert not cutoff(make_drift("identity"), make_diffusion("identity", BASIS),
                          CutoffLevel(2.0), 1.0).active

    def test_outside_ball(self):
        assert scale_factor(CutoffLevel(1.0), 2.0) == 0.5

    def test_zero_norm(self):
        assert scale_factor(CutoffLevel(1.0), 0.0) == 1.0

    def test_no_level(self):
        assert scale_factor(None, 1e9) == 1.0

    def test_invalid_level(self):
        with pytest.raises(ValueError):
            CutoffLevel(0.0)
        with pytest.raises(ValueError):
            CutoffLevel(-1.0)

    def test_negative_norm(self):
        with pytest.raises(ValueError):
            cutoff(make_drift("zero"), make_diffusion("zero", BASIS), CutoffLevel(1.0), -1.0)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.floats(1e-3, 1e3))
    def test_identity_inside_bitwise(self, values, m):
        u = np.array(values)
        norm = float(np.linalg.norm(u))
        ctx = cutoff(make_drift("sin-square"), make_diffusion("bounded", BASIS),
                     CutoffLevel(m), norm)
        if norm <= m:
            assert np.array_equal(ctx.f(0.0, u), np.sin(u * u))
            assert np.array_equal(ctx.g(0.0, u), u / (1 + u * u))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.floats(1e-3, 1e3))
    def test_scaled_norm_bounded(self, values, m):
        u = np.array(values)
        norm = float(np.linalg.norm(u))
        ctx = cutoff(make_drift("identity"), make_diffusion("identity", BASIS),
                     CutoffLevel(m), norm)
        assert np.linalg.norm(ctx.rescale(u)) <= m * (1 + 4e-16) or norm <= m


class TestFirstExit:
    def test_never(self):
        assert first_exit_step([0.1, 0.5, 0.9], CutoffLevel(1.0)) is None

    def test_first_crossing(self):
        assert first_exit_step([0.1, 0.9, 1.2, 0.8], CutoffLevel(1.0)) == 2

    def test_immediate(self):
        assert first_exit_step([3.0, 0.1], CutoffLevel(1.0)) == 0

    def test_touching_counts(self):
        assert first_exit_step([0.0, 1.0], CutoffLevel(1.0)) == 1
