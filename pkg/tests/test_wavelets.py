import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hpsplinet.datasets import make_multiscale
from hpsplinet.wavelets import (
    WaveletProjector,
    diameter,
    diameter_projected,
    dwt_step,
    idwt_step,
    project,
    wavedec,
    waverec,
)

FAMILIES = ("haar", "db4")


def haar_projection_matrix(n, level):
    """Block averaging over runs of 2**level samples, built directly."""
    block = 2**level
    P = np.zeros((n, n))
    for start in range(0, n, block):
        P[start:start + block, start:start + block] = 1.0 / block
    return P


def analysis_matrix(n, family):
    """Dense single-step analysis operator, assembled column by column."""
    cols = [np.concatenate(dwt_step(e, family)) for e in np.eye(n)]
    return np.column_stack(cols)


class TestExamples:
    def test_constant_kept(self):
        np.testing.assert_allclose(project(WaveletProjector("haar", 1, 4), [1, 1, 1, 1]), [1, 1, 1, 1], atol=1e-15)

    def test_alternating_removed(self):
        np.testing.assert_allclose(project(WaveletProjector("haar", 1, 4), [1, -1, 1, -1]), 0.0, atol=1e-15)

    def test_two_level_cascade(self):
        got = project(WaveletProjector("haar", 2, 4), [4, 0, 0, 0])
        np.testing.assert_allclose(got, [1, 1, 1, 1], atol=1e-15)
        np.testing.assert_allclose(haar_projection_matrix(4, 2) @ [4, 0, 0, 0], got, atol=1e-15)

    @pytest.mark.parametrize("level", [1, 2, 3, 4])
    def test_haar_matches_block_average(self, level):
        rng = np.random.default_rng(level)
        x = rng.standard_normal((3, 64))
        got = project(WaveletProjector("haar", level, 64), x)
        np.testing.assert_allclose(got, x @ haar_projection_matrix(64, level).T, atol=1e-13)


class TestTransform:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_step_is_orthogonal(self, family):
        M = analysis_matrix(16, family)
        np.testing.assert_allclose(M @ M.T, np.eye(16), atol=1e-14)

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("level", [1, 3, 8])
    def test_perfect_reconstruction(self, family, level):
        x = np.random.default_rng(0).standard_normal(256)
        back = waverec(wavedec(x, level, family), family)
        assert np.max(np.abs(back - x)) < 1e-10

    def test_db4_annihilates_linear_detail(self):
        # two vanishing moments: no detail from a linear ramp away from the wrap
        _, d = dwt_step(np.arange(32.0), "db4")
        np.testing.assert_allclose(d[:-1], 0.0, atol=1e-12)

    def test_idwt_inverts_step(self):
        x = np.random.default_rng(1).standard_normal(32)
        np.testing.assert_allclose(idwt_step(*dwt_step(x, "db4"), "db4"), x, atol=1e-13)

    def test_energy_preserved(self):
        x = np.random.default_rng(2).standard_normal(128)
        coeffs = wavedec(x, 4, "db4")
        assert sum(np.sum(c**2) for c in coeffs) == pytest.approx(np.sum(x**2), rel=1e-12)

    @pytest.mark.parametrize("n,level", [(12, 1), (16, 0), (16, 5)])
    def test_invalid_level_or_length(self, n, level):
        with pytest.raises(ValueError):
            wavedec(np.ones(n), level)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            WaveletProjector("sym8", 1, 16)


class TestProjector:
    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("level", [1, 2, 4])
    def test_idempotent_and_symmetric(self, family, level):
        P = project(WaveletProjector(family, level, 32), np.eye(32))
        np.testing.assert_allclose(P @ P, P, atol=1e-13)
        np.testing.assert_allclose(P, P.T, atol=1e-13)
        assert np.trace(P) == pytest.approx(32 / 2**level)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_nested_spaces(self, family):
        x = np.random.default_rng(3).standard_normal(64)
        coarse = project(WaveletProjector(family, 3, 64), x)
        fine_then_coarse = project(WaveletProjector(family, 3, 64), project(WaveletProjector(family, 1, 64), x))
        np.testing.assert_allclose(fine_then_coarse, coarse, atol=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(
        x=arrays(np.float64, 32, elements=st.floats(-1e3, 1e3)),
        z=arrays(np.float64, 32, elements=st.floats(-1e3, 1e3)),
        family=st.sampled_from(FAMILIES),
        level=st.integers(1, 5),
    )
    def test_non_expansive(self, x, z, family, level):
        proj = WaveletProjector(family, level, 32)
        lhs = np.linalg.norm(proj(x) - proj(z))
        assert lhs <= np.linalg.norm(x - z) * (1 + 1e-12) + 1e-12

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            project(WaveletProjector("haar", 1, 8), np.ones(16))


class TestDiameter:
    def test_two_signals(self):
        s, z = np.array([0.0, 3.0]), np.array([4.0, 0.0])
        assert diameter([s, z]) == pytest.approx(5.0)

    def test_homogeneous(self):
        X = np.random.default_rng(4).standard_normal((10, 8))
        assert diameter(3.5 * X) == pytest.approx(3.5 * diameter(X))

    def test_accepts_labeled_signals(self):
        sigs = [make_multiscale(1.0, a) for a in (0.5, 1.0, 2.0)]
        X = np.stack([s.samples for s in sigs])
        assert diameter(sigs) == diameter(X)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_projected_not_larger(self, family):
        sigs = [make_multiscale(2.0, a) for a in np.linspace(0.5, 5.0, 12)]
        D = diameter(sigs)
        for level in range(1, 5):
            assert diameter_projected(sigs, WaveletProjector(family, level, 256)) <= D + 1e-12

    def test_needs_two(self):
        with pytest.raises(ValueError):
            diameter([np.ones(3)])
