import numpy as np
import pytest

from hpsplinet.datasets import make_scenario_signals
from hpsplinet.hpfit import default_knots, fit
from hpsplinet.oracle import AlphaSearchConfig, alpha_grid, optimal_alpha, optimal_alpha_batch, sse_profile

T32 = np.linspace(0.0, 1.0, 32)


class TestOptimalAlpha:
    def test_recovers_decay_rate(self):
        cfg = AlphaSearchConfig()
        grid = alpha_grid(cfg)
        a, s = optimal_alpha(T32, np.exp(-2.0 * T32), cfg)
        # one grid cell on either side of 2
        k = np.searchsorted(grid, 2.0)
        assert grid[k - 1] <= a <= grid[k]
        assert a == pytest.approx(2.0, abs=1e-3)
        assert s < 1e-20

    def test_direct_scan_oracle(self):
        # independent scan with a fresh fit per alpha
        y = np.exp(-2.0 * T32)
        grid = np.geomspace(0.05, 10.0, 200)
        scan = [fit(T32, y, a, 0.1, default_knots(T32)).sse for a in grid]
        a, _ = optimal_alpha(T32, y, AlphaSearchConfig(refine=False))
        assert a == grid[int(np.argmin(scan))]

    def test_zero_data_returns_smallest_alpha(self):
        cfg = AlphaSearchConfig()
        a, s = optimal_alpha(T32, np.zeros(32), cfg)
        assert (a, s) == (cfg.alpha_min, 0.0)

    def test_two_point_grid(self):
        cfg = AlphaSearchConfig(alpha_min=0.5, alpha_max=3.0, grid_size=2, refine=False)
        y = np.exp(-2.9 * T32)
        a, s = optimal_alpha(T32, y, cfg)
        sse = sse_profile(T32, y, [0.5, 3.0])
        assert a == 3.0 and s == sse[1] and sse[1] < sse[0]

    def test_refinement_never_worse(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            y = np.exp(-rng.uniform(0.5, 5) * T32) + 0.01 * rng.standard_normal(32)
            _, coarse = optimal_alpha(T32, y, AlphaSearchConfig(refine=False))
            _, fine = optimal_alpha(T32, y, AlphaSearchConfig(refine=True))
            assert fine <= coarse

    def test_exhaustive_minimum(self):
        rng = np.random.default_rng(1)
        y = np.sin(3 * T32) + 0.1 * rng.standard_normal(32)
        cfg = AlphaSearchConfig(refine=False, grid_size=40)
        a, s = optimal_alpha(T32, y, cfg)
        assert s == np.min(sse_profile(T32, y, alpha_grid(cfg)))

    @pytest.mark.parametrize("kind", ["s1", "s2"])
    def test_scenario_families(self, kind):
        # s1 generated as a decaying exponential, s2 = A t e^{-alpha t}
        alpha = 1.7
        sig = make_scenario_signals(kind, 1.3, -alpha if kind == "s1" else alpha)
        a, _ = optimal_alpha(T32, sig.samples)
        assert a == pytest.approx(alpha, abs=1e-3)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            AlphaSearchConfig(alpha_min=0.0)
        with pytest.raises(ValueError):
            AlphaSearchConfig(grid_size=1)


class TestBatch:
    def test_matches_scalar(self):
        rng = np.random.default_rng(2)
        Y = np.exp(-np.outer(rng.uniform(0.5, 5, 4), T32)) + 0.01 * rng.standard_normal((4, 32))
        cfg = AlphaSearchConfig(grid_size=60)
        alphas, sses = optimal_alpha_batch(T32, Y, cfg)
        for k in range(4):
            a, s = optimal_alpha(T32, Y[k], cfg)
            assert alphas[k] == pytest.approx(a, rel=1e-9)
            assert sses[k] == pytest.approx(s, rel=1e-8, abs=1e-24)
