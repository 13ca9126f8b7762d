import math

import numpy as np
import pytest

from hpsplinet.datasets import make_sweep_dataset, stack
from hpsplinet.net import MlpSpec, TrainConfig, init, train
from hpsplinet.stability import (
    GenGapConfig,
    audit_composite,
    audit_prop1,
    gengap_experiment,
    gengap_sweep,
    multiscale_alphas,
    stability_probe,
)

SMALL = GenGapConfig(width=4, epochs=5, signal_len=64)


class TestGenGap:
    def test_no_noise_gives_zero_gap(self):
        rec = gengap_experiment(32, 1.0, noise_fraction=0.0, seed=0, cfg=SMALL)
        assert rec.gengap == 0.0
        assert rec.loss_train == rec.loss_test

    def test_bound_is_diameter_over_root_n(self):
        rec = gengap_experiment(32, 2.0, seed=1, cfg=SMALL)
        assert rec.bound == pytest.approx(rec.diameter / math.sqrt(32), rel=1e-15)
        assert rec.gengap == pytest.approx(abs(rec.loss_train - rec.loss_test))

    def test_projected_diameter_not_larger(self):
        full = gengap_experiment(32, 1.0, seed=2, cfg=SMALL)
        for J in (1, 2, 3, 4):
            rec = gengap_experiment(32, 1.0, J=J, seed=2, cfg=SMALL)
            assert rec.J == J
            assert rec.diameter <= full.diameter + 1e-12
            assert rec.bound <= full.bound + 1e-12

    def test_diameter_scales_with_amplitude(self):
        a = gengap_experiment(32, 1.0, seed=3, cfg=SMALL)
        b = gengap_experiment(32, 5.5, seed=3, cfg=SMALL)
        assert b.diameter == pytest.approx(5.5 * a.diameter, rel=1e-12)

    def test_nested_frequency_streams(self):
        np.testing.assert_array_equal(multiscale_alphas(4, 64)[:32], multiscale_alphas(4, 32))
        with pytest.raises(ValueError):
            multiscale_alphas(0, 1024)

    def test_deterministic(self):
        assert gengap_experiment(32, 1.0, seed=5, cfg=SMALL) == gengap_experiment(32, 1.0, seed=5, cfg=SMALL)

    def test_sweep_order_and_workers(self):
        serial = gengap_sweep((32, 64), (1.0,), (0, 2), range(2), SMALL)
        assert [(r.J, r.seed, r.n) for r in serial[:4]] == [(None, 0, 32), (None, 0, 64), (None, 1, 32), (None, 1, 64)]
        assert serial[4].J == 2
        assert gengap_sweep((32, 64), (1.0,), (0, 2), range(2), SMALL, workers=2) == serial

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            gengap_experiment(32, 1.0, noise_fraction=1.5, cfg=SMALL)


class TestStabilityProbe:
    def _data(self):
        X, y = stack(make_sweep_dataset("a1", 24))
        return X, y

    def test_identical_replacement_is_zero(self):
        X, y = self._data()
        cfg = TrainConfig(max_epochs=20, batch_size=8, seed=1)
        res = stability_probe(X, y, 5, (X[5], y[5]), MlpSpec(32, 3, 3), cfg)
        assert res.beta_hat == 0.0

    def test_probe_point_shared_by_both_models(self):
        # a probe whose prediction is the same on both runs contributes 0
        X, y = self._data()
        cfg = TrainConfig(max_epochs=20, batch_size=8, seed=1)
        res = stability_probe(X, y, 3, (X[3], y[3]), MlpSpec(32, 3, 2), cfg, probe=(X[:1], y[:1]))
        assert res.beta_hat == 0.0

    def test_perturbed_replacement_within_bound(self):
        X, y = self._data()
        rng = np.random.default_rng(0)
        cfg = TrainConfig(max_epochs=100, batch_size=8, seed=2)
        res = stability_probe(X, y, 7, (X[7] + 0.01 * rng.standard_normal(32), y[7]), MlpSpec(32, 3, 3), cfg)
        assert res.beta_hat > 0
        assert res.holds()
        assert res.bound == pytest.approx(res.L_loss * res.L_F * res.D)

    def test_index_checked(self):
        X, y = self._data()
        with pytest.raises(IndexError):
            stability_probe(X, y, 24, (X[0], y[0]), MlpSpec(32, 3, 1), TrainConfig(max_epochs=1))


class TestComposite:
    def test_decomposition_holds(self):
        X, y = stack(make_sweep_dataset("a2", 60))
        net = train(init(MlpSpec(32, 3, 3), 0), X, y, TrainConfig(max_epochs=200, seed=0)).net
        audit = audit_composite(net, X, np.linspace(0, 1, 32), n_pairs=40)
        assert audit.holds()
        assert audit.L_F_emp <= audit.L_F_upper + 1e-9
        assert audit.L_flat <= audit.L_eff
        assert all(isinstance(v, float) for v in vars(audit).values())

    def test_needs_distinct_signals(self):
        net = init(MlpSpec(32, 3, 1), 0)
        with pytest.raises(ValueError):
            audit_composite(net, np.ones((3, 32)), np.linspace(0, 1, 32))


class TestProp1:
    @pytest.mark.parametrize("fn", ["a1", "a3", "a4"])
    def test_exact_injection_has_zero_propagation(self, fn):
        rep = audit_prop1(fn, grid=np.linspace(0, 1, 21))
        assert rep.eps_hat == 0.0
        np.testing.assert_array_equal(rep.propagation, 0.0)
        np.testing.assert_array_equal(rep.err_pred, rep.err_nominal)
        assert rep.n_violations == 0

    def test_a1_has_no_singular_term(self):
        rep = audit_prop1("a1", predictor=lambda S: 1.0 / (1.0 + np.linspace(0, 1, 21)) + 0.01,
                          grid=np.linspace(0, 1, 21))
        assert rep.singular == {} and rep.singular_term == 0.0
        assert rep.eps_hat == pytest.approx(0.01)
        assert rep.n_violations == 0

    def test_a3_singular_error_recorded(self):
        x = np.linspace(0, 1, 101)
        truth = x**2 + np.abs(x - 0.37) ** 1.5

        def predictor(S):
            if S.shape[0] == 1:
                return np.array([0.37**2 + 0.05])
            return truth + 0.002

        rep = audit_prop1("a3", predictor=predictor, grid=x)
        assert rep.singular[0.37] == pytest.approx(0.05)
        assert rep.singular_term > 0
        assert rep.n_violations == 0
