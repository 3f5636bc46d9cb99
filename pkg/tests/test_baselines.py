import numpy as np
import pytest

from softwrench.baselines import (EffortMlp, MeanGuesser, effort_fit,
                                  effort_predict, load_baseline, mean_fit,
                                  mean_predict, save_effort_mlp,
                                  save_mean_guesser)
from softwrench.core import Rng
from softwrench.estimator import TrainConfig
from softwrench.evaluation import rmse


class TestMeanGuesser:
    def test_mean_of_two(self):
        t = np.zeros((2, 6))
        t[0, 0], t[1, 0] = 1.0, 3.0
        g = mean_fit(t)
        assert np.allclose(g.predict().as_array(), [2, 0, 0, 0, 0, 0])

    def test_constant_prediction(self):
        g = mean_fit(Rng(0).gen.normal(size=(50, 6)))
        a = mean_predict(g, "anything").as_array()
        b = mean_predict(g, object()).as_array()
        assert np.array_equal(a, b)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            mean_fit(np.zeros((0, 6)))

    def test_training_rmse_equals_sqrt_sum_variances(self):
        # Algebraic identity, brute-force checked over random sets.
        for seed in range(100):
            gen = np.random.default_rng(seed)
            t = gen.normal(size=(gen.integers(2, 40), 6)) * gen.uniform(0.1, 5)
            g = mean_fit(t)
            preds = np.tile(g.mean, (t.shape[0], 1))
            rf, _ = rmse(preds, t)
            expected = np.sqrt(t[:, :3].var(axis=0).sum())
            assert abs(rf - expected) <= 1e-9


class TestEffortMlp:
    def test_degenerate_channel_warns_and_predicts_finite(self):
        gen = Rng(1).gen
        e = gen.normal(size=(100, 6))
        e[:, 2] = 7.0   # constant channel
        t = gen.normal(size=(100, 6))
        with pytest.warns(UserWarning, match="constant effort channels"):
            mlp, _ = effort_fit(e, t, TrainConfig(iterations=10, seed=1))
        out = effort_predict(mlp, np.zeros(6))
        assert np.isfinite(out.as_array()).all()

    def test_noise_free_invertible_map_learned(self):
        # Full-rank effort matrix, no noise, plenty of optimization: the MLP
        # must invert the linear map to better than 0.1 N force RMSE.
        gen = Rng(2).gen
        A = gen.normal(size=(6, 6)) + 3.0 * np.eye(6)
        w = gen.normal(size=(600, 6)) * [2, 2, 2, 0.2, 0.2, 0.2]
        e = w @ A.T
        cfg = TrainConfig(learning_rate=3e-3, batch_size=16, iterations=30000,
                          torque_weight=10.0, seed=2)
        mlp, curve = effort_fit(e, w, cfg)
        test_w = gen.normal(size=(200, 6)) * [2, 2, 2, 0.2, 0.2, 0.2]
        preds = mlp.predict_batch(test_w @ A.T)
        rf, _ = rmse(preds, test_w)
        assert rf < 0.1

    def test_kernel_direction_is_ceiling(self):
        # Wrench component invisible to the efforts stays at mean-guesser
        # error; the visible ones are recovered far better.
        gen = Rng(3).gen
        A = gen.normal(size=(6, 6))
        A[:, 1] = 0.0   # lateral force invisible
        w = gen.normal(size=(800, 6)) * [2, 1.5, 2, 0.2, 0.2, 0.2]
        e = w @ A.T
        cfg = TrainConfig(learning_rate=3e-3, batch_size=16, iterations=6000,
                          torque_weight=10.0, seed=3)
        mlp, _ = effort_fit(e, w, cfg)
        test_w = gen.normal(size=(400, 6)) * [2, 1.5, 2, 0.2, 0.2, 0.2]
        preds = mlp.predict_batch(test_w @ A.T)
        err = preds - test_w
        rmse_fy = float(np.sqrt((err[:, 1] ** 2).mean()))
        rmse_fx = float(np.sqrt((err[:, 0] ** 2).mean()))
        mean_fy = float(np.sqrt((test_w[:, 1] ** 2).mean()))
        assert rmse_fy > 0.8 * mean_fy
        assert rmse_fx < 0.3 * rmse_fy

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            effort_fit(np.zeros((0, 6)), np.zeros((0, 6)),
                       TrainConfig(iterations=1))


class TestCheckpoints:
    def test_mean_guesser_round_trip(self, tmp_path):
        g = MeanGuesser(np.array([1, 2, 3, 0.1, 0.2, 0.3]))
        save_mean_guesser(tmp_path / "m.ckpt", g)
        back = load_baseline(tmp_path / "m.ckpt")
        assert isinstance(back, MeanGuesser)
        assert np.array_equal(back.mean, g.mean)

    def test_effort_mlp_round_trip(self, tmp_path):
        gen = Rng(4).gen
        mlp, _ = effort_fit(gen.normal(size=(50, 6)), gen.normal(size=(50, 6)),
                            TrainConfig(iterations=5, seed=4))
        save_effort_mlp(tmp_path / "e.ckpt", mlp)
        back = load_baseline(tmp_path / "e.ckpt")
        assert isinstance(back, EffortMlp)
        probe = gen.normal(size=6)
        assert np.array_equal(back.predict(probe).as_array(),
                              mlp.predict(probe).as_array())
