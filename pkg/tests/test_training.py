import numpy as np
import pytest

from conftest import separable_set
from flowids.dataset import FlowTable
from flowids.model import ModelConfig, build
from flowids.training import (
    HISTORY_HEADER,
    AdamState,
    TrainConfig,
    adam_step,
    evaluate,
    read_history,
    train,
)

TINY = ModelConfig(seq_len=8, lstm1_units=8, lstm2_units=8, attn_units=4, lstm3_units=8,
                   dense1_units=16, dense2_units=8, seed=0)


class TestAdam:
    def test_first_step_is_signed_lr(self):
        theta = {"w": np.array([1.0, -2.0, 0.5])}
        adam_step(AdamState(), theta, {"w": np.array([0.3, -4.0, 1e-3])}, lr=0.01)
        np.testing.assert_allclose(theta["w"], [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01], atol=1e-6)

    def test_zero_gradient_is_fixed_point(self):
        theta = {"w": np.array([1.0, 2.0])}
        before = theta["w"].copy()
        state = AdamState()
        for _ in range(10):
            adam_step(state, theta, {"w": np.zeros(2)})
        assert theta["w"].tobytes() == before.tobytes()
        assert state.t == 10

    def test_constant_gradient_hand_iteration(self):
        theta = {"w": np.array([0.0])}
        state = AdamState()
        # step 1: m^ = 1, v^ = 1 -> -0.1/(1+1e-7); step 2 identical by bias correction
        adam_step(state, theta, {"w": np.array([1.0])}, lr=0.1)
        assert theta["w"][0] == pytest.approx(-0.1 / (1 + 1e-7), abs=1e-15)
        adam_step(state, theta, {"w": np.array([1.0])}, lr=0.1)
        assert theta["w"][0] == pytest.approx(-0.2 / (1 + 1e-7), abs=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(AdamState(), {"w": np.zeros(2)}, {"w": np.zeros(3)})


class TestTrainConfig:
    @pytest.mark.parametrize("bad", [{"epochs": 0}, {"batch_size": 0}, {"learning_rate": 0.0}])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            TrainConfig(**bad)

    def test_defaults(self):
        c = TrainConfig()
        assert (c.epochs, c.batch_size, c.learning_rate) == (75, 512, 3e-5)
        assert (c.beta1, c.beta2, c.epsilon) == (0.9, 0.999, 1e-7)


def _tables():
    X, y = separable_set(128, 8)
    Xv, yv = separable_set(32, 8, seed=2)
    return FlowTable.from_arrays(X, y), FlowTable.from_arrays(Xv, yv)


class TestTrain:
    def test_history_and_determinism(self, tmp_path):
        tr, va = _tables()
        cfg = TrainConfig(epochs=3, batch_size=20, learning_rate=1e-3, shuffle_seed=5)
        _, h1 = train(build(TINY, 64), tr, va, cfg, history_path=tmp_path / "h.csv")
        _, h2 = train(build(TINY, 64), tr, va, cfg)
        assert len(h1) == 3 and [r.epoch for r in h1] == [1, 2, 3]
        assert [r.train_loss for r in h1] == [r.train_loss for r in h2]
        assert [r.val_loss for r in h1] == [r.val_loss for r in h2]
        assert (tmp_path / "h.csv").read_text().splitlines()[0] == ",".join(HISTORY_HEADER)
        assert [r.train_loss for r in read_history(tmp_path / "h.csv")] == [r.train_loss for r in h1]

    def test_each_epoch_visits_every_row_once(self, monkeypatch):
        tr, va = _tables()
        seen = []
        model = build(TINY, 64)
        original = model.loss_and_grads

        def spy(xb, yb, **kw):
            seen.append(xb.copy())
            return original(xb, yb, **kw)

        monkeypatch.setattr(model, "loss_and_grads", spy)
        train(model, tr, va, TrainConfig(epochs=1, batch_size=50))
        assert [len(b) for b in seen] == [50, 50, 28]  # final partial batch kept
        rows = np.vstack(seen)
        assert sorted(map(bytes, rows)) == sorted(map(bytes, tr.features))

    def test_learns_separable_set(self):
        tr, _ = _tables()
        _, hist = train(build(TINY, 64), tr, tr, TrainConfig(epochs=200, batch_size=16,
                                                              learning_rate=1e-3))
        assert max(r.train_acc for r in hist) >= 0.99
        assert hist[-1].train_loss < hist[0].train_loss

    def test_rejects_empty_and_wrong_arity(self):
        tr, va = _tables()
        empty = FlowTable.from_arrays(np.zeros((0, 8)), np.zeros(0))
        with pytest.raises(ValueError):
            train(build(TINY), empty, va, TrainConfig(epochs=1))
        wide = FlowTable.from_arrays(np.zeros((4, 9)), np.zeros(4))
        with pytest.raises(ValueError):
            train(build(TINY), wide, va, TrainConfig(epochs=1))


class TestEvaluate:
    def _model_returning(self, probs, monkeypatch):
        model = build(TINY, 64)
        monkeypatch.setattr(model, "forward", lambda X: np.asarray(probs)[:len(X)])
        return model

    def test_hand_case(self, monkeypatch):
        model = self._model_returning([0.9, 0.2, 0.7, 0.4], monkeypatch)
        rep = evaluate(model, FlowTable.from_arrays(np.zeros((4, 8)), [1, 0, 0, 1]))
        assert (rep.counts.tp, rep.counts.fp, rep.counts.fn, rep.counts.tn) == (1, 1, 1, 1)
        assert rep.accuracy == 0.5

    def test_tie_is_malicious(self, monkeypatch):
        model = self._model_returning([0.5, 0.5], monkeypatch)
        rep = evaluate(model, FlowTable.from_arrays(np.zeros((2, 8)), [1, 1]))
        assert rep.counts.tp == 2 and rep.accuracy == 1.0

    def test_does_not_mutate_parameters(self):
        model = build(TINY, 64)
        before = {k: v.tobytes() for k, v in model.parameters().items()}
        X, y = separable_set(16, 8)
        evaluate(model, FlowTable.from_arrays(X, y))
        assert {k: v.tobytes() for k, v in model.parameters().items()} == before

    def test_empty_split(self):
        with pytest.raises(ValueError):
            evaluate(build(TINY), FlowTable.from_arrays(np.zeros((0, 8)), np.zeros(0)))
