"""Adam optimizer and the deterministic training loop."""

import numpy as np
import pytest

from forumcohort.encoder import EncoderConfig, init_model
from forumcohort.errors import NonFiniteLoss
from forumcohort.features import CLS_ID, PAD_ID
from forumcohort.training import AdamOptimizer, TrainConfig, train


def tiny_model(dropout_p=0.0, seed=0):
    config = EncoderConfig(
        vocab_size=12, d_model=8, n_heads=2, n_layers=1, d_ff=16, max_len=6, dropout_p=dropout_p
    )
    return init_model(config, seed=seed)


def seqs(rows, max_len=6):
    out = []
    for tokens in rows:
        ids = [CLS_ID] + list(tokens)
        ids += [PAD_ID] * (max_len - len(ids))
        out.append(ids)
    return np.array(out)


class _OneParamModel:
    """Minimal stand-in so the optimizer math can be checked in isolation."""

    def __init__(self, value):
        self.params = {"p": np.array([value], dtype=np.float64)}

    def named_parameters(self):
        return iter(self.params.items())


class TestAdam:
    def test_matches_hand_computed_reference(self):
        """Three steps with a constant gradient, replayed by the textbook
        update: m and v track first/second moments with bias correction."""
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        model = _OneParamModel(1.0)
        optimizer = AdamOptimizer(model, TrainConfig(learning_rate=lr, adam_beta1=b1, adam_beta2=b2, adam_eps=eps))
        g = 0.5
        p, m, v = 1.0, 0.0, 0.0
        for t in range(1, 4):
            optimizer.step(model, {"p": np.array([g])})
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            p = p - lr * m_hat / (np.sqrt(v_hat) + eps)
            assert model.params["p"][0] == pytest.approx(p, abs=1e-15)

    def test_zero_learning_rate_keeps_parameters(self):
        model = _OneParamModel(2.5)
        optimizer = AdamOptimizer(model, TrainConfig(learning_rate=0.0))
        optimizer.step(model, {"p": np.array([7.0])})
        assert model.params["p"][0] == 2.5


class TestTrain:
    def test_lr_zero_leaves_parameters_unchanged(self):
        model = tiny_model()
        before = {name: arr.copy() for name, arr in model.named_parameters()}
        ids = seqs([[4, 5], [6, 7]])
        train(model, ids, [0, 1], TrainConfig(learning_rate=0.0, epochs=3, batch_size=2, seed=0))
        for name, arr in model.named_parameters():
            np.testing.assert_array_equal(arr, before[name])

    def test_single_example_memorized_within_200_epochs(self):
        config = EncoderConfig(
            vocab_size=12, d_model=32, n_heads=2, n_layers=1, d_ff=64, max_len=6, dropout_p=0.0
        )
        model = init_model(config, seed=0)
        ids = seqs([[4, 5, 6]])
        log = train(
            model, ids, [1], TrainConfig(learning_rate=1e-3, epochs=200, batch_size=1, seed=0)
        )
        assert log.epochs[-1].loss < 0.01
        assert log.epochs[-1].accuracy == 1.0

    def test_same_seed_bit_identical_runs(self):
        ids = seqs([[4, 5], [6, 7], [8, 9], [10, 11]])
        labels = [0, 1, 0, 1]
        config = TrainConfig(learning_rate=1e-3, epochs=4, batch_size=2, seed=42)

        model_a = tiny_model(dropout_p=0.3)
        log_a = train(model_a, ids, labels, config)
        model_b = tiny_model(dropout_p=0.3)
        log_b = train(model_b, ids, labels, config)

        assert [e.loss for e in log_a.epochs] == [e.loss for e in log_b.epochs]
        assert [e.accuracy for e in log_a.epochs] == [e.accuracy for e in log_b.epochs]
        for (name, arr_a), (_, arr_b) in zip(
            model_a.named_parameters(), model_b.named_parameters()
        ):
            np.testing.assert_array_equal(arr_a, arr_b, err_msg=name)

    def test_different_seed_changes_trajectory(self):
        ids = seqs([[4, 5], [6, 7], [8, 9], [10, 11]])
        labels = [0, 1, 0, 1]
        model_a = tiny_model(dropout_p=0.3)
        train(model_a, ids, labels, TrainConfig(learning_rate=1e-3, epochs=2, seed=1))
        model_b = tiny_model(dropout_p=0.3)
        train(model_b, ids, labels, TrainConfig(learning_rate=1e-3, epochs=2, seed=2))
        assert any(
            not np.array_equal(a, b)
            for (_, a), (_, b) in zip(model_a.named_parameters(), model_b.named_parameters())
        )

    def test_nonfinite_loss_aborts_with_epoch_index(self):
        model = tiny_model()
        model.params["head.b"][:] = np.nan
        ids = seqs([[4, 5]])
        with pytest.raises(NonFiniteLoss) as excinfo:
            train(model, ids, [1], TrainConfig(learning_rate=1e-3, epochs=5, seed=0))
        assert excinfo.value.epoch == 0

    def test_per_epoch_log_length(self):
        model = tiny_model()
        ids = seqs([[4, 5], [6, 7]])
        log = train(model, ids, [0, 1], TrainConfig(learning_rate=1e-4, epochs=7, seed=0))
        assert [e.epoch for e in log.epochs] == list(range(7))
