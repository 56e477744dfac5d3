import math

import numpy as np
import pytest

from conftest import make_record
from src.dataset.builder import label_records
from src.dataset.records import LabeledInstance, PreferenceTarget
from src.router import trainer
from src.router.dispo import DispoConfig
from src.router.encoders import EmbeddingEncoder
from src.router.model import init_linear, init_mlp
from src.router.trainer import AdamW, TrainConfig, train, training_subset
from src.utils.errors import DataError, NumericalError, ValidationError


def _instance(record_id, embedding, p, y=None):
    if y is None:
        y = 1 if p > 0.5 else 0
    record = make_record(record_id, embedding=embedding)
    return LabeledInstance(record, PreferenceTarget(1.0, 1.0, 0.0, p, y))


def _embedding_model(dim):
    encoder = EmbeddingEncoder(dim)
    return encoder, init_linear(dim, encoder.spec())


def test_uninformative_labels_keep_a_zero_model_at_zero():
    rng = np.random.default_rng(0)
    instances = [_instance(f"r{i}", tuple(rng.normal(size=3)), 0.5) for i in range(50)]
    encoder, init = _embedding_model(3)
    result = train(instances, TrainConfig(), DispoConfig(), init, encoder)
    assert np.array_equal(result.model.params["theta"], np.zeros(3))


def test_first_step_moves_by_the_learning_rate():
    encoder, init = _embedding_model(1)
    cfg = TrainConfig(epochs=1, weight_decay=0.0)
    result = train([_instance("a", (1.0,), 1.0)], cfg, DispoConfig(), init, encoder)
    expected = cfg.learning_rate * 0.5 / (0.5 + cfg.adam_eps)
    assert result.model.params["theta"][0] == pytest.approx(expected, rel=1e-12)


def test_adamw_decays_weights_outside_the_adaptive_step():
    optimizer = AdamW(lr=0.1, weight_decay=0.5)
    params = {"w": np.array([2.0])}
    optimizer.step(params, {"w": np.array([0.0])})
    assert params["w"][0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)


def test_training_is_deterministic(synthetic_records):
    instances = label_records(synthetic_records)
    encoder, init = _embedding_model(8)
    a = train(instances, TrainConfig(seed=4), DispoConfig(), init, encoder)
    b = train(instances, TrainConfig(seed=4), DispoConfig(), init, encoder)
    assert np.array_equal(a.model.params["theta"], b.model.params["theta"])
    assert a.epoch_losses == b.epoch_losses


def test_initial_model_is_left_untouched(synthetic_records):
    instances = label_records(synthetic_records)
    encoder, init = _embedding_model(8)
    train(instances, TrainConfig(learning_rate=0.01), DispoConfig(), init, encoder)
    assert np.array_equal(init.params["theta"], np.zeros(8))


def test_zero_learning_rate_leaves_parameters_unchanged(synthetic_records):
    instances = label_records(synthetic_records)
    encoder = EmbeddingEncoder(8)
    init = init_mlp(8, 4, seed=1, encoder_spec=encoder.spec())
    cfg = TrainConfig(learning_rate=0.0, weight_decay=0.0)
    result = train(instances, cfg, DispoConfig(), init, encoder)
    for name, value in init.params.items():
        assert np.array_equal(result.model.params[name], value)


def test_soft_and_hard_labels_agree_when_labels_are_binary():
    rng = np.random.default_rng(1)
    instances = []
    for i in range(60):
        y = int(rng.integers(0, 2))
        instances.append(_instance(f"r{i}", tuple(rng.normal(size=2)), float(y), y))
    encoder, init = _embedding_model(2)
    soft = train(instances, TrainConfig(), DispoConfig(), init, encoder)
    hard = train(instances, TrainConfig(), DispoConfig(hard_label_mode=True), init, encoder)
    assert np.array_equal(soft.model.params["theta"], hard.model.params["theta"])


def test_every_batch_goes_through_the_shared_gradient(monkeypatch, synthetic_records):
    calls = []
    original = trainer.grad_wrt_params

    def spy(features, q, model):
        calls.append(len(q))
        return original(features, q, model)

    monkeypatch.setattr(trainer, "grad_wrt_params", spy)
    instances = label_records(synthetic_records[:100])
    encoder, init = _embedding_model(8)
    train(instances, TrainConfig(batch_size=24, epochs=2), DispoConfig(), init, encoder)
    assert calls == [24, 24, 24, 24, 4] * 2


def test_loss_decreases_on_a_learnable_signal(planted_records):
    instances = label_records(planted_records)
    encoder, init = _embedding_model(8)
    result = train(instances, TrainConfig(), DispoConfig(), init, encoder)
    assert len(result.epoch_losses) == 3
    assert all(b <= a for a, b in zip(result.epoch_losses, result.epoch_losses[1:]))
    assert result.model.params["theta"][0] > 0


def test_data_fraction_trains_on_a_prefix(synthetic_records):
    instances = label_records(synthetic_records)
    encoder, init = _embedding_model(8)
    result = train(instances, TrainConfig(data_fraction=0.25), DispoConfig(), init, encoder)
    assert result.train_size == math.ceil(0.25 * len(instances))


def test_training_subset_is_seeded():
    a = training_subset(100, 0.3, np.random.default_rng(5))
    b = training_subset(100, 0.3, np.random.default_rng(5))
    assert a.tolist() == b.tolist()
    assert len(a) == 30
    assert len(set(a.tolist())) == 30


def test_empty_dataset():
    encoder, init = _embedding_model(2)
    with pytest.raises(DataError):
        train([], TrainConfig(), DispoConfig(), init, encoder)


def test_divergence_names_the_batch(monkeypatch, synthetic_records):
    original = trainer.grad_wrt_params
    seen = []

    def failing(features, q, model):
        grads, value = original(features, q, model)
        seen.append(value)
        return grads, (float("nan") if len(seen) == 3 else value)

    monkeypatch.setattr(trainer, "grad_wrt_params", failing)
    encoder, init = _embedding_model(8)
    with pytest.raises(NumericalError, match="batch 2"):
        train(label_records(synthetic_records), TrainConfig(), DispoConfig(), init, encoder)


@pytest.mark.parametrize(
    "field, value",
    [("batch_size", 0), ("epochs", 0), ("data_fraction", 0.0), ("learning_rate", -1.0)],
)
def test_config_validation(field, value):
    with pytest.raises(ValidationError):
        TrainConfig(**{field: value})
