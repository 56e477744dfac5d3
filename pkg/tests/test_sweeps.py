import numpy as np
import pytest

from src.analyzer.evaluator import Policy, evaluate
from src.analyzer.sweeps import (
    ABLATION_VARIANTS,
    DEFAULT_ALPHAS,
    ModelSettings,
    build_router,
    run_ablation,
    split_dataset,
    sweep_alpha,
    sweep_fraction,
    train_and_evaluate,
)
from src.dataset.builder import label_records
from src.dataset.synth import SynthConfig, synthesize
from src.router.dispo import DispoConfig
from src.router.encoders import ConcatEncoder, ContextEncoder, EmbeddingEncoder
from src.router.trainer import TrainConfig, train
from src.utils.errors import ValidationError


def _geo_rows(report):
    return {row.name: row.geo_accuracy for row in report.rows}


def test_split_is_seeded_and_disjoint(synthetic_records):
    train_a, held_a = split_dataset(synthetic_records, 0.8, seed=1)
    train_b, held_b = split_dataset(synthetic_records, 0.8, seed=1)
    assert [r.id for r in train_a] == [r.id for r in train_b]
    assert len(train_a) == 480 and len(held_a) == 120
    assert not {r.id for r in train_a} & {r.id for r in held_a}


def test_build_router_picks_the_encoder(synthetic_records):
    encoder, model = build_router(synthetic_records, ModelSettings())
    assert isinstance(encoder, EmbeddingEncoder)
    assert model.input_dim == 8
    encoder, model = build_router(synthetic_records, ModelSettings(kind="mlp", encoder="concat"))
    assert isinstance(encoder, ConcatEncoder)
    assert model.params["W1"].shape == (16, encoder.dim)


def test_model_settings_validation():
    with pytest.raises(ValidationError):
        ModelSettings(kind="forest")
    with pytest.raises(ValidationError):
        ModelSettings(context_mode="everything")


def test_default_alpha_grid(synthetic_records):
    rows = sweep_alpha(synthetic_records, cfg=TrainConfig(epochs=1))
    assert [row.value for row in rows] == list(DEFAULT_ALPHAS)
    for row in rows:
        assert set(_geo_rows(row.report)) == {"retrieval", "generation", "router", "oracle"}
        assert len(row.epoch_losses) == 1


def test_alpha_sweep_is_deterministic(synthetic_records):
    first = sweep_alpha(synthetic_records, [0.5, 2.0], cfg=TrainConfig(epochs=1))
    second = sweep_alpha(synthetic_records, [0.5, 2.0], cfg=TrainConfig(epochs=1))
    assert [r.report.to_dict() for r in first] == [r.report.to_dict() for r in second]
    assert [r.epoch_losses for r in first] == [r.epoch_losses for r in second]


def test_empty_grid_rejected(synthetic_records):
    with pytest.raises(ValidationError):
        sweep_alpha(synthetic_records, [])


def test_fraction_sweep(synthetic_records):
    rows = sweep_fraction(synthetic_records, [0.1, 1.0], cfg=TrainConfig(epochs=1))
    assert [row.value for row in rows] == [0.1, 1.0]
    assert all(row.report.record_count == 120 for row in rows)


def test_ablation_covers_every_variant(synthetic_records):
    rows = run_ablation(synthetic_records, cfg=TrainConfig(epochs=1))
    assert [row.value for row in rows] == list(ABLATION_VARIANTS)
    oracle = _geo_rows(rows[0].report)["oracle"]
    for row in rows:
        assert _geo_rows(row.report)["oracle"] == oracle


def test_ablation_without_embeddings_uses_context_features(synthetic_records):
    bare = [
        type(r)(r.id, r.pred_retrieval, r.pred_generation, r.ground_truth, r.candidates)
        for r in synthetic_records[:200]
    ]
    rows = run_ablation(bare, ["full", "no_candidates"], cfg=TrainConfig(epochs=1))
    assert len(rows) == 2


def test_unknown_ablation_variant(synthetic_records):
    with pytest.raises(ValidationError):
        run_ablation(synthetic_records, ["no_pixels"])


def test_steep_alpha_matches_hard_labels(planted_records):
    steep = sweep_alpha(planted_records, [100.0])[0].report
    hard = sweep_alpha(planted_records, [1.6], dispo=DispoConfig(hard_label_mode=True))[0].report
    for a, b in zip(steep.row("router").geo_accuracy, hard.row("router").geo_accuracy):
        assert abs(a - b) <= 0.5


def test_router_recovers_a_planted_signal():
    records = synthesize(SynthConfig(n=10000, seed=0))
    train_records, heldout = split_dataset(records, 0.8, seed=0)
    report, _ = train_and_evaluate(
        train_records, heldout, TrainConfig(), DispoConfig(), None, ModelSettings()
    )
    router = report.row("router")
    assert router.routing_average >= 85.0
    assert router.geo_average > report.row("retrieval").geo_average
    assert router.geo_average > report.row("generation").geo_average
    assert report.row("oracle").geo_average - router.geo_average <= 3.0


def test_soft_labels_hold_up_on_near_ties():
    differences = []
    for seed in range(5):
        config = SynthConfig(n=4000, seed=seed, near_tie_fraction=0.3, num_candidates=2)
        records = synthesize(config)
        train_records, heldout = split_dataset(records, 0.8, seed=seed)
        cfg = TrainConfig(seed=seed)
        soft, _ = train_and_evaluate(
            train_records, heldout, cfg, DispoConfig(), None, ModelSettings()
        )
        hard, _ = train_and_evaluate(
            train_records, heldout, cfg, DispoConfig(hard_label_mode=True), None, ModelSettings()
        )
        differences.append(soft.row("router").geo_average - hard.row("router").geo_average)
    assert np.mean(differences) >= -0.2


def test_context_encoder_router_trains_end_to_end(synthetic_records):
    train_records, heldout = split_dataset(synthetic_records, 0.8)
    encoder = ContextEncoder()
    init = build_router(train_records, ModelSettings(encoder="context"))[1]
    instances = label_records(train_records)
    result = train(instances, TrainConfig(epochs=1), DispoConfig(), init, encoder)
    report = evaluate(heldout, [Policy.router(result.model), Policy.oracle()])
    assert report.row("router").geo_average <= report.row("oracle").geo_average
