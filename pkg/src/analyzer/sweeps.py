"""Hyperparameter sweeps and ablations on a seeded train/held-out split."""

from dataclasses import dataclass, replace

import numpy as np

from ..dataset.builder import label_records
from ..dataset.records import ContextMode
from ..router.dispo import DispoConfig
from ..router.encoders import make_encoder
from ..router.model import init_linear, init_mlp
from ..router.trainer import TrainConfig, train
from ..utils.errors import DataError, ValidationError
from .evaluator import Policy, evaluate

DEFAULT_ALPHAS = (0.1, 0.4, 0.7, 1.0, 1.3, 1.6, 1.9, 2.2, 2.5, 3.0)
DEFAULT_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
ABLATION_VARIANTS = (
    "full",
    "hard_labels",
    "no_candidates",
    "no_retrieval",
    "no_generation",
    "image_only",
)
ROUTER_NAME = "router"
ENCODER_NAMES = ("auto", "embedding", "context", "concat")


@dataclass
class ModelSettings:
    """Which router to train: head kind, encoder and context mode."""

    kind: str = "linear"
    hidden: int = 16
    encoder: str = "auto"
    context_mode: str = ContextMode.FULL.value

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise ValidationError("kind", f"unknown model kind {self.kind!r}")
        if self.hidden < 1:
            raise ValidationError("hidden", "must be at least 1")
        if self.encoder not in ENCODER_NAMES:
            raise ValidationError("encoder", f"unknown encoder {self.encoder!r}")
        if self.context_mode not in [m.value for m in ContextMode]:
            raise ValidationError("context_mode", f"unknown context mode {self.context_mode!r}")


@dataclass
class SweepRow:
    value: object
    report: object
    epoch_losses: list


def split_dataset(records, train_fraction=0.8, seed=0):
    """Seeded shuffle split into (train, held-out)."""
    records = list(records)
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("train_fraction", "must lie in (0, 1)")
    if len(records) < 2:
        raise DataError("need at least two records to split")
    order = np.random.default_rng(seed).permutation(len(records))
    cut = min(len(records) - 1, max(1, int(round(train_fraction * len(records)))))
    return [records[i] for i in order[:cut]], [records[i] for i in order[cut:]]


def _embedding_dim(records):
    for r in records:
        if r.embedding is not None:
            return len(r.embedding)
    return None


def build_router(records, settings, seed=0):
    """Fresh encoder and initial model for a dataset; identical for identical inputs."""
    encoder = make_encoder(
        settings.encoder, _embedding_dim(records), ContextMode(settings.context_mode)
    )
    if settings.kind == "mlp":
        model = init_mlp(encoder.dim, settings.hidden, seed, encoder.spec())
    else:
        model = init_linear(encoder.dim, encoder.spec())
    return encoder, model


def train_and_evaluate(train_records, heldout, cfg, dispo, ts, settings, name=ROUTER_NAME):
    """Label, train, and evaluate the router next to both pure policies and the oracle."""
    encoder, init = build_router(train_records, settings, cfg.seed)
    instances = label_records(train_records, dispo.epsilon, dispo.alpha)
    result = train(instances, cfg, dispo, init, encoder)
    policies = [
        Policy.pure_retrieval(),
        Policy.pure_generation(),
        Policy.router(result.model, encoder, name=name),
        Policy.oracle(),
    ]
    return evaluate(heldout, policies, ts), result


def sweep_alpha(
    records,
    alphas=DEFAULT_ALPHAS,
    cfg=None,
    ts=None,
    dispo=None,
    settings=None,
    train_fraction=0.8,
    verbose=False,
):
    """One row per alpha: relabel, retrain from the same init and seed, evaluate held-out."""
    alphas = list(alphas)
    if not alphas:
        raise ValidationError("alphas", "at least one value required")
    cfg = cfg or TrainConfig()
    dispo = dispo or DispoConfig()
    settings = settings or ModelSettings()
    train_records, heldout = split_dataset(records, train_fraction, cfg.seed)

    rows = []
    for alpha in alphas:
        report, result = train_and_evaluate(
            train_records, heldout, cfg, replace(dispo, alpha=alpha), ts, settings
        )
        rows.append(SweepRow(alpha, report, result.epoch_losses))
        if verbose:
            print(f"alpha={alpha:g}: mean accuracy {report.row(ROUTER_NAME).geo_average:.2f}")
    return rows


def sweep_fraction(
    records,
    fractions=DEFAULT_FRACTIONS,
    cfg=None,
    ts=None,
    dispo=None,
    settings=None,
    train_fraction=0.8,
    verbose=False,
):
    """Data-efficiency study: train on growing proportions of the training split."""
    fractions = list(fractions)
    if not fractions:
        raise ValidationError("fractions", "at least one value required")
    cfg = cfg or TrainConfig()
    dispo = dispo or DispoConfig()
    settings = settings or ModelSettings()
    train_records, heldout = split_dataset(records, train_fraction, cfg.seed)

    rows = []
    for fraction in fractions:
        report, result = train_and_evaluate(
            train_records, heldout, replace(cfg, data_fraction=fraction), dispo, ts, settings
        )
        rows.append(SweepRow(fraction, report, result.epoch_losses))
        if verbose:
            print(
                f"fraction={fraction:g} ({result.train_size} instances): "
                f"mean accuracy {report.row(ROUTER_NAME).geo_average:.2f}"
            )
    return rows


def _variant_settings(variant, settings, dispo):
    if variant not in ABLATION_VARIANTS:
        raise ValidationError("variant", f"unknown ablation variant {variant!r}")
    if variant == "hard_labels":
        return settings, replace(dispo, hard_label_mode=True)
    if variant == "full":
        return settings, dispo
    mode = ContextMode.NONE if variant == "image_only" else ContextMode(variant)
    return replace(settings, context_mode=mode.value), dispo


def run_ablation(
    records,
    variants=ABLATION_VARIANTS,
    cfg=None,
    ts=None,
    dispo=None,
    settings=None,
    train_fraction=0.8,
    verbose=False,
):
    """Train one router per ablation variant on the same split."""
    variants = list(variants)
    if not variants:
        raise ValidationError("variants", "at least one value required")
    cfg = cfg or TrainConfig()
    dispo = dispo or DispoConfig()
    settings = settings or ModelSettings()
    if settings.encoder in ("auto", "embedding"):
        # the embedding stands in for the image; ablations strip the context around it
        encoder = "concat" if _embedding_dim(records) else "context"
        settings = replace(settings, encoder=encoder)
    train_records, heldout = split_dataset(records, train_fraction, cfg.seed)

    rows = []
    for variant in variants:
        variant_settings, variant_dispo = _variant_settings(variant, settings, dispo)
        report, result = train_and_evaluate(
            train_records, heldout, cfg, variant_dispo, ts, variant_settings
        )
        rows.append(SweepRow(variant, report, result.epoch_losses))
        if verbose:
            print(f"{variant}: mean accuracy {report.row(ROUTER_NAME).geo_average:.2f}")
    return rows
