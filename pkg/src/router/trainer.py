"""Minibatch AdamW training of the routing head."""

import math
from dataclasses import dataclass, field

import numpy as np

from ..utils.errors import DataError, NumericalError, ValidationError
from .dispo import DispoConfig, grad_wrt_params, label_vector
from .encoders import encoder_from_spec


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 24
    epochs: int = 3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    data_fraction: float = 1.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValidationError("learning_rate", "must be non-negative")
        if self.batch_size < 1:
            raise ValidationError("batch_size", "must be at least 1")
        if self.epochs < 1:
            raise ValidationError("epochs", "must be at least 1")
        if not 0.0 < self.data_fraction <= 1.0:
            raise ValidationError("data_fraction", "must lie in (0, 1]")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay", "must be non-negative")


class AdamW:
    """Adam with decoupled weight decay over a dict of numpy parameters."""

    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.01):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads):
        """Update ``params`` in place."""
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t

        for k in params:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])

            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2

            # decay is applied to the weights directly, outside the adaptive scaling
            params[k] = params[k] - self.lr * self.weight_decay * params[k]
            params[k] = params[k] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    model: object
    epoch_losses: list = field(default_factory=list)
    train_size: int = 0


def training_subset(n, fraction, rng):
    """Indices of the seeded prefix-of-shuffle subset used for every epoch."""
    order = rng.permutation(n)
    if fraction >= 1.0:
        return order
    # 0.3 * 100 evaluates to 30.000000000000004
    return order[: max(1, math.ceil(round(fraction * n, 9)))]


def train(instances, cfg=None, dispo=None, init=None, encoder=None, verbose=False):
    """
    Fit a router on labeled instances.

    Args:
        instances: Sequence of LabeledInstance
        cfg: TrainConfig
        dispo: DispoConfig, decides soft or hard labels
        init: RouterModel to start from (left untouched)
        encoder: FeatureEncoder, rebuilt from ``init.encoder_spec`` when omitted

    Returns:
        TrainResult: trained model, mean loss per epoch and the number of instances used
    """
    cfg = cfg or TrainConfig()
    dispo = dispo or DispoConfig()
    instances = list(instances)
    if not instances:
        raise DataError("cannot train on an empty dataset")
    if init is None:
        raise ValidationError("init", "an initial RouterModel is required")
    encoder = encoder or encoder_from_spec(init.encoder_spec)
    if encoder.dim != init.input_dim:
        raise ValidationError(
            "encoder", f"output dimension {encoder.dim} does not match model {init.input_dim}"
        )

    features = encoder.encode_many(inst.record for inst in instances)
    labels = label_vector([inst.target for inst in instances], dispo)

    rng = np.random.default_rng(cfg.seed)
    subset = training_subset(len(instances), cfg.data_fraction, rng)
    features, labels = features[subset], labels[subset]
    n = len(subset)

    model = init.copy()
    optimizer = AdamW(
        lr=cfg.learning_rate,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
    )

    epoch_losses = []
    batch_index = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            grads, batch_loss = grad_wrt_params(features[idx], labels[idx], model)
            if not math.isfinite(batch_loss) or not all(
                np.all(np.isfinite(g)) for g in grads.values()
            ):
                raise NumericalError(
                    f"non-finite loss or gradient at batch {batch_index} (epoch {epoch + 1})"
                )
            optimizer.step(model.params, grads)
            total += batch_loss * len(idx)
            batch_index += 1
        epoch_losses.append(total / n)
        if verbose:
            print(f"epoch {epoch + 1}/{cfg.epochs}: loss {epoch_losses[-1]:.6f}")

    return TrainResult(model=model, epoch_losses=epoch_losses, train_size=n)
