"""
Distance-aware preference objective.

The router is trained with a binary cross-entropy against soft labels
p = sigmoid(alpha * (ln(d_ret + eps) - ln(d_gen + eps))). With
``hard_label_mode`` the soft labels are replaced by the binary labels, which
gives plain BCE through exactly the same code.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..dataset.builder import DEFAULT_ALPHA, DEFAULT_EPSILON
from ..utils.errors import ValidationError
from .model import ModelKind, forward


@dataclass(frozen=True)
class DispoConfig:
    alpha: float = DEFAULT_ALPHA
    epsilon: float = DEFAULT_EPSILON
    hard_label_mode: bool = False

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValidationError("alpha", f"must be positive, got {self.alpha}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValidationError("epsilon", f"must be positive, got {self.epsilon}")


def sigmoid(r):
    """Elementwise logistic function, overflow-free."""
    r = np.asarray(r, dtype=np.float64)
    out = np.empty_like(r)
    pos = r >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-r[pos]))
    e = np.exp(r[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logit(q, clamp=1e-12):
    """Inverse of the sigmoid with q clamped to [clamp, 1 - clamp]."""
    q = np.clip(np.asarray(q, dtype=np.float64), clamp, 1.0 - clamp)
    return np.log(q) - np.log1p(-q)


def label_vector(targets, cfg=None):
    """The labels the loss is taken against: soft labels, or hard labels in hard_label_mode."""
    cfg = cfg or DispoConfig()
    if cfg.hard_label_mode:
        return np.array([t.hard_label for t in targets], dtype=np.float64)
    return np.array([t.soft_label for t in targets], dtype=np.float64)


def instance_losses(scores, q):
    """
    Per-instance cross-entropy ``q * softplus(-r) + (1 - q) * softplus(r)``.

    softplus is evaluated with logaddexp, so no probability close to 0 or 1 is
    ever put through a log.
    """
    r = np.asarray(scores, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return q * np.logaddexp(0.0, -r) + (1.0 - q) * np.logaddexp(0.0, r)


def loss(scores, targets, cfg=None):
    """Mean distance-aware cross-entropy over a batch."""
    r = np.asarray(scores, dtype=np.float64)
    if r.ndim != 1 or r.size == 0:
        raise ValidationError("scores", "expected a non-empty 1-D sequence")
    if r.size != len(targets):
        raise ValidationError(
            "targets", f"length {len(targets)} does not match {r.size} scores"
        )
    if not np.all(np.isfinite(r)):
        raise ValidationError("scores", "contains non-finite values")
    return float(np.mean(instance_losses(r, label_vector(targets, cfg))))


def grad_wrt_score(r, q):
    """dL/dr of one instance: sigmoid(r) - q."""
    if not 0.0 <= q <= 1.0:
        raise ValidationError("q", f"must lie in [0, 1], got {q}")
    if not math.isfinite(r):
        raise ValidationError("r", f"must be finite, got {r}")
    return float(sigmoid(np.array([r]))[0]) - q


def grad_wrt_params(features, q, model):
    """
    Gradient of the mean loss with respect to every model parameter.

    Args:
        features: (N, m) feature matrix
        q: (N,) labels in [0, 1]
        model: RouterModel

    Returns:
        tuple: (dict of parameter-shaped gradients, batch loss)
    """
    u = np.asarray(features, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] == 0:
        raise ValidationError("features", "expected a non-empty (N, m) matrix")
    if u.shape[1] != model.input_dim:
        raise ValidationError(
            "features", f"dimension {u.shape[1]} does not match model {model.input_dim}"
        )
    if q.shape != (u.shape[0],):
        raise ValidationError("q", f"expected shape ({u.shape[0]},), got {q.shape}")

    n = u.shape[0]
    scores, hidden = forward(model, u)
    batch_loss = float(np.mean(instance_losses(scores, q)))
    dr = (sigmoid(scores) - q) / n

    if model.kind == ModelKind.LINEAR:
        return {"theta": u.T @ dr}, batch_loss

    w2 = model.params["w2"]
    dh = np.outer(dr, w2) * (1.0 - hidden**2)
    grads = {
        "W1": dh.T @ u,
        "b1": dh.sum(axis=0),
        "w2": hidden.T @ dr,
        "b2": np.array(dr.sum()),
    }
    return grads, batch_loss
