"""Routing model parameters, scoring, the routing decision and model files."""

import base64
import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..utils.errors import ModelFileError, ValidationError
from .encoders import encoder_from_spec

MODEL_FORMAT = "georouter-model"
MODEL_VERSION = 1
DEFAULT_HIDDEN = 16


class ParadigmChoice(str, Enum):
    GENERATION = "generation"
    RETRIEVAL = "retrieval"


class ModelKind(str, Enum):
    LINEAR = "linear"
    MLP = "mlp"


# Parameter names in serialization order
PARAM_NAMES = {
    ModelKind.LINEAR: ("theta",),
    ModelKind.MLP: ("W1", "b1", "w2", "b2"),
}


@dataclass
class RouterModel:
    """
    A linear routing head ``r = theta . u`` or a one-hidden-layer tanh MLP
    ``r = w2 . tanh(W1 u + b1) + b2`` on top of a feature encoder.
    """

    kind: ModelKind
    input_dim: int
    params: dict
    encoder_spec: dict = field(default_factory=dict)
    hidden: int = 0

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        expected = self.param_shapes()
        if set(self.params) != set(expected):
            raise ValidationError(
                "params", f"expected {sorted(expected)}, got {sorted(self.params)}"
            )
        for name, shape in expected.items():
            value = np.asarray(self.params[name], dtype=np.float64)
            if value.shape != shape:
                raise ValidationError(name, f"shape {value.shape} does not match {shape}")
            if not np.all(np.isfinite(value)):
                raise ValidationError(name, "contains non-finite values")
            self.params[name] = value

    def param_shapes(self):
        m, h = self.input_dim, self.hidden
        if self.kind == ModelKind.LINEAR:
            return {"theta": (m,)}
        return {"W1": (h, m), "b1": (h,), "w2": (h,), "b2": ()}

    def copy(self):
        return RouterModel(
            kind=self.kind,
            input_dim=self.input_dim,
            params={k: v.copy() for k, v in self.params.items()},
            encoder_spec=dict(self.encoder_spec),
            hidden=self.hidden,
        )


def init_linear(input_dim, encoder_spec=None):
    """Zero-initialized linear head: every score is 0, so it routes everything to retrieval."""
    if input_dim < 1:
        raise ValidationError("input_dim", "must be at least 1")
    return RouterModel(
        kind=ModelKind.LINEAR,
        input_dim=input_dim,
        params={"theta": np.zeros(input_dim)},
        encoder_spec=dict(encoder_spec or {}),
    )


def init_mlp(input_dim, hidden=DEFAULT_HIDDEN, seed=0, encoder_spec=None):
    """MLP with weights drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    if input_dim < 1:
        raise ValidationError("input_dim", "must be at least 1")
    if hidden < 1:
        raise ValidationError("hidden", "must be at least 1")
    rng = np.random.default_rng(seed)
    b_in = 1.0 / math.sqrt(input_dim)
    b_hid = 1.0 / math.sqrt(hidden)
    params = {
        "W1": rng.uniform(-b_in, b_in, (hidden, input_dim)),
        "b1": rng.uniform(-b_in, b_in, hidden),
        "w2": rng.uniform(-b_hid, b_hid, hidden),
        "b2": np.array(rng.uniform(-b_hid, b_hid)),
    }
    return RouterModel(
        kind=ModelKind.MLP,
        input_dim=input_dim,
        params=params,
        encoder_spec=dict(encoder_spec or {}),
        hidden=hidden,
    )


def forward(model, features):
    """
    Routing scores for a feature matrix.

    Returns:
        tuple: (scores of shape (N,), hidden activations or None for the linear head)
    """
    u = np.asarray(features, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] != model.input_dim:
        raise ValidationError(
            "features", f"expected shape (N, {model.input_dim}), got {u.shape}"
        )
    if model.kind == ModelKind.LINEAR:
        return u @ model.params["theta"], None
    hidden = np.tanh(u @ model.params["W1"].T + model.params["b1"])
    return hidden @ model.params["w2"] + model.params["b2"], hidden


def score(record, model, encoder=None):
    """Routing score of one record."""
    if encoder is None:
        encoder = encoder_from_spec(model.encoder_spec)
    if encoder.dim != model.input_dim:
        raise ValidationError(
            "encoder", f"output dimension {encoder.dim} does not match model {model.input_dim}"
        )
    scores, _ = forward(model, encoder.encode(record)[None, :])
    return float(scores[0])


def decide(r):
    """Generation when the score is strictly positive, retrieval otherwise."""
    if not math.isfinite(r):
        raise ValidationError("score", f"must be finite, got {r}")
    return ParadigmChoice.GENERATION if r > 0 else ParadigmChoice.RETRIEVAL


def _encode_array(value):
    return base64.b64encode(np.ascontiguousarray(value, dtype="<f8").tobytes()).decode("ascii")


def _decode_array(text, shape, name):
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except (ValueError, AttributeError) as e:
        raise ModelFileError(f"parameter {name!r} is not valid base64: {e}")
    count = int(np.prod(shape)) if shape else 1
    if len(raw) != 8 * count:
        raise ModelFileError(
            f"parameter {name!r} holds {len(raw) // 8} values, shape {shape} needs {count}"
        )
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def save_model(model, file_path):
    """
    Write a model container.

    Layout: one JSON object with ``format``, ``version``, ``kind``,
    ``input_dim``, ``hidden``, ``encoder_spec`` and ``params``; each parameter
    is ``{"shape": [...], "data": base64 of little-endian float64, C order}``.
    """
    container = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind.value,
        "input_dim": model.input_dim,
        "hidden": model.hidden,
        "encoder_spec": model.encoder_spec,
        "params": {
            name: {
                "shape": list(model.params[name].shape),
                "data": _encode_array(model.params[name]),
            }
            for name in PARAM_NAMES[model.kind]
        },
    }
    os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(container, f, indent=2)
        f.write("\n")


def load_model(file_path):
    """Read a model container written by save_model."""
    if not os.path.exists(file_path):
        raise ModelFileError("file not found", path=file_path)
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            container = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"corrupt model file: {e.msg}", path=file_path)

    if not isinstance(container, dict) or container.get("format") != MODEL_FORMAT:
        raise ModelFileError("not a router model file", path=file_path)
    if container.get("version") != MODEL_VERSION:
        raise ModelFileError(
            f"version mismatch: file has {container.get('version')!r}, "
            f"expected {MODEL_VERSION}",
            path=file_path,
        )
    try:
        kind = ModelKind(container["kind"])
        input_dim = int(container["input_dim"])
        hidden = int(container.get("hidden", 0))
        params = {}
        for name in PARAM_NAMES[kind]:
            entry = container["params"][name]
            params[name] = _decode_array(entry["data"], tuple(entry["shape"]), name)
        return RouterModel(
            kind=kind,
            input_dim=input_dim,
            params=params,
            encoder_spec=container.get("encoder_spec", {}),
            hidden=hidden,
        )
    except ModelFileError as e:
        raise ModelFileError(str(e), path=file_path)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFileError(f"invalid model file: {e}", path=file_path)
