"""
Feature encoders.

They stand in for the vision-language backbone: a record goes in, a fixed
length real vector ``u`` comes out, and the routing head only ever sees ``u``.
"""

import math
from abc import ABC, abstractmethod

import numpy as np

from ..dataset.records import ContextMode
from ..utils.errors import DataError, ValidationError
from ..utils.geo import geodesic_distance

AGREEMENT_RADIUS_KM = 25.0
CONTEXT_FEATURES = (
    "log_pred_gap",
    "log_candidate_mean",
    "log_candidate_std",
    "candidate_agreement",
    "candidate_count",
    "sin_lat_ret",
    "cos_lat_ret",
    "sin_lon_ret",
    "cos_lon_ret",
    "sin_lat_gen",
    "cos_lat_gen",
    "sin_lon_gen",
    "cos_lon_gen",
    "bias",
)


class FeatureEncoder(ABC):
    """Deterministic map from a RoutingRecord to a vector of length ``dim``."""

    @property
    @abstractmethod
    def dim(self):
        ...

    @abstractmethod
    def encode(self, record):
        ...

    @abstractmethod
    def spec(self):
        """JSON-serializable description, enough for encoder_from_spec to rebuild it."""

    def encode_many(self, records):
        records = list(records)
        if not records:
            return np.zeros((0, self.dim))
        return np.stack([self.encode(r) for r in records])


class EmbeddingEncoder(FeatureEncoder):
    """Passes the record's precomputed embedding through unchanged."""

    def __init__(self, embedding_dim):
        if embedding_dim < 1:
            raise ValidationError("embedding_dim", "must be at least 1")
        self.embedding_dim = int(embedding_dim)

    @property
    def dim(self):
        return self.embedding_dim

    def encode(self, record):
        if record.embedding is None:
            raise DataError(f"record {record.id!r} has no embedding")
        if len(record.embedding) != self.embedding_dim:
            raise DataError(
                f"record {record.id!r} embedding has {len(record.embedding)} values, "
                f"expected {self.embedding_dim}"
            )
        return np.asarray(record.embedding, dtype=np.float64)

    def spec(self):
        return {"type": "embedding", "embedding_dim": self.embedding_dim}


class ContextEncoder(FeatureEncoder):
    """
    Hand-built features from the same fields the routing prompt shows:
    the gap between the two predictions, how tightly the retrieved
    candidates agree with the top-1, and where both predictions lie.
    Ablated context modes zero the corresponding features.
    """

    def __init__(self, mode=ContextMode.FULL):
        self.mode = ContextMode(mode)

    @property
    def dim(self):
        return len(CONTEXT_FEATURES)

    def encode(self, record):
        mode = self.mode
        features = np.zeros(self.dim)
        ret, gen = record.pred_retrieval, record.pred_generation

        if mode.uses_retrieval and mode.uses_generation:
            features[0] = math.log1p(geodesic_distance(ret, gen))

        if mode.uses_candidates and record.candidates:
            k = len(record.candidates)
            dists = [geodesic_distance(c.coordinate, ret) for c in record.candidates]
            # fsum keeps these exactly independent of candidate order
            mean = math.fsum(dists) / k
            std = math.sqrt(math.fsum((d - mean) ** 2 for d in dists) / k)
            features[1] = math.log1p(mean)
            features[2] = math.log1p(std)
            features[3] = sum(1 for d in dists if d <= AGREEMENT_RADIUS_KM) / k
            features[4] = k / 10.0

        if mode.uses_retrieval:
            features[5:9] = _trig(ret)
        if mode.uses_generation:
            features[9:13] = _trig(gen)
        features[13] = 1.0
        return features

    def spec(self):
        return {"type": "context", "mode": self.mode.value}


class ConcatEncoder(FeatureEncoder):
    """Embedding features followed by context features."""

    def __init__(self, embedding_dim, mode=ContextMode.FULL):
        self.embedding = EmbeddingEncoder(embedding_dim)
        self.context = ContextEncoder(mode)

    @property
    def dim(self):
        return self.embedding.dim + self.context.dim

    def encode(self, record):
        return np.concatenate([self.embedding.encode(record), self.context.encode(record)])

    def spec(self):
        return {
            "type": "concat",
            "embedding_dim": self.embedding.embedding_dim,
            "mode": self.context.mode.value,
        }


def _trig(coordinate):
    lat, lon = math.radians(coordinate.lat), math.radians(coordinate.lon)
    return [math.sin(lat), math.cos(lat), math.sin(lon), math.cos(lon)]


def encoder_from_spec(spec):
    """Rebuild an encoder from its spec dictionary."""
    kind = (spec or {}).get("type")
    try:
        if kind == "embedding":
            return EmbeddingEncoder(spec["embedding_dim"])
        if kind == "context":
            return ContextEncoder(spec.get("mode", ContextMode.FULL.value))
        if kind == "concat":
            return ConcatEncoder(spec["embedding_dim"], spec.get("mode", ContextMode.FULL.value))
    except (KeyError, ValueError) as e:
        raise ValidationError("encoder_spec", f"invalid encoder spec {spec!r}: {e}")
    raise ValidationError("encoder_spec", f"unknown encoder type {kind!r}")


def make_encoder(name, embedding_dim=None, mode=ContextMode.FULL):
    """
    Encoder by name: ``embedding``, ``context``, ``concat`` or ``auto``.

    ``auto`` picks the embedding encoder when the data carries embeddings and
    the context encoder otherwise.
    """
    if name == "auto":
        name = "embedding" if embedding_dim else "context"
    if name in ("embedding", "concat") and not embedding_dim:
        raise ValidationError("encoder", f"{name!r} encoder needs records with embeddings")
    if name == "embedding":
        return EmbeddingEncoder(embedding_dim)
    if name == "context":
        return ContextEncoder(mode)
    if name == "concat":
        return ConcatEncoder(embedding_dim, mode)
    raise ValidationError("encoder", f"unknown encoder {name!r}")
