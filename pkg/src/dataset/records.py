"""Record schema for routing datasets."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

from ..utils.errors import ValidationError
from ..utils.geo import GeoCoordinate, as_float


@dataclass(frozen=True)
class Candidate:
    """One retrieved database entry: its coordinate and optional similarity score."""

    coordinate: GeoCoordinate
    similarity: Optional[float] = None

    def __post_init__(self):
        if self.similarity is not None:
            object.__setattr__(
                self, "similarity", as_float("candidate.similarity", self.similarity)
            )


@dataclass(frozen=True)
class RoutingRecord:
    """
    One query with both paradigm predictions and its retrieval context.

    ``candidates[0]`` is the top-ranked retrieval result. ``extras`` keeps any
    wire fields the schema does not know about so they survive a rewrite.
    """

    id: str
    pred_retrieval: GeoCoordinate
    pred_generation: GeoCoordinate
    ground_truth: Optional[GeoCoordinate] = None
    candidates: tuple = ()
    embedding: Optional[tuple] = None
    extras: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("id", "must be a non-empty string")
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if self.embedding is not None:
            values = tuple(float(x) for x in self.embedding)
            if not all(math.isfinite(x) for x in values):
                raise ValidationError("embedding", "contains non-finite values")
            object.__setattr__(self, "embedding", values)

    @property
    def has_ground_truth(self):
        return self.ground_truth is not None

    @property
    def embedding_dim(self):
        return None if self.embedding is None else len(self.embedding)


@dataclass(frozen=True)
class PreferenceTarget:
    """Supervision derived from the two prediction errors of one record."""

    d_retrieval: float
    d_generation: float
    delta: float
    soft_label: float
    hard_label: int

    def to_dict(self):
        return {
            "d_ret": self.d_retrieval,
            "d_gen": self.d_generation,
            "delta": self.delta,
            "p": self.soft_label,
            "y": self.hard_label,
        }


class LabeledInstance(NamedTuple):
    record: RoutingRecord
    target: PreferenceTarget


class ContextMode(str, Enum):
    """Which parts of the routing context the router is allowed to see."""

    FULL = "full"
    NO_CANDIDATES = "no_candidates"
    # drops the candidate list and the retrieval prediction
    NO_RETRIEVAL = "no_retrieval"
    NO_GENERATION = "no_generation"
    NONE = "none"

    @property
    def uses_candidates(self):
        return self in (ContextMode.FULL, ContextMode.NO_GENERATION)

    @property
    def uses_retrieval(self):
        return self in (ContextMode.FULL, ContextMode.NO_CANDIDATES, ContextMode.NO_GENERATION)

    @property
    def uses_generation(self):
        return self in (ContextMode.FULL, ContextMode.NO_CANDIDATES, ContextMode.NO_RETRIEVAL)
