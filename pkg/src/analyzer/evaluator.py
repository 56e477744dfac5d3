"""Geolocalization accuracy, routing accuracy and reference policies."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ..router.encoders import encoder_from_spec
from ..router.model import ParadigmChoice, decide, forward
from ..utils.errors import DataError, NumericalError, ValidationError
from ..utils.geo import ThresholdSet, geodesic_distance


class PolicyKind(str, Enum):
    RETRIEVAL = "retrieval"
    GENERATION = "generation"
    ROUTER = "router"
    ORACLE = "oracle"


@dataclass
class Policy:
    """How a prediction is chosen for each record."""

    kind: PolicyKind
    model: object = None
    encoder: object = None
    name: Optional[str] = None

    def __post_init__(self):
        self.kind = PolicyKind(self.kind)
        if self.kind == PolicyKind.ROUTER:
            if self.model is None:
                raise ValidationError("policy", "router policy needs a model")
            if self.encoder is None:
                self.encoder = encoder_from_spec(self.model.encoder_spec)
        if self.name is None:
            self.name = self.kind.value

    @classmethod
    def pure_retrieval(cls):
        return cls(PolicyKind.RETRIEVAL)

    @classmethod
    def pure_generation(cls):
        return cls(PolicyKind.GENERATION)

    @classmethod
    def oracle(cls):
        return cls(PolicyKind.ORACLE)

    @classmethod
    def router(cls, model, encoder=None, name=None):
        return cls(PolicyKind.ROUTER, model=model, encoder=encoder, name=name)


def _prediction(record, choice):
    if choice == ParadigmChoice.GENERATION:
        return record.pred_generation
    return record.pred_retrieval


def _oracle_choice(record):
    if record.ground_truth is None:
        raise DataError(f"oracle policy needs ground truth (record {record.id!r})")
    d_ret = geodesic_distance(record.pred_retrieval, record.ground_truth)
    d_gen = geodesic_distance(record.pred_generation, record.ground_truth)
    return ParadigmChoice.GENERATION if d_gen < d_ret else ParadigmChoice.RETRIEVAL


def apply_policy(record, policy):
    """
    Choose a paradigm for one record.

    Returns:
        tuple: (chosen GeoCoordinate, ParadigmChoice)
    """
    if policy.kind == PolicyKind.RETRIEVAL:
        choice = ParadigmChoice.RETRIEVAL
    elif policy.kind == PolicyKind.GENERATION:
        choice = ParadigmChoice.GENERATION
    elif policy.kind == PolicyKind.ORACLE:
        choice = _oracle_choice(record)
    else:
        scores, _ = forward(policy.model, policy.encoder.encode(record)[None, :])
        choice = decide(float(scores[0]))
    return _prediction(record, choice), choice


def policy_choices(records, policy):
    """Choices for a whole dataset; router scores are computed in one batch."""
    if policy.kind != PolicyKind.ROUTER:
        return [apply_policy(r, policy)[1] for r in records]
    scores, _ = forward(policy.model, policy.encoder.encode_many(records))
    return [decide(float(s)) for s in scores]


@dataclass
class RoutingAccuracy:
    """Percentage over the disagreement set, None when that set is empty."""

    percent: Optional[float]
    disagreement: int


def _routing_counts(d_ret, d_gen, chose_gen, t):
    ret_in = d_ret <= t
    gen_in = d_gen <= t
    disagree = ret_in != gen_in
    size = int(disagree.sum())
    if size == 0:
        return RoutingAccuracy(None, 0)
    correct = int((disagree & np.where(chose_gen, gen_in, ret_in)).sum())
    return RoutingAccuracy(100.0 * correct / size, size)


def routing_accuracy(records, choices, t):
    """
    Routing accuracy at threshold ``t``.

    Only records where exactly one paradigm lands within ``t`` count; on them
    the choice is right when it picked that paradigm.
    """
    records = list(records)
    if not records:
        raise DataError("no records")
    if len(choices) != len(records):
        raise ValidationError("choices", "must have one entry per record")
    if t <= 0:
        raise ValidationError("threshold", f"must be positive, got {t}")
    d_ret, d_gen = _distances(records)
    chose_gen = np.array([ParadigmChoice(c) == ParadigmChoice.GENERATION for c in choices])
    return _routing_counts(d_ret, d_gen, chose_gen, t)


def _distances(records):
    d_ret, d_gen = [], []
    for r in records:
        if r.ground_truth is None:
            raise DataError(f"record {r.id!r} has no ground truth")
        d_ret.append(geodesic_distance(r.pred_retrieval, r.ground_truth))
        d_gen.append(geodesic_distance(r.pred_generation, r.ground_truth))
    return np.array(d_ret), np.array(d_gen)


def _mean_defined(values):
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


@dataclass
class PolicyRow:
    name: str
    kind: str
    geo_accuracy: list
    geo_average: float
    routing_accuracy: list
    routing_average: Optional[float]
    generation_share: float


@dataclass
class EvalReport:
    thresholds: list
    labels: list
    record_count: int
    disagreement: list
    rows: list = field(default_factory=list)

    def row(self, name):
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def to_dict(self):
        return {
            "record_count": self.record_count,
            "thresholds_km": self.thresholds,
            "labels": self.labels,
            "disagreement": self.disagreement,
            "policies": [
                {
                    "name": r.name,
                    "kind": r.kind,
                    "geo_accuracy": r.geo_accuracy,
                    "geo_average": r.geo_average,
                    "routing_accuracy": r.routing_accuracy,
                    "routing_average": r.routing_average,
                    "generation_share": r.generation_share,
                }
                for r in self.rows
            ],
        }


def evaluate(records, policies, ts=None):
    """
    Evaluate policies on records with ground truth.

    Returns:
        EvalReport: per-threshold geolocalization and routing accuracy per policy
    """
    ts = ts or ThresholdSet()
    records = list(records)
    if not records:
        raise DataError("cannot evaluate an empty dataset")
    if not policies:
        raise ValidationError("policies", "at least one policy required")

    d_ret, d_gen = _distances(records)
    thresholds = np.asarray(ts.thresholds)
    n = len(records)
    disagreement = [int(((d_ret <= t) != (d_gen <= t)).sum()) for t in thresholds]

    report = EvalReport(
        thresholds=list(ts.thresholds),
        labels=ts.labels(),
        record_count=n,
        disagreement=disagreement,
    )
    for policy in policies:
        choices = policy_choices(records, policy)
        chose_gen = np.array([c == ParadigmChoice.GENERATION for c in choices])
        chosen = np.where(chose_gen, d_gen, d_ret)

        # exact integer counts, so the result does not depend on record order
        counts = (chosen[:, None] <= thresholds[None, :]).sum(axis=0)
        geo = [100.0 * int(c) / n for c in counts]
        routing = [_routing_counts(d_ret, d_gen, chose_gen, t).percent for t in thresholds]
        report.rows.append(
            PolicyRow(
                name=policy.name,
                kind=policy.kind.value,
                geo_accuracy=geo,
                geo_average=sum(geo) / len(geo),
                routing_accuracy=routing,
                routing_average=_mean_defined(routing),
                generation_share=100.0 * int(chose_gen.sum()) / n,
            )
        )

    _check_oracle_dominance(report)
    return report


def _check_oracle_dominance(report):
    oracles = [r for r in report.rows if r.kind == PolicyKind.ORACLE.value]
    if not oracles:
        return
    bound = oracles[0].geo_accuracy
    for row in report.rows:
        for i, value in enumerate(row.geo_accuracy):
            if value > bound[i]:
                raise NumericalError(
                    f"policy {row.name!r} exceeds the oracle at {report.thresholds[i]} km"
                )
