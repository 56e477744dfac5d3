"""Turn paired paradigm predictions into labeled routing instances."""

import math
from dataclasses import dataclass, field
from typing import Mapping

from ..utils.errors import DataError, ValidationError
from ..utils.geo import geodesic_distance
from ..utils.record_io import RawEntry, record_from_dict
from .records import LabeledInstance, PreferenceTarget

DEFAULT_ALPHA = 1.6
DEFAULT_EPSILON = 1e-6


def stable_sigmoid(z):
    """Logistic function without overflow for large |z|."""
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def log_error_ratio(d_ret, d_gen, epsilon):
    """ln(d_ret + eps) - ln(d_gen + eps), accurate to a few ulps for close or distant errors."""
    if d_gen <= d_ret:
        return math.log1p((d_ret - d_gen) / (d_gen + epsilon))
    return -math.log1p((d_gen - d_ret) / (d_ret + epsilon))


def preference_from_distances(d_ret, d_gen, epsilon=DEFAULT_EPSILON, alpha=DEFAULT_ALPHA):
    """Soft and hard routing labels for a pair of prediction errors in kilometers."""
    if epsilon <= 0 or not math.isfinite(epsilon):
        raise ValidationError("epsilon", f"must be positive, got {epsilon}")
    if alpha <= 0 or not math.isfinite(alpha):
        raise ValidationError("alpha", f"must be positive, got {alpha}")
    delta = log_error_ratio(d_ret, d_gen, epsilon)
    return PreferenceTarget(
        d_retrieval=d_ret,
        d_generation=d_gen,
        delta=delta,
        soft_label=stable_sigmoid(alpha * delta),
        # Ties go to retrieval
        hard_label=1 if d_gen < d_ret else 0,
    )


def build_targets(record, epsilon=DEFAULT_EPSILON, alpha=DEFAULT_ALPHA):
    """
    Derive the distance-aware preference target of one record.

    Args:
        record: RoutingRecord with ground truth
        epsilon: Stability constant added to both distances before the log
        alpha: Steepness of the soft label

    Returns:
        PreferenceTarget: distances, log-ratio, soft label and hard label
    """
    if record.ground_truth is None:
        raise DataError(f"unlabeled record {record.id!r}")
    d_ret = geodesic_distance(record.pred_retrieval, record.ground_truth)
    d_gen = geodesic_distance(record.pred_generation, record.ground_truth)
    return preference_from_distances(d_ret, d_gen, epsilon, alpha)


@dataclass
class BuildSummary:
    total: int = 0
    kept: int = 0
    skipped: int = 0
    positives: int = 0
    diagnostics: list = field(default_factory=list)

    @property
    def label_balance(self):
        """Fraction of kept instances where generation is strictly better."""
        return self.positives / self.kept if self.kept else 0.0


def build_dataset(entries, epsilon=DEFAULT_EPSILON, alpha=DEFAULT_ALPHA, verbose=False):
    """
    Build labeled instances from raw prediction entries, preserving input order.

    Entries are wire dictionaries or RawEntry objects (as produced by
    ``iter_raw_entries(..., strict=False)``). Invalid entries are skipped and
    reported in the summary; duplicate ids are fatal.

    Returns:
        tuple: (list of LabeledInstance, BuildSummary)
    """
    summary = BuildSummary()
    instances = []
    seen_ids = set()

    for index, entry in enumerate(entries, 1):
        if not isinstance(entry, RawEntry):
            entry = RawEntry(index, data=entry)
        summary.total += 1

        if entry.error is not None:
            _skip(summary, entry.line, entry.error, verbose)
            continue
        try:
            if not isinstance(entry.data, Mapping):
                raise ValidationError("record", "expected a JSON object")
            record = record_from_dict(dict(entry.data))
            if record.ground_truth is None:
                raise ValidationError("gt", "missing")
            if record.candidates and record.candidates[0].coordinate != record.pred_retrieval:
                raise ValidationError(
                    "pred_ret", "does not match the top-1 candidate coordinate"
                )
        except ValidationError as e:
            _skip(summary, entry.line, str(e), verbose)
            continue

        if record.id in seen_ids:
            raise DataError(f"duplicate id {record.id!r}", line=entry.line)
        seen_ids.add(record.id)

        target = build_targets(record, epsilon, alpha)
        instances.append(LabeledInstance(record, target))
        summary.kept += 1
        summary.positives += target.hard_label

    if not instances:
        raise DataError(f"no valid entries ({summary.skipped} skipped)")
    return instances, summary


def label_records(records, epsilon=DEFAULT_EPSILON, alpha=DEFAULT_ALPHA):
    """Pair already-parsed records with their targets."""
    return [LabeledInstance(r, build_targets(r, epsilon, alpha)) for r in records]


def _skip(summary, line, reason, verbose):
    summary.skipped += 1
    message = f"line {line}: skipped: {reason}"
    summary.diagnostics.append(message)
    if verbose:
        print(message)
