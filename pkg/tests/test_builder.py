import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from conftest import make_record, raw_entry, record_at_distances
from src.dataset.builder import (
    build_dataset,
    build_targets,
    label_records,
    preference_from_distances,
)
from src.utils.errors import DataError, ValidationError
from src.utils.record_io import RawEntry


def _decimal_reference(d_ret, d_gen, epsilon, alpha):
    getcontext().prec = 50
    delta = (Decimal(d_ret) + Decimal(epsilon)).ln() - (Decimal(d_gen) + Decimal(epsilon)).ln()
    p = Decimal(1) / (Decimal(1) + (-Decimal(alpha) * delta).exp())
    return delta, p


class TestPreference:
    def test_exact_tie(self):
        target = preference_from_distances(10.0, 10.0)
        assert target.delta == 0.0
        assert target.soft_label == 0.5
        assert target.hard_label == 0

    def test_generation_much_better(self):
        target = preference_from_distances(100.0, 1.0)
        assert target.delta == pytest.approx(4.605169, abs=1e-6)
        assert target.soft_label == pytest.approx(0.999370, abs=1e-6)
        assert target.hard_label == 1

    def test_both_exact(self):
        record = make_record(gt=(5.0, 5.0), ret=(5.0, 5.0), gen=(5.0, 5.0))
        target = build_targets(record)
        assert target.d_retrieval == 0.0 and target.d_generation == 0.0
        assert target.delta == 0.0
        assert target.soft_label == 0.5
        assert target.hard_label == 0

    def test_matches_high_precision_reference(self):
        rng = np.random.default_rng(7)
        pairs = 10.0 ** rng.uniform(-3.0, math.log10(2e4), (1000, 2))
        for d_ret, d_gen in pairs:
            target = preference_from_distances(float(d_ret), float(d_gen), 1e-6, 1.6)
            delta, p = _decimal_reference(float(d_ret), float(d_gen), 1e-6, 1.6)
            assert abs(Decimal(target.delta) - delta) <= abs(delta) * Decimal("1e-10")
            assert abs(Decimal(target.soft_label) - p) <= p * Decimal("1e-10")

    def test_swapping_distances_mirrors_the_labels(self):
        rng = np.random.default_rng(8)
        for d_ret, d_gen in rng.lognormal(3.0, 2.0, (200, 2)):
            forward = preference_from_distances(float(d_ret), float(d_gen))
            swapped = preference_from_distances(float(d_gen), float(d_ret))
            assert swapped.delta == -forward.delta
            assert swapped.soft_label == pytest.approx(1.0 - forward.soft_label, abs=1e-15)

    def test_soft_label_increases_with_retrieval_error(self):
        labels = [preference_from_distances(d, 50.0).soft_label for d in (1, 10, 49, 51, 500)]
        assert labels == sorted(labels)
        assert len(set(labels)) == len(labels)

    def test_steep_alpha_approaches_hard_label(self):
        for d_ret, d_gen in [(10.0, 9.0), (9.0, 10.0), (1.0, 1000.0), (800.0, 3.0)]:
            target = preference_from_distances(d_ret, d_gen, alpha=100.0)
            assert abs(target.delta) >= 0.1
            assert abs(target.soft_label - (1.0 if target.delta > 0 else 0.0)) < 1e-3

    @pytest.mark.parametrize("epsilon, alpha", [(0.0, 1.6), (-1e-6, 1.6), (1e-6, 0.0)])
    def test_rejects_non_positive_constants(self, epsilon, alpha):
        with pytest.raises(ValidationError):
            preference_from_distances(1.0, 2.0, epsilon, alpha)

    def test_unlabeled_record(self):
        with pytest.raises(DataError, match="unlabeled record 'q1'"):
            build_targets(make_record(gt=None))

    def test_targets_follow_the_geometry(self):
        target = build_targets(record_at_distances("a", 5.0, 2.0))
        assert target.d_retrieval == pytest.approx(5.0, abs=1e-6)
        assert target.d_generation == pytest.approx(2.0, abs=1e-6)
        assert target.hard_label == 1

    def test_label_records_keeps_order(self):
        records = [record_at_distances(f"r{i}", 1.0 + i, 2.5) for i in range(4)]
        instances = label_records(records)
        assert [inst.record.id for inst in instances] == ["r0", "r1", "r2", "r3"]
        assert [inst.target.hard_label for inst in instances] == [0, 0, 1, 1]


class TestBuildDataset:
    def test_valid_entries_keep_input_order(self):
        entries = [
            raw_entry("b", (0, 0), (0, 1), (0, 0.5)),
            raw_entry("a", (0, 0), (0, 0.1), (0, 2)),
            raw_entry("c", (0, 0), (0, 3), (0, 0.2)),
        ]
        instances, summary = build_dataset(entries)
        assert [inst.record.id for inst in instances] == ["b", "a", "c"]
        assert (summary.total, summary.kept, summary.skipped) == (3, 3, 0)
        assert summary.positives == 2
        assert summary.label_balance == pytest.approx(2 / 3)

    def test_generation_exact_gives_full_balance(self):
        entries = [raw_entry(f"r{i}", (i, i), (i + 1, i), (i, i)) for i in range(5)]
        instances, summary = build_dataset(entries)
        assert summary.label_balance == 1.0
        assert all(inst.target.d_generation == 0.0 for inst in instances)

    def test_invalid_coordinate_is_skipped_with_reason(self):
        entries = [
            raw_entry("good", (0, 0), (0, 1), (0, 2)),
            raw_entry("bad", (0, 0), (0, 1), (10, 200)),
        ]
        instances, summary = build_dataset(entries)
        assert len(instances) == 1
        assert summary.skipped == 1
        assert "line 2" in summary.diagnostics[0]
        assert "pred_gen.lon" in summary.diagnostics[0]

    def test_missing_ground_truth_is_skipped(self):
        entry = raw_entry("nogt", (0, 0), (0, 1), (0, 2))
        del entry["gt"]
        _, summary = build_dataset([entry, raw_entry("ok", (0, 0), (0, 1), (0, 2))])
        assert summary.skipped == 1
        assert "gt" in summary.diagnostics[0]

    def test_retrieval_prediction_must_match_top_candidate(self):
        entry = raw_entry("x", (0, 0), (0, 1), (0, 2))
        entry["candidates"] = [{"gps": [5.0, 5.0]}]
        _, summary = build_dataset([entry, raw_entry("ok", (0, 0), (0, 1), (0, 2))])
        assert summary.skipped == 1
        assert "top-1" in summary.diagnostics[0]

    @pytest.mark.parametrize("similarity", ["high", True, [0.5]])
    def test_non_numeric_similarity_is_skipped(self, similarity):
        entry = raw_entry("x", (0, 0), (0, 1), (0, 2))
        entry["candidates"] = [{"gps": [0.0, 1.0], "similarity": similarity}]
        instances, summary = build_dataset([raw_entry("ok", (0, 0), (0, 1), (0, 2)), entry])
        assert [inst.record.id for inst in instances] == ["ok"]
        assert summary.skipped == 1
        assert "candidate.similarity" in summary.diagnostics[0]

    def test_retrieval_prediction_defaults_to_top_candidate(self):
        entry = raw_entry("x", (0, 0), (0, 1), (0, 2))
        del entry["pred_ret"]
        instances, _ = build_dataset([entry])
        assert instances[0].record.pred_retrieval.to_pair() == [0.0, 1.0]

    def test_malformed_raw_entry_counts_as_skipped(self):
        entries = [
            RawEntry(1, error="malformed JSON: Expecting value"),
            RawEntry(2, data=raw_entry("a", (0, 0), (0, 1), (0, 2))),
        ]
        instances, summary = build_dataset(entries)
        assert len(instances) == 1
        assert summary.skipped == 1
        assert summary.diagnostics[0].startswith("line 1: skipped")

    def test_duplicate_id_is_fatal(self):
        entries = [raw_entry("dup", (0, 0), (0, 1), (0, 2))] * 2
        with pytest.raises(DataError, match="'dup'"):
            build_dataset(entries)

    def test_no_valid_entries(self):
        with pytest.raises(DataError, match="no valid entries"):
            build_dataset([{"id": "x"}])

    def test_targets_carry_the_configured_alpha(self):
        entries = [raw_entry("a", (0, 0), (0, 1), (0, 0.5))]
        soft, _ = build_dataset(entries, alpha=1.6)
        steep, _ = build_dataset(entries, alpha=20.0)
        assert steep[0].target.soft_label > soft[0].target.soft_label
        assert steep[0].target.delta == soft[0].target.delta
