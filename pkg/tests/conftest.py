import pytest

from src.dataset.records import Candidate, RoutingRecord
from src.dataset.synth import SynthConfig, synthesize
from src.utils.geo import GeoCoordinate, destination_point


def make_record(
    record_id="q1",
    gt=(0.0, 0.0),
    ret=(0.0, 1.0),
    gen=(1.0, 0.0),
    candidates=None,
    embedding=None,
):
    """Record from plain (lat, lon) tuples; the retrieval prediction heads the candidate list."""
    pred_ret = GeoCoordinate(*ret)
    if candidates is None:
        candidates = [ret]
    return RoutingRecord(
        id=record_id,
        pred_retrieval=pred_ret,
        pred_generation=GeoCoordinate(*gen),
        ground_truth=None if gt is None else GeoCoordinate(*gt),
        candidates=tuple(Candidate(GeoCoordinate(*c)) for c in candidates),
        embedding=embedding,
    )


def record_at_distances(record_id, d_ret, d_gen, gt=(10.0, 20.0), embedding=None):
    """Record whose predictions sit exactly ``d_ret`` and ``d_gen`` km from the ground truth."""
    origin = GeoCoordinate(*gt)
    ret = destination_point(origin, 0.0, d_ret)
    gen = destination_point(origin, 90.0, d_gen)
    return RoutingRecord(
        id=record_id,
        pred_retrieval=ret,
        pred_generation=gen,
        ground_truth=origin,
        candidates=(Candidate(ret),),
        embedding=embedding,
    )


def raw_entry(record_id, gt, ret, gen, **extra):
    entry = {"id": record_id, "gt": list(gt), "pred_ret": list(ret), "pred_gen": list(gen)}
    entry["candidates"] = [{"gps": list(ret), "similarity": 0.9}]
    entry.update(extra)
    return entry


@pytest.fixture
def record_factory():
    return make_record


@pytest.fixture(scope="session")
def synthetic_records():
    """Default synthetic dataset with the planted signal."""
    return synthesize(SynthConfig(n=600, seed=3))


@pytest.fixture(scope="session")
def planted_records():
    """Noise-free planted set: the sign of embedding[0] decides which paradigm wins."""
    return synthesize(
        SynthConfig(n=1500, seed=11, signal_strength=1.0, error_sigma=0.25, num_candidates=3)
    )
