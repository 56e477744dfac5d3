"""Seeded synthetic routing datasets with a planted routing signal."""

import math
from dataclasses import dataclass

import numpy as np

from ..utils.errors import ValidationError
from ..utils.geo import HALF_CIRCUMFERENCE_KM, GeoCoordinate, destination_point
from .records import Candidate, RoutingRecord


@dataclass(frozen=True)
class SynthConfig:
    """
    Settings of the synthetic generator.

    A latent z in {-1, +1} picks the paradigm expected to be better
    (+1 generation, -1 retrieval); with probability (1 + signal_strength) / 2
    that paradigm draws its error at its own scale while the other draws at
    ``mismatch_factor`` times its scale. Embedding dimension 0 carries z.
    """

    n: int = 1000
    seed: int = 0
    dim: int = 8
    signal_strength: float = 0.9
    retrieval_error_scale: float = 5.0
    generation_error_scale: float = 20.0
    mismatch_factor: float = 30.0
    error_sigma: float = 1.0
    num_candidates: int = 10
    candidate_spread_km: float = 50.0
    near_tie_fraction: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n", "must be at least 1")
        if self.dim < 1:
            raise ValidationError("dim", "must be at least 1")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValidationError("signal_strength", "must lie in [0, 1]")
        for name in (
            "retrieval_error_scale",
            "generation_error_scale",
            "candidate_spread_km",
        ):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "must be positive")
        if self.mismatch_factor < 1:
            raise ValidationError("mismatch_factor", "must be at least 1")
        if self.error_sigma < 0:
            raise ValidationError("error_sigma", "must be non-negative")
        if self.num_candidates < 0:
            raise ValidationError("num_candidates", "must be non-negative")
        if not 0.0 <= self.near_tie_fraction <= 1.0:
            raise ValidationError("near_tie_fraction", "must lie in [0, 1]")


def _cap(distance_km):
    # keep the point strictly short of the antipode
    return min(distance_km, HALF_CIRCUMFERENCE_KM * 0.999)


def synthesize(config, verbose=False):
    """
    Generate ``config.n`` labeled records, deterministic for a given seed.

    Returns:
        list: RoutingRecord objects carrying ground truth and an embedding
    """
    rng = np.random.default_rng(config.seed)
    n, k = config.n, config.num_candidates

    # Area-uniform ground truth
    lat = np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, n)))
    lon = rng.uniform(-180.0, 180.0, n)

    z = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    keep = rng.random(n) < (1.0 + config.signal_strength) / 2.0
    gen_favored = np.where(keep, z > 0, z < 0)

    ret_scale = config.retrieval_error_scale * np.where(
        gen_favored, config.mismatch_factor, 1.0
    )
    gen_scale = config.generation_error_scale * np.where(
        gen_favored, 1.0, config.mismatch_factor
    )
    ret_err = ret_scale * np.exp(config.error_sigma * rng.standard_normal(n))
    gen_err = gen_scale * np.exp(config.error_sigma * rng.standard_normal(n))

    # Near ties: the non-favoured error lands within exp(+-0.2) of the favoured one
    near_tie = rng.random(n) < config.near_tie_fraction
    tie_ratio = np.exp(rng.uniform(-0.19, 0.19, n))
    ret_err = np.where(near_tie & gen_favored, gen_err * tie_ratio, ret_err)
    gen_err = np.where(near_tie & ~gen_favored, ret_err * tie_ratio, gen_err)

    ret_bearing = rng.uniform(0.0, 360.0, n)
    gen_bearing = rng.uniform(0.0, 360.0, n)

    embedding = rng.standard_normal((n, config.dim))
    embedding[:, 0] = z + math.sqrt(1.0 - config.signal_strength) * embedding[:, 0]

    cand_dist = config.candidate_spread_km * np.exp(rng.standard_normal((n, k)))
    cand_bearing = rng.uniform(0.0, 360.0, (n, k))
    similarity = np.sort(rng.uniform(0.0, 1.0, (n, k)), axis=1)[:, ::-1]

    records = []
    width = len(str(n - 1))
    for i in range(n):
        gt = GeoCoordinate(float(lat[i]), float(lon[i]))
        pred_ret = destination_point(gt, float(ret_bearing[i]), _cap(float(ret_err[i])))
        pred_gen = destination_point(gt, float(gen_bearing[i]), _cap(float(gen_err[i])))
        candidates = []
        for j in range(k):
            if j == 0:
                coordinate = pred_ret
            else:
                coordinate = destination_point(
                    pred_ret, float(cand_bearing[i, j]), _cap(float(cand_dist[i, j]))
                )
            candidates.append(Candidate(coordinate, float(similarity[i, j])))
        records.append(
            RoutingRecord(
                id=f"synth-{config.seed}-{i:0{width}d}",
                pred_retrieval=pred_ret,
                pred_generation=pred_gen,
                ground_truth=gt,
                candidates=tuple(candidates),
                embedding=tuple(float(x) for x in embedding[i]),
            )
        )
    if verbose:
        print(f"Synthesized {n} records (seed {config.seed}, dim {config.dim})")
    return records
