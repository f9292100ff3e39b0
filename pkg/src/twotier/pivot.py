"""Monte Carlo estimates of top-tier pivot probabilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import streams
from .game import GameError, WeightedVotingGame, pivot_positions
from .population import ConstituencyPartition, ModelError, PreferenceModel, sample_lambda_block


@dataclass(frozen=True)
class PivotEstimate:
    counts: np.ndarray = field(repr=False)
    replications: int
    seed: int
    weights: tuple
    sizes: tuple
    quota_fraction: float
    model: dict = field(default_factory=dict)
    direction: str = "left"

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.sum() != self.replications:
            raise ValueError("pivot counts must add up to the number of replications")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.replications

    @property
    def std_errors(self) -> np.ndarray:
        p = self.probabilities
        return np.sqrt(p * (1 - p) / self.replications)

    def to_csv(self) -> str:
        p = self.probabilities
        se = self.std_errors
        rows = ["constituency,size,weight,pivot_prob,std_err,per_capita"]
        for i, (n, w) in enumerate(zip(self.sizes, self.weights)):
            rows.append(f"{i + 1},{n},{w!r},{float(p[i])!r},{float(se[i])!r},{float(p[i] / n)!r}")
        return "\n".join(rows) + "\n"

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "replications": self.replications,
            "quota_fraction": self.quota_fraction,
            "direction": self.direction,
            "model": self.model,
            "sizes": list(self.sizes),
            "weights": list(self.weights),
        }


@dataclass(frozen=True)
class InfluenceProfile:
    per_capita: np.ndarray = field(repr=False)
    l1_distance: float


def _check_dims(games: Sequence[WeightedVotingGame], partition: ConstituencyPartition):
    for game in games:
        if game.m != partition.m:
            raise GameError(f"game has {game.m} weights but the partition has {partition.m} constituencies")


def _ordering(lam: np.ndarray, direction: str) -> np.ndarray:
    if direction == "left":
        return np.argsort(lam, axis=1, kind="stable")
    if direction == "right":
        return np.argsort(-lam, axis=1, kind="stable")
    raise ValueError("direction must be 'left' or 'right'")


def pivot_counts(
    games: Sequence[WeightedVotingGame],
    model: PreferenceModel,
    partition: ConstituencyPartition,
    replications: int,
    seed: int,
    *,
    threads: int = 1,
    method: str = "auto",
    direction: str = "left",
) -> np.ndarray:
    """Pivot counts of several games evaluated on the same ideal-point draws.

    Returns an integer array of shape (len(games), m).
    """
    _check_dims(games, partition)
    m = partition.m
    weight_rows = [g.integer_weights() if g.integral else g.weight_array() for g in games]

    def block(b: int, size: int) -> np.ndarray:
        lam = sample_lambda_block(model, partition, seed, b, size, method)
        order = _ordering(lam, direction)
        rows = np.arange(size)
        out = np.zeros((len(games), m), dtype=np.int64)
        for k, (game, w) in enumerate(zip(games, weight_rows)):
            piv = order[rows, pivot_positions(w[order], game)]
            out[k] = np.bincount(piv, minlength=m)
        return out

    return streams.run_blocks(block, replications, threads)


def estimate_pivot_probabilities(
    game: WeightedVotingGame,
    model: PreferenceModel,
    partition: ConstituencyPartition,
    replications: int,
    seed: int,
    *,
    threads: int = 1,
    method: str = "auto",
    direction: str = "left",
) -> PivotEstimate:
    counts = pivot_counts([game], model, partition, replications, seed, threads=threads, method=method, direction=direction)
    return PivotEstimate(
        counts=counts[0],
        replications=int(replications),
        seed=int(seed),
        weights=game.weights,
        sizes=partition.sizes,
        quota_fraction=float(game.quota_fraction),
        model=model.describe(),
        direction=direction,
    )


def influence_profile(estimate: PivotEstimate, partition: ConstituencyPartition, population_total: int | None = None) -> InfluenceProfile:
    """Per-capita pivot probabilities and their L1 distance from the egalitarian ideal.

    The distance is taken over individuals, i.e. ``sum_i n_i |pi_i/n_i - 1/n|``.
    """
    if tuple(estimate.sizes) != partition.sizes:
        raise ValueError("estimate and partition describe different constituencies")
    n = partition.array()
    total = partition.total if population_total is None else population_total
    per_capita = estimate.probabilities / n
    l1 = float(np.sum(n * np.abs(per_capita - 1.0 / total)))
    return InfluenceProfile(per_capita, l1)


def l1_from_probabilities(probabilities: np.ndarray, sizes: np.ndarray) -> float:
    sizes = np.asarray(sizes, dtype=float)
    return float(np.abs(np.asarray(probabilities) - sizes / sizes.sum()).sum())


def essential_interval_hit_rate(
    game: WeightedVotingGame,
    model: PreferenceModel,
    partition: ConstituencyPartition,
    replications: int,
    seed: int,
    *,
    threads: int = 1,
    method: str = "auto",
) -> float:
    """Share of replications whose collective decision lies within m^(-3/8) of the common median."""
    if not model.iid:
        raise ModelError("the essential-interval check needs the i.i.d. model (no constituency shocks)")
    _check_dims([game], partition)
    half_width = partition.m ** (-3.0 / 8.0)
    centre = model.common_median
    w = game.integer_weights() if game.integral else game.weight_array()

    def block(b: int, size: int) -> np.ndarray:
        lam = sample_lambda_block(model, partition, seed, b, size, method)
        order = _ordering(lam, "left")
        rows = np.arange(size)
        piv = order[rows, pivot_positions(w[order], game)]
        outcome = lam[rows, piv]
        return np.array([np.count_nonzero(np.abs(outcome - centre) <= half_width)], dtype=np.int64)

    hits = streams.run_blocks(block, replications, threads)
    return int(hits[0]) / int(replications)
