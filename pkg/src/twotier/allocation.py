"""Weight allocation rules and the search for the best power-law exponent."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import streams
from .game import GameError, PowerIndexVector, WeightedVotingGame, shapley_dp
from .pivot import PivotEstimate, influence_profile, pivot_counts
from .population import ConstituencyPartition, PreferenceModel, representative_density_at_M

RULE_KINDS = ("direct_power_law", "shapley_based_power_law", "density_rule")
DEFAULT_RESOLUTION = 10_000


@dataclass(frozen=True)
class AllocationRuleSpec:
    kind: str
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}; expected one of {RULE_KINDS}")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")


def _sizes(partition) -> np.ndarray:
    if isinstance(partition, ConstituencyPartition):
        return partition.array()
    return np.asarray(partition, dtype=float)


def power_law_weights(partition, alpha: float) -> np.ndarray:
    """Weights proportional to n_i ** alpha, normalised to sum to one."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    n = _sizes(partition)
    if alpha == 0:
        return np.full(len(n), 1.0 / len(n))
    w = n**alpha
    return w / w.sum()


def density_rule_weights(partition: ConstituencyPartition, model: PreferenceModel) -> np.ndarray:
    """Weights proportional to n_i / f_i(M)."""
    n = partition.array()
    dens = np.array([representative_density_at_M(model, int(k)) for k in partition.sizes])
    if np.any(dens <= 0):
        raise ValueError("representative density at the median vanishes")
    w = n / dens
    return w / w.sum()


def integer_weights(weights: Sequence[float], resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """Rescale to sum ``resolution`` and round to integers (largest entry kept positive)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.any(w > 0):
        raise GameError("weights must be nonnegative with at least one positive entry")
    iw = np.rint(w / w.sum() * resolution).astype(np.int64)
    if not iw.any():
        iw[int(np.argmax(w))] = 1
    return iw


@dataclass(frozen=True)
class InverseShapleyResult:
    weights: np.ndarray = field(repr=False)
    achieved: PowerIndexVector = field(repr=False)
    residual: float
    iterations: int
    converged: bool
    resolution: int
    history: tuple = field(default=(), repr=False)

    def game(self, quota_fraction) -> WeightedVotingGame:
        return WeightedVotingGame(quota_fraction, self.weights)


def _fixed_point(t, w, quota_fraction, iters, damping, patience, resolution, tolerance, best, history):
    """Run the multiplicative update; ``patience`` > 0 halves the damping after that many stalled steps."""
    stalled = 0
    for _ in range(iters):
        iw = integer_weights(w, resolution)
        phi = shapley_dp(WeightedVotingGame(quota_fraction, iw))
        residual = float(np.max(np.abs(phi.values - t)))
        if best is None or residual < best[2]:
            best = (iw, phi, residual)
            stalled = 0
        else:
            stalled += 1
        history.append(best[2])
        if residual < tolerance:
            break
        if patience and stalled >= patience:
            damping /= 2
            stalled = 0
        ratio = np.where(t > 0, t / np.maximum(phi.values, 1e-12), 0.0)
        w = w * np.clip(ratio, 1.0 / 16, 16.0) ** damping
        w = w / w.sum()
    return best


def inverse_shapley(
    target: Sequence[float],
    quota_fraction=0.5,
    max_iters: int = 200,
    tolerance: float = 1e-3,
    *,
    resolution: int = DEFAULT_RESOLUTION,
    damping: float = 0.5,
    refine: bool = True,
    patience: int = 8,
) -> InverseShapleyResult:
    """Heuristic search for integer weights whose Shapley value approaches ``target``.

    Multiplicative fixed-point updates ``w <- w * (target / phi(w)) ** damping``
    starting from ``w = target``, with weights rounded to integers summing to
    ``resolution`` before each evaluation.  A fixed damping tends to jump
    back and forth across the weight threshold where the game changes, so
    when ``refine`` is set and the first ``max_iters`` steps miss the
    tolerance, a second run of up to ``max_iters`` steps restarts from the
    best weights and halves the damping whenever ``patience`` steps bring
    no improvement.

    The best weights seen are returned with their exact Shapley value and
    L-infinity residual; ``converged`` only means the residual fell below
    ``tolerance``.  Nothing guarantees the result is the best feasible game.
    """
    t = np.asarray(target, dtype=float)
    if t.ndim != 1 or len(t) < 1:
        raise ValueError("target must be a nonempty vector")
    if np.any(t < 0) or not np.any(t > 0):
        raise ValueError("target must be nonnegative with a positive entry")
    t = t / t.sum()

    history: list[float] = []
    best = _fixed_point(t, t.copy(), quota_fraction, max_iters, damping, 0, resolution, tolerance, None, history)
    if refine and best[2] >= tolerance:
        start = best[0] / best[0].sum()
        best = _fixed_point(t, start, quota_fraction, max_iters, damping / 2, patience, resolution, tolerance, best, history)
    iw, phi, residual = best
    return InverseShapleyResult(
        weights=iw,
        achieved=phi,
        residual=residual,
        iterations=len(history),
        converged=residual < tolerance,
        resolution=resolution,
        history=tuple(history),
    )


def rule_game(
    spec: AllocationRuleSpec,
    partition: ConstituencyPartition,
    quota_fraction=0.5,
    model: PreferenceModel | None = None,
    *,
    resolution: int = DEFAULT_RESOLUTION,
    **inverse_kwargs,
) -> WeightedVotingGame:
    if spec.kind == "direct_power_law":
        return WeightedVotingGame(quota_fraction, power_law_weights(partition, spec.alpha))
    if spec.kind == "density_rule":
        if model is None:
            raise ValueError("the density rule needs a preference model")
        return WeightedVotingGame(quota_fraction, density_rule_weights(partition, model))
    target = power_law_weights(partition, spec.alpha)
    res = inverse_shapley(target, quota_fraction, resolution=resolution, **inverse_kwargs)
    return res.game(quota_fraction)


@dataclass(frozen=True)
class AlphaSearchResult:
    alpha_star: float
    l1_by_alpha: tuple
    rule_kind: str
    model: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        rows = ["alpha,l1,rule_kind"]
        rows += [f"{a!r},{l1!r},{self.rule_kind}" for a, l1 in self.l1_by_alpha]
        return "\n".join(rows) + "\n"


def alpha_grid(start: float = 0.0, stop: float = 2.0, step: float = 0.05) -> np.ndarray:
    count = int(round((stop - start) / step))
    return np.round(start + step * np.arange(count + 1), 10)


def grid_games(
    partition: ConstituencyPartition,
    rule_kind: str,
    grid: Sequence[float],
    quota_fraction=0.5,
    *,
    resolution: int = DEFAULT_RESOLUTION,
) -> list[WeightedVotingGame]:
    """One game per alpha; independent of the preference model."""
    if rule_kind not in ("direct_power_law", "shapley_based_power_law"):
        raise ValueError("alpha search supports the direct and Shapley-based power laws")
    return [
        rule_game(AllocationRuleSpec(rule_kind, float(a)), partition, quota_fraction, resolution=resolution)
        for a in grid
    ]


def optimize_alpha(
    partition: ConstituencyPartition,
    model: PreferenceModel,
    rule_kind: str,
    alpha_grid: Sequence[float],
    quota_fraction=0.5,
    replications: int = 100_000,
    seed: int = 0,
    *,
    threads: int = 1,
    common_random_numbers: bool = True,
    resolution: int = DEFAULT_RESOLUTION,
    games: Sequence[WeightedVotingGame] | None = None,
) -> AlphaSearchResult:
    """Grid search for the power-law exponent minimising the L1 influence gap.

    With ``common_random_numbers`` every alpha is evaluated on the same
    ideal-point draws; otherwise alpha number k uses the child seed
    ``derive_seed(seed, k)``.
    """
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise ValueError("alpha grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("alpha grid must be sorted")
    if games is None:
        games = grid_games(partition, rule_kind, grid, quota_fraction, resolution=resolution)
    if common_random_numbers:
        counts = pivot_counts(games, model, partition, replications, seed, threads=threads)
    else:
        counts = np.stack([
            pivot_counts([g], model, partition, replications, streams.derive_seed(seed, k), threads=threads)[0]
            for k, g in enumerate(games)
        ])
    table = []
    for a, game, c in zip(grid, games, counts):
        est = PivotEstimate(c, int(replications), int(seed), game.weights, partition.sizes, float(game.quota_fraction))
        table.append((a, influence_profile(est, partition).l1_distance))
    best = min(l1 for _, l1 in table)
    alpha_star = next(a for a, l1 in table if l1 == best)
    return AlphaSearchResult(
        alpha_star=alpha_star,
        l1_by_alpha=tuple(table),
        rule_kind=rule_kind,
        model=model.describe(),
        metadata={
            "seed": int(seed),
            "replications": int(replications),
            "quota_fraction": float(quota_fraction),
            "resolution": resolution if rule_kind == "shapley_based_power_law" else None,
            "common_random_numbers": common_random_numbers,
        },
    )


def heterogeneity_sweep(
    partition: ConstituencyPartition,
    g,
    ratios: Sequence[float],
    rule_kind: str,
    alpha_grid: Sequence[float],
    quota_fraction=0.5,
    replications: int = 100_000,
    seed: int = 0,
    *,
    threads: int = 1,
    resolution: int = DEFAULT_RESOLUTION,
) -> list[tuple[float, AlphaSearchResult]]:
    """Best alpha as a function of the polarisation ratio var(H) / var(G).

    Shocks are normal with variance ``ratio * var(G)`` and unit scale.
    """
    from .population import DistributionSpec

    games = grid_games(partition, rule_kind, alpha_grid, quota_fraction, resolution=resolution)
    out = []
    for k, ratio in enumerate(ratios):
        h = DistributionSpec.normal(0.0, ratio * g.variance) if ratio > 0 else DistributionSpec.degenerate(0.0)
        model = PreferenceModel(g, h, 1.0)
        res = optimize_alpha(
            partition, model, rule_kind, alpha_grid, quota_fraction, replications,
            streams.derive_seed(seed, k), threads=threads, resolution=resolution, games=games,
        )
        out.append((float(ratio), res))
    return out
