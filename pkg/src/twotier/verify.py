"""Statistical pass/fail checks of the limit results at desk scale.

Each check returns :class:`CheckReport` objects.  Tolerances for Monte Carlo
quantities are split into a fixed allowance for finite-m (or finite-t)
model error and a multiple of the binomial standard error; both parts are
reported.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from . import streams
from .allocation import power_law_weights
from .game import WeightedVotingGame, as_fraction, shapley_dp, shapley_exact
from .pivot import essential_interval_hit_rate, estimate_pivot_probabilities, l1_from_probabilities, pivot_counts
from .population import (
    ConstituencyPartition,
    DistributionSpec,
    ModelError,
    PreferenceModel,
    asymptotic_median_variance,
    density_at,
    median_density_at_M,
    sample_constituency_median,
    theoretical_median,
)

KINDS = ("two_sided", "upper", "lower", "below")


@dataclass
class CheckReport:
    """Outcome of one check.

    ``kind`` fixes the pass rule: ``two_sided`` |obs - exp| <= tol,
    ``upper`` obs <= exp + tol, ``lower`` obs >= exp - tol, ``below``
    obs < exp.
    """

    name: str
    observed: float
    expected: float
    tolerance: float = 0.0
    kind: str = "two_sided"
    model_tolerance: float = 0.0
    stderr: float = 0.0
    replications: int = 0
    seed: int | None = None
    hard: bool = True
    config: dict = field(default_factory=dict)
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown check kind {self.kind!r}")
        obs, exp, tol = self.observed, self.expected, self.tolerance
        if self.kind == "two_sided":
            ok = abs(obs - exp) <= tol
        elif self.kind == "upper":
            ok = obs <= exp + tol
        elif self.kind == "lower":
            ok = obs >= exp - tol
        else:
            ok = obs < exp
        self.passed = bool(ok)

    def line(self) -> str:
        status = "PASS" if self.passed else ("FAIL" if self.hard else "info")
        return (
            f"[{status}] {self.name}: observed={self.observed:.6g} expected={self.expected:.6g} "
            f"tol={self.tolerance:.3g} ({self.kind}; model={self.model_tolerance:.3g}, se={self.stderr:.3g})"
        )


CSV_FIELDS = ["name", "observed", "expected", "tolerance", "kind", "model_tolerance", "stderr", "replications", "seed", "hard", "passed", "config"]


def reports_to_csv(reports: Iterable[CheckReport]) -> str:
    rows = [",".join(CSV_FIELDS)]
    for r in reports:
        d = asdict(r)
        d["config"] = json.dumps(d["config"], sort_keys=True)
        cells = []
        for key in CSV_FIELDS:
            v = d[key]
            cell = repr(v) if isinstance(v, float) else str(v)
            if any(ch in cell for ch in ',"\n'):
                cell = '"' + cell.replace('"', '""') + '"'
            cells.append(cell)
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def summary(reports: Sequence[CheckReport]) -> str:
    lines = [r.line() for r in reports]
    hard_fail = sum(1 for r in reports if r.hard and not r.passed)
    lines.append(f"{len(reports)} checks, {hard_fail} hard failure(s)")
    return "\n".join(lines)


def any_hard_failure(reports: Iterable[CheckReport]) -> bool:
    return any(r.hard and not r.passed for r in reports)


def _type_counts(shares: Sequence[float], m: int) -> list[int]:
    """Split m representatives over types by largest remainder."""
    raw = [s * m for s in shares]
    counts = [int(math.floor(x)) for x in raw]
    order = sorted(range(len(raw)), key=lambda k: (counts[k] - raw[k], k))
    for k in order[: m - sum(counts)]:
        counts[k] += 1
    return counts


def check_type_ratio_limit(
    type_specs: Sequence[tuple[float, int, float]],
    m_grid: Sequence[int],
    replications: int,
    seed: int,
    *,
    g: DistributionSpec = DistributionSpec.uniform(0.0, 1.0),
    quota_fraction=0.5,
    model_tolerance: float = 0.1,
    threads: int = 1,
) -> list[CheckReport]:
    """Pivot-probability ratios of representative types against their many-member limit.

    ``type_specs`` lists (weight, constituency size, share of seats).  The
    limit of pi_a / pi_b is w_a f_a(M) / (w_b f_b(M)) with f from the normal
    approximation of the sample median.  ``model_tolerance`` is relative to
    the limit.  Only the largest m is a hard check, together with the
    requirement that its error does not exceed the smallest m's error by
    more than two standard errors.
    """
    if as_fraction(quota_fraction) != as_fraction(0.5):
        raise ValueError("the ratio limit holds for simple majority (quota 0.5) only")
    model = PreferenceModel(g)
    gm = density_at(g, theoretical_median(g))
    dens = [median_density_at_M(gm, n) for _, n, _ in type_specs]
    shares = [s for _, _, s in type_specs]
    errors: dict[tuple, list] = {}
    reports = []
    grid = sorted(m_grid)
    for mi, m in enumerate(grid):
        counts = _type_counts(shares, m)
        if min(counts) < 1:
            raise ValueError(f"m={m} leaves a type without representatives")
        weights, sizes, labels = [], [], []
        for k, ((w, n, _), c) in enumerate(zip(type_specs, counts)):
            weights += [w] * c
            sizes += [n] * c
            labels += [k] * c
        labels = np.array(labels)
        est = estimate_pivot_probabilities(
            WeightedVotingGame(quota_fraction, weights), model, ConstituencyPartition(sizes),
            replications, streams.derive_seed(seed, m), threads=threads,
        )
        p_type = np.array([est.probabilities[labels == k].sum() for k in range(len(type_specs))])
        se_type = np.sqrt(p_type * (1 - p_type) / replications)
        for a, b in itertools.combinations(range(len(type_specs)), 2):
            if p_type[b] == 0 or type_specs[b][0] == 0:
                continue
            ratio = (p_type[a] / counts[a]) / (p_type[b] / counts[b])
            limit = (type_specs[a][0] * dens[a]) / (type_specs[b][0] * dens[b])
            rel = math.hypot(se_type[a] / p_type[a], se_type[b] / p_type[b]) if p_type[a] > 0 else math.inf
            se = ratio * rel
            allowance = model_tolerance * limit
            errors.setdefault((a, b), []).append((m, abs(ratio - limit), se))
            reports.append(CheckReport(
                name=f"type ratio {a}/{b} m={m}",
                observed=float(ratio), expected=float(limit),
                tolerance=allowance + 3 * se, model_tolerance=allowance, stderr=float(se),
                replications=replications, seed=seed, hard=(mi == len(grid) - 1),
                config={"types": [list(t) for t in type_specs], "m": m, "g": str(g)},
            ))
    if len(grid) > 1:
        for (a, b), errs in errors.items():
            (m0, e0, s0), (m1, e1, s1) = errs[0], errs[-1]
            se = math.hypot(s0, s1)
            reports.append(CheckReport(
                name=f"type ratio error trend types {a}/{b} m={m0}->{m1}",
                observed=e1, expected=e0, tolerance=2 * se, kind="upper", stderr=se,
                replications=replications, seed=seed,
                config={"types": [list(t) for t in type_specs], "m_grid": list(grid)},
            ))
    return reports


def check_shapley_limit(
    m: int,
    quota_fraction,
    weights: Sequence[float],
    sizes: Sequence[int],
    t_grid: Sequence[float],
    replications: int,
    seed: int,
    *,
    g: DistributionSpec = DistributionSpec.uniform(-0.5, 0.5),
    h: DistributionSpec = DistributionSpec.normal(0.0, 1.0),
    model_tolerance: float = 0.01,
    threads: int = 1,
) -> list[CheckReport]:
    """Distance of pivot probabilities from the Shapley value as shocks are scaled up.

    All shock scales share the seed, so the draws only differ by the
    scaling.
    """
    if h.is_degenerate:
        raise ModelError("scaling shocks needs a non-degenerate shock distribution")
    if len(weights) != m or len(sizes) != m:
        raise ValueError("weights and sizes must both have m entries")
    game = WeightedVotingGame(quota_fraction, weights)
    phi = (shapley_dp(game) if game.integral else shapley_exact(game)).values
    partition = ConstituencyPartition(sizes)
    ts = sorted(float(t) for t in t_grid)
    reports, errs = [], []
    for k, t in enumerate(ts):
        est = estimate_pivot_probabilities(game, PreferenceModel(g, h, t), partition, replications, seed, threads=threads)
        err = float(np.max(np.abs(est.probabilities - phi)))
        se = float(np.max(est.std_errors))
        errs.append((err, se))
        reports.append(CheckReport(
            name=f"shapley limit max|pi-phi| t={t:g}",
            observed=err, expected=0.0, tolerance=model_tolerance + 3 * se, kind="upper",
            model_tolerance=model_tolerance, stderr=se, replications=replications, seed=seed,
            hard=(k == len(ts) - 1),
            config={"m": m, "q": float(as_fraction(quota_fraction)), "weights": list(weights), "sizes": list(sizes), "t": t, "g": str(g), "h": str(h)},
        ))
    if len(ts) > 1:
        (e0, s0), (e1, s1) = errs[0], errs[-1]
        se = math.hypot(s0, s1)
        reports.append(CheckReport(
            name=f"shapley limit error trend t={ts[0]:g}->{ts[-1]:g}",
            observed=e1, expected=e0, tolerance=2 * se, kind="upper", stderr=se,
            replications=replications, seed=seed, config={"t_grid": ts},
        ))
    return reports


def sample_medians(g: DistributionSpec, n: int, replications: int, seed: int, method: str = "exact") -> np.ndarray:
    """Replicated sample medians, drawn block by block from seeded streams."""
    parts = [
        sample_constituency_median(g, n, streams.stream(seed, b, 0), size, method)
        for b, size in streams.blocks(replications)
    ]
    return np.concatenate(parts)


def check_median_normality(g: DistributionSpec, n: int, replications: int, seed: int, *, significance: float = 0.01, method: str = "exact") -> CheckReport:
    """KS test of the rescaled sample median 2 g(M) sqrt(n) (Y - M) against N(0, 1)."""
    centre = theoretical_median(g)
    gm = density_at(g, centre)
    y = sample_medians(g, n, replications, seed, method)
    z = 2 * gm * math.sqrt(n) * (y - centre)
    res = stats.kstest(z, "norm")
    return CheckReport(
        name=f"median KS normality n={n} {g}",
        observed=float(res.pvalue), expected=significance, kind="lower",
        replications=replications, seed=seed,
        config={"g": str(g), "n": n, "ks_statistic": float(res.statistic), "method": method},
    )


def check_median_variance(g: DistributionSpec, n: int, replications: int, seed: int, *, rel_tolerance: float = 0.02, method: str = "exact") -> CheckReport:
    """Relative gap between the empirical median variance and 1 / (n (2 g(M))^2)."""
    centre = theoretical_median(g)
    y = sample_medians(g, n, replications, seed, method)
    predicted = asymptotic_median_variance(density_at(g, centre), n)
    emp = float(np.var(y, ddof=1))
    config = {"g": str(g), "n": n, "empirical": emp, "predicted": predicted, "method": method}
    if g.family == "uniform":
        k = (n + 1) / 2
        a, b = g.params
        config["beta_exact"] = (b - a) ** 2 * k * k / ((2 * k) ** 2 * (2 * k + 1))
    return CheckReport(
        name=f"median variance n={n} {g}",
        observed=abs(emp / predicted - 1), expected=0.0, tolerance=rel_tolerance, kind="upper",
        model_tolerance=rel_tolerance, replications=replications, seed=seed, config=config,
    )


SQRT_RULE_MIN_HARD_M = 10


def check_square_root_rule(
    partition: ConstituencyPartition,
    replications: int,
    seed: int,
    *,
    g: DistributionSpec = DistributionSpec.uniform(-0.5, 0.5),
    tolerance: float = 0.15,
    threads: int = 1,
) -> CheckReport:
    """Largest relative per-capita deviation |pi_i n / n_i - 1| under sqrt(n) weights.

    Small assemblies are reported without failing: few weighted games exist
    for small m, so exact equalisation is usually out of reach.
    """
    game = WeightedVotingGame(0.5, power_law_weights(partition, 0.5))
    est = estimate_pivot_probabilities(game, PreferenceModel(g), partition, replications, seed, threads=threads)
    n = partition.array()
    dev = np.abs(est.probabilities * partition.total / n - 1)
    worst = int(np.argmax(dev))
    se = float(est.std_errors[worst] * partition.total / n[worst])
    return CheckReport(
        name=f"square root rule per-capita deviation m={partition.m}",
        observed=float(dev[worst]), expected=0.0, tolerance=tolerance, kind="upper",
        model_tolerance=tolerance, stderr=se, replications=replications, seed=seed,
        hard=partition.m >= SQRT_RULE_MIN_HARD_M,
        config={"sizes": list(partition.sizes), "g": str(g), "worst_constituency": worst + 1},
    )


def check_square_root_dominance(
    partition: ConstituencyPartition,
    replications: int,
    seed: int,
    *,
    g: DistributionSpec = DistributionSpec.uniform(-0.5, 0.5),
    alphas: Sequence[float] = (0.0, 1.0),
    threads: int = 1,
) -> CheckReport:
    """L1 influence gap of sqrt(n) weights must be strictly below the other exponents' (same draws)."""
    grid = [0.5, *alphas]
    games = [WeightedVotingGame(0.5, power_law_weights(partition, a)) for a in grid]
    counts = pivot_counts(games, PreferenceModel(g), partition, replications, seed, threads=threads)
    l1 = [l1_from_probabilities(c / replications, partition.array()) for c in counts]
    return CheckReport(
        name=f"square root rule L1 below alpha in {list(alphas)}",
        observed=l1[0], expected=min(l1[1:]), kind="below", replications=replications, seed=seed,
        config={"l1": dict(zip(map(str, grid), l1)), "sizes": list(partition.sizes)},
    )


def check_essential_interval(
    m_grid: Sequence[int],
    replications: int,
    seed: int,
    *,
    size: int = 1,
    g: DistributionSpec = DistributionSpec.uniform(-0.5, 0.5),
    final_rate: float = 0.99,
    threads: int = 1,
) -> list[CheckReport]:
    """Share of collective decisions within m^(-3/8) of the common median, for growing m."""
    model = PreferenceModel(g)
    grid = sorted(m_grid)
    rates = []
    for m in grid:
        game = WeightedVotingGame(0.5, [1] * m)
        rates.append(essential_interval_hit_rate(game, model, ConstituencyPartition([size] * m), replications, seed, threads=threads))
    reports = []
    for (m0, r0), (m1, r1) in zip(zip(grid, rates), zip(grid[1:], rates[1:])):
        se = math.hypot(math.sqrt(r0 * (1 - r0) / replications), math.sqrt(r1 * (1 - r1) / replications))
        reports.append(CheckReport(
            name=f"essential interval hit rate m={m0}->{m1}",
            observed=r1, expected=r0, tolerance=2 * se, kind="lower", stderr=se,
            replications=replications, seed=seed, config={"size": size, "g": str(g), "rates": rates},
        ))
    r = rates[-1]
    reports.append(CheckReport(
        name=f"essential interval hit rate m={grid[-1]}",
        observed=r, expected=final_rate, kind="lower",
        stderr=math.sqrt(r * (1 - r) / replications), replications=replications, seed=seed,
        config={"size": size, "g": str(g), "m_grid": grid},
    ))
    return reports


def shapley_vectors(m: int, max_weight: int, quota_fraction=0.5, *, min_weight: int = 1) -> set[tuple]:
    """All Shapley values (sorted descending, rounded to 12 places) over integer weights in [min_weight, max_weight].

    Zero weights add the games of fewer players padded with null players.
    """
    out = set()
    for w in itertools.combinations_with_replacement(range(max_weight, min_weight - 1, -1), m):
        if not any(w):
            continue
        phi = shapley_dp(WeightedVotingGame(quota_fraction, w)).values
        out.add(tuple(float(x) for x in sorted(np.round(phi, 12), reverse=True)))
    return out


SHOCK_CHECK_WEIGHTS = (5, 4, 3, 3, 2, 2, 2, 1, 1)
SHOCK_CHECK_SIZES = (3, 5, 7, 9, 11, 13, 15, 17, 19)


def default_suite(
    replications: int = 200_000,
    seed: int = 20240101,
    *,
    threads: int = 1,
    eu27: ConstituencyPartition | None = None,
    tolerance_scale: float = 1.0,
) -> list[CheckReport]:
    """Desk-scale run of every check with the stock fixtures."""
    from .data import eu27_partition

    reps = int(replications)
    out: list[CheckReport] = []
    out.append(check_median_normality(DistributionSpec.uniform(0, 1), 1001, min(reps, 100_000), streams.derive_seed(seed, 1)))
    out.append(check_median_normality(DistributionSpec.normal(0, 1), 1001, min(reps, 100_000), streams.derive_seed(seed, 2)))
    out.append(check_median_variance(DistributionSpec.uniform(0, 1), 1001, min(reps, 100_000), streams.derive_seed(seed, 1)))
    out += check_type_ratio_limit([(2, 405, 0.5), (1, 101, 0.5)], [20, 100], reps, streams.derive_seed(seed, 3), threads=threads)
    out += check_shapley_limit(9, 0.6, SHOCK_CHECK_WEIGHTS, SHOCK_CHECK_SIZES, [0, 1, 10, 100, 1000], reps, streams.derive_seed(seed, 4), threads=threads)
    part = eu27 if eu27 is not None else eu27_partition()
    out.append(check_square_root_rule(part, reps, streams.derive_seed(seed, 5), threads=threads))
    out.append(check_square_root_dominance(part, reps, streams.derive_seed(seed, 5), threads=threads))
    out += check_essential_interval([11, 101, 1001], min(reps, 100_000), streams.derive_seed(seed, 6), threads=threads)
    if tolerance_scale != 1.0:
        out = [_rescale(r, tolerance_scale) for r in out]
    return out


def _rescale(report: CheckReport, factor: float) -> CheckReport:
    d = {k: v for k, v in asdict(report).items() if k != "passed"}
    d["tolerance"] = report.tolerance * factor
    d["model_tolerance"] = report.model_tolerance * factor
    return CheckReport(**d)
