"""Weighted voting games and their power indices.

A game ``[q; w_1, ..., w_m]`` makes a coalition winning when its combined
weight is *strictly* larger than ``q * sum(w)``.  Coalitions whose weight
equals the quota exactly are losing.

Representatives are indexed from 0 throughout the Python API.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

ENUMERATION_CAP = 20
PERMUTATION_CAP = 10
# m * sum(w) cells in the coalition-count table
DP_BUDGET = 50_000_000
# relative slack used when weights are not integral, so that float rounding
# cannot turn an exact tie with the quota into a win
REAL_TIE_EPS = 1e-12


class GameError(ValueError):
    """Invalid game, coalition or precondition."""


class SizeLimitError(GameError):
    pass


def as_fraction(q) -> Fraction:
    """Exact rational for a quota fraction given as float, str or Fraction."""
    if isinstance(q, Fraction):
        return q
    if isinstance(q, str):
        return Fraction(q)
    return Fraction(q).limit_denominator(10**9)


@dataclass(frozen=True)
class WeightedVotingGame:
    quota_fraction: Fraction
    weights: tuple

    def __init__(self, quota_fraction, weights: Iterable[float]):
        q = as_fraction(quota_fraction)
        if not (Fraction(1, 2) <= q < 1):
            raise GameError(f"quota fraction must lie in [0.5, 1), got {float(q)}")
        w = tuple(float(x) for x in weights)
        if not w:
            raise GameError("a game needs at least one representative")
        if any(not math.isfinite(x) or x < 0 for x in w):
            raise GameError("weights must be finite and nonnegative")
        if not any(x > 0 for x in w):
            raise GameError("at least one weight must be strictly positive")
        object.__setattr__(self, "quota_fraction", q)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    @property
    def quota(self) -> float:
        """Absolute quota ``q * sum(w)``."""
        return float(self.quota_fraction) * self.total_weight

    @property
    def integral(self) -> bool:
        return all(x == int(x) for x in self.weights)

    def integer_weights(self) -> np.ndarray:
        if not self.integral:
            raise GameError("weights are not integers; rescale them first")
        return np.array([int(x) for x in self.weights], dtype=np.int64)

    def integer_threshold(self) -> int:
        """Largest losing weight total when weights are integers."""
        total = sum(int(x) for x in self.weights)
        return math.floor(self.quota_fraction * total)

    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def to_text(self) -> str:
        ws = " ".join(_fmt_weight(x) for x in self.weights)
        return f"{_fmt_quota(self.quota_fraction)}\n{ws}\n"

    @classmethod
    def from_text(cls, text: str) -> "WeightedVotingGame":
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if len(lines) < 2:
            raise GameError("game record needs a quota line and a weights line")
        try:
            q = Fraction(lines[0]) if "/" in lines[0] else float(lines[0])
            weights = [float(tok) for ln in lines[1:] for tok in ln.split()]
        except ValueError as exc:
            raise GameError(f"cannot parse game record: {exc}") from None
        return cls(q, weights)


def _fmt_weight(x: float) -> str:
    return str(int(x)) if x == int(x) else repr(x)


def _fmt_quota(q: Fraction) -> str:
    if q.denominator in (1, 2, 4, 5, 8, 10, 20, 25, 50, 100, 1000):
        return repr(float(q))
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Coalition:
    members: frozenset

    def __init__(self, members: Iterable[int]):
        ms = list(members)
        if len(set(ms)) != len(ms):
            raise GameError("coalition members must be distinct")
        object.__setattr__(self, "members", frozenset(int(i) for i in ms))

    def validate(self, m: int) -> None:
        bad = [i for i in self.members if not 0 <= i < m]
        if bad:
            raise GameError(f"coalition index out of range for m={m}: {sorted(bad)}")


@dataclass(frozen=True)
class PowerIndexVector:
    values: np.ndarray = field(repr=False)
    kind: str

    def __post_init__(self):
        if self.kind not in ("shapley", "banzhaf"):
            raise ValueError(f"unknown index kind {self.kind!r}")
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def to_csv(self) -> str:
        rows = ["index,value,kind"]
        rows += [f"{i + 1},{float(v)!r},{self.kind}" for i, v in enumerate(self.values)]
        return "\n".join(rows) + "\n"


def is_winning(game: WeightedVotingGame, coalition) -> bool:
    if not isinstance(coalition, Coalition):
        coalition = Coalition(coalition)
    coalition.validate(game.m)
    if game.integral:
        total = sum(int(game.weights[i]) for i in coalition.members)
        return total > game.integer_threshold()
    total = math.fsum(game.weights[i] for i in coalition.members)
    return total > game.quota + REAL_TIE_EPS * game.total_weight


def _size_coefficients(m: int) -> np.ndarray:
    """|S|!(m-|S|-1)!/m! for |S| = 0..m-1."""
    return np.array([1.0 / (m * math.comb(m - 1, k)) for k in range(m)])


def shapley_exact(game: WeightedVotingGame) -> PowerIndexVector:
    """Shapley-Shubik index by enumerating all coalitions (m <= 20).

    Works for real-valued weights.
    """
    m = game.m
    if m > ENUMERATION_CAP:
        raise SizeLimitError(f"shapley_exact supports m <= {ENUMERATION_CAP}, got {m}")
    masks = np.arange(1 << m, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(np.int8)
    sizes = bits.sum(axis=1)
    if game.integral:
        w = game.integer_weights()
        sums = bits.astype(np.int64) @ w
        limit = game.integer_threshold()
    else:
        w = game.weight_array()
        sums = bits.astype(float) @ w
        limit = game.quota + REAL_TIE_EPS * game.total_weight
    coef = _size_coefficients(m)
    phi = np.zeros(m)
    for i in range(m):
        without = bits[:, i] == 0
        s = sums[without]
        swing = (s <= limit) & (s + w[i] > limit)
        phi[i] = coef[sizes[without][swing]].sum()
    return PowerIndexVector(phi, "shapley")


def _check_dp(game: WeightedVotingGame) -> tuple[np.ndarray, int]:
    if not game.integral:
        raise GameError("generating-function counting needs integer weights")
    w = game.integer_weights()
    if game.m * (int(w.sum()) + 1) > DP_BUDGET:
        raise SizeLimitError("m * sum(weights) exceeds the counting budget")
    if game.m > 62:
        raise SizeLimitError("coalition counts would overflow 64-bit integers")
    return w, game.integer_threshold()


def _count_table(w: np.ndarray, with_size: bool) -> np.ndarray:
    total = int(w.sum())
    if with_size:
        table = np.zeros((len(w) + 1, total + 1), dtype=np.int64)
        table[0, 0] = 1
        for j, wj in enumerate(w):
            # add player j: sizes shift by one, weights by wj
            upper = j + 1
            if wj:
                table[1 : upper + 1, wj:] += table[0:upper, : total + 1 - wj].copy()
            else:
                table[1 : upper + 1] += table[0:upper].copy()
        return table
    table = np.zeros(total + 1, dtype=np.int64)
    table[0] = 1
    for wj in w:
        if wj:
            table[wj:] += table[: total + 1 - wj].copy()
        else:
            table *= 2
    return table


def _swing_window(total: int, threshold: int, wi: int) -> slice:
    lo = max(0, threshold - wi + 1)
    hi = min(threshold, total)
    return slice(lo, hi + 1) if hi >= lo else slice(0, 0)


def shapley_dp(game: WeightedVotingGame) -> PowerIndexVector:
    """Shapley-Shubik index by counting coalitions per (size, weight).

    The full count table is built once; each player's table is obtained by
    removing that player again, which keeps the total cost at
    O(m^2 * sum(w)).
    """
    w, threshold = _check_dp(game)
    m = len(w)
    total = int(w.sum())
    full = _count_table(w, with_size=True)
    coef = _size_coefficients(m)
    phi = np.zeros(m)
    for i, wi in enumerate(w):
        wi = int(wi)
        rest = np.empty((m, total + 1), dtype=np.int64)
        rest[0] = full[0]
        for k in range(1, m):
            rest[k] = full[k]
            if wi:
                rest[k, wi:] -= rest[k - 1, : total + 1 - wi]
            else:
                rest[k] -= rest[k - 1]
        window = _swing_window(total, threshold, wi)
        swings = rest[:, window].sum(axis=1)
        phi[i] = float(np.dot(coef, swings))
    return PowerIndexVector(phi, "shapley")


def banzhaf(game: WeightedVotingGame) -> PowerIndexVector:
    """Raw Penrose-Banzhaf index: swings of i over the 2^(m-1) coalitions of the others."""
    w, threshold = _check_dp(game)
    m = len(w)
    total = int(w.sum())
    full = _count_table(w, with_size=False)
    beta = np.zeros(m)
    for i, wi in enumerate(w):
        wi = int(wi)
        if wi:
            rest = full.copy()
            # rest[s] = full[s] - rest[s - wi], one block of wi entries at a time
            for start in range(wi, total + 1, wi):
                stop = min(start + wi, total + 1)
                rest[start:stop] -= rest[start - wi : stop - wi]
        else:
            rest = full // 2
        window = _swing_window(total, threshold, wi)
        beta[i] = rest[window].sum() / 2.0 ** (m - 1)
    return PowerIndexVector(beta, "banzhaf")


_PERM_CACHE: dict[int, np.ndarray] = {}
_PREFIX_CACHE: dict[int, np.ndarray] = {}
# largest 2^m * m! for which the prefix incidence matrix is built
_PREFIX_BUDGET = 1 << 24


def _permutations(m: int) -> np.ndarray:
    if m not in _PERM_CACHE:
        _PERM_CACHE[m] = np.array(list(itertools.permutations(range(m))), dtype=np.int8)
    return _PERM_CACHE[m]


def _prefix_incidence(m: int) -> np.ndarray:
    """(2^m, m!) matrix marking which coalitions are proper prefixes of each ordering."""
    if m not in _PREFIX_CACHE:
        perms = _permutations(m).astype(np.int64)
        masks = np.cumsum(1 << perms, axis=1)[:, :-1]
        inc = np.zeros((1 << m, len(perms)), dtype=np.float32)
        inc[masks, np.arange(len(perms))[:, None]] = 1.0
        _PREFIX_CACHE[m] = inc
    return _PREFIX_CACHE[m]


def permutation_shapley_batch(weights: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Shapley values of many integer games with the same m, by walking every ordering.

    ``weights`` has shape (G, m); ``thresholds`` holds the largest losing
    total of each game.  Returns a (G, m) array.  In every ordering the
    pivot sits at the position equal to the number of losing proper
    prefixes, which lets small m count those with one matrix product.
    """
    weights = np.asarray(weights, dtype=np.int64)
    g, m = weights.shape
    if m > PERMUTATION_CAP:
        raise SizeLimitError(f"permutation enumeration supports m <= {PERMUTATION_CAP}")
    perms = _permutations(m).astype(np.intp)
    nperm = len(perms)
    thresholds = np.asarray(thresholds, dtype=np.int64)
    out = np.zeros((g, m))
    if (1 << m) * nperm <= _PREFIX_BUDGET:
        inc = _prefix_incidence(m)
        members = (np.arange(1 << m)[:, None] >> np.arange(m)) & 1
        flat_perms = perms.ravel()
        chunk = max(1, (1 << 22) // nperm)
        for start in range(0, g, chunk):
            w = weights[start:start + chunk]
            c = len(w)
            losing = (w @ members.T <= thresholds[start:start + chunk, None]).astype(np.float32)
            pos = np.rint(losing @ inc).astype(np.intp)
            pivots = flat_perms[np.arange(nperm) * m + pos]
            flat = (pivots + m * np.arange(c)[:, None]).ravel()
            out[start:start + c] = np.bincount(flat, minlength=c * m).reshape(c, m) / nperm
        return out
    dtype = np.int16 if int(weights.sum(axis=1).max()) < 2**15 else np.int64
    chunk = max(1, (1 << 22) // (nperm * m))
    for start in range(0, g, chunk):
        w = weights[start:start + chunk].astype(dtype)
        c = len(w)
        cum = np.cumsum(w[:, perms], axis=2)
        pos = np.argmax(cum > thresholds[start:start + chunk, None, None], axis=2)
        pivots = np.take_along_axis(np.broadcast_to(perms, (c, nperm, m)), pos[:, :, None], axis=2)[:, :, 0]
        flat = (pivots + m * np.arange(c)[:, None]).ravel()
        out[start:start + c] = np.bincount(flat, minlength=c * m).reshape(c, m) / nperm
    return out


def shapley_permutations(game: WeightedVotingGame) -> PowerIndexVector:
    """Reference Shapley value from all m! orderings (m <= 10, integer weights)."""
    w = game.integer_weights()
    phi = permutation_shapley_batch(w[None, :], np.array([game.integer_threshold()]))
    return PowerIndexVector(phi[0], "shapley")


def pivot_positions(sorted_weights: np.ndarray, game: WeightedVotingGame) -> np.ndarray:
    """Position (along the last axis) at which cumulative weight first beats the quota."""
    if game.integral:
        cum = np.cumsum(sorted_weights.astype(np.int64), axis=-1)
        return np.argmax(cum > game.integer_threshold(), axis=-1)
    cum = np.cumsum(sorted_weights, axis=-1)
    return np.argmax(cum > game.quota + REAL_TIE_EPS * game.total_weight, axis=-1)


def pivotal_index(game: WeightedVotingGame, ideal_points: Sequence[float], *, direction: str = "left") -> int:
    """Weighted median of the representatives' ideal points.

    Representatives are ordered by ideal point (ties by index) and weights
    are accumulated from the left; the first one whose running total
    exceeds the quota is pivotal.  ``direction="right"`` accumulates from
    the right instead.
    """
    lam = np.asarray(ideal_points, dtype=float)
    if lam.shape != (game.m,):
        raise GameError(f"expected {game.m} ideal points, got shape {lam.shape}")
    order = np.argsort(lam, kind="stable")
    if direction == "right":
        order = np.argsort(-lam, kind="stable")
    elif direction != "left":
        raise ValueError("direction must be 'left' or 'right'")
    w = game.integer_weights() if game.integral else game.weight_array()
    pos = int(pivot_positions(w[order], game))
    return int(order[pos])
