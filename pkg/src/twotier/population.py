"""Ideal points of voters and of constituency representatives.

A voter in constituency i has ideal point ``t * mu_i + eps``, with
``eps ~ G`` drawn per voter and ``mu_i ~ H`` shared by the constituency.
The representative adopts the constituency median

    lambda_i = t * mu_i + median(eps over the n_i voters).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy import special

from . import streams

EXACT_MEDIAN_MAX_N = 10001
# elements per chunk when medians are taken from explicit samples
_EXACT_CHUNK = 1 << 22


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class DistributionSpec:
    """``uniform(a, b)``, ``normal(mean, variance)`` or ``degenerate(point)``."""

    family: str
    params: tuple

    def __post_init__(self):
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", p)
        if self.family == "uniform":
            if len(p) != 2 or not p[0] < p[1]:
                raise ModelError("uniform(a, b) needs a < b")
        elif self.family == "normal":
            if len(p) != 2 or p[1] < 0:
                raise ModelError("normal(mean, variance) needs variance >= 0")
        elif self.family == "degenerate":
            if len(p) != 1:
                raise ModelError("degenerate(point) takes one parameter")
        else:
            raise ModelError(f"unknown distribution family {self.family!r}")

    @classmethod
    def uniform(cls, a: float, b: float) -> "DistributionSpec":
        return cls("uniform", (a, b))

    @classmethod
    def normal(cls, mean: float, variance: float) -> "DistributionSpec":
        return cls("normal", (mean, variance))

    @classmethod
    def degenerate(cls, point: float = 0.0) -> "DistributionSpec":
        return cls("degenerate", (point,))

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        match = re.fullmatch(r"\s*(\w+)\s*\(([^)]*)\)\s*", text)
        if not match:
            raise ModelError(f"cannot parse distribution {text!r}")
        try:
            params = [float(x) for x in match.group(2).split(",") if x.strip()]
        except ValueError:
            raise ModelError(f"non-numeric parameter in {text!r}") from None
        return cls(match.group(1).lower(), tuple(params))

    def __str__(self) -> str:
        return f"{self.family}({', '.join(repr(x) for x in self.params)})"

    @property
    def variance(self) -> float:
        if self.family == "uniform":
            a, b = self.params
            return (b - a) ** 2 / 12.0
        if self.family == "normal":
            return self.params[1]
        return 0.0

    @property
    def is_degenerate(self) -> bool:
        return self.variance == 0.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "uniform":
            return rng.uniform(self.params[0], self.params[1], size)
        if self.family == "normal":
            return rng.normal(self.params[0], math.sqrt(self.params[1]), size)
        return np.full(size, self.params[0])

    def ppf(self, u: np.ndarray) -> np.ndarray:
        self._require_density()
        if self.family == "uniform":
            a, b = self.params
            return a + (b - a) * u
        mean, var = self.params
        return mean + math.sqrt(var) * special.ndtri(u)

    def _require_density(self):
        if self.is_degenerate:
            raise ModelError(f"{self} has no density")


def density_at(spec: DistributionSpec, x: float) -> float:
    spec._require_density()
    if spec.family == "uniform":
        a, b = spec.params
        return 1.0 / (b - a) if a <= x <= b else 0.0
    mean, var = spec.params
    return math.exp(-((x - mean) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)


def theoretical_median(spec: DistributionSpec) -> float:
    if spec.family == "uniform":
        return 0.5 * (spec.params[0] + spec.params[1])
    return spec.params[0]


@dataclass(frozen=True)
class ConstituencyPartition:
    sizes: tuple

    def __init__(self, sizes: Iterable[int]):
        raw = list(sizes)
        if not raw:
            raise ModelError("a partition needs at least one constituency")
        out = []
        for n in raw:
            if int(n) != n or n < 1:
                raise ModelError(f"constituency sizes must be positive integers, got {n}")
            if int(n) % 2 == 0:
                raise ModelError(f"constituency sizes must be odd, got {int(n)}")
            out.append(int(n))
        object.__setattr__(self, "sizes", tuple(out))

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def array(self) -> np.ndarray:
        return np.asarray(self.sizes, dtype=float)

    @classmethod
    def from_populations(cls, populations: Iterable[float], scale: float = 1.0) -> "ConstituencyPartition":
        """Scale raw population counts and round each to the nearest odd integer."""
        return cls(nearest_odd(p * scale) for p in populations)

    @classmethod
    def from_file(cls, path, scale: float = 1.0) -> "ConstituencyPartition":
        return cls.from_populations(read_populations(path), scale)


def nearest_odd(x: float) -> int:
    if x <= 1:
        return 1
    return 2 * int(math.floor((x - 1) / 2 + 0.5)) + 1


def read_populations(path) -> list[int]:
    """One integer per line; blank lines and ``#`` comments are skipped."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(int(line))
        except ValueError:
            raise ModelError(f"{path}:{lineno}: expected an integer, got {line!r}") from None
    if not values:
        raise ModelError(f"{path}: no population figures found")
    return values


@dataclass(frozen=True)
class PreferenceModel:
    g: DistributionSpec
    h: DistributionSpec = DistributionSpec.degenerate(0.0)
    shock_scale: float = 1.0

    def __post_init__(self):
        if self.g.is_degenerate:
            raise ModelError("the individual noise distribution must be non-degenerate")
        if not self.shock_scale >= 0:
            raise ModelError("shock_scale must be nonnegative")

    @property
    def iid(self) -> bool:
        return self.h.is_degenerate or self.shock_scale == 0

    @property
    def common_median(self) -> float:
        # all supported families are symmetric, so medians add
        return theoretical_median(self.g) + self.shock_scale * theoretical_median(self.h)

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, str]) -> "PreferenceModel":
        g = DistributionSpec.parse(cfg.get("g", "uniform(-0.5, 0.5)"))
        h = DistributionSpec.parse(cfg.get("h", "degenerate(0)"))
        return cls(g, h, float(cfg.get("shock_scale", 1.0)))

    def describe(self) -> dict:
        return {"g": str(self.g), "h": str(self.h), "shock_scale": self.shock_scale}


def _median_method(g: DistributionSpec, n: int, method: str) -> str:
    if method == "auto":
        if g.family == "uniform":
            return "beta"
        return "exact" if n <= EXACT_MEDIAN_MAX_N else "quantile"
    if method not in ("exact", "beta", "quantile"):
        raise ValueError(f"unknown median sampling method {method!r}")
    if method == "beta" and g.family != "uniform":
        raise ModelError("the affine beta path needs a uniform distribution")
    return method


def sample_constituency_median(g: DistributionSpec, n: int, rng: np.random.Generator, size=None, method: str = "auto"):
    """Draw the sample median of ``n`` independent draws from ``g``.

    ``method`` selects how: ``"exact"`` draws the n variates and takes the
    middle order statistic, ``"beta"`` (uniform g only) maps a
    Beta((n+1)/2, (n+1)/2) draw affinely onto the support, ``"quantile"``
    pushes the same beta draw through g's inverse CDF.  All three give the
    same distribution; ``"auto"`` picks the cheapest.
    """
    if n < 1 or int(n) != n or n % 2 == 0:
        raise ModelError(f"constituency size must be a positive odd integer, got {n}")
    g._require_density()
    n = int(n)
    how = _median_method(g, n, method)
    count = 1 if size is None else int(np.prod(size))
    if how == "exact":
        out = np.empty(count)
        rows = max(1, _EXACT_CHUNK // n)
        for start in range(0, count, rows):
            stop = min(count, start + rows)
            draws = g.sample(rng, (stop - start, n))
            out[start:stop] = np.partition(draws, n // 2, axis=1)[:, n // 2]
    else:
        k = (n + 1) / 2
        out = g.ppf(rng.beta(k, k, count))
    if size is None:
        return float(out[0])
    return out.reshape(size)


def sample_lambda_vector(model: PreferenceModel, partition: ConstituencyPartition, rng: np.random.Generator, method: str = "auto") -> np.ndarray:
    """One draw of the representatives' ideal points."""
    lam = np.empty(partition.m)
    for i, n in enumerate(partition.sizes):
        mu = model.h.params[0] if model.h.is_degenerate else float(model.h.sample(rng, 1)[0])
        lam[i] = model.shock_scale * mu + sample_constituency_median(model.g, n, rng, method=method)
    return lam


def sample_lambda_block(
    model: PreferenceModel,
    partition: ConstituencyPartition,
    seed: int,
    block: int,
    size: int,
    method: str = "auto",
) -> np.ndarray:
    """Ideal points for one block of replications, shape (size, m).

    Column i comes from the stream keyed by (seed, block, i), so the draws of
    a constituency do not depend on the others or on scheduling.
    """
    lam = np.empty((size, partition.m))
    for i, n in enumerate(partition.sizes):
        rng = streams.stream(seed, block, i)
        if model.h.is_degenerate:
            shock = model.shock_scale * model.h.params[0]
        else:
            shock = model.shock_scale * model.h.sample(rng, size)
        lam[:, i] = shock + sample_constituency_median(model.g, n, rng, size, method)
    return lam


def _positive(value: float, name: str) -> float:
    if not value > 0:
        raise ModelError(f"{name} must be positive, got {value}")
    return float(value)


def median_density_at_M(g_density_at_M: float, n: int) -> float:
    """Normal-approximation density of a size-n sample median at the common median."""
    gm = _positive(g_density_at_M, "density at the median")
    return 2.0 * gm * math.sqrt(n) / math.sqrt(2.0 * math.pi)


def asymptotic_median_variance(g_density_at_M: float, n: int) -> float:
    gm = _positive(g_density_at_M, "density at the median")
    return 1.0 / (n * (2.0 * gm) ** 2)


def normal_lambda_density_ratio(n_i: int, n_j: int, sigma_G_sq: float, sigma_H_sq: float) -> float:
    """f_i(0) / f_j(0) for normally distributed noise and shocks."""
    _positive(sigma_G_sq, "sigma_G^2")
    if sigma_H_sq < 0:
        raise ModelError("sigma_H^2 must be nonnegative")
    var_i = math.pi * sigma_G_sq / (2 * n_i) + sigma_H_sq
    var_j = math.pi * sigma_G_sq / (2 * n_j) + sigma_H_sq
    return math.sqrt(var_j / var_i)


def representative_density_at_M(model: PreferenceModel, n: int) -> float:
    """Approximate density of lambda_i at the common median.

    Uses the normal approximation for the sample median and adds the shock
    variance ``t^2 * var(H)``.
    """
    gm = density_at(model.g, theoretical_median(model.g))
    var = asymptotic_median_variance(gm, n) + model.shock_scale**2 * model.h.variance
    return 1.0 / math.sqrt(2.0 * math.pi * var)
