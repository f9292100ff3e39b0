import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from twotier import streams
from twotier.population import (
    ConstituencyPartition,
    DistributionSpec,
    ModelError,
    PreferenceModel,
    asymptotic_median_variance,
    density_at,
    median_density_at_M,
    nearest_odd,
    normal_lambda_density_ratio,
    read_populations,
    representative_density_at_M,
    sample_constituency_median,
    sample_lambda_block,
    sample_lambda_vector,
    theoretical_median,
)

U01 = DistributionSpec.uniform(0, 1)
U_CENTRED = DistributionSpec.uniform(-0.5, 0.5)


def test_distribution_parse_and_str():
    d = DistributionSpec.parse("uniform(-0.5, 0.5)")
    assert d == U_CENTRED
    assert DistributionSpec.parse(str(d)) == d
    assert DistributionSpec.parse("normal(0,2)").variance == 2
    assert DistributionSpec.parse("degenerate(0)").is_degenerate
    for bad in ("uniform(1,0)", "normal(0,-1)", "cauchy(0,1)", "uniform", "uniform(a,b)"):
        with pytest.raises(ModelError):
            DistributionSpec.parse(bad)


def test_density_and_median():
    assert density_at(U01, 0.5) == 1.0
    assert density_at(U01, 1.5) == 0.0
    assert density_at(DistributionSpec.normal(0, 1), 0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert theoretical_median(U_CENTRED) == 0.0
    with pytest.raises(ModelError):
        density_at(DistributionSpec.degenerate(0), 0)


def test_partition_requires_odd_sizes():
    assert ConstituencyPartition([1, 3, 5]).total == 9
    for bad in ([2, 3], [0], [], [3.5], [-1]):
        with pytest.raises(ModelError):
            ConstituencyPartition(bad)


@pytest.mark.parametrize("x, expected", [(0.2, 1), (1, 1), (2, 3), (3.9, 3), (4.1, 5), (404, 405), (100.9, 101)])
def test_nearest_odd(x, expected):
    assert nearest_odd(x) == expected


def test_read_populations(tmp_path):
    p = tmp_path / "pop.txt"
    p.write_text("# header\n10  # ten\n\n7\n")
    assert read_populations(p) == [10, 7]
    assert ConstituencyPartition.from_file(p).sizes == (11, 7)
    p.write_text("ten\n")
    with pytest.raises(ModelError):
        read_populations(p)


def test_constituency_of_one_returns_the_draw():
    a = sample_constituency_median(U01, 1, streams.stream(5), size=1000, method="exact")
    b = U01.sample(streams.stream(5), (1000, 1))[:, 0]
    np.testing.assert_array_equal(a, b)


def test_median_rejects_even_sizes():
    with pytest.raises(ModelError):
        sample_constituency_median(U01, 4, streams.stream(0))


def test_beta_path_needs_uniform():
    with pytest.raises(ModelError):
        sample_constituency_median(DistributionSpec.normal(0, 1), 3, streams.stream(0), method="beta")


def test_beta_median_variance_closed_form():
    # Beta(51, 51) variance 1 / (4 * 103)
    x = sample_constituency_median(U01, 101, streams.stream(11), size=200_000, method="beta")
    assert 1 / (4 * 103) == pytest.approx(0.002427, abs=1e-6)
    assert x.var() == pytest.approx(1 / (4 * 103), rel=0.02)
    assert x.mean() == pytest.approx(0.5, abs=5e-4)


@pytest.mark.parametrize("g, n", [(U01, 101), (DistributionSpec.normal(0, 1), 31), (DistributionSpec.normal(1, 4), 3)])
def test_sampling_paths_agree(g, n):
    exact = sample_constituency_median(g, n, streams.stream(1), size=20_000, method="exact")
    quant = sample_constituency_median(g, n, streams.stream(2), size=20_000, method="quantile")
    assert stats.ks_2samp(exact, quant).pvalue > 0.001
    if g.family == "uniform":
        beta = sample_constituency_median(g, n, streams.stream(3), size=20_000, method="beta")
        assert stats.ks_2samp(exact, beta).pvalue > 0.001


def test_median_variance_approaches_asymptote():
    x = sample_constituency_median(U01, 1001, streams.stream(4), size=100_000, method="exact")
    assert x.var() == pytest.approx(asymptotic_median_variance(1.0, 1001), rel=0.02)


def test_rescaled_median_is_standard_normal():
    n = 401
    g = DistributionSpec.normal(0, 1)
    x = sample_constituency_median(g, n, streams.stream(6), size=50_000, method="exact")
    z = x * 2 * density_at(g, 0) * math.sqrt(n)
    assert stats.kstest(z, "norm").pvalue > 0.01


def test_median_holder_is_uniform():
    # in a constituency of n, each of the n voters is equally likely to hold the median
    n, reps = 7, 70_000
    draws = U01.sample(streams.stream(8), (reps, n))
    holder = np.argsort(draws, axis=1)[:, n // 2]
    counts = np.bincount(holder, minlength=n)
    assert stats.chisquare(counts).pvalue > 0.001


def test_closed_forms():
    assert median_density_at_M(1.0, 1) == pytest.approx(2 / math.sqrt(2 * math.pi))
    assert median_density_at_M(0.5, 100) == pytest.approx(10 / math.sqrt(2 * math.pi))
    assert asymptotic_median_variance(1.0, 25) == pytest.approx(0.01)
    assert normal_lambda_density_ratio(5, 5, 1, 0.3) == 1.0
    # no shocks: the ratio is sqrt(n_i / n_j)
    assert normal_lambda_density_ratio(400, 100, 1, 0) == pytest.approx(2.0)
    # large shocks flatten the ratio towards one
    assert normal_lambda_density_ratio(400, 100, 1, 1e6) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ModelError):
        asymptotic_median_variance(0.0, 3)


def test_representative_density_without_shocks():
    model = PreferenceModel(U_CENTRED)
    assert representative_density_at_M(model, 101) == pytest.approx(median_density_at_M(1.0, 101))


def test_preference_model():
    m = PreferenceModel.from_mapping({"g": "normal(0,1)", "h": "uniform(-1,1)", "shock_scale": "2"})
    assert not m.iid and m.common_median == 0.0
    assert PreferenceModel(U01).iid
    assert PreferenceModel(U01, DistributionSpec.normal(0, 1), 0.0).iid
    with pytest.raises(ModelError):
        PreferenceModel(DistributionSpec.degenerate(0))
    with pytest.raises(ModelError):
        PreferenceModel(U01, shock_scale=-1)


def test_lambda_vector_shape():
    lam = sample_lambda_vector(PreferenceModel(U01), ConstituencyPartition([1, 3, 5]), streams.stream(0))
    assert lam.shape == (3,) and np.all((lam >= 0) & (lam <= 1))


def test_block_sampling_is_deterministic_and_column_local():
    model = PreferenceModel(U01, DistributionSpec.normal(0, 1))
    a = sample_lambda_block(model, ConstituencyPartition([3, 5, 7]), 42, 0, 100)
    b = sample_lambda_block(model, ConstituencyPartition([3, 5, 7]), 42, 0, 100)
    np.testing.assert_array_equal(a, b)
    # dropping a constituency leaves the others unchanged
    c = sample_lambda_block(model, ConstituencyPartition([3, 5]), 42, 0, 100)
    np.testing.assert_array_equal(a[:, :2], c)
    d = sample_lambda_block(model, ConstituencyPartition([3, 5, 7]), 43, 0, 100)
    assert not np.array_equal(a, d)


def test_equal_constituencies_are_exchangeable():
    model = PreferenceModel(U01)
    lam = sample_lambda_block(model, ConstituencyPartition([5] * 4), 3, 0, 40_000)
    ranks = np.argmin(lam, axis=1)
    assert stats.chisquare(np.bincount(ranks, minlength=4)).pvalue > 0.001


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([1, 3, 9, 51]))
def test_medians_stay_in_support(seed, n):
    for method in ("exact", "beta", "quantile"):
        x = sample_constituency_median(U_CENTRED, n, streams.stream(seed), size=50, method=method)
        assert np.all((x >= -0.5) & (x <= 0.5))
