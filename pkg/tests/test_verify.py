import csv
import io

import pytest

from twotier.population import ConstituencyPartition, DistributionSpec, ModelError
from twotier.verify import (
    CheckReport,
    any_hard_failure,
    check_essential_interval,
    check_median_normality,
    check_median_variance,
    check_square_root_dominance,
    check_square_root_rule,
    check_type_ratio_limit,
    check_shapley_limit,
    default_suite,
    reports_to_csv,
    sample_medians,
    shapley_vectors,
    summary,
)


@pytest.mark.parametrize(
    "kind, observed, passed",
    [("two_sided", 1.05, True), ("two_sided", 1.2, False), ("upper", 0.5, True), ("upper", 1.2, False),
     ("lower", 0.95, True), ("lower", 0.8, False), ("below", 0.99, True), ("below", 1.0, False)],
)
def test_check_kinds(kind, observed, passed):
    assert CheckReport("x", observed, 1.0, 0.1, kind).passed is passed


def test_unknown_kind():
    with pytest.raises(ValueError):
        CheckReport("x", 0, 0, kind="sideways")


def test_soft_failures_do_not_count():
    reports = [CheckReport("a", 2, 0, hard=False), CheckReport("b", 0, 0)]
    assert not any_hard_failure(reports)
    assert "[info] a" in summary(reports)
    assert summary(reports).endswith("2 checks, 0 hard failure(s)")


def test_reports_csv_quotes_config():
    text = reports_to_csv([CheckReport("a, b", 1.0, 1.0, config={"k": [1, 2]})])
    row = next(csv.DictReader(io.StringIO(text)))
    assert row["name"] == "a, b" and row["config"] == '{"k": [1, 2]}' and row["passed"] == "True"


def test_three_player_shapley_vectors():
    third, sixth = round(1 / 3, 12), round(1 / 6, 12)
    positive = {(third,) * 3, (round(2 / 3, 12), sixth, sixth), (1.0, 0.0, 0.0)}
    assert shapley_vectors(3, 10) == positive
    # a zero weight turns the two-player majority game into a three-player one
    assert shapley_vectors(3, 10, min_weight=0) == positive | {(0.5, 0.5, 0.0)}


def test_sample_medians_are_reproducible():
    a = sample_medians(DistributionSpec.uniform(0, 1), 11, 5000, 3)
    assert a.shape == (5000,)
    assert (a == sample_medians(DistributionSpec.uniform(0, 1), 11, 5000, 3)).all()


def test_median_normality_and_variance_small():
    g = DistributionSpec.normal(0, 1)
    assert check_median_normality(g, 201, 20_000, 1).passed
    r = check_median_variance(DistributionSpec.uniform(0, 1), 201, 20_000, 1, rel_tolerance=0.05)
    assert r.passed and "beta_exact" in r.config


def test_type_ratio_needs_simple_majority():
    with pytest.raises(ValueError):
        check_type_ratio_limit([(2, 405, 0.5), (1, 101, 0.5)], [20], 10, 0, quota_fraction=0.6)


def test_type_ratio_small_run():
    reports = check_type_ratio_limit([(2, 45, 0.5), (1, 11, 0.5)], [10, 20], 20_000, 1)
    assert [r.hard for r in reports] == [False, True, True]
    assert reports[0].expected == pytest.approx(2 * (45 / 11) ** 0.5)


def test_shapley_limit_requires_shocks():
    with pytest.raises(ModelError):
        check_shapley_limit(2, 0.5, (1, 1), (1, 1), [1], 10, 0, h=DistributionSpec.degenerate(0))


def test_shapley_limit_small_run():
    reports = check_shapley_limit(3, 0.5, (2, 1, 1), (3, 5, 7), [0, 1000], 20_000, 2)
    assert reports[1].passed and reports[1].hard and not reports[0].hard
    assert reports[-1].name.startswith("shapley limit error trend")


def test_square_root_checks_small():
    part = ConstituencyPartition([1, 1, 1])
    r = check_square_root_rule(part, 3000, 0)
    assert not r.hard and r.passed
    d = check_square_root_dominance(ConstituencyPartition([101, 51, 25, 9, 3, 1, 75, 33, 17, 5, 61]), 20_000, 0)
    assert set(d.config["l1"]) == {"0.5", "0.0", "1.0"}


def test_essential_interval_small():
    reports = check_essential_interval([1, 11], 2000, 0)
    assert len(reports) == 2
    assert reports[0].config["rates"][0] == 1.0


def test_default_suite_runs_and_scales():
    eu = ConstituencyPartition([101, 51, 25, 9, 3, 1, 75, 33, 17, 5, 61])
    reports = default_suite(2000, 1, eu27=eu)
    names = [r.name for r in reports]
    assert any(n.startswith("type ratio") for n in names) and any(n.startswith("shapley limit") for n in names)
    strict = default_suite(2000, 1, eu27=eu, tolerance_scale=0.0)
    assert any_hard_failure(strict)
    assert all(r.tolerance == 0 for r in strict)
