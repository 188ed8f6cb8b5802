"""Dataset generation, the targeting oracle, and golden outputs."""

import json
from pathlib import Path

import pytest

from autobus.case_study import (
    CaseStudyError,
    Dataset,
    SyntheticDatasetConfig,
    TargetSetMismatch,
    generate_dataset,
    load_dataset,
    oracle_target_set,
    run_case_study,
    study_params_doc,
    write_dataset,
)

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"
GOLDEN = REPO / "golden"

PARAMS = study_params_doc()


def test_same_seed_byte_identical_csv(tmp_path):
    cfg = SyntheticDatasetConfig(seed=42, n_consumers=1000)
    write_dataset(generate_dataset(cfg), tmp_path / "a")
    write_dataset(generate_dataset(cfg), tmp_path / "b")
    for name in ("consumers.csv", "subscriptions.csv", "products.csv", "median_income.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_committed_fixtures_reproducible(tmp_path):
    cfg = SyntheticDatasetConfig(seed=42, n_consumers=1000)
    write_dataset(generate_dataset(cfg), tmp_path)
    for name in ("consumers.csv", "subscriptions.csv", "products.csv", "median_income.json"):
        assert (tmp_path / name).read_bytes() == (FIXTURES / name).read_bytes(), name


def test_zero_consumers_valid_headers(tmp_path):
    cfg = SyntheticDatasetConfig(seed=1, n_consumers=0)
    dataset = generate_dataset(cfg)
    assert dataset.consumers == [] and dataset.subscriptions == []
    write_dataset(dataset, tmp_path)
    assert (tmp_path / "consumers.csv").read_text().splitlines()[0] == (
        "consumer_id,city,household_income,churn_risk"
    )
    assert len(dataset.median_income) == len(cfg.cities)


def test_referential_integrity_by_construction():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=3, n_consumers=500))
    consumer_ids = {c["consumer_id"] for c in dataset.consumers}
    assert all(s["consumer_id"] in consumer_ids for s in dataset.subscriptions)
    product_ids = {p["product_id"] for p in dataset.products}
    assert all(s["product"] in product_ids for s in dataset.subscriptions)


def test_median_fixture_lists_every_city():
    cfg = SyntheticDatasetConfig(seed=5, n_consumers=50)
    dataset = generate_dataset(cfg)
    assert set(dataset.median_income) == set(cfg.cities)


def test_oracle_golden_target_ids():
    dataset = load_dataset(FIXTURES)
    oracle = oracle_target_set(dataset.tables(), dataset.median_income, PARAMS)
    golden = set(json.loads((GOLDEN / "target_ids.json").read_text()))
    assert oracle == golden


def test_oracle_threshold_above_max_rate_empty():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=11, n_consumers=200))
    params = dict(PARAMS, rate_threshold=10_000.0)
    assert oracle_target_set(dataset.tables(), dataset.median_income, params) == set()


def test_oracle_missing_city_rejected():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=11, n_consumers=50))
    fixture = dict(dataset.median_income)
    fixture.pop(next(iter(fixture)))
    with pytest.raises(CaseStudyError, match="missing"):
        oracle_target_set(dataset.tables(), fixture, PARAMS)


def test_engine_matches_oracle_fresh_seed():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=777, n_consumers=400))
    run = run_case_study(dataset)
    assert run.report.exact_match


def test_no_risk4_dataset_empty_but_exact():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=8, n_consumers=200))
    for consumer in dataset.consumers:
        if int(consumer["churn_risk"]) == int(PARAMS["risk_level"]):
            consumer["churn_risk"] = 1
    run = run_case_study(dataset)
    assert run.report.exact_match
    assert run.report.engine_targets == [] and run.report.oracle_targets == []
    assert run.report.statuses == {
        "task1": "completed", "task2": "completed", "task3": "completed",
    }


def test_perturbed_median_removes_city_both_sides():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=15, n_consumers=400))
    baseline = run_case_study(dataset)
    by_id = {c["consumer_id"]: c for c in dataset.consumers}
    cities_in_targets = {str(by_id[t]["city"]) for t in baseline.report.engine_targets}
    assert cities_in_targets, "baseline produced no targets; pick another seed"
    raised = sorted(cities_in_targets)[0]
    perturbed = Dataset(
        consumers=dataset.consumers,
        subscriptions=dataset.subscriptions,
        products=dataset.products,
        median_income=dict(dataset.median_income, **{raised: 10_000_000}),
    )
    run = run_case_study(perturbed)
    assert run.report.exact_match
    for target in run.report.engine_targets:
        assert str(by_id[target]["city"]) != raised
    assert set(run.report.engine_targets) == {
        t for t in baseline.report.engine_targets if str(by_id[t]["city"]) != raised
    }


def test_raising_threshold_never_adds_targets():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=19, n_consumers=300))
    previous = None
    for threshold in (5.0, 10.0, 15.0, 19.0):
        params = dict(PARAMS, rate_threshold=threshold)
        run = run_case_study(dataset, params=params)
        assert run.report.exact_match
        current = set(run.report.engine_targets)
        if previous is not None:
            assert current <= previous
        previous = current


class _ShiftyDataset(Dataset):
    """Feeds the engine one churn-risk column and the oracle another,
    guaranteeing a divergence for the strict-mode test."""

    def __init__(self, base: Dataset):
        super().__init__(base.consumers, base.subscriptions, base.products, base.median_income)
        self._calls = 0

    def tables(self):
        self._calls += 1
        if self._calls == 1:
            return super().tables()
        flipped = [dict(c, churn_risk=1) for c in self.consumers]
        return {
            "consumer": flipped,
            "subscription": self.subscriptions,
            "product": self.products,
        }


def test_strict_mismatch_raises_with_first_differing_id():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=23, n_consumers=300))
    baseline = run_case_study(dataset)
    assert baseline.report.engine_targets, "seed produced no targets; pick another"
    with pytest.raises(TargetSetMismatch) as exc:
        run_case_study(_ShiftyDataset(dataset))
    assert exc.value.first_diff.startswith("c")
    lenient = run_case_study(_ShiftyDataset(dataset), strict=False)
    assert not lenient.report.exact_match


def test_golden_report_and_program_match():
    dataset = load_dataset(FIXTURES)
    run = run_case_study(dataset)
    golden_report = json.loads((GOLDEN / "report.json").read_text())
    assert run.report.as_dict() == golden_report
    assert run.runner.programs["task3"] == (GOLDEN / "task3_program.abl").read_text()


def test_invalid_config_rejected():
    with pytest.raises(CaseStudyError):
        SyntheticDatasetConfig(subscription_rate=1.5)
    with pytest.raises(CaseStudyError):
        SyntheticDatasetConfig(rate_range=(9.0, 2.0))
    with pytest.raises(CaseStudyError):
        SyntheticDatasetConfig(cities=())
