"""Subscriber-retention study: synthetic data, oracle, end-to-end run.

The initiative sends promotions to active subscribers who hold a given
product, pay at least a threshold monthly rate, sit at a given churn-risk
level, and have household income above their city's median. It runs as
three tasks: find the savable churns, fetch city income medians, then
filter by income and dispatch the campaign (tasks one and two are
independent and run in the same scheduling round).

``oracle_target_set`` computes the same target set by direct row
filtering and joining, with no logic engine involved; every run is
compared against it exactly. All tunable constants (product id, rate
threshold, risk level) live in one params document read by both sides.
"""

from __future__ import annotations

import csv
import json
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from autobus.initiative import InitiativeSpec, load_initiative
from autobus.logic import Atom, Compound, parse_clause, render_term
from autobus.orchestrator import InitiativeRunner, RunConfig, RunResult, replay
from autobus.semantics import EntitySchema, build_fact_set, load_csv, load_schema
from autobus.synthesis import TaskInstruction, load_instructions
from autobus.tools import (
    RecordingActionTool,
    ToolDescriptor,
    ToolRegistry,
    fixture_lookup_tool,
)

DEFAULT_CITIES = (
    "rivertown",
    "hillcrest",
    "lakeside",
    "birchwood",
    "stonegate",
    "maplewood",
    "fairhaven",
    "greenfield",
)


class CaseStudyError(Exception):
    pass


class TargetSetMismatch(CaseStudyError):
    def __init__(self, kind: str, first_diff: str):
        self.first_diff = first_diff
        super().__init__(f"{kind} differs from oracle; first differing id: {first_diff}")


@dataclass(frozen=True)
class SyntheticDatasetConfig:
    seed: int = 42
    n_consumers: int = 1000
    n_products: int = 3
    cities: Tuple[str, ...] = DEFAULT_CITIES
    rate_range: Tuple[float, float] = (5.0, 20.0)
    income_range: Tuple[int, int] = (20_000, 120_000)
    risk_levels: Tuple[int, int] = (1, 5)
    subscription_rate: float = 0.8

    def __post_init__(self):
        if self.n_consumers < 0 or self.n_products < 1:
            raise CaseStudyError("invalid dataset size")
        if not (0.0 <= self.subscription_rate <= 1.0):
            raise CaseStudyError("subscription_rate must be a probability")
        if self.rate_range[0] > self.rate_range[1] or self.income_range[0] > self.income_range[1]:
            raise CaseStudyError("invalid range")
        if not self.cities:
            raise CaseStudyError("at least one city required")


@dataclass
class Dataset:
    consumers: List[Dict[str, object]]
    subscriptions: List[Dict[str, object]]
    products: List[Dict[str, object]]
    median_income: Dict[str, int]

    def tables(self) -> Dict[str, List[Dict[str, object]]]:
        return {
            "consumer": self.consumers,
            "subscription": self.subscriptions,
            "product": self.products,
        }


def generate_dataset(cfg: SyntheticDatasetConfig) -> Dataset:
    """Deterministic synthetic tables; same seed, same rows, byte-identical
    CSV output. A consumer holds zero, one, or two subscriptions."""
    rng = random.Random(cfg.seed)
    consumers = []
    for i in range(1, cfg.n_consumers + 1):
        consumers.append(
            {
                "consumer_id": f"c{i}",
                "city": rng.choice(cfg.cities),
                "household_income": rng.randint(*cfg.income_range),
                "churn_risk": rng.randint(*cfg.risk_levels),
            }
        )
    products = [{"product_id": f"product{i}"} for i in range(1, cfg.n_products + 1)]
    subscriptions = []
    serial = 0
    for consumer in consumers:
        count = 0
        if rng.random() < cfg.subscription_rate:
            count = 1
            if rng.random() < cfg.subscription_rate / 3:
                count = 2
        for _ in range(count):
            serial += 1
            subscriptions.append(
                {
                    "subscription_id": f"s{serial}",
                    "consumer_id": consumer["consumer_id"],
                    "product": rng.choice(products)["product_id"],
                    "monthly_rate": round(rng.uniform(*cfg.rate_range), 2),
                    "status": "active" if rng.random() < 0.8 else "cancelled",
                }
            )
    midpoint = (cfg.income_range[0] + cfg.income_range[1]) // 2
    medians: Dict[str, int] = {}
    for city in cfg.cities:
        incomes = [c["household_income"] for c in consumers if c["city"] == city]
        medians[city] = int(statistics.median(incomes)) if incomes else midpoint
    return Dataset(consumers, subscriptions, products, medians)


_CSV_COLUMNS = {
    "consumers": ("consumer_id", "city", "household_income", "churn_risk"),
    "subscriptions": ("subscription_id", "consumer_id", "product", "monthly_rate", "status"),
    "products": ("product_id",),
}


def write_dataset(dataset: Dataset, out_dir: Union[str, Path]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = {
        "consumers": dataset.consumers,
        "subscriptions": dataset.subscriptions,
        "products": dataset.products,
    }
    for name, rows in tables.items():
        columns = _CSV_COLUMNS[name]
        with open(out / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([row[c] for c in columns])
    (out / "median_income.json").write_text(
        json.dumps(dataset.median_income, indent=2, sort_keys=True) + "\n"
    )


def load_dataset(fixture_dir: Union[str, Path]) -> Dataset:
    root = Path(fixture_dir)
    return Dataset(
        consumers=load_csv(root / "consumers.csv"),
        subscriptions=load_csv(root / "subscriptions.csv"),
        products=load_csv(root / "products.csv"),
        median_income={
            k: int(v) for k, v in json.loads((root / "median_income.json").read_text()).items()
        },
    )


# ---------------------------------------------------------------------------
# Study bundle: schema, initiative, instructions, params
# ---------------------------------------------------------------------------


def study_schema_doc() -> dict:
    return {
        "entities": [
            {
                "name": "consumer",
                "key": "consumer_id",
                "attributes": [
                    {"column": "city", "predicate": "resides_in", "type": "id"},
                    {"column": "household_income", "predicate": "household_income", "type": "number"},
                    {"column": "churn_risk", "predicate": "churn_risk", "type": "number"},
                ],
            },
            {
                "name": "subscription",
                "key": "subscription_id",
                "attributes": [
                    {"column": "monthly_rate", "predicate": "monthly_rate", "type": "number"},
                    {
                        "column": "status",
                        "predicate": "has_status",
                        "type": "enum",
                        "values": ["active", "cancelled"],
                    },
                ],
            },
            {"name": "product", "key": "product_id", "attributes": []},
        ],
        "relationships": [
            {
                "name": "subscribe",
                "from": "consumer",
                "to": "subscription",
                "via_entity": "subscription",
                "via_column": "consumer_id",
            },
            {
                "name": "sub_product",
                "from": "subscription",
                "to": "product",
                "via_entity": "subscription",
                "via_column": "product",
            },
        ],
        "constraints": [
            {
                "kind": "status_domain",
                "params": {
                    "entity": "subscription",
                    "status_predicate": "has_status",
                    "value": "active",
                    "derived_predicate": "active_subscription",
                    "linked_via": "subscribe",
                },
            },
            {
                "kind": "rule_template",
                "params": {
                    "head": "precondition(send_promotion(C))",
                    "body": "consumer(C), subscribe(C, S), active_subscription(S)",
                },
            },
        ],
    }


def study_params_doc() -> dict:
    return {
        "product": "product1",
        "rate_threshold": 10.0,
        "risk_level": 4,
        "demo_metrics": ["outcome(i1, resolved).", "customer_satisfaction(i1, 4.2)."],
    }


def study_initiative_doc() -> dict:
    return {
        "id": "i1",
        "name": "subscriber_retention",
        "tasks": [
            {
                "id": "task1",
                "instruction": "task1",
                "requires": ["consumer(_)", "subscribe(_, _)", "sub_product(_, _)",
                             "monthly_rate(_, _)", "churn_risk(_, _)", "has_status(_, _)"],
                "preconditions": ["consumer(_)"],
                "postconditions": ["task_done(task1)"],
                "allowed_tools": ["persist"],
            },
            {
                "id": "task2",
                "instruction": "task2",
                "requires": ["resides_in(_, _)", "median_income(_, _)"],
                "preconditions": ["consumer(_)"],
                "postconditions": ["task_done(task2)", "median_income(_, _)"],
                "allowed_tools": ["persist"],
            },
            {
                "id": "task3",
                "instruction": "task3",
                "requires": ["household_income(_, _)", "resides_in(_, _)"],
                "preconditions": ["task_done(task1)", "task_done(task2)", "median_income(_, _)"],
                "postconditions": ["task_done(task3)"],
                "allowed_tools": ["persist", "marketing_send"],
            },
        ],
        "evaluation_rules": (
            "resolved(I) :- outcome(I, resolved).\n"
            "success(I) :- resolved(I), customer_satisfaction(I, Score), Score >= 4.0.\n"
        ),
        "metrics_inputs": ["customer_satisfaction(i1, Score)"],
    }


def study_instructions_doc() -> dict:
    return {
        "task1": {
            "goal_text": "Identify savable churns: active subscribers of the target "
                         "product paying at least the threshold rate at the target risk level.",
            "target": "savable_churn(C)",
            "joins": ["consumer(C)", "subscribe(C, S)", "active_subscription(S)"],
            "filters": [
                {"predicate": "sub_product", "on": "S", "op": "eq", "value": {"param": "product"}},
                {"predicate": "monthly_rate", "on": "S", "op": ">=",
                 "value": {"param": "rate_threshold"}, "as": "Rate"},
                {"predicate": "churn_risk", "on": "C", "op": "eq", "value": {"param": "risk_level"}},
            ],
            "actions": [{"tool": "persist", "params": "savable_churn(C)"}],
        },
        "task2": {
            "goal_text": "Fetch the median household income for every city where a "
                         "subscriber resides.",
            "target": "city_median(City, M)",
            "joins": [
                "consumer(C)",
                "subscribe(C, S)",
                "resides_in(C, City)",
                "median_income(City, M)",
            ],
            "filters": [],
            "actions": [{"tool": "persist", "params": "median_income(City, M)"}],
        },
        "task3": {
            "goal_text": "Keep savable churns with household income above their city's "
                         "median, persist them, and send the campaign.",
            "target": "retention_target(C)",
            "joins": ["savable_churn(C)", "resides_in(C, City)", "median_income(City, M)"],
            "filters": [
                {"predicate": "household_income", "on": "C", "op": ">",
                 "value": {"var": "M"}, "as": "Inc"},
            ],
            "actions": [
                {"tool": "persist", "params": "target(C)"},
                {"tool": "marketing_send", "params": "send_promotion(C)"},
            ],
        },
    }


def build_registry(median_table: Mapping[str, Union[int, float]]) -> Tuple[ToolRegistry, RecordingActionTool]:
    """The study catalog: a committed median-income lookup (grounding) and
    a recording marketing stub (action, high-impact)."""
    registry = ToolRegistry()
    descriptor, impl = fixture_lookup_tool(
        "median_income_lookup", "median_income", {k: int(v) for k, v in median_table.items()}
    )
    registry.register(descriptor, impl)
    marketing = RecordingActionTool("marketing_send")
    registry.register(
        ToolDescriptor(
            name="marketing_send",
            kind="action",
            signature="send_promotion(consumer)",
            impact="high",
            idempotent=True,
        ),
        marketing,
    )
    return registry, marketing


# ---------------------------------------------------------------------------
# The oracle
# ---------------------------------------------------------------------------


def oracle_target_set(
    tables: Mapping[str, Sequence[Mapping[str, object]]],
    fixture: Mapping[str, Union[int, float]],
    params: Mapping[str, object],
) -> Set[str]:
    """Brute-force row filter and join; no logic engine anywhere.

    active status, product match, rate >= threshold, risk == level,
    income strictly above the consumer's city median.
    """
    product = str(params["product"])
    threshold = float(params["rate_threshold"])
    risk = int(params["risk_level"])
    consumers = {str(row["consumer_id"]): row for row in tables["consumer"]}
    qualified: Set[str] = set()
    for row in tables["subscription"]:
        if str(row["status"]) != "active":
            continue
        if str(row["product"]) != product:
            continue
        if float(row["monthly_rate"]) < threshold:
            continue
        consumer = consumers.get(str(row["consumer_id"]))
        if consumer is None:
            raise CaseStudyError(f"subscription references missing consumer {row['consumer_id']!r}")
        if int(consumer["churn_risk"]) != risk:
            continue
        city = str(consumer["city"])
        if city not in fixture:
            raise CaseStudyError(f"city {city!r} missing from median fixture")
        if int(consumer["household_income"]) > int(fixture[city]):
            qualified.add(str(consumer["consumer_id"]).lower())
    return qualified


# ---------------------------------------------------------------------------
# End-to-end run
# ---------------------------------------------------------------------------


@dataclass
class StudyReport:
    exact_match: bool
    engine_targets: List[str]
    oracle_targets: List[str]
    receipt_recipients: List[str]
    statuses: Dict[str, str]
    evaluation: dict
    rounds: int
    event_counts: Dict[str, int]
    grounding_calls: int

    def as_dict(self) -> dict:
        return {
            "exact_match": self.exact_match,
            "engine_target_count": len(self.engine_targets),
            "oracle_target_count": len(self.oracle_targets),
            "engine_targets": self.engine_targets,
            "oracle_targets": self.oracle_targets,
            "receipt_recipients": self.receipt_recipients,
            "statuses": dict(self.statuses),
            "evaluation": dict(self.evaluation),
            "rounds": self.rounds,
            "event_counts": dict(self.event_counts),
            "grounding_calls": self.grounding_calls,
        }


@dataclass
class StudyRun:
    report: StudyReport
    result: RunResult
    events: List
    runner: InitiativeRunner
    oracle: Set[str]


def run_case_study(
    dataset: Dataset,
    params: Optional[Mapping[str, object]] = None,
    auto_approve: bool = True,
    out_dir: Optional[Path] = None,
    run_id: str = "",
    strict: bool = True,
) -> StudyRun:
    """Ingest, run the three-task initiative, and compare against the
    oracle. With ``strict`` a mismatch raises naming the first differing
    id; otherwise the report records it."""
    params = dict(params or study_params_doc())
    schema = load_schema(study_schema_doc())
    fact_set = build_fact_set(dataset.tables(), schema)
    registry, marketing = build_registry(dataset.median_income)
    spec = load_initiative(study_initiative_doc())
    instructions = load_instructions(study_instructions_doc(), params)
    metric_facts = tuple(
        parse_clause(line) for line in params.get("demo_metrics", ())
    )
    config = RunConfig(
        auto_approve=auto_approve,
        out_dir=out_dir,
        metric_facts=metric_facts,
        run_id=run_id,
    )
    runner = InitiativeRunner(spec, instructions, registry, fact_set, config)
    result = runner.run()
    events = runner.events.events()

    persisted = runner.persist_store.facts("task3_outcomes")
    engine_targets = sorted(
        render_term(f.head.args[0]) for f in persisted if f.head.functor == "target"
    )
    recipients = sorted(marketing.recipients())
    oracle = oracle_target_set(dataset.tables(), dataset.median_income, params)
    exact = set(engine_targets) == oracle and set(recipients) == oracle

    if strict and not exact:
        for kind, engine_side in (("persisted targets", set(engine_targets)), ("receipts", set(recipients))):
            diff = sorted(engine_side.symmetric_difference(oracle))
            if diff:
                raise TargetSetMismatch(kind, diff[0])

    counts: Dict[str, int] = {}
    grounding_calls = 0
    for event in events:
        counts[event.kind] = counts.get(event.kind, 0) + 1
        if event.kind == "grounding_fetched":
            grounding_calls += int(event.payload.get("calls", 0))
    report = StudyReport(
        exact_match=exact,
        engine_targets=engine_targets,
        oracle_targets=sorted(oracle),
        receipt_recipients=recipients,
        statuses=result.statuses,
        evaluation=result.evaluation,
        rounds=result.rounds,
        event_counts=counts,
        grounding_calls=grounding_calls,
    )
    return StudyRun(report=report, result=result, events=events, runner=runner, oracle=oracle)


def write_bundle(fixture_dir: Union[str, Path], cfg: SyntheticDatasetConfig = SyntheticDatasetConfig()) -> Dataset:
    """Write the complete study bundle (tables, fixture, schema,
    initiative, instructions, params) into one directory."""
    root = Path(fixture_dir)
    root.mkdir(parents=True, exist_ok=True)
    dataset = generate_dataset(cfg)
    write_dataset(dataset, root)
    (root / "schema.json").write_text(json.dumps(study_schema_doc(), indent=2) + "\n")
    (root / "initiative.json").write_text(json.dumps(study_initiative_doc(), indent=2) + "\n")
    (root / "instructions.json").write_text(json.dumps(study_instructions_doc(), indent=2) + "\n")
    (root / "params.json").write_text(json.dumps(study_params_doc(), indent=2) + "\n")
    return dataset


DEMO_KB = """% SECTION: facts
consumer(c123).
subscription(s456).
subscribe(c123, s456).
has_status(s456, active).
% SECTION: rules
active_subscription(S) :- has_status(S, active), subscribe(_, S).
precondition(send_promotion(C)) :- consumer(C), subscribe(C, S), active_subscription(S).
"""


def _main(argv: Optional[Sequence[str]] = None) -> int:
    """Regenerate the committed fixture bundle and golden outputs."""
    import argparse

    parser = argparse.ArgumentParser(prog="python -m autobus.case_study")
    parser.add_argument("fixtures", help="bundle output directory")
    parser.add_argument("golden", help="golden output directory")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--n-consumers", type=int, default=1000)
    args = parser.parse_args(argv)

    fixtures = Path(args.fixtures)
    golden = Path(args.golden)
    golden.mkdir(parents=True, exist_ok=True)

    dataset = write_bundle(fixtures, SyntheticDatasetConfig(seed=args.seed, n_consumers=args.n_consumers))
    (fixtures / "demo_kb.abl").write_text(DEMO_KB)

    # the expected target set comes from the brute-force oracle alone
    oracle = sorted(oracle_target_set(dataset.tables(), dataset.median_income, study_params_doc()))
    (golden / "target_ids.json").write_text(json.dumps(oracle, indent=2) + "\n")

    run = run_case_study(dataset, out_dir=golden, run_id="golden-run")
    (golden / "report.json").write_text(json.dumps(run.report.as_dict(), indent=2, sort_keys=True) + "\n")
    (golden / "task3_program.abl").write_text(run.runner.programs["task3"])

    print(f"fixtures -> {fixtures}")
    print(f"golden   -> {golden} (targets: {len(oracle)}, match: {run.report.exact_match})")
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(_main())

