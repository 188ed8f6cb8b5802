"""HTTP API contract."""

import time

import pytest
from fastapi.testclient import TestClient

from autobus.case_study import (
    SyntheticDatasetConfig,
    build_registry,
    generate_dataset,
    study_initiative_doc,
    study_instructions_doc,
    study_params_doc,
    study_schema_doc,
)
from autobus.initiative import load_initiative
from autobus.logic import parse_clause
from autobus.semantics import build_fact_set, load_schema
from autobus.server import EngineState, StudyWorkspace, create_app
from autobus.synthesis import load_instructions


@pytest.fixture()
def client():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=21, n_consumers=120))
    schema = load_schema(study_schema_doc())
    fact_set = build_fact_set(dataset.tables(), schema)
    params = study_params_doc()
    engine = EngineState()
    engine.add_workspace(
        StudyWorkspace(
            spec=load_initiative(study_initiative_doc()),
            instructions=load_instructions(study_instructions_doc(), params),
            fact_set=fact_set,
            registry_factory=lambda: build_registry(dataset.median_income)[0],
            default_metrics=tuple(parse_clause(l) for l in params["demo_metrics"]),
        )
    )
    return TestClient(create_app(engine))


def wait_for(predicate, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        value = predicate()
        if value:
            return value
        time.sleep(0.02)
    raise AssertionError("condition not reached in time")


def start_run(client, auto_approve=True):
    response = client.post("/runs", json={"initiative": "i1", "config": {"auto_approve": auto_approve}})
    assert response.status_code == 200
    return response.json()["run_id"]


def test_initiatives_listing(client):
    body = client.get("/initiatives").json()
    assert body == [{"id": "i1", "name": "subscriber_retention", "tasks": ["task1", "task2", "task3"]}]


def test_unknown_initiative_404(client):
    assert client.post("/runs", json={"initiative": "nope"}).status_code == 404


def test_unknown_run_404(client):
    response = client.get("/runs/ghost")
    assert response.status_code == 404
    assert "ghost" in response.json()["detail"]


def test_run_lifecycle_and_events(client):
    run_id = start_run(client)
    wait_for(lambda: client.get(f"/runs/{run_id}").json()["finished"])
    summary = client.get(f"/runs/{run_id}").json()
    assert summary["statuses"] == {
        "task1": "completed", "task2": "completed", "task3": "completed",
    }
    events = client.get(f"/runs/{run_id}/events").json()
    seqs = [e["seq"] for e in events]
    assert seqs == list(range(1, len(seqs) + 1))
    assert events[-1]["kind"] == "run_finished"
    tail = client.get(f"/runs/{run_id}/events", params={"since": seqs[-3]}).json()
    assert [e["seq"] for e in tail] == seqs[-2:]


def test_tasks_and_programs_endpoints(client):
    run_id = start_run(client)
    wait_for(lambda: client.get(f"/runs/{run_id}").json()["finished"])
    tasks = {t["id"]: t for t in client.get(f"/runs/{run_id}/tasks").json()}
    assert tasks["task3"]["status"] == "completed"
    assert tasks["task3"]["preconditions"][0] == "task_done(task1)"
    program = client.get(f"/runs/{run_id}/programs/task3").json()
    assert "% SECTION: actions" in program["program"]
    assert client.get(f"/runs/{run_id}/programs/nope").status_code == 404


def test_approval_flow_via_api(client):
    run_id = start_run(client, auto_approve=False)
    approvals = wait_for(
        lambda: [a for a in client.get(f"/runs/{run_id}/approvals").json() if a["decision"] == "pending"]
    )
    approval = approvals[0]
    assert approval["task"] == "task3"
    assert any("high-impact" in r for r in approval["reasons"])
    response = client.post(
        f"/runs/{run_id}/approvals/{approval['id']}",
        json={"decision": "approved", "decider": "ops"},
    )
    assert response.status_code == 200
    wait_for(lambda: client.get(f"/runs/{run_id}").json()["finished"])
    assert client.get(f"/runs/{run_id}").json()["statuses"]["task3"] == "completed"
    # decide-once: the second decision conflicts
    second = client.post(
        f"/runs/{run_id}/approvals/{approval['id']}",
        json={"decision": "rejected", "decider": "late"},
    )
    assert second.status_code == 409
    assert client.post(
        f"/runs/{run_id}/approvals/ap-none", json={"decision": "approved"}
    ).status_code == 404


def test_event_stream_sse(client):
    run_id = start_run(client)
    wait_for(lambda: client.get(f"/runs/{run_id}").json()["finished"])
    seen = []
    with client.stream("GET", f"/runs/{run_id}/events/stream") as response:
        assert response.headers["content-type"].startswith("text/event-stream")
        for line in response.iter_lines():
            if line.startswith("data: "):
                seen.append(line)
            if line.startswith("event: end"):
                break
    assert len(seen) == len(client.get(f"/runs/{run_id}/events").json())
