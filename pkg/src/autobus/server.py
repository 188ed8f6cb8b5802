"""HTTP API over live runs.

One process serves everything the CLI and the operator console need:
start runs, inspect state, stream events, decide approvals. The console's
static bundle, when built, is served under /console.

    GET  /initiatives
    POST /runs                         {"initiative": id, "config": {...}}
    GET  /runs/{id}
    GET  /runs/{id}/events?since=seq
    GET  /runs/{id}/events/stream      (server-sent events)
    GET  /runs/{id}/tasks
    GET  /runs/{id}/programs/{task}
    GET  /runs/{id}/approvals
    POST /runs/{id}/approvals/{aid}    {"decision": "approved"|"rejected", "decider": t}
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from autobus.initiative import InitiativeSpec, TaskStatus
from autobus.logic import parse_clause
from autobus.orchestrator import ApprovalError, InitiativeRunner, RunConfig
from autobus.semantics import FactSet
from autobus.synthesis import TaskInstruction
from autobus.tools import ToolRegistry


@dataclass
class StudyWorkspace:
    """Everything needed to start runs of one initiative."""

    spec: InitiativeSpec
    instructions: Mapping[str, TaskInstruction]
    fact_set: FactSet
    registry_factory: object  # Callable[[], ToolRegistry] — fresh tools per run
    default_metrics: tuple = ()
    out_dir: Optional[Path] = None


class EngineState:
    """Workspaces plus live runs; the API layer owns no business logic."""

    def __init__(self):
        self.workspaces: Dict[str, StudyWorkspace] = {}
        self.runs: Dict[str, InitiativeRunner] = {}
        self._lock = threading.Lock()

    def add_workspace(self, workspace: StudyWorkspace) -> None:
        self.workspaces[workspace.spec.id] = workspace

    def start_run(self, initiative_id: str, config_doc: Mapping[str, object]) -> InitiativeRunner:
        workspace = self.workspaces.get(initiative_id)
        if workspace is None:
            raise KeyError(initiative_id)
        registry = workspace.registry_factory()
        metric_facts = tuple(
            parse_clause(line) for line in config_doc.get("metric_facts", ())
        ) or tuple(workspace.default_metrics)
        config = RunConfig(
            auto_approve=bool(config_doc.get("auto_approve", False)),
            out_dir=workspace.out_dir,
            metric_facts=metric_facts,
            task_delay_s=float(config_doc.get("task_delay_s", 0.0)),
            run_id=str(config_doc.get("run_id", "")),
        )
        runner = InitiativeRunner(
            workspace.spec, workspace.instructions, registry, workspace.fact_set, config
        )
        with self._lock:
            self.runs[runner.run_id] = runner
        thread = threading.Thread(target=runner.run, name=f"run-{runner.run_id}", daemon=True)
        thread.start()
        return runner

    def get_run(self, run_id: str) -> InitiativeRunner:
        runner = self.runs.get(run_id)
        if runner is None:
            raise KeyError(run_id)
        return runner


def create_app(engine: EngineState, console_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="autobus", docs_url=None, redoc_url=None)

    @app.get("/initiatives")
    def initiatives():
        out = []
        for workspace in engine.workspaces.values():
            out.append(
                {
                    "id": workspace.spec.id,
                    "name": workspace.spec.name,
                    "tasks": [t.id for t in workspace.spec.tasks],
                }
            )
        return out

    @app.post("/runs")
    def start_run(body: dict):
        initiative_id = body.get("initiative")
        if not initiative_id and len(engine.workspaces) == 1:
            initiative_id = next(iter(engine.workspaces))
        try:
            runner = engine.start_run(str(initiative_id), body.get("config", {}))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown initiative {initiative_id!r}")
        return {"run_id": runner.run_id, "initiative": runner.spec.id}

    def _run_or_404(run_id: str) -> InitiativeRunner:
        try:
            return engine.get_run(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")

    @app.get("/runs/{run_id}")
    def run_summary(run_id: str):
        return _run_or_404(run_id).snapshot()

    @app.get("/runs/{run_id}/tasks")
    def run_tasks(run_id: str):
        runner = _run_or_404(run_id)
        state = runner.state
        out = []
        for task in runner.spec.tasks:
            status = state.task_statuses.get(task.id, TaskStatus.PENDING)
            out.append(
                {
                    "id": task.id,
                    "status": status.value,
                    "iteration": state.iterations.get(task.id, 0),
                    "preconditions": [_render(p) for p in task.preconditions],
                    "postconditions": [_render(p) for p in task.postconditions],
                }
            )
        return out

    @app.get("/runs/{run_id}/events")
    def run_events(run_id: str, since: int = 0):
        runner = _run_or_404(run_id)
        return [e.as_dict() for e in runner.events.events(since=since)]

    @app.get("/runs/{run_id}/events/stream")
    def run_event_stream(run_id: str, since: int = 0):
        runner = _run_or_404(run_id)

        def generate():
            cursor = since
            while True:
                events = runner.events.wait_for_new(cursor, timeout=1.0)
                for event in events:
                    cursor = event.seq
                    yield f"data: {json.dumps(event.as_dict())}\n\n"
                if runner.result is not None and not runner.events.events(since=cursor):
                    yield "event: end\ndata: {}\n\n"
                    return

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/runs/{run_id}/programs/{task_id}")
    def run_program(run_id: str, task_id: str):
        runner = _run_or_404(run_id)
        text = runner.programs.get(task_id)
        if text is None:
            raise HTTPException(status_code=404, detail=f"no program synthesized for {task_id!r}")
        return {"task": task_id, "program": text}

    @app.get("/runs/{run_id}/approvals")
    def run_approvals(run_id: str):
        runner = _run_or_404(run_id)
        return [a.as_dict() for a in runner.approvals.values()]

    @app.post("/runs/{run_id}/approvals/{approval_id}")
    def decide(run_id: str, approval_id: str, body: dict):
        runner = _run_or_404(run_id)
        decision = body.get("decision", "")
        decider = body.get("decider", "")
        try:
            request = runner.submit_approval(approval_id, decision, decider)
        except ApprovalError as exc:
            status = 404 if "unknown" in str(exc) else 409
            raise HTTPException(status_code=status, detail=str(exc))
        return request.as_dict()

    if console_dir and Path(console_dir).is_dir():
        app.mount("/console", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app


def _render(term) -> str:
    from autobus.logic import render_term

    return render_term(term)


def serve_api(
    engine: EngineState,
    host: str = "127.0.0.1",
    port: int = 8420,
    console_dir: Optional[Path] = None,
):
    """Blocking uvicorn server over the engine state."""
    import uvicorn

    app = create_app(engine, console_dir=console_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
