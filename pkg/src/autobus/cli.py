"""Command-line front end.

    autobus validate  --workspace DIR [...paths]
    autobus run       --workspace DIR [--auto-approve] [--timeout S] [--json]
    autobus query     --facts FILE.abl "goal(X)"
    autobus replay    --events events.jsonl [--check]
    autobus serve     --workspace DIR [--port N]

Exit codes are a stable contract: 0 ok, 1 domain failure (validation
errors, failed tasks, replay mismatch), 2 input/parse error, 3 timeout.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
from pathlib import Path
from typing import Dict, List, Optional

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2
EXIT_TIMEOUT = 3


def _workspace_paths(args) -> Dict[str, Path]:
    root = Path(args.workspace) if args.workspace else None

    def pick(flag_value, default_name):
        if flag_value:
            return Path(flag_value)
        if root is None:
            raise FileNotFoundError(f"--workspace or --{default_name.replace('_', '-')} required")
        return root / default_name

    return {
        "schema": pick(args.schema, "schema.json"),
        "initiative": pick(args.initiative, "initiative.json"),
        "instructions": pick(args.instructions, "instructions.json"),
        "params": pick(args.params, "params.json"),
        "consumers": pick(None, "consumers.csv") if root else None,
        "subscriptions": pick(None, "subscriptions.csv") if root else None,
        "products": pick(None, "products.csv") if root else None,
        "median": pick(None, "median_income.json") if root else None,
    }


def _load_bundle(args):
    from autobus.case_study import load_dataset
    from autobus.initiative import load_initiative
    from autobus.semantics import load_schema
    from autobus.synthesis import load_instructions

    paths = _workspace_paths(args)
    for name in ("schema", "initiative", "instructions", "params"):
        if not paths[name].is_file():
            raise FileNotFoundError(f"{name} file not found: {paths[name]}")
    schema = load_schema(paths["schema"])
    params = json.loads(paths["params"].read_text())
    spec = load_initiative(paths["initiative"])
    instructions = load_instructions(paths["instructions"], params)
    dataset = load_dataset(Path(args.workspace)) if args.workspace else None
    return schema, spec, instructions, params, dataset


def cmd_validate(args) -> int:
    from autobus.initiative import validate_initiative
    from autobus.case_study import build_registry

    try:
        schema, spec, instructions, params, dataset = _load_bundle(args)
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT

    registry, _marketing = build_registry(dataset.median_income if dataset else {})
    fact_predicates = set(schema.predicate_signatures())
    report = validate_initiative(
        spec,
        fact_predicates=fact_predicates,
        tool_predicates=registry.grounded_predicates(),
    )
    missing_instructions = [
        t.id for t in spec.tasks if t.instruction not in instructions
    ]
    findings = report.as_dict()
    for task_id in missing_instructions:
        findings["errors"].append(
            {"code": "missing_instruction", "message": f"no instruction for task {task_id!r}", "task": task_id}
        )
    if args.json:
        print(json.dumps(findings, indent=2))
    else:
        for finding in findings["errors"]:
            print(f"error [{finding['code']}] {finding['message']}")
        for finding in findings["warnings"]:
            print(f"warning [{finding['code']}] {finding['message']}")
        if not findings["errors"]:
            print(f"initiative {spec.id!r}: ok ({len(spec.tasks)} tasks)")
    return EXIT_OK if not findings["errors"] else EXIT_DOMAIN


def cmd_run(args) -> int:
    from autobus.case_study import build_registry
    from autobus.logic import parse_clause
    from autobus.orchestrator import InitiativeRunner, RunConfig
    from autobus.semantics import build_fact_set

    try:
        schema, spec, instructions, params, dataset = _load_bundle(args)
        if dataset is None:
            raise FileNotFoundError("run needs --workspace with the data tables")
        if args.initiative_id and args.initiative_id != spec.id:
            print(f"error: unknown initiative {args.initiative_id!r}", file=sys.stderr)
            return EXIT_INPUT
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT

    fact_set = build_fact_set(dataset.tables(), schema)
    registry, _marketing = build_registry(dataset.median_income)
    metric_facts = tuple(parse_clause(line) for line in params.get("demo_metrics", ()))
    config = RunConfig(
        auto_approve=args.auto_approve,
        out_dir=Path(args.out) if args.out else None,
        metric_facts=metric_facts,
        run_id=args.run_id or "",
    )
    runner = InitiativeRunner(spec, instructions, registry, fact_set, config)

    server_thread = None
    if not args.auto_approve:
        # approvals must arrive from somewhere: expose this run over HTTP
        from autobus.server import EngineState, create_app

        engine = EngineState()
        engine.runs[runner.run_id] = runner
        app = create_app(engine)
        import uvicorn

        server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=args.port, log_level="error")
        )
        server_thread = threading.Thread(target=server.run, daemon=True)
        server_thread.start()
        print(f"run {runner.run_id}: approvals at http://127.0.0.1:{args.port}/runs/{runner.run_id}/approvals")

    worker = threading.Thread(target=runner.run, daemon=True)
    worker.start()
    finished = runner.wait(timeout=args.timeout)
    if not finished:
        runner.request_stop()
        runner.wait(timeout=10)
        print("timed out waiting for approvals", file=sys.stderr)
        return EXIT_TIMEOUT
    result = runner.result

    if args.json:
        print(json.dumps(result.as_dict(), indent=2, sort_keys=True))
    else:
        print(f"run {result.run_id}: {result.rounds} rounds")
        for task_id in sorted(result.statuses):
            print(f"  {task_id:12s} {result.statuses[task_id]}")
        outcome = "success" if result.evaluation.get("success") else "not_success"
        bindings = result.evaluation.get("bindings") or {}
        extra = "".join(f" {k}={v}" for k, v in sorted(bindings.items()))
        print(f"  evaluation   {outcome}{extra}")
    return EXIT_OK if result.all_terminal_ok else EXIT_DOMAIN


def cmd_query(args) -> int:
    from autobus.logic import (
        EngineError,
        LogicError,
        ParseError,
        parse_program,
        parse_term,
        render_term,
        solve_all,
    )

    try:
        source = Path(args.facts).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        program = parse_program(source)
        goal = parse_term(args.goal)
    except (ParseError, LogicError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        for instance in solve_all(goal, program):
            print(render_term(instance))
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_replay(args) -> int:
    from autobus.orchestrator import ReplayError, load_events, replay

    try:
        events = load_events(Path(args.events))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: malformed event log: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        state = replay(events)
    except ReplayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.json:
        print(json.dumps({"statuses": state.statuses, "facts": len(state.facts)}, indent=2))
    else:
        for task_id in sorted(state.statuses):
            print(f"  {task_id:12s} {state.statuses[task_id]}")
    if args.check:
        if not state.finished or state.recorded_statuses is None:
            print("check failed: log has no run_finished record", file=sys.stderr)
            return EXIT_DOMAIN
        if state.statuses != state.recorded_statuses:
            print("check failed: replayed statuses differ from recorded final state", file=sys.stderr)
            return EXIT_DOMAIN
        print("replay matches recorded final state")
    return EXIT_OK


def cmd_serve(args) -> int:
    from autobus.case_study import build_registry
    from autobus.semantics import build_fact_set
    from autobus.server import EngineState, StudyWorkspace, serve_api

    try:
        schema, spec, instructions, params, dataset = _load_bundle(args)
        if dataset is None:
            raise FileNotFoundError("serve needs --workspace with the data tables")
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    from autobus.logic import parse_clause

    fact_set = build_fact_set(dataset.tables(), schema)
    engine = EngineState()
    engine.add_workspace(
        StudyWorkspace(
            spec=spec,
            instructions=instructions,
            fact_set=fact_set,
            registry_factory=lambda: build_registry(dataset.median_income)[0],
            default_metrics=tuple(parse_clause(l) for l in params.get("demo_metrics", ())),
            out_dir=Path(args.out) if args.out else None,
        )
    )
    console = Path(args.console) if args.console else None
    print(f"serving on http://127.0.0.1:{args.port}")
    serve_api(engine, port=args.port, console_dir=console)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autobus")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--workspace", help="directory with the study bundle")
        p.add_argument("--schema")
        p.add_argument("--initiative")
        p.add_argument("--instructions")
        p.add_argument("--params")
        p.add_argument("--json", action="store_true")

    p = sub.add_parser("validate", help="check schema, initiative, and instructions")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="execute the initiative end to end")
    common(p)
    p.add_argument("--initiative-id", help="must match the bundle's initiative id")
    p.add_argument("--auto-approve", action="store_true")
    p.add_argument("--timeout", type=float, default=None, help="seconds to wait before giving up")
    p.add_argument("--out", help="run store directory")
    p.add_argument("--run-id", help="fixed run id (golden comparisons)")
    p.add_argument("--port", type=int, default=8420, help="approval API port when not auto-approving")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("query", help="solve one goal over an ABL file")
    p.add_argument("--facts", required=True, help="ABL source file")
    p.add_argument("goal", help="goal term, e.g. 'active_subscription(S)'")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("replay", help="rebuild final state from an event log")
    p.add_argument("--events", required=True, help="events.jsonl from a run store")
    p.add_argument("--check", action="store_true", help="compare against the recorded final state")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="HTTP API (and console) over the bundle")
    common(p)
    p.add_argument("--port", type=int, default=8420)
    p.add_argument("--out", help="run store directory")
    p.add_argument("--console", help="static console bundle to mount at /console")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
