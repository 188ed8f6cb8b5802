"""End-to-end initiative execution.

The loop runs in scheduling rounds: compute the ready set, synthesize and
validate a program per ready task, gate anything high-impact behind an
approval, then execute approved tasks concurrently (grounding, action
dispatch), assert their outcomes, and repeat until nothing is ready,
running, or awaiting a decision. Every step lands in a gapless, append-
only event log that replays to the same final state.

Within a round, live events (readiness, synthesis, approvals) are emitted
in task-id order and execution-side events are buffered per task and
appended in task-id order after the round's jobs finish, so two runs of
the same inputs produce identical logs apart from timestamps.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Set, Tuple

from autobus.initiative import (
    ExecutionState,
    InitiativeSpec,
    RepeatDecision,
    TaskSpec,
    TaskStatus,
    check_repeat,
    evaluate_initiative,
    ready_tasks,
    validate_initiative,
)
from autobus.logic import (
    Atom,
    Clause,
    Compound,
    Program,
    SolveLimits,
    Term,
    render_clause,
    render_term,
    solve_all,
    term_vars,
)
from autobus.logic.clauses import ACTIONS as ACTIONS_TAG
from autobus.logic.clauses import FACTS as FACTS_TAG
from autobus.logic.clauses import RULES as RULES_TAG
from autobus.semantics import FactSet
from autobus.synthesis import (
    LogicProgram,
    TaskInstruction,
    classify_impact,
    render_logic_program,
    synthesize_program,
    validate_program,
)
from autobus.tools import InvocationCache, ToolInvocation, ToolRegistry, ground_predicate

EVENT_KINDS = (
    "run_started",
    "task_ready",
    "program_synthesized",
    "approval_requested",
    "approval_decided",
    "grounding_fetched",
    "task_completed",
    "task_failed",
    "action_invoked",
    "initiative_evaluated",
    "run_finished",
)


class OrchestratorError(Exception):
    pass


class ApprovalError(OrchestratorError):
    pass


class ReplayError(OrchestratorError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Event:
    seq: int
    timestamp: str
    kind: str
    payload: Mapping[str, object]

    def as_dict(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "payload": dict(self.payload),
        }


class EventLog:
    """Gapless append-only event sequence with change notification."""

    def __init__(self, sink: Optional[Callable[[Event], None]] = None):
        self._events: List[Event] = []
        self._cond = threading.Condition()
        self._sink = sink

    def append(self, kind: str, payload: Mapping[str, object]) -> Event:
        if kind not in EVENT_KINDS:
            raise OrchestratorError(f"unknown event kind {kind!r}")
        with self._cond:
            event = Event(seq=len(self._events) + 1, timestamp=_now(), kind=kind, payload=payload)
            self._events.append(event)
            self._cond.notify_all()
        if self._sink:
            self._sink(event)
        return event

    def events(self, since: int = 0) -> List[Event]:
        with self._cond:
            return [e for e in self._events if e.seq > since]

    def wait_for_new(self, since: int, timeout: float = 10.0) -> List[Event]:
        with self._cond:
            self._cond.wait_for(lambda: len(self._events) > since, timeout=timeout)
            return [e for e in self._events if e.seq > since]

    def __len__(self):
        return len(self._events)


@dataclass
class ApprovalRequest:
    id: str
    task_id: str
    program_text: str
    reasons: Tuple[str, ...]
    decision: str = "pending"  # pending | approved | rejected
    decider: str = ""

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "task": self.task_id,
            "program": self.program_text,
            "reasons": list(self.reasons),
            "decision": self.decision,
            "decider": self.decider,
        }


@dataclass(frozen=True)
class RunConfig:
    auto_approve: bool = False
    out_dir: Optional[Path] = None
    metric_facts: Tuple[Clause, ...] = ()
    task_delay_s: float = 0.0
    limits: SolveLimits = SolveLimits()
    max_rounds: int = 100
    run_id: str = ""


@dataclass
class RunResult:
    run_id: str
    statuses: Dict[str, str]
    evaluation: dict
    rounds: int
    stopped_early: bool = False

    @property
    def all_terminal_ok(self) -> bool:
        return all(s == "completed" for s in self.statuses.values())

    def as_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "statuses": dict(self.statuses),
            "evaluation": dict(self.evaluation),
            "rounds": self.rounds,
            "stopped_early": self.stopped_early,
        }


class RunStore:
    """One directory per run: events.jsonl, rendered programs, persisted
    outcome facts, receipts."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "programs").mkdir(exist_ok=True)
        (self.root / "persisted").mkdir(exist_ok=True)
        self._lock = threading.Lock()

    def write_event(self, event: Event) -> None:
        with self._lock:
            with open(self.root / "events.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.as_dict(), sort_keys=True) + "\n")

    def write_program(self, task_id: str, iteration: int, text: str) -> None:
        suffix = f"_{iteration}" if iteration > 1 else ""
        (self.root / "programs" / f"{task_id}{suffix}.abl").write_text(text)

    def append_persisted(self, label: str, fact: Clause) -> None:
        with self._lock:
            with open(self.root / "persisted" / f"{label}.abl", "a", encoding="utf-8") as fh:
                fh.write(render_clause(fact) + "\n")

    def write_receipt(self, receipt: Mapping[str, object]) -> None:
        with self._lock:
            with open(self.root / "receipts.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(receipt, sort_keys=True) + "\n")

    def write_result(self, result: RunResult) -> None:
        (self.root / "result.json").write_text(json.dumps(result.as_dict(), indent=2, sort_keys=True) + "\n")


@dataclass
class _TaskJobOutput:
    task_id: str
    buffered: List[Tuple[str, dict]] = field(default_factory=list)
    outcome_facts: List[Clause] = field(default_factory=list)
    error: Optional[str] = None


class PersistStore:
    """Collects persist/2 outcomes during a run; appends serialize."""

    def __init__(self, run_store: Optional[RunStore] = None):
        self._lock = threading.Lock()
        self.by_label: Dict[str, List[Clause]] = {}
        self._run_store = run_store

    def append(self, label: str, fact: Clause) -> None:
        with self._lock:
            self.by_label.setdefault(label, []).append(fact)
        if self._run_store:
            self._run_store.append_persisted(label, fact)

    def facts(self, label: Optional[str] = None) -> List[Clause]:
        with self._lock:
            if label is not None:
                return list(self.by_label.get(label, ()))
            return [f for facts in self.by_label.values() for f in facts]


class InitiativeRunner:
    """Owns one run: state transitions happen only on the loop thread;
    API threads read immutable snapshots and feed decisions in through a
    queue."""

    def __init__(
        self,
        spec: InitiativeSpec,
        instructions: Mapping[str, TaskInstruction],
        registry: ToolRegistry,
        fact_set: FactSet,
        config: RunConfig = RunConfig(),
    ):
        self.spec = spec
        self.instructions = dict(instructions)
        self.registry = registry
        self.base_facts = fact_set
        self.config = config
        self.run_id = config.run_id or f"run-{uuid.uuid4().hex[:10]}"
        self.run_store = RunStore(config.out_dir / self.run_id) if config.out_dir else None
        self.events = EventLog(sink=self.run_store.write_event if self.run_store else None)
        self.persist_store = PersistStore(self.run_store)
        self.cache = InvocationCache()
        self.state = ExecutionState.initial(self.run_id, fact_set, spec)
        self.approvals: Dict[str, ApprovalRequest] = {}
        self._approval_lock = threading.Lock()
        self._inbox: "queue.Queue[tuple]" = queue.Queue()
        self._stop = False
        self._finished = threading.Event()
        self.result: Optional[RunResult] = None
        self.programs: Dict[str, str] = {}  # task -> latest rendered program
        self._outcome_sets: List[Tuple[str, FactSet]] = []
        self._rounds = 0

    # -- external surface ------------------------------------------------------

    def submit_approval(self, approval_id: str, decision: str, decider: str = "") -> ApprovalRequest:
        if decision not in ("approved", "rejected"):
            raise ApprovalError(f"decision must be approved or rejected, not {decision!r}")
        with self._approval_lock:
            request = self.approvals.get(approval_id)
            if request is None:
                raise ApprovalError(f"unknown approval {approval_id!r}")
            if request.decision != "pending":
                raise ApprovalError(f"approval {approval_id!r} already {request.decision}")
            request.decision = decision
            request.decider = decider
        self._inbox.put(("approval", approval_id))
        return request

    def inject_facts(self, facts: Sequence[Clause]) -> None:
        self._inbox.put(("facts", tuple(facts)))

    def request_stop(self) -> None:
        self._stop = True
        self._inbox.put(("wake",))

    def wait(self, timeout: Optional[float] = None) -> bool:
        return self._finished.wait(timeout)

    def snapshot(self) -> dict:
        state = self.state
        return {
            "run_id": self.run_id,
            "initiative": self.spec.id,
            "statuses": {t: s.value for t, s in state.task_statuses.items()},
            "rounds": self._rounds,
            "finished": self.result is not None,
            "evaluation": self.result.evaluation if self.result else None,
            "stopped_early": self.result.stopped_early if self.result else False,
        }

    def final_summary(self) -> dict:
        """Statuses plus the full fact base, for replay equality checks."""
        return {
            "statuses": {t: s.value for t, s in self.state.task_statuses.items()},
            "facts": sorted({render_clause(f) for f in self.state.fact_base.facts}),
        }

    # -- the loop ---------------------------------------------------------------

    def run(self) -> RunResult:
        self.events.append(
            "run_started",
            {
                "initiative": self.spec.id,
                "tasks": [t.id for t in self.spec.tasks],
                "auto_approve": self.config.auto_approve,
                "facts_abl": [render_clause(f) for f in self.base_facts.facts],
                "rules_abl": [render_clause(r) for r in self.base_facts.foundational_rules],
            },
        )
        try:
            while not self._stop and self._rounds < self.config.max_rounds:
                self._drain_inbox(block=False)
                ready = sorted(ready_tasks(self.spec, self.state, self.config.limits))
                if not ready:
                    break
                self._rounds += 1
                self._run_round(ready)
        finally:
            if not self._stop:
                # nothing is ready, running, or awaiting: tasks that never
                # became runnable are definitively cancelled, so every task
                # ends in exactly one terminal status
                for task in self.spec.tasks:
                    status = self.state.task_statuses.get(task.id, TaskStatus.PENDING)
                    if status in (TaskStatus.PENDING, TaskStatus.READY):
                        self.state = self.state.set_status(task.id, TaskStatus.CANCELLED)
            evaluation = evaluate_initiative(
                self.spec, self.state, self.config.metric_facts, self.config.limits
            )
            self.events.append(
                "initiative_evaluated",
                {"initiative": self.spec.id, "result": "success" if evaluation.success else "not_success",
                 "bindings": evaluation.bindings},
            )
            statuses = {t: s.value for t, s in self.state.task_statuses.items()}
            self.events.append(
                "run_finished",
                {"statuses": statuses, "rounds": self._rounds, "stopped_early": self._stop},
            )
            self.result = RunResult(
                run_id=self.run_id,
                statuses=statuses,
                evaluation=evaluation.as_dict(),
                rounds=self._rounds,
                stopped_early=self._stop,
            )
            if self.run_store:
                self.run_store.write_result(self.result)
            self._finished.set()
        return self.result

    def _drain_inbox(self, block: bool, timeout: Optional[float] = None) -> List[tuple]:
        messages = []
        try:
            if block:
                messages.append(self._inbox.get(timeout=timeout))
            while True:
                messages.append(self._inbox.get_nowait())
        except queue.Empty:
            pass
        for message in messages:
            if message[0] == "facts":
                self.state = self.state.assert_facts(list(message[1]))
        return messages

    def _run_round(self, ready: List[str]) -> None:
        for task_id in ready:
            self.state = self.state.set_status(task_id, TaskStatus.READY)
            self.events.append("task_ready", {"task": task_id, "round": self._rounds})

        # synthesize + validate + classify, then gate
        approved: List[Tuple[TaskSpec, LogicProgram]] = []
        pending_ids: List[str] = []
        plans: Dict[str, Tuple[TaskSpec, LogicProgram]] = {}
        for task_id in ready:
            task = self.spec.task(task_id)
            self.state = self.state.set_status(task_id, TaskStatus.RUNNING)
            self.state = self.state.bump_iteration(task_id)
            try:
                lp, validation, impact, text = self._synthesize(task)
            except Exception as exc:  # synthesis itself failed
                self.events.append(
                    "task_failed", {"task": task_id, "reason": f"synthesis error: {exc}", "outcome_facts_abl": []}
                )
                self.state = self.state.set_status(task_id, TaskStatus.FAILED)
                continue
            if not validation.ok:
                self.events.append(
                    "task_failed",
                    {
                        "task": task_id,
                        "reason": "program validation failed",
                        "findings": validation.as_dict(),
                        "outcome_facts_abl": [],
                    },
                )
                self.state = self.state.set_status(task_id, TaskStatus.FAILED)
                continue
            plans[task_id] = (task, lp)
            if impact.needs_approval:
                request = ApprovalRequest(
                    id=f"ap-{task_id}-{self.state.iterations.get(task_id, 1)}",
                    task_id=task_id,
                    program_text=text,
                    reasons=impact.reasons,
                )
                with self._approval_lock:
                    self.approvals[request.id] = request
                self.events.append(
                    "approval_requested",
                    {"task": task_id, "approval_id": request.id, "reasons": list(impact.reasons)},
                )
                if self.config.auto_approve:
                    request.decision = "approved"
                    request.decider = "auto_approve"
                    self.events.append(
                        "approval_decided",
                        {"approval_id": request.id, "task": task_id, "decision": "approved",
                         "decider": "auto_approve"},
                    )
                    approved.append(plans[task_id])
                else:
                    self.state = self.state.set_status(task_id, TaskStatus.AWAITING_APPROVAL)
                    pending_ids.append(request.id)
            else:
                approved.append(plans[task_id])

        # park until every approval in this round is decided
        while not self._stop and pending_ids:
            self._drain_inbox(block=True, timeout=0.2)
            still_pending = []
            for approval_id in pending_ids:
                request = self.approvals[approval_id]
                if request.decision == "pending":
                    still_pending.append(approval_id)
                    continue
                self.events.append(
                    "approval_decided",
                    {"approval_id": request.id, "task": request.task_id,
                     "decision": request.decision, "decider": request.decider},
                )
                if request.decision == "approved":
                    self.state = self.state.set_status(request.task_id, TaskStatus.RUNNING)
                    approved.append(plans[request.task_id])
                else:
                    self.state = self.state.set_status(request.task_id, TaskStatus.CANCELLED)
            pending_ids = still_pending
        if self._stop:
            return

        # execute approved tasks concurrently, buffering their events
        approved.sort(key=lambda pair: pair[0].id)
        outputs: Dict[str, _TaskJobOutput] = {}
        if approved:
            with ThreadPoolExecutor(max_workers=max(1, len(approved))) as pool:
                futures = {
                    pool.submit(self._execute_task, task, lp): task.id
                    for task, lp in approved
                }
                for future, task_id in futures.items():
                    outputs[task_id] = future.result()

        for task_id in sorted(outputs):
            output = outputs[task_id]
            for kind, payload in output.buffered:
                self.events.append(kind, payload)
        for task_id in sorted(outputs):
            self._finalize(self.spec.task(task_id), outputs[task_id])

    def _synthesize(self, task: TaskSpec):
        instruction = self.instructions.get(task.instruction)
        if instruction is None:
            raise OrchestratorError(f"no instruction registered for task {task.id!r}")
        prior = [fs for _tid, fs in self._outcome_sets]
        lp = synthesize_program(instruction, self.base_facts, prior, self.registry)
        # outputs declared by finished tasks count as defined even when a
        # prior task legitimately produced zero facts
        upstream: Set[Tuple[str, int]] = {("task_done", 1)}
        for tid, _fs in self._outcome_sets:
            done = self.spec.task(tid)
            done_instruction = self.instructions.get(done.instruction)
            if done_instruction is not None:
                upstream |= done_instruction.declared_outputs()
        validation = validate_program(lp, self.base_facts, self.registry, extra_defined=upstream)
        impact = classify_impact(lp, self.registry, validation)
        text = render_logic_program(lp)
        self.programs[task.id] = text
        iteration = self.state.iterations.get(task.id, 1)
        if self.run_store:
            self.run_store.write_program(task.id, iteration, text)
        self.events.append(
            "program_synthesized",
            {
                "task": task.id,
                "iteration": iteration,
                "program_abl": text,
                "impact": impact.value,
                "validation": validation.as_dict(),
            },
        )
        return lp, validation, impact, text

    # -- per-task execution (worker threads) -------------------------------------

    def _execute_task(self, task: TaskSpec, lp: LogicProgram) -> _TaskJobOutput:
        output = _TaskJobOutput(task_id=task.id)
        try:
            program = self._ground(task, lp, output)
            self._dispatch_actions(task, lp, program, output)
            output.outcome_facts.append(Clause(Compound("task_done", [Atom(task.id)])))
            if self.config.task_delay_s:
                time.sleep(self.config.task_delay_s)
        except Exception as exc:
            output.error = str(exc)
        return output

    def _ground(self, task: TaskSpec, lp: LogicProgram, output: _TaskJobOutput) -> Program:
        """Fetch facts for tool-produced predicates referenced by the task
        rules, extending the program before the solve."""
        program = lp.program
        defined = {self._sig(c.head) for c in program.clauses}
        for rule in program.section(RULES_TAG):
            for literal in rule.body:
                goal = literal.goal
                if not isinstance(goal, Compound):
                    continue
                sig = (goal.functor, len(goal.args))
                if sig in defined:
                    continue
                producer = self.registry.producer_of(*sig)
                if producer is None:
                    continue
                inputs = self._grounding_inputs(program, rule, literal, producer.input_arity)
                facts = ground_predicate(
                    self.registry,
                    goal.functor,
                    len(goal.args),
                    inputs,
                    run_id=self.run_id,
                    task_id=task.id,
                    cache=self.cache,
                )
                output.buffered.append(
                    (
                        "grounding_fetched",
                        {
                            "task": task.id,
                            "predicate": f"{goal.functor}/{len(goal.args)}",
                            "calls": len({tuple(render_term(t) for t in tup) for tup in inputs}),
                            "facts": len(facts),
                            "inputs": sorted({render_term(t) for tup in inputs for t in tup}),
                        },
                    )
                )
                program = program.extended(facts, FACTS_TAG)
                defined.add(sig)
        return program

    @staticmethod
    def _sig(term: Term) -> Tuple[str, int]:
        if isinstance(term, Compound):
            return term.functor, len(term.args)
        return term.name, 0

    def _grounding_inputs(self, program: Program, rule: Clause, literal, input_arity: int):
        """Distinct input tuples for a tool literal, obtained by solving the
        body prefix that precedes it."""
        prefix = []
        for lit in rule.body:
            if lit is literal:
                break
            prefix.append(lit)
        goal = literal.goal
        input_args = list(goal.args[:input_arity]) if input_arity else []
        if not input_args:
            return [()]
        if all(not list(term_vars(a)) for a in input_args):
            return [tuple(input_args)]
        head = Compound("grounding_probe", input_args)
        probe = Clause(head, prefix)
        extended = program.extended([probe], RULES_TAG)
        tuples = []
        for instance in solve_all(head, extended, self.config.limits):
            tuples.append(tuple(instance.args))
        return tuples

    def _dispatch_actions(
        self, task: TaskSpec, lp: LogicProgram, program: Program, output: _TaskJobOutput
    ) -> None:
        """Solve each action clause head and dispatch every distinct ground
        solution (persist/2 appends to the run store; invoke/2 calls the
        tool)."""
        dispatched: Set[str] = set()
        for action in lp.program.section(ACTIONS_TAG):
            for instance in solve_all(action.head, program, self.config.limits):
                key = render_term(instance)
                if key in dispatched:
                    continue
                dispatched.add(key)
                functor = instance.functor
                if functor == "persist":
                    label = render_term(instance.args[0])
                    fact = Clause(instance.args[1])
                    self.persist_store.append(label, fact)
                    output.outcome_facts.append(fact)
                    output.buffered.append(
                        (
                            "action_invoked",
                            {"task": task.id, "tool": "persist", "params_abl": key,
                             "status": "ok", "receipt": {"label": label}},
                        )
                    )
                    continue
                tool_name = render_term(instance.args[0])
                if task.allowed_tools and tool_name not in task.allowed_tools:
                    raise OrchestratorError(
                        f"task {task.id} is not allowed to invoke tool {tool_name!r}"
                    )
                invocation = ToolInvocation(
                    tool=tool_name,
                    params=instance.args[1],
                    run_id=self.run_id,
                    task_id=task.id,
                )
                result = self.registry.invoke(invocation, self.cache)
                receipt = dict(result.receipt)
                if self.run_store:
                    self.run_store.write_receipt(
                        {"task": task.id, "tool": tool_name,
                         "params": render_term(instance.args[1]),
                         "idempotency_key": invocation.idempotency_key,
                         "receipt": receipt}
                    )
                output.buffered.append(
                    (
                        "action_invoked",
                        {"task": task.id, "tool": tool_name,
                         "params_abl": render_term(instance.args[1]),
                         "status": result.status, "receipt": receipt,
                         "idempotency_key": invocation.idempotency_key},
                    )
                )
                if not result.ok:
                    raise OrchestratorError(f"tool {tool_name!r} failed: {receipt}")

    # -- completion ----------------------------------------------------------------

    def _finalize(self, task: TaskSpec, output: _TaskJobOutput) -> None:
        if output.error is not None:
            self.events.append(
                "task_failed",
                {"task": task.id, "reason": output.error, "outcome_facts_abl": []},
            )
            self.state = self.state.set_status(task.id, TaskStatus.FAILED)
            return
        rendered = [render_clause(f) for f in output.outcome_facts]
        self.state = self.state.assert_facts(output.outcome_facts)
        failed_condition = None
        for post in task.postconditions:
            if not self.state.holds(post, self.config.limits):
                failed_condition = post
                break
        iteration = self.state.iterations.get(task.id, 1)
        if failed_condition is not None:
            self.events.append(
                "task_failed",
                {
                    "task": task.id,
                    "reason": "postcondition not derivable",
                    "failed_condition": render_term(failed_condition),
                    "outcome_facts_abl": rendered,
                },
            )
            self.state = self.state.set_status(task.id, TaskStatus.FAILED)
            return
        self._outcome_sets.append(
            (task.id, FactSet(tuple(output.outcome_facts)))
        )
        if task.repeat_until is not None:
            decision = check_repeat(task, self.state, iteration, self.config.limits)
            if decision is RepeatDecision.REACTIVATE:
                self.events.append(
                    "task_completed",
                    {"task": task.id, "iteration": iteration,
                     "disposition": "reactivated", "outcome_facts_abl": rendered},
                )
                self.state = self.state.set_status(task.id, TaskStatus.READY)
                return
            if decision is RepeatDecision.EXHAUSTED:
                self.events.append(
                    "task_completed",
                    {"task": task.id, "iteration": iteration,
                     "disposition": "exhausted", "outcome_facts_abl": rendered},
                )
                self.state = self.state.set_status(task.id, TaskStatus.EXHAUSTED)
                return
        self.events.append(
            "task_completed",
            {"task": task.id, "iteration": iteration,
             "disposition": "completed", "outcome_facts_abl": rendered},
        )
        self.state = self.state.set_status(task.id, TaskStatus.COMPLETED)


def run_initiative(
    spec: InitiativeSpec,
    instructions: Mapping[str, TaskInstruction],
    registry: ToolRegistry,
    fact_set: FactSet,
    config: RunConfig = RunConfig(),
) -> Tuple[RunResult, List[Event]]:
    """Validate, run to completion, and return the result with its log."""
    report = validate_initiative(
        spec,
        fact_predicates=fact_set.fact_predicates(),
        tool_predicates=registry.grounded_predicates(),
    )
    if not report.ok:
        raise OrchestratorError(
            "initiative failed validation: "
            + "; ".join(f.message for f in report.errors)
        )
    runner = InitiativeRunner(spec, instructions, registry, fact_set, config)
    result = runner.run()
    return result, runner.events.events()


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


@dataclass
class ReplayedState:
    statuses: Dict[str, str] = field(default_factory=dict)
    facts: List[str] = field(default_factory=list)
    evaluation: Optional[dict] = None
    finished: bool = False
    recorded_statuses: Optional[Dict[str, str]] = None

    def summary(self) -> dict:
        return {"statuses": dict(self.statuses), "facts": sorted(set(self.facts))}


def replay(events: Sequence) -> ReplayedState:
    """Reconstruct the final run state from the event log alone.

    Task statuses are rebuilt from per-task events (never read from the
    run_finished payload, which is kept only for cross-checking), and the
    fact base from the initial facts plus every task's asserted outcomes.
    """
    state = ReplayedState()
    expected_seq = 1
    for raw in events:
        event = raw.as_dict() if isinstance(raw, Event) else dict(raw)
        seq = event.get("seq")
        if seq != expected_seq:
            raise ReplayError(f"event log gap: expected seq {expected_seq}, found {seq}")
        expected_seq += 1
        kind = event.get("kind")
        if kind not in EVENT_KINDS:
            raise ReplayError(f"unknown event kind {kind!r} at seq {seq}")
        payload = event.get("payload", {})
        if kind == "run_started":
            for task_id in payload.get("tasks", ()):
                state.statuses[task_id] = TaskStatus.PENDING.value
            state.facts.extend(payload.get("facts_abl", ()))
        elif kind == "task_ready":
            state.statuses[payload["task"]] = TaskStatus.READY.value
        elif kind == "program_synthesized":
            state.statuses[payload["task"]] = TaskStatus.RUNNING.value
        elif kind == "approval_requested":
            state.statuses[payload["task"]] = TaskStatus.AWAITING_APPROVAL.value
        elif kind == "approval_decided":
            if payload["decision"] == "approved":
                state.statuses[payload["task"]] = TaskStatus.RUNNING.value
            else:
                state.statuses[payload["task"]] = TaskStatus.CANCELLED.value
        elif kind == "task_completed":
            state.facts.extend(payload.get("outcome_facts_abl", ()))
            disposition = payload.get("disposition", "completed")
            if disposition == "reactivated":
                state.statuses[payload["task"]] = TaskStatus.READY.value
            elif disposition == "exhausted":
                state.statuses[payload["task"]] = TaskStatus.EXHAUSTED.value
            else:
                state.statuses[payload["task"]] = TaskStatus.COMPLETED.value
        elif kind == "task_failed":
            state.facts.extend(payload.get("outcome_facts_abl", ()))
            state.statuses[payload["task"]] = TaskStatus.FAILED.value
        elif kind == "initiative_evaluated":
            state.evaluation = {"result": payload.get("result"), "bindings": payload.get("bindings")}
        elif kind == "run_finished":
            state.finished = True
            state.recorded_statuses = dict(payload.get("statuses", {}))
            if not payload.get("stopped_early"):
                # mirror the runner: a completed run cancels whatever never ran
                for task_id, status in state.statuses.items():
                    if status in (TaskStatus.PENDING.value, TaskStatus.READY.value):
                        state.statuses[task_id] = TaskStatus.CANCELLED.value
    return state


def load_events(path: Path) -> List[dict]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                events.append(json.loads(line))
    return events
