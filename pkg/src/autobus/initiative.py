"""Initiative and task model: readiness, completion, repeats, evaluation.

An initiative is a set of tasks gated by preconditions. A task is ready
when every precondition is derivable against the current state snapshot;
completing a task asserts its outcome facts into a new snapshot and then
verifies the postconditions against it (assert-then-verify, so a task
whose outcomes do not establish its postconditions is marked failed, not
silently completed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from autobus.logic import (
    Atom,
    Clause,
    Compound,
    Program,
    SolveLimits,
    Substitution,
    Term,
    functor_arity,
    is_derivable,
    is_ground,
    parse_program,
    parse_term,
    render_clause,
    render_term,
    solve,
)
from autobus.logic.clauses import FACTS, RULES
from autobus.logic.errors import LogicError
from autobus.semantics import FactSet


class TaskStatus(str, Enum):
    PENDING = "pending"
    READY = "ready"
    RUNNING = "running"
    AWAITING_APPROVAL = "awaiting_approval"
    COMPLETED = "completed"
    FAILED = "failed"
    EXHAUSTED = "exhausted"
    CANCELLED = "cancelled"


TERMINAL_STATUSES = {
    TaskStatus.COMPLETED,
    TaskStatus.FAILED,
    TaskStatus.EXHAUSTED,
    TaskStatus.CANCELLED,
}

# status -> statuses it may legally move to
_TRANSITIONS: Dict[TaskStatus, Set[TaskStatus]] = {
    TaskStatus.PENDING: {TaskStatus.READY, TaskStatus.CANCELLED},
    TaskStatus.READY: {TaskStatus.RUNNING, TaskStatus.CANCELLED},
    TaskStatus.RUNNING: {
        TaskStatus.AWAITING_APPROVAL,
        TaskStatus.COMPLETED,
        TaskStatus.FAILED,
        TaskStatus.EXHAUSTED,
        TaskStatus.READY,  # repeat_until loops back
        TaskStatus.CANCELLED,
    },
    TaskStatus.AWAITING_APPROVAL: {TaskStatus.RUNNING, TaskStatus.CANCELLED},
}


class InitiativeError(Exception):
    pass


class NongroundOutcomeError(InitiativeError):
    def __init__(self, fact: Clause):
        super().__init__(f"outcome fact is not ground: {render_clause(fact)}")


class IllegalTransitionError(InitiativeError):
    def __init__(self, task_id: str, src: TaskStatus, dst: TaskStatus):
        super().__init__(f"task {task_id}: illegal transition {src.value} -> {dst.value}")


@dataclass(frozen=True)
class TaskSpec:
    id: str
    instruction: str  # key into the instruction set
    requires: Tuple[Term, ...] = ()
    preconditions: Tuple[Term, ...] = ()
    postconditions: Tuple[Term, ...] = ()
    allowed_tools: Tuple[str, ...] = ()
    repeat_until: Optional[Term] = None
    max_iterations: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InitiativeError(f"task {self.id}: max_iterations must be >= 1")


@dataclass(frozen=True)
class InitiativeSpec:
    id: str
    tasks: Tuple[TaskSpec, ...]
    evaluation_rules: Tuple[Clause, ...] = ()
    metrics_inputs: Tuple[Term, ...] = ()
    name: str = ""

    def task(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise InitiativeError(f"unknown task {task_id!r}")


def load_initiative(source: Union[str, Path, Mapping]) -> InitiativeSpec:
    """Read an initiative from its JSON document.

    Condition strings and evaluation rules are ABL text; see the fixtures
    directory for a complete example.
    """
    if isinstance(source, Mapping):
        doc = source
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        doc = json.loads(source)
    else:
        doc = json.loads(Path(source).read_text())
    tasks = []
    for t in doc.get("tasks", ()):
        tasks.append(
            TaskSpec(
                id=t["id"],
                instruction=t.get("instruction", t["id"]),
                requires=tuple(parse_term(s) for s in t.get("requires", ())),
                preconditions=tuple(parse_term(s) for s in t.get("preconditions", ())),
                postconditions=tuple(parse_term(s) for s in t.get("postconditions", ())),
                allowed_tools=tuple(t.get("allowed_tools", ())),
                repeat_until=parse_term(t["repeat_until"]) if t.get("repeat_until") else None,
                max_iterations=int(t.get("max_iterations", 1)),
            )
        )
    rules_text = doc.get("evaluation_rules", "")
    rules = parse_program(rules_text).clauses if rules_text else ()
    return InitiativeSpec(
        id=doc["id"],
        tasks=tuple(tasks),
        evaluation_rules=tuple(rules),
        metrics_inputs=tuple(parse_term(s) for s in doc.get("metrics_inputs", ())),
        name=doc.get("name", ""),
    )


# ---------------------------------------------------------------------------
# Execution state snapshots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExecutionState:
    """Immutable view of a run: fact snapshot plus task bookkeeping.

    ``snapshot_id`` increments only when facts are asserted; status
    changes produce a new state object sharing the snapshot. The derived
    Program (facts + foundational rules + evaluation rules) is cached per
    snapshot so repeated readiness checks do not rebuild the index.
    """

    run_id: str
    snapshot_id: int
    fact_base: FactSet
    extra_rules: Tuple[Clause, ...] = ()
    task_statuses: Mapping[str, TaskStatus] = field(default_factory=dict)
    iterations: Mapping[str, int] = field(default_factory=dict)
    _program_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def initial(
        cls,
        run_id: str,
        fact_base: FactSet,
        spec: Optional[InitiativeSpec] = None,
    ) -> "ExecutionState":
        statuses = {t.id: TaskStatus.PENDING for t in spec.tasks} if spec else {}
        extra = spec.evaluation_rules if spec else ()
        return cls(
            run_id=run_id,
            snapshot_id=0,
            fact_base=fact_base,
            extra_rules=tuple(extra),
            task_statuses=statuses,
            iterations={t.id: 0 for t in spec.tasks} if spec else {},
        )

    def program(self) -> Program:
        cached = self._program_cache.get("program")
        if cached is None:
            cached = Program.from_sections(
                facts=self.fact_base.facts,
                rules=tuple(self.fact_base.foundational_rules) + self.extra_rules,
            )
            self._program_cache["program"] = cached
        return cached

    def holds(self, condition: Term, limits: SolveLimits = SolveLimits()) -> bool:
        """Derivability of a condition against this snapshot's fact base."""
        return is_derivable(condition, self.program(), limits)

    def assert_facts(self, outcome_facts: Sequence[Clause]) -> "ExecutionState":
        """New snapshot with the outcome facts added (set semantics:
        re-asserting a fact already present changes nothing)."""
        for fact in outcome_facts:
            if not fact.is_fact or not fact.is_ground:
                raise NongroundOutcomeError(fact)
        present = set(self.fact_base.facts)
        fresh = []
        for fact in outcome_facts:
            if fact not in present:
                present.add(fact)
                fresh.append(fact)
        new_facts = FactSet(
            self.fact_base.facts + tuple(fresh),
            self.fact_base.foundational_rules,
        )
        return replace(
            self,
            snapshot_id=self.snapshot_id + 1,
            fact_base=new_facts,
            _program_cache={},
        )

    def set_status(self, task_id: str, status: TaskStatus) -> "ExecutionState":
        current = self.task_statuses.get(task_id, TaskStatus.PENDING)
        if status != current and status not in _TRANSITIONS.get(current, set()):
            raise IllegalTransitionError(task_id, current, status)
        statuses = dict(self.task_statuses)
        statuses[task_id] = status
        return replace(self, task_statuses=statuses, _program_cache=self._program_cache)

    def bump_iteration(self, task_id: str) -> "ExecutionState":
        iterations = dict(self.iterations)
        iterations[task_id] = iterations.get(task_id, 0) + 1
        return replace(self, iterations=iterations, _program_cache=self._program_cache)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass
class Finding:
    code: str
    message: str
    task_id: Optional[str] = None

    def as_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "task": self.task_id}


@dataclass
class ValidationReport:
    errors: List[Finding] = field(default_factory=list)
    warnings: List[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def as_dict(self) -> dict:
        return {
            "errors": [f.as_dict() for f in self.errors],
            "warnings": [f.as_dict() for f in self.warnings],
        }


def validate_initiative(
    spec: InitiativeSpec,
    fact_predicates: Optional[Set[Tuple[str, int]]] = None,
    tool_predicates: Optional[Set[Tuple[str, int]]] = None,
) -> ValidationReport:
    """Static checks on an initiative.

    ``fact_predicates`` and ``tool_predicates`` supply context (what the
    semantics layer and the tool catalog can produce); without them the
    dangling-predicate and requires checks are skipped.
    """
    report = ValidationReport()
    seen_ids: Set[str] = set()
    for task in spec.tasks:
        if task.id in seen_ids:
            report.errors.append(
                Finding("duplicate_task_id", f"task id {task.id!r} declared twice", task.id)
            )
        seen_ids.add(task.id)

    produced: Set[Tuple[str, int]] = set()
    for task in spec.tasks:
        for post in task.postconditions:
            try:
                produced.add(functor_arity(post))
            except TypeError:
                report.errors.append(
                    Finding("bad_condition", f"postcondition is not callable: {render_term(post)}", task.id)
                )

    known = set(produced)
    if fact_predicates is not None:
        known |= fact_predicates
    if tool_predicates is not None:
        known |= tool_predicates

    for task in spec.tasks:
        for pre in task.preconditions:
            try:
                sig = functor_arity(pre)
            except TypeError:
                report.errors.append(
                    Finding("bad_condition", f"precondition is not callable: {render_term(pre)}", task.id)
                )
                continue
            if fact_predicates is not None and sig not in known:
                report.errors.append(
                    Finding(
                        "dangling_precondition",
                        f"precondition {render_term(pre)} is produced by no task, fact, or tool",
                        task.id,
                    )
                )
        if fact_predicates is not None:
            for req in task.requires:
                sig = functor_arity(req)
                if sig not in known:
                    report.errors.append(
                        Finding(
                            "missing_required_data",
                            f"required data {render_term(req)} has no fact or producing tool",
                            task.id,
                        )
                    )

    _check_cycles(spec, report)
    _check_reachability(spec, fact_predicates, report)
    return report


def _producers_consumers(spec: InitiativeSpec) -> List[Tuple[str, str]]:
    """Edges producer-task -> consumer-task via postcondition/precondition
    predicate overlap."""
    post_map: Dict[Tuple[str, int], List[str]] = {}
    for task in spec.tasks:
        for post in task.postconditions:
            try:
                post_map.setdefault(functor_arity(post), []).append(task.id)
            except TypeError:
                continue
    edges = []
    for task in spec.tasks:
        for pre in task.preconditions:
            try:
                sig = functor_arity(pre)
            except TypeError:
                continue
            for producer in post_map.get(sig, ()):
                if producer != task.id:
                    edges.append((producer, task.id))
    return edges


def _check_cycles(spec: InitiativeSpec, report: ValidationReport) -> None:
    edges = _producers_consumers(spec)
    adjacency: Dict[str, List[str]] = {}
    for src, dst in edges:
        adjacency.setdefault(src, []).append(dst)
    looped = {t.id for t in spec.tasks if t.repeat_until is not None}
    state: Dict[str, int] = {}

    def visit(node: str, path: List[str]) -> None:
        state[node] = 1
        for nxt in adjacency.get(node, ()):
            if state.get(nxt) == 1:
                cycle = path[path.index(nxt):] + [nxt] if nxt in path else [node, nxt]
                if not any(t in looped for t in cycle):
                    report.errors.append(
                        Finding(
                            "condition_cycle",
                            "pre/postcondition cycle without repeat_until: " + " -> ".join(cycle),
                        )
                    )
            elif state.get(nxt) != 2:
                visit(nxt, path + [nxt])
        state[node] = 2

    for task in spec.tasks:
        if state.get(task.id) is None:
            visit(task.id, [task.id])


def _check_reachability(
    spec: InitiativeSpec,
    fact_predicates: Optional[Set[Tuple[str, int]]],
    report: ValidationReport,
) -> None:
    """Warn about tasks that can never become ready: every precondition
    predicate must be reachable from facts/tools or another task."""
    if fact_predicates is None:
        return
    edges = _producers_consumers(spec)
    incoming: Dict[str, Set[str]] = {t.id: set() for t in spec.tasks}
    for src, dst in edges:
        incoming[dst].add(src)
    satisfiable = set()
    changed = True
    while changed:
        changed = False
        for task in spec.tasks:
            if task.id in satisfiable:
                continue
            ok = True
            for pre in task.preconditions:
                try:
                    sig = functor_arity(pre)
                except TypeError:
                    ok = False
                    break
                if sig in fact_predicates:
                    continue
                producers = [
                    p.id
                    for p in spec.tasks
                    if p.id != task.id
                    and any(
                        _safe_sig(post) == sig for post in p.postconditions
                    )
                ]
                if not producers or not any(p in satisfiable for p in producers):
                    ok = False
                    break
            if ok:
                satisfiable.add(task.id)
                changed = True
    for task in spec.tasks:
        if task.id not in satisfiable:
            report.warnings.append(
                Finding("unreachable_task", f"task {task.id!r} can never become ready", task.id)
            )


def _safe_sig(term: Term) -> Optional[Tuple[str, int]]:
    try:
        return functor_arity(term)
    except TypeError:
        return None


# ---------------------------------------------------------------------------
# Readiness / completion / repeat / evaluation
# ---------------------------------------------------------------------------


def ready_tasks(
    spec: InitiativeSpec,
    state: ExecutionState,
    limits: SolveLimits = SolveLimits(),
) -> Set[str]:
    """Ids of tasks whose preconditions all hold and that are not yet
    running or finished. Pure in (spec, snapshot): no side effects."""
    ready: Set[str] = set()
    for task in spec.tasks:
        status = state.task_statuses.get(task.id, TaskStatus.PENDING)
        if status not in (TaskStatus.PENDING, TaskStatus.READY):
            continue
        try:
            if all(state.holds(pre, limits) for pre in task.preconditions):
                ready.add(task.id)
        except LogicError as exc:
            raise InitiativeError(f"task {task.id}: precondition check failed: {exc}") from exc
    return ready


@dataclass(frozen=True)
class CompletionResult:
    state: ExecutionState
    completed: bool
    failed_condition: Optional[Term] = None


def complete_task(
    spec: TaskSpec,
    state: ExecutionState,
    outcome_facts: Sequence[Clause],
    limits: SolveLimits = SolveLimits(),
) -> CompletionResult:
    """Assert outcomes, then verify postconditions against the new
    snapshot. Marks the task completed, or failed naming the first
    underivable postcondition."""
    new_state = state.assert_facts(outcome_facts)
    for post in spec.postconditions:
        if not new_state.holds(post, limits):
            return CompletionResult(
                state=new_state.set_status(spec.id, TaskStatus.FAILED),
                completed=False,
                failed_condition=post,
            )
    return CompletionResult(
        state=new_state.set_status(spec.id, TaskStatus.COMPLETED),
        completed=True,
    )


class RepeatDecision(str, Enum):
    STOP = "stop"
    REACTIVATE = "reactivate"
    EXHAUSTED = "exhausted"


def check_repeat(
    spec: TaskSpec,
    state: ExecutionState,
    iteration: int,
    limits: SolveLimits = SolveLimits(),
) -> RepeatDecision:
    """stop when the goal is derivable; otherwise loop until the
    iteration bound is spent."""
    if spec.repeat_until is None:
        raise InitiativeError(f"task {spec.id} has no repeat_until goal")
    if state.holds(spec.repeat_until, limits):
        return RepeatDecision.STOP
    if iteration < spec.max_iterations:
        return RepeatDecision.REACTIVATE
    return RepeatDecision.EXHAUSTED


@dataclass(frozen=True)
class EvaluationResult:
    success: bool
    bindings: Dict[str, object]

    def as_dict(self) -> dict:
        return {"success": self.success, "bindings": dict(self.bindings)}


def evaluate_initiative(
    spec: InitiativeSpec,
    state: ExecutionState,
    metric_facts: Sequence[Clause] = (),
    limits: SolveLimits = SolveLimits(),
) -> EvaluationResult:
    """Solve ``success(<initiative id>)`` over the snapshot plus the
    initiative's evaluation rules and any injected metric facts; metric
    input terms are re-queried to surface their bindings (e.g. Score)."""
    eval_state = state.assert_facts(metric_facts) if metric_facts else state
    goal = Compound("success", [Atom(spec.id)])
    success = eval_state.holds(goal, limits)
    bindings: Dict[str, object] = {}
    for metric in spec.metrics_inputs:
        for solution in solve(metric, eval_state.program(), SolveLimits(limits.max_depth, 1)):
            for key, value in solution.items():
                bindings[key] = _plain_value(value)
    return EvaluationResult(success=success, bindings=bindings)


def _plain_value(term: Term) -> object:
    from autobus.logic import Num, Str

    if isinstance(term, Num):
        return term.value
    if isinstance(term, Str):
        return term.value
    return render_term(term)
