"""Task program synthesis: instruction -> three-section logic program.

The shipped agent is a deterministic template compiler over structured
instructions (the AgentAdapter protocol keeps a remote model pluggable).
Given the same instruction, fact set, prior outcomes, and catalog it
produces a byte-identical program:

  facts section    relevant facts (predicates reachable from the target
                   rule body, transitively through foundational rules),
                   the reachable foundational rules, prior task outcomes
  rules section    one defining clause for the target predicate: join
                   literals first, then filter literals, in declared order
  actions section  one invoke/2 or persist/2 clause per action binding,
                   guarded by the target predicate

Programs are validated for closure (every predicate used is defined by a
fact, rule, prior outcome, or registered grounding tool) and classified
for impact: anything invoking a high-impact tool, or carrying validation
warnings, needs a human decision before it runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Set, Tuple, Union

from autobus.logic import (
    ACTIONS,
    FACTS,
    RULES,
    Atom,
    Clause,
    Compound,
    Literal,
    Num,
    Program,
    Term,
    Var,
    is_atom_name,
    parse_term,
    render_clause,
    render_term,
    term_vars,
    unsafe_negation_var,
)
from autobus.logic.clauses import SECTION_NAMES
from autobus.logic.engine import COMPARATORS
from autobus.semantics import FactSet
from autobus.tools import ToolRegistry

ACTION_HEADS = ("invoke", "persist")


class SynthesisError(Exception):
    pass


@dataclass(frozen=True)
class FilterDecl:
    """One attribute filter: ``predicate(on, V), V op value``.

    ``op`` "eq" inlines the value into the attribute literal
    (``sub_product(S, product1)``); comparison ops introduce a fresh value
    variable and a comparison goal. ``value`` may be a number, an
    atom-shaped string, or ``{"var": name}`` referencing a variable bound
    by a join. ``var_name`` overrides the generated value-variable name.
    """

    predicate: str
    on: str
    op: str
    value: object
    var_name: str = ""

    def __post_init__(self):
        if self.op != "eq" and self.op not in COMPARATORS:
            raise SynthesisError(f"unknown filter op {self.op!r}")


@dataclass(frozen=True)
class ActionBinding:
    tool: str
    params: Term


@dataclass(frozen=True)
class TaskInstruction:
    task_id: str
    goal_text: str
    target: Term  # e.g. savable_churn(C)
    joins: Tuple[Term, ...] = ()
    filters: Tuple[FilterDecl, ...] = ()
    actions: Tuple[ActionBinding, ...] = ()

    @property
    def target_signature(self) -> Tuple[str, int]:
        if isinstance(self.target, Compound):
            return self.target.functor, len(self.target.args)
        return self.target.name, 0

    def declared_outputs(self) -> Set[Tuple[str, int]]:
        """Predicates this task will assert when it completes (persisted
        action params), whether or not any instance materializes."""
        out: Set[Tuple[str, int]] = set()
        for binding in self.actions:
            if binding.tool == "persist" and isinstance(binding.params, (Atom, Compound)):
                out.add(_head_predicate(binding.params))
        return out


def load_instructions(
    source: Union[str, Path, Mapping],
    params: Optional[Mapping[str, object]] = None,
) -> Dict[str, TaskInstruction]:
    """Read the instruction set from JSON, resolving ``{"param": name}``
    filter values against the shared params document."""
    if isinstance(source, Mapping):
        doc = source
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        doc = json.loads(source)
    else:
        doc = json.loads(Path(source).read_text())
    params = params or {}
    out: Dict[str, TaskInstruction] = {}
    for task_id, spec in doc.items():
        filters = []
        for f in spec.get("filters", ()):
            value = f["value"]
            if isinstance(value, Mapping) and "param" in value:
                try:
                    value = params[value["param"]]
                except KeyError:
                    raise SynthesisError(
                        f"instruction {task_id!r}: unknown param {value['param']!r}"
                    ) from None
            elif isinstance(value, Mapping) and "var" in value:
                value = {"var": value["var"]}
            filters.append(
                FilterDecl(
                    predicate=f["predicate"],
                    on=f["on"],
                    op=f.get("op", "eq"),
                    value=value,
                    var_name=f.get("as", ""),
                )
            )
        out[task_id] = TaskInstruction(
            task_id=task_id,
            goal_text=spec.get("goal_text", ""),
            target=parse_term(spec["target"]),
            joins=tuple(parse_term(j) for j in spec.get("joins", ())),
            filters=tuple(filters),
            actions=tuple(
                ActionBinding(tool=a["tool"], params=parse_term(a["params"]))
                for a in spec.get("actions", ())
            ),
        )
    return out


# ---------------------------------------------------------------------------
# The synthesized artifact
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogicProgram:
    program: Program
    provenance: Mapping[Clause, str] = field(default_factory=dict)
    task_id: str = ""

    def actions(self) -> Tuple[Clause, ...]:
        return self.program.section(ACTIONS)

    def invoked_tools(self) -> List[str]:
        tools = []
        for clause in self.actions():
            head = clause.head
            if isinstance(head, Compound) and head.functor == "invoke":
                tools.append(render_term(head.args[0]))
        return tools


@dataclass
class ProgramFinding:
    code: str
    message: str
    clause: Optional[str] = None

    def as_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "clause": self.clause}


@dataclass
class ProgramValidation:
    errors: List[ProgramFinding] = field(default_factory=list)
    warnings: List[ProgramFinding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def as_dict(self) -> dict:
        return {
            "errors": [f.as_dict() for f in self.errors],
            "warnings": [f.as_dict() for f in self.warnings],
        }


@dataclass(frozen=True)
class ImpactClass:
    value: str  # auto_approve | needs_human_approval
    reasons: Tuple[str, ...] = ()

    @property
    def needs_approval(self) -> bool:
        return self.value == "needs_human_approval"


class AgentAdapter(Protocol):
    """Anything that can turn an instruction plus context into a program."""

    def synthesize(
        self,
        instruction: TaskInstruction,
        facts: FactSet,
        prior_outcomes: Sequence[FactSet],
        catalog: ToolRegistry,
    ) -> LogicProgram:
        ...


# ---------------------------------------------------------------------------
# Template agent
# ---------------------------------------------------------------------------


def _value_var_name(filter_decl: FilterDecl, used: Set[str]) -> str:
    if filter_decl.var_name:
        return filter_decl.var_name
    base = "".join(p.capitalize() for p in filter_decl.predicate.split("_"))
    name = base
    n = 1
    while name in used:
        n += 1
        name = f"{base}{n}"
    return name


def _filter_literals(filters: Sequence[FilterDecl], used_vars: Set[str]) -> List[Literal]:
    literals: List[Literal] = []
    for f in filters:
        subject = Var(f.on)
        if f.op == "eq":
            literals.append(Literal(Compound(f.predicate, [subject, _const_term(f.value)])))
            continue
        var_name = _value_var_name(f, used_vars)
        used_vars.add(var_name)
        value_var = Var(var_name)
        literals.append(Literal(Compound(f.predicate, [subject, value_var])))
        literals.append(Literal(Compound(f.op, [value_var, _const_term(f.value)])))
    return literals


def _const_term(value: object) -> Term:
    if isinstance(value, Mapping) and "var" in value:
        return Var(str(value["var"]))
    if isinstance(value, bool):
        raise SynthesisError("boolean filter values are not supported")
    if isinstance(value, (int, float)):
        return Num(value)
    text = str(value)
    if is_atom_name(text):
        return Atom(text)
    from autobus.logic import Str

    return Str(text)


def _head_predicate(term: Term) -> Tuple[str, int]:
    if isinstance(term, Compound):
        return term.functor, len(term.args)
    if isinstance(term, Atom):
        return term.name, 0
    raise SynthesisError(f"not a predicate term: {render_term(term)}")


def _goal_predicates(clause_body: Sequence[Literal]) -> Set[Tuple[str, int]]:
    out = set()
    for lit in clause_body:
        goal = lit.goal
        if isinstance(goal, Compound):
            if goal.functor in COMPARATORS or goal.functor in ("findall",):
                continue
            out.add((goal.functor, len(goal.args)))
        else:
            out.add((goal.name, 0))
    return out


def _reachable(
    roots: Set[Tuple[str, int]],
    foundational: Sequence[Clause],
) -> Tuple[Set[Tuple[str, int]], List[Clause]]:
    """Close predicate reachability over foundational rules; returns the
    reachable predicate set and the rules pulled in (in declaration order)."""
    reached = set(roots)
    used_rules: List[Clause] = []
    changed = True
    while changed:
        changed = False
        for rule in foundational:
            sig = _head_predicate(rule.head)
            if sig in reached and rule not in used_rules:
                used_rules.append(rule)
                for dep in _goal_predicates(rule.body):
                    if dep not in reached:
                        reached.add(dep)
                changed = True
    ordered = [r for r in foundational if r in used_rules]
    return reached, ordered


class TemplateAgent:
    """Deterministic instruction compiler (no model calls)."""

    def synthesize(
        self,
        instruction: TaskInstruction,
        facts: FactSet,
        prior_outcomes: Sequence[FactSet] = (),
        catalog: Optional[ToolRegistry] = None,
    ) -> LogicProgram:
        used_vars = {v.name for j in instruction.joins for v in term_vars(j)}
        used_vars |= {v.name for v in term_vars(instruction.target)}

        body: List[Literal] = []
        for join in instruction.joins:
            if not isinstance(join, (Atom, Compound)):
                raise SynthesisError(f"join is not callable: {render_term(join)}")
            body.append(Literal(join))
        body.extend(_filter_literals(instruction.filters, used_vars))
        target_rule = Clause(instruction.target, body)

        roots = _goal_predicates(target_rule.body)
        reached, foundational_rules = _reachable(roots, facts.foundational_rules)

        relevant_facts: List[Clause] = []
        provenance: Dict[Clause, str] = {}
        for fact in facts.facts:
            if _head_predicate(fact.head) in reached:
                relevant_facts.append(fact)
                provenance[fact] = "semantics"
        for i, outcome in enumerate(prior_outcomes):
            for fact in outcome.facts:
                if fact not in provenance:
                    relevant_facts.append(fact)
                    provenance[fact] = f"prior_task({i + 1})"
        for rule in foundational_rules:
            provenance[rule] = "semantics"
        provenance[target_rule] = "instruction"

        action_clauses: List[Clause] = []
        guard = Literal(instruction.target)
        for binding in instruction.actions:
            if binding.tool == "persist":
                head: Term = Compound(
                    "persist", [Atom(_store_label(instruction)), binding.params]
                )
            else:
                head = Compound("invoke", [Atom(binding.tool), binding.params])
            action = Clause(head, [guard])
            action_clauses.append(action)
            provenance[action] = "tool_grounding"

        program = Program.from_sections(
            facts=tuple(relevant_facts) + tuple(foundational_rules),
            rules=(target_rule,),
            actions=tuple(action_clauses),
        )
        return LogicProgram(program=program, provenance=provenance, task_id=instruction.task_id)


def _store_label(instruction: TaskInstruction) -> str:
    return f"{instruction.task_id}_outcomes"


def synthesize_program(
    instruction: TaskInstruction,
    facts: FactSet,
    prior_outcomes: Sequence[FactSet] = (),
    catalog: Optional[ToolRegistry] = None,
    agent: Optional[AgentAdapter] = None,
) -> LogicProgram:
    agent = agent or TemplateAgent()
    return agent.synthesize(instruction, facts, prior_outcomes, catalog)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_program(
    lp: LogicProgram,
    facts: Optional[FactSet] = None,
    catalog: Optional[ToolRegistry] = None,
    extra_defined: Optional[Set[Tuple[str, int]]] = None,
) -> ProgramValidation:
    """Closure and shape checks on a synthesized (or parsed) program.

    Errors: body predicates defined nowhere (facts partition, rules,
    grounding tools), unsafe negation, actions invoking unregistered
    tools, nonground non-rule clauses in the facts partition. Warnings:
    rules unreachable from any action clause.

    ``extra_defined`` names predicates known to be produced upstream (a
    prior task's declared outputs) even when that task emitted no facts.
    """
    report = ProgramValidation()
    program = lp.program

    defined: Set[Tuple[str, int]] = set(extra_defined or ())
    for clause in program.clauses:
        defined.add(_head_predicate(clause.head))
    if facts is not None:
        for fact in facts.facts:
            defined.add(_head_predicate(fact.head))
        for rule in facts.foundational_rules:
            defined.add(_head_predicate(rule.head))
    tool_preds = catalog.grounded_predicates() if catalog is not None else set()

    for clause in program.clauses:
        bad = unsafe_negation_var(clause)
        if bad is not None:
            report.errors.append(
                ProgramFinding(
                    "unsafe_negation",
                    f"variable {bad.name!r} is unbound under negation",
                    render_clause(clause),
                )
            )
        for sig in _goal_predicates(clause.body):
            if sig not in defined and sig not in tool_preds:
                report.errors.append(
                    ProgramFinding(
                        "undefined_predicate",
                        f"predicate {sig[0]}/{sig[1]} is defined by no fact, rule, or tool",
                        render_clause(clause),
                    )
                )

    for start, end in program.partitions.get(FACTS, ()):
        for clause in program.clauses[start:end]:
            if clause.is_fact and not clause.is_ground:
                report.errors.append(
                    ProgramFinding(
                        "nonground_fact",
                        "facts partition holds a nonground fact",
                        render_clause(clause),
                    )
                )

    action_roots: Set[Tuple[str, int]] = set()
    for clause in program.section(ACTIONS):
        head = clause.head
        if not isinstance(head, Compound) or head.functor not in ACTION_HEADS or len(head.args) != 2:
            report.errors.append(
                ProgramFinding(
                    "bad_action_head",
                    "action clause heads must be invoke/2 or persist/2",
                    render_clause(clause),
                )
            )
            continue
        action_roots |= _goal_predicates(clause.body)
        if head.functor == "invoke" and catalog is not None:
            tool_name = render_term(head.args[0])
            if tool_name not in catalog:
                report.errors.append(
                    ProgramFinding(
                        "unregistered_tool",
                        f"action invokes unregistered tool {tool_name!r}",
                        render_clause(clause),
                    )
                )

    reachable, _rules = _reachable(action_roots, program.section(RULES))
    for clause in program.section(RULES):
        if _head_predicate(clause.head) not in reachable:
            report.warnings.append(
                ProgramFinding(
                    "unreachable_rule",
                    f"rule head {render_term(clause.head)} is referenced by no action",
                    render_clause(clause),
                )
            )
    return report


def classify_impact(
    lp: LogicProgram,
    catalog: ToolRegistry,
    validation: Optional[ProgramValidation] = None,
) -> ImpactClass:
    """needs_human_approval when any invoked tool is high-impact or the
    program validated with warnings; reasons list every trigger."""
    reasons: List[str] = []
    for tool_name in lp.invoked_tools():
        if tool_name in catalog and catalog.descriptor(tool_name).high_impact:
            reasons.append(f"invokes high-impact tool {tool_name!r}")
    if validation is not None:
        for warning in validation.warnings:
            reasons.append(f"validation warning: {warning.message}")
    if reasons:
        return ImpactClass("needs_human_approval", tuple(reasons))
    return ImpactClass("auto_approve")


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render_logic_program(lp: LogicProgram) -> str:
    """ABL text with all three section markers and a provenance comment
    ahead of each clause group; parses back to an equal Program.

    Assumes the canonical facts/rules/actions clause layout that
    TemplateAgent produces.
    """
    lines: List[str] = []
    for tag in (FACTS, RULES, ACTIONS):
        lines.append(f"% SECTION: {SECTION_NAMES[tag]}")
        last_origin = None
        for clause in lp.program.section(tag):
            origin = lp.provenance.get(clause)
            if origin and origin != last_origin:
                lines.append(f"% origin: {origin}")
                last_origin = origin
            lines.append(render_clause(clause))
    return "\n".join(lines) + "\n"


render_program_text = render_logic_program
