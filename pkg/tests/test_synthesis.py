"""Template agent, program validation, impact classification, rendering."""

import pytest

from autobus.case_study import (
    SyntheticDatasetConfig,
    build_registry,
    generate_dataset,
    study_instructions_doc,
    study_params_doc,
    study_schema_doc,
)
from autobus.logic import (
    ACTIONS,
    FACTS,
    RULES,
    Atom,
    Clause,
    Compound,
    Literal,
    Program,
    Var,
    parse_clause,
    parse_program,
    parse_term,
    render_clause,
)
from autobus.semantics import FactSet, build_fact_set, load_schema
from autobus.synthesis import (
    ActionBinding,
    FilterDecl,
    LogicProgram,
    SynthesisError,
    TaskInstruction,
    classify_impact,
    load_instructions,
    render_logic_program,
    synthesize_program,
    validate_program,
)


@pytest.fixture(scope="module")
def study():
    dataset = generate_dataset(SyntheticDatasetConfig(seed=5, n_consumers=60))
    schema = load_schema(study_schema_doc())
    fact_set = build_fact_set(dataset.tables(), schema)
    registry, _ = build_registry(dataset.median_income)
    instructions = load_instructions(study_instructions_doc(), study_params_doc())
    return dataset, fact_set, registry, instructions


def body_text(lp):
    rule = lp.program.section(RULES)[0]
    return render_clause(rule)


def test_task1_rule_contains_filters_and_foundational_rule(study):
    _, fact_set, registry, instructions = study
    lp = synthesize_program(instructions["task1"], fact_set, (), registry)
    rule = body_text(lp)
    assert "sub_product(S, product1)" in rule
    assert "monthly_rate(S, Rate), Rate >= 10.0" in rule
    assert "churn_risk(C, 4)" in rule
    facts_section = [render_clause(c) for c in lp.program.section(FACTS)]
    assert "active_subscription(S) :- has_status(S, active), subscribe(_, S)." in facts_section
    # the unrelated foundational rule is not dragged in
    assert not any("send_promotion" in line for line in facts_section)


def test_task3_rule_and_two_actions(study):
    _, fact_set, registry, instructions = study
    prior = (
        FactSet((parse_clause("savable_churn(c1)."), parse_clause("task_done(task1)."))),
        FactSet((parse_clause("median_income(rivertown, 60000)."), parse_clause("task_done(task2)."))),
    )
    lp = synthesize_program(instructions["task3"], fact_set, prior, registry)
    rule = body_text(lp)
    assert (
        "retention_target(C) :- savable_churn(C), resides_in(C, City), "
        "median_income(City, M), household_income(C, Inc), Inc > M." == rule
    )
    actions = [render_clause(c) for c in lp.program.section(ACTIONS)]
    assert actions == [
        "persist(task3_outcomes, target(C)) :- retention_target(C).",
        "invoke(marketing_send, send_promotion(C)) :- retention_target(C).",
    ]


def test_prior_outcomes_land_in_facts_section(study):
    _, fact_set, registry, instructions = study
    prior = (FactSet((parse_clause("savable_churn(c9)."),)),)
    lp = synthesize_program(instructions["task3"], fact_set, prior, registry)
    facts_section = [render_clause(c) for c in lp.program.section(FACTS)]
    assert "savable_churn(c9)." in facts_section


def test_degenerate_instruction_valid_but_warned(study):
    _, fact_set, registry, _ = study
    bare = TaskInstruction(
        task_id="bare",
        goal_text="join only",
        target=parse_term("everyone(C)"),
        joins=(parse_term("consumer(C)"),),
    )
    lp = synthesize_program(bare, fact_set, (), registry)
    validation = validate_program(lp, fact_set, registry)
    assert validation.ok
    assert any(w.code == "unreachable_rule" for w in validation.warnings)
    impact = classify_impact(lp, registry, validation)
    assert impact.needs_approval  # warnings force a human decision


def test_synthesis_is_deterministic(study):
    _, fact_set, registry, instructions = study
    once = render_logic_program(synthesize_program(instructions["task1"], fact_set, (), registry))
    again = render_logic_program(synthesize_program(instructions["task1"], fact_set, (), registry))
    assert once == again


def test_relevant_facts_only(study):
    dataset, fact_set, registry, instructions = study
    lp = synthesize_program(instructions["task1"], fact_set, (), registry)
    facts_preds = set()
    for clause in lp.program.section(FACTS):
        if clause.is_fact:
            facts_preds.add(clause.head.functor)
    # household income is irrelevant to task 1 and must not be copied in
    assert "household_income" not in facts_preds
    assert "resides_in" not in facts_preds
    assert {"consumer", "subscribe", "sub_product", "monthly_rate", "churn_risk", "has_status"} <= facts_preds


# -- validation ---------------------------------------------------------------


def test_validate_study_programs_clean(study):
    _, fact_set, registry, instructions = study
    for key in ("task1", "task2"):
        lp = synthesize_program(instructions[key], fact_set, (), registry)
        validation = validate_program(lp, fact_set, registry)
        assert validation.ok and not validation.warnings, (key, validation.as_dict())


def test_validate_undefined_predicate(study):
    _, fact_set, _registry, _ = study
    program = Program.from_sections(
        rules=(parse_clause("t(C) :- consumer(C), median_income(C, M), M > 1."),),
        actions=(parse_clause("persist(x, t(C)) :- t(C)."),),
    )
    lp = LogicProgram(program=program)
    validation = validate_program(lp, fact_set, catalog=None)
    codes = [f.code for f in validation.errors]
    assert "undefined_predicate" in codes


def test_validate_unregistered_tool(study):
    _, fact_set, registry, _ = study
    program = Program.from_sections(
        rules=(parse_clause("t(C) :- consumer(C)."),),
        actions=(parse_clause("invoke(unknown_tool, p(C)) :- t(C)."),),
    )
    validation = validate_program(LogicProgram(program=program), fact_set, registry)
    assert any(f.code == "unregistered_tool" for f in validation.errors)


def test_validate_unsafe_negation(study):
    _, fact_set, registry, _ = study
    rule = Clause(
        Compound("t", [Var("C")]),
        [
            Literal(Compound("consumer", [Var("C")])),
            Literal(Compound("blocked", [Var("Z")]), negated=True),
        ],
    )
    program = Program.from_sections(
        rules=(rule,),
        actions=(parse_clause("persist(x, t(C)) :- t(C)."),),
    )
    validation = validate_program(LogicProgram(program=program), fact_set, registry)
    assert any(f.code == "unsafe_negation" for f in validation.errors)


def test_validate_bad_action_head(study):
    _, fact_set, registry, _ = study
    program = Program.from_sections(
        rules=(parse_clause("t(C) :- consumer(C)."),),
        actions=(parse_clause("launch(t(C)) :- t(C)."),),
    )
    validation = validate_program(LogicProgram(program=program), fact_set, registry)
    assert any(f.code == "bad_action_head" for f in validation.errors)


def test_validate_extra_defined_covers_empty_prior_output(study):
    _, fact_set, registry, instructions = study
    # task3 with no savable_churn facts anywhere: legal when the upstream
    # task declared savable_churn as its output
    lp = synthesize_program(instructions["task3"], fact_set, (), registry)
    without = validate_program(lp, fact_set, registry)
    assert any(f.code == "undefined_predicate" for f in without.errors)
    with_decl = validate_program(
        lp, fact_set, registry, extra_defined={("savable_churn", 1), ("task_done", 1)}
    )
    assert with_decl.ok


# -- impact ---------------------------------------------------------------------


def test_impact_marketing_send_needs_approval(study):
    _, fact_set, registry, instructions = study
    prior = (
        FactSet((parse_clause("savable_churn(c1)."),)),
        FactSet((parse_clause("median_income(rivertown, 60000)."),)),
    )
    lp = synthesize_program(instructions["task3"], fact_set, prior, registry)
    impact = classify_impact(lp, registry, validate_program(lp, fact_set, registry))
    assert impact.needs_approval
    assert any("marketing_send" in r for r in impact.reasons)


def test_impact_persist_only_auto(study):
    _, fact_set, registry, instructions = study
    lp = synthesize_program(instructions["task1"], fact_set, (), registry)
    impact = classify_impact(lp, registry, validate_program(lp, fact_set, registry))
    assert not impact.needs_approval


def test_impact_empty_actions_auto(study):
    _, _fact_set, registry, _ = study
    program = Program.from_sections(facts=(parse_clause("consumer(c1)."),))
    impact = classify_impact(LogicProgram(program=program), registry)
    assert not impact.needs_approval


def test_impact_soundness_high_impact_never_auto(study):
    _, fact_set, registry, instructions = study
    prior = (
        FactSet((parse_clause("savable_churn(c1)."),)),
        FactSet((parse_clause("median_income(rivertown, 60000)."),)),
    )
    lp = synthesize_program(instructions["task3"], fact_set, prior, registry)
    # with or without validation context, a high-impact invoke blocks auto
    assert classify_impact(lp, registry).needs_approval
    assert classify_impact(lp, registry, validate_program(lp, fact_set, registry)).needs_approval


# -- rendering ---------------------------------------------------------------------


def test_render_snippet_program_sections():
    program = parse_program(
        "% SECTION: facts\nconsumer(c123).\nsubscription(s456).\n"
        "subscribe(c123, s456).\nhas_status(s456, active).\n"
    )
    lp = LogicProgram(program=program)
    text = render_logic_program(lp)
    lines = text.splitlines()
    assert lines[0] == "% SECTION: facts"
    assert lines[1] == "consumer(c123)."
    assert "% SECTION: rules" in lines and "% SECTION: actions" in lines


def test_render_empty_program_three_headers():
    lp = LogicProgram(program=Program(()))
    assert render_logic_program(lp).splitlines() == [
        "% SECTION: facts",
        "% SECTION: rules",
        "% SECTION: actions",
    ]


def test_render_parse_roundtrip(study):
    _, fact_set, registry, instructions = study
    lp = synthesize_program(instructions["task1"], fact_set, (), registry)
    reparsed = parse_program(render_logic_program(lp))
    assert reparsed == lp.program


def test_unknown_filter_op_rejected():
    with pytest.raises(SynthesisError):
        FilterDecl(predicate="p", on="S", op="~=", value=1)


def test_unknown_param_reference_rejected():
    with pytest.raises(SynthesisError, match="unknown param"):
        load_instructions(
            {"t": {"target": "t(C)", "joins": ["consumer(C)"],
                   "filters": [{"predicate": "p", "on": "C", "op": ">=",
                                "value": {"param": "nope"}}]}},
            {"other": 1},
        )
