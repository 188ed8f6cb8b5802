"""autobus — run business initiatives as precondition-gated task networks.

The pieces, bottom to top:

* ``autobus.logic`` — ABL, a small definite-clause logic language: terms,
  parser, and an SLD resolution engine with negation-as-failure.
* ``autobus.semantics`` — turns tabular enterprise data into a knowledge
  graph and compiles it to logic facts plus foundational rules.
* ``autobus.initiative`` — the declarative initiative/task model:
  readiness, completion, repeat loops, and evaluation rules.
* ``autobus.synthesis`` — a deterministic template agent that compiles a
  structured task instruction into a three-section logic program.
* ``autobus.tools`` — tool registry and dispatcher for grounding and
  action tools, with idempotent invocation.
* ``autobus.orchestrator`` — the run loop: scheduling rounds, approval
  gates, grounding, action dispatch, event log, replay.
* ``autobus.server`` — HTTP API over live runs (consumed by the CLI and
  the operator console).
* ``autobus.case_study`` — synthetic subscriber-retention dataset, the
  brute-force targeting oracle, and the end-to-end study runner.
"""

__version__ = "0.1.0"

from autobus.logic import parse_program, parse_term, solve, solve_all

__all__ = ["parse_program", "parse_term", "solve", "solve_all", "__version__"]
