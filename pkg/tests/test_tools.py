"""Tool registry, invocation semantics, grounding, HTTP transport."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from autobus.logic import Atom, Clause, Compound, Num, parse_clause, parse_term
from autobus.tools import (
    DuplicateToolError,
    InvocationCache,
    NongroundParamsError,
    NoProducerError,
    RecordingActionTool,
    RetryPolicy,
    SignatureMismatchError,
    ToolDescriptor,
    ToolError,
    ToolInvocation,
    ToolRegistry,
    ToolResult,
    TransportError,
    UnknownToolError,
    fixture_lookup_tool,
    ground_predicate,
    invoke_tool,
)


@pytest.fixture
def registry():
    reg = ToolRegistry()
    descriptor, impl = fixture_lookup_tool(
        "median_income_lookup", "median_income", {"rivertown": 62000, "hillcrest": 70000}
    )
    reg.register(descriptor, impl)
    marketing = RecordingActionTool("marketing_send")
    reg.register(
        ToolDescriptor(name="marketing_send", kind="action", impact="high", idempotent=True),
        marketing,
    )
    return reg, marketing


def test_register_and_list(registry):
    reg, _ = registry
    assert set(reg.names()) == {"median_income_lookup", "marketing_send"}
    assert reg.descriptor("marketing_send").high_impact
    assert reg.producer_of("median_income", 2).name == "median_income_lookup"


def test_duplicate_registration_rejected(registry):
    reg, _ = registry
    with pytest.raises(DuplicateToolError):
        reg.register(ToolDescriptor(name="marketing_send", kind="action"), lambda p: None)


def test_catalog_summary_deterministic(registry):
    reg, _ = registry
    assert reg.summary() == reg.summary()
    assert "median_income_lookup: grounding, signature=median_income/2, impact=normal" in reg.summary()


def test_fixture_lookup_returns_declared_fact(registry):
    reg, _ = registry
    result = reg.invoke(ToolInvocation(tool="median_income_lookup", params=Atom("rivertown")))
    assert result.ok
    assert result.facts_out == (parse_clause("median_income(rivertown, 62000)."),)


def test_fixture_lookup_unknown_key_fails(registry):
    reg, _ = registry
    result = reg.invoke(ToolInvocation(tool="median_income_lookup", params=Atom("atlantis")))
    assert not result.ok


def test_unknown_tool(registry):
    reg, _ = registry
    with pytest.raises(UnknownToolError):
        reg.invoke(ToolInvocation(tool="nope", params=Atom("x")))


def test_nonground_params_rejected(registry):
    reg, _ = registry
    with pytest.raises(NongroundParamsError):
        reg.invoke(ToolInvocation(tool="marketing_send", params=parse_term("promo(X)")))


def test_idempotent_replay_single_side_effect(registry):
    reg, marketing = registry
    cache = InvocationCache()
    inv = ToolInvocation(tool="marketing_send", params=parse_term("send_promotion(c1)"),
                         run_id="r1", task_id="t3")
    first = invoke_tool(reg, inv, cache)
    for _ in range(5):
        replay = invoke_tool(reg, inv, cache)
        assert replay.receipt == first.receipt
    assert len(marketing.performed) == 1


def test_idempotency_key_stable_and_distinct(registry):
    a = ToolInvocation(tool="t", params=Atom("x"), run_id="r", task_id="k")
    b = ToolInvocation(tool="t", params=Atom("x"), run_id="r", task_id="k")
    c = ToolInvocation(tool="t", params=Atom("y"), run_id="r", task_id="k")
    assert a.idempotency_key == b.idempotency_key
    assert a.idempotency_key != c.idempotency_key


def test_signature_mismatch_detected():
    reg = ToolRegistry()

    def bad_impl(params):
        return ToolResult(status="ok", facts_out=(parse_clause("wrong_pred(a, 1)."),))

    reg.register(
        ToolDescriptor(name="bad", kind="grounding", signature="median_income/2"),
        bad_impl,
    )
    with pytest.raises(SignatureMismatchError):
        reg.invoke(ToolInvocation(tool="bad", params=Atom("x")))


def test_ground_predicate_dedups_tuples(registry):
    reg, _ = registry
    calls = []
    original = reg._impls["median_income_lookup"]

    def counting(params):
        calls.append(params)
        return original(params)

    reg._impls["median_income_lookup"] = counting
    facts = ground_predicate(
        reg, "median_income", 2,
        [(Atom("rivertown"),), (Atom("hillcrest"),), (Atom("rivertown"),)],
    )
    assert len(calls) == 2
    assert {str(f.head.args[0].name) for f in facts} == {"rivertown", "hillcrest"}


def test_ground_predicate_empty_inputs(registry):
    reg, _ = registry
    assert ground_predicate(reg, "median_income", 2, []) == []


def test_ground_predicate_no_producer(registry):
    reg, _ = registry
    with pytest.raises(NoProducerError, match="census_income/2"):
        ground_predicate(reg, "census_income", 2, [(Atom("x"),)])


def test_persist_consuming_action_records(registry):
    reg, marketing = registry
    reg.invoke(ToolInvocation(tool="marketing_send", params=parse_term("send_promotion(c7)")))
    assert marketing.recipients() == ["c7"]


# -- HTTP transport ---------------------------------------------------------------


class _ToolHandler(BaseHTTPRequestHandler):
    fail_first = 0
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append(body)
        if type(self).fail_first > 0:
            type(self).fail_first -= 1
            self.send_response(500)
            self.end_headers()
            return
        params = body["params"]
        key = params.strip()
        reply = {
            "status": "ok",
            "facts": [f"census_income({key}, 54000)"],
            "receipt": {"echo": body["idempotency_key"]},
        }
        payload = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_tool_server():
    _ToolHandler.fail_first = 0
    _ToolHandler.seen = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ToolHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/tool"
    server.shutdown()


def test_http_tool_roundtrip(http_tool_server):
    reg = ToolRegistry()
    reg.register(
        ToolDescriptor(
            name="census",
            kind="grounding",
            signature="census_income/2",
            transport="http",
            endpoint=http_tool_server,
            input_arity=1,
        )
    )
    result = reg.invoke(ToolInvocation(tool="census", params=Atom("rivertown")))
    assert result.ok
    assert result.facts_out == (parse_clause("census_income(rivertown, 54000)."),)
    assert _ToolHandler.seen[0]["tool"] == "census"
    assert _ToolHandler.seen[0]["params"] == "rivertown"


def test_http_retry_then_success(http_tool_server):
    _ToolHandler.fail_first = 2
    reg = ToolRegistry(retry=RetryPolicy(attempts=3, base_delay_s=0.01))
    reg.register(
        ToolDescriptor(name="census", kind="grounding", signature="census_income/2",
                       transport="http", endpoint=http_tool_server)
    )
    result = reg.invoke(ToolInvocation(tool="census", params=Atom("hillcrest")))
    assert result.ok
    assert len(_ToolHandler.seen) == 3


def test_http_transport_failure_after_retries(http_tool_server):
    _ToolHandler.fail_first = 99
    reg = ToolRegistry(retry=RetryPolicy(attempts=3, base_delay_s=0.01))
    reg.register(
        ToolDescriptor(name="census", kind="grounding", signature="census_income/2",
                       transport="http", endpoint=http_tool_server)
    )
    with pytest.raises(TransportError):
        reg.invoke(ToolInvocation(tool="census", params=Atom("hillcrest")))
    assert len(_ToolHandler.seen) == 3
