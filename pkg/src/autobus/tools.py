"""Tool registry and dispatcher.

Two tool kinds: grounding tools produce facts for a declared predicate
(median_income/2 from a fixture table, say); action tools perform a side
effect and return a receipt (send a campaign, persist an outcome fact).

Invocations carry an idempotency key hashed from (run, task, tool,
params); replaying an idempotent action with the same key returns the
cached receipt without repeating the side effect. Transport failures are
retried with exponential backoff; every other error fails fast.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import requests

from autobus.logic import (
    Atom,
    Clause,
    Compound,
    Num,
    Term,
    is_ground,
    parse_term,
    render_term,
)


class ToolError(Exception):
    pass


class UnknownToolError(ToolError):
    def __init__(self, name: str):
        super().__init__(f"no tool registered under {name!r}")


class DuplicateToolError(ToolError):
    def __init__(self, name: str):
        super().__init__(f"tool {name!r} already registered")


class NongroundParamsError(ToolError):
    def __init__(self, params: Term):
        super().__init__(f"tool params must be ground: {render_term(params)}")


class TransportError(ToolError):
    """Retryable transport-level failure (connection, 5xx, bad payload)."""

    code = "transport_failure"


class SignatureMismatchError(ToolError):
    def __init__(self, tool: str, fact: Clause, signature: str):
        from autobus.logic import render_clause

        super().__init__(
            f"tool {tool!r} returned {render_clause(fact)} which does not match its "
            f"declared signature {signature}"
        )


class NoProducerError(ToolError):
    def __init__(self, predicate: str, arity: int):
        super().__init__(f"no grounding tool produces {predicate}/{arity}")


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    kind: str  # grounding | action
    signature: str = ""  # "median_income/2" for grounding; params shape note for actions
    impact: str = "normal"  # normal | high
    transport: str = "in_process"  # in_process | http
    endpoint: str = ""
    idempotent: bool = True
    input_arity: int = 0  # grounding: leading argument positions supplied by the caller

    def __post_init__(self):
        if self.kind not in ("grounding", "action"):
            raise ToolError(f"tool {self.name!r}: unknown kind {self.kind!r}")
        if self.impact not in ("normal", "high"):
            raise ToolError(f"tool {self.name!r}: unknown impact {self.impact!r}")
        if self.transport not in ("in_process", "http"):
            raise ToolError(f"tool {self.name!r}: unknown transport {self.transport!r}")
        if self.transport == "http" and not self.endpoint:
            raise ToolError(f"tool {self.name!r}: http transport needs an endpoint")
        if self.kind == "grounding" and not self.signature:
            raise ToolError(f"tool {self.name!r}: grounding tools must declare a signature")

    @property
    def produces(self) -> Optional[Tuple[str, int]]:
        if self.kind != "grounding" or "/" not in self.signature:
            return None
        name, arity = self.signature.rsplit("/", 1)
        return name, int(arity)

    @property
    def high_impact(self) -> bool:
        return self.impact == "high"


@dataclass(frozen=True)
class ToolInvocation:
    tool: str
    params: Term
    run_id: str = ""
    task_id: str = ""

    @property
    def idempotency_key(self) -> str:
        raw = "\x1f".join((self.run_id, self.task_id, self.tool, render_term(self.params)))
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ToolResult:
    status: str  # ok | failed
    facts_out: Tuple[Clause, ...] = ()
    receipt: Mapping[str, object] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


# An in-process tool implementation maps a ground params term to a result.
ToolImpl = Callable[[Term], ToolResult]


class InvocationCache:
    """Receipt cache keyed by idempotency key; one per run."""

    def __init__(self):
        self._receipts: Dict[str, ToolResult] = {}

    def get(self, key: str) -> Optional[ToolResult]:
        return self._receipts.get(key)

    def put(self, key: str, result: ToolResult) -> None:
        self._receipts[key] = result


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    base_delay_s: float = 0.05


class ToolRegistry:
    """Registered descriptors plus their in-process implementations.

    The registry is frozen once a run starts; invocation-side state (the
    idempotency cache) lives with the run, not here.
    """

    def __init__(self, retry: RetryPolicy = RetryPolicy()):
        self._descriptors: Dict[str, ToolDescriptor] = {}
        self._impls: Dict[str, ToolImpl] = {}
        self.retry = retry

    def register(self, descriptor: ToolDescriptor, impl: Optional[ToolImpl] = None) -> "ToolRegistry":
        if descriptor.name in self._descriptors:
            raise DuplicateToolError(descriptor.name)
        if descriptor.transport == "in_process" and impl is None:
            raise ToolError(f"tool {descriptor.name!r}: in-process tools need an implementation")
        self._descriptors[descriptor.name] = descriptor
        if impl is not None:
            self._impls[descriptor.name] = impl
        return self

    def descriptor(self, name: str) -> ToolDescriptor:
        try:
            return self._descriptors[name]
        except KeyError:
            raise UnknownToolError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._descriptors

    def names(self) -> List[str]:
        return list(self._descriptors)

    def descriptors(self) -> List[ToolDescriptor]:
        return list(self._descriptors.values())

    def producer_of(self, predicate: str, arity: int) -> Optional[ToolDescriptor]:
        for d in self._descriptors.values():
            if d.produces == (predicate, arity):
                return d
        return None

    def grounded_predicates(self) -> set:
        return {d.produces for d in self._descriptors.values() if d.produces}

    def summary(self) -> str:
        """Stable text catalog used when composing programs."""
        lines = []
        for name in sorted(self._descriptors):
            d = self._descriptors[name]
            bits = [d.kind]
            if d.signature:
                bits.append(f"signature={d.signature}")
            bits.append(f"impact={d.impact}")
            lines.append(f"{name}: {', '.join(bits)}")
        return "\n".join(lines)

    # -- invocation -----------------------------------------------------------

    def invoke(
        self,
        invocation: ToolInvocation,
        cache: Optional[InvocationCache] = None,
    ) -> ToolResult:
        descriptor = self.descriptor(invocation.tool)
        if not is_ground(invocation.params):
            raise NongroundParamsError(invocation.params)
        key = invocation.idempotency_key
        if cache is not None and descriptor.idempotent:
            cached = cache.get(key)
            if cached is not None:
                return cached
        if descriptor.transport == "http":
            result = self._invoke_http(descriptor, invocation)
        else:
            result = self._impls[descriptor.name](invocation.params)
        if descriptor.kind == "grounding":
            self._check_signature(descriptor, result)
        if cache is not None and descriptor.idempotent and result.ok:
            cache.put(key, result)
        return result

    def _check_signature(self, descriptor: ToolDescriptor, result: ToolResult) -> None:
        produces = descriptor.produces
        for fact in result.facts_out:
            if not fact.is_fact or not fact.is_ground:
                raise SignatureMismatchError(descriptor.name, fact, descriptor.signature)
            head = fact.head
            actual = (
                (head.functor, len(head.args))
                if isinstance(head, Compound)
                else (head.name, 0)
            )
            if produces is not None and actual != produces:
                raise SignatureMismatchError(descriptor.name, fact, descriptor.signature)

    def _invoke_http(self, descriptor: ToolDescriptor, invocation: ToolInvocation) -> ToolResult:
        payload = {
            "tool": invocation.tool,
            "params": render_term(invocation.params),
            "idempotency_key": invocation.idempotency_key,
        }
        last: Optional[Exception] = None
        for attempt in range(self.retry.attempts):
            if attempt:
                time.sleep(self.retry.base_delay_s * (2 ** (attempt - 1)))
            try:
                response = requests.post(descriptor.endpoint, json=payload, timeout=10)
                if response.status_code >= 500:
                    raise TransportError(f"{descriptor.name}: server returned {response.status_code}")
                if response.status_code != 200:
                    return ToolResult(status="failed", receipt={"http_status": response.status_code})
                body = response.json()
                facts = tuple(
                    Clause(parse_term(line)) for line in body.get("facts", ()) if line.strip()
                )
                return ToolResult(
                    status=body.get("status", "failed"),
                    facts_out=facts,
                    receipt=body.get("receipt", {}),
                )
            except (requests.RequestException, ValueError, TransportError) as exc:
                last = exc
        raise TransportError(f"{descriptor.name}: transport failed after {self.retry.attempts} attempts: {last}")


def invoke_tool(
    registry: ToolRegistry,
    invocation: ToolInvocation,
    cache: Optional[InvocationCache] = None,
) -> ToolResult:
    return registry.invoke(invocation, cache)


def ground_predicate(
    registry: ToolRegistry,
    predicate: str,
    arity: int,
    bindings_needed: Sequence[Sequence[Term]],
    run_id: str = "",
    task_id: str = "",
    cache: Optional[InvocationCache] = None,
) -> List[Clause]:
    """Fetch facts for a tool-produced predicate.

    ``bindings_needed`` holds the input-argument tuples observed by the
    caller; the producing tool is invoked once per distinct tuple and the
    returned facts are merged with duplicates removed.
    """
    producer = registry.producer_of(predicate, arity)
    if producer is None:
        raise NoProducerError(predicate, arity)
    seen_tuples = set()
    facts: List[Clause] = []
    seen_facts = set()
    for args in bindings_needed:
        args = tuple(args)
        if args in seen_tuples:
            continue
        seen_tuples.add(args)
        params: Term = args[0] if len(args) == 1 else Compound("inputs", list(args))
        result = registry.invoke(
            ToolInvocation(tool=producer.name, params=params, run_id=run_id, task_id=task_id),
            cache,
        )
        if not result.ok:
            raise ToolError(f"grounding tool {producer.name!r} failed for {render_term(params)}")
        for fact in result.facts_out:
            if fact not in seen_facts:
                seen_facts.add(fact)
                facts.append(fact)
    return facts


# ---------------------------------------------------------------------------
# Stock tools
# ---------------------------------------------------------------------------


def fixture_lookup_tool(
    name: str,
    predicate: str,
    table: Mapping[str, Union[int, float]],
    impact: str = "normal",
) -> Tuple[ToolDescriptor, ToolImpl]:
    """A grounding tool backed by a committed key-value table.

    Params is the lookup key (an atom); the tool returns one
    ``predicate(key, value)`` fact, or fails when the key is missing.
    """

    def impl(params: Term) -> ToolResult:
        key = render_term(params)
        if key not in table:
            return ToolResult(status="failed", receipt={"error": f"unknown key {key!r}"})
        value = table[key]
        fact = Clause(Compound(predicate, [Atom(key), Num(value)]))
        return ToolResult(status="ok", facts_out=(fact,), receipt={"key": key})

    descriptor = ToolDescriptor(
        name=name,
        kind="grounding",
        signature=f"{predicate}/2",
        impact=impact,
        input_arity=1,
    )
    return descriptor, impl


class RecordingActionTool:
    """An action tool that records every performed invocation.

    Stands in for an external service: the receipt lists what would have
    been sent, and the record survives for audit (and test) inspection.
    """

    def __init__(self, name: str):
        self.name = name
        self.performed: List[Dict[str, object]] = []

    def __call__(self, params: Term) -> ToolResult:
        entry = {"tool": self.name, "params": render_term(params), "seq": len(self.performed)}
        self.performed.append(entry)
        return ToolResult(status="ok", receipt=dict(entry))

    def recipients(self) -> List[str]:
        """First argument of each recorded params term (compound params)."""
        out = []
        for entry in self.performed:
            term = parse_term(str(entry["params"]))
            if isinstance(term, Compound):
                out.append(render_term(term.args[0]))
            else:
                out.append(render_term(term))
        return out


def load_fixture_table(path: Union[str, Path]) -> Dict[str, Union[int, float]]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ToolError(f"{path}: fixture table must be a JSON object")
    return {str(k): v for k, v in data.items()}
