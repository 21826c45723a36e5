"""Composition of agents into superagents and the classifications that
depend on where the boundary is drawn: statefulness, redundancy,
invariance and shared-nothing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .core import (
    Agent,
    Body,
    PartitionError,
    Promise,
    PromiseGraph,
    SuperAgent,
    bind_promises,
    collapse_assisted,
    cluster_id,
)

__all__ = [
    "SuperAgent",
    "StateClass",
    "Redundancy",
    "InvarianceResult",
    "Violation",
    "SharedNothingResult",
    "compose",
    "classify_state",
    "state_locality",
    "check_redundant",
    "check_invariant",
    "check_shared_nothing",
]


class StateClass(enum.IntEnum):
    STRONGLY_STATELESS = 0
    WEAKLY_STATELESS = 1
    STATEFUL = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "StateClass":
        return cls[text.upper()]


class Redundancy(enum.Enum):
    REDUNDANT = "redundant"
    PARTITIONED = "partitioned"
    NEITHER = "neither"


def compose(
    model: PromiseGraph,
    partition: Sequence[Iterable[str]],
    names: Sequence[str | None] | None = None,
) -> PromiseGraph:
    """Lift ``model`` one scale up by collapsing each member-set.

    Agents not mentioned in ``partition`` stay as they are. Singleton sets
    leave their agent untouched.
    """
    sets = [frozenset(s) for s in partition]
    names = list(names) if names is not None else [None] * len(sets)
    if len(names) != len(sets):
        raise ValueError("names must match partition length")
    owner: dict[str, int] = {}
    for i, s in enumerate(sets):
        if not s:
            raise PartitionError(f"member-set {i} is empty")
        for a in sorted(s):
            model.agent(a)
            if a in owner:
                raise PartitionError(
                    f"agent {a!r} appears in member-sets {owner[a]} and {i}"
                )
            owner[a] = i
    out = model
    for s, name in zip(sets, names):
        out = collapse_assisted(out, s, name)
    return replace(out, scale=model.scale + 1)


def _own_class(promises: Iterable[Promise], variables=()) -> StateClass:
    promises = list(promises)
    if not any(p.is_accept for p in promises):
        return StateClass.STRONGLY_STATELESS
    depth = max(
        [v.history for v in variables] + [p.history or 0 for p in promises],
        default=0,
    )
    return StateClass.WEAKLY_STATELESS if depth <= 1 else StateClass.STATEFUL


def _classify(agent: Agent, promises: Sequence[Promise]) -> StateClass:
    if isinstance(agent, SuperAgent):
        # the cluster's own exterior promises; member memory is counted per member
        own = _own_class(promises)
        members = [
            _classify(m, [p for p in agent.interior if p.promiser == m.id])
            for m in agent.members
        ]
        return max([own, *members])
    return _own_class(promises, agent.variables)


def classify_state(agent_id: str, model: PromiseGraph) -> StateClass:
    """Strongly stateless: accepts nothing. Weakly stateless: accepts input
    but keeps at most the current sample. Stateful: anything deeper.
    A superagent takes the maximum over its members and its own promises."""
    agent = model.agent(agent_id)
    return _classify(agent, model.promises_by(agent_id))


def state_locality(agent_id: str, model: PromiseGraph) -> str | None:
    """``"local"`` when memory sits in the agent mediating the exterior
    promises, ``"non-local"`` when it sits in a backing member only, and
    ``None`` when the agent is not stateful."""
    agent = model.agent(agent_id)
    if classify_state(agent_id, model) is not StateClass.STATEFUL:
        return None
    if not isinstance(agent, SuperAgent):
        return "local"
    mediators = {
        p.promiser
        for p in agent.interior
        if p.is_offer and (p.is_wildcard or not p.promisees <= agent.member_ids)
    }
    for m in agent.members:
        cls = _classify(m, [p for p in agent.interior if p.promiser == m.id])
        if cls is StateClass.STATEFUL and m.id in mediators:
            return "local"
    return "non-local"


def _offered_to(model: PromiseGraph, source: str, observer: str) -> Body:
    body = Body(frozenset())
    for p in model.offers_by(source):
        if p.addresses(observer):
            body = body | p.body
    return body


def _accepted_from(model: PromiseGraph, observer: str, source: str) -> Body:
    body = Body(frozenset())
    for p in model.accepts_by(observer):
        if p.addresses(source):
            body = body | p.body
    return body


def check_redundant(a1: str, a2: str, observer: str, model: PromiseGraph) -> Redundancy:
    for a in (a1, a2, observer):
        model.agent(a)
    x1, x2 = _offered_to(model, a1, observer), _offered_to(model, a2, observer)
    y1, y2 = _accepted_from(model, observer, a1), _accepted_from(model, observer, a2)
    seen1, seen2 = bool(x1 & y1), bool(x2 & y2)
    if x1 and x1 == x2 and seen1 and seen2:
        return Redundancy.REDUNDANT
    if seen1 and seen2 and not (x1 & x2):
        return Redundancy.PARTITIONED
    return Redundancy.NEITHER


@dataclass(frozen=True)
class InvarianceResult:
    invariant: bool
    conditional_on: tuple[Body, ...] = ()


def _constant_supply(
    agent: SuperAgent, receiver: str, visiting: frozenset[str]
) -> frozenset[str]:
    """Labels ``receiver`` gets from inside ``agent`` over bindings whose
    offers are promised constant and are themselves internally invariant."""
    inner = agent.interior_graph()
    labels = {v.name for v in agent.member(receiver).variables if v.constant}
    for b in bind_promises(inner):
        if b.receiver != receiver or not b.offer.constant:
            continue
        if b.offer.id in visiting:
            continue
        if _offer_invariant_inside(agent, b.offer, visiting | {b.offer.id}):
            labels |= b.effective_body.terms
    return frozenset(labels)


def _offer_invariant_inside(agent: SuperAgent, p: Promise, visiting: frozenset[str]) -> bool:
    supplier = agent.member(p.promiser)
    if isinstance(supplier, SuperAgent) and not check_invariant_agent(supplier).invariant:
        return False
    if not p.conditions:
        return True
    have = _constant_supply(agent, p.promiser, visiting)
    return all(c.terms <= have for c in p.conditions)


def check_invariant_agent(agent: Agent, promises: Sequence[Promise] = ()) -> InvarianceResult:
    missing: list[Body] = []
    if isinstance(agent, SuperAgent):
        ids = agent.member_ids
        exterior = [
            p
            for p in agent.interior
            if p.is_offer and (p.is_wildcard or not p.promisees <= ids)
        ]
        for p in exterior:
            have = _constant_supply(agent, p.promiser, frozenset({p.id}))
            for c in p.conditions:
                rest = c.terms - have
                if rest:
                    missing.append(Body(rest))
            member = agent.member(p.promiser)
            if isinstance(member, SuperAgent):
                missing.extend(check_invariant_agent(member).conditional_on)
    else:
        housed = {v.name for v in agent.variables if v.constant}
        for p in promises:
            if not p.is_offer:
                continue
            for c in p.conditions:
                rest = c.terms - housed
                if rest:
                    missing.append(Body(rest))
    uniq = sorted(set(missing), key=lambda b: b.labels)
    return InvarianceResult(not uniq, tuple(uniq))


def check_invariant(agent_id: str, model: PromiseGraph) -> InvarianceResult:
    """An agent is invariant to exterior change iff every dependency of its
    exterior offers is satisfied inside its boundary by promises declared
    constant. Otherwise the unsatisfied condition bodies are returned."""
    agent = model.agent(agent_id)
    return check_invariant_agent(agent, model.promises_by(agent_id))


@dataclass(frozen=True)
class Violation:
    agent: str
    promise: str
    counterparty: str

    def __str__(self) -> str:
        return f"({self.agent},{self.promise},{self.counterparty})"


@dataclass(frozen=True)
class SharedNothingResult:
    shared_nothing: bool
    violations: tuple[Violation, ...]
    hub: bool
    upstream: tuple[str, ...] = ()
    downstream: tuple[str, ...] = ()


def check_shared_nothing(agent_id: str, model: PromiseGraph) -> SharedNothingResult:
    model.agent(agent_id)
    bindings = bind_promises(model)
    inbound = [b for b in bindings if b.receiver == agent_id]
    outbound = [b for b in bindings if b.sender == agent_id]
    violations = set()
    for p in model.offers_by(agent_id):
        if not p.conditions:
            continue
        cond_terms = frozenset().union(*(c.terms for c in p.conditions))
        assisted = [b for b in inbound if b.effective_body.terms & cond_terms]
        for b in assisted:
            violations.add(Violation(agent_id, "-" + ",".join(b.effective_body.labels), b.sender))
        covered = frozenset().union(*(b.effective_body.terms for b in assisted)) if assisted else frozenset()
        if not cond_terms <= covered:
            conds = ",".join(str(c) for c in p.conditions)
            violations.add(Violation(agent_id, f"+{p.body}|{conds}", "?"))
    upstream = tuple(sorted({b.sender for b in inbound}))
    downstream = tuple(sorted({b.receiver for b in outbound}))
    hub = (len(upstream) >= 2 and len(downstream) >= 1) or (
        len(upstream) >= 1 and len(downstream) >= 2
    )
    ordered = tuple(sorted(violations, key=lambda v: (v.promise, v.counterparty)))
    return SharedNothingResult(not ordered and not hub, ordered, hub, upstream, downstream)


def partition_name(members: Iterable[str]) -> str:
    return cluster_id(members)
