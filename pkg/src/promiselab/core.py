"""Agents, promises, bindings and the static promise calculus.

Everything here is immutable. A :class:`PromiseGraph` is a snapshot of
agents and the promises they make; the functions at the bottom of the
module (:func:`bind_promises`, :func:`resolve_conditionals`,
:func:`collapse_assisted`) are pure and return new values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping

WILDCARD = "*"


class ModelValidationError(ValueError):
    """A model refers to something that does not exist or is malformed."""

    def __init__(self, message: str, diagnostics: Iterable[str] = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics) or [message]


class PartitionError(ModelValidationError):
    pass


class Polarity(enum.Enum):
    OFFER = "+"
    ACCEPT = "-"

    @classmethod
    def parse(cls, value: "str | Polarity") -> "Polarity":
        if isinstance(value, Polarity):
            return value
        for p in cls:
            if value in (p.value, p.name.lower()):
                return p
        raise ValueError(f"unknown polarity {value!r}")


class Verdict(enum.Enum):
    KEPT = "kept"
    NOT_KEPT = "not-kept"
    UNKNOWN = "unknown"


class Resolution(enum.Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    UNCONDITIONAL = "unconditional"


@dataclass(frozen=True)
class Body:
    """A finite set of labelled terms.

    ``domains`` optionally attaches a finite value domain to a label. It does
    not take part in equality: two bodies are the same promise content when
    their labels agree.
    """

    terms: frozenset[str]
    domains: tuple[tuple[str, tuple], ...] = field(default=(), compare=False)

    def __post_init__(self):
        if isinstance(self.terms, str):
            object.__setattr__(self, "terms", frozenset([self.terms]))
        elif not isinstance(self.terms, frozenset):
            object.__setattr__(self, "terms", frozenset(self.terms))
        if isinstance(self.domains, Mapping):
            object.__setattr__(
                self, "domains", tuple(sorted((k, tuple(v)) for k, v in self.domains.items()))
            )

    @classmethod
    def of(cls, *labels: str) -> "Body":
        return cls(frozenset(labels))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(self.terms))

    def domain(self, label: str) -> tuple | None:
        for name, values in self.domains:
            if name == label:
                return values
        return None

    def covers(self, other: "Body") -> bool:
        return other.terms <= self.terms

    def __and__(self, other: "Body") -> "Body":
        terms = self.terms & other.terms
        doms = tuple(d for d in self.domains + other.domains if d[0] in terms)
        seen: dict[str, tuple] = {}
        for k, v in doms:
            seen.setdefault(k, v)
        return Body(terms, tuple(sorted(seen.items())))

    def __or__(self, other: "Body") -> "Body":
        return Body(self.terms | other.terms, self.domains + other.domains)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.labels)

    def __str__(self) -> str:
        return "{" + ",".join(self.labels) + "}"


EMPTY = Body(frozenset())


def as_body(value: "Body | str | Iterable[str]") -> Body:
    if isinstance(value, Body):
        return value
    if isinstance(value, str):
        return Body.of(value)
    return Body(frozenset(value))


@dataclass(frozen=True)
class Promise:
    """One promise ``promiser --(+/-body | conditions)--> promisees``.

    ``promisees`` is a frozenset of agent ids, or ``{"*"}`` for a wildcard.
    ``history`` is the declared interior memory depth of the promised
    behaviour (``None`` when not declared). ``imposed`` marks impositions;
    they bind exactly like offers.
    """

    promiser: str
    promisees: frozenset[str]
    polarity: Polarity
    body: Body
    conditions: tuple[Body, ...] = ()
    constant: bool = False
    lifetime: int | None = None
    imposed: bool = False
    scope: str | None = None
    history: int | None = None
    id: str = ""

    def __post_init__(self):
        if isinstance(self.promisees, str):
            object.__setattr__(self, "promisees", frozenset([self.promisees]))
        elif not isinstance(self.promisees, frozenset):
            object.__setattr__(self, "promisees", frozenset(self.promisees))
        object.__setattr__(self, "polarity", Polarity.parse(self.polarity))
        object.__setattr__(self, "body", as_body(self.body))
        conds = tuple(sorted({as_body(c) for c in self.conditions if as_body(c)}, key=lambda b: b.labels))
        object.__setattr__(self, "conditions", conds)
        if not self.promisees:
            raise ModelValidationError(f"promise by {self.promiser!r} has no promisees")
        if WILDCARD in self.promisees and len(self.promisees) > 1:
            raise ModelValidationError(f"promise by {self.promiser!r} mixes '*' with named promisees")
        if not self.id:
            object.__setattr__(self, "id", self.default_id())

    def default_id(self) -> str:
        cond = "".join("|" + ",".join(c.labels) for c in self.conditions)
        to = ",".join(sorted(self.promisees))
        return f"{self.promiser}{self.polarity.value}{','.join(self.body.labels)}{cond}>{to}"

    @property
    def is_offer(self) -> bool:
        return self.polarity is Polarity.OFFER

    @property
    def is_accept(self) -> bool:
        return self.polarity is Polarity.ACCEPT

    @property
    def is_wildcard(self) -> bool:
        return WILDCARD in self.promisees

    @property
    def is_conditional(self) -> bool:
        return bool(self.conditions)

    def addresses(self, agent_id: str) -> bool:
        return self.is_wildcard or agent_id in self.promisees

    def __str__(self) -> str:
        cond = ("|" + ",".join(str(c) for c in self.conditions)) if self.conditions else ""
        to = ",".join(sorted(self.promisees))
        return f"{self.promiser} {self.polarity.value}{self.body}{cond} -> {to}"


def offer(promiser: str, promisees, body, conditions=(), **kw) -> Promise:
    return Promise(promiser, promisees, Polarity.OFFER, as_body(body), tuple(as_body(c) for c in conditions), **kw)


def accept(promiser: str, promisees, body, **kw) -> Promise:
    return Promise(promiser, promisees, Polarity.ACCEPT, as_body(body), **kw)


@dataclass(frozen=True)
class Variable:
    """An interior variable. ``history`` is the declared memory depth:
    0 = constant/no input memory, 1 = depends on the current input only,
    k > 1 = accumulates the last k interactions."""

    name: str
    domain: tuple = ()
    history: int = 0
    constant: bool = False

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))


@dataclass(frozen=True)
class Agent:
    id: str
    variables: tuple[Variable, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(sorted(self.variables, key=lambda v: v.name)))

    @property
    def scale(self) -> int:
        return 0

    @property
    def memory_depth(self) -> int:
        return max((v.history for v in self.variables), default=0)

    def variable(self, name: str) -> Variable | None:
        for v in self.variables:
            if v.name == name:
                return v
        return None


@dataclass(frozen=True)
class SuperAgent(Agent):
    """A cluster of non-overlapping agents acting as one agent.

    ``interior`` keeps every original promise made by a member, including
    the ones that became exterior (derived) promises of the cluster.
    ``derived`` are the promises the cluster makes to the outside.
    """

    members: tuple[Agent, ...] = ()
    interior: tuple[Promise, ...] = ()
    derived: tuple[Promise, ...] = ()
    level: int = 1

    @property
    def scale(self) -> int:
        return self.level

    @property
    def member_ids(self) -> frozenset[str]:
        return frozenset(m.id for m in self.members)

    def member(self, agent_id: str) -> Agent:
        for m in self.members:
            if m.id == agent_id:
                return m
        raise KeyError(agent_id)

    def interior_graph(self) -> "PromiseGraph":
        """Members and only the promises wholly inside the boundary."""
        ids = self.member_ids
        inner = [p for p in self.interior if not p.is_wildcard and p.promisees <= ids]
        return PromiseGraph(self.members, inner)


@dataclass(frozen=True)
class Binding:
    offer: Promise
    accept: Promise
    effective_body: Body

    @property
    def sender(self) -> str:
        return self.offer.promiser

    @property
    def receiver(self) -> str:
        return self.accept.promiser

    @property
    def imposed(self) -> bool:
        return self.offer.imposed

    def __str__(self) -> str:
        return f"{self.sender} -{self.effective_body}-> {self.receiver}"


@dataclass(frozen=True)
class Assessment:
    """A local verdict by ``assessor`` on one promise (referenced by id)."""

    assessor: str
    promise: str
    verdict: Verdict
    sample_time: int = 0

    def __post_init__(self):
        if isinstance(self.promise, Promise):
            object.__setattr__(self, "promise", self.promise.id)
        if not isinstance(self.verdict, Verdict):
            object.__setattr__(self, "verdict", Verdict(self.verdict))


@dataclass(frozen=True)
class PromiseGraph:
    agents: tuple[Agent, ...] = ()
    promises: tuple[Promise, ...] = ()
    scale: int = 0

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(sorted(self.agents, key=lambda a: a.id)))
        object.__setattr__(self, "promises", tuple(sorted(self.promises, key=lambda p: p.id)))

    @cached_property
    def _agent_index(self) -> dict[str, Agent]:
        return {a.id: a for a in self.agents}

    @property
    def agent_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.agents)

    def agent(self, agent_id: str) -> Agent:
        try:
            return self._agent_index[agent_id]
        except KeyError:
            raise ModelValidationError(f"unknown agent {agent_id!r}") from None

    def has_agent(self, agent_id: str) -> bool:
        return agent_id in self._agent_index

    def promise(self, promise_id: str) -> Promise:
        for p in self.promises:
            if p.id == promise_id:
                return p
        raise KeyError(promise_id)

    def promises_by(self, agent_id: str) -> tuple[Promise, ...]:
        return tuple(p for p in self.promises if p.promiser == agent_id)

    def offers_by(self, agent_id: str) -> tuple[Promise, ...]:
        return tuple(p for p in self.promises if p.promiser == agent_id and p.is_offer)

    def accepts_by(self, agent_id: str) -> tuple[Promise, ...]:
        return tuple(p for p in self.promises if p.promiser == agent_id and p.is_accept)

    def diagnostics(self) -> list[str]:
        problems = []
        seen_agents = set()
        for a in self.agents:
            if a.id in seen_agents:
                problems.append(f"duplicate agent id {a.id!r}")
            if a.id == WILDCARD:
                problems.append("agent id '*' is reserved for wildcard promisees")
            seen_agents.add(a.id)
        seen_ids = set()
        for p in self.promises:
            if p.id in seen_ids:
                problems.append(f"promise {p.id!r}: duplicate promise id")
            seen_ids.add(p.id)
            if p.promiser not in seen_agents:
                problems.append(f"promise {p.id!r}: promiser {p.promiser!r} is not a declared agent")
            for r in sorted(p.promisees - {WILDCARD}):
                if r not in seen_agents:
                    problems.append(f"promise {p.id!r}: promisee {r!r} is not a declared agent")
            if not p.body:
                problems.append(f"promise {p.id!r}: empty body")
            if p.is_accept and p.conditions:
                problems.append(f"promise {p.id!r}: accept promises cannot carry conditions")
            if p.lifetime is not None and p.lifetime < 0:
                problems.append(f"promise {p.id!r}: negative lifetime")
        return problems

    def check(self) -> "PromiseGraph":
        problems = self.diagnostics()
        if problems:
            raise ModelValidationError(problems[0], problems)
        return self


def _sort_key(b: Binding):
    return (b.sender, b.receiver, b.effective_body.labels, b.offer.id, b.accept.id)


def bind_promises(model: PromiseGraph) -> tuple[Binding, ...]:
    """All offer/accept pairs that address each other with overlapping bodies.

    An agent never binds with itself.
    """
    model.check()
    offers = [p for p in model.promises if p.is_offer]
    accepts = [p for p in model.promises if p.is_accept]
    out = []
    for o in offers:
        for a in accepts:
            if o.promiser == a.promiser:
                continue
            if not (o.addresses(a.promiser) and a.addresses(o.promiser)):
                continue
            eff = o.body & a.body
            if eff:
                out.append(Binding(o, a, eff))
    return tuple(sorted(out, key=_sort_key))


def _housed_labels(agent: Agent) -> frozenset[str]:
    return frozenset(v.name for v in agent.variables)


def resolve_conditionals(
    model: PromiseGraph, assessments: Iterable[Assessment] = ()
) -> dict[Promise, Resolution]:
    kept = {(a.assessor, a.promise) for a in assessments if a.verdict is Verdict.KEPT}
    bindings = bind_promises(model)
    result: dict[Promise, Resolution] = {}
    for p in model.promises:
        if not p.conditions:
            result[p] = Resolution.UNCONDITIONAL
            continue
        covered = set(_housed_labels(model.agent(p.promiser)))
        for b in bindings:
            if b.receiver == p.promiser and (p.promiser, b.offer.id) in kept:
                covered |= b.effective_body.terms
        complete = all(c.terms <= covered for c in p.conditions)
        result[p] = Resolution.COMPLETE if complete else Resolution.INCOMPLETE
    return result


def cluster_id(cluster: Iterable[str]) -> str:
    return "{" + ",".join(sorted(cluster)) + "}"


def collapse_assisted(
    model: PromiseGraph, cluster: Iterable[str], name: str | None = None
) -> PromiseGraph:
    """Redraw the boundary around ``cluster`` and treat it as one agent.

    Promises wholly inside the cluster disappear from view; exterior
    promises keep their bodies and ids. A condition of an exterior promise
    is erased when the promiser receives it over an interior binding or
    houses it as a variable.
    """
    cluster = frozenset(cluster)
    if not cluster:
        raise ValueError("cluster must contain at least one agent")
    model.check()
    for a in sorted(cluster):
        model.agent(a)
    if len(cluster) == 1:
        return model
    sid = name or cluster_id(cluster)
    if model.has_agent(sid) and sid not in cluster:
        raise ModelValidationError(f"cluster name {sid!r} collides with an existing agent")

    members = tuple(model.agent(a) for a in sorted(cluster))
    member_promises = tuple(p for p in model.promises if p.promiser in cluster)
    internal = [p for p in member_promises if not p.is_wildcard and p.promisees <= cluster]
    inner_graph = PromiseGraph(members, internal)
    inner_bindings = bind_promises(inner_graph)

    def supplied(agent_id: str) -> frozenset[str]:
        labels = set(_housed_labels(inner_graph.agent(agent_id)))
        for b in inner_bindings:
            if b.receiver == agent_id:
                labels |= b.effective_body.terms
        return frozenset(labels)

    internal_ids = {p.id for p in internal}
    derived = []
    for p in member_promises:
        if p.id in internal_ids:
            continue
        have = supplied(p.promiser)
        conds = tuple(c for c in p.conditions if not c.terms <= have)
        to = p.promisees if p.is_wildcard else p.promisees - cluster
        derived.append(replace(p, promiser=sid, promisees=to, conditions=conds))

    others = []
    for p in model.promises:
        if p.promiser in cluster:
            continue
        if not p.is_wildcard and p.promisees & cluster:
            p = replace(p, promisees=(p.promisees - cluster) | {sid})
        others.append(p)

    variables = tuple(v for m in members for v in m.variables)
    seen = set()
    uniq = []
    for v in variables:
        if v not in seen:
            seen.add(v)
            uniq.append(v)
    sup = SuperAgent(
        sid,
        tuple(uniq),
        members=members,
        interior=member_promises,
        derived=tuple(sorted(derived, key=lambda q: q.id)),
        level=1 + max(m.scale for m in members),
    )
    agents = [a for a in model.agents if a.id not in cluster] + [sup]
    return PromiseGraph(tuple(agents), tuple(others + derived), model.scale)


def remove_agent(model: PromiseGraph, agent_id: str) -> PromiseGraph:
    """Drop an agent, its promises, and its name from other promisee sets."""
    model.agent(agent_id)
    kept = []
    for p in model.promises:
        if p.promiser == agent_id:
            continue
        if agent_id in p.promisees:
            rest = p.promisees - {agent_id}
            if not rest:
                continue
            p = replace(p, promisees=rest)
        kept.append(p)
    agents = tuple(a for a in model.agents if a.id != agent_id)
    return PromiseGraph(agents, tuple(kept), model.scale)
