"""Value types for the simulator: clocks, channels, messages, processes,
faults and scenarios."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Mapping

from ..core import ModelValidationError, PromiseGraph, bind_promises


class ScenarioError(ModelValidationError):
    pass


@dataclass
class Clock:
    """Proper time of one agent. Only the owner advances it."""

    owner: str
    proper_time: int = 0

    def tick(self, n: int = 1) -> int:
        if n < 0:
            raise ValueError("clocks never run backwards")
        self.proper_time += n
        return self.proper_time


@dataclass(frozen=True)
class Message:
    id: str
    label: str
    payload: Any
    sent_at: int
    sender: str = ""
    seq: int | None = None


def _rate(value) -> Fraction:
    r = Fraction(value).limit_denominator(10**6) if isinstance(value, float) else Fraction(value)
    if r < 0:
        raise ScenarioError(f"rate {value} is negative")
    return min(r, Fraction(1))


@dataclass(frozen=True)
class ChannelSpec:
    """Parameters of one message channel ``sender -label-> receiver``.

    Rates are per global step and capped at 1. ``schedule`` lists explicit
    global steps at which an unconditional sender emits, overriding
    ``send_rate``. ``payloads`` optionally cycles through fixed values for
    an unconditional sender that has no variable of the same name.
    """

    sender: str
    receiver: str
    label: str
    send_rate: Fraction = Fraction(1)
    service_rate: Fraction = Fraction(1)
    loss_probability: float = 0.0
    reorder: bool = False
    schedule: tuple[int, ...] | None = None
    payloads: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "send_rate", _rate(self.send_rate))
        object.__setattr__(self, "service_rate", _rate(self.service_rate))
        if not 0.0 <= float(self.loss_probability) <= 1.0:
            raise ScenarioError(f"channel {self.key}: loss_probability outside [0,1]")
        if self.schedule is not None:
            object.__setattr__(self, "schedule", tuple(sorted(int(s) for s in self.schedule)))
        if self.payloads is not None:
            object.__setattr__(self, "payloads", tuple(self.payloads))

    @property
    def key(self) -> str:
        return f"{self.sender}->{self.receiver}:{self.label}"


class Mode(str, enum.Enum):
    RETARDED = "retarded"
    ADVANCED = "advanced"


def _step_toward(domain: tuple, target):
    idx = {v: i for i, v in enumerate(domain)}
    goal = idx[target]

    def f(x):
        i = idx[x]
        if i < goal:
            return domain[i + 1]
        if i > goal:
            return domain[i - 1]
        return x

    return f


@dataclass(frozen=True)
class ProcessSpec:
    """How one interior variable evolves.

    For ``advanced`` processes ``transition`` is an update rule: a mapping
    value -> value, a callable, or one of the named rules ``"set"`` (jump
    to the desired state) and ``"step"`` (move one domain position toward
    it). For ``retarded`` processes it is a conditional next-state table
    ``{context: {next: probability}}`` where the context is the last
    ``order`` values (a bare value when ``order == 1``, ``()`` when 0).
    ``maintenance_interval`` 0 means maintenance is off.
    """

    mode: Mode
    domain: tuple
    transition: Any
    desired_state: Any = None
    drift_rate: float = 0.0
    maintenance_interval: int = 0
    order: int = 1
    initial: Any = None
    agent: str = ""
    variable: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "domain", tuple(self.domain))

    @property
    def key(self) -> str:
        return f"{self.agent}.{self.variable}"

    def update_rule(self) -> Callable[[Any], Any]:
        t = self.transition
        if callable(t):
            return t
        if t == "set":
            return lambda x: self.desired_state
        if t == "step":
            return _step_toward(self.domain, self.desired_state)
        if isinstance(t, Mapping):
            return lambda x: t[x]
        raise ScenarioError(f"process {self.key}: unusable transition {t!r}")

    def validate(self) -> "ProcessSpec":
        if not self.domain:
            raise ScenarioError(f"process {self.key}: empty domain")
        if not 0.0 <= self.drift_rate <= 1.0:
            raise ScenarioError(f"process {self.key}: drift_rate outside [0,1]")
        if self.maintenance_interval < 0:
            raise ScenarioError(f"process {self.key}: negative maintenance_interval")
        if self.mode is Mode.ADVANCED:
            self._validate_advanced()
        else:
            self._validate_retarded()
        return self

    def _validate_advanced(self):
        if self.desired_state not in self.domain:
            raise ScenarioError(f"process {self.key}: desired_state not in domain")
        f = self.update_rule()
        try:
            fixed = f(self.desired_state)
        except (KeyError, TypeError):
            fixed = None
        if fixed != self.desired_state:
            raise ScenarioError(
                f"process {self.key}: transition has no fixed point at desired state "
                f"{self.desired_state!r}"
            )
        for x in self.domain:
            y = x
            for _ in range(len(self.domain)):
                if y == self.desired_state:
                    break
                try:
                    y = f(y)
                except (KeyError, TypeError):
                    raise ScenarioError(f"process {self.key}: transition undefined at {y!r}") from None
                if y not in self.domain:
                    raise ScenarioError(f"process {self.key}: transition leaves the domain at {y!r}")
            if y != self.desired_state:
                raise ScenarioError(
                    f"process {self.key}: {x!r} does not converge to {self.desired_state!r}"
                )

    def _validate_retarded(self):
        t = self.transition
        if not isinstance(t, Mapping) or not t:
            raise ScenarioError(f"process {self.key}: retarded process needs a transition table")
        for ctx, row in t.items():
            total = sum(Fraction(p).limit_denominator(10**9) for p in row.values())
            if abs(float(total) - 1.0) > 1e-9:
                raise ScenarioError(f"process {self.key}: row {ctx!r} sums to {float(total)}")
            for nxt in row:
                if nxt not in self.domain:
                    raise ScenarioError(f"process {self.key}: {nxt!r} not in domain")


class FaultKind(str, enum.Enum):
    KILL = "kill"
    DROP = "drop"
    PERTURB = "perturb"


@dataclass(frozen=True)
class Fault:
    """``kill``: target is an agent id. ``drop``: target is a channel key
    ``sender->receiver:label`` (or ``sender->receiver`` for all labels).
    ``perturb``: target is ``agent.variable``; ``value`` None means a
    uniform draw from the domain. ``until_step`` None means permanent."""

    kind: FaultKind
    target: str
    at_step: int
    until_step: int | None = None
    value: Any = None
    lose_state: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", FaultKind(self.kind))
        if self.at_step < 1:
            raise ScenarioError("faults start at global step 1 or later")
        if self.until_step is not None and self.until_step <= self.at_step:
            raise ScenarioError("until_step must be after at_step")

    def active(self, step: int) -> bool:
        return self.at_step <= step and (self.until_step is None or step < self.until_step)


@dataclass(frozen=True)
class Scenario:
    channels: tuple[ChannelSpec, ...] = ()
    processes: tuple[ProcessSpec, ...] = ()
    faults: tuple[Fault, ...] = ()
    service_lag: Mapping[str, int] = field(default_factory=dict)
    lookups: Mapping[str, Mapping] = field(default_factory=dict)
    tau_sync: int | None = None
    orientation: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(sorted(self.channels, key=lambda c: c.key)))
        object.__setattr__(self, "processes", tuple(sorted(self.processes, key=lambda p: p.key)))
        object.__setattr__(self, "faults", tuple(self.faults))
        object.__setattr__(self, "orientation", tuple(self.orientation))

    def names(self) -> set[str]:
        out = set()
        for c in self.channels:
            out |= {c.sender, c.receiver}
        for p in self.processes:
            out.add(p.agent)
        return out

    def validate(self, model: PromiseGraph) -> "Scenario":
        problems = []
        bindings = bind_promises(model)
        for c in self.channels:
            for a in (c.sender, c.receiver):
                if not model.has_agent(a):
                    problems.append(f"channel {c.key}: unknown agent {a!r}")
            if not any(
                b.sender == c.sender and b.receiver == c.receiver and c.label in b.effective_body.terms
                for b in bindings
            ):
                problems.append(f"channel {c.key}: no binding carries label {c.label!r}")
        keys = set()
        for p in self.processes:
            if not model.has_agent(p.agent):
                problems.append(f"process {p.key}: unknown agent {p.agent!r}")
            if p.key in keys:
                problems.append(f"process {p.key}: declared twice")
            keys.add(p.key)
            try:
                p.validate()
            except ScenarioError as e:
                problems.append(str(e))
        for f in self.faults:
            try:
                check_fault_target(f, model, self)
            except ScenarioError as e:
                problems.append(str(e))
        for a, lag in self.service_lag.items():
            if not model.has_agent(a):
                problems.append(f"service_lag: unknown agent {a!r}")
            if lag < 0:
                problems.append(f"service_lag: negative lag for {a!r}")
        if problems:
            raise ScenarioError(problems[0], problems)
        return self


def check_fault_target(fault: Fault, model: PromiseGraph | None, scenario: Scenario) -> None:
    if fault.kind is FaultKind.KILL:
        known = model.has_agent(fault.target) if model is not None else fault.target in scenario.names()
        if not known:
            raise ScenarioError(f"fault {fault.kind.value}: unknown agent {fault.target!r}")
    elif fault.kind is FaultKind.DROP:
        if not any(c.key == fault.target or c.key.startswith(fault.target + ":") for c in scenario.channels):
            raise ScenarioError(f"fault drop: unknown channel {fault.target!r}")
    else:
        if not any(p.key == fault.target for p in scenario.processes):
            raise ScenarioError(f"fault perturb: unknown variable {fault.target!r}")


def inject_fault(scenario: Scenario, fault: Fault, model: PromiseGraph | None = None) -> Scenario:
    """Return ``scenario`` extended with ``fault``; the target must exist."""
    check_fault_target(fault, model, scenario)
    return replace(scenario, faults=scenario.faults + (fault,))


def channels_for(model: PromiseGraph, **params) -> tuple[ChannelSpec, ...]:
    """One channel per binding label, all sharing ``params``."""
    out = []
    for b in bind_promises(model):
        for label in b.effective_body.labels:
            out.append(ChannelSpec(b.sender, b.receiver, label, **params))
    uniq = {c.key: c for c in out}
    return tuple(uniq[k] for k in sorted(uniq))
