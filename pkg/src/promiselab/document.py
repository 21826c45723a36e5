"""YAML model and scenario documents.

Model document (``version: 1`` is mandatory)::

    version: 1
    name: cond1                      # optional
    agents:
      - id: D
        variables:                   # optional
          - {name: d, domain: [0, 1], history: 0, constant: false}
    promises:
      - promiser: S
        promisees: [R]               # or "*"
        polarity: "+"                # "+"/offer/impose or "-"/accept
        body: [s]                    # or {s: [domain values]}
        conditions: [[d]]            # list of bodies, optional
        constant: false              # optional flags
        imposed: false
        history: 1
        lifetime: null
        scope: null
        id: "S+s|d>R"                # optional, derived when absent
    partitions:                      # optional, name -> member ids
      backend: [S, D]
    scenario: {...}                  # optional default scenario

Scenario document (also accepted inline under ``scenario:``)::

    version: 1
    steps: 100
    channels:
      - {sender: D, receiver: S, label: d, send_rate: 1, service_rate: "1/2",
         loss_probability: 0.0, reorder: false, schedule: [1, 5], payloads: [a]}
    processes:
      - {agent: A, variable: x, mode: advanced, domain: [0, 1, 2],
         transition: set, desired_state: 0, drift_rate: 0.1,
         maintenance_interval: 1, initial: 2}
      - {agent: M, variable: y, mode: retarded, order: 1, domain: [a, b],
         transition: [{context: [a], next: {a: 0.9, b: 0.1}}, ...]}
    faults:
      - {kind: kill, target: D, at_step: 5, until_step: null, lose_state: true}
    service_lag: {S: 3}
    lookups: {S.s: {0: zero, 1: one}}
    tau_sync: 10
    orientation: [D, S, R]
    transaction:
      T: 3
      channel: {sender: S, receiver: A, label: m, loss_probability: 0.3}
      kill: {at_step: 2, down: 1, buffer_intact: true}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import yaml

from .core import Agent, Body, ModelValidationError, Polarity, Promise, PromiseGraph, Variable
from .sim.model import ChannelSpec, Fault, Mode, ProcessSpec, Scenario, ScenarioError
from .sim.transaction import Kill

VERSION = 1


class DocumentError(ModelValidationError):
    pass


@dataclass(frozen=True)
class TransactionSpec:
    T: int
    channel: ChannelSpec
    kill: Kill | None = None
    messages: tuple | None = None
    max_steps: int = 5000


@dataclass(frozen=True)
class ScenarioDocument:
    scenario: Scenario
    steps: int | None = None
    transaction: TransactionSpec | None = None


@dataclass(frozen=True)
class ModelDocument:
    model: PromiseGraph
    partitions: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    scenario: ScenarioDocument | None = None
    name: str = ""
    version: int = VERSION


# -- locating nodes -----------------------------------------------------------


def _line_map(node, path=(), out=None) -> dict[tuple, int]:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Ctx:
    def __init__(self, source: str, lines: dict[tuple, int]):
        self.source = source
        self.lines = lines
        self.problems: list[str] = []

    def line(self, path: tuple) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return self.lines.get(())

    def add(self, path: tuple, message: str):
        where = ".".join(str(p) if not isinstance(p, int) else f"[{p}]" for p in path).replace(".[", "[")
        ln = self.line(path)
        loc = f"{self.source}:{ln}" if ln else self.source
        self.problems.append(f"{loc}: {where or '<document>'}: {message}")

    def raise_if_any(self):
        if self.problems:
            raise DocumentError(self.problems[0], self.problems)


def _load(text: str, source: str):
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        ln = f":{mark.line + 1}" if mark is not None else ""
        raise DocumentError(f"{source}{ln}: not valid YAML: {getattr(e, 'problem', e)}") from None
    lines = _line_map(node) if node is not None else {}
    return data, _Ctx(source, lines)


# -- scalar helpers ------------------------------------------------------------


def _fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**6)
    return Fraction(str(value))


def _dump_fraction(value: Fraction):
    return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def _body(value, ctx: _Ctx, path) -> Body:
    if isinstance(value, str):
        return Body.of(value)
    if isinstance(value, Mapping):
        return Body(frozenset(str(k) for k in value), {str(k): tuple(v or ()) for k, v in value.items()})
    if isinstance(value, list) and all(isinstance(x, (str, int)) for x in value):
        return Body(frozenset(str(x) for x in value))
    ctx.add(path, "body must be a label, a list of labels or a map label -> domain")
    return Body(frozenset())


def _dump_body(b: Body):
    if b.domains:
        doms = dict(b.domains)
        return {lbl: list(doms.get(lbl, ())) for lbl in b.labels}
    return list(b.labels)


def _check_keys(d: Mapping, allowed: set, ctx: _Ctx, path):
    for k in d:
        if k not in allowed:
            ctx.add(path + (k,), f"unknown field {k!r}")


def _require(d: Mapping, key: str, ctx: _Ctx, path):
    if key not in d or d[key] is None:
        ctx.add(path, f"missing required field {key!r}")
        return None
    return d[key]


# -- model ---------------------------------------------------------------------

_AGENT_KEYS = {"id", "variables"}
_VAR_KEYS = {"name", "domain", "history", "constant"}
_PROMISE_KEYS = {
    "id", "promiser", "promisees", "polarity", "body", "conditions",
    "constant", "imposed", "history", "lifetime", "scope",
}
_TOP_KEYS = {"version", "name", "agents", "promises", "partitions", "scenario"}


def _parse_agents(items, ctx: _Ctx) -> list[Agent]:
    agents = []
    if items is None:
        return agents
    if not isinstance(items, list):
        ctx.add(("agents",), "must be a list")
        return agents
    for i, a in enumerate(items):
        path = ("agents", i)
        if isinstance(a, str):
            agents.append(Agent(a))
            continue
        if not isinstance(a, Mapping):
            ctx.add(path, "agent must be an id or a map")
            continue
        _check_keys(a, _AGENT_KEYS, ctx, path)
        aid = _require(a, "id", ctx, path)
        if aid is None:
            continue
        variables = []
        for j, v in enumerate(a.get("variables") or ()):
            vpath = path + ("variables", j)
            if isinstance(v, str):
                variables.append(Variable(v))
                continue
            if not isinstance(v, Mapping) or "name" not in v:
                ctx.add(vpath, "variable needs a name")
                continue
            _check_keys(v, _VAR_KEYS, ctx, vpath)
            hist = v.get("history", 0)
            if not isinstance(hist, int) or hist < 0:
                ctx.add(vpath + ("history",), "history must be a non-negative integer")
                hist = 0
            variables.append(Variable(str(v["name"]), tuple(v.get("domain") or ()), hist, bool(v.get("constant", False))))
        agents.append(Agent(str(aid), tuple(variables)))
    seen = set()
    for i, a in enumerate(agents):
        if a.id in seen:
            ctx.add(("agents", i, "id"), f"duplicate agent id {a.id!r}")
        seen.add(a.id)
    return agents


def _parse_promises(items, known: set[str], ctx: _Ctx) -> list[Promise]:
    out = []
    if items is None:
        return out
    if not isinstance(items, list):
        ctx.add(("promises",), "must be a list")
        return out
    for i, p in enumerate(items):
        path = ("promises", i)
        if not isinstance(p, Mapping):
            ctx.add(path, "promise must be a map")
            continue
        _check_keys(p, _PROMISE_KEYS, ctx, path)
        promiser = _require(p, "promiser", ctx, path)
        promisees = _require(p, "promisees", ctx, path)
        pol = _require(p, "polarity", ctx, path)
        body = _require(p, "body", ctx, path)
        if None in (promiser, promisees, pol, body):
            continue
        imposed = bool(p.get("imposed", False))
        if pol == "impose":
            pol, imposed = "+", True
        try:
            polarity = Polarity.parse(pol)
        except (ValueError, KeyError):
            ctx.add(path + ("polarity",), f"unknown polarity {pol!r}")
            continue
        if isinstance(promisees, str):
            promisees = [promisees]
        conds = tuple(_body(c, ctx, path + ("conditions", j)) for j, c in enumerate(p.get("conditions") or ()))
        hist = p.get("history")
        if hist is not None and (not isinstance(hist, int) or hist < 0):
            ctx.add(path + ("history",), "history must be a non-negative integer")
            hist = None
        try:
            promise = Promise(
                str(promiser),
                frozenset(str(x) for x in promisees),
                polarity,
                _body(body, ctx, path + ("body",)),
                conds,
                constant=bool(p.get("constant", False)),
                lifetime=p.get("lifetime"),
                imposed=imposed,
                scope=p.get("scope"),
                history=hist,
                id=str(p.get("id") or ""),
            )
        except ModelValidationError as e:
            ctx.add(path, str(e))
            continue
        if str(promiser) not in known:
            ctx.add(path + ("promiser",), f"promise {promise.id}: unknown agent {promiser!r}")
        for j, who in enumerate(promisees):
            if who != "*" and str(who) not in known:
                ctx.add(path + ("promisees", j), f"promise {promise.id}: unknown agent {who!r}")
        out.append(promise)
    ids = {}
    for i, p in enumerate(out):
        if p.id in ids:
            ctx.add(("promises", i), f"duplicate promise id {p.id!r}")
        ids[p.id] = i
    return out


def _model_from_data(data, ctx: _Ctx) -> ModelDocument:
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        ctx.add((), "document must be a map")
        ctx.raise_if_any()
    _check_keys(data, _TOP_KEYS, ctx, ())
    version = data.get("version")
    if version is None:
        ctx.add((), "missing required field 'version'")
    elif version != VERSION:
        ctx.add(("version",), f"unsupported version {version!r} (expected {VERSION})")
    agents = _parse_agents(data.get("agents"), ctx)
    known = {a.id for a in agents}
    promises = _parse_promises(data.get("promises"), known, ctx)
    partitions = {}
    for name, members in (data.get("partitions") or {}).items():
        path = ("partitions", name)
        if not isinstance(members, list) or not members:
            ctx.add(path, "partition must be a non-empty list of agent ids")
            continue
        for j, m in enumerate(members):
            if str(m) not in known:
                ctx.add(path + (j,), f"partition {name}: unknown agent {m!r}")
        partitions[str(name)] = tuple(str(m) for m in members)
    ctx.raise_if_any()
    model = PromiseGraph(tuple(agents), tuple(promises))
    problems = model.diagnostics()
    for msg in problems:
        ctx.add(("promises",), msg)
    ctx.raise_if_any()
    scenario = None
    if data.get("scenario") is not None:
        scenario = _scenario_from_data(data["scenario"], ctx, ("scenario",), require_version=False)
        try:
            scenario.scenario.validate(model)
        except ScenarioError as e:
            for msg in e.diagnostics:
                ctx.add(("scenario",), msg)
        ctx.raise_if_any()
    return ModelDocument(model, partitions, scenario, str(data.get("name") or ""), VERSION)


def parse_model(text: str, source: str = "<string>") -> ModelDocument:
    data, ctx = _load(text, source)
    return _model_from_data(data, ctx)


def load_model(path: str | Path) -> ModelDocument:
    text = Path(path).read_text(encoding="utf-8")
    return parse_model(text, str(path))


def model_to_data(doc: ModelDocument) -> dict:
    out: dict[str, Any] = {"version": doc.version}
    if doc.name:
        out["name"] = doc.name
    agents = []
    for a in doc.model.agents:
        entry: dict[str, Any] = {"id": a.id}
        if a.variables:
            entry["variables"] = [
                {"name": v.name, "domain": list(v.domain), "history": v.history, "constant": v.constant}
                for v in a.variables
            ]
        agents.append(entry)
    out["agents"] = agents
    promises = []
    for p in doc.model.promises:
        entry = {
            "id": p.id,
            "promiser": p.promiser,
            "promisees": "*" if p.is_wildcard else sorted(p.promisees),
            "polarity": p.polarity.value,
            "body": _dump_body(p.body),
        }
        if p.conditions:
            entry["conditions"] = [_dump_body(c) for c in p.conditions]
        for flag in ("constant", "imposed"):
            if getattr(p, flag):
                entry[flag] = True
        for opt in ("history", "lifetime", "scope"):
            if getattr(p, opt) is not None:
                entry[opt] = getattr(p, opt)
        promises.append(entry)
    out["promises"] = promises
    if doc.partitions:
        out["partitions"] = {k: list(v) for k, v in sorted(doc.partitions.items())}
    if doc.scenario is not None:
        sc = scenario_to_data(doc.scenario)
        sc.pop("version", None)
        out["scenario"] = sc
    return out


def dump_model(doc: ModelDocument) -> str:
    return yaml.safe_dump(model_to_data(doc), sort_keys=False, allow_unicode=True)


# -- scenario ------------------------------------------------------------------

_CHANNEL_KEYS = {
    "sender", "receiver", "label", "send_rate", "service_rate",
    "loss_probability", "reorder", "schedule", "payloads",
}
_PROCESS_KEYS = {
    "agent", "variable", "mode", "domain", "transition", "desired_state",
    "drift_rate", "maintenance_interval", "order", "initial",
}
_FAULT_KEYS = {"kind", "target", "at_step", "until_step", "value", "lose_state"}
_SCENARIO_KEYS = {
    "version", "steps", "channels", "processes", "faults", "service_lag",
    "lookups", "tau_sync", "orientation", "transaction",
}


def _channel(c, ctx: _Ctx, path) -> ChannelSpec | None:
    if not isinstance(c, Mapping):
        ctx.add(path, "channel must be a map")
        return None
    _check_keys(c, _CHANNEL_KEYS, ctx, path)
    ends = [_require(c, k, ctx, path) for k in ("sender", "receiver", "label")]
    if None in ends:
        return None
    try:
        return ChannelSpec(
            str(ends[0]),
            str(ends[1]),
            str(ends[2]),
            _fraction(c.get("send_rate", 1)),
            _fraction(c.get("service_rate", 1)),
            float(c.get("loss_probability", 0.0)),
            bool(c.get("reorder", False)),
            tuple(c["schedule"]) if c.get("schedule") is not None else None,
            tuple(c["payloads"]) if c.get("payloads") is not None else None,
        )
    except (ValueError, ZeroDivisionError, ScenarioError) as e:
        ctx.add(path, str(e))
        return None


def _retarded_table(t, order: int, ctx: _Ctx, path):
    """Rows given either as a map (order <= 1, bare context keys) or as a
    list of {context: [...], next: {...}}."""
    table = {}
    if isinstance(t, Mapping):
        if order > 1:
            ctx.add(path, "order > 1 needs the list form with explicit contexts")
            return table
        for ctx_key, row in t.items():
            table[() if order == 0 else ctx_key] = dict(row)
        return table
    if isinstance(t, list):
        for i, row in enumerate(t):
            if not isinstance(row, Mapping) or "next" not in row:
                ctx.add(path + (i,), "row needs 'context' and 'next'")
                continue
            c = tuple(row.get("context") or ())
            if len(c) != order:
                ctx.add(path + (i, "context"), f"context must have length {order}")
                continue
            key = () if order == 0 else (c[0] if order == 1 else c)
            table[key] = dict(row["next"])
        return table
    ctx.add(path, "retarded transition must be a table")
    return table


def _process(p, ctx: _Ctx, path) -> ProcessSpec | None:
    if not isinstance(p, Mapping):
        ctx.add(path, "process must be a map")
        return None
    _check_keys(p, _PROCESS_KEYS, ctx, path)
    fields_ = [_require(p, k, ctx, path) for k in ("agent", "variable", "mode", "domain")]
    if None in fields_:
        return None
    agent, var, mode, domain = fields_
    try:
        mode = Mode(mode)
    except ValueError:
        ctx.add(path + ("mode",), f"unknown mode {mode!r}")
        return None
    order = int(p.get("order", 1))
    transition = p.get("transition", "set" if mode is Mode.ADVANCED else None)
    if mode is Mode.RETARDED:
        transition = _retarded_table(transition, order, ctx, path + ("transition",))
    try:
        spec = ProcessSpec(
            mode,
            tuple(domain),
            transition,
            p.get("desired_state"),
            float(p.get("drift_rate", 0.0)),
            int(p.get("maintenance_interval", 0)),
            order,
            p.get("initial"),
            str(agent),
            str(var),
        )
        return spec.validate()
    except ScenarioError as e:
        ctx.add(path, str(e))
        return None


def _fault(f, ctx: _Ctx, path) -> Fault | None:
    if not isinstance(f, Mapping):
        ctx.add(path, "fault must be a map")
        return None
    _check_keys(f, _FAULT_KEYS, ctx, path)
    vals = [_require(f, k, ctx, path) for k in ("kind", "target", "at_step")]
    if None in vals:
        return None
    try:
        return Fault(vals[0], str(vals[1]), int(vals[2]), f.get("until_step"), f.get("value"), bool(f.get("lose_state", True)))
    except (ValueError, ScenarioError) as e:
        ctx.add(path, str(e))
        return None


def _transaction(t, ctx: _Ctx, path) -> TransactionSpec | None:
    if not isinstance(t, Mapping):
        ctx.add(path, "transaction must be a map")
        return None
    _check_keys(t, {"T", "channel", "kill", "messages", "max_steps"}, ctx, path)
    T = _require(t, "T", ctx, path)
    ch = _channel(_require(t, "channel", ctx, path) or {}, ctx, path + ("channel",))
    if T is None or ch is None:
        return None
    if not isinstance(T, int) or T < 1:
        ctx.add(path + ("T",), "T must be a positive integer")
        return None
    kill = None
    if t.get("kill") is not None:
        k = t["kill"]
        try:
            kill = Kill(int(k["at_step"]), int(k.get("down", 1)), bool(k.get("buffer_intact", True)))
        except (KeyError, TypeError, ValueError):
            ctx.add(path + ("kill",), "kill needs at_step (and optional down, buffer_intact)")
    msgs = tuple(t["messages"]) if t.get("messages") is not None else None
    if msgs is not None and len(msgs) != T:
        ctx.add(path + ("messages",), "messages must have length T")
    return TransactionSpec(T, ch, kill, msgs, int(t.get("max_steps", 5000)))


def _scenario_from_data(data, ctx: _Ctx, base=(), require_version=True) -> ScenarioDocument:
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        ctx.add(base, "scenario must be a map")
        ctx.raise_if_any()
    _check_keys(data, _SCENARIO_KEYS, ctx, base)
    if require_version:
        version = data.get("version")
        if version is None:
            ctx.add(base, "missing required field 'version'")
        elif version != VERSION:
            ctx.add(base + ("version",), f"unsupported version {version!r} (expected {VERSION})")
    channels = [_channel(c, ctx, base + ("channels", i)) for i, c in enumerate(data.get("channels") or ())]
    processes = [_process(p, ctx, base + ("processes", i)) for i, p in enumerate(data.get("processes") or ())]
    faults = [_fault(f, ctx, base + ("faults", i)) for i, f in enumerate(data.get("faults") or ())]
    lag = {str(k): int(v) for k, v in (data.get("service_lag") or {}).items()}
    lookups = {str(k): dict(v) for k, v in (data.get("lookups") or {}).items()}
    tau = data.get("tau_sync")
    steps = data.get("steps")
    if steps is not None and (not isinstance(steps, int) or steps <= 0):
        ctx.add(base + ("steps",), "steps must be a positive integer")
    transaction = None
    if data.get("transaction") is not None:
        transaction = _transaction(data["transaction"], ctx, base + ("transaction",))
    ctx.raise_if_any()
    scenario = Scenario(
        tuple(channels),
        tuple(processes),
        tuple(faults),
        lag,
        lookups,
        int(tau) if tau is not None else None,
        tuple(str(a) for a in data.get("orientation") or ()),
    )
    return ScenarioDocument(scenario, steps, transaction)


def parse_scenario(text: str, source: str = "<string>") -> ScenarioDocument:
    data, ctx = _load(text, source)
    return _scenario_from_data(data, ctx)


def load_scenario(path: str | Path) -> ScenarioDocument:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), str(path))


def _channel_to_data(c: ChannelSpec) -> dict:
    out: dict[str, Any] = {
        "sender": c.sender,
        "receiver": c.receiver,
        "label": c.label,
        "send_rate": _dump_fraction(c.send_rate),
        "service_rate": _dump_fraction(c.service_rate),
        "loss_probability": float(c.loss_probability),
    }
    if c.reorder:
        out["reorder"] = True
    if c.schedule is not None:
        out["schedule"] = list(c.schedule)
    if c.payloads is not None:
        out["payloads"] = list(c.payloads)
    return out


def _process_to_data(p: ProcessSpec) -> dict:
    out: dict[str, Any] = {
        "agent": p.agent,
        "variable": p.variable,
        "mode": p.mode.value,
        "domain": list(p.domain),
    }
    if p.mode is Mode.ADVANCED:
        t = p.transition
        out["transition"] = dict(t) if isinstance(t, Mapping) else t
        out["desired_state"] = p.desired_state
    else:
        out["order"] = p.order
        rows = []
        for key, row in p.transition.items():
            ctx_ = [] if p.order == 0 else ([key] if p.order == 1 else list(key))
            rows.append({"context": ctx_, "next": dict(row)})
        out["transition"] = rows
    out["drift_rate"] = p.drift_rate
    out["maintenance_interval"] = p.maintenance_interval
    if p.initial is not None:
        out["initial"] = list(p.initial) if isinstance(p.initial, tuple) else p.initial
    return out


def scenario_to_data(doc: ScenarioDocument) -> dict:
    s = doc.scenario
    out: dict[str, Any] = {"version": VERSION}
    if doc.steps is not None:
        out["steps"] = doc.steps
    if s.channels:
        out["channels"] = [_channel_to_data(c) for c in s.channels]
    if s.processes:
        out["processes"] = [_process_to_data(p) for p in s.processes]
    if s.faults:
        out["faults"] = [
            {
                "kind": f.kind.value,
                "target": f.target,
                "at_step": f.at_step,
                "until_step": f.until_step,
                "value": f.value,
                "lose_state": f.lose_state,
            }
            for f in s.faults
        ]
    if s.service_lag:
        out["service_lag"] = dict(sorted(s.service_lag.items()))
    if s.lookups:
        out["lookups"] = {k: dict(v) for k, v in sorted(s.lookups.items())}
    if s.tau_sync is not None:
        out["tau_sync"] = s.tau_sync
    if s.orientation:
        out["orientation"] = list(s.orientation)
    if doc.transaction is not None:
        t = doc.transaction
        tx: dict[str, Any] = {"T": t.T, "channel": _channel_to_data(t.channel), "max_steps": t.max_steps}
        if t.kill is not None:
            tx["kill"] = {"at_step": t.kill.at_step, "down": t.kill.down, "buffer_intact": t.kill.buffer_intact}
        if t.messages is not None:
            tx["messages"] = list(t.messages)
        out["transaction"] = tx
    return out


def dump_scenario(doc: ScenarioDocument) -> str:
    return yaml.safe_dump(scenario_to_data(doc), sort_keys=False, allow_unicode=True)


def bundled_path(name: str) -> Path:
    """Path of a bundled example (``cond1`` or ``cond1.yaml``)."""
    here = Path(__file__).parent / "models"
    p = here / (name if name.endswith(".yaml") else f"{name}.yaml")
    if not p.exists():
        raise FileNotFoundError(p)
    return p


def bundled_names() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).parent / "models").glob("*.yaml"))
