"""Lock-step discrete-event simulation of a promise graph.

Each global step runs, in order: fault activation, interior processes,
unconditional senders, then sampling by receivers (which may trigger
conditional emissions). Messages sent during a step become visible in the
receiving queue at the next step. Agents never read the global step or any
other agent's clock; the scheduler uses them only for reporting.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Any

from ..core import Agent, Promise, PromiseGraph
from .model import ChannelSpec, Fault, FaultKind, Message, Scenario, Clock
from .process import ProcessState
from .trace import Event, Trace


@dataclass
class _Pending:
    promise: Promise
    labels: tuple[str, ...]
    fresh: dict
    waiting_since: int | None = None
    timed_out: bool = False


def combine(label: str, inputs: dict[str, Any]) -> str:
    """Default output of a conditional promise: a canonical rendering of
    its inputs, independent of the order in which they arrived."""
    inner = ",".join(f"{k}={inputs[k]}" for k in sorted(inputs))
    return f"{label}({inner})"


class Simulator:
    def __init__(self, model: PromiseGraph, scenario: Scenario, seed: int):
        model.check()
        scenario.validate(model)
        self.model = model
        self.scenario = scenario
        self.rng = random.Random(seed)
        self.trace = Trace()
        self.clocks = {a: Clock(a) for a in model.agent_ids}
        self.alive = {a: True for a in model.agent_ids}
        self.queues: dict[str, list[Message]] = {c.key: [] for c in scenario.channels}
        self.outbox: list[tuple[ChannelSpec, Message]] = []
        self.msg_count = 0
        self.emit_count: dict[tuple[str, str], int] = defaultdict(int)
        self.kept: dict[str, int] = {p.id: 0 for p in model.promises}
        self.sent = defaultdict(int)
        self.lost = defaultdict(int)
        self.sampled = defaultdict(int)
        self.max_queue = defaultdict(int)
        self.queue_area = defaultdict(int)
        self.processes = {p.key: ProcessState(p) for p in scenario.processes}
        self.channels = scenario.channels
        self.out_channels: dict[tuple[str, str], list[ChannelSpec]] = defaultdict(list)
        for c in self.channels:
            self.out_channels[(c.sender, c.label)].append(c)
        self.pending: dict[str, list[_Pending]] = defaultdict(list)
        for p in model.promises:
            if p.is_offer and p.conditions:
                labels = tuple(sorted(frozenset().union(*(c.terms for c in p.conditions))))
                self.pending[p.promiser].append(_Pending(p, labels, {}))
        self.steps = 0

    # helpers -------------------------------------------------------------

    def _record(self, step, agent, kind, message_id="", label="", payload=None):
        self.trace.append(
            Event(step, agent, self.clocks[agent].proper_time, kind, message_id, label, payload)
        )

    def _driving_offer(self, c: ChannelSpec) -> Promise | None:
        for p in self.model.offers_by(c.sender):
            if c.label in p.body.terms and p.addresses(c.receiver):
                return p
        return None

    def _dropped(self, c: ChannelSpec, step: int) -> bool:
        for f in self.scenario.faults:
            if f.kind is FaultKind.DROP and f.active(step):
                if f.target == c.key or c.key.startswith(f.target + ":"):
                    return True
        return False

    def _send(self, step: int, c: ChannelSpec, payload, sender_time: int):
        self.msg_count += 1
        msg = Message(f"m{self.msg_count}", c.label, payload, sender_time, c.sender)
        self.sent[c.key] += 1
        self._record(step, c.sender, "send", msg.id, c.label, payload)
        if self._dropped(c, step) or (c.loss_probability and self.rng.random() < c.loss_probability):
            self.lost[c.key] += 1
            self._record(step, c.sender, "lost", msg.id, c.label, payload)
            return
        self.outbox.append((c, msg))

    def _source_payload(self, c: ChannelSpec):
        proc = self.processes.get(f"{c.sender}.{c.label}")
        if proc is not None:
            return proc.value
        n = self.emit_count[(c.sender, c.label)]
        self.emit_count[(c.sender, c.label)] += 1
        if c.payloads:
            return c.payloads[n % len(c.payloads)]
        return n

    # phases --------------------------------------------------------------

    def _faults(self, step: int):
        for f in self.scenario.faults:
            if f.kind is FaultKind.KILL:
                if step == f.at_step and self.alive[f.target]:
                    self.alive[f.target] = False
                    self._record(step, f.target, "kill")
                    if f.lose_state:
                        for c in self.channels:
                            if c.receiver == f.target:
                                self.queues[c.key].clear()
                        for pend in self.pending[f.target]:
                            pend.fresh.clear()
                            pend.waiting_since = None
                if f.until_step is not None and step == f.until_step:
                    self.alive[f.target] = True
                    self._record(step, f.target, "restart")
            elif f.kind is FaultKind.PERTURB and step == f.at_step:
                agent, var = f.target.split(".", 1)
                value = self.processes[f.target].perturb(f.value, self.rng)
                self._record(step, agent, "perturb", "", var, value)

    def _interior(self, step: int):
        for key, proc in self.processes.items():
            agent = proc.spec.agent
            if not self.alive[agent]:
                continue
            for s in proc.step(step, self.rng):
                if s.ticks:
                    self.clocks[agent].tick(s.ticks)
                self._record(step, agent, s.kind, "", proc.spec.variable, s.value)

    def _sources(self, step: int):
        for c in self.channels:
            if not self.alive[c.sender]:
                continue
            p = self._driving_offer(c)
            if p is None or p.conditions:
                continue
            if c.schedule is not None:
                fire = step in c.schedule
            else:
                fire = self.rng.random() < c.send_rate
            if fire:
                # producing a fresh value is one interior step of the sender
                t = self.clocks[c.sender].tick()
                self._send(step, c, self._source_payload(c), t)
                self.kept[p.id] += 1

    def _emit(self, step: int, agent: str, pend: _Pending):
        lag = int(self.scenario.service_lag.get(agent, 0))
        for _ in range(lag):
            self.clocks[agent].tick()
            self._record(step, agent, "step")
        p = pend.promise
        label = ",".join(p.body.labels)
        table = self.scenario.lookups.get(f"{agent}.{label}")
        if table is not None and len(pend.fresh) == 1:
            key = next(iter(pend.fresh.values()))
            payload = table.get(key, table.get(str(key)))
        else:
            payload = combine(label, pend.fresh)
        self.kept[p.id] += 1
        self._record(step, agent, "keep", "", label, payload)
        t = self.clocks[agent].proper_time
        for out_label in p.body.labels:
            for c in self.out_channels.get((agent, out_label), ()):
                if p.addresses(c.receiver):
                    self._send(step, c, payload, t)
        pend.fresh = {}
        pend.waiting_since = None
        pend.timed_out = False

    def _sample(self, step: int):
        for c in self.channels:
            q = self.queues[c.key]
            if not q or not self.alive[c.receiver]:
                continue
            if self.rng.random() >= c.service_rate:
                continue
            idx = self.rng.randrange(len(q)) if c.reorder and len(q) > 1 else 0
            msg = q.pop(idx)
            agent = c.receiver
            self.clocks[agent].tick()
            self.sampled[c.key] += 1
            self._record(step, agent, "sample", msg.id, msg.label, msg.payload)
            for a in self.model.accepts_by(agent):
                if msg.label in a.body.terms and a.addresses(c.sender):
                    self.kept[a.id] += 1
            for pend in self.pending[agent]:
                if msg.label not in pend.labels:
                    continue
                if pend.waiting_since is None:
                    pend.waiting_since = self.clocks[agent].proper_time
                pend.fresh[msg.label] = msg.payload
                if all(lbl in pend.fresh for lbl in pend.labels):
                    self._emit(step, agent, pend)
                elif (
                    self.scenario.tau_sync is not None
                    and not pend.timed_out
                    and self.clocks[agent].proper_time - pend.waiting_since > self.scenario.tau_sync
                ):
                    pend.timed_out = True
                    self._record(step, agent, "timeout", "", ",".join(pend.promise.body.labels))

    def _flush(self):
        for c, msg in self.outbox:
            if self.alive[c.receiver] or not self._receiver_loses(c.receiver):
                self.queues[c.key].append(msg)
            else:
                self.lost[c.key] += 1
        self.outbox = []
        for key, q in self.queues.items():
            self.max_queue[key] = max(self.max_queue[key], len(q))
            self.queue_area[key] += len(q)

    def _receiver_loses(self, agent: str) -> bool:
        return any(
            f.kind is FaultKind.KILL and f.target == agent and f.lose_state for f in self.scenario.faults
        )

    def _annotate_feedback(self):
        order = {a: i for i, a in enumerate(self.scenario.orientation)}
        for c in self.channels:
            if c.sender in order and c.receiver in order and order[c.sender] > order[c.receiver]:
                self._record(0, c.receiver, "feedback", "", c.label, c.sender)

    def run(self, max_global_steps: int) -> Trace:
        if max_global_steps <= 0:
            raise ValueError("max_global_steps must be positive")
        self._annotate_feedback()
        for step in range(1, max_global_steps + 1):
            self._faults(step)
            self._interior(step)
            self._sources(step)
            self._sample(step)
            self._flush()
            self.steps = step
        self.trace.stats = self.summary()
        return self.trace

    def summary(self) -> dict:
        channels = {}
        for c in self.channels:
            sent = self.sent[c.key]
            channels[c.key] = {
                "sent": sent,
                "lost": self.lost[c.key],
                "sampled": self.sampled[c.key],
                "max_queue": self.max_queue[c.key],
                "mean_queue": self.queue_area[c.key] / self.steps if self.steps else 0.0,
                "rate_ratio": (self.sampled[c.key] / sent) if sent else None,
            }
        return {
            "steps": self.steps,
            "events": len(self.trace),
            "kept": dict(sorted(self.kept.items())),
            "channels": channels,
            "proper_time": {a: c.proper_time for a, c in sorted(self.clocks.items())},
        }


def run(model: PromiseGraph, scenario: Scenario, seed: int, max_global_steps: int) -> Trace:
    """Simulate ``model`` under ``scenario``. Equal inputs give equal traces."""
    if max_global_steps <= 0:
        raise ValueError("max_global_steps must be positive")
    if not isinstance(seed, int):
        raise TypeError("seed must be an integer")
    return Simulator(model, scenario, seed).run(max_global_steps)


def partition_nonblocking(model: PromiseGraph, agent_id: str) -> tuple[PromiseGraph, list[str]]:
    """Split an agent with several conditional offers into one subagent per
    offer, each accepting only what that offer depends on. Remaining
    promises go to a residual subagent. Returns the new graph and the ids
    of the subagents (composing them back under ``agent_id`` restores the
    exterior view)."""
    agent = model.agent(agent_id)
    mine = model.promises_by(agent_id)
    conditional = [p for p in mine if p.is_offer and p.conditions]
    if len(conditional) < 2:
        return model, [agent_id]
    subs: dict[str, list[Promise]] = {}
    used = set()
    for i, p in enumerate(conditional):
        sid = f"{agent_id}/{i}"
        need = frozenset().union(*(c.terms for c in p.conditions))
        mine_accepts = [a for a in mine if a.is_accept and a.body.terms & need]
        subs[sid] = [replace(p, promiser=sid)] + [
            replace(a, promiser=sid, id=f"{a.id}@{sid}") for a in mine_accepts
        ]
        used.add(p.id)
        used |= {a.id for a in mine_accepts}
    rest = [p for p in mine if p.id not in used]
    if rest:
        subs[f"{agent_id}/rest"] = [replace(p, promiser=f"{agent_id}/rest") for p in rest]
    sub_ids = sorted(subs)
    others = []
    for p in model.promises:
        if p.promiser == agent_id:
            continue
        if agent_id in p.promisees:
            p = replace(p, promisees=(p.promisees - {agent_id}) | frozenset(sub_ids))
        others.append(p)
    agents = [a for a in model.agents if a.id != agent_id]
    agents += [Agent(sid, agent.variables) for sid in sub_ids]
    new = PromiseGraph(tuple(agents), tuple(others + [q for s in sub_ids for q in subs[s]]), model.scale)
    return new.check(), sub_ids
