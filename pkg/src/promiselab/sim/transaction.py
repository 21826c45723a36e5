"""Transactions at scale T: a buffered, invariant sequence of T messages
that conditions one output, retried over lossy channels until every hop is
acknowledged."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..core import PromiseGraph, accept, offer, Agent, bind_promises
from .model import ChannelSpec, ScenarioError
from .trace import Event, Trace


@dataclass
class Transaction:
    scale: int
    buffered: list = field(default_factory=list)
    status: str = "accumulating"
    output: str | None = None

    def complete(self) -> bool:
        return len(self.buffered) == self.scale and all(m is not None for m in self.buffered)


@dataclass(frozen=True)
class TransactionResult:
    status: str
    replay_equivalent: bool
    output: str | None
    replay_output: str | None
    buffered: tuple
    steps: int
    attempts: int
    trace: Trace = field(compare=False, repr=False, default_factory=Trace)

    @property
    def kept(self) -> bool:
        return self.status == "kept"


def fold_output(messages: Sequence) -> str:
    """The conditioned output X | M_1..M_T: depends on the sequence only."""
    return "X(" + ",".join(str(m) for m in messages) + ")"


def transaction_model(T: int = 1) -> PromiseGraph:
    """Sender S streams m to transacting agent A; A promises x | m to R."""
    agents = (Agent("S"), Agent("A"), Agent("R"))
    promises = (
        offer("S", "A", "m"),
        accept("A", "S", "m"),
        offer("A", "R", "x", conditions=["m"]),
        accept("R", "A", "x"),
        offer("R", "A", "ack"),
        accept("A", "R", "ack"),
        offer("A", "S", "ack"),
        accept("S", "A", "ack"),
    )
    return PromiseGraph(agents, promises)


@dataclass(frozen=True)
class Kill:
    """Kill the transacting agent at global ``at_step`` for ``down`` steps."""

    at_step: int
    down: int = 1
    buffer_intact: bool = True


def run_transaction(
    model: PromiseGraph,
    T: int,
    channel: ChannelSpec,
    seed: int,
    *,
    kill: Kill | None = None,
    messages: Sequence | None = None,
    rule: Callable[[Sequence], str] = fold_output,
    max_steps: int = 5000,
) -> TransactionResult:
    """Run one transaction of ``T`` messages over ``channel``.

    ``channel.receiver`` is the transacting agent; its output goes to the
    agent that accepts its conditional offer (or back to the sender when
    there is none). Every hop retries each step until acknowledged; acks
    travel on the reverse path with the same loss probability. On
    completion the buffered messages are replayed through ``rule`` and
    compared with the emitted output. The sender streams one new message
    per step.
    """
    if T < 1:
        raise ValueError("transaction scale T must be at least 1")
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    model.check()
    S, A = channel.sender, channel.receiver
    bindings = bind_promises(model)
    if not any(b.sender == S and b.receiver == A and channel.label in b.effective_body.terms for b in bindings):
        raise ScenarioError(f"channel {channel.key}: no binding carries {channel.label!r}")
    cond = [p for p in model.offers_by(A) if channel.label in frozenset().union(*(c.terms for c in p.conditions or ()))]
    if not cond:
        raise ScenarioError(f"{A!r} makes no promise conditional on {channel.label!r}")
    out_promise = cond[0]
    targets = sorted({b.receiver for b in bindings if b.offer.id == out_promise.id})
    R = targets[0] if targets else S

    rng = random.Random(seed)
    loss = float(channel.loss_probability)
    msgs = list(messages) if messages is not None else [f"m{i}" for i in range(1, T + 1)]
    if len(msgs) != T:
        raise ValueError("messages must have length T")

    trace = Trace()
    clocks = {S: 0, A: 0, R: 0}
    tx = Transaction(T, [None] * T)
    acked_at_sender = [False] * T
    output_acked = False
    alive = True
    attempts = 0

    def rec(step, who, kind, mid="", label="", payload=None):
        trace.append(Event(step, who, clocks[who], kind, mid, label, payload))

    def delivered() -> bool:
        return not (loss and rng.random() < loss)

    step = 0
    for step in range(1, max_steps + 1):
        if kill is not None and step == kill.at_step and alive:
            alive = False
            rec(step, A, "kill")
            if not kill.buffer_intact:
                tx.buffered = [None] * T
                tx.status = "aborted"
                rec(step, A, "abort")
                break
        if kill is not None and not alive and step == kill.at_step + kill.down:
            alive = True
            rec(step, A, "restart")

        # message i is first offered at step i + 1; unacknowledged ones are retried
        for i in range(min(T, step)):
            if acked_at_sender[i]:
                continue
            attempts += 1
            clocks[S] += 1
            mid = f"{S}:{i + 1}:{attempts}"
            rec(step, S, "send", mid, channel.label, msgs[i])
            if not delivered() or not alive:
                rec(step, S, "lost", mid, channel.label, msgs[i])
                continue
            clocks[A] += 1
            rec(step, A, "sample", mid, channel.label, msgs[i])
            if tx.buffered[i] is None:
                tx.buffered[i] = msgs[i]
            if delivered():
                acked_at_sender[i] = True
                rec(step, S, "ack", mid, "ack", i + 1)

        if alive and tx.complete() and not output_acked:
            if tx.output is None:
                tx.output = rule(tx.buffered)
                rec(step, A, "keep", "", ",".join(out_promise.body.labels), tx.output)
            attempts += 1
            mid = f"{A}:x:{attempts}"
            rec(step, A, "send", mid, "x", tx.output)
            if delivered():
                clocks[R] += 1
                rec(step, R, "sample", mid, "x", tx.output)
                if delivered():
                    output_acked = True
                    rec(step, A, "ack", mid, "ack", tx.output)
        if output_acked and all(acked_at_sender):
            tx.status = "kept"
            break

    buffered = tuple(tx.buffered)
    if tx.status == "kept":
        replay = rule(list(buffered))
        equivalent = replay == tx.output
    else:
        replay, equivalent = None, False
    return TransactionResult(tx.status, equivalent, tx.output, replay, buffered, step, attempts, trace)
