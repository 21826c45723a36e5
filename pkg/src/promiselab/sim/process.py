"""Stepping of interior variables: Markov (retarded) chains and
fixed-point (advanced) processes with drift and maintenance."""

from __future__ import annotations

import bisect
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any

from .model import Mode, ProcessSpec, ScenarioError


@dataclass
class Step:
    kind: str
    value: Any
    ticks: int = 0
    subtime: int = 0


def converge(f, x, limit: int) -> tuple[Any, int]:
    """Iterate ``f`` from ``x`` until it stops moving; returns the final
    value and the number of applications that changed it."""
    n = 0
    for _ in range(limit):
        y = f(x)
        if y == x:
            break
        x = y
        n += 1
    return x, n


class ProcessState:
    """Mutable runtime state of one :class:`ProcessSpec`."""

    def __init__(self, spec: ProcessSpec, initial: Any = None):
        self.spec = spec
        init = spec.initial if initial is None else initial
        if spec.mode is Mode.ADVANCED:
            self.f = spec.update_rule()
            self.value = spec.domain[0] if init is None else init
            if self.value not in spec.domain:
                raise ScenarioError(f"process {spec.key}: initial {self.value!r} not in domain")
            self.settled = self.value == spec.desired_state
        else:
            self._rows = {}
            for ctx, row in spec.transition.items():
                nxt = list(row)
                cum, acc = [], 0.0
                for v in nxt:
                    acc += float(row[v])
                    cum.append(acc)
                self._rows[ctx] = (nxt, cum)
            hist = init if isinstance(init, (list, tuple)) and spec.order != 1 else None
            if spec.order == 0:
                self.history = deque(maxlen=1)
                self.value = spec.domain[0] if init is None else init
            else:
                if hist is None:
                    first = spec.domain[0] if init is None else init
                    hist = [first] * spec.order
                self.history = deque(hist, maxlen=spec.order)
                self.value = self.history[-1]

    def _context(self):
        if self.spec.order == 0:
            return ()
        if self.spec.order == 1:
            return self.history[-1]
        return tuple(self.history)

    def step(self, t: int, rng: random.Random) -> list[Step]:
        if self.spec.mode is Mode.RETARDED:
            ctx = self._context()
            try:
                nxt, cum = self._rows[ctx]
            except KeyError:
                raise ScenarioError(f"process {self.spec.key}: no transition row for {ctx!r}") from None
            i = bisect.bisect_right(cum, rng.random() * cum[-1])
            self.value = nxt[min(i, len(nxt) - 1)]
            if self.spec.order > 0:
                self.history.append(self.value)
            return [Step("state", self.value, ticks=1)]

        out = []
        spec = self.spec
        if not self.settled:
            self.value = self.f(self.value)
            out.append(Step("state", self.value, ticks=1))
            self.settled = self.value == spec.desired_state
        elif spec.maintenance_interval and t % spec.maintenance_interval == 0:
            fixed, n = converge(self.f, self.value, len(spec.domain) + 1)
            if n:
                self.value = fixed
                # iterations happen in subtime; the exterior clock ticks once
                out.append(Step("subtime", n, subtime=n))
                out.append(Step("state", self.value, ticks=1))
        if spec.drift_rate and rng.random() < spec.drift_rate:
            self.value = rng.choice(spec.domain)
            out.append(Step("drift", self.value))
        return out

    def perturb(self, value: Any, rng: random.Random) -> Any:
        if value is None:
            value = rng.choice(self.spec.domain)
        self.value = value
        if self.spec.mode is Mode.RETARDED and self.spec.order > 0:
            self.history.append(value)
        return value


@dataclass
class Trajectory:
    values: list
    samples: list = field(default_factory=list)
    deviations: int = 0
    repairs: int = 0
    subtime: int = 0
    drifts: int = 0
    reached_at: int | None = None

    @property
    def final(self):
        return self.values[-1]

    @property
    def deviation_rate(self) -> float:
        return self.deviations / len(self.samples) if self.samples else 0.0


def run_convergence(
    spec: ProcessSpec,
    initial: Any,
    steps: int,
    *,
    seed: int = 0,
    observer_interval: int = 0,
) -> Trajectory:
    """Run an advanced process from ``initial`` for ``steps`` global steps.

    Each step: maintenance (when due), then drift, then the observer samples
    when ``step % observer_interval == 0``.
    """
    if spec.mode is not Mode.ADVANCED:
        raise ScenarioError("run_convergence needs an advanced process")
    spec.validate()
    if steps < 0:
        raise ValueError("steps must be non-negative")
    rng = random.Random(seed)
    state = ProcessState(spec, initial)
    traj = Trajectory([state.value])
    if state.settled:
        traj.reached_at = 0
    for t in range(1, steps + 1):
        for s in state.step(t, rng):
            if s.kind == "subtime":
                traj.repairs += 1
                traj.subtime += s.subtime
            elif s.kind == "drift":
                traj.drifts += 1
        if traj.reached_at is None and state.value == spec.desired_state:
            traj.reached_at = t
        traj.values.append(state.value)
        if observer_interval and t % observer_interval == 0:
            traj.samples.append(state.value)
            if state.value != spec.desired_state:
                traj.deviations += 1
    return traj
