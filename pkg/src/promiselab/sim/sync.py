"""Delays between collecting the conditions of a promise and keeping it,
measured on the promiser's own clock."""

from __future__ import annotations

from dataclasses import dataclass

from ..core import Promise
from .trace import Trace


@dataclass(frozen=True)
class SyncReport:
    promise: str
    delays: tuple[int, ...]
    all_conditions_sampled: tuple[bool, ...]
    timeouts: int = 0

    def synchronous(self, tau_sync: int) -> bool:
        """Synchronous iff every keeping happened within ``tau_sync`` ticks.
        The threshold is a policy, not a property of the trace."""
        return bool(self.delays) and all(d <= tau_sync for d in self.delays)

    def assessments(self, tau_sync: int) -> list[str]:
        return ["kept" if d <= tau_sync else "not-kept" for d in self.delays]

    def distribution(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for d in self.delays:
            out[d] = out.get(d, 0) + 1
        return dict(sorted(out.items()))


def measure_sync(trace: Trace, promise: Promise) -> SyncReport:
    agent = promise.promiser
    needed = frozenset().union(*(c.terms for c in promise.conditions)) if promise.conditions else frozenset()
    out_label = ",".join(promise.body.labels)
    last_seen: dict[str, int] = {}
    since_keep: set[str] = set()
    delays, complete = [], []
    timeouts = 0
    for e in trace.for_observer(agent):
        if e.kind == "sample" and e.body_label in needed:
            last_seen[e.body_label] = e.observer_proper_time
            since_keep.add(e.body_label)
        elif e.kind == "timeout" and e.body_label == out_label:
            timeouts += 1
        elif e.kind == "keep" and e.body_label == out_label:
            if not needed:
                delays.append(0)
                complete.append(True)
                continue
            complete.append(needed <= since_keep)
            latest = max((last_seen[l] for l in needed if l in last_seen), default=0)
            delays.append(e.observer_proper_time - latest)
            since_keep = set()
    return SyncReport(promise.id, tuple(delays), tuple(complete), timeouts)
