"""Assessments read off a trace, their empirical frequencies, and what an
explicit observer can see of another agent's state."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import groupby
from typing import Any, Iterable, Sequence

from ..core import Assessment, PromiseGraph, Verdict, bind_promises
from ..sim.trace import Trace


def _senders(trace: Trace) -> dict[str, str]:
    return {e.message_id: e.observer for e in trace if e.kind == "send" and e.message_id}


def trace_assessments(trace: Trace, model: PromiseGraph) -> list[Assessment]:
    """One ``kept`` verdict per sample that a receiver takes over a binding,
    attributed to the bound offer. A synchronisation timeout is the waiting
    promiser's ``not-kept`` verdict on its own conditional offer."""
    senders = _senders(trace)
    by_edge: dict[tuple[str, str, str], list[str]] = {}
    for b in bind_promises(model):
        for label in b.effective_body.labels:
            by_edge.setdefault((b.sender, b.receiver, label), []).append(b.offer.id)
    conditional = {}
    for p in model.promises:
        if p.is_offer and p.conditions:
            conditional[(p.promiser, ",".join(p.body.labels))] = p.id

    out = []
    for e in trace:
        if e.kind == "sample":
            sender = senders.get(e.message_id)
            for pid in by_edge.get((sender, e.observer, e.body_label), ()):
                out.append(Assessment(e.observer, pid, Verdict.KEPT, e.observer_proper_time))
        elif e.kind == "timeout":
            pid = conditional.get((e.observer, e.body_label))
            if pid is not None:
                out.append(Assessment(e.observer, pid, Verdict.NOT_KEPT, e.observer_proper_time))
    return out


@dataclass(frozen=True)
class EmpiricalAssessment:
    """Frequency of ``kept`` among one observer's definite verdicts on one
    promise. This is an empirical frequency, not a boolean assessment."""

    assessor: str
    promise: str
    kept: int
    not_kept: int
    unknown: int = 0

    @property
    def frequency(self) -> Fraction | None:
        n = self.kept + self.not_kept
        return Fraction(self.kept, n) if n else None


def empirical_assessments(assessments: Iterable[Assessment]) -> dict[tuple[str, str], EmpiricalAssessment]:
    counts: dict[tuple[str, str], list[int]] = {}
    for a in assessments:
        c = counts.setdefault((a.assessor, a.promise), [0, 0, 0])
        c[{Verdict.KEPT: 0, Verdict.NOT_KEPT: 1, Verdict.UNKNOWN: 2}[a.verdict]] += 1
    return {k: EmpiricalAssessment(k[0], k[1], *v) for k, v in sorted(counts.items())}


def observed_values(trace: Trace, owner: str, label: str, observer: str) -> list:
    """Values of ``label`` sent by ``owner`` that ``observer`` sampled, in
    the observer's order. State nobody samples stays interior: the result
    is empty."""
    if observer == owner:
        return [e.payload for e in trace.for_observer(owner) if e.kind in ("state", "keep") and e.body_label == label]
    senders = _senders(trace)
    return [
        e.payload
        for e in trace.for_observer(observer)
        if e.kind == "sample" and e.body_label == label and senders.get(e.message_id) == owner
    ]


@dataclass(frozen=True)
class PersistenceReport:
    n: int
    runs: tuple[tuple[Any, int], ...]
    # runs cut off by the end of the record are not held against persistence
    persists: bool
    fraction: Fraction | None


def persistence(values: Sequence, n: int) -> PersistenceReport:
    """Does each value hold for at least ``n`` consecutive samples?
    ``fraction`` is the share of samples lying in runs of length >= n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    runs = tuple((k, sum(1 for _ in g)) for k, g in groupby(values))
    complete = runs[:-1]
    persists = all(length >= n for _, length in complete)
    total = sum(length for _, length in runs)
    long = sum(length for _, length in runs if length >= n)
    return PersistenceReport(n, runs, persists, Fraction(long, total) if total else None)


def observed_persistence(trace: Trace, owner: str, label: str, observer: str, n: int) -> PersistenceReport:
    return persistence(observed_values(trace, owner, label, observer), n)
