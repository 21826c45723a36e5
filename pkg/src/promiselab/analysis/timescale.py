"""Compare how fast an interior process completes with how fast the
exterior dependency it reads changes, both on the inner agent's clock."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction

from ..sim.trace import Trace

DEFAULT_EPSILON = Fraction(1, 100)


@dataclass(frozen=True)
class TimescaleReport:
    interior: Fraction | None
    exterior: Fraction | None
    ratio: Fraction
    epsilon: Fraction
    completions: int = 0
    changes: int = 0

    @property
    def effectively_invariant(self) -> bool:
        return self.ratio < self.epsilon


def timescale_ratio(interior, exterior, epsilon=DEFAULT_EPSILON) -> TimescaleReport:
    """``interior`` is the mean completion interval, ``exterior`` the mean
    interval between dependency changes. A dependency that never changes
    (``exterior`` None) gives ratio 0."""
    epsilon = Fraction(epsilon)
    if interior is None:
        raise ValueError("interior process never completed")
    interior = Fraction(interior)
    if interior <= 0:
        raise ValueError("interior interval must be positive")
    if exterior is None:
        return TimescaleReport(interior, None, Fraction(0), epsilon)
    exterior = Fraction(exterior)
    if exterior <= 0:
        raise ValueError("exterior interval must be positive")
    return TimescaleReport(interior, exterior, interior / exterior, epsilon)


def timescale_report(
    trace: Trace,
    inner: tuple[str, str],
    outer: tuple[str, str],
    epsilon=DEFAULT_EPSILON,
) -> TimescaleReport:
    """``inner`` is (agent, output label): its keepings are completions.
    ``outer`` is (agent, label): value changes seen by that agent count as
    exterior changes. Intervals are last time over count, so both start
    from the observer's time origin."""
    agent, out_label = inner
    obs_agent, dep_label = outer
    completions = [
        e.observer_proper_time for e in trace.for_observer(agent) if e.kind == "keep" and e.body_label == out_label
    ]
    if not completions:
        raise ValueError(f"{agent!r} never kept {out_label!r}")
    # outer events are placed on the inner agent's clock via the global step
    inner_steps = [(e.global_step, e.observer_proper_time) for e in trace.for_observer(agent)]
    keys = [s for s, _ in inner_steps]

    def inner_time(step: int) -> int:
        i = bisect.bisect_right(keys, step) - 1
        return inner_steps[i][1] if i >= 0 else 0

    changes = []
    seen, prev = False, None
    for e in trace.for_observer(obs_agent):
        if e.kind in ("sample", "state", "perturb", "drift") and e.body_label == dep_label:
            if seen and e.payload != prev:
                changes.append(e.observer_proper_time if obs_agent == agent else inner_time(e.global_step))
            seen, prev = True, e.payload
    interior = Fraction(completions[-1], len(completions)) if completions[-1] else Fraction(1, len(completions))
    exterior = None
    if changes and changes[-1] > 0:
        exterior = Fraction(changes[-1], len(changes))
    rep = timescale_ratio(interior, exterior, epsilon)
    return TimescaleReport(rep.interior, rep.exterior, rep.ratio, rep.epsilon, len(completions), len(changes))
