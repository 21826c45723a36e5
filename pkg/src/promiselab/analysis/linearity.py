"""Does a conditional output depend only on the current value of its
dependency? Checked empirically over the keepings in a trace."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from ..core import Promise
from ..sim.trace import Trace
from .markov import InsufficientDataError


@dataclass(frozen=True)
class Keeping:
    dependency: Any
    output: Any
    proper_time: int


@dataclass(frozen=True)
class LinearityResult:
    linear: bool
    causally_independent: bool
    mapping: dict = field(default_factory=dict)
    # two keepings with the same dependency value but different outputs
    witness: tuple[Keeping, Keeping] | None = None
    keepings: int = 0


def _key(value) -> str:
    # payloads may be unhashable after a JSON round trip
    return repr(value)


def check_linearity_pairs(pairs: Iterable[Keeping | tuple], *, min_keepings: int = 2) -> LinearityResult:
    """``pairs`` are (dependency, output[, proper_time]) observations in order."""
    obs = [p if isinstance(p, Keeping) else Keeping(p[0], p[1], p[2] if len(p) > 2 else i) for i, p in enumerate(pairs)]
    groups: dict[str, list[Keeping]] = {}
    for k in obs:
        groups.setdefault(_key(k.dependency), []).append(k)
    if not groups:
        raise InsufficientDataError(min_keepings, 0, "keepings")
    fewest = min(len(g) for g in groups.values())
    if fewest < min_keepings:
        raise InsufficientDataError(min_keepings, fewest, "keepings per dependency value")

    mapping = {}
    witness = None
    for g in groups.values():
        first = g[0]
        for other in g[1:]:
            if _key(other.output) != _key(first.output):
                witness = witness or (first, other)
                break
        mapping[first.dependency if isinstance(first.dependency, (str, int, float, bool)) else _key(first.dependency)] = first.output
    linear = witness is None
    outputs = {_key(k.output) for k in obs}
    independent = linear and len(groups) > 1 and len(outputs) == 1
    return LinearityResult(linear, independent, mapping if linear else {}, witness, len(obs))


def keepings_from_trace(trace: Trace, promise: Promise, dependency: str) -> list[Keeping]:
    """Pair each keeping of ``promise`` with the latest sampled value of
    ``dependency`` on the promiser's clock. Keepings before any sample of
    the dependency are skipped."""
    agent = promise.promiser
    out_label = ",".join(promise.body.labels)
    current = None
    seen = False
    out = []
    for e in trace.for_observer(agent):
        if e.kind in ("sample", "state") and e.body_label == dependency:
            current, seen = e.payload, True
        elif e.kind == "keep" and e.body_label == out_label and seen:
            out.append(Keeping(current, e.payload, e.observer_proper_time))
    return out


def check_linearity(trace: Trace, promise: Promise, dependency: str, *, min_keepings: int = 2) -> LinearityResult:
    return check_linearity_pairs(keepings_from_trace(trace, promise, dependency), min_keepings=min_keepings)
