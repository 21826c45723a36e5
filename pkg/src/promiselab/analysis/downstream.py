"""Dependency flow over bindings: ranking, feedback loops, single points of
failure and redundancy options."""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from ..core import Binding, PromiseGraph, _housed_labels, bind_promises, remove_agent


@dataclass(frozen=True)
class DownstreamReport:
    ranks: dict[str, int]
    order: tuple[str, ...]
    single_points_of_failure: tuple[str, ...]
    spof_by_promise: dict[str, tuple[str, ...]]
    redundancy_options: dict[str, tuple[str, ...]]
    feedback_loops: tuple[tuple[str, ...], ...]
    satisfiable: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ranks": dict(self.ranks),
            "order": list(self.order),
            "single_points_of_failure": list(self.single_points_of_failure),
            "spof_by_promise": {k: list(v) for k, v in self.spof_by_promise.items()},
            "redundancy_options": {k: list(v) for k, v in self.redundancy_options.items()},
            "feedback_loops": [list(c) for c in self.feedback_loops],
            "satisfiable": dict(self.satisfiable),
        }


def flow_graph(model: PromiseGraph, bindings: tuple[Binding, ...] | None = None) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(model.agent_ids)
    for b in bindings if bindings is not None else bind_promises(model):
        g.add_edge(b.sender, b.receiver)
    return g


def supported_offers(model: PromiseGraph, bindings: tuple[Binding, ...] | None = None) -> frozenset[str]:
    """Least fixed point: an offer is supported when each of its conditions
    is housed by its promiser or arrives over a binding from a supported
    offer. Unconditional offers are supported outright."""
    bindings = bindings if bindings is not None else bind_promises(model)
    housed = {a.id: _housed_labels(a) for a in model.agents}
    offers = [p for p in model.promises if p.is_offer]
    supported: set[str] = set()
    changed = True
    while changed:
        changed = False
        for p in offers:
            if p.id in supported:
                continue
            have = set(housed[p.promiser])
            for b in bindings:
                if b.receiver == p.promiser and b.offer.id in supported:
                    have |= b.effective_body.terms
            if all(c.terms <= have for c in p.conditions):
                supported.add(p.id)
                changed = True
    return frozenset(supported)


def satisfied_accepts(model: PromiseGraph) -> frozenset[str]:
    bindings = bind_promises(model)
    sup = supported_offers(model, bindings)
    return frozenset(b.accept.id for b in bindings if b.offer.id in sup)


def downstream_analysis(model: PromiseGraph) -> DownstreamReport:
    """Rank is the longest path from a source over the condensed flow graph.
    Agents on a cycle get no rank; each cycle is reported as a loop."""
    bindings = bind_promises(model)
    g = flow_graph(model, bindings)

    loops = []
    cyclic: set[str] = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(a, a) for a in comp):
            loops.append(tuple(sorted(comp)))
            cyclic |= comp
    loops.sort()

    cond = nx.condensation(g)
    comp_rank: dict[int, int] = {}
    for c in nx.topological_sort(cond):
        preds = list(cond.predecessors(c))
        comp_rank[c] = 1 + max(comp_rank[p] for p in preds) if preds else 0
    mapping = cond.graph["mapping"]
    ranks = {a: comp_rank[mapping[a]] for a in sorted(g.nodes) if a not in cyclic}
    order = tuple(sorted(ranks, key=lambda a: (ranks[a], a)))

    sat = satisfied_accepts(model)
    satisfiable = {p.id: p.id in sat for p in model.promises if p.is_accept}

    options: dict[str, tuple[str, ...]] = {}
    for p in model.promises:
        if p.is_accept:
            options[p.id] = tuple(sorted({b.offer.id for b in bindings if b.accept.id == p.id}))

    by_promise: dict[str, tuple[str, ...]] = {}
    removed_sat = {x: satisfied_accepts(remove_agent(model, x)) for x in model.agent_ids}
    for p in model.promises:
        # promises made on a feedback loop are reported, not analysed
        if not p.is_accept or not satisfiable[p.id] or p.promiser in cyclic:
            continue
        critical = tuple(x for x in model.agent_ids if x != p.promiser and p.id not in removed_sat[x])
        if critical:
            by_promise[p.id] = critical
    spofs = tuple(sorted({x for xs in by_promise.values() for x in xs}))
    return DownstreamReport(ranks, order, spofs, by_promise, options, tuple(loops), satisfiable)
