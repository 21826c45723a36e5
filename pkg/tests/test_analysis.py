from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promiselab.analysis import (
    InsufficientDataError,
    check_linearity,
    check_linearity_pairs,
    downstream_analysis,
    estimate_markov_order,
    estimate_transition_matrix,
    generate_chain,
    keepings_from_trace,
    satisfied_accepts,
    timescale_ratio,
    timescale_report,
)
from promiselab.core import Agent, PromiseGraph, accept, offer, remove_agent
from promiselab.sim import ChannelSpec, Scenario, run
from promiselab.sim.trace import Event, Trace

from conftest import model_doc, random_model

models = st.randoms(use_true_random=False).map(random_model)


def random_table(rng, S, order, concentration=0.3):
    # low concentration gives rows far apart, so the order is detectable
    rows = {}
    for ctx in np.ndindex(*([S] * order)):
        rows[tuple(int(c) for c in ctx)] = rng.dirichlet([concentration] * S)
    return lambda ctx: rows[tuple(ctx)]


def chain(order, S, length, seed):
    rng = np.random.default_rng(seed)
    return generate_chain(random_table(rng, S, order), order, list(range(S)), length, rng)


class TestMarkovOrder:
    @pytest.mark.parametrize("order", [0, 1, 2])
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_recovers_order(self, order, seed):
        seq = chain(order, 3, 20_000, seed)
        assert estimate_markov_order(seq, 3).order == order

    def test_iid_against_max_order_one(self):
        seq = chain(0, 2, 5000, 7)
        r = estimate_markov_order(seq, 1)
        assert r.order == 0
        (t,) = r.tests
        assert t.dof == 1 and not t.rejected

    def test_constant_sequence(self):
        r = estimate_markov_order(["a"] * 100, 2)
        assert r.order == 0 and r.tests == ()

    def test_short_sequence(self):
        with pytest.raises(InsufficientDataError) as e:
            estimate_markov_order([0, 1] * 20, 2)
        assert e.value.required == 10 * 2**3
        assert e.value.got == 40

    def test_min_length_override(self):
        r = estimate_markov_order([0, 1] * 20, 1, min_length=10)
        assert r.order == 1

    def test_undeclared_value(self):
        with pytest.raises(ValueError, match="'z'"):
            estimate_markov_order(["a", "z"], 1, states=["a", "b"], min_length=0)

    def test_dof(self):
        r = estimate_markov_order(chain(2, 3, 5000, 0), 2)
        assert [t.dof for t in r.tests] == [4, 12]


class TestTransitionMatrix:
    P = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]])

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        return generate_chain(lambda ctx: self.P[ctx[0]], 1, [0, 1, 2], n, rng)

    def test_consistent(self):
        errors = [np.abs(estimate_transition_matrix(self.sample(n), 1).as_array() - self.P).max() for n in (10**3, 10**4, 10**5)]
        assert errors[2] < errors[0]
        assert errors[2] <= 0.02

    def test_rows_are_exact_fractions(self):
        m = estimate_transition_matrix(self.sample(1000), 1)
        for row in m.normalized:
            assert sum(row) == 1
        assert m.probability((0,), 0) == float(m.normalized[0][0])

    def test_homogeneous_flag(self):
        assert estimate_transition_matrix(self.sample(40_000), 1).homogeneous
        # switch regimes halfway: first half sticky, second half alternating
        half = [0] * 5000 + [1] * 5000
        flip = [i % 2 for i in range(10_000)]
        assert estimate_transition_matrix(half + flip, 1).homogeneous is False

    def test_second_order_contexts(self):
        m = estimate_transition_matrix([0, 0, 1, 1, 0, 1], 2, states=[0, 1])
        assert m.contexts == ((0, 0), (0, 1), (1, 0), (1, 1))
        # (0,0)->1, (0,1)->1, (1,1)->0, (1,0)->1
        assert m.counts == ((0, 1), (0, 1), (0, 1), (1, 0))

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            estimate_transition_matrix([1], 1)


class TestLinearity:
    @given(st.dictionaries(st.integers(0, 9), st.text(max_size=3), min_size=1), st.randoms(use_true_random=False))
    def test_static_mapping_is_linear(self, f, rng):
        deps = [d for d in f for _ in range(rng.randint(2, 4))]
        rng.shuffle(deps)
        r = check_linearity_pairs((d, f[d]) for d in deps)
        assert r.linear and r.witness is None
        assert r.mapping == f

    def test_memory_gives_witness(self):
        # output remembers the previous input
        deps = [0, 1, 0, 0, 1, 1]
        pairs = [(d, prev) for prev, d in zip([None] + deps, deps)]
        r = check_linearity_pairs(pairs)
        assert not r.linear
        a, b = r.witness
        assert a.dependency == b.dependency and a.output != b.output

    def test_causally_independent(self):
        r = check_linearity_pairs([(0, "k"), (1, "k"), (0, "k"), (1, "k")])
        assert r.causally_independent
        assert not check_linearity_pairs([(0, "k"), (0, "k")]).causally_independent

    def test_needs_two_keepings_per_value(self):
        with pytest.raises(InsufficientDataError):
            check_linearity_pairs([(0, "a"), (0, "a"), (1, "b")])
        with pytest.raises(InsufficientDataError):
            check_linearity_pairs([])

    def _cond1_trace(self, lookup=None, payloads=("lo", "hi")):
        m = model_doc("cond1").model
        sc = Scenario(
            channels=(ChannelSpec("D", "S", "d", payloads=payloads), ChannelSpec("S", "R", "s")),
            lookups={"S.s": lookup} if lookup else {},
        )
        return m, run(m, sc, 0, 40)

    def test_from_trace(self):
        m, t = self._cond1_trace({"lo": 1, "hi": 2})
        (p,) = [p for p in m.promises if p.id == "S+s|d>R"]
        ks = keepings_from_trace(t, p, "d")
        assert len(ks) >= 10
        r = check_linearity(t, p, "d")
        assert r.linear and r.mapping == {"lo": 1, "hi": 2}

    def test_from_trace_constant_lookup(self):
        m, t = self._cond1_trace({"lo": "same", "hi": "same"})
        (p,) = [p for p in m.promises if p.id == "S+s|d>R"]
        assert check_linearity(t, p, "d").causally_independent

    def test_tampered_trace(self):
        m, t = self._cond1_trace({"lo": 1, "hi": 2})
        (p,) = [p for p in m.promises if p.id == "S+s|d>R"]
        events = list(t)
        i = max(i for i, e in enumerate(events) if e.kind == "keep")
        e = events[i]
        events[i] = Event(e.global_step, e.observer, e.observer_proper_time, e.kind, e.message_id, e.body_label, 99)
        r = check_linearity(Trace(events), p, "d")
        assert not r.linear and r.witness[1].output == 99


class TestTimescale:
    def test_fast_interior(self):
        r = timescale_ratio(3, 3 * 10**7)
        assert r.ratio == Fraction(1, 10**7)
        assert r.effectively_invariant

    def test_slow_interior(self):
        r = timescale_ratio(3, 1)
        assert r.ratio == 3 and not r.effectively_invariant

    def test_equal_rates(self):
        r = timescale_ratio(5, 5)
        assert r.ratio == 1 and not r.effectively_invariant

    def test_threshold_is_strict(self):
        assert not timescale_ratio(1, 100).effectively_invariant
        assert timescale_ratio(1, 101).effectively_invariant

    def test_static_dependency(self):
        r = timescale_ratio(4, None)
        assert r.ratio == 0 and r.effectively_invariant

    def test_bad_intervals(self):
        for args in ((0, 1), (1, 0), (None, 1), (-1, 2)):
            with pytest.raises(ValueError):
                timescale_ratio(*args)

    @given(st.integers(1, 10**6), st.integers(1, 10**6), st.integers(1, 1000))
    def test_unit_free(self, a, b, k):
        assert timescale_ratio(a, b).ratio == timescale_ratio(a * k, b * k).ratio

    def test_from_trace(self):
        m = model_doc("cond1").model
        changing = Scenario(channels=(ChannelSpec("D", "S", "d", payloads=("lo", "hi")), ChannelSpec("S", "R", "s")))
        static = Scenario(channels=(ChannelSpec("D", "S", "d", payloads=("k",)), ChannelSpec("S", "R", "s")))
        r = timescale_report(run(m, changing, 0, 40), ("S", "s"), ("S", "d"))
        assert r.completions > 10 and r.changes > 10
        assert not r.effectively_invariant
        r = timescale_report(run(m, static, 0, 40), ("S", "s"), ("S", "d"))
        assert r.changes == 0 and r.effectively_invariant

    def test_never_completed(self):
        m = model_doc("cond1").model
        sc = Scenario(channels=(ChannelSpec("D", "S", "d", send_rate=0), ChannelSpec("S", "R", "s")))
        with pytest.raises(ValueError, match="never kept"):
            timescale_report(run(m, sc, 0, 10), ("S", "s"), ("S", "d"))


class TestDownstream:
    def test_cond1(self, cond1):
        r = downstream_analysis(cond1)
        assert r.single_points_of_failure == ("D", "S")
        assert r.spof_by_promise == {"S-d>D": ("D",), "R-s>S": ("D", "S")}
        assert r.ranks == {"D": 0, "S": 1, "R": 2}
        assert r.order == ("D", "S", "R")
        assert r.feedback_loops == ()

    def test_cond3_has_no_spof(self, cond3):
        r = downstream_analysis(cond3)
        assert r.single_points_of_failure == ()
        (acc,) = [k for k in r.redundancy_options if k.startswith("R-")]
        assert len(r.redundancy_options[acc]) == 2

    def test_single_agent(self):
        r = downstream_analysis(PromiseGraph((Agent("A"),)))
        assert r.ranks == {"A": 0} and r.single_points_of_failure == ()

    def test_request_loop_is_feedback(self):
        r = downstream_analysis(model_doc("backing_service").model)
        assert r.feedback_loops == (("C", "D", "S"),)
        assert r.ranks == {} and r.single_points_of_failure == ()

    def test_aggregator_dependencies(self):
        r = downstream_analysis(model_doc("advret").model)
        assert r.spof_by_promise["K-y>H"] == ("H", "P1", "P2")
        assert r.order == ("P1", "P2", "H", "K")

    def test_unsatisfiable_accept(self):
        m = PromiseGraph(
            (Agent("A"), Agent("B")),
            (offer("A", "B", "x", conditions=["q"]), accept("B", "A", "x")),
        )
        r = downstream_analysis(m)
        assert r.satisfiable == {"B-x>A": False}
        assert r.spof_by_promise == {}

    @settings(max_examples=60, deadline=None)
    @given(models)
    def test_removing_a_non_spof_keeps_acyclic_accepts(self, m):
        r = downstream_analysis(m)
        cyclic = {a for loop in r.feedback_loops for a in loop}
        for x in m.agent_ids:
            if x in r.single_points_of_failure:
                continue
            after = satisfied_accepts(remove_agent(m, x))
            for pid, ok in r.satisfiable.items():
                promiser = pid.split("-", 1)[0]
                if ok and promiser != x and promiser not in cyclic:
                    assert pid in after

    def test_to_dict_is_plain(self, cond1):
        d = downstream_analysis(cond1).to_dict()
        assert d["single_points_of_failure"] == ["D", "S"]
