import random
from pathlib import Path

import pytest

from promiselab.core import Agent, Polarity, Promise, PromiseGraph, Variable, accept, offer
from promiselab.document import bundled_path, load_model, load_scenario
from promiselab.sim import ChannelSpec, Scenario, run

LABELS = ("a", "b", "c", "d")
SCENARIOS = Path(bundled_path("cond1")).parent / "scenarios"


def model_doc(name):
    return load_model(bundled_path(name))


def scenario_doc(name):
    return load_scenario(SCENARIOS / f"{name}.yaml")


@pytest.fixture
def cond1():
    return model_doc("cond1").model


@pytest.fixture
def cond3():
    return model_doc("cond3").model


def random_model(rng: random.Random, max_agents: int = 8, max_promises: int = 14) -> PromiseGraph:
    n = rng.randint(1, max_agents)
    ids = [f"A{i}" for i in range(n)]
    agents = []
    for a in ids:
        variables = ()
        if rng.random() < 0.4:
            variables = (Variable(rng.choice(LABELS), (0, 1), rng.randint(0, 3)),)
        agents.append(Agent(a, variables))
    promises = {}
    for _ in range(rng.randint(0, max_promises)):
        who = rng.choice(ids)
        others = [x for x in ids if x != who] or [who]
        if rng.random() < 0.1:
            to = frozenset(["*"])
        else:
            to = frozenset(rng.sample(others, rng.randint(1, len(others))))
        pol = rng.choice([Polarity.OFFER, Polarity.ACCEPT])
        body = frozenset(rng.sample(LABELS, rng.randint(1, 2)))
        conds = ()
        if pol is Polarity.OFFER and rng.random() < 0.5:
            conds = (frozenset([rng.choice(LABELS)]),)
        hist = rng.choice([None, None, 0, 1, 2, 3])
        p = Promise(who, to, pol, body, conds, history=hist, constant=rng.random() < 0.3)
        promises[p.id] = p
    return PromiseGraph(tuple(agents), tuple(promises.values()))


def random_partition(rng: random.Random, ids):
    ids = list(ids)
    rng.shuffle(ids)
    blocks = []
    while ids:
        k = rng.randint(1, len(ids))
        blocks.append(frozenset(ids[:k]))
        ids = ids[k:]
    return blocks


def fan_in(m: int) -> PromiseGraph:
    """H serves ``out`` to K on condition of y1..ym, each from its own source."""
    sources = [f"Y{i}" for i in range(1, m + 1)]
    promises = [offer("H", "K", "out", conditions=[f"y{i}" for i in range(1, m + 1)]), accept("K", "H", "out")]
    for i, s in enumerate(sources, 1):
        promises += [offer(s, "H", f"y{i}"), accept("H", s, f"y{i}")]
    return PromiseGraph(tuple(Agent(a) for a in sources + ["H", "K"]), tuple(promises))


def arrival_run(m: int, order, seed=0):
    """Source ``order[k]`` sends once at step k+1."""
    model = fan_in(m)
    channels = [ChannelSpec(f"Y{src}", "H", f"y{src}", schedule=(k + 1,), payloads=(f"v{src}",)) for k, src in enumerate(order)]
    channels.append(ChannelSpec("H", "K", "out"))
    return run(model, Scenario(tuple(channels)), seed, m + 4)


# acceptance criteria report --------------------------------------------------

_criteria: dict[int, tuple[str, bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    prev = _criteria.get(number)
    ok = rep.passed and (prev is None or prev[1])
    if prev and prev[2]:
        detail = "; ".join(x for x in (prev[2], detail) if x)
    _criteria[number] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok, detail = _criteria[number]
        line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
