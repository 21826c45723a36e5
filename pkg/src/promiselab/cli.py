"""Command-line entry point: validate, analyze, simulate, markov.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import __version__
from .analysis import InsufficientDataError, downstream_analysis, estimate_markov_order
from .core import ModelValidationError, PromiseGraph, SuperAgent, bind_promises
from .document import (
    DocumentError,
    ModelDocument,
    ScenarioDocument,
    load_model,
    load_scenario,
)
from .scale import (
    check_invariant,
    check_shared_nothing,
    classify_state,
    compose,
    state_locality,
)
from .sim import measure_sync, run, run_transaction
from .sim.trace import Trace

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _fail(err: ModelValidationError) -> int:
    for line in err.diagnostics or [str(err)]:
        print(line, file=sys.stderr)
    return EXIT_DOMAIN


def _write_structured(path: str, data: dict) -> None:
    text = yaml.safe_dump(data, sort_keys=False, allow_unicode=True)
    Path(path).write_text(text, encoding="utf-8")


# -- validate ------------------------------------------------------------------


def cmd_validate(args) -> int:
    doc = load_model(args.model)
    print(f"ok: {len(doc.model.agents)} agents, {len(doc.model.promises)} promises, {len(bind_promises(doc.model))} bindings")
    if args.scenario:
        sc = load_scenario(args.scenario)
        sc.scenario.validate(doc.model)
        print(f"ok: scenario with {len(sc.scenario.channels)} channels, {len(sc.scenario.processes)} processes")
    return EXIT_OK


# -- analyze -------------------------------------------------------------------


def _scale_view(model: PromiseGraph) -> dict:
    view = {}
    for a in model.agents:
        entry: dict[str, Any] = {"class": classify_state(a.id, model).label}
        if isinstance(a, SuperAgent):
            entry["members"] = sorted(a.member_ids)
            entry["locality"] = state_locality(a.id, model)
        view[a.id] = entry
    return view


def analyze_model(doc: ModelDocument, scales: Sequence[str] = ()) -> dict:
    model = doc.model
    unknown = [s for s in scales if s not in doc.partitions]
    if unknown:
        known = ", ".join(sorted(doc.partitions)) or "none"
        raise ModelValidationError(f"unknown partition {unknown[0]!r} (known: {known})")
    report: dict[str, Any] = {"version": 1}
    if doc.name:
        report["model"] = doc.name
    report["bindings"] = [
        {"sender": b.sender, "receiver": b.receiver, "body": list(b.effective_body.labels), "offer": b.offer.id, "accept": b.accept.id}
        for b in bind_promises(model)
    ]
    report["scales"] = {"0": _scale_view(model)}
    for name in scales:
        lifted = compose(model, [doc.partitions[name]], [name])
        report["scales"][name] = _scale_view(lifted)
    inv = {}
    for a in model.agents:
        r = check_invariant(a.id, model)
        inv[a.id] = {"invariant": r.invariant, "conditional_on": [list(b.labels) for b in r.conditional_on]}
    for name in scales:
        lifted = compose(model, [doc.partitions[name]], [name])
        r = check_invariant(name, lifted)
        inv[name] = {"invariant": r.invariant, "conditional_on": [list(b.labels) for b in r.conditional_on]}
    report["invariance"] = inv
    sn = {}
    for a in model.agents:
        r = check_shared_nothing(a.id, model)
        sn[a.id] = {"shared_nothing": r.shared_nothing, "hub": r.hub, "violations": [str(v) for v in r.violations]}
    report["shared_nothing"] = sn
    report["downstream"] = downstream_analysis(model).to_dict()
    return report


def _print_report(report: dict) -> None:
    print(f"bindings: {len(report['bindings'])}")
    for b in report["bindings"]:
        print(f"  {b['sender']} -{{{','.join(b['body'])}}}-> {b['receiver']}")
    for scale, view in report["scales"].items():
        print(f"scale {scale}:")
        for a, e in view.items():
            extra = f" members={','.join(e['members'])} locality={e['locality']}" if "members" in e else ""
            print(f"  {a}: {e['class']}{extra}")
    print("invariance:")
    for a, r in report["invariance"].items():
        tail = "" if r["invariant"] else " conditional on " + " ".join("{" + ",".join(b) + "}" for b in r["conditional_on"])
        print(f"  {a}: {'invariant' if r['invariant'] else 'not invariant'}{tail}")
    print("shared nothing:")
    for a, r in report["shared_nothing"].items():
        print(f"  {a}: {'yes' if r['shared_nothing'] else 'no'}{' (hub)' if r['hub'] else ''}")
    d = report["downstream"]
    print("downstream:")
    print("  ranks: " + (", ".join(f"{a}={r}" for a, r in d["ranks"].items()) or "none (every agent is on a loop)"))
    print("  single points of failure: " + (", ".join(d["single_points_of_failure"]) or "none"))
    for loop in d["feedback_loops"]:
        print("  feedback loop: " + " ".join(loop))
    for acc, offers in d["redundancy_options"].items():
        print(f"  {acc}: {len(offers)} provider(s)")


def cmd_analyze(args) -> int:
    doc = load_model(args.model)
    report = analyze_model(doc, args.scale or ())
    _print_report(report)
    if args.out:
        _write_structured(args.out, report)
    return EXIT_OK


# -- simulate ------------------------------------------------------------------


def _parse_seeds(text: str) -> list[int]:
    try:
        lo, hi = text.split("..", 1)
        a, b = int(lo), int(hi)
    except ValueError:
        raise UsageError(f"--seeds expects a..b, got {text!r}") from None
    if b < a:
        raise UsageError("--seeds range is empty")
    return list(range(a, b + 1))


def _trace_path(pattern: str | None, seed: int, many: bool) -> str | None:
    if pattern is None:
        return None
    if "{seed}" in pattern:
        return pattern.format(seed=seed)
    if many:
        p = Path(pattern)
        return str(p.with_name(f"{p.stem}.{seed}{p.suffix}"))
    return pattern


def simulate_once(doc: ModelDocument, sc: ScenarioDocument, seed: int, steps: int | None, trace_path: str | None) -> dict:
    model = doc.model
    if sc.transaction is not None:
        t = sc.transaction
        res = run_transaction(model, t.T, t.channel, seed, kill=t.kill, messages=t.messages, max_steps=t.max_steps)
        oracle = run_transaction(
            model, t.T, _lossless(t.channel), seed, messages=t.messages, max_steps=t.max_steps
        )
        if trace_path:
            res.trace.write(trace_path)
        return {
            "seed": seed,
            "transaction": {
                "T": t.T,
                "status": res.status,
                "replay_equivalent": res.replay_equivalent,
                "output": res.output,
                "oracle_output": oracle.output,
                "matches_oracle": res.kept and res.output == oracle.output,
                "steps": res.steps,
                "attempts": res.attempts,
            },
            "events": len(res.trace),
        }
    steps = steps or sc.steps or 100
    trace = run(model, sc.scenario, seed, steps)
    if trace_path:
        trace.write(trace_path)
    stats = dict(trace.stats)
    sync = {}
    for p in model.promises:
        if p.is_offer and p.conditions:
            r = measure_sync(trace, p)
            entry: dict[str, Any] = {"keepings": len(r.delays), "delays": {str(k): v for k, v in r.distribution().items()}, "timeouts": r.timeouts}
            if sc.scenario.tau_sync is not None:
                entry["synchronous"] = r.synchronous(sc.scenario.tau_sync)
            sync[p.id] = entry
    deviations = {}
    for proc in sc.scenario.processes:
        deviations[proc.key] = {
            "drifts": len(trace.select(proc.agent, "drift", proc.variable)),
            "repairs": len(trace.select(proc.agent, "subtime", proc.variable)),
        }
    kept = stats.pop("kept")
    summary = {
        "seed": seed,
        "steps": stats["steps"],
        "events": stats["events"],
        "kept": kept,
        "broken": sorted(pid for pid, n in kept.items() if n == 0),
        "channels": stats["channels"],
        "proper_time": stats["proper_time"],
        "sync": sync,
        "deviations": deviations,
    }
    return summary


def _lossless(channel):
    from dataclasses import replace

    return replace(channel, loss_probability=0.0)


def _simulate_job(job) -> dict:
    model_path, scenario_path, seed, steps, trace_path = job
    doc = load_model(model_path)
    sc = load_scenario(scenario_path) if scenario_path else doc.scenario
    return simulate_once(doc, sc, seed, steps, trace_path)


def _print_summary(s: dict) -> None:
    if "transaction" in s:
        t = s["transaction"]
        print(
            f"seed {s['seed']}: transaction T={t['T']} status={t['status']} "
            f"replay_equivalent={str(t['replay_equivalent']).lower()} matches_oracle={str(t['matches_oracle']).lower()} "
            f"steps={t['steps']} attempts={t['attempts']}"
        )
        return
    print(f"seed {s['seed']}: {s['steps']} steps, {s['events']} events")
    for pid, n in s["kept"].items():
        print(f"  kept {n:>6}  {pid}")
    for key, c in s["channels"].items():
        ratio = "n/a" if c["rate_ratio"] is None else f"{c['rate_ratio']:.3f}"
        print(f"  channel {key}: sent={c['sent']} lost={c['lost']} sampled={c['sampled']} max_queue={c['max_queue']} sample/send={ratio}")
    for pid, r in s["sync"].items():
        print(f"  sync {pid}: keepings={r['keepings']} delays={r['delays']}")
    for key, d in s["deviations"].items():
        print(f"  process {key}: drifts={d['drifts']} repairs={d['repairs']}")


def cmd_simulate(args) -> int:
    if args.seed is None and args.seeds is None:
        raise UsageError("a seed is required: pass --seed N or --seeds a..b")
    doc = load_model(args.model)
    if args.scenario:
        sc = load_scenario(args.scenario)
    elif doc.scenario is not None:
        sc = doc.scenario
    else:
        raise ModelValidationError("no scenario given and the model has none embedded")
    if sc.transaction is None:
        sc.scenario.validate(doc.model)
    seeds = _parse_seeds(args.seeds) if args.seeds else [args.seed]
    many = len(seeds) > 1
    if args.steps is not None and args.steps <= 0:
        raise UsageError("--steps must be positive")
    if many and args.jobs > 1:
        jobs = [(args.model, args.scenario, s, args.steps, _trace_path(args.trace, s, many)) for s in seeds]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_simulate_job, jobs))
    else:
        summaries = [simulate_once(doc, sc, s, args.steps, _trace_path(args.trace, s, many)) for s in seeds]
    for s in summaries:
        _print_summary(s)
    if args.out:
        _write_structured(args.out, {"version": 1, "runs": summaries} if many else {"version": 1, **summaries[0]})
    return EXIT_OK


# -- markov --------------------------------------------------------------------


def _declared_history(model_path: str, agent: str, variable: str) -> int | None:
    doc = load_model(model_path)
    if not doc.model.has_agent(agent):
        raise ModelValidationError(f"agent {agent!r} not in {model_path}")
    for v in doc.model.agent(agent).variables:
        if v.name == variable:
            return v.history
    return None


def cmd_markov(args) -> int:
    trace = Trace.read(args.trace)
    seq = trace.states(args.agent, args.variable)
    try:
        result = estimate_markov_order(seq, args.max_order, alpha=args.alpha, min_length=args.min_length)
    except InsufficientDataError as e:
        print(f"insufficient data: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    print(f"{args.agent}.{args.variable}: {len(seq)} samples, {len(result.states)} states")
    print(f"order: {result.order}")
    for t in result.tests:
        verdict = "rejected" if t.rejected else "accepted"
        print(f"  order {t.order} vs {t.order + 1}: G={t.statistic:.3f} dof={t.dof} p={t.p_value:.4g} {verdict}")
    declared = _declared_history(args.model, args.agent, args.variable) if args.model else None
    if declared is not None:
        verdict = "consistent" if declared == result.order else "MISMATCH"
        print(f"declared history: {declared} ({verdict} with estimated order {result.order})")
    m = result.matrices[result.order]
    print(f"transition matrix (order {m.order}, homogeneous={m.homogeneous}):")
    print("  context -> " + " ".join(str(s) for s in m.states))
    for ctx, row in zip(m.contexts, m.as_array()):
        print(f"  {','.join(str(c) for c in ctx) or '()'} -> " + " ".join(f"{p:.4f}" for p in row))
    if args.out:
        _write_structured(
            args.out,
            {
                "version": 1,
                "order": result.order,
                "states": list(result.states),
                "tests": [
                    {"order": t.order, "statistic": t.statistic, "dof": t.dof, "p_value": t.p_value} for t in result.tests
                ],
                "matrices": {str(k): v.to_dict() for k, v in result.matrices.items()},
                **({} if declared is None else {"declared_history": declared, "consistent": declared == result.order}),
            },
        )
    return EXIT_OK


# -- wiring --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="promiselab", description="Promise graph modelling, analysis and simulation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a model file (and optionally a scenario)")
    v.add_argument("model")
    v.add_argument("--scenario")
    v.set_defaults(func=cmd_validate)

    a = sub.add_parser("analyze", help="bindings, state classes, invariance, downstream report")
    a.add_argument("model")
    a.add_argument("--scale", action="append", metavar="PARTITION", help="also report with this named partition composed")
    a.add_argument("--out", help="write the structured report (YAML) here")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="run a seeded simulation")
    s.add_argument("model")
    s.add_argument("scenario", nargs="?")
    s.add_argument("--seed", type=int)
    s.add_argument("--seeds", help="inclusive seed range a..b")
    s.add_argument("--steps", type=int)
    s.add_argument("--trace", help="trace output path; '{seed}' is replaced per run")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", help="write the structured summary (YAML) here")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("markov", help="estimate the Markov order of a variable in a trace")
    m.add_argument("trace")
    m.add_argument("--agent", required=True)
    m.add_argument("--variable", required=True)
    m.add_argument("--max-order", type=int, default=2)
    m.add_argument("--alpha", type=float, default=0.01)
    m.add_argument("--min-length", type=int)
    m.add_argument("--model", help="compare with the variable's declared history in this model")
    m.add_argument("--out")
    m.set_defaults(func=cmd_markov)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"promiselab: error: {e}", file=sys.stderr)
        return EXIT_IO
    except (DocumentError, ModelValidationError) as e:
        return _fail(e)
    except OSError as e:
        print(f"promiselab: {e.strerror or e}: {getattr(e, 'filename', '') or ''}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, json.JSONDecodeError) as e:
        print(f"promiselab: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
