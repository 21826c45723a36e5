#!/usr/bin/env python3
"""Kill each agent of a bundled model in turn and compare which accepts stop
being kept in simulation with the static single-point-of-failure report.

    python3 scripts/fault_sweep.py cond1 cond1_baseline
    python3 scripts/fault_sweep.py cond3 cond3_kill_d1 --at 5
"""

import argparse
from dataclasses import replace

from promiselab.analysis import downstream_analysis
from promiselab.document import bundled_path, load_model, load_scenario
from promiselab.sim import Fault, FaultKind, run


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("model", help="bundled model name")
    p.add_argument("scenario", help="bundled scenario name")
    p.add_argument("--at", type=int, default=1, help="kill step")
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    doc = load_model(bundled_path(args.model))
    sc = load_scenario(bundled_path(args.model).parent / "scenarios" / f"{args.scenario}.yaml").scenario
    # start from the scenario without its own kills
    base = replace(sc, faults=tuple(f for f in sc.faults if f.kind is not FaultKind.KILL))
    report = downstream_analysis(doc.model)
    accepts = [q.id for q in doc.model.promises if q.is_accept]

    print(f"static single points of failure: {', '.join(report.single_points_of_failure) or 'none'}")
    for victim in doc.model.agent_ids:
        scenario = replace(base, faults=base.faults + (Fault(FaultKind.KILL, victim, args.at),))
        trace = run(doc.model, scenario, args.seed, args.steps)
        late = {
            pid: any(e.global_step > args.at + 1 for e in trace.select(pid.split("-", 1)[0], "sample"))
            for pid in accepts
        }
        lost = sorted(pid for pid, ok in late.items() if not ok and not pid.startswith(victim + "-"))
        flag = "SPOF" if victim in report.single_points_of_failure else "    "
        print(f"  kill {victim:<4} {flag}  accepts without service afterwards: {', '.join(lost) or 'none'}")


if __name__ == "__main__":
    main()
