#!/usr/bin/env python3
"""Observed deviation rate of a drifting advanced process, with and without
maintenance, as a function of the observer's sampling interval.

    python3 scripts/maintenance_vs_sampling.py --runs 1000
"""

import argparse
from dataclasses import dataclass

from promiselab.sim import Mode, ProcessSpec, run_convergence


@dataclass
class Config:
    domain_size: int = 8
    drift_rate: float = 0.1
    steps: int = 100
    runs: int = 1000
    maintenance: tuple[int, ...] = (0, 1, 2, 5, 10)
    observer: tuple[int, ...] = (1, 5, 10, 20)


def deviation_rate(cfg: Config, maintenance: int, observer: int) -> float:
    spec = ProcessSpec(
        Mode.ADVANCED,
        tuple(range(cfg.domain_size)),
        "step",
        0,
        drift_rate=cfg.drift_rate,
        maintenance_interval=maintenance,
    )
    dev = n = 0
    for seed in range(cfg.runs):
        traj = run_convergence(spec, 0, cfg.steps, seed=seed, observer_interval=observer)
        dev += traj.deviations
        n += len(traj.samples)
    return dev / n if n else 0.0


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", type=int, default=Config.runs)
    p.add_argument("--drift", type=float, default=Config.drift_rate)
    p.add_argument("--steps", type=int, default=Config.steps)
    args = p.parse_args()
    cfg = Config(drift_rate=args.drift, runs=args.runs, steps=args.steps)

    print(f"drift={cfg.drift_rate} runs={cfg.runs} steps={cfg.steps} domain={cfg.domain_size}")
    print("maintenance  " + "  ".join(f"s={s:<5}" for s in cfg.observer))
    for m in cfg.maintenance:
        rates = [deviation_rate(cfg, m, s) for s in cfg.observer]
        label = "off" if m == 0 else str(m)
        print(f"{label:>11}  " + "  ".join(f"{r:7.3f}" for r in rates))


if __name__ == "__main__":
    main()
