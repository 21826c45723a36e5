#!/usr/bin/env python3
"""Transactions at scale T over a lossy channel: how many finish, how many
steps they take, and whether each kept run matches the lossless replay.

    python3 scripts/transaction_repeatability.py --seeds 200
"""

import argparse
import statistics
from dataclasses import dataclass

from promiselab.sim import ChannelSpec, Kill, run_transaction, transaction_model


@dataclass
class Config:
    Ts: tuple[int, ...] = (1, 2, 3, 5, 8)
    losses: tuple[float, ...] = (0.0, 0.3, 0.6, 0.9)
    seeds: int = 200
    max_steps: int = 1000
    kill_at: int | None = None
    buffer_intact: bool = True


def cell(cfg: Config, T: int, loss: float) -> dict:
    model = transaction_model(T)
    lossy = ChannelSpec("S", "A", "m", loss_probability=loss)
    clean = ChannelSpec("S", "A", "m")
    kill = Kill(cfg.kill_at, down=2, buffer_intact=cfg.buffer_intact) if cfg.kill_at else None
    kept = matched = aborted = 0
    steps = []
    for seed in range(cfg.seeds):
        r = run_transaction(model, T, lossy, seed, kill=kill, max_steps=cfg.max_steps)
        oracle = run_transaction(model, T, clean, seed, max_steps=cfg.max_steps)
        if r.kept:
            kept += 1
            steps.append(r.steps)
            matched += r.replay_equivalent and r.output == oracle.output
        aborted += r.status == "aborted"
    return {
        "kept": kept,
        "matched": matched,
        "aborted": aborted,
        "median_steps": statistics.median(steps) if steps else None,
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=Config.seeds)
    p.add_argument("--kill-at", type=int, help="kill the receiver at this step")
    p.add_argument("--lose-buffer", action="store_true", help="the kill also drops the receiver's buffer")
    args = p.parse_args()
    cfg = Config(seeds=args.seeds, kill_at=args.kill_at, buffer_intact=not args.lose_buffer)

    print(f"{'T':>3} {'loss':>5} {'kept':>6} {'match':>6} {'abort':>6} {'steps':>6}")
    for T in cfg.Ts:
        for loss in cfg.losses:
            c = cell(cfg, T, loss)
            med = "-" if c["median_steps"] is None else f"{c['median_steps']:g}"
            print(f"{T:>3} {loss:>5.1f} {c['kept']:>6} {c['matched']:>6} {c['aborted']:>6} {med:>6}")


if __name__ == "__main__":
    main()
