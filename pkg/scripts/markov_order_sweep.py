#!/usr/bin/env python3
"""Accuracy of Markov order estimation against sequence length.

Chains of known order are drawn with uniform-Dirichlet transition rows over
2..4 states; the script reports how often the estimated order is right.

    python3 scripts/markov_order_sweep.py --seeds 100
"""

import argparse
from dataclasses import dataclass

import numpy as np

from promiselab.analysis import InsufficientDataError, estimate_markov_order, generate_chain


@dataclass
class Config:
    orders: tuple[int, ...] = (0, 1, 2)
    lengths: tuple[int, ...] = (1_000, 10_000, 100_000)
    seeds: int = 100
    max_order: int = 3
    alpha: float = 0.01


def trial(order: int, length: int, seed: int, cfg: Config) -> tuple[int | None, float | None]:
    rng = np.random.default_rng([order, seed])
    S = int(rng.integers(2, 5))
    rows = {ctx: rng.dirichlet(np.ones(S)) for ctx in np.ndindex(*([S] * order))}
    seq = generate_chain(lambda ctx: rows[tuple(ctx)], order, list(range(S)), length, rng)
    try:
        r = estimate_markov_order(seq, cfg.max_order, alpha=cfg.alpha, states=list(range(S)))
    except InsufficientDataError:
        return None, None
    err = None
    if order == 1:
        P = np.array([rows[(i,)] for i in range(S)])
        err = float(np.abs(r.matrices[1].as_array() - P).max())
    return r.order, err


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=Config.seeds)
    p.add_argument("--alpha", type=float, default=Config.alpha)
    args = p.parse_args()
    cfg = Config(seeds=args.seeds, alpha=args.alpha)

    print(f"{'order':>5} {'length':>8} {'correct':>8} {'short':>6} {'max L-inf':>10}")
    for order in cfg.orders:
        for length in cfg.lengths:
            correct = short = 0
            worst = None
            for seed in range(cfg.seeds):
                got, err = trial(order, length, seed, cfg)
                if got is None:
                    short += 1
                    continue
                correct += got == order
                if err is not None:
                    worst = err if worst is None else max(worst, err)
            w = "-" if worst is None else f"{worst:.4f}"
            print(f"{order:>5} {length:>8} {correct:>5}/{cfg.seeds:<3} {short:>5} {w:>10}")


if __name__ == "__main__":
    main()
