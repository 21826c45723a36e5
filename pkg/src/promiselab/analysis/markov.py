"""Markov order estimation with nested likelihood-ratio (G) tests."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

import numpy as np
from scipy.stats import chi2


class InsufficientDataError(ValueError):
    def __init__(self, required: int, got: int, what: str = "sequence"):
        super().__init__(f"{what} too short: need at least {required} samples, got {got}")
        self.required = required
        self.got = got


@dataclass(frozen=True)
class TransitionMatrix:
    """Conditional next-state counts for an order-``order`` chain.

    Rows are contexts (tuples of the last ``order`` states, oldest first);
    for order 1 this is the usual square matrix over ``states``.
    """

    states: tuple
    order: int
    contexts: tuple[tuple, ...]
    counts: tuple[tuple[int, ...], ...]
    homogeneous: bool | None = None

    @property
    def normalized(self) -> tuple[tuple[Fraction, ...], ...]:
        rows = []
        for row in self.counts:
            total = sum(row)
            rows.append(tuple(Fraction(c, total) if total else Fraction(0) for c in row))
        return tuple(rows)

    def as_array(self) -> np.ndarray:
        counts = np.asarray(self.counts, dtype=float)
        totals = counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(totals > 0, counts / np.where(totals == 0, 1, totals), 0.0)
        return out

    def probability(self, context, state) -> float:
        if self.order == 1 and not isinstance(context, tuple):
            context = (context,)
        i = self.contexts.index(tuple(context))
        j = self.states.index(state)
        return float(self.normalized[i][j])

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "states": list(self.states),
            "contexts": [list(c) for c in self.contexts],
            "counts": [list(r) for r in self.counts],
            "normalized": [[float(p) for p in r] for r in self.normalized],
            "homogeneous": self.homogeneous,
        }


@dataclass(frozen=True)
class OrderTest:
    order: int
    statistic: float
    dof: int
    p_value: float
    alpha: float = 0.01

    @property
    def rejected(self) -> bool:
        return self.p_value < self.alpha


@dataclass(frozen=True)
class MarkovOrderResult:
    order: int
    matrices: dict[int, TransitionMatrix]
    tests: tuple[OrderTest, ...]
    states: tuple


def _encode(seq: Sequence[Hashable], states: Sequence | None):
    if states is None:
        states = sorted(set(seq), key=lambda s: (str(type(s)), s))
    states = tuple(states)
    index = {s: i for i, s in enumerate(states)}
    try:
        codes = np.fromiter((index[s] for s in seq), dtype=np.int64, count=len(seq))
    except KeyError as e:
        raise ValueError(f"value {e.args[0]!r} not among declared states") from None
    return states, codes


def _joint(codes: np.ndarray, S: int, m: int, start: int) -> np.ndarray:
    """Counts of (context of length m, next) over positions start..N-1.
    Context code puts the most recent state in the lowest digit."""
    n = len(codes)
    ctx = np.zeros(n - start, dtype=np.int64)
    for j in range(1, m + 1):
        ctx += codes[start - j : n - j] * (S ** (j - 1))
    flat = ctx * S + codes[start:]
    return np.bincount(flat, minlength=(S**m) * S).reshape(S**m, S)


def _g_statistic(lower: np.ndarray, upper: np.ndarray, S: int, m: int) -> float:
    """G for order m (``lower``) against m+1 (``upper``) on aligned data."""
    up = upper.astype(float)
    up_tot = up.sum(axis=1, keepdims=True)
    low = lower.astype(float)
    low_tot = low.sum(axis=1, keepdims=True)
    suffix = np.arange(S ** (m + 1)) % (S**m)
    mask = up > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        p_up = up / up_tot
        p_low = (low / low_tot)[suffix]
        terms = np.where(mask, up * (np.log(p_up) - np.log(p_low)), 0.0)
    return float(2.0 * terms.sum())


def _matrix(codes, states, m, start, homogeneity_windows=0, tolerance=0.1, min_row=50) -> TransitionMatrix:
    S = len(states)
    joint = _joint(codes, S, m, start)
    contexts = []
    for c in range(S**m):
        digits = [(c // (S**j)) % S for j in range(m)]  # most recent first
        contexts.append(tuple(states[d] for d in reversed(digits)))
    homogeneous = None
    if homogeneity_windows > 1:
        homogeneous = _homogeneous(codes, S, m, start, joint, homogeneity_windows, tolerance, min_row)
    return TransitionMatrix(
        states,
        m,
        tuple(contexts),
        tuple(tuple(int(x) for x in row) for row in joint),
        homogeneous,
    )


def _homogeneous(codes, S, m, start, joint, windows, tolerance, min_row) -> bool:
    totals = joint.sum(axis=1, keepdims=True)
    overall = np.divide(joint, totals, out=np.zeros_like(joint, dtype=float), where=totals > 0)
    bounds = np.linspace(start, len(codes), windows + 1).astype(int)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi - lo <= m:
            continue
        # lo >= start >= m, so every window position has a full context
        part = _joint(codes[lo - m : hi], S, m, m)
        ptot = part.sum(axis=1, keepdims=True)
        est = np.divide(part, ptot, out=np.zeros_like(part, dtype=float), where=ptot > 0)
        rows = (ptot[:, 0] >= min_row) & (totals[:, 0] >= min_row)
        if rows.any() and np.abs(est[rows] - overall[rows]).max() > tolerance:
            return False
    return True


def estimate_transition_matrix(
    seq: Sequence,
    order: int = 1,
    states: Sequence | None = None,
    *,
    windows: int = 4,
    tolerance: float = 0.1,
) -> TransitionMatrix:
    """Counts and row-normalized estimate for a fixed ``order``. The
    homogeneity flag compares ``windows`` contiguous slices with the whole."""
    states, codes = _encode(seq, states)
    if len(codes) <= order:
        raise InsufficientDataError(order + 1, len(codes))
    return _matrix(codes, states, order, order, windows, tolerance)


def estimate_markov_order(
    seq: Sequence,
    max_order: int,
    *,
    alpha: float = 0.01,
    min_length: int | None = None,
    states: Sequence | None = None,
) -> MarkovOrderResult:
    """Smallest order m <= ``max_order`` whose conditional distribution is
    not rejected against order m+1 by a G-test at level ``alpha``.

    All nested comparisons use the same positions (those with a full
    ``max_order`` history) so the statistics are comparable.
    """
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    states, codes = _encode(seq, states)
    S = max(len(states), 1)
    required = min_length if min_length is not None else 10 * S ** (max_order + 1)
    if len(codes) < required:
        raise InsufficientDataError(required, len(codes))

    start = max_order
    matrices = {m: _matrix(codes, states, m, m, homogeneity_windows=4) for m in range(max_order + 1)}
    if S == 1:
        return MarkovOrderResult(0, matrices, (), states)
    aligned = {m: _joint(codes, S, m, start) for m in range(max_order + 1)}
    tests = []
    chosen = max_order
    for m in range(max_order):
        g = _g_statistic(aligned[m], aligned[m + 1], S, m)
        dof = (S**m) * (S - 1) ** 2
        p = float(chi2.sf(g, dof))
        tests.append(OrderTest(m, g, dof, p, alpha))
        if p >= alpha:
            chosen = m
            break
    return MarkovOrderResult(chosen, matrices, tuple(tests), states)


def generate_chain(
    transition,
    order: int,
    states: Sequence,
    length: int,
    rng: np.random.Generator,
    initial: Sequence | None = None,
) -> list:
    """Sample a sequence from an order-``order`` chain.

    ``transition(context)`` returns the next-state probabilities (aligned
    with ``states``) for a context tuple of the last ``order`` states.
    """
    states = list(states)
    hist = list(initial) if initial is not None else [states[0]] * order
    out = list(hist)
    draws = rng.random(length)
    cache = {}
    for u in draws[: max(length - len(out), 0)]:
        ctx = tuple(out[len(out) - order :]) if order else ()
        cum = cache.get(ctx)
        if cum is None:
            cum = np.cumsum(transition(ctx))
            cum = (cum / cum[-1]).tolist()
            cache[ctx] = cum
        out.append(states[min(bisect.bisect_right(cum, u), len(cum) - 1)])
    return out[:length]
