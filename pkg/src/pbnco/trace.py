"""Anytime best-so-far traces and history diversity."""
from __future__ import annotations

import csv
import math

import numpy as np

TRACE_COLUMNS = ("step", "elapsed_seconds", "best_objective", "best_ratio",
                 "population_mean_objective", "diversity")


class AnytimeTrace:
    def __init__(self, reference=None):
        self.reference = reference
        self.rows = []

    def record(self, step, elapsed, best, pop_mean=float("nan"), diversity=float("nan")):
        ratio = best / self.reference if self.reference else float("nan")
        self.rows.append((int(step), float(elapsed), float(best), ratio, float(pop_mean),
                          float(diversity)))

    @property
    def best(self):
        return np.array([r[2] for r in self.rows])

    @property
    def steps(self):
        return np.array([r[0] for r in self.rows])

    def final(self):
        return self.rows[-1][2] if self.rows else -math.inf

    def to_csv(self, path, timing=True):
        """Write the trace; ``timing=False`` leaves the elapsed column empty so
        repeated runs are byte-identical."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for step, el, best, ratio, mean, div in self.rows:
                w.writerow([step, f"{el:.6f}" if timing else "", _fmt(best), _fmt(ratio),
                            _fmt(mean), _fmt(div)])

    def comparable(self):
        """Rows without the wall-clock column; NaN becomes None so rows compare equal."""
        return [tuple(None if isinstance(v, float) and math.isnan(v) else v
                      for v in (r[0],) + r[2:]) for r in self.rows]


def _fmt(x):
    return "" if math.isnan(x) else repr(float(x))


def read_trace_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class DiversityTracker:
    """Mean pairwise normalized Hamming distance of a growing history.

    Keeps per-position counts of ones so each append costs O(|V|).
    """

    def __init__(self, n):
        self.n = n
        self.count = 0
        self.ones = np.zeros(n, dtype=np.int64)
        self.pair_distance_sum = 0  # sum over pairs of Hamming distance (unnormalized)

    def append(self, s):
        s = np.asarray(s).astype(bool)
        self.pair_distance_sum += int(np.where(s, self.count - self.ones, self.ones).sum())
        self.ones += s
        self.count += 1
        return self.value

    @property
    def value(self):
        if self.count < 2:
            return 0.0
        pairs = self.count * (self.count - 1) / 2
        return self.pair_distance_sum / (pairs * self.n)


def diversity_trace(history):
    history = np.atleast_2d(np.asarray(history))
    if len(history) == 0:
        raise ValueError("history must be nonempty")
    tracker = DiversityTracker(history.shape[1])
    return np.array([tracker.append(s) for s in history])


def diversity_direct(history):
    """O(N^2 |V|) reference for :func:`diversity_trace`'s last value."""
    h = np.atleast_2d(np.asarray(history))
    N = len(h)
    if N < 2:
        return 0.0
    total = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            total += np.mean(h[i] != h[j])
    return total / (N * (N - 1) / 2)


def population_diversity(S):
    """Mean pairwise normalized Hamming distance within one population."""
    S = np.atleast_2d(np.asarray(S))
    P = len(S)
    if P < 2:
        return 0.0
    c = S.astype(np.int64).sum(axis=0)
    return float((c * (P - c)).sum() / (P * (P - 1) / 2 * S.shape[1]))
