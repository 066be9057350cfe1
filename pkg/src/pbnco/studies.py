"""Diversity and quality/diversity trade-off studies for the constructive policy."""
from __future__ import annotations

import numpy as np

from . import cnc
from . import problems as pr
from .trace import DiversityTracker


def diversity_study(net, g, problem, omega, rng, initial=20, generated=100, conditioned=True,
                    mode="sample"):
    """Grow a history one construction at a time and track its diversity.

    The history starts from ``initial`` random solutions. Each new solution is
    conditioned on the ``K_max`` most recent history entries; with
    ``conditioned=False`` every conditioning channel (and omega) is zeroed.
    Returns the diversity after each of the ``initial + generated`` appends.
    """
    k_max = cnc.k_max_of(net)
    history = list(pr.random_solutions(g, problem, rng, initial))
    tracker = DiversityTracker(g.n)
    curve = [tracker.append(s) for s in history]
    empty = np.zeros((0, g.n), dtype=np.uint8)
    for _ in range(generated):
        if conditioned:
            s, _ = cnc.cnc_construct(net, g, np.stack(history[-k_max:]), omega, rng, problem, mode)
        else:
            s, _ = cnc.cnc_construct(net, g, empty, 0.0, rng, problem, mode)
        history.append(s)
        curve.append(tracker.append(s))
    return np.array(curve)


def pareto_sweep(net, instances, problem, omegas, rng, cond_size=10, samples=8):
    """Mean diversity and quality rewards for each omega.

    Every instance gets one fixed random conditioning set shared by all omega
    values. Returns arrays (len(omegas), len(instances)) of per-instance means.
    """
    div = np.zeros((len(omegas), len(instances)))
    qual = np.zeros_like(div)
    for j, g in enumerate(instances):
        cond = pr.random_solutions(g, problem, rng, cond_size)
        rs = pr.reward_scale(g, problem)
        for i, omega in enumerate(omegas):
            sols, _ = cnc.cnc_construct(net, g, cond, omega, rng, problem, "sample", count=samples)
            div[i, j] = cnc.mean_distance(sols, cond).mean()
            qual[i, j] = pr.normalize(pr.objective(g, sols, problem), rs).mean()
    return div, qual


def monotone_within_se(means, ses, increasing=True):
    """True when every consecutive step moves the right way, up to one SE."""
    means, ses = np.asarray(means), np.asarray(ses)
    step = np.diff(means) if increasing else -np.diff(means)
    tol = np.maximum(ses[:-1], ses[1:])
    return bool(np.all(step >= -tol))
