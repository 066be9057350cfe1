"""Conditioned constructive policy.

One encoder pass maps (graph, conditioning set, omega) to per-node logits.
Max-Cut samples every label independently from ``sigmoid(logit)`` with node 0
pinned to 1. MIS visits nodes by descending logit and decides each still-free
node with a Bernoulli draw, then saturates so the set is maximal; greedy MIS
decoding activates every free node in score order.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import gnn
from . import problems as pr

DEFAULT_K_MAX = 20
DEFAULT_BETA = (0.2, 0.2)
ANCHOR_NODE = 0


def cnc_net_config(problem, k_max=DEFAULT_K_MAX, **overrides):
    anchor = problem == pr.MC
    return gnn.NetConfig(node_in=k_max + 1 + int(anchor), edge_in=1, anchor=anchor, **overrides)


def k_max_of(net):
    return net.cfg.node_in - 1 - int(net.cfg.anchor)


def features(net, g, cond, omega):
    return pr.build_cnc_features(g, cond, omega, k_max_of(net), anchor=net.cfg.anchor)


def cnc_logits(net, g, cond, omega, grad=False):
    node, edge = features(net, g, cond, omega)
    if grad:
        return ad.reshape(net.logits(node[None], edge, g.adjacency), (g.n,))
    return net.logits_np(node[None], edge, g.adjacency)[0]


def decode(g, logits, problem, rng=None, mode="sample", count=1):
    """Decode ``count`` solutions from one logit vector.

    Returns (solutions, decision mask, decision bits): the log-probability of a
    row is sum over decision nodes of log Bernoulli(bit; sigmoid(logit)).
    """
    logits = np.asarray(logits, dtype=np.float64)
    n = g.n
    if problem == pr.MC:
        if mode == "greedy":
            bits = np.broadcast_to(logits > 0, (count, n)).astype(np.uint8)
        else:
            p = np.exp(-np.logaddexp(0.0, -logits))
            bits = (rng.random((count, n)) < p).astype(np.uint8)
        bits[:, ANCHOR_NODE] = 1
        decided = np.ones((count, n), dtype=bool)
        decided[:, ANCHOR_NODE] = False
        return bits, decided, bits.copy()
    if problem != pr.MIS:
        raise ValueError(f"unknown problem {problem!r}")
    order = np.argsort(-logits, kind="stable")
    adj = g.adjacency
    sols = np.zeros((count, n), dtype=np.uint8)
    decided = np.zeros((count, n), dtype=bool)
    dbits = np.zeros((count, n), dtype=np.uint8)
    p = np.exp(-np.logaddexp(0.0, -logits))
    for c in range(count):
        free = np.ones(n, dtype=bool)
        draws = rng.random(n) if mode == "sample" else None
        for u in order:
            if not free[u]:
                continue
            decided[c, u] = True
            take = True if draws is None else draws[u] < p[u]
            if take:
                dbits[c, u] = 1
                sols[c, u] = 1
                free &= ~adj[u]
            free[u] = False
        # saturation: any node still unblocked joins, keeping the set maximal
        blocked = (adj[:, sols[c] > 0].any(axis=1)) | (sols[c] > 0)
        for u in order:
            if not blocked[u]:
                sols[c, u] = 1
                blocked |= adj[u]
                blocked[u] = True
    return sols, decided, dbits


def decision_log_prob(logits, decided, dbits):
    """Numpy log-probabilities (one per row) of the recorded decisions."""
    logits = np.asarray(logits)
    lp1 = -np.logaddexp(0.0, -logits)
    lp0 = -np.logaddexp(0.0, logits)
    return np.where(decided, np.where(dbits > 0, lp1, lp0), 0.0).sum(axis=-1)


def decision_log_prob_tensor(logits, decided, dbits):
    """Differentiable version: ``logits`` is an (n,) Tensor, output (count,)."""
    decided = np.asarray(decided, dtype=np.float64)
    dbits = np.asarray(dbits, dtype=np.float64)
    lp1 = ad.log_sigmoid(logits)
    lp0 = ad.log_sigmoid(ad.neg(logits))
    per_node = ad.multiply(decided * dbits, lp1) + ad.multiply(decided * (1.0 - dbits), lp0)
    return ad.sum(per_node, axis=-1)


def cnc_construct(net, g, cond, omega, rng, problem, mode="sample", count=None):
    """Build solution(s) conditioned on ``cond`` and ``omega``.

    Returns (bits, log-probability) for a single construction, or arrays of
    both when ``count`` is given.
    """
    logits = cnc_logits(net, g, cond, omega)
    sols, decided, dbits = decode(g, logits, problem, rng, mode, 1 if count is None else count)
    logp = decision_log_prob(logits, decided, dbits)
    if count is None:
        return sols[0], float(logp[0])
    return sols, logp


def cnc_reward(g, sols, cond, omega, problem, rs=None):
    """(1 - omega) * normalized objective + omega * mean distance to ``cond``."""
    sols = np.asarray(sols)
    rs = pr.reward_scale(g, problem) if rs is None else rs
    quality = pr.normalize(pr.objective(g, sols, problem), rs)
    div = mean_distance(sols, cond)
    return (1.0 - omega) * quality + omega * div


def mean_distance(sols, cond):
    sols = np.asarray(sols)
    cond = np.asarray(cond).reshape(-1, sols.shape[-1])
    if len(cond) == 0:
        return np.zeros(sols.shape[:-1]) if sols.ndim > 1 else 0.0
    d = (sols[..., None, :] != cond).mean(axis=-1).mean(axis=-1)
    return d if sols.ndim > 1 else float(d)


def sample_omega(rng, alpha=DEFAULT_BETA[0], beta=DEFAULT_BETA[1], size=None):
    if alpha <= 0 or beta <= 0:
        raise ValueError("Beta parameters must be positive")
    return rng.beta(alpha, beta, size=size)


def omega_schedule(t, t_max, omega_start=1.0, phi=1.0):
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    frac = max(0.0, 1.0 - t / t_max)
    return float(min(1.0, max(0.0, omega_start * frac ** phi)))
