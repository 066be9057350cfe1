"""Contextual improvement policy: one memory-conditioned local move per
individual, and its per-step reward."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gnn
from . import problems as pr
from .memory import DEFAULT_EPS, DEFAULT_K

DEFAULT_W_REP = 0.1


class NoLegalAction(RuntimeError):
    pass


@dataclass
class ImprovementStepRecord:
    node_features: np.ndarray
    legal: np.ndarray
    action: pr.ActionSpec
    log_prob: float
    r_obj: float = 0.0
    r_rep: float = 0.0
    objective: float = 0.0


def cni_net_config(**overrides):
    return gnn.NetConfig(node_in=2, edge_in=1, **overrides)


def policy_moves(net, g, S, Z, problem, rng, mode="sample"):
    """Pick one node move for each row of ``S`` given descriptors ``Z``.

    Returns (new solutions, chosen nodes, log-probabilities, node features,
    legal masks). Rows are independent; all share the graph.
    """
    S = np.atleast_2d(np.asarray(S, dtype=np.uint8))
    legal = pr.legal_mask(g, S, problem)
    if not legal.any(axis=1).all():
        raise NoLegalAction("an individual has no legal move")
    feats, efeats = pr.build_cni_features(g, S, Z)
    logits = net.logits_np(feats, efeats, g.adjacency)
    dist = gnn.action_distribution(logits, legal)
    if mode == "greedy":
        nodes = gnn.greedy_action(dist)
    elif mode == "sample":
        nodes = gnn.sample_action(dist, rng)
    else:
        raise ValueError(f"mode must be 'sample' or 'greedy', got {mode!r}")
    rows = np.arange(len(S))
    logp = np.log(dist[rows, nodes])
    new = S.copy()
    new[rows, nodes] ^= 1
    return new, nodes, logp, feats, legal


def cni_step(net, g, s, mem, rng, problem, mode="sample", k=DEFAULT_K, eps=DEFAULT_EPS):
    """Single-individual move; does not write to ``mem``."""
    s = np.asarray(s, dtype=np.uint8)
    z = mem.knn_descriptor(s, k, eps)
    new, nodes, logp, feats, legal = policy_moves(net, g, s[None], z[None], problem, rng, mode)
    node = int(nodes[0])
    record = ImprovementStepRecord(
        node_features=feats[0], legal=legal[0], action=pr.action_for_node(s, node, problem),
        log_prob=float(logp[0]), objective=pr.objective(g, new[0], problem))
    return new[0], record


def cni_reward(prev_best, new_objective, revisited, w_rep=DEFAULT_W_REP, rs=None):
    """(r_total, r_obj, r_rep, new_best).

    ``prev_best``/``new_objective`` are raw objectives; the improvement term is
    measured on the normalized scale ``rs`` (identity when ``rs`` is None).
    Works elementwise on arrays.
    """
    prev_best = np.asarray(prev_best, dtype=np.float64)
    new_objective = np.asarray(new_objective, dtype=np.float64)
    if rs is None:
        gain = new_objective - prev_best
    else:
        gain = pr.normalize(new_objective, rs) - pr.normalize(prev_best, rs)
    r_obj = np.maximum(gain, 0.0)
    r_rep = -np.asarray(revisited, dtype=np.float64)
    total = r_obj + w_rep * r_rep
    new_best = np.maximum(prev_best, new_objective)
    if total.ndim == 0:
        return float(total), float(r_obj), float(r_rep), float(new_best)
    return total, r_obj, r_rep, new_best
