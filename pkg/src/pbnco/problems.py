"""Max-Cut and Maximum Independent Set semantics.

Solutions are plain ``uint8`` arrays of node labels; a batch of solutions is a
2-D array with one row per solution. :class:`Solution` bundles one row with its
objective for places that want a typed record.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

MC = "MC"
MIS = "MIS"
PROBLEMS = (MC, MIS)


class IllegalAction(ValueError):
    pass


class ActionKind(Enum):
    FLIP = "flip"
    ACTIVATE = "activate"
    DEACTIVATE = "deactivate"


@dataclass(frozen=True)
class ActionSpec:
    kind: ActionKind
    node: int


@dataclass(frozen=True)
class RewardScale:
    baseline: float
    scale: float
    lower: float = 0.0
    upper: float = 1.0


@dataclass
class Solution:
    bits: np.ndarray
    objective: float
    problem: str

    @classmethod
    def of(cls, g, bits, problem):
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(bits, objective(g, bits, problem), problem)


def _check_problem(problem):
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")


def _check_len(g, s):
    if s.shape[-1] != g.n:
        raise ValueError(f"solution length {s.shape[-1]} does not match |V| = {g.n}")


def mc_objective(g, s):
    """Weighted cut value; works on a single solution or a batch (rows)."""
    s = np.asarray(s)
    _check_len(g, s)
    if g.m == 0:
        return np.zeros(s.shape[:-1]) if s.ndim > 1 else 0.0
    cut = s[..., g.edges[:, 0]] != s[..., g.edges[:, 1]]
    return cut @ g.weights if s.ndim > 1 else float(cut @ g.weights)


def mis_objective(g, s):
    s = np.asarray(s)
    _check_len(g, s)
    total = s.sum(axis=-1)
    return total.astype(np.float64) if s.ndim > 1 else float(total)


def mis_is_feasible(g, s):
    s = np.asarray(s)
    _check_len(g, s)
    if g.m == 0:
        return np.ones(s.shape[:-1], dtype=bool) if s.ndim > 1 else True
    clash = (s[..., g.edges[:, 0]] > 0) & (s[..., g.edges[:, 1]] > 0)
    ok = ~clash.any(axis=-1)
    return ok if s.ndim > 1 else bool(ok)


def objective(g, s, problem):
    _check_problem(problem)
    return mc_objective(g, s) if problem == MC else mis_objective(g, s)


def mc_reward_scale(g, log_base=math.e):
    m, n = g.m, g.n
    scale = math.sqrt(m * n * math.log(2.0, log_base) / 2.0)
    return RewardScale(baseline=m / 2.0, scale=scale if scale > 0 else 1.0)


def greedy_matching_size(g):
    matched = np.zeros(g.n, dtype=bool)
    size = 0
    for u, v in g.edges:
        if not matched[u] and not matched[v]:
            matched[u] = matched[v] = True
            size += 1
    return size


def mis_reward_scale(g):
    lower = float(np.sum(1.0 / (g.degrees + 1.0)))
    upper = float(g.n - greedy_matching_size(g))
    return RewardScale(baseline=lower, scale=(upper - lower) if upper > lower else 1.0,
                       lower=lower, upper=upper)


def reward_scale(g, problem, log_base=math.e):
    _check_problem(problem)
    return mc_reward_scale(g, log_base) if problem == MC else mis_reward_scale(g)


def normalize(value, rs):
    """Centred, rescaled objective."""
    return (value - rs.baseline) / rs.scale


def hamming_normalized(s1, s2):
    s1, s2 = np.asarray(s1), np.asarray(s2)
    if s1.shape[-1] != s2.shape[-1]:
        raise ValueError("solutions have different lengths")
    d = (s1 != s2).mean(axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def random_solution(g, problem, rng):
    _check_problem(problem)
    if problem == MC:
        return (rng.random(g.n) < 0.5).astype(np.uint8)
    s = np.zeros(g.n, dtype=np.uint8)
    free = np.ones(g.n, dtype=bool)
    adj = g.adjacency
    while free.any():
        cand = np.flatnonzero(free)
        u = cand[rng.integers(len(cand))]
        s[u] = 1
        free[u] = False
        free &= ~adj[u]
    return s


def random_solutions(g, problem, rng, count):
    return np.stack([random_solution(g, problem, rng) for _ in range(count)])


def is_maximal_independent(g, s):
    """Feasible and no inactive node can be added."""
    s = np.asarray(s)
    if not mis_is_feasible(g, s):
        return False
    blocked = (g.adjacency[:, s > 0].any(axis=1)) | (s > 0)
    return bool(blocked.all())


def legal_mask(g, s, problem):
    """Boolean mask over nodes: which node-toggle actions are legal.

    Accepts one solution or a batch. For MC every flip is legal; for MIS a
    node may be deactivated when active, activated when free of active
    neighbours.
    """
    _check_problem(problem)
    s = np.asarray(s)
    if problem == MC:
        return np.ones(s.shape, dtype=bool)
    active = s > 0
    has_active_nbr = (active.astype(np.int64) @ g.adjacency.astype(np.int64)) > 0
    return active | ~has_active_nbr


def action_for_node(s, node, problem):
    if problem == MC:
        return ActionSpec(ActionKind.FLIP, int(node))
    kind = ActionKind.DEACTIVATE if s[node] else ActionKind.ACTIVATE
    return ActionSpec(kind, int(node))


def legal_actions(g, s, problem):
    mask = legal_mask(g, s, problem)
    return {action_for_node(s, u, problem) for u in np.flatnonzero(mask)}


def apply_action(g, s, a, problem):
    s = np.asarray(s, dtype=np.uint8)
    if not 0 <= a.node < g.n:
        raise IllegalAction(f"node {a.node} out of range")
    u = a.node
    if problem == MC:
        if a.kind is not ActionKind.FLIP:
            raise IllegalAction(f"{a.kind} is not a Max-Cut move")
    elif a.kind is ActionKind.DEACTIVATE:
        if not s[u]:
            raise IllegalAction(f"node {u} is not active")
    elif a.kind is ActionKind.ACTIVATE:
        if s[u] or s[g.neighbors[u]].any():
            raise IllegalAction(f"activating node {u} breaks independence")
    else:
        raise IllegalAction(f"{a.kind} is not an MIS move")
    out = s.copy()
    out[u] ^= 1
    return out


def build_cni_features(g, s, z):
    """Node features ``[s_u, z_u]`` and a constant edge-presence channel.

    ``s`` and ``z`` may be batched along a leading axis.
    """
    s = np.asarray(s, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    node = np.stack([s, z], axis=-1)
    return node, edge_features(g)


def build_cnc_features(g, cond, omega, k_max, anchor=False):
    """Node features ``[m^(1..K_max), omega(, anchor)]`` for one conditioning set."""
    cond = np.asarray(cond, dtype=np.float64).reshape(-1, g.n)
    if len(cond) > k_max:
        raise ValueError(f"conditioning set has {len(cond)} members, limit is {k_max}")
    width = k_max + 1 + int(anchor)
    node = np.zeros((g.n, width))
    node[:, :len(cond)] = cond.T
    node[:, k_max] = omega
    if anchor:
        node[0, k_max + 1] = 1.0
    return node, edge_features(g)


def edge_features(g):
    """Dense (|V|, |V|, 1) edge-feature tensor: 1 on edges, 0 elsewhere."""
    return g.adjacency.astype(np.float64)[:, :, None]
