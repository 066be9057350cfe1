"""Classical comparison methods and exact oracles."""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import problems as pr
from .trace import AnytimeTrace, population_diversity

MC_BRUTE_LIMIT = 22
MIS_BRUTE_LIMIT = 26


class TooLarge(ValueError):
    pass


# greedy ---------------------------------------------------------------------

def greedy_mc(g):
    """Flip the node with the largest positive cut gain until none remains."""
    s = np.zeros(g.n, dtype=np.uint8)
    W = _weight_matrix(g)
    while True:
        side = 2.0 * s - 1.0
        # gain of flipping u = sum_v w_uv * (same side ? 1 : -1)
        gain = W @ (side) * side
        u = int(np.argmax(gain))
        if gain[u] <= 1e-12:
            return s
        s[u] ^= 1


def _weight_matrix(g):
    W = np.zeros((g.n, g.n))
    if len(g.edges):
        W[g.edges[:, 0], g.edges[:, 1]] = g.weights
        W[g.edges[:, 1], g.edges[:, 0]] = g.weights
    return W


def greedy_mis(g):
    """Add the free node of minimum degree among free nodes; ties by index."""
    adj = g.adjacency
    s = np.zeros(g.n, dtype=np.uint8)
    free = np.ones(g.n, dtype=bool)
    while free.any():
        deg = (adj & free).sum(axis=1)
        deg = np.where(free, deg, np.iinfo(np.int64).max)
        u = int(np.argmin(deg))
        s[u] = 1
        free[u] = False
        free &= ~adj[u]
    return s


def greedy(g, problem):
    return greedy_mc(g) if problem == pr.MC else greedy_mis(g)


def uniform_policy(net):
    """Copy of ``net`` whose decoder outputs constant logits, so every legal
    action is equally likely. Runs through the same search code as the
    trained policy."""
    u = net.copy()
    for name in ("dec2.w", "dec2.b"):
        u.params[name].value[...] = 0.0
    u.touch()
    return u


# repair ---------------------------------------------------------------------

def repair_mis(g, s, rng):
    """Drop conflicting endpoints in random order, then saturate greedily.

    The result is always a maximal independent set.
    """
    s = np.array(s, dtype=np.uint8)
    adj = g.adjacency
    order = rng.permutation(g.n)
    for u in order:
        if s[u] and (adj[u] & (s > 0)).any():
            s[u] = 0
    blocked = adj[:, s > 0].any(axis=1) | (s > 0)
    for u in rng.permutation(g.n):
        if not blocked[u]:
            s[u] = 1
            blocked |= adj[u]
            blocked[u] = True
    return s


def _fix(g, problem, S, rng):
    if problem == pr.MIS:
        return np.stack([repair_mis(g, s, rng) for s in S])
    return S


# GA -------------------------------------------------------------------------

@dataclass
class GAConfig:
    population: int = 20
    generations: int = 100
    crossover: float = 0.9
    mutation: float = -1.0     # < 0 -> 1/|V|
    elitism: int = 1
    tournament: int = 2
    time_budget: float = 0.0
    seed: int = 0


def ga_run(g, problem, config=None, rng=None, reference=None):
    cfg = config or GAConfig()
    if cfg.population < 2:
        raise ValueError("GA population must be at least 2")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    P, n = cfg.population, g.n
    mut = 1.0 / n if cfg.mutation < 0 else cfg.mutation
    t0 = time.perf_counter()
    trace = AnytimeTrace(reference)
    X = _fix(g, problem, pr.random_solutions(g, problem, rng, P), rng)
    f = pr.objective(g, X, problem).astype(float)
    best_i = int(np.argmax(f))
    best, best_bits = float(f[best_i]), X[best_i].copy()
    trace.record(0, 0.0, best, f.mean(), population_diversity(X))
    gen = 0
    while _more(gen, cfg.generations, cfg.time_budget, t0):
        elite = np.argsort(-f, kind="stable")[:cfg.elitism]
        children = [X[e].copy() for e in elite]
        while len(children) < P:
            a = _tournament(f, cfg.tournament, rng)
            b = _tournament(f, cfg.tournament, rng)
            child = X[a].copy()
            if rng.random() < cfg.crossover:
                take = rng.random(n) < 0.5
                child[take] = X[b][take]
            flip = rng.random(n) < mut
            child[flip] ^= 1
            if problem == pr.MIS:
                child = repair_mis(g, child, rng)
            children.append(child)
        X = np.stack(children)
        f = pr.objective(g, X, problem).astype(float)
        gen += 1
        i = int(np.argmax(f))
        if f[i] > best:
            best, best_bits = float(f[i]), X[i].copy()
        trace.record(gen, time.perf_counter() - t0, best, f.mean(), population_diversity(X))
    return best_bits, trace


def _tournament(f, size, rng):
    idx = rng.integers(len(f), size=size)
    return int(idx[np.argmax(f[idx])])


def _more(step, steps, time_budget, t0):
    if time_budget > 0:
        return time.perf_counter() - t0 < time_budget and (not steps or step < steps)
    return step < steps


# PSO ------------------------------------------------------------------------

@dataclass
class PSOConfig:
    swarm: int = 20
    iterations: int = 100
    w: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    v_max: float = 4.0
    time_budget: float = 0.0
    seed: int = 0


def pso_run(g, problem, config=None, rng=None, reference=None):
    cfg = config or PSOConfig()
    if cfg.swarm < 2:
        raise ValueError("swarm must have at least 2 particles")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    P, n = cfg.swarm, g.n
    t0 = time.perf_counter()
    trace = AnytimeTrace(reference)
    X = _fix(g, problem, pr.random_solutions(g, problem, rng, P), rng)
    V = np.zeros((P, n))
    f = pr.objective(g, X, problem).astype(float)
    pbest, pbest_f = X.copy(), f.copy()
    gi = int(np.argmax(f))
    gbest, gbest_f = X[gi].copy(), float(f[gi])
    trace.record(0, 0.0, gbest_f, f.mean(), population_diversity(X))
    it = 0
    while _more(it, cfg.iterations, cfg.time_budget, t0):
        r1, r2 = rng.random((P, n)), rng.random((P, n))
        V = cfg.w * V + cfg.c1 * r1 * (pbest - X.astype(float)) + cfg.c2 * r2 * (gbest - X.astype(float))
        np.clip(V, -cfg.v_max, cfg.v_max, out=V)
        prob = 1.0 / (1.0 + np.exp(-V))
        X = (rng.random((P, n)) < prob).astype(np.uint8)
        X = _fix(g, problem, X, rng)
        f = pr.objective(g, X, problem).astype(float)
        better = f > pbest_f
        pbest[better], pbest_f[better] = X[better], f[better]
        i = int(np.argmax(f))
        if f[i] > gbest_f:
            gbest, gbest_f = X[i].copy(), float(f[i])
        it += 1
        trace.record(it, time.perf_counter() - t0, gbest_f, f.mean(), population_diversity(X))
    return gbest, trace


# exact oracles --------------------------------------------------------------

def brute_force(g, problem):
    """Exact optimum value and one maximizer."""
    if problem == pr.MC:
        return _brute_mc(g)
    if problem == pr.MIS:
        return _brute_mis(g)
    raise ValueError(f"unknown problem {problem!r}")


def _brute_mc(g):
    n = g.n
    if n > MC_BRUTE_LIMIT:
        raise TooLarge(f"brute-force Max-Cut is limited to {MC_BRUTE_LIMIT} nodes, got {n}")
    if n <= 1 or len(g.edges) == 0:
        s = np.zeros(n, dtype=np.uint8)
        if n:
            s[0] = 1
        return 0.0, s
    w = g.weights
    u, v = g.edges[:, 0], g.edges[:, 1]
    best, arg = -np.inf, 0
    free = n - 1
    chunk = 1 << min(free, 16)
    for lo in range(0, 1 << free, chunk):
        codes = np.arange(lo, lo + chunk, dtype=np.int64)
        # bit 0 fixed to 1; bits 1..n-1 come from the code
        bits = np.ones((len(codes), n), dtype=np.uint8)
        bits[:, 1:] = (codes[:, None] >> np.arange(free)) & 1
        cut = ((bits[:, u] != bits[:, v]) * w).sum(axis=1)
        i = int(np.argmax(cut))
        if cut[i] > best:
            best, arg = float(cut[i]), bits[i].copy()
    return best, arg


def _brute_mis(g):
    n = g.n
    if n > MIS_BRUTE_LIMIT:
        raise TooLarge(f"brute-force MIS is limited to {MIS_BRUTE_LIMIT} nodes, got {n}")
    nbr = [0] * n
    for a, b in g.edges:
        nbr[a] |= 1 << int(b)
        nbr[b] |= 1 << int(a)
    best = [0, 0]

    def popcount(x):
        return bin(x).count("1")

    def rec(cand, chosen, size):
        if cand == 0:
            if size > best[0]:
                best[0], best[1] = size, chosen
            return
        if size + popcount(cand) <= best[0]:
            return
        # branch on the candidate of maximum degree within the candidate set
        v, vdeg = -1, -1
        c = cand
        while c:
            low = c & -c
            u = low.bit_length() - 1
            d = popcount(nbr[u] & cand)
            if d > vdeg:
                v, vdeg = u, d
            c ^= low
        if vdeg == 0:
            size += popcount(cand)
            if size > best[0]:
                best[0], best[1] = size, chosen | cand
            return
        rec(cand & ~nbr[v] & ~(1 << v), chosen | (1 << v), size + 1)
        rec(cand & ~(1 << v), chosen, size)

    rec((1 << n) - 1, 0, 0)
    s = np.array([(best[1] >> i) & 1 for i in range(n)], dtype=np.uint8)
    return float(best[0]), s


def enumerate_optimum(g, problem):
    """Plain enumeration of all 2^n labelings; a second oracle for tests."""
    best, arg = -np.inf, None
    for bits in itertools.product((0, 1), repeat=g.n):
        s = np.array(bits, dtype=np.uint8)
        if problem == pr.MIS and not pr.mis_is_feasible(g, s):
            continue
        v = float(pr.objective(g, s, problem))
        if v > best:
            best, arg = v, s
    return best, arg
