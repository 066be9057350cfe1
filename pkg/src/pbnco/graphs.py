"""Problem instances: Erdos-Renyi and RB graph generators plus a text format.

File format (0-indexed, one record per line)::

    c family ER
    c seed 7
    p edge 5 3
    e 0 1
    e 1 4 2.5      # optional weight

``c`` lines carry metadata, ``p`` gives node and edge counts, ``e`` lines list
edges in canonical order (u < v, lexicographic).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("ER", "RB", "Custom")


class ParseError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(eq=False)
class GraphInstance:
    node_count: int
    edges: np.ndarray  # (m, 2) int64, canonical order
    edge_weights: np.ndarray | None = None
    family_tag: str = "Custom"
    seed: int = 0
    _adj: np.ndarray | None = field(default=None, repr=False)
    _nbrs: list | None = field(default=None, repr=False)

    def __post_init__(self):
        n = int(self.node_count)
        if n < 1:
            raise ValueError("node_count must be positive")
        self.node_count = n
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if e.min() < 0 or e.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
        lo, hi = np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])
        order = np.lexsort((hi, lo))
        e = np.stack([lo[order], hi[order]], axis=1)
        if len(e) > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
            raise ValueError("duplicate edge")
        self.edges = e
        if self.edge_weights is not None:
            w = np.asarray(self.edge_weights, dtype=np.float64)
            if w.shape != (len(e),):
                raise ValueError("edge_weights must align with edges")
            if np.any(w <= 0):
                raise ValueError("edge weights must be positive")
            self.edge_weights = w[order]
        if self.family_tag not in FAMILIES:
            raise ValueError(f"family_tag must be one of {FAMILIES}")
        self.seed = int(self.seed)

    @property
    def n(self):
        return self.node_count

    @property
    def m(self):
        return len(self.edges)

    @property
    def weights(self):
        return np.ones(self.m) if self.edge_weights is None else self.edge_weights

    @property
    def adjacency(self):
        """Dense boolean adjacency matrix (cached)."""
        if self._adj is None:
            a = np.zeros((self.n, self.n), dtype=bool)
            a[self.edges[:, 0], self.edges[:, 1]] = True
            a[self.edges[:, 1], self.edges[:, 0]] = True
            self._adj = a
        return self._adj

    @property
    def neighbors(self):
        if self._nbrs is None:
            self._nbrs = [np.flatnonzero(row) for row in self.adjacency]
        return self._nbrs

    @property
    def degrees(self):
        return self.adjacency.sum(axis=1)

    def __eq__(self, other):
        if not isinstance(other, GraphInstance):
            return NotImplemented
        same_w = (self.edge_weights is None and other.edge_weights is None) or (
            self.edge_weights is not None and other.edge_weights is not None
            and np.array_equal(self.edge_weights, other.edge_weights))
        return (self.n == other.n and np.array_equal(self.edges, other.edges) and same_w
                and self.family_tag == other.family_tag and self.seed == other.seed)


def from_edges(n, edges, family_tag="Custom", seed=0):
    return GraphInstance(n, np.asarray(list(edges), dtype=np.int64).reshape(-1, 2),
                         family_tag=family_tag, seed=seed)


def complete_graph(n):
    return from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def cycle_graph(n):
    return from_edges(n, [(u, (u + 1) % n) for u in range(n)])


def path_graph(n):
    return from_edges(n, [(u, u + 1) for u in range(n - 1)])


def star_graph(leaves):
    return from_edges(leaves + 1, [(0, v) for v in range(1, leaves + 1)])


def generate_er(n, p, seed):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return GraphInstance(n, np.stack([iu[keep], iv[keep]], axis=1), family_tag="ER", seed=seed)


def generate_rb(groups, group_size, tightness, constraint_factor, seed):
    """Clique-group RB graph: ``groups`` cliques of ``group_size`` nodes plus
    random cross edges between random clique pairs."""
    if groups < 2 or group_size < 2:
        raise ValueError("RB needs at least 2 groups of size >= 2")
    if not 0.0 < tightness < 1.0:
        raise ValueError("tightness must lie in (0, 1)")
    if constraint_factor <= 0:
        raise ValueError("constraint_factor must be positive")
    rng = np.random.default_rng(seed)
    d = group_size
    edges = set()
    for g in range(groups):
        base = g * d
        for i in range(d):
            for j in range(i + 1, d):
                edges.add((base + i, base + j))
    rounds = int(round(constraint_factor * groups * math.log(groups)))
    per_round = int(round(tightness * d * d))
    for _ in range(rounds):
        a, b = rng.choice(groups, size=2, replace=False)
        picks = rng.choice(d * d, size=per_round, replace=False)
        for k in picks:
            u, v = a * d + k // d, b * d + k % d
            edges.add((min(u, v), max(u, v)))
    return GraphInstance(groups * d, np.array(sorted(edges), dtype=np.int64).reshape(-1, 2),
                         family_tag="RB", seed=seed)


def serialize_instance(g, problem="edge"):
    lines = [f"c family {g.family_tag}", f"c seed {g.seed}", f"p {problem} {g.n} {g.m}"]
    if g.edge_weights is None:
        lines += [f"e {u} {v}" for u, v in g.edges]
    else:
        lines += [f"e {u} {v} {float(w)!r}" for (u, v), w in zip(g.edges, g.edge_weights)]
    return ("\n".join(lines) + "\n").encode("ascii")


def parse_instance(data):
    if isinstance(data, str):
        data = data.encode("ascii")
    family, seed, header = "Custom", 0, None
    edges, weights = [], []
    offset = 0
    for raw in data.split(b"\n"):
        line_offset = offset
        offset += len(raw) + 1
        tok = raw.decode("ascii", errors="replace").split()
        if not tok:
            continue
        try:
            if tok[0] == "c":
                if len(tok) >= 3 and tok[1] == "family":
                    family = tok[2]
                elif len(tok) >= 3 and tok[1] == "seed":
                    seed = int(tok[2])
            elif tok[0] == "p":
                if header is not None or len(tok) != 4:
                    raise ValueError("bad problem line")
                header = (int(tok[2]), int(tok[3]))
            elif tok[0] == "e":
                if header is None:
                    raise ValueError("edge before problem line")
                if len(tok) not in (3, 4):
                    raise ValueError("bad edge line")
                edges.append((int(tok[1]), int(tok[2])))
                if len(tok) == 4:
                    weights.append(float(tok[3]))
            else:
                raise ValueError(f"unknown record type {tok[0]!r}")
        except ValueError as exc:
            raise ParseError(str(exc), line_offset) from None
    if header is None:
        raise ParseError("missing problem line", len(data))
    n, m = header
    if len(edges) != m:
        raise ParseError(f"header promises {m} edges, found {len(edges)}", len(data))
    if weights and len(weights) != m:
        raise ParseError("weights given for some edges only", len(data))
    try:
        return GraphInstance(n, np.array(edges, dtype=np.int64).reshape(-1, 2),
                             np.array(weights) if weights else None, family, seed)
    except ValueError as exc:
        raise ParseError(str(exc), 0) from None


def write_instance(path, g, problem="edge"):
    with open(path, "wb") as fh:
        fh.write(serialize_instance(g, problem))


def read_instance(path):
    with open(path, "rb") as fh:
        return parse_instance(fh.read())
