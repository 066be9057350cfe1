"""Bounded FIFO store of visited solutions.

Supports exact membership (for the repetition penalty) and a k-nearest
neighbour descriptor under normalized Hamming distance. Writes made during a
population step should be collected and applied with :meth:`insert_many` at the
step barrier so every read in that step sees the same snapshot.
"""
from __future__ import annotations

import json

import numpy as np

DEFAULT_CAPACITY = 10_000
DEFAULT_K = 20
DEFAULT_EPS = 1e-9

LAST = "last"
BEST_GLOBAL = "best-global"
BEST_CURRENT = "best-current"
SELECT_K_STRATEGIES = (LAST, BEST_GLOBAL, BEST_CURRENT)


class SharedMemory:
    def __init__(self, n, capacity=DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.n = n
        self.capacity = capacity
        self._bits = np.zeros((capacity, n), dtype=np.uint8)
        self._fbits = np.zeros((capacity, n), dtype=np.float32)
        self._ones = np.zeros(capacity, dtype=np.float32)
        self._obj = np.zeros(capacity)
        self._ins = np.zeros(capacity, dtype=np.int64)
        self._head = 0  # slot of the oldest entry
        self.size = 0
        self.next_insertion_index = 0
        self._counts = {}

    def __len__(self):
        return self.size

    def _order(self):
        """Slots from oldest to newest."""
        return (self._head + np.arange(self.size)) % self.capacity

    @property
    def entries(self):
        order = self._order()
        return [(self._bits[i].copy(), float(self._obj[i]), int(self._ins[i])) for i in order]

    def insert(self, bits, objective=0.0):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (self.n,):
            raise ValueError(f"expected a length-{self.n} solution")
        if self.size == self.capacity:
            old = self._head
            self._forget(self._bits[old].tobytes())
            self._head = (self._head + 1) % self.capacity
            self.size -= 1
        slot = (self._head + self.size) % self.capacity
        self._bits[slot] = bits
        self._fbits[slot] = bits
        self._ones[slot] = bits.sum()
        self._obj[slot] = objective
        self._ins[slot] = self.next_insertion_index
        self.next_insertion_index += 1
        self.size += 1
        key = bits.tobytes()
        self._counts[key] = self._counts.get(key, 0) + 1

    def insert_many(self, bits, objectives):
        for b, f in zip(bits, objectives):
            self.insert(b, f)

    def _forget(self, key):
        c = self._counts[key] - 1
        if c:
            self._counts[key] = c
        else:
            del self._counts[key]

    def contains(self, bits):
        return np.asarray(bits, dtype=np.uint8).tobytes() in self._counts

    def count(self, bits):
        return self._counts.get(np.asarray(bits, dtype=np.uint8).tobytes(), 0)

    def last(self, k):
        order = self._order()[-k:] if k > 0 else []
        return self._bits[order].copy()

    def knn(self, queries, k=DEFAULT_K, eps=DEFAULT_EPS):
        """Return (descriptors, neighbour slots, weights) for a batch of queries.

        Neighbours are the ``k`` closest entries; equal distances prefer older
        entries. Descriptors are all-zero when the memory is empty.
        """
        q = np.atleast_2d(np.asarray(queries, dtype=np.float32))
        B = len(q)
        if self.size == 0:
            return np.zeros((B, self.n)), np.zeros((B, 0), dtype=np.int64), np.zeros((B, 0))
        # stored slots are 0..size-1 (a full ring uses every slot)
        slots = self.size
        age = (np.arange(slots) - self._head) % self.capacity
        dist = q.sum(axis=1)[:, None] + self._ones[:slots][None, :] - 2.0 * (q @ self._fbits[:slots].T)
        dist = np.rint(dist).astype(np.int64)
        key = dist * self.size + age[None, :]
        kk = min(k, self.size)
        if kk < self.size:
            pick = np.argpartition(key, kk - 1, axis=1)[:, :kk]
        else:
            pick = np.broadcast_to(np.arange(self.size), (B, self.size))
        pick = np.take_along_axis(pick, np.argsort(np.take_along_axis(key, pick, 1), axis=1), 1)
        d = np.take_along_axis(dist, pick, 1) / self.n
        alpha = descriptor_weights(d, eps)
        z = np.einsum("bk,bkn->bn", alpha, self._bits[pick].astype(np.float64))
        return z, pick, alpha

    def knn_descriptor(self, s, k=DEFAULT_K, eps=DEFAULT_EPS):
        return self.knn(np.asarray(s)[None], k, eps)[0][0]

    def dump_jsonl(self, path):
        with open(path, "w") as fh:
            for bits, obj, idx in self.entries:
                fh.write(json.dumps({"bits": "".join(map(str, bits)), "objective": obj,
                                     "insertion_index": idx}) + "\n")


def descriptor_weights(d, eps=DEFAULT_EPS):
    """Linear-decay weights from neighbour distances (rows independent)."""
    d = np.asarray(d, dtype=np.float64)
    dmin = d.min(axis=-1, keepdims=True)
    dmax = d.max(axis=-1, keepdims=True)
    w = 1.0 - (d - dmin) / (dmax - dmin + eps)
    return w / w.sum(axis=-1, keepdims=True)


def select_k(mem, strategy, k, best_global=None, best_current=None):
    """Conditioning set for a restart.

    ``best_global`` / ``best_current`` are (P, n) arrays of per-individual
    best-so-far and best-since-restart solutions.
    """
    if strategy == LAST:
        return mem.last(k)
    if strategy == BEST_GLOBAL:
        return np.asarray(best_global, dtype=np.uint8).copy()
    if strategy == BEST_CURRENT:
        return np.asarray(best_current, dtype=np.uint8).copy()
    raise ValueError(f"unknown SelectK strategy {strategy!r}; expected one of {SELECT_K_STRATEGIES}")
