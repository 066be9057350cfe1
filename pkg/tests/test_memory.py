import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbnco.memory import (BEST_CURRENT, BEST_GLOBAL, LAST, SharedMemory, descriptor_weights,
                          select_k)


class ListMemory:
    """Plain-list reference: FIFO entries, linear-scan k-NN."""

    def __init__(self, n, capacity):
        self.n, self.capacity, self.items, self.counter = n, capacity, [], 0

    def insert(self, bits):
        self.items.append((np.array(bits, dtype=np.uint8), self.counter))
        self.counter += 1
        if len(self.items) > self.capacity:
            self.items.pop(0)

    def contains(self, bits):
        return any(np.array_equal(b, bits) for b, _ in self.items)

    def knn(self, s, k, eps=1e-9):
        if not self.items:
            return np.zeros(self.n)
        scored = sorted((int(np.sum(b != s)), idx, b) for b, idx in
                        ((b, idx) for b, idx in self.items))
        top = scored[:k]
        d = np.array([t[0] for t in top]) / self.n
        w = 1 - (d - d.min()) / (d.max() - d.min() + eps)
        a = w / w.sum()
        return sum(ai * t[2] for ai, t in zip(a, top))


def test_fifo_eviction():
    m = SharedMemory(2, capacity=2)
    for b in ([0, 0], [0, 1], [1, 1]):
        m.insert(b)
    assert [e[0].tolist() for e in m.entries] == [[0, 1], [1, 1]]
    assert not m.contains([0, 0]) and m.contains([1, 1])


def test_capacity_default_and_overflow():
    m = SharedMemory(3)
    assert m.capacity == 10_000
    rng = np.random.default_rng(0)
    first = rng.integers(0, 2, 3)
    m.insert(first, 0.0)
    for _ in range(10_000):
        m.insert(rng.integers(0, 2, 3))
    assert len(m) == 10_000
    assert m.entries[0][2] == 1  # insertion 0 evicted


def test_membership_is_multiset_aware():
    m = SharedMemory(2, capacity=3)
    m.insert([1, 0])
    m.insert([1, 0])
    m.insert([0, 0])
    assert m.count([1, 0]) == 2
    m.insert([0, 1])  # evicts one copy of [1,0]
    assert m.contains([1, 0]) and m.count([1, 0]) == 1
    m.insert([0, 1])
    assert not m.contains([1, 0])


def test_empty_memory():
    m = SharedMemory(4)
    assert not m.contains([0, 0, 0, 0])
    assert np.all(m.knn_descriptor(np.ones(4)) == 0)


def test_single_neighbour_descriptor_is_identity():
    m = SharedMemory(5)
    bits = np.array([1, 0, 1, 1, 0])
    m.insert(bits)
    np.testing.assert_array_equal(m.knn_descriptor(np.zeros(5)), bits)


def test_two_neighbours_hand_weighting():
    n = 4
    m = SharedMemory(n)
    near, far = np.array([1, 0, 0, 0]), np.array([1, 1, 1, 0])
    m.insert(far)
    m.insert(near)
    z, _, alpha = m.knn(np.zeros((1, n)), k=2)
    assert abs(alpha[0, 0] - 1) < 1e-6
    np.testing.assert_allclose(z[0], near, atol=1e-6)


def test_equidistant_neighbours_get_uniform_weights():
    m = SharedMemory(4)
    for b in ([1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]):
        m.insert(b)
    z, _, alpha = m.knn(np.zeros((1, 4)), k=3)
    np.testing.assert_allclose(alpha, 1 / 3)
    np.testing.assert_allclose(z[0], [1 / 3, 1 / 3, 1 / 3, 0])


def test_ties_prefer_older_entries():
    m = SharedMemory(3, capacity=4)
    for b in ([1, 0, 0], [0, 1, 0], [0, 0, 1]):
        m.insert(b)
    _, pick, _ = m.knn(np.zeros((1, 3)), k=2)
    assert [m._ins[p] for p in pick[0]] == [0, 1]


def test_weight_properties():
    d = np.array([[0.1, 0.1, 0.3, 0.5, 0.5]])
    a = descriptor_weights(d)
    assert np.all(a >= 0) and a.sum() == pytest.approx(1)
    assert np.all(np.diff(a[0]) <= 1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(1, 8), st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_matches_reference_under_interleavings(n, capacity, k, seed):
    """Step-snapshot contract: reads see the memory as of step start, writes
    land afterwards in individual order."""
    rng = np.random.default_rng(seed)
    m, ref = SharedMemory(n, capacity), ListMemory(n, capacity)
    for _ in range(rng.integers(1, 8)):
        pop = rng.integers(0, 2, (rng.integers(1, 5), n)).astype(np.uint8)
        z = m.knn(pop, k)[0]
        for i, s in enumerate(pop):
            np.testing.assert_allclose(z[i], ref.knn(s, k), atol=1e-12)
            assert m.contains(s) == ref.contains(s)
        writes = pop[rng.permutation(len(pop))] if rng.random() < 0.5 else pop
        for s in writes:
            m.insert(s)
            ref.insert(s)
        assert [e[2] for e in m.entries] == [idx for _, idx in ref.items]
        for b, _ in ref.items:
            assert m.contains(b)
    assert len(m) <= capacity


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_descriptor_is_convex_combination(n, seed):
    rng = np.random.default_rng(seed)
    m = SharedMemory(n, 16)
    for _ in range(rng.integers(1, 30)):
        m.insert(rng.integers(0, 2, n))
    z, _, alpha = m.knn(rng.integers(0, 2, (3, n)), k=int(rng.integers(1, 20)))
    assert np.all(alpha >= 0)
    np.testing.assert_allclose(alpha.sum(axis=1), 1)
    assert np.all((z >= -1e-12) & (z <= 1 + 1e-12))


def test_select_k_strategies():
    m = SharedMemory(2)
    for b in ([0, 0], [0, 1], [1, 1]):
        m.insert(b)
    assert select_k(m, LAST, 2).tolist() == [[0, 1], [1, 1]]
    assert len(select_k(m, LAST, 10)) == 3
    bg = np.array([[1, 0], [0, 1], [1, 1]])
    assert select_k(m, BEST_GLOBAL, 20, best_global=bg).tolist() == bg.tolist()
    assert select_k(m, BEST_CURRENT, 20, best_current=bg[:1]).tolist() == [[1, 0]]
    with pytest.raises(ValueError):
        select_k(m, "nope", 2)


def test_dump_jsonl(tmp_path):
    m = SharedMemory(3)
    m.insert([1, 0, 1], 2.0)
    path = tmp_path / "mem.jsonl"
    m.dump_jsonl(path)
    row = json.loads(path.read_text())
    assert row == {"bits": "101", "objective": 2.0, "insertion_index": 0}
