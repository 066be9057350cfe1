import math

import numpy as np
import pytest

from pbnco import cnc, graphs, problems as pr
from pbnco.baselines import brute_force
from pbnco.cni import cni_net_config
from pbnco.gnn import PolicyNet
from pbnco.search import (CNC_POP, CNI_ONLY, INIT_CONSTRUCTIVE, LEVEL1_MEM, PBNCO, RANDOM_RESTARTS,
                          IncompatibleCheckpoint, SearchConfig, _Search, pbnco_run, resolve_patience)

SMALL = dict(layers=1, dim=8, heads=2, ff_dim=16)


def _nets(problem, k_max=4):
    cni = PolicyNet(cni_net_config(**SMALL), seed=0)
    cni.meta = {"kind": "cni", "problem": problem}
    c = PolicyNet(cnc.cnc_net_config(problem, k_max=k_max, **SMALL), seed=1)
    c.meta = {"kind": "cnc", "problem": problem}
    return cni, c


@pytest.fixture(scope="module")
def mc_nets():
    return _nets(pr.MC)


@pytest.fixture(scope="module")
def g():
    return graphs.generate_er(12, 0.3, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(population=0)
    with pytest.raises(ValueError):
        SearchConfig(mode="tabu")
    with pytest.raises(ValueError):
        SearchConfig(patience="soon")
    with pytest.raises(ValueError):
        SearchConfig(steps=-1)
    assert resolve_patience("auto", 30) == 30
    assert resolve_patience("inf", 30) == math.inf
    assert SearchConfig(patience="7").patience_for(99) == 7


def test_zero_steps_returns_best_initial(mc_nets, g):
    res = pbnco_run(g, *mc_nets, SearchConfig(steps=0, population=6))
    assert len(res.trace.rows) == 1
    assert res.objective == res.state.f.max() == pr.objective(g, res.bits, pr.MC)


@pytest.mark.parametrize("n_pat", [1, 3, 5])
def test_restart_fires_exactly_at_patience(mc_nets, g, n_pat):
    cfg = SearchConfig(population=5, steps=60, patience=str(n_pat))
    s = _Search(g, *mc_nets, cfg, np.random.default_rng(0), False)
    s.trace = None
    st = s.initialize()
    fired = 0
    for t in range(cfg.steps):
        due = {int(i) for i in np.flatnonzero(st.patience >= n_pat)}
        assert st.patience.max() <= n_pat
        before = len(s.events)
        s.step(st, t)
        got = {i for (tt, i) in s.events[before:]}
        assert got == due
        assert all(st.patience[i] == 0 for i in due)
        fired += len(due)
    assert fired == st.restarts.sum() > 0


def test_infinite_patience_matches_cni_only(mc_nets, g):
    a = pbnco_run(g, *mc_nets, SearchConfig(mode=PBNCO, patience="inf", steps=80, seed=3))
    b = pbnco_run(g, mc_nets[0], None, SearchConfig(mode=CNI_ONLY, steps=80, seed=3))
    assert a.trace.comparable() == b.trace.comparable()
    assert np.array_equal(a.bits, b.bits)
    assert a.cnc_calls == 0 and not a.restart_events


def test_cni_only_never_restarts(mc_nets, g):
    res = pbnco_run(g, mc_nets[0], None, SearchConfig(mode=CNI_ONLY, patience="1", steps=30))
    assert not res.restart_events and res.state.restarts.sum() == 0


def test_random_restarts_do_not_use_constructive(mc_nets, g):
    res = pbnco_run(g, mc_nets[0], None, SearchConfig(mode=RANDOM_RESTARTS, patience="2", steps=30))
    assert res.restart_events and res.cnc_calls == 0


@pytest.mark.parametrize("mode", [PBNCO, LEVEL1_MEM])
def test_restarts_call_constructive(mc_nets, g, mode):
    res = pbnco_run(g, *mc_nets, SearchConfig(mode=mode, patience="2", steps=30))
    assert res.cnc_calls == len(res.restart_events) > 0
    assert np.all(res.state.S[:, 0] <= 1)


def test_level1_memories_are_private(mc_nets, g):
    cfg = SearchConfig(mode=LEVEL1_MEM, population=4, steps=10, patience="3")
    s = _Search(g, *mc_nets, cfg, np.random.default_rng(0), False)
    res = s.run()
    assert len(s.mems) == 4
    # each memory holds only its own individual's trajectory: 1 initial + 10 steps
    assert all(len(m) <= 11 for m in s.mems)
    assert res.objective == max(res.state.best)


def test_cnc_pop_resamples_everything(mc_nets, g):
    res = pbnco_run(g, None, mc_nets[1], SearchConfig(mode=CNC_POP, population=5, steps=8))
    assert res.cnc_calls == 5 * 8
    assert np.all(res.state.S[:, 0] == 1)


def test_constructive_init(mc_nets, g):
    res = pbnco_run(g, *mc_nets, SearchConfig(init=INIT_CONSTRUCTIVE, population=4, steps=0))
    assert res.cnc_calls == 4 and np.all(res.state.S[:, 0] == 1)


def test_best_so_far_monotone_and_consistent(mc_nets, g):
    res = pbnco_run(g, *mc_nets, SearchConfig(steps=100, patience="5"), keep_history=True)
    best = res.trace.best
    assert np.all(np.diff(best) >= 0)
    assert res.objective == best[-1] == pr.objective(g, res.bits, pr.MC)
    assert res.objective == max(pr.objective(g, np.stack(res.history), pr.MC))
    assert res.objective <= brute_force(g, pr.MC)[0]


def test_mis_search_stays_feasible():
    g = graphs.generate_er(16, 0.2, 1)
    nets = _nets(pr.MIS)
    res = pbnco_run(g, *nets, SearchConfig(problem=pr.MIS, steps=60, patience="4"), keep_history=True)
    assert all(pr.mis_is_feasible(g, s) for s in res.history)
    assert res.objective <= brute_force(g, pr.MIS)[0]


def test_same_seed_same_trace(mc_nets, g):
    cfg = SearchConfig(steps=40, patience="3", seed=11)
    a, b = pbnco_run(g, *mc_nets, cfg), pbnco_run(g, *mc_nets, cfg)
    assert a.trace.comparable() == b.trace.comparable()


def test_target_stops_early(mc_nets, g):
    full = pbnco_run(g, *mc_nets, SearchConfig(steps=200, patience="5"))
    target = full.trace.best[-1]
    first = int(np.argmax(full.trace.best >= target))
    res = pbnco_run(g, *mc_nets, SearchConfig(steps=200, patience="5", target=target))
    assert len(res.trace.rows) == first + 1
    assert res.trace.comparable() == full.trace.comparable()[:first + 1]


def test_time_budget(mc_nets, g):
    res = pbnco_run(g, *mc_nets, SearchConfig(steps=0, time_budget=0.2))
    assert 0.2 <= res.trace.rows[-1][1] < 2.0


def test_checkpoint_checks(mc_nets, g):
    cni, c = mc_nets
    with pytest.raises(IncompatibleCheckpoint):
        pbnco_run(g, c, c, SearchConfig())
    with pytest.raises(IncompatibleCheckpoint):
        pbnco_run(g, cni, c, SearchConfig(problem=pr.MIS))
    with pytest.raises(ValueError):
        pbnco_run(g, cni, None, SearchConfig(mode=PBNCO))
    with pytest.raises(ValueError):
        pbnco_run(g, None, c, SearchConfig(mode=CNI_ONLY))
