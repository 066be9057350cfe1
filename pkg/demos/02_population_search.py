"""
Population search on one instance
=================================

Loads the shipped toy policies and runs the full search next to its ablations
and the classical baselines, all on the same Max-Cut instance and with the
same number of population steps. The best-so-far curves are printed at a few
checkpoints so the anytime behaviour is visible.
"""
import numpy as np

from pbnco import graphs, pretrained, problems as pr
from pbnco.baselines import GAConfig, PSOConfig, brute_force, ga_run, greedy, pso_run
from pbnco.search import SearchConfig, pbnco_run

g = graphs.generate_er(22, 0.3, seed=2)
opt, _ = brute_force(g, pr.MC)
print(f"ER(22, 0.3): {g.m} edges, optimum cut {opt:g}, greedy {pr.objective(g, greedy(g, pr.MC), pr.MC):g}")

cni = pretrained.load("cni", pr.MC)
cnc = pretrained.load("cnc", pr.MC)

steps = 10 * g.n
marks = [0, 10, 25, 50, 100, steps]
print("\n" + "method".ljust(16) + "".join(f"t={t:<6d}" for t in marks))


def show(name, trace):
    best = [r[2] for r in trace.rows]
    print(name.ljust(16) + "".join(f"{best[min(t, len(best) - 1)]:<8g}" for t in marks))


for mode in ("pbnco", "cni-only", "random-restarts", "level1-mem", "cnc-pop"):
    cfg = SearchConfig(problem=pr.MC, mode=mode, population=4, steps=steps, patience="auto", seed=0)
    res = pbnco_run(g, cni, cnc, cfg, reference=opt)
    show(mode, res.trace)
    if mode == "pbnco":
        print(" " * 16 + f"({len(res.restart_events)} restarts, {res.cnc_calls} constructive calls)")

_, tr = ga_run(g, pr.MC, GAConfig(population=4, generations=steps, seed=0), reference=opt)
show("ga", tr)
_, tr = pso_run(g, pr.MC, PSOConfig(swarm=4, iterations=steps, seed=0), reference=opt)
show("pso", tr)
