"""
Steering the constructive policy
================================

The constructive policy takes a set of earlier solutions and a weight omega
that trades objective value for distance from that set. This demo sweeps
omega on a handful of held-out instances and then grows a solution history
one construction at a time, the way the population search uses it.
"""
import numpy as np

from pbnco import graphs, pretrained, problems as pr
from pbnco.studies import diversity_study, pareto_sweep

net = pretrained.load("cnc", pr.MC)
rng = np.random.default_rng(0)
instances = [graphs.generate_er(int(rng.integers(20, 31)), 0.15, seed=500 + i) for i in range(10)]

omegas = np.linspace(0.0, 1.0, 6)
div, qual = pareto_sweep(net, instances, pr.MC, omegas, rng)
print("omega   distance  quality")
for w, d, q in zip(omegas, div.mean(axis=1), qual.mean(axis=1)):
    print(f"{w:5.1f}   {d:8.3f}  {q:7.3f}")

# a growing history: higher omega should keep it more spread out
g = instances[0]
print(f"\nhistory diversity on a {g.n}-node instance (20 random + 100 constructed)")
for label, omega, cond in (("omega 0.1", 0.1, True), ("omega 0.9", 0.9, True), ("unconditioned", 0.0, False)):
    curve = diversity_study(net, g, pr.MC, omega, np.random.default_rng(1), conditioned=cond)
    print(f"  {label:14s} start {curve[19]:.3f}  end {curve[-1]:.3f}")
