"""
Instances, objectives and reward scales
=======================================

A tour of the problem layer: graphs, the two objectives, the normalizations
used by every reward, and the exact oracle used to check everything else.
"""
import numpy as np

from pbnco import graphs, problems as pr
from pbnco.baselines import brute_force, greedy

# the triangle is small enough to check by hand
k3 = graphs.complete_graph(3)
print("K3 cut of (0,0,1):", pr.objective(k3, [0, 0, 1], pr.MC))
print("K3 Max-Cut scale:", pr.reward_scale(k3, pr.MC))      # baseline |E|/2, scale ~1.7662
print("K3 MIS bounds:", pr.reward_scale(k3, pr.MIS))        # Caro-Wei 1, matching bound 2

# a random instance, the kind the toy policies are trained on
g = graphs.generate_er(16, 0.2, seed=3)
rng = np.random.default_rng(0)
print(f"\nER(16, 0.2): {g.n} nodes, {g.m} edges")

for problem in (pr.MC, pr.MIS):
    rs = pr.reward_scale(g, problem)
    opt, _ = brute_force(g, problem)
    rand = pr.objective(g, pr.random_solutions(g, problem, rng, 1000), problem)
    gr = pr.objective(g, greedy(g, problem), problem)
    print(f"{problem}: optimum {opt:g}, greedy {gr:g}, random mean {rand.mean():.2f}")
    # normalized values are what the policies see as reward
    print(f"    normalized: optimum {pr.normalize(opt, rs):.3f}, "
          f"random mean {pr.normalize(rand, rs).mean():.3f}")

# random Max-Cut labelings cut half the edges on average
cuts = pr.objective(g, pr.random_solutions(g, pr.MC, rng, 5000), pr.MC)
print(f"\nmean random cut {cuts.mean():.2f} vs |E|/2 = {g.m / 2}")
