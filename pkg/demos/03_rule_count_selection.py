"""Choosing the rule count with cluster validity indices.

Six indices score the partition as the cluster count C varies; each has a
direction (PC and MPC are maximised, the rest minimised) and the consensus
is the mode of the per-index optima.  On data with three genuine components
the consensus lands on 3.
"""

import numpy as np

from fuzzyrunoff import ClusterConfig, sweep_clusters
from fuzzyrunoff.validity import INDEX_DIRECTIONS

rng = np.random.default_rng(7)
centers = np.array([[0.0, 0.0, 0.0], [8.0, 8.0, 4.0], [16.0, 0.0, 8.0]])
z = np.vstack([c + rng.normal(scale=0.6, size=(40, 3)) for c in centers])

report = sweep_clusters(z, ClusterConfig(algorithm="gk", seed=0), range(2, 7))

names = list(INDEX_DIRECTIONS)
print("C  " + "  ".join(f"{n:>8s}" for n in names))
for row, c in enumerate(report.c_values):
    values = "  ".join(f"{report.table[n][row]:8.4f}" for n in names)
    print(f"{c}  {values}")
print()
for name in names:
    direction = INDEX_DIRECTIONS[name]
    print(f"{name:>4s}: optimum C = {report.per_index_optimum[name]} ({direction})")
print()
print("consensus rule count:", report.consensus)
