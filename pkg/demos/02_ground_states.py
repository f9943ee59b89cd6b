"""Exact ground states via min-cut, checked against enumeration."""

import numpy as np

from spinhom.groundstate import SpinProblem, brute_force, solve

# chain + - - -: one broken bond is unavoidable
chain = SpinProblem(4, [[0, 1], [1, 2], [2, 3]], [2.0, 2.0, 2.0], [1, 0, 0, -1])
gs = solve(chain)
print("chain energy", gs.energy, "config", gs.config.tolist())

rng = np.random.default_rng(0)
n = 16
pairs = np.array([(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.3])
frozen = np.zeros(n, dtype=np.int8)
frozen[:3], frozen[3:6] = 1, -1
prob = SpinProblem(n, pairs, rng.uniform(0.1, 2.0, len(pairs)), frozen)
gs = solve(prob)
print(f"random instance: min-cut {gs.energy:.6f}, enumeration {brute_force(prob)[0]:.6f}, optimal={gs.optimal}")
print("same energy with all spins flipped:", solve(prob.negated()).energy == gs.energy)
