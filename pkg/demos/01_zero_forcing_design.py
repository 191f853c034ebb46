"""Energy-efficient zero-forcing design for the reference cell.

Walks through the closed-form optimizers: the best transmit power for a
fixed array, the best array for fixed power, the alternating search that
chains them, and a full (M, K) grid as a cross-check.

Run with ``python demos/01_zero_forcing_design.py``.
"""

import numpy as np

from eemimo import DesignPoint, HardwareProfile, PropagationScenario, evaluate_ee
from eemimo.optimizers import (
    alternating_optimize,
    exhaustive_search,
    optimal_antennas,
    optimal_rho,
    scaling_bounds,
)

hw = HardwareProfile()
cell = PropagationScenario.disc()
print(f"disc cell {cell.d_min:.0f}-{cell.d_max:.0f} m, kappa {cell.kappa}, S_x = {cell.s_x:.4e}")

# Best SINR parameter for a few array sizes at K = 50 users.
K = 50
for M in (60, 100, 200, 400):
    rho = optimal_rho(hw, cell, M, K)
    res = evaluate_ee(hw, cell, "zf", DesignPoint(M, K, rho))
    print(f"M={M:4d} K={K}: rho*={rho:.4f}  EE={res.ee / 1e6:.3f} Mbit/J")

# Best array size for fixed (K, rho).
print("M* at rho=1:", {k: optimal_antennas(hw, cell, k, 1.0) for k in (10, 50, 100)})

# Alternating optimization from a tiny start.
alt = alternating_optimize(hw, cell, (3, 1, 1.0))
print(f"\nalternating search converged={alt.converged} after {alt.iterations} iterations")
for it, step, M, K, rho, ee in alt.trajectory:
    print(f"  {it:2d} {step:>8s}  M={M:4d} K={K:4d} rho={rho:8.4f}  EE={ee / 1e6:7.3f}")

# Exhaustive grid confirms the alternating result.
grid = exhaustive_search(hw, cell)
b = grid.best
print(f"\ngrid optimum M={b.M} K={b.K} rho={b.rho:.4f} EE={grid.best_ee / 1e6:.3f} Mbit/J")
k_ix = np.nanargmax(grid.ee, axis=0)
print("EE-optimal K for M = 50, 100, 200, 400:", [int(grid.k_values[k_ix[m - 1]]) for m in (50, 100, 200, 400)])

sb = scaling_bounds(hw, cell, b.M, b.K, b.rho)
print("scaling bounds at the optimum:", sb)
