"""Monte Carlo comparison of ZF, MMSE and MRT/MRC processing.

Each block draws user positions and Rayleigh fading, allocates power so
every user hits the same rate, and charges the resulting amplifier and
circuit power. The ZF estimate is checked against the analytic value.

Run with ``python demos/03_monte_carlo_schemes.py`` (about a minute).
"""

import warnings

from eemimo import DesignPoint, HardwareProfile, PropagationScenario, evaluate_ee
from eemimo.montecarlo import estimate_ee
from eemimo.optimizers import optimal_rho

hw = HardwareProfile()
cell = PropagationScenario.disc()

M, K = 165, 104
rho = optimal_rho(hw, cell, M, K)
analytic = evaluate_ee(hw, cell, "zf", DesignPoint(M, K, rho)).ee
est = estimate_ee(hw, cell, "zf", M, K, rho, trials=500, seed=0)
print(f"ZF at ({M},{K}): Monte Carlo {est.mean / 1e6:.3f} +- {est.half_width_95 / 1e6:.3f}, "
      f"analytic {analytic / 1e6:.3f} Mbit/J")

# Same gross rate for ZF and MMSE, so only the power bill differs.
for scheme in ("zf", "mmse"):
    e = estimate_ee(hw, cell, scheme, M, K, rho, trials=50, seed=0)
    print(f"{scheme:>4s}: EE {e.mean / 1e6:7.3f} Mbit/J  PA power {e.pa_power:7.3f} W  "
          f"feasible {e.feasibility_rate:.0%}")

# MRT/MRC is interference-limited: the ZF rate is out of reach at any power.
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    e = estimate_ee(hw, cell, "mrt", M, K, rho, trials=50, seed=0)
print(f" mrt: feasible in {e.feasibility_rate:.0%} of blocks at the ZF rate")

# Its own optimum (from sweep_ee) is a smaller array with a much lower rate.
e = estimate_ee(hw, cell, "mrt", 81, 77, 0.238, trials=200, seed=0)
print(f" mrt at (81,77), rho=0.238: EE {e.mean / 1e6:.3f} +- {e.half_width_95 / 1e6:.3f} Mbit/J")
