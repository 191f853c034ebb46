"""How pilot overhead and neighbouring cells move the optimum.

Compares the zero-forcing optimum with perfect channel knowledge, with
pilot-based estimates, and in a square-cell network with pilot reuse
factors 1, 2 and 4.

Run with ``python demos/02_channel_regimes.py``.
"""

from eemimo import HardwareProfile, MulticellScenario, PropagationScenario, Regime
from eemimo.optimizers import exhaustive_search

hw = HardwareProfile()
disc = PropagationScenario.disc()
square = PropagationScenario.square()


def report(label, res):
    b = res.best
    print(f"{label:<28s} M={b.M:4d} K={b.K:4d} rho={b.rho:7.4f}  EE={res.best_ee / 1e6:7.3f} Mbit/J")


report("single cell, perfect CSI", exhaustive_search(hw, disc))
report("single cell, estimated CSI", exhaustive_search(hw, disc, Regime.imperfect()))

for reuse in (1, 2, 4):
    mc = MulticellScenario.build(square, reuse)
    print(f"\nreuse {reuse}: I_PC={mc.i_pc:.4f}  I={mc.i_total:.4f}  I_PC^2={mc.i_pc2:.3g}")
    report(f"square cells, reuse {reuse}", exhaustive_search(hw, square, Regime.of_multicell(mc)))
