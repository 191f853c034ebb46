"""Energy-efficient design of multi-user MIMO cells.

Closed-form optimizers for the number of antennas, users and transmit
power under zero-forcing, grid sweeps for the other regimes, and a
Monte Carlo link simulator for MRT/MRC and MMSE.
"""

from .power import HardwareProfile, Scheme, circuit_power, complexity_flops
from .rates import DesignPoint, Regime, evaluate_ee
from .scenario import MulticellScenario, PropagationScenario

__version__ = "0.1.0"

__all__ = [
    "HardwareProfile",
    "Scheme",
    "circuit_power",
    "complexity_flops",
    "DesignPoint",
    "Regime",
    "evaluate_ee",
    "MulticellScenario",
    "PropagationScenario",
]
