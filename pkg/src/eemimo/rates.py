"""ZF gross rates, PA power and the energy-efficiency objective.

Rates are in bit/s, powers in W, EE in bit/J. Three channel-knowledge
regimes are supported: perfect CSI, single-cell imperfect CSI, and the
symmetric multi-cell setup with pilot contamination.

The ``*_se`` helpers are array-friendly (spectral efficiency in
bit/symbol) and are what the sweeps use; the named functions are the
scalar surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .power import (
    HardwareProfile,
    PowerBreakdown,
    Scheme,
    circuit_power,
    coefficients_from_profile,
)
from .scenario import MulticellScenario, PropagationScenario

__all__ = [
    "Regime",
    "DesignPoint",
    "EEResult",
    "gross_rate_zf_perfect",
    "gross_rate_zf_imperfect",
    "gross_rate_zf_multicell",
    "pa_power_zf",
    "pa_power_coefficient",
    "evaluate_ee",
    "ee_zf",
    "se_zf",
    "hardware_for_regime",
]


@dataclass(frozen=True)
class Regime:
    """Channel-knowledge regime: ``perfect``, ``imperfect`` or ``multicell``."""

    kind: str = "perfect"
    tau_ul: float | None = None
    multicell: MulticellScenario | None = None

    def __post_init__(self):
        if self.kind not in ("perfect", "imperfect", "multicell"):
            raise ValueError(f"unknown regime {self.kind!r}")
        if self.kind == "multicell" and self.multicell is None:
            raise ValueError("multicell regime needs a MulticellScenario")

    @classmethod
    def perfect(cls):
        return cls("perfect")

    @classmethod
    def imperfect(cls, tau_ul=None):
        return cls("imperfect", tau_ul=tau_ul)

    @classmethod
    def of_multicell(cls, mc: MulticellScenario):
        return cls("multicell", tau_ul=mc.tau_ul, multicell=mc)


PERFECT = Regime()


def hardware_for_regime(hw: HardwareProfile, regime: Regime) -> HardwareProfile:
    """Profile whose uplink pilot length matches the regime.

    The multi-cell pilot reuse factor lengthens the uplink pilots, which
    changes both the overhead and the estimation power.
    """
    if regime.kind == "multicell" and hw.tau_ul != regime.multicell.tau_ul:
        return hw.replace(tau_ul=float(regime.multicell.tau_ul))
    return hw


def pa_power_coefficient(hw: HardwareProfile, scenario: PropagationScenario) -> float:
    """PA power per unit of rho per user, ``B sigma^2 S_x / eta`` (watt)."""
    return hw.noise_power * scenario.s_x / hw.eta


# -- spectral efficiencies (arrays) ---------------------------------------------


def _se_perfect(M, K, rho):
    return np.log2(1.0 + rho * (M - K))


def _imperfect_factor(K, rho, tau_ul):
    with np.errstate(divide="ignore"):
        return 1.0 + 1.0 / tau_ul + 1.0 / (rho * K * tau_ul)


def _se_imperfect(M, K, rho, tau_ul):
    rho = np.asarray(rho, dtype=float)
    pos = rho > 0
    r = np.where(pos, rho, 1.0)
    sinr = r * (M - K) / _imperfect_factor(K, r, tau_ul)
    return np.where(pos, np.log2(1.0 + sinr), 0.0)


def _multicell_denominator(M, K, rho, mc: MulticellScenario):
    tau = mc.tau_ul
    return (
        mc.i_pc
        + (1.0 + mc.i_pc + 1.0 / (rho * K * tau)) * (1.0 + K * rho * mc.i_total) / (rho * (M - K))
        - K * (1.0 + mc.i_pc2) / (M - K)
    )


def _se_multicell(M, K, rho, mc: MulticellScenario):
    """Spectral efficiency and feasibility mask for the multi-cell rate."""
    rho = np.asarray(rho, dtype=float)
    pos = rho > 0
    r = np.where(pos, rho, 1.0)
    den = _multicell_denominator(M, K, r, mc)
    ok = den > 0
    se = np.where(pos & ok, np.log2(1.0 + 1.0 / np.where(ok, den, 1.0)), 0.0)
    return se, ok | ~pos


def se_zf(M, K, rho, regime: Regime = PERFECT, hw: HardwareProfile | None = None):
    """Per-user gross spectral efficiency (bit/symbol) and feasibility mask."""
    M = np.asarray(M, dtype=float)
    K = np.asarray(K, dtype=float)
    dims_ok = (M >= K + 1) & (K >= 1)
    Ms = np.where(dims_ok, M, K + 1)
    if regime.kind == "perfect":
        se = _se_perfect(Ms, K, rho)
        ok = np.ones(np.shape(se), dtype=bool)
    elif regime.kind == "imperfect":
        tau = regime.tau_ul if regime.tau_ul is not None else hw.tau_ul
        se = _se_imperfect(Ms, K, rho, tau)
        ok = np.ones(np.shape(se), dtype=bool)
    else:
        se, ok = _se_multicell(Ms, K, rho, regime.multicell)
    ok = ok & dims_ok
    return np.where(ok, se, 0.0), ok


def ee_zf(hw, scenario, M, K, rho, regime: Regime = PERFECT):
    """Vectorized ZF energy efficiency (bit/J) in the compact coefficient form.

    Returns ``(ee, feasible)``; infeasible entries have ``ee = 0``.
    """
    hw = hardware_for_regime(hw, regime)
    coef = coefficients_from_profile(hw)
    M = np.asarray(M, dtype=float)
    K = np.asarray(K, dtype=float)
    se, ok = se_zf(M, K, rho, regime, hw)
    ok = ok & (K * hw.tau_sum <= hw.U)
    net = K * np.clip(1.0 - hw.tau_sum * K / hw.U, 0.0, None) * hw.B * se
    ptx = pa_power_coefficient(hw, scenario) * np.asarray(rho, dtype=float) * K
    total = ptx + coef.total(M, K, net)
    ee = np.where(ok, net / total, 0.0)
    return ee, ok


# -- scalar surface -----------------------------------------------------------------


def _need_zf_dims(M, K):
    if K < 1 or M < K + 1:
        raise ValueError(f"ZF needs K >= 1 and M >= K + 1, got M={M}, K={K}")


def gross_rate_zf_perfect(hw: HardwareProfile, M: int, K: int, rho: float) -> float:
    """Per-user gross rate ``B log2(1 + rho (M - K))`` with perfect CSI."""
    _need_zf_dims(M, K)
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return float(hw.B * _se_perfect(M, K, rho))


def gross_rate_zf_imperfect(hw: HardwareProfile, M: int, K: int, rho: float, tau_ul: float) -> float:
    """Per-user gross rate with MMSE-estimated channels and approximate ZF.

    ``rho = 0`` returns the limit 0 without touching the ``1/(rho K tau)`` term.
    """
    _need_zf_dims(M, K)
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return float(hw.B * _se_imperfect(M, K, rho, tau_ul))


def gross_rate_zf_multicell(hw: HardwareProfile, M: int, K: int, rho: float, mc: MulticellScenario) -> float:
    """Per-cell gross rate in the symmetric multi-cell setup.

    Returns 0.0 where the SINR expression has a non-positive denominator;
    :func:`evaluate_ee` reports such points as infeasible.
    """
    _need_zf_dims(M, K)
    if rho < 0:
        raise ValueError("rho must be non-negative")
    se, _ = _se_multicell(M, K, rho, mc)
    return float(hw.B * se)


def pa_power_zf(hw: HardwareProfile, scenario: PropagationScenario, K: int, rho: float) -> float:
    """Total uplink plus downlink PA power under ZF, ``B sigma^2 rho S_x K / eta``."""
    return float(pa_power_coefficient(hw, scenario) * rho * K)


@dataclass(frozen=True)
class DesignPoint:
    M: int
    K: int
    rho: float
    regime: Regime = PERFECT

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise ValueError("M and K must be positive")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")


@dataclass(frozen=True)
class EEResult:
    gross_rate_per_ue: float
    net_sum_rate: float
    pa_power: float
    power: PowerBreakdown
    ee: float
    feasible: bool = True


def evaluate_ee(hw: HardwareProfile, scenario: PropagationScenario, scheme, point: DesignPoint) -> EEResult:
    """Rate, power breakdown and EE of one ZF operating point.

    Points violating ``M >= K + 1`` or ``K tau_sum <= U`` (or a multi-cell
    point with no valid SINR) come back with ``ee = 0`` and ``feasible=False``.
    """
    if Scheme.parse(scheme) is not Scheme.ZF:
        raise ValueError("closed-form evaluation exists only for ZF; use montecarlo.estimate_ee")
    hw = hardware_for_regime(hw, point.regime)
    M, K, rho = point.M, point.K, point.rho
    se, ok = se_zf(M, K, rho, point.regime, hw)
    ok = bool(ok) and K * hw.tau_sum <= hw.U
    gross = float(hw.B * se) if ok else 0.0
    net = K * max(0.0, 1.0 - hw.tau_sum * K / hw.U) * gross
    ptx = pa_power_zf(hw, scenario, K, rho)
    if K * hw.tau_sum <= hw.U:
        power = circuit_power(hw, Scheme.ZF, M, K, net, p_tx=ptx)
    else:
        power = PowerBreakdown(ptx, hw.P_FIX, 0.0, 0.0, 0.0, 0.0, 0.0)
    ee = net / power.total if ok else 0.0
    return EEResult(gross, net, ptx, power, ee, ok)
