"""Oracle and property checks behind ``eemimo check``.

Each check compares a closed form or fast path against an independent
brute-force computation. They are quick (seconds in total) and are also
reused by the test-suite with larger instance counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .montecarlo import combiner, equal_rate_power_allocation, generate_block, wishart_inverse_trace_check
from .optimizers import (
    alternating_optimize,
    exhaustive_search,
    optimal_antennas,
    optimal_rho,
    optimal_users,
)
from .power import HardwareProfile, Scheme
from .rates import ee_zf
from .scenario import MulticellScenario, PropagationScenario
from .specfun import QuarticCoeffs, golden_section_max, lambert_w0, real_positive_roots

__all__ = [
    "CheckResult",
    "random_profile",
    "random_scenario",
    "oracle_rho",
    "oracle_antennas",
    "oracle_users",
    "run_checks",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


# -- random instances ----------------------------------------------------------------


def random_profile(rng: np.random.Generator) -> HardwareProfile:
    """A hardware profile with every power/efficiency term perturbed."""
    zeta_ul = rng.uniform(0.2, 0.8)
    return HardwareProfile(
        B=rng.uniform(5e6, 100e6),
        U=int(rng.integers(500, 5000)),
        zeta_ul=zeta_ul,
        zeta_dl=1.0 - zeta_ul,
        eta_ul=rng.uniform(0.1, 0.6),
        eta_dl=rng.uniform(0.1, 0.6),
        noise_power=10 ** (rng.uniform(-100, -85) / 10) / 1000,
        tau_ul=float(rng.integers(1, 4)),
        tau_dl=1.0,
        P_FIX=rng.uniform(1.0, 50.0),
        P_SYN=rng.uniform(0.5, 5.0),
        P_BS=rng.uniform(0.1, 3.0),
        P_UE=rng.uniform(0.01, 1.0),
        P_COD=rng.uniform(0.0, 1.0) * 1e-9,
        P_DEC=rng.uniform(0.0, 2.0) * 1e-9,
        P_BT=rng.uniform(0.0, 1.0) * 1e-9,
        L_BS=rng.uniform(2.0, 50.0) * 1e9,
        L_UE=rng.uniform(1.0, 20.0) * 1e9,
    )


def random_scenario(rng: np.random.Generator) -> PropagationScenario:
    d_min = rng.uniform(10.0, 60.0)
    return PropagationScenario.disc(
        d_min=d_min, d_max=d_min + rng.uniform(150.0, 500.0), kappa=rng.uniform(3.0, 4.0)
    )


# -- brute-force oracles -------------------------------------------------------------------


def oracle_rho(hw, scenario, M, K, hi=1e4):
    """Golden-section search of EE over rho in (0, hi]."""
    return golden_section_max(lambda r: ee_zf(hw, scenario, M, K, r)[0], 1e-9, hi, rtol=1e-12)[0]


def oracle_antennas(hw, scenario, K, rho, m_max=None):
    """Argmax of EE over M in {K+1, ..., 10K + 10000}; first maximum wins."""
    m_max = 10 * K + 10_000 if m_max is None else m_max
    ms = np.arange(K + 1, m_max + 1)
    ee = ee_zf(hw, scenario, ms, K, rho)[0]
    return int(ms[int(np.argmax(ee))])


def oracle_users(hw, scenario, beta_bar, rho_bar):
    """Argmax over K of EE with M = beta_bar K and rho = rho_bar / K."""
    k_hi = hw.max_users if hw.max_users * hw.tau_sum < hw.U else hw.max_users - 1
    ks = np.arange(1, k_hi + 1)
    ee = ee_zf(hw, scenario, beta_bar * ks, ks, rho_bar / ks)[0]
    return int(ks[int(np.argmax(ee))])


# -- individual checks ------------------------------------------------------------------------


def _check_lambert():
    x = np.logspace(1.0 / math.log(10), 6, 10_000)  # [e, 1e6]
    w = lambert_w0(x)
    ew1 = np.exp(w + 1.0)
    lx = np.log(x)
    sandwich = np.all(math.e * x / lx <= ew1 * (1 + 1e-14)) and np.all(ew1 <= (1 + math.e) * x / lx)
    xs = np.concatenate([np.linspace(-1 / math.e, 0, 200), np.logspace(-8, 8, 400)])
    ws = lambert_w0(xs)
    resid = float(np.max(np.abs(ws * np.exp(ws) - xs) / np.maximum(1.0, np.abs(xs))))
    ok = bool(sandwich) and resid <= 1e-10
    return CheckResult("lambert-w", ok, f"sandwich={bool(sandwich)} max residual={resid:.2e}")


def _check_quartic():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(50):
        r = np.sort(rng.uniform(0.1, 50, 4))
        c = np.poly(r)
        got = np.array(real_positive_roots(QuarticCoeffs(*c)))
        worst = max(worst, float(np.max(np.abs(got - r) / r)) if len(got) == 4 else math.inf)
    return CheckResult("quartic-roots", worst < 1e-8, f"max relative root error={worst:.2e}")


def _check_closed_forms(n=10, seed=5):
    rng = np.random.default_rng(seed)
    bad = []
    for i in range(n):
        hw, sc = random_profile(rng), random_scenario(rng)
        K = int(rng.integers(1, min(150, hw.max_users - 1)))
        M = int(K + rng.integers(1, 300))
        r_cf, r_or = optimal_rho(hw, sc, M, K), oracle_rho(hw, sc, M, K)
        if abs(r_cf - r_or) > 1e-6 * r_or:
            bad.append(f"rho#{i}")
        rho = float(rng.uniform(0.05, 2.0))
        if optimal_antennas(hw, sc, K, rho) != oracle_antennas(hw, sc, K, rho):
            bad.append(f"M#{i}")
        beta, rho_bar = float(rng.uniform(1.2, 6.0)), float(rng.uniform(1.0, 200.0))
        if optimal_users(hw, sc, beta, rho_bar) != oracle_users(hw, sc, beta, rho_bar):
            bad.append(f"K#{i}")
    return CheckResult("closed-forms-vs-grid", not bad, "all match" if not bad else "mismatch: " + ", ".join(bad))


def _check_reference_optimum():
    hw, sc = HardwareProfile(), PropagationScenario.disc()
    res = exhaustive_search(hw, sc)
    alt = alternating_optimize(hw, sc)
    monotone = all(b[5] >= a[5] * (1 - 1e-12) for a, b in zip(alt.trajectory, alt.trajectory[1:]))
    same = (alt.point.M, alt.point.K) == (res.best.M, res.best.K)
    ok = (res.best.M, res.best.K) == (165, 104) and same and monotone and alt.converged
    return CheckResult(
        "reference-optimum",
        ok,
        f"sweep=({res.best.M},{res.best.K}) rho={res.best.rho:.4f} alternating=({alt.point.M},{alt.point.K}) "
        f"in {alt.iterations} iterations, monotone={monotone}",
    )


def _check_wishart():
    emp, ana = wishart_inverse_trace_check(PropagationScenario.disc(), 20, 10, 20_000, seed=2)
    err = abs(emp / ana - 1)
    return CheckResult("wishart-inverse-trace", err < 0.02, f"relative error={err:.2%}")


def _check_duality():
    sc, hw = PropagationScenario.disc(), HardwareProfile()
    worst = 0.0
    for b in range(20):
        blk = generate_block(sc, 12, 4, seed=9, index=b)
        for scheme in (Scheme.MRT_MRC, Scheme.ZF):
            G = combiner(blk.H, scheme)
            ul = equal_rate_power_allocation(G, blk.H, hw.B * 0.5, hw.noise_power, "uplink")
            dl = equal_rate_power_allocation(G, blk.H, hw.B * 0.5, hw.noise_power, "downlink")
            if ul.feasible != dl.feasible:
                worst = math.inf
            elif ul.feasible:
                worst = max(worst, abs(ul.total / dl.total - 1))
    return CheckResult("uplink-downlink-duality", worst < 1e-9, f"max relative gap={worst:.1e}")


def _check_multicell():
    ref = {1: (0.5288, 0.0405), 2: (0.1163, 0.0023), 4: (0.0214, 7.82e-5)}
    sq = PropagationScenario.square()
    worst = 0.0
    for reuse, (pc, pc2) in ref.items():
        mc = MulticellScenario.build(sq, reuse)
        worst = max(worst, abs(mc.i_pc / pc - 1), abs(mc.i_pc2 / pc2 - 1), abs(mc.i_total / 1.5288 - 1))
    return CheckResult("multicell-aggregates", worst < 0.05, f"max relative deviation={worst:.2%}")


CHECKS = (
    _check_lambert,
    _check_quartic,
    _check_closed_forms,
    _check_reference_optimum,
    _check_wishart,
    _check_duality,
    _check_multicell,
)


def run_checks() -> list[CheckResult]:
    out = []
    for fn in CHECKS:
        try:
            out.append(fn())
        except Exception as exc:  # a crashing check is a failing check
            out.append(CheckResult(fn.__name__.removeprefix("_check_"), False, f"error: {exc!r}"))
    return out
