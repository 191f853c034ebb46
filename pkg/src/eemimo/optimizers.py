"""EE maximizers for ZF: closed forms, alternating updates and grid sweeps.

Closed-form optimizers return integers (M, K) or a real rho. Integer
rounding always compares the EE at the floor and the ceiling of the real
optimum and keeps the better one, breaking ties toward the smaller value.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .power import HardwareProfile, Scheme, coefficients_from_profile
from .rates import (
    PERFECT,
    DesignPoint,
    Regime,
    ee_zf,
    evaluate_ee,
    hardware_for_regime,
    pa_power_coefficient,
    se_zf,
)
from .scenario import PropagationScenario
from .specfun import QuarticCoeffs, exp_w_plus_one, golden_section_max, real_positive_roots

log = logging.getLogger(__name__)

__all__ = [
    "RHO_BRACKET",
    "FallbackWarning",
    "UsersSolution",
    "optimal_users",
    "optimal_users_details",
    "optimal_users_approx",
    "optimal_antennas",
    "optimal_antennas_real",
    "optimal_antennas_imperfect",
    "optimal_rho",
    "optimal_rho_numeric",
    "rho_star_grid",
    "ScalingBounds",
    "scaling_bounds",
    "antenna_scaling_asymptote",
    "rho_scaling_asymptote",
    "AlternatingResult",
    "alternating_optimize",
    "SweepResult",
    "exhaustive_search",
    "default_ranges",
]

RHO_BRACKET = (1e-6, 1e4)
RHO_RTOL = 1e-8


class FallbackWarning(RuntimeWarning):
    """A closed form had no usable root and a grid search was used instead."""


def _ee(hw, scenario, M, K, rho, regime=PERFECT) -> float:
    return evaluate_ee(hw, scenario, Scheme.ZF, DesignPoint(int(M), int(K), float(rho), regime)).ee


def _round_by_ee(x: float, lo: int, ee_of) -> int:
    """Floor or ceiling of ``x`` (at least ``lo``), whichever has the larger EE."""
    cands = sorted({max(lo, math.floor(x)), max(lo, math.ceil(x))})
    best, best_ee = cands[0], ee_of(cands[0])
    for c in cands[1:]:
        v = ee_of(c)
        if v > best_ee:
            best, best_ee = c, v
    return best


# -- rho ---------------------------------------------------------------------------


def rho_star_grid(hw, scenario, M, K):
    """Elementwise EE-optimal rho for arrays of (M, K) with M > K."""
    coef = coefficients_from_profile(hw)
    a = pa_power_coefficient(hw, scenario)
    M = np.asarray(M, dtype=float)
    K = np.asarray(K, dtype=float)
    mk = M - K
    arg = mk * (coef.c_prime(K) + M * coef.d_prime(K)) / (a * math.e) - 1.0 / math.e
    return (exp_w_plus_one(arg) - 1.0) / mk


def optimal_rho(hw: HardwareProfile, scenario: PropagationScenario, M: int, K: int) -> float:
    """EE-optimal rho for fixed (M, K) under ZF with perfect CSI."""
    if K < 1 or M < K + 1:
        raise ValueError(f"need K >= 1 and M >= K + 1, got M={M}, K={K}")
    return float(rho_star_grid(hw, scenario, M, K))


def optimal_rho_numeric(hw, scenario, M, K, regime: Regime = PERFECT, bracket=RHO_BRACKET, rtol=RHO_RTOL):
    """Golden-section search of EE over rho (any regime). Arrays allowed.

    Returns ``(rho, ee)``.
    """
    M = np.asarray(M, dtype=float)
    K = np.asarray(K, dtype=float)
    shape = np.broadcast(M, K).shape
    Mb, Kb = np.broadcast_to(M, shape), np.broadcast_to(K, shape)

    def f(r):
        return ee_zf(hw, scenario, Mb, Kb, r, regime)[0]

    lo = np.full(shape, bracket[0])
    hi = np.full(shape, bracket[1])
    if shape == ():
        return golden_section_max(lambda r: ee_zf(hw, scenario, M, K, r, regime)[0], bracket[0], bracket[1], rtol)
    return golden_section_max(f, lo, hi, rtol)


# -- M -----------------------------------------------------------------------------


def optimal_antennas_real(hw, scenario, K, rho):
    """Real-valued EE-optimal M for fixed (K, rho); array friendly."""
    coef = coefficients_from_profile(hw)
    a = pa_power_coefficient(hw, scenario)
    K = np.asarray(K, dtype=float)
    rho = np.asarray(rho, dtype=float)
    cp, dp = coef.c_prime(K), coef.d_prime(K)
    arg = rho * (a * rho + cp) / (dp * math.e) + (rho * K - 1.0) / math.e
    return (exp_w_plus_one(arg) + rho * K - 1.0) / rho


def optimal_antennas(hw: HardwareProfile, scenario: PropagationScenario, K: int, rho: float) -> int:
    """EE-optimal integer M (>= K + 1) for fixed (K, rho), perfect CSI."""
    if K < 1 or rho <= 0:
        raise ValueError("need K >= 1 and rho > 0")
    m_real = float(optimal_antennas_real(hw, scenario, K, rho))
    return _round_by_ee(m_real, K + 1, lambda m: _ee(hw, scenario, m, K, rho))


def optimal_antennas_imperfect(
    hw: HardwareProfile, scenario: PropagationScenario, K: int, rho: float, tau_ul: float | None = None
) -> int:
    """EE-optimal integer M for fixed (K, rho) with MMSE-estimated channels."""
    if K < 1 or rho <= 0:
        raise ValueError("need K >= 1 and rho > 0")
    tau = hw.tau_ul if tau_ul is None else tau_ul
    coef = coefficients_from_profile(hw)
    a = pa_power_coefficient(hw, scenario)
    cp, dp = float(coef.c_prime(K)), float(coef.d_prime(K))
    f = 1.0 + 1.0 / tau + 1.0 / (rho * K * tau)
    # The rate is log2((1 - rho K / f) + (rho / f) M); same fractional form as perfect CSI.
    arg = rho * (a * rho + cp) / (dp * math.e * f) + (rho * K - f) / (math.e * f)
    m_real = (f * exp_w_plus_one(arg) - f + rho * K) / rho
    regime = Regime.imperfect(tau)
    return _round_by_ee(m_real, K + 1, lambda m: _ee(hw, scenario, m, K, rho, regime))


# -- K -----------------------------------------------------------------------------


@dataclass(frozen=True)
class UsersSolution:
    K: int
    roots: tuple
    literal_rule_K: int | None
    fallback: bool


def _users_polynomial(hw, scenario, beta_bar, rho_bar):
    """Stationarity polynomial of the fixed-ratio EE in K, highest degree first."""
    coef = coefficients_from_profile(hw)
    a = pa_power_coefficient(hw, scenario)
    s = hw.tau_sum / hw.U
    C, D = coef.C, coef.D
    n0 = C[0] + a * rho_bar
    n1 = C[1] + beta_bar * D[0]
    n2 = C[2] + beta_bar * D[1]
    n3 = C[3] + beta_bar * D[2]
    return n0, n1, n2, n3, s


def _users_ee(hw, scenario, beta_bar, rho_bar, K):
    """EE along the ray M = beta_bar K, rho = rho_bar / K (M kept real).

    This is the objective the quartic maximizes. Rounding M here would make
    it jagged, and then no floor/ceiling choice could match a grid argmax.
    """
    return float(ee_zf(hw, scenario, beta_bar * K, K, rho_bar / K)[0])


def optimal_users_details(hw, scenario, beta_bar: float, rho_bar: float) -> UsersSolution:
    """Optimal K for fixed antennas-per-user ``beta_bar`` and sum SINR ``rho_bar``.

    Candidates are the floor/ceiling of every real positive root of the
    stationarity quartic; each is scored by the EE at ``M = beta_bar K``,
    ``rho = rho_bar / K`` and the best is returned. Callers pair the result
    with ``M = max(round(beta_bar K), K + 1)``.
    """
    if beta_bar <= 1 or rho_bar <= 0:
        raise ValueError("need beta_bar > 1 and rho_bar > 0")
    n0, n1, n2, n3, s = _users_polynomial(hw, scenario, beta_bar, rho_bar)
    if n3 > 0:
        mu1 = (n2 / s + n1) / n3
        mu0 = n0 / n3
        roots = real_positive_roots(QuarticCoeffs(1.0, -2.0 / s, -mu1, -2.0 * mu0, mu0 / s))
    else:
        # Without cubic terms the condition drops to
        # n0 - 2 s n0 K - (n2 + s n1) K^2 = 0.
        qa, qb, qc = n2 + s * n1, 2.0 * s * n0, -n0
        if qa > 0:
            roots = [(-qb + math.sqrt(qb * qb - 4 * qa * qc)) / (2 * qa)]
        else:
            roots = [1.0 / (2.0 * s)]

    k_hi = hw.max_users if hw.max_users * hw.tau_sum < hw.U else hw.max_users - 1
    ee_of = lambda k: _users_ee(hw, scenario, beta_bar, rho_bar, k)  # noqa: E731
    cands = []
    for r in roots:
        if r > k_hi + 1:
            continue
        cands.append(min(k_hi, _round_by_ee(r, 1, ee_of)))

    fallback = not cands
    if fallback:
        warnings.warn("no usable positive root for K; using a grid search", FallbackWarning, stacklevel=2)
        ks = np.arange(1, k_hi + 1)
        vals = [ee_of(int(k)) for k in ks]
        best = int(ks[int(np.argmax(vals))])
        return UsersSolution(best, tuple(roots), None, True)

    best = max(sorted(set(cands)), key=ee_of)
    literal = max(cands)
    if literal != best:
        log.info("largest-root rule gives K=%d, EE comparison prefers K=%d", literal, best)
    return UsersSolution(int(best), tuple(roots), int(literal), False)


def optimal_users(hw: HardwareProfile, scenario: PropagationScenario, beta_bar: float, rho_bar: float) -> int:
    return optimal_users_details(hw, scenario, beta_bar, rho_bar).K


def optimal_users_approx(hw: HardwareProfile, scenario: PropagationScenario, beta_bar: float, rho_bar: float) -> int:
    """Optimal K when estimation and linear-processing power are neglected."""
    if beta_bar <= 1 or rho_bar <= 0:
        raise ValueError("need beta_bar > 1 and rho_bar > 0")
    coef = coefficients_from_profile(hw)
    a = pa_power_coefficient(hw, scenario)
    mu = (coef.C[0] + a * rho_bar) / (coef.C[1] + beta_bar * coef.D[0])
    k_real = mu * (math.sqrt(1.0 + hw.U / (hw.tau_sum * mu)) - 1.0)
    k_hi = hw.max_users - 1 if hw.max_users * hw.tau_sum >= hw.U else hw.max_users
    k = _round_by_ee(k_real, 1, lambda k: _users_ee(hw, scenario, beta_bar, rho_bar, k))
    return int(min(k, k_hi))


# -- scaling laws ----------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingBounds:
    """Closed-form lower bounds on the optimal M and rho; ``None`` when not applicable."""

    m_lower_bound: float | None
    rho_lower_bound: float | None


def scaling_bounds(hw, scenario, M: int, K: int, rho: float) -> ScalingBounds:
    coef = coefficients_from_profile(hw)
    a = pa_power_coefficient(hw, scenario)
    cp, dp = float(coef.c_prime(K)), float(coef.d_prime(K))

    x = a * rho / dp + cp / dp + K - 1.0 / rho
    m_lb = None
    if rho * x >= math.e**2:
        m_lb = K + x / (math.log(rho) + math.log(x) - 1.0) - 1.0 / rho

    rho_lb = None
    if M > K:
        y = (M - K) * (cp + M * dp) / a
        if y - 1.0 >= math.e**2:
            L = math.log(y - 1.0)
            rho_lb = ((cp + M * dp) / a - L / (M - K)) / (L - 1.0)
    return ScalingBounds(m_lb, rho_lb)


def antenna_scaling_asymptote(hw, scenario, K: int, rho: float) -> float:
    """Large-rho approximation of the optimal M: ``(B sigma^2 S_x / (2 eta D')) rho / ln rho``."""
    dp = float(coefficients_from_profile(hw).d_prime(K))
    return pa_power_coefficient(hw, scenario) / (2.0 * dp) * rho / math.log(rho)


def rho_scaling_asymptote(hw, scenario, M: int, K: int) -> float:
    """Large-M approximation of the optimal rho: ``(eta D' / (2 B sigma^2 S_x)) M / ln M``."""
    dp = float(coefficients_from_profile(hw).d_prime(K))
    return dp / (2.0 * pa_power_coefficient(hw, scenario)) * M / math.log(M)


# -- alternating optimization -----------------------------------------------------------


@dataclass
class AlternatingResult:
    point: DesignPoint
    ee: float
    iterations: int
    converged: bool
    trajectory: list = field(default_factory=list)


def alternating_optimize(
    hw: HardwareProfile,
    scenario: PropagationScenario,
    start=(3, 1, 1.0),
    max_iter: int = 50,
) -> AlternatingResult:
    """Cycle the closed-form K, M and rho updates until (M, K) stop changing.

    The trajectory holds ``(iteration, step, M, K, rho, ee)`` tuples, with
    the start as iteration 0. A K update that would lower the EE (possible
    only through integer rounding of M) is skipped.
    """
    M, K, rho = int(start[0]), int(start[1]), float(start[2])
    if K < 1 or M < K + 1 or rho <= 0:
        raise ValueError("start must satisfy K >= 1, M >= K + 1, rho > 0")
    ee = _ee(hw, scenario, M, K, rho)
    traj = [(0, "start", M, K, rho, ee)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        prev = (M, K)

        beta_bar, rho_bar = M / K, rho * K
        k_new = optimal_users(hw, scenario, beta_bar, rho_bar)
        m_new = max(int(round(beta_bar * k_new)), k_new + 1)
        r_new = rho_bar / k_new
        ee_new = _ee(hw, scenario, m_new, k_new, r_new)
        if ee_new >= ee:
            M, K, rho, ee = m_new, k_new, r_new, ee_new
        traj.append((it, "users", M, K, rho, ee))

        M = optimal_antennas(hw, scenario, K, rho)
        ee = _ee(hw, scenario, M, K, rho)
        traj.append((it, "antennas", M, K, rho, ee))

        rho = optimal_rho(hw, scenario, M, K)
        ee = _ee(hw, scenario, M, K, rho)
        traj.append((it, "rho", M, K, rho, ee))

        if (M, K) == prev:
            converged = True
            break
    if not converged:
        warnings.warn(f"alternating optimization did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=2)
    return AlternatingResult(DesignPoint(M, K, rho), ee, it, converged, traj)


# -- exhaustive search ---------------------------------------------------------------------


@dataclass
class SweepResult:
    """Argmax and the full EE surface of a grid sweep.

    Surface arrays have shape ``(len(k_values), len(m_values))``; cells with
    ``M < K + 1`` (or otherwise infeasible) hold ``ee = 0`` and NaN rho.
    """

    best: DesignPoint
    best_ee: float
    m_values: np.ndarray
    k_values: np.ndarray
    ee: np.ndarray
    rho: np.ndarray
    se: np.ndarray
    p_tx: np.ndarray
    p_cp: np.ndarray

    def rows(self):
        """Yield ``(M, K, rho, se, ee, p_tx, p_cp)`` for every feasible cell, K-major."""
        for i, k in enumerate(self.k_values):
            for j, m in enumerate(self.m_values):
                if np.isnan(self.rho[i, j]):
                    continue
                yield (int(m), int(k), self.rho[i, j], self.se[i, j], self.ee[i, j], self.p_tx[i, j], self.p_cp[i, j])


def default_ranges(hw: HardwareProfile, m_max: int = 400, k_max: int = 300):
    k_hi = min(k_max, hw.max_users - 1)
    return range(1, m_max + 1), range(1, k_hi + 1)


def exhaustive_search(
    hw: HardwareProfile,
    scenario: PropagationScenario,
    regime: Regime = PERFECT,
    scheme=Scheme.ZF,
    m_range=None,
    k_range=None,
    **mc_options,
) -> SweepResult:
    """Grid search over (M, K) with the best rho in every cell.

    ZF with perfect CSI uses the closed-form rho; imperfect-CSI and
    multi-cell regimes use a golden-section search over rho. MRT/MRC and
    MMSE are delegated to :func:`eemimo.montecarlo.sweep_ee` with
    ``mc_options`` (trials, seed, ...).
    """
    scheme = Scheme.parse(scheme)
    hw_r = hardware_for_regime(hw, regime)
    if m_range is None or k_range is None:
        dm, dk = default_ranges(hw_r)
        m_range = dm if m_range is None else m_range
        k_range = dk if k_range is None else k_range
    if scheme is not Scheme.ZF:
        from .montecarlo import sweep_ee

        return sweep_ee(hw, scenario, scheme, m_range, k_range, **mc_options)

    m_vals = np.asarray(list(m_range), dtype=int)
    k_vals = np.asarray(list(k_range), dtype=int)
    Kg, Mg = np.meshgrid(k_vals, m_vals, indexing="ij")
    valid = (Mg >= Kg + 1) & (Kg >= 1) & (Kg * hw_r.tau_sum <= hw_r.U)
    if not valid.any():
        raise ValueError("sweep range contains no feasible (M, K) cell")
    Mv = np.where(valid, Mg, Kg + 1).astype(float)
    Kv = Kg.astype(float)

    if regime.kind == "perfect":
        rho = rho_star_grid(hw_r, scenario, Mv, Kv)
    else:
        rho, _ = optimal_rho_numeric(hw_r, scenario, Mv, Kv, regime)
    ee, ok = ee_zf(hw_r, scenario, Mv, Kv, rho, regime)
    ok &= valid
    ee = np.where(ok, ee, 0.0)
    se, _ = se_zf(Mv, Kv, rho, regime, hw_r)
    coef = coefficients_from_profile(hw_r)
    net = Kv * (1.0 - hw_r.tau_sum * Kv / hw_r.U) * hw_r.B * se
    p_tx = pa_power_coefficient(hw_r, scenario) * rho * Kv
    p_cp = coef.total(Mv, Kv, net)

    # Row-major argmax is the lexicographic (K, M) tie-break; prefer smaller M, then K.
    order = np.lexsort((Kg.ravel(), Mg.ravel()))
    flat = ee.ravel()[order]
    idx = order[int(np.argmax(flat))]
    i, j = np.unravel_index(idx, ee.shape)
    best = DesignPoint(int(Mg[i, j]), int(Kg[i, j]), float(rho[i, j]), regime)

    nan = np.where(ok, 1.0, np.nan)
    return SweepResult(
        best=best,
        best_ee=float(ee[i, j]),
        m_values=m_vals,
        k_values=k_vals,
        ee=ee,
        rho=rho * nan,
        se=se * nan,
        p_tx=p_tx * nan,
        p_cp=p_cp * nan,
    )
