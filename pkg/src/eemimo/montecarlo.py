"""Link-level Monte Carlo: Rayleigh channels, linear processing, equal-rate powers.

Every user in a block is served at the same gross rate. Powers follow
from ``p = sigma^2 D^{-1} 1`` with the coupling matrix ``D`` of the chosen
combiner/precoder; with ``G = V`` the downlink matrix is the transpose of
the uplink one, so both directions need the same total power.

Internally the batched paths work with unit-variance channels ``Z`` and
unit noise. The effective powers ``q`` they return relate to physical
powers through ``p_k = sigma^2 q_k / l_k``, so the PA power of a block is
``sigma^2 / eta * sum_k q_k / l_k``.

Random numbers come from Philox keyed by the seed, with the block index
(and, for sweeps, the user index) placed in the counter. Results do not
depend on the number of worker threads (``EE_MIMO_THREADS``).
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .power import HardwareProfile, Scheme, circuit_power
from .scenario import PropagationScenario, attenuation, sample_user_locations
from .specfun import golden_section_max

__all__ = [
    "ChannelBlock",
    "McEstimate",
    "PowerAllocation",
    "RankDeficientError",
    "block_rng",
    "generate_block",
    "combiner",
    "sinr",
    "equal_rate_power_allocation",
    "estimate_ee",
    "wishart_inverse_trace_check",
    "sweep_ee",
]

BATCH = 64
_STREAM_BATCH, _STREAM_USER, _STREAM_ERROR = 0, 1, 2


def _workers() -> int:
    env = os.environ.get("EE_MIMO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_batches(fn, n_batches):
    """Apply ``fn`` to batch indices in order, possibly on threads."""
    nw = min(_workers(), n_batches)
    if nw <= 1:
        return [fn(b) for b in range(n_batches)]
    with ThreadPoolExecutor(max_workers=nw) as ex:
        return list(ex.map(fn, range(n_batches)))


def block_rng(seed: int, index: int, user: int = 0, stream: int = _STREAM_BATCH) -> np.random.Generator:
    """Counter-based generator for one (seed, block, user, stream) cell."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, stream, user, index]))


def _cn(rng, shape):
    x = rng.standard_normal(tuple(shape) + (2,))
    return (x[..., 0] + 1j * x[..., 1]) * math.sqrt(0.5)


# -- channel blocks -------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelBlock:
    """One coherence block: channels, attenuations and (optionally) estimates."""

    H: np.ndarray
    attenuations: np.ndarray
    H_hat: np.ndarray | None = None

    @property
    def M(self) -> int:
        return self.H.shape[0]

    @property
    def K(self) -> int:
        return self.H.shape[1]


def _estimate_share(rho, K, tau_ul):
    """Fraction of the channel variance captured by the MMSE estimate."""
    return 1.0 / (1.0 + 1.0 / (rho * K * tau_ul))


def _user_column(scenario, M, seed, index, user):
    rng = block_rng(seed, index, user, _STREAM_USER)
    pos = sample_user_locations(scenario, rng, 1)
    return _cn(rng, (M,)), float(attenuation(scenario, pos)[0])


def generate_block(
    scenario: PropagationScenario,
    M: int,
    K: int,
    seed: int = 0,
    index: int = 0,
    mode: str = "perfect",
    rho: float | None = None,
    tau_ul: float = 1.0,
) -> ChannelBlock:
    """Draw user locations and Rayleigh channels for block ``index``.

    Column ``k`` depends only on ``(seed, index, k)``: the first ``M``
    antennas of a larger block are the same draws, which gives common
    random numbers across system sizes.

    In ``imperfect`` mode (needs ``rho``), ``H_hat`` is the MMSE estimate
    from pilots of power ``rho sigma^2 / l`` per user and length
    ``K tau_ul``; ``H = H_hat + E`` with independent error ``E``.
    """
    if M < 1 or K < 1:
        raise ValueError("need M, K >= 1")
    cols = [_user_column(scenario, M, seed, index, k) for k in range(K)]
    Z = np.column_stack([c[0] for c in cols])
    lk = np.array([c[1] for c in cols])
    if mode == "perfect":
        return ChannelBlock(Z * np.sqrt(lk), lk)
    if mode != "imperfect":
        raise ValueError(f"unknown mode {mode!r}")
    if rho is None or rho <= 0:
        raise ValueError("imperfect mode needs rho > 0")
    c = _estimate_share(rho, K, tau_ul)
    err = np.column_stack([_cn(block_rng(seed, index, k, _STREAM_ERROR), (M,)) for k in range(K)])
    H_hat = Z * np.sqrt(c * lk)
    return ChannelBlock(H_hat + err * np.sqrt((1.0 - c) * lk), lk, H_hat)


def _draw_batch(scenario, M, K, seed, batch, count):
    """``count`` blocks from one generator: Z (count, M, K) and l (count, K)."""
    rng = block_rng(seed, batch)
    pos = sample_user_locations(scenario, rng, count * K)
    lk = attenuation(scenario, pos).reshape(count, K)
    return _cn(rng, (count, M, K)), lk


# -- processing and power allocation ------------------------------------------------------


class RankDeficientError(np.linalg.LinAlgError):
    """The channel Gram matrix is singular; draw a new block."""


def _herm(X):
    return np.conj(np.swapaxes(X, -1, -2))


def _gram(H):
    return _herm(H) @ H


def combiner(H, scheme, uplink_powers=None, sigma2: float = 1.0):
    """Receive combiner G (also used as precoder V).

    MRC: ``H``; ZF: ``H (H^H H)^{-1}``; MMSE: ``(H P H^H + sigma2 I)^{-1} H``,
    evaluated as ``H (P H^H H + sigma2 I)^{-1}`` so only K x K systems are
    solved. Leading batch dimensions are allowed.
    """
    scheme = Scheme.parse(scheme)
    H = np.asarray(H)
    if scheme is Scheme.MRT_MRC:
        return H.copy()
    M, K = H.shape[-2:]
    W = _gram(H)
    if scheme is Scheme.ZF:
        if M < K + 1:
            raise ValueError("ZF needs M >= K + 1")
        if np.any(np.linalg.cond(W) > 1e12):
            raise RankDeficientError("H^H H is numerically singular")
        return H @ np.linalg.inv(W)
    if uplink_powers is None:
        raise ValueError("MMSE combining needs the uplink powers")
    p = np.asarray(uplink_powers, dtype=float)
    return H @ np.linalg.inv(p[..., :, None] * W + sigma2 * np.eye(K))


def _coupling(G, H, direction):
    """``|gain|^2`` matrix and per-column norms for the D-matrix entries.

    Uplink: ``C[k, l] = |g_k^H h_l|^2 / ||g_k||^2``. Downlink:
    ``C[k, l] = |h_k^H v_l|^2 / ||v_l||^2``.
    """
    X = _herm(G) @ H
    n = np.real(np.einsum("...mk,...mk->...k", np.conj(G), G))
    P = np.abs(X) ** 2
    if direction == "uplink":
        return P / n[..., :, None]
    if direction == "downlink":
        return _herm(P) / n[..., None, :]
    raise ValueError(f"direction must be 'uplink' or 'downlink', got {direction!r}")


def sinr(G, H, powers, sigma2: float, direction: str = "uplink"):
    """Per-user SINR of a block for given powers."""
    C = _coupling(G, H, direction)
    p = np.asarray(powers, dtype=float)
    sig = np.diagonal(C) * p
    interf = C @ p - sig
    return sig / (interf + sigma2)


@dataclass(frozen=True)
class PowerAllocation:
    """Equal-rate powers; ``powers`` is None when the target is infeasible."""

    powers: np.ndarray | None
    feasible: bool
    spectral_radius: float
    combiner: np.ndarray | None = None

    @property
    def total(self) -> float:
        return float(np.sum(self.powers)) if self.feasible else math.inf


def _allocate(C, gamma, sigma2):
    d = np.diagonal(C) / gamma
    T = C - np.diag(np.diagonal(C))
    radius = float(np.max(np.abs(np.linalg.eigvals(T / d[:, None])))) if len(d) > 1 else 0.0
    if radius >= 1.0:
        return None, radius
    p = sigma2 * np.linalg.solve(np.diag(d) - T, np.ones(len(d)))
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        return None, radius
    return p, radius


def equal_rate_power_allocation(
    G,
    H,
    target_rate: float,
    sigma2: float,
    direction: str = "uplink",
    *,
    bandwidth: float = 20e6,
    mmse_iterations: int = 0,
) -> PowerAllocation:
    """Powers giving every user the gross rate ``target_rate`` (bit/s).

    ``p = sigma2 D^{-1} 1``. The target is declared infeasible when the
    spectral radius of ``diag(D)^{-1}`` times the off-diagonal part reaches
    1, or when a power comes out non-positive.

    With ``mmse_iterations = Q > 0`` the uplink MMSE fixed point is run:
    ``G`` (typically the ZF combiner) supplies the starting powers and the
    combiner is recomputed Q times; a failed update keeps the previous
    feasible pair. The final combiner is returned in ``combiner``.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    gamma = 2.0 ** (target_rate / bandwidth) - 1.0
    G = np.asarray(G)
    H = np.asarray(H)
    p, radius = _allocate(_coupling(G, H, direction), gamma, sigma2)
    if p is None:
        return PowerAllocation(None, False, radius, G)
    for _ in range(mmse_iterations):
        G_new = combiner(H, Scheme.MMSE, p, sigma2)
        p_new, r_new = _allocate(_coupling(G_new, H, "uplink"), gamma, sigma2)
        if p_new is None:
            break
        G, p, radius = G_new, p_new, r_new
    return PowerAllocation(p, True, radius, G)


# -- batched effective-power kernels (unit noise, unit-variance channels) ---------------


def _solve_q(C, gamma):
    """Solve ``(diag(C)/gamma - offdiag(C)) q = 1`` per block; flag q <= 0.

    D is a Z-matrix, so a strictly positive solution exists exactly when
    the spectral-radius condition holds.
    """
    K = C.shape[-1]
    eye = np.eye(K, dtype=bool)
    D = np.where(eye, C / gamma, -C)
    q = np.linalg.solve(D, np.ones(C.shape[:-1] + (1,)))[..., 0]
    ok = np.all(q > 0, axis=-1) & np.all(np.isfinite(q), axis=-1)
    return q, ok


def _zf_q(W, gamma):
    return gamma * np.real(np.diagonal(np.linalg.inv(W), axis1=-2, axis2=-1))


def _mmse_q(W, gamma, Q):
    """MMSE fixed point from the ZF start; returns q and the feasibility mask."""
    K = W.shape[-1]
    q = _zf_q(W, gamma)
    eye = np.eye(K)
    for _ in range(Q):
        X = np.linalg.inv(q[..., :, None] * W + eye)
        A = _herm(X) @ W  # G^H Z with G = Z X
        n = np.real(np.einsum("...ik,...ij,...jk->...k", np.conj(X), W, X))
        C = np.abs(A) ** 2 / n[..., :, None]
        q_new, ok = _solve_q(C, gamma)
        q = np.where(ok[..., None], q_new, q)
    return q, np.ones(q.shape[:-1], dtype=bool)


def _mrc_q(W, gamma):
    w = np.real(np.diagonal(W, axis1=-2, axis2=-1))
    C = np.abs(W) ** 2 / w[..., :, None]
    return _solve_q(C, gamma)


def _block_q(W, scheme, gamma, Q):
    if scheme is Scheme.ZF:
        q = _zf_q(W, gamma)
        return q, np.ones(q.shape[:-1], dtype=bool)
    if scheme is Scheme.MRT_MRC:
        return _mrc_q(W, gamma)
    return _mmse_q(W, gamma, Q)


# -- EE estimation ------------------------------------------------------------------------------


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo EE estimate (bit/J) with a 95% half-width.

    ``half_width_95 = 1.96 * std / sqrt(trials)`` is propagated from the
    per-block PA power (the only random term under equal-rate allocation);
    it is infinite for a single trial.
    """

    mean: float
    half_width_95: float
    trials: int
    feasibility_rate: float = 1.0
    pa_power: float = math.nan
    pa_power_half_width: float = math.nan
    net_sum_rate: float = math.nan
    gross_rate: float = math.nan


def _target_gamma(M, K, rho, gross_rate, bandwidth, factor):
    if (rho is None) == (gross_rate is None):
        raise ValueError("give exactly one of rho and gross_rate")
    if gross_rate is not None:
        if gross_rate <= 0:
            raise ValueError("gross_rate must be positive")
        return 2.0 ** (gross_rate / bandwidth) - 1.0
    if rho <= 0:
        raise ValueError("rho must be positive")
    return rho * (M - K) / factor


def estimate_ee(
    hw: HardwareProfile,
    scenario: PropagationScenario,
    scheme,
    M: int,
    K: int,
    rho: float | None = None,
    *,
    gross_rate: float | None = None,
    trials: int = 1000,
    seed: int = 0,
    mode: str = "perfect",
    tau_ul: float | None = None,
) -> McEstimate:
    """Empirical EE of one operating point.

    The common gross rate is either ``gross_rate`` (bit/s) or
    ``B log2(1 + rho (M - K) / f)``, where ``f = 1`` for perfect CSI and
    ``f = 1 + 1/tau + 1/(rho K tau)`` for imperfect CSI; for ZF the
    latter reproduces the analytic operating point exactly.

    Imperfect CSI processes the estimates as if they were the channels
    and adds the channel-averaged estimation error ``K rho sigma^2 (1 - c)``
    to the noise, ``c`` being the estimate's share of the variance.

    Infeasible blocks are dropped from the power average and counted in
    ``feasibility_rate``; a warning is raised when more than half fail.
    """
    scheme = Scheme.parse(scheme)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if K < 1 or M < 1 or K * hw.tau_sum > hw.U:
        raise ValueError("invalid (M, K) for this profile")
    if scheme is Scheme.ZF and M < K + 1:
        raise ValueError("ZF needs M >= K + 1")
    tau = hw.tau_ul if tau_ul is None else float(tau_ul)
    if mode == "perfect":
        factor, share, noise_gain = 1.0, 1.0, 1.0
    elif mode == "imperfect":
        if rho is None:
            raise ValueError("imperfect mode needs rho (it sets the pilot power)")
        factor = 1.0 + 1.0 / tau + 1.0 / (rho * K * tau)
        share = _estimate_share(rho, K, tau)
        noise_gain = 1.0 + K * rho * (1.0 - share)
        hw = hw.replace(tau_ul=tau)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    gamma = _target_gamma(M, K, rho, gross_rate, hw.B, factor)

    n_batches = -(-trials // BATCH)

    def run(b):
        count = min(BATCH, trials - b * BATCH)
        Z, lk = _draw_batch(scenario, M, K, seed, b, count)
        q, ok = _block_q(_gram(Z), scheme, gamma, hw.Q)
        return np.where(ok, np.sum(q / (share * lk), axis=-1), np.nan)

    per_block = np.concatenate(_map_batches(run, n_batches))
    feasible = np.isfinite(per_block)
    rate = float(np.mean(feasible))
    if rate < 0.5:
        warnings.warn(f"only {rate:.0%} of blocks support the target rate", RuntimeWarning, stacklevel=2)
    scale = hw.noise_power * noise_gain / hw.eta
    gross = hw.B * math.log2(1.0 + gamma)
    net = K * (1.0 - hw.tau_sum * K / hw.U) * gross
    if not feasible.any():
        return McEstimate(0.0, math.inf, trials, 0.0, math.inf, math.inf, net, gross)
    vals = per_block[feasible] * scale
    n = len(vals)
    ptx = float(np.sum(vals) / n)
    p_hw = 1.96 * float(np.std(vals, ddof=1)) / math.sqrt(n) if n > 1 else math.inf
    total = ptx + circuit_power(hw, scheme, M, K, net).total
    ee = net / total
    return McEstimate(ee, ee * p_hw / total, trials, rate, ptx, p_hw, net, gross)


def wishart_inverse_trace_check(
    scenario: PropagationScenario,
    M: int,
    K: int,
    trials: int,
    seed: int = 0,
    attenuations=None,
):
    """Empirical ``E{tr((H^H H)^{-1})}`` against ``tr(Lambda^{-1}) / (M - K)``.

    User attenuations are fixed (drawn once from ``scenario`` unless given);
    only the small-scale fading varies.
    """
    if M < K + 1:
        raise ValueError("need M >= K + 1")
    if attenuations is None:
        pos = sample_user_locations(scenario, block_rng(seed, 0, 0, _STREAM_ERROR + 1), K)
        attenuations = attenuation(scenario, pos)
    lk = np.asarray(attenuations, dtype=float)
    inv_l = 1.0 / lk
    n_batches = -(-trials // BATCH)

    def run(b):
        count = min(BATCH, trials - b * BATCH)
        Z = _cn(block_rng(seed, b), (count, M, K))
        d = np.real(np.diagonal(np.linalg.inv(_gram(Z)), axis1=-2, axis2=-1))
        return d @ inv_l

    empirical = float(np.mean(np.concatenate(_map_batches(run, n_batches))))
    return empirical, float(np.sum(inv_l) / (M - K))


# -- sweeps for schemes without a closed form ----------------------------------------------------


def _crn_columns(scenario, M, K, trials, seed):
    """Z (trials, M, K) and l (trials, K) from per-user streams."""
    Z = np.empty((trials, M, K), dtype=complex)
    lk = np.empty((trials, K))
    for t in range(trials):
        for k in range(K):
            Z[t, :, k], lk[t, k] = _user_column(scenario, M, seed, t, k)
    return Z, lk


def _mrc_spectrum(W, c):
    """Eigen-data giving the MRC power sum at any SINR target in O(K).

    With ``N = Lambda^{-1/2} T Lambda^{-1/2}`` (T the off-diagonal
    ``|W_kl|^2``, Lambda = diag(W_kk^2)), the weighted power sum is
    ``sum_i u_i / (1/gamma - theta_i)`` and the block is feasible iff
    ``gamma theta_max < 1``.
    """
    w = np.real(np.diagonal(W, axis1=-2, axis2=-1))
    T = np.abs(W) ** 2
    K = W.shape[-1]
    T[..., np.arange(K), np.arange(K)] = 0.0
    N = T / (w[..., :, None] * w[..., None, :])
    theta, V = np.linalg.eigh(N)
    u = np.einsum("...ki,...k->...i", V, c / w) * np.sum(V, axis=-2)
    return theta, u


def sweep_ee(
    hw: HardwareProfile,
    scenario: PropagationScenario,
    scheme,
    m_range,
    k_range,
    trials: int = 200,
    seed: int = 0,
    rtol: float = 1e-6,
):
    """Monte Carlo EE surface for MRT/MRC or MMSE with the best common rate per cell.

    All cells share the same channel draws (common random numbers), so the
    surface is smooth in (M, K) even at moderate trial counts. The ``rho``
    entry of the result is the SINR parameter ``gamma / (M - K)``, i.e. the
    gross rate is ``B log2(1 + rho (M - K))`` as for ZF.
    """
    from .optimizers import SweepResult
    from .rates import DesignPoint

    scheme = Scheme.parse(scheme)
    if scheme is Scheme.ZF:
        raise ValueError("use optimizers.exhaustive_search for ZF")
    m_vals = np.asarray(list(m_range), dtype=int)
    k_vals = np.asarray(list(k_range), dtype=int)
    if len(m_vals) == 0 or len(k_vals) == 0:
        raise ValueError("empty sweep range")
    shape = (len(k_vals), len(m_vals))
    ee = np.zeros(shape)
    rho = np.full(shape, np.nan)
    se = np.full(shape, np.nan)
    p_tx = np.full(shape, np.nan)
    p_cp = np.full(shape, np.nan)

    m_max = int(m_vals.max())
    Z_all, l_all = _crn_columns(scenario, m_max, int(k_vals.max()), trials, seed)
    scale = hw.noise_power / hw.eta
    for i, K in enumerate(k_vals):
        if K < 1 or K * hw.tau_sum > hw.U:
            continue
        c = 1.0 / l_all[:, :K]
        pre = hw.B * K * (1.0 - hw.tau_sum * K / hw.U)
        Z = Z_all[:, :, :K]
        W = np.zeros((trials, K, K), dtype=complex)
        m_done = 0
        for j in np.argsort(m_vals, kind="stable"):
            M = int(m_vals[j])
            if M < 2 or (scheme is Scheme.MMSE and M < K + 1):
                continue
            # Grow the Gram matrix one antenna row at a time.
            rows = Z[:, m_done:M, :]
            W += _herm(rows) @ rows
            m_done = M

            if scheme is Scheme.MRT_MRC:
                theta, u = _mrc_spectrum(W, c)
                g_hi = (1.0 - 1e-9) / float(np.max(theta[..., -1]))

                def ptx_of(g, theta=theta, u=u):
                    g = np.asarray(g, dtype=float)[..., None, None]
                    return scale * np.mean(np.sum(u / (1.0 / g - theta), axis=-1), axis=-1)

            else:
                g_hi = 1e4
                W_now = W.copy()

                def ptx_of(g, W_now=W_now, c=c):
                    out = []
                    for gv in np.atleast_1d(g):
                        q, _ = _mmse_q(W_now, float(gv), hw.Q)
                        out.append(scale * np.mean(np.sum(q * c, axis=-1)))
                    return np.asarray(out).reshape(np.shape(g))

            def ee_of(g, M=M, K=K, ptx_of=ptx_of):
                net = pre * np.log2(1.0 + np.asarray(g, dtype=float))
                pcp = np.vectorize(lambda n: circuit_power(hw, scheme, M, K, float(n)).total)(net)
                return net / (ptx_of(g) + pcp)

            g_best, e_best = golden_section_max(ee_of, 1e-4, g_hi, rtol=rtol)
            net = pre * math.log2(1.0 + g_best)
            ee[i, j] = e_best
            rho[i, j] = g_best / max(M - K, 1)
            se[i, j] = math.log2(1.0 + g_best)
            p_tx[i, j] = float(ptx_of(g_best))
            p_cp[i, j] = circuit_power(hw, scheme, M, K, net).total

    if not np.any(ee > 0):
        raise ValueError("sweep range contains no feasible (M, K) cell")
    Kg, Mg = np.meshgrid(k_vals, m_vals, indexing="ij")
    order = np.lexsort((Kg.ravel(), Mg.ravel()))
    idx = order[int(np.argmax(ee.ravel()[order]))]
    a, b = np.unravel_index(idx, shape)
    best = DesignPoint(int(Mg[a, b]), int(Kg[a, b]), float(rho[a, b]))
    return SweepResult(best, float(ee[a, b]), m_vals, k_vals, ee, rho, se, p_tx, p_cp)
