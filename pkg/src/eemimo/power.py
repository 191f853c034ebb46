"""Circuit power consumption model and its ZF coefficient form.

All quantities are SI: watts, hertz, bit/s, flops/watt. The default
:class:`HardwareProfile` carries the reference hardware values (20 MHz
bandwidth, 1800-symbol coherence blocks, 12.8 Gflops/W at the BS, ...).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, fields

import numpy as np

__all__ = [
    "Scheme",
    "HardwareProfile",
    "CircuitCoefficients",
    "PowerBreakdown",
    "coefficients_from_profile",
    "circuit_power",
    "complexity_flops",
    "dbm_to_watt",
]


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


class Scheme(str, enum.Enum):
    """Linear processing scheme used for both combining and precoding."""

    ZF = "zf"
    MRT_MRC = "mrt"
    MMSE = "mmse"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower()
        aliases = {"mrc": "mrt", "mrt/mrc": "mrt", "mrt_mrc": "mrt"}
        return cls(aliases.get(v, v))


@dataclass(frozen=True)
class HardwareProfile:
    """Fixed hardware and protocol constants.

    Rate-proportional powers (``P_COD``, ``P_DEC``, ``P_BT``) are in watt
    per bit/s; computational efficiencies are in flops per watt.
    """

    B: float = 20e6
    U: int = 1800
    zeta_ul: float = 0.4
    zeta_dl: float = 0.6
    eta_ul: float = 0.3
    eta_dl: float = 0.39
    noise_power: float = field(default_factory=lambda: dbm_to_watt(-96.0))
    tau_ul: float = 1.0
    tau_dl: float = 1.0
    P_FIX: float = 18.0
    P_SYN: float = 2.0
    P_BS: float = 1.0
    P_UE: float = 0.1
    P_COD: float = 0.1e-9
    P_DEC: float = 0.8e-9
    P_BT: float = 0.25e-9
    L_BS: float = 12.8e9
    L_UE: float = 5e9
    Q: int = 3

    def __post_init__(self):
        if not math.isclose(self.zeta_ul + self.zeta_dl, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(
                f"zeta_ul + zeta_dl must equal 1 (got {self.zeta_ul} + {self.zeta_dl})"
            )
        for name in ("zeta_ul", "zeta_dl"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("eta_ul", "eta_dl"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        for name in ("P_FIX", "P_SYN", "P_BS", "P_UE", "P_COD", "P_DEC", "P_BT"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("B", "U", "noise_power", "L_BS", "L_UE"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.tau_ul < 1 or self.tau_dl < 1:
            raise ValueError("relative pilot lengths tau_ul, tau_dl must be >= 1")
        if int(self.Q) != self.Q or self.Q < 1:
            raise ValueError("Q must be a positive integer")
        if self.tau_dl > 1.5:
            warnings.warn(
                "tau_dl > 1.5 makes the D2 circuit coefficient negative",
                RuntimeWarning,
                stacklevel=2,
            )

    @property
    def eta(self) -> float:
        """Effective PA efficiency combining uplink and downlink."""
        return 1.0 / (self.zeta_ul / self.eta_ul + self.zeta_dl / self.eta_dl)

    @property
    def tau_sum(self) -> float:
        return self.tau_ul + self.tau_dl

    @property
    def A(self) -> float:
        return self.P_COD + self.P_DEC + self.P_BT

    @property
    def max_users(self) -> int:
        """Largest K whose pilots still fit in a coherence block."""
        return int(math.floor(self.U / self.tau_sum))

    def replace(self, **changes) -> "HardwareProfile":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return HardwareProfile(**kw)


@dataclass(frozen=True)
class CircuitCoefficients:
    """``P_CP = sum_i C_i K^i + M sum_i D_i K^i + A * net_sum_rate`` for ZF."""

    A: float
    C: tuple[float, float, float, float]
    D: tuple[float, float, float]

    def c_sum(self, K):
        K = np.asarray(K, dtype=float)
        return self.C[0] + K * (self.C[1] + K * (self.C[2] + K * self.C[3]))

    def d_sum(self, K):
        K = np.asarray(K, dtype=float)
        return self.D[0] + K * (self.D[1] + K * self.D[2])

    def c_prime(self, K):
        """Per-user K-dependent circuit power, ``sum C_i K^i / K``."""
        return self.c_sum(K) / np.asarray(K, dtype=float)

    def d_prime(self, K):
        """Per-user, per-antenna circuit power, ``sum D_i K^i / K``."""
        return self.d_sum(K) / np.asarray(K, dtype=float)

    def total(self, M, K, net_sum_rate):
        return self.c_sum(K) + np.asarray(M, dtype=float) * self.d_sum(K) + self.A * np.asarray(
            net_sum_rate, dtype=float
        )


def coefficients_from_profile(hw: HardwareProfile) -> CircuitCoefficients:
    B, U = hw.B, hw.U
    C = (
        hw.P_FIX + hw.P_SYN,
        hw.P_UE,
        4.0 * B * hw.tau_dl / (U * hw.L_UE),
        B / (3.0 * U * hw.L_BS),
    )
    D = (
        hw.P_BS,
        B / hw.L_BS * (2.0 + 1.0 / U),
        B / (U * hw.L_BS) * (3.0 - 2.0 * hw.tau_dl),
    )
    return CircuitCoefficients(A=hw.A, C=C, D=D)


@dataclass(frozen=True)
class PowerBreakdown:
    """Power consumption split by component, in watts.

    ``p_tx`` is the PA power; the remaining fields make up the circuit
    power ``p_cp``.
    """

    p_tx: float
    p_fix: float
    p_tc: float
    p_ce: float
    p_cd: float
    p_bh: float
    p_lp: float

    @property
    def p_cp(self) -> float:
        return self.p_fix + self.p_tc + self.p_ce + self.p_cd + self.p_bh + self.p_lp

    @property
    def total(self) -> float:
        return self.p_tx + self.p_cp


def _check_dims(hw: HardwareProfile, M, K):
    if M < 1 or K < 0:
        raise ValueError(f"need M >= 1 and K >= 0, got M={M}, K={K}")
    if K * hw.tau_sum > hw.U:
        raise ValueError(
            f"pilot overhead tau_sum*K = {K * hw.tau_sum} exceeds the coherence block U = {hw.U}"
        )


def _precoder_flops(hw: HardwareProfile, scheme: Scheme, M, K):
    """Flops per coherence block spent computing G (= V)."""
    if scheme is Scheme.MRT_MRC:
        return 3.0 * M * K
    zf = K**3 / 3.0 + 3.0 * M * K**2 + M * K
    if scheme is Scheme.ZF:
        return zf
    return hw.Q * zf


def circuit_power(
    hw: HardwareProfile,
    scheme,
    M: int,
    K: int,
    sum_rate: float,
    p_tx: float = 0.0,
) -> PowerBreakdown:
    """Component-wise power of one operating point.

    ``sum_rate`` is the net (overhead-discounted) uplink-plus-downlink sum
    rate in bit/s; it drives the coding/decoding and backhaul terms.
    """
    scheme = Scheme.parse(scheme)
    _check_dims(hw, M, K)
    B, U = hw.B, hw.U
    p_tc = M * hw.P_BS + hw.P_SYN + K * hw.P_UE
    p_ce = B / U * 2.0 * hw.tau_ul * M * K**2 / hw.L_BS + B / U * 4.0 * hw.tau_dl * K**2 / hw.L_UE
    p_cd = sum_rate * (hw.P_COD + hw.P_DEC)
    p_bh = sum_rate * hw.P_BT
    p_lp = B * (1.0 - hw.tau_sum * K / U) * 2.0 * M * K / hw.L_BS
    p_lp += B / U * _precoder_flops(hw, scheme, M, K) / hw.L_BS
    return PowerBreakdown(
        p_tx=float(p_tx),
        p_fix=hw.P_FIX,
        p_tc=float(p_tc),
        p_ce=float(p_ce),
        p_cd=float(p_cd),
        p_bh=float(p_bh),
        p_lp=float(p_lp),
    )


def complexity_flops(hw: HardwareProfile, scheme, M: int, K: int) -> float:
    """Arithmetic rate (flops/s) of estimation, precoder computation and
    per-symbol precoding/combining.

    Counts the same operations that the channel-estimation and linear
    processing power terms charge, before dividing by L_BS / L_UE.
    """
    scheme = Scheme.parse(scheme)
    _check_dims(hw, M, K)
    if K == 0:
        return 0.0
    B, U = hw.B, hw.U
    ce = B / U * (2.0 * hw.tau_ul * M * K**2 + 4.0 * hw.tau_dl * K**2)
    lp = B * (1.0 - hw.tau_sum * K / U) * 2.0 * M * K
    lpc = B / U * _precoder_flops(hw, scheme, M, K)
    return float(ce + lp + lpc)
