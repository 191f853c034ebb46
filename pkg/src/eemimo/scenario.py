"""Propagation geometry: user distributions, path loss and interference sums.

The path loss is ``l(x) = dbar / |x|**kappa`` for ``|x| >= d_min``. Users
are uniform either on an annulus around the BS (``disc``) or on a square
cell centred on the BS with a ``d_min`` exclusion disc (``square``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "PropagationScenario",
    "MulticellScenario",
    "average_inverse_attenuation",
    "sample_user_location",
    "sample_user_locations",
    "attenuation",
    "pair_interference",
    "multicell_interference",
    "cluster_of_offset",
]

_GL_NODES = 64


@dataclass(frozen=True)
class PropagationScenario:
    """Single-cell geometry and path-loss law.

    Build with :meth:`disc` or :meth:`square`; the cached attribute
    :attr:`s_x` is the average inverse attenuation E{1/l(x)}.
    """

    geometry: str
    d_min: float
    kappa: float = 3.76
    dbar: float = 10 ** -3.53
    d_max: float | None = None
    side: float | None = None

    def __post_init__(self):
        if self.geometry not in ("disc", "square"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.kappa < 2:
            raise ValueError("path-loss exponent kappa must be >= 2")
        if self.dbar <= 0:
            raise ValueError("dbar must be positive")
        if self.d_min <= 0:
            raise ValueError("d_min must be positive")
        if self.geometry == "disc":
            if self.d_max is None or not self.d_min < self.d_max:
                raise ValueError("disc geometry needs d_min < d_max")
        else:
            if self.side is None or not self.d_min < self.side / 2:
                raise ValueError("square geometry needs d_min < side/2")

    @classmethod
    def disc(cls, d_min=35.0, d_max=250.0, kappa=3.76, dbar=10 ** -3.53):
        return cls("disc", d_min=d_min, d_max=d_max, kappa=kappa, dbar=dbar)

    @classmethod
    def square(cls, side=500.0, d_min=35.0, kappa=3.76, dbar=10 ** -3.53):
        return cls("square", d_min=d_min, side=side, kappa=kappa, dbar=dbar)

    @cached_property
    def s_x(self) -> float:
        return average_inverse_attenuation(self)

    @property
    def area(self) -> float:
        """Cell footprint in m^2 (used for area throughput)."""
        if self.geometry == "disc":
            return math.pi * self.d_max**2
        return self.side**2

    @property
    def support_area(self) -> float:
        """Area of the region where users are actually placed."""
        if self.geometry == "disc":
            return math.pi * (self.d_max**2 - self.d_min**2)
        return self.side**2 - math.pi * self.d_min**2


def _square_polar_moment(half: float, power: float) -> float:
    """Integral of r**power over the square [-half, half]^2."""
    # Eight congruent triangles; the radial integral is analytic.
    t, w = np.polynomial.legendre.leggauss(_GL_NODES)
    theta = (t + 1.0) * (math.pi / 8.0)
    wt = w * (math.pi / 8.0)
    rmax = half / np.cos(theta)
    return 8.0 * float(np.sum(wt * rmax ** (power + 2.0))) / (power + 2.0)


def average_inverse_attenuation(scenario: PropagationScenario) -> float:
    """E{1/l(x)} over the user distribution."""
    k, d0 = scenario.kappa, scenario.d_min
    if scenario.geometry == "disc":
        d1 = scenario.d_max
        return (d1 ** (k + 2) - d0 ** (k + 2)) / (
            scenario.dbar * (1.0 + k / 2.0) * (d1**2 - d0**2)
        )
    full = _square_polar_moment(scenario.side / 2.0, k)
    hole = 2.0 * math.pi * d0 ** (k + 2) / (k + 2)
    return (full - hole) / (scenario.support_area * scenario.dbar)


def sample_user_locations(scenario: PropagationScenario, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` user positions (metres, shape ``(n, 2)``) uniformly on the cell."""
    if scenario.geometry == "disc":
        r = np.sqrt(rng.uniform(scenario.d_min**2, scenario.d_max**2, size=n))
        phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
        return np.column_stack((r * np.cos(phi), r * np.sin(phi)))
    half = scenario.side / 2.0
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        need = n - filled
        cand = rng.uniform(-half, half, size=(int(need * 1.1) + 8, 2))
        cand = cand[np.hypot(cand[:, 0], cand[:, 1]) >= scenario.d_min][:need]
        out[filled : filled + len(cand)] = cand
        filled += len(cand)
    return out


def sample_user_location(scenario: PropagationScenario, rng: np.random.Generator) -> np.ndarray:
    return sample_user_locations(scenario, rng, 1)[0]


def attenuation(scenario: PropagationScenario, positions) -> np.ndarray:
    """Average channel attenuation l(x) at each position relative to the BS at the origin."""
    pos = np.asarray(positions, dtype=float)
    d = np.hypot(pos[..., 0], pos[..., 1])
    return scenario.dbar / d**scenario.kappa


# -- multi-cell ---------------------------------------------------------------

_RINGS = 2


def cluster_of_offset(i: int, j: int) -> int:
    """Pilot cluster (1-4) of the cell at grid offset (i, j) from the cell under study.

    Checkerboard of 2x2 blocks: clusters 1 and 4 sit on the diagonals,
    2 and 3 on the anti-diagonals.
    """
    return 1 + (i % 2) + 2 * (j % 2)


_SHARED_CLUSTERS = {1: {1, 2, 3, 4}, 2: {1, 4}, 4: {1}}


def _cell_quadrature(side: float, d_min: float):
    """Nodes and weights for the uniform distribution on a square minus the d_min disc.

    Polar coordinates around the cell's own BS: eight octants, each a
    64 x 64 Gauss-Legendre rule in (angle, radius) from d_min to the edge.
    """
    t, w = np.polynomial.legendre.leggauss(_GL_NODES)
    half = side / 2.0
    xs, ws = [], []
    for octant in range(8):
        th = octant * math.pi / 4 + (t + 1.0) * (math.pi / 8.0)
        wth = w * (math.pi / 8.0)
        # Edge distance along direction th.
        rmax = half / np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th)))
        r = d_min + (t[None, :] + 1.0) * 0.5 * (rmax[:, None] - d_min)
        wr = w[None, :] * 0.5 * (rmax[:, None] - d_min)
        weight = wth[:, None] * wr * r
        xs.append(np.stack((r * np.cos(th)[:, None], r * np.sin(th)[:, None]), axis=-1).reshape(-1, 2))
        ws.append(weight.ravel())
    x = np.concatenate(xs)
    wt = np.concatenate(ws)
    return x, wt / wt.sum()


def pair_interference(side: float, d_min: float, kappa: float, offset) -> float:
    """E{ l_j(x) / l_l(x) } for users x of cell l and a BS j at ``offset`` cells away."""
    x, wt = _cell_quadrature(side, d_min)
    bj = np.asarray(offset, dtype=float) * side
    d_own = np.hypot(x[:, 0], x[:, 1])
    d_other = np.hypot(x[:, 0] - bj[0], x[:, 1] - bj[1])
    return float(np.sum(wt * (d_own / d_other) ** kappa))


@dataclass(frozen=True)
class MulticellScenario:
    """Symmetric 5x5 grid of square cells with pilot reuse clustering.

    ``i_pc``, ``i_total`` and ``i_pc2`` are the pilot-contamination,
    total and squared-contamination interference sums seen by any cell.
    """

    cell_side: float
    reuse_factor: int
    i_pc: float
    i_total: float
    i_pc2: float
    pair_values: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.reuse_factor not in _SHARED_CLUSTERS:
            raise ValueError(f"reuse factor must be one of 1, 2, 4 (got {self.reuse_factor})")
        if self.i_pc < 0 or self.i_pc2 < 0 or self.i_total < 1:
            raise ValueError("interference sums must satisfy i_pc, i_pc2 >= 0 and i_total >= 1")

    @property
    def tau_ul(self) -> int:
        return self.reuse_factor

    @property
    def cluster_of_cell(self) -> dict:
        return {
            (i, j): cluster_of_offset(i, j)
            for i in range(-_RINGS, _RINGS + 1)
            for j in range(-_RINGS, _RINGS + 1)
        }

    @classmethod
    def build(cls, prop: PropagationScenario, reuse_factor: int) -> "MulticellScenario":
        if prop.geometry != "square":
            raise ValueError("multi-cell interference requires square cells")
        i_pc, i_total, i_pc2, pairs = _aggregates(prop, reuse_factor)
        return cls(prop.side, reuse_factor, i_pc, i_total, i_pc2, pairs)


def _aggregates(prop: PropagationScenario, reuse_factor: int):
    if reuse_factor not in _SHARED_CLUSTERS:
        raise ValueError(f"reuse factor must be one of 1, 2, 4 (got {reuse_factor})")
    x, wt = _cell_quadrature(prop.side, prop.d_min)
    d_own = np.hypot(x[:, 0], x[:, 1])
    shared = _SHARED_CLUSTERS[reuse_factor]
    pairs = {}
    i_pc = i_pc2 = 0.0
    i_total = 1.0
    for i in range(-_RINGS, _RINGS + 1):
        for j in range(-_RINGS, _RINGS + 1):
            if i == 0 and j == 0:
                continue
            d_other = np.hypot(x[:, 0] - i * prop.side, x[:, 1] - j * prop.side)
            v = float(np.sum(wt * (d_own / d_other) ** prop.kappa))
            pairs[(i, j)] = v
            i_total += v
            if cluster_of_offset(i, j) in shared:
                i_pc += v
                i_pc2 += v * v
    return i_pc, i_total, i_pc2, pairs


def multicell_interference(mc_or_reuse, prop: PropagationScenario):
    """Interference sums ``(i_pc, i_total, i_pc2)`` for a reuse pattern.

    Accepts a :class:`MulticellScenario` (its reuse factor is used) or a
    bare reuse factor.
    """
    reuse = mc_or_reuse.reuse_factor if isinstance(mc_or_reuse, MulticellScenario) else int(mc_or_reuse)
    if prop.geometry != "square":
        raise ValueError("multi-cell interference requires square cells")
    i_pc, i_total, i_pc2, _ = _aggregates(prop, reuse)
    return i_pc, i_total, i_pc2
