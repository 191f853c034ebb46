"""Special functions and small numerical primitives used by the optimizers.

Everything here works on plain floats and, where noted, elementwise on
numpy arrays so that whole (M, K) grids can be processed in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "INV_E",
    "lambert_w0",
    "exp_w_plus_one",
    "QuarticCoeffs",
    "real_positive_roots",
    "golden_section_max",
]

INV_E = math.exp(-1.0)

_HALLEY_MAX_ITER = 64


def _initial_guess(x: np.ndarray) -> np.ndarray:
    w = np.log1p(np.maximum(x, 0.0))
    # Asymptotic start is much closer for large arguments.
    big = x > 3.0
    if np.any(big):
        lx = np.log(x[big])
        w[big] = lx - np.log(lx)
    neg = x < 0.0
    if np.any(neg):
        # Series in p = sqrt(2(e x + 1)) around the branch point -1/e.
        p = np.sqrt(np.maximum(2.0 * (math.e * x[neg] + 1.0), 0.0))
        w[neg] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    return w


def lambert_w0(x):
    """Principal branch W0 of the Lambert W function.

    Solves ``w * exp(w) = x`` for real ``x >= -1/e`` by Halley iteration.
    Accepts a scalar or an array; returns the same kind.

    Raises
    ------
    ValueError
        If any ``x < -1/e`` or is not finite.
    """
    scalar = np.ndim(x) == 0
    xa = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(xa)):
        raise ValueError("lambert_w0 requires finite arguments")
    # Rounding of -1/e itself must not be rejected.
    if np.any(xa < -INV_E * (1.0 + 4 * np.finfo(float).eps)):
        raise ValueError("lambert_w0 is real only for x >= -1/e")
    xa = np.maximum(xa, -INV_E)

    w = _initial_guess(xa)
    active = np.ones(xa.shape, dtype=bool)
    for _ in range(_HALLEY_MAX_ITER):
        wa = w[active]
        xs = xa[active]
        ew = np.exp(wa)
        f = wa * ew - xs
        wp1 = wa + 1.0
        # At the branch point the Halley denominator vanishes; w = -1 is exact there.
        at_branch = wp1 <= 1e-300
        denom = ew * wp1 - (wa + 2.0) * f / np.where(at_branch, 1.0, 2.0 * wp1)
        step = np.where(at_branch | (denom == 0.0), 0.0, f / np.where(denom == 0.0, 1.0, denom))
        wa = wa - step
        w[active] = wa
        done = np.abs(step) <= 4 * np.finfo(float).eps * (1.0 + np.abs(wa))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    w = np.maximum(w, -1.0)
    if scalar:
        return float(w[0])
    return w.reshape(np.shape(x))


def exp_w_plus_one(x):
    """Return ``exp(W0(x) + 1)`` without overflow for large ``x``.

    Uses ``exp(W(x)) = x / W(x)`` away from the origin, which is exact by
    definition and better conditioned than exponentiating ``W``.
    """
    w = lambert_w0(x)
    xa = np.asarray(x, dtype=float)
    wa = np.asarray(w, dtype=float)
    safe = np.abs(wa) > 1e-3
    out = np.where(safe, math.e * xa / np.where(safe, wa, 1.0), np.exp(wa + 1.0))
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class QuarticCoeffs:
    """Coefficients of ``a4 x^4 + a3 x^3 + a2 x^2 + a1 x + a0``."""

    a4: float
    a3: float
    a2: float
    a1: float
    a0: float

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError("quartic coefficients must be finite")
        if self.a4 == 0.0:
            raise ValueError("leading coefficient a4 must be non-zero")

    def as_array(self) -> np.ndarray:
        return np.array([self.a4, self.a3, self.a2, self.a1, self.a0], dtype=float)

    def __call__(self, x):
        return np.polyval(self.as_array(), x)

    def scale(self, x) -> float:
        """Magnitude scale of the evaluation at ``x``: sum of |a_i| |x|^i."""
        return float(np.polyval(np.abs(self.as_array()), abs(x)))


def real_positive_roots(q: QuarticCoeffs, tol_imag: float | None = None) -> list[float]:
    """Real, strictly positive roots of a quartic, sorted ascending.

    Roots come from the eigenvalues of the companion matrix of the monic
    polynomial; each accepted root gets one Newton step on the original
    coefficients. A root counts as real when ``|Im r| <= tol_imag``, which
    defaults to ``1e-8 * (1 + max|r|)``.
    """
    c = q.as_array()
    monic = c[1:] / c[0]
    companion = np.zeros((4, 4))
    companion[0, :] = -monic
    companion[1:, :-1] = np.eye(3)
    roots = np.linalg.eigvals(companion)
    if tol_imag is None:
        tol_imag = 1e-8 * (1.0 + float(np.max(np.abs(roots))))

    dc = np.polyder(c)
    out = []
    for r in roots:
        if abs(r.imag) > tol_imag or r.real <= 0.0:
            continue
        x = float(r.real)
        d = np.polyval(dc, x)
        if d != 0.0:
            x_new = x - np.polyval(c, x) / d
            if abs(np.polyval(c, x_new)) <= abs(np.polyval(c, x)):
                x = float(x_new)
        if x > 0.0:
            out.append(x)
    return sorted(out)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(
    f: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    rtol: float = 1e-8,
    log_scale: bool = True,
    max_iter: int = 200,
):
    """Maximize a unimodal function on ``[lo, hi]`` by golden-section search.

    ``lo`` and ``hi`` may be arrays, in which case the search runs
    independently (and simultaneously) for each element; ``f`` must then
    accept and return arrays of that shape. With ``log_scale`` the search
    runs on ``log x``, so ``rtol`` is a relative tolerance on the argmax.

    Returns
    -------
    (xmax, fmax)
        Arrays (or floats for scalar brackets) of the argmax and its value.
    """
    scalar = np.ndim(lo) == 0 and np.ndim(hi) == 0
    a = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
    b = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
    a, b = np.broadcast_arrays(a, b)
    a, b = a.copy(), b.copy()
    if np.any(b <= a):
        raise ValueError("golden_section_max needs lo < hi")
    if log_scale:
        if np.any(a <= 0):
            raise ValueError("log-scale golden-section search needs lo > 0")
        a, b = np.log(a), np.log(b)
        to_x = np.exp
        tol = np.full(a.shape, math.log1p(rtol))
    else:
        def to_x(t):
            return t
        tol = rtol * np.maximum(np.abs(a), np.abs(b))

    def g(t):
        return np.asarray(f(to_x(t)), dtype=float).reshape(t.shape)

    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = g(x1), g(x2)
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        left = f1 >= f2  # ties move toward the smaller argument
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        x2_new = np.where(left, x1, a + _INV_PHI * (b - a))
        x1_new = np.where(left, b - _INV_PHI * (b - a), x2)
        f_probe = g(np.where(left, x1_new, x2_new))
        f1, f2 = np.where(left, f_probe, f2), np.where(left, f1, f_probe)
        x1, x2 = x1_new, x2_new
    tbest = np.where(f1 >= f2, x1, x2)
    fbest = np.maximum(f1, f2)
    xbest = to_x(tbest)
    if scalar:
        return float(xbest[0]), float(fbest[0])
    return xbest, fbest
