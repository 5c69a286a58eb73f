"""Centered Hardy-Littlewood maximal function on grids and related checks.

Balls are closed discrete balls ``{j : |j - i| <= k}`` (Euclidean in 2D), cut
at the window edge and averaged over the samples they keep.  Sums come from
prefix sums in extended precision, so each radius costs ``O(N^dim)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .grid import Grid, SampledFunction, convolve_kernel, restrict_mask
from .modnorm import MixedNormParams, modulation_norm


@dataclass(frozen=True)
class RadiiSet:
    """Radii ``k * step`` given by their integer multipliers ``k``."""

    grid: Grid
    ks: tuple

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        if not ks:
            raise ValueError("radii set is empty")
        if ks[0] < 1:
            raise ValueError("every radius must be at least one grid step")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("radii must be strictly increasing")
        if ks[-1] * self.grid.step > 2 * self.grid.L + 1e-12:
            raise ValueError("largest radius exceeds 2L")
        object.__setattr__(self, "ks", ks)

    @property
    def radii(self) -> np.ndarray:
        return np.array(self.ks) * self.grid.step

    @classmethod
    def from_radii(cls, grid: Grid, radii: Sequence[float]) -> "RadiiSet":
        ks = []
        for r in radii:
            k = r / grid.step
            if abs(k - round(k)) > 1e-9 * max(1.0, k):
                raise ValueError(f"radius {r} is not a multiple of the step {grid.step}")
            ks.append(int(round(k)))
        return cls(grid, tuple(ks))

    @classmethod
    def default(cls, grid: Grid, r_max: Optional[float] = None) -> "RadiiSet":
        """All multiples of the step up to ``r_max`` (default ``L``)."""
        r_max = grid.L if r_max is None else r_max
        return cls(grid, tuple(range(1, int(math.floor(r_max / grid.step + 1e-9)) + 1)))


def _nonneg(f: SampledFunction) -> np.ndarray:
    v = np.asarray(f.values)
    if np.iscomplexobj(v):
        if np.any(v.imag != 0):
            raise ValueError("nonnegativity required")
        v = v.real
    if np.any(v < 0):
        raise ValueError("nonnegativity required")
    return v


def _ball_sums_1d(v: np.ndarray, k: int, S: np.ndarray, n: int):
    i = np.arange(n)
    lo = np.maximum(i - k, 0)
    hi = np.minimum(i + k + 1, n)
    return S[hi] - S[lo], (hi - lo)


def _max_1d(v: np.ndarray, ks) -> np.ndarray:
    n = v.size
    S = np.concatenate([[0], np.cumsum(v.astype(np.longdouble))])
    best = np.zeros(n, dtype=np.longdouble)
    for k in ks:
        s, c = _ball_sums_1d(v, k, S, n)
        np.maximum(best, s / c, out=best)
    return best.astype(float)


def _max_2d(v: np.ndarray, ks) -> np.ndarray:
    n = v.shape[0]
    # row prefix sums; a disc is a stack of row segments
    R = np.concatenate([np.zeros((n, 1), np.longdouble), np.cumsum(v.astype(np.longdouble), axis=1)], axis=1)
    C = np.concatenate([np.zeros((n, 1)), np.cumsum(np.ones((n, n)), axis=1)], axis=1)
    j = np.arange(n)
    best = np.zeros((n, n), dtype=np.longdouble)
    for k in ks:
        tot = np.zeros((n, n), dtype=np.longdouble)
        cnt = np.zeros((n, n))
        for di in range(-k, k + 1):
            w = int(math.isqrt(k * k - di * di))
            lo = np.maximum(j - w, 0)
            hi = np.minimum(j + w + 1, n)
            rows = np.arange(n) + di
            ok = (rows >= 0) & (rows < n)
            src = rows[ok]
            tot[ok] += R[src][:, hi] - R[src][:, lo]
            cnt[ok] += C[src][:, hi] - C[src][:, lo]
        np.maximum(best, tot / cnt, out=best)
    return best.astype(float)


def maximal_function(f: SampledFunction, radii: Optional[RadiiSet] = None) -> SampledFunction:
    """``M f(x) = max over radii of the average of f on B(x, r)``."""
    v = _nonneg(f)
    radii = radii or RadiiSet.default(f.grid)
    if radii.grid.step != f.grid.step or radii.grid.dim != f.grid.dim:
        raise ValueError("radii were built for a different grid")
    if f.grid.dim == 1:
        return SampledFunction(f.grid, _max_1d(v, radii.ks))
    return SampledFunction(f.grid, _max_2d(v, radii.ks))


def maximal_bruteforce(f: SampledFunction, radii: RadiiSet) -> np.ndarray:
    """Direct ``O(N^2 #radii)`` averaging, the oracle for :func:`maximal_function` (1D)."""
    v = _nonneg(f)
    n = v.size
    out = np.zeros(n)
    for i in range(n):
        for k in radii.ks:
            seg = v[max(0, i - k):min(n, i + k + 1)]
            out[i] = max(out[i], math.fsum(seg) / seg.size)
    return out


# ---------------------------------------------------------------------------
# dilations of radial profiles

Profile = Union[str, Callable[[np.ndarray], np.ndarray]]


def _unit_ball(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def profile_function(profile: Profile, n: int = 1) -> Callable[[np.ndarray], np.ndarray]:
    """Unit-mass radial profile as a function of ``|y|^2``."""
    if callable(profile):
        return profile
    if profile == "indicator":
        vol = _unit_ball(n)
        return lambda r2: (np.asarray(r2) <= 1.0) / vol
    if profile == "gauss":
        return lambda r2: np.exp(-math.pi * np.asarray(r2))
    if profile == "poisson":
        return lambda r2: kernels.poisson_kernel_r2(1.0, r2, n)
    raise ValueError(f"unknown profile {profile!r}")


def default_t_list(grid: Grid, count: int = 24, t_max: Optional[float] = None) -> np.ndarray:
    """Log-spaced dilations from ``4 step`` (kernel resolved) to ``t_max``."""
    t_max = grid.L / 2.0 if t_max is None else t_max
    return np.geomspace(4.0 * grid.step, t_max, count)


def dilation_sup(f: SampledFunction, profile: Profile, t_list: Sequence[float]) -> SampledFunction:
    """``sup_t |phi_t * f|`` with ``phi_t = t^(-n) phi(./t)``.

    Each dilate is sampled at exact point differences and rescaled to unit
    discrete mass, so a constant is reproduced exactly.
    """
    n = f.grid.dim
    phi = profile_function(profile, n)
    best = np.zeros(f.grid.shape)
    for t in t_list:
        if not t > 0:
            raise ValueError("dilations must be positive")
        ker = lambda d, t=t: t ** (-n) * phi(np.sum(d * d, axis=-1) / (t * t))
        best = np.maximum(best, np.abs(convolve_kernel(f, ker, normalize_to=1.0).values))
    return SampledFunction(f.grid, best)


def majorant_integral(profile: Profile, n: int = 1, r_min: float = 1e-8, r_max: float = 1e8,
                      points: int = 400001) -> float:
    """``A = int psi`` for ``psi`` the least decreasing radial majorant of ``|phi|``."""
    phi = profile_function(profile, n)
    r = np.geomspace(r_min, r_max, points)
    vals = np.abs(phi(r * r))
    psi = np.maximum.accumulate(vals[::-1])[::-1]
    sphere = n * _unit_ball(n)
    # trapezoid in log r: int psi(r) |S| r^(n-1) dr = int psi |S| r^n dlog r
    g = psi * sphere * r ** n
    u = np.log(r)
    body = float(np.sum((g[1:] + g[:-1]) * np.diff(u)) / 2.0)
    return body + float(psi[0]) * _unit_ball(n) * r_min ** n


def check_domination(f: SampledFunction, profile: Profile, t_list: Optional[Sequence[float]] = None,
                     radii: Optional[RadiiSet] = None, A: Optional[float] = None) -> float:
    """``max sup_t |phi_t * f| / (A M f)`` over samples where ``M f`` is not negligible."""
    if t_list is None:
        t_list = default_t_list(f.grid)
    if A is None:
        A = majorant_integral(profile, f.grid.dim)
    sup = dilation_sup(f, profile, t_list).values
    Mf = maximal_function(f, radii).values
    mask = Mf > 1e-12 * np.max(Mf)
    if not np.any(mask):
        return 0.0
    return float(np.max(sup[mask] / (A * Mf[mask])))


def _conv_complex(g: np.ndarray, grid: Grid, kernel) -> np.ndarray:
    return convolve_kernel(SampledFunction(grid, g), kernel).values


def check_stft_maximal_inequality(f: SampledFunction, phi: Profile = "gauss", xi: float = 0.0,
                                  radii: Optional[RadiiSet] = None):
    """``max (|Mf * M_xi phi| - M(f * |phi|))`` and the scale ``||f * |phi| ||_inf``.

    The max runs over ``|x| < L/2``, where cutting balls at the window edge
    does not bind.  Returns ``(max_violation, scale)``; the claimed
    inequality allows a slack of ``1e-3 * scale``.
    """
    grid = f.grid
    n = grid.dim
    prof = profile_function(phi, n)
    xi_v = np.broadcast_to(np.asarray(xi, dtype=float), (n,))
    mod = lambda d: np.exp(2j * math.pi * (d @ xi_v)) * prof(np.sum(d * d, axis=-1))
    absk = lambda d: np.abs(prof(np.sum(d * d, axis=-1)))
    Mf = maximal_function(f, radii)
    lhs = np.abs(_conv_complex(Mf.values, grid, mod))
    conv = convolve_kernel(f, absk)
    rhs = maximal_function(SampledFunction(grid, np.maximum(conv.values.real, 0.0)), radii).values
    scale = float(np.max(np.abs(conv.values)))
    inside = restrict_mask(grid, -1.0, grid.L / 2.0)
    return float(np.max((lhs - rhs)[inside])), scale


def check_maximal_convolution_order(f: SampledFunction, phi: Profile = "gauss",
                                    radii: Optional[RadiiSet] = None):
    """``max (M(f * |phi|) - Mf * |phi|)``; nonpositive up to rounding.

    This is the direction that does hold: an average of ``f * |phi|`` over a
    ball is an average of ``|phi|``-weighted ball averages of ``f``.  Checked
    on ``|x| < L/2``.  Returns ``(max_violation, scale)``.
    """
    grid = f.grid
    prof = profile_function(phi, grid.dim)
    absk = lambda d: np.abs(prof(np.sum(d * d, axis=-1)))
    conv = convolve_kernel(f, absk)
    lhs = maximal_function(SampledFunction(grid, np.maximum(conv.values, 0.0)), radii).values
    rhs = convolve_kernel(maximal_function(f, radii), absk).values
    inside = restrict_mask(grid, -1.0, grid.L / 2.0)
    return float(np.max((lhs - rhs)[inside])), float(np.max(np.abs(conv.values)))


def maximal_modnorm_check(f: SampledFunction, p: float, window: Optional[SampledFunction] = None,
                          radii: Optional[RadiiSet] = None):
    """``(||Mf||_{M^{p,inf}}, ||f||_{M^{p,inf}})`` with the canonical window by default."""
    if not p > 1:
        raise ValueError("p must be > 1")
    from .modnorm import canonical_window

    window = window if window is not None else canonical_window(f.grid)
    params = MixedNormParams(p, math.inf)
    Mf = maximal_function(f, radii)
    return modulation_norm(Mf, window, params), modulation_norm(f, window, params)
