"""Hermite functions, spectral projections and spectral semigroups of H.

``h_k(x) = (sqrt(pi) 2^k k!)^(-1/2) H_k(x) exp(-x^2/2)`` are generated by the
normalized three-term recurrence, which never forms factorials and so stays
finite for large ``k``.  In two dimensions the basis is the tensor product
``Phi_(a,b)(x) = h_a(x_1) h_b(x_2)``, with eigenvalue ``2(a+b) + 2``.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from .grid import Grid, SampledFunction, csum

log = logging.getLogger(__name__)

PI_QUARTER = math.pi ** -0.25
_RESCALE = 1e150


def hermite_table(K: int, x) -> np.ndarray:
    """Array ``T[k] = h_k(x)`` for ``k = 0..K``."""
    if K < 0:
        raise ValueError("K must be >= 0")
    x = np.asarray(x, dtype=float)
    out = np.empty((K + 1,) + x.shape)
    # run the recurrence on h_k * exp(x^2/2) with a running log-scale so that
    # neither the Gaussian factor nor the growth in k under/overflows
    logscale = np.zeros(x.shape)
    prev = np.zeros(x.shape)
    cur = np.full(x.shape, PI_QUARTER)
    out[0] = cur * np.exp(-x * x / 2.0)
    for k in range(K):
        nxt = x * math.sqrt(2.0 / (k + 1)) * cur - math.sqrt(k / (k + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if np.any(big):
            cur = np.where(big, cur / _RESCALE, cur)
            prev = np.where(big, prev / _RESCALE, prev)
            logscale = logscale + np.where(big, math.log(_RESCALE), 0.0)
        with np.errstate(over="ignore", under="ignore"):
            out[k + 1] = cur * np.exp(logscale - x * x / 2.0)
    return out


def hermite_function(k: int, x):
    """Normalized Hermite function ``h_k`` at ``x``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return hermite_table(k, x)[k]


def mehler_check(w: float, x, y, K: int = 200):
    """Truncated Mehler series against its closed form, as ``(series, closed)``.

    The series term ``H_k(x) H_k(y) exp(-(x^2+y^2)/2) w^k / (2^k k!)`` equals
    ``sqrt(pi) h_k(x) h_k(y) w^k``, which is what is summed here.  ``x`` and
    ``y`` broadcast against each other.
    """
    if abs(w) >= 1:
        raise ValueError("Mehler series needs |w| < 1")
    if K > 300:
        raise ValueError("K must be <= 300")
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    hx = hermite_table(K, x.ravel())
    hy = hermite_table(K, y.ravel())
    wk = w ** np.arange(K + 1)
    series = math.sqrt(math.pi) * np.einsum("k,ki,ki->i", wk, hx, hy).reshape(x.shape)
    a = (1.0 + w * w) / (1.0 - w * w)
    b = 2.0 * w / (1.0 - w * w)
    closed = (1.0 - w * w) ** -0.5 * np.exp(-0.5 * a * (x * x + y * y) + b * x * y)
    if series.ndim == 0:
        return float(series), float(closed)
    return series, closed


def max_degree_for(grid: Grid) -> int:
    """Largest K with ``L >= sqrt(2 (2K + n))``."""
    return int(math.floor((grid.L ** 2 / 2.0 - grid.dim) / 2.0))


def default_degree(grid: Grid) -> int:
    want = 128 if grid.dim == 1 else 64
    return max(0, min(want, max_degree_for(grid)))


def degree_for_tolerance(t: float, n: int, tol: float, rate=lambda k: k) -> int:
    """Smallest K whose first dropped multiplier is below ``tol``."""
    K = 0
    while math.exp(-t * rate(2 * (K + 1) + n)) > tol and K < 4096:
        K += 1
    return K


class HermiteBasis:
    """Hermite functions sampled on a grid, ``k = 0..K_max`` per axis."""

    def __init__(self, grid: Grid, K_max: Optional[int] = None):
        if K_max is None:
            K_max = default_degree(grid)
        if K_max < 0:
            raise ValueError("K_max must be >= 0")
        need = math.sqrt(2.0 * (2 * K_max + grid.dim))
        if grid.L < need:
            raise ValueError(
                f"grid half-width {grid.L} too small for K_max={K_max}; need L >= {need:.3f}")
        self.grid = grid
        self.K_max = K_max
        self.samples = hermite_table(K_max, grid.axis)

    def gram_error(self) -> float:
        """``max |<h_j, h_k> - delta_jk|`` under the grid quadrature."""
        G = self.samples @ self.samples.T * self.grid.step
        return float(np.max(np.abs(G - np.eye(self.K_max + 1))))

    def coefficients(self, f: SampledFunction) -> np.ndarray:
        """``<f, Phi_alpha>``; a vector in 1D, a matrix indexed (a, b) in 2D."""
        self._check(f)
        H = self.samples
        v = f.values
        if self.grid.dim == 1:
            return H @ v * self.grid.step
        return H @ v @ H.T * self.grid.cell

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        H = self.samples
        if self.grid.dim == 1:
            return coeffs @ H
        return H.T @ coeffs @ H

    def levels(self) -> np.ndarray:
        """Total degree ``|alpha|`` for every coefficient slot."""
        k = np.arange(self.K_max + 1)
        if self.grid.dim == 1:
            return k
        return k[:, None] + k[None, :]

    def apply_multiplier(self, f: SampledFunction, mult) -> SampledFunction:
        """``sum_k mult(k) P_k f`` over the retained levels."""
        c = self.coefficients(f)
        m = mult(self.levels())
        vals = self.synthesize(c * m)
        if f.is_real:
            vals = np.real(vals)
        return SampledFunction(self.grid, vals)

    def _check(self, f: SampledFunction) -> None:
        if f.grid != self.grid:
            raise ValueError("function and basis live on different grids")


def project(f: SampledFunction, k: int, basis: Optional[HermiteBasis] = None) -> SampledFunction:
    """Orthogonal projection onto the eigenspace ``|alpha| = k``."""
    basis = basis or HermiteBasis(f.grid)
    if k > basis.K_max:
        raise ValueError(f"k={k} exceeds K_max={basis.K_max}")
    return basis.apply_multiplier(f, lambda lev: (lev == k).astype(float))


def heat_truncation_bound(t: float, K: int, n: int, f: SampledFunction) -> float:
    from .grid import lp_norm

    return math.exp(-t * (2 * K + n)) * lp_norm(f, 2)


def hermite_heat_spectral(f: SampledFunction, t: float, K_max: Optional[int] = None,
                          basis: Optional[HermiteBasis] = None) -> SampledFunction:
    """``sum_k exp(-t (2k + n)) P_k f``."""
    if not t > 0:
        raise ValueError("t must be positive")
    basis = basis or HermiteBasis(f.grid, K_max)
    n = f.grid.dim
    log.debug("heat truncation bound %.3e", heat_truncation_bound(t, basis.K_max, n, f))
    return basis.apply_multiplier(f, lambda lev: np.exp(-t * (2 * lev + n)))


def hermite_poisson_spectral(f: SampledFunction, t: float, K_max: Optional[int] = None,
                             basis: Optional[HermiteBasis] = None) -> SampledFunction:
    """``sum_k exp(-t sqrt(2k + n)) P_k f``; ``t = 0`` returns the projection."""
    if t < 0:
        raise ValueError("t must be non-negative")
    basis = basis or HermiteBasis(f.grid, K_max)
    n = f.grid.dim
    return basis.apply_multiplier(f, lambda lev: np.exp(-t * np.sqrt(2 * lev + n)))


def ou_transfer(f: SampledFunction, t: float, kind: str = "heat",
                K_max: Optional[int] = None, basis: Optional[HermiteBasis] = None,
                growth_limit: float = 1e6):
    """Ornstein-Uhlenbeck semigroup through the Hermite operator.

    ``exp(-tO) f = exp(|x|^2/2) exp(-tL) (exp(-|x|^2/2) f)`` with ``L = H - n``
    (``kind="poisson"`` uses ``exp(-t sqrt(L))``).  The back-transform factor
    amplifies truncation error, so samples where ``exp(|x|^2/2)`` exceeds
    ``growth_limit`` are clipped to zero and reported as invalid.

    Returns ``(result, valid_mask)``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    grid = f.grid
    n = grid.dim
    r2 = grid.radius2()
    basis = basis or HermiteBasis(grid, K_max)
    damped = SampledFunction(grid, np.exp(-r2 / 2.0) * f.values)
    if kind == "heat":
        g = basis.apply_multiplier(damped, lambda lev: np.exp(-t * 2.0 * lev))
    elif kind == "poisson":
        g = basis.apply_multiplier(damped, lambda lev: np.exp(-t * np.sqrt(2.0 * lev)))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    valid = r2 / 2.0 <= math.log(growth_limit)
    vals = np.where(valid, np.exp(np.where(valid, r2 / 2.0, 0.0)) * g.values, 0.0)
    if not np.all(valid):
        log.info("ou_transfer: clipped %d samples beyond the growth limit", int(np.sum(~valid)))
    return SampledFunction(grid, vals), valid


def eigen_residual(k: int, grid: Grid) -> float:
    """``||(-D2 + x^2) h_k - (2k+1) h_k||_2`` with the 3-point Laplacian (1D)."""
    if grid.dim != 1:
        raise ValueError("eigen_residual is one-dimensional")
    x = grid.axis
    h = hermite_function(k, x)
    d2 = np.zeros_like(h)
    d2[1:-1] = (h[2:] - 2 * h[1:-1] + h[:-2]) / grid.step ** 2
    r = -d2 + x * x * h - (2 * k + 1) * h
    r = r[1:-1]
    return math.sqrt(csum(r * r) * grid.step)
