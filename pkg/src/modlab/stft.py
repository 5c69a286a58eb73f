"""Short-time Fourier transform on grids.

``V_phi f(x, xi) = int f(y) conj(phi(y - x)) exp(-2 pi i y.xi) dy``

The phase sits on the integration variable, so that ``V_phi f(x, .)`` is the
Fourier transform of ``f . T_x conj(phi)``.  Translates ``x`` run over the
offset-free grid with the same ``L`` and ``N`` as the data, which makes every
difference ``y_j - x_i`` a sample point of the window (for either data
offset).  The window is taken as zero outside its own grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
import scipy.fft

from . import kernels
from .grid import Grid, SampledFunction, _axis_phase, _along, csum_complex, fft_workers, inner
from .io import atomic_write_text

CHUNK_BYTES = 1 << 25


@dataclass(frozen=True)
class PhaseSpaceFunction:
    """Samples ``F[ix..., ixi...]`` on ``grid_x`` x ``grid_xi``."""

    grid_x: Grid
    grid_xi: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        want = self.grid_x.shape + self.grid_xi.shape
        if vals.size != self.grid_x.size * self.grid_xi.size:
            raise ValueError(f"expected {self.grid_x.size * self.grid_xi.size} values, got {vals.size}")
        vals = vals.reshape(want)
        if not np.all(np.isfinite(vals)):
            raise ValueError("phase-space samples must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def cell(self) -> float:
        return self.grid_x.cell * self.grid_xi.cell

    def abs(self) -> "PhaseSpaceFunction":
        return PhaseSpaceFunction(self.grid_x, self.grid_xi, np.abs(self.values))


def translate_grid(grid: Grid, stride: int = 1) -> Grid:
    """Grid of window centres: offset-free, same ``L``, every ``stride``-th point."""
    if stride < 1 or grid.N % stride or grid.N // stride < 8:
        raise ValueError(f"invalid stride {stride} for N={grid.N}")
    return Grid(grid.dim, grid.L, grid.N // stride, "none")


def _check_pair(f: SampledFunction, window: SampledFunction) -> None:
    if f.grid != window.grid:
        raise ValueError("f and window must share a grid")
    if not np.any(window.values != 0):
        raise ValueError("window must be nonzero")


def _window_rows(window: SampledFunction, idx: np.ndarray) -> np.ndarray:
    """``conj(phi(y_j - x_i))`` for translate indices ``idx`` (1D), shape (len(idx), N)."""
    N = window.grid.N
    m = np.arange(N)[None, :] - idx[:, None] + N // 2
    ok = (m >= 0) & (m < N)
    w = np.conj(np.asarray(window.values))
    return np.where(ok, w[np.clip(m, 0, N - 1)], 0.0)


def _window_block(window: SampledFunction, ia: int, ib: int) -> np.ndarray:
    """2D analogue of :func:`_window_rows` for one translate ``(ia, ib)``."""
    N = window.grid.N
    out = np.zeros((N, N), dtype=complex)
    sa, sb = ia - N // 2, ib - N // 2
    w = np.conj(np.asarray(window.values))
    ra = slice(max(0, sa), min(N, N + sa))
    rb = slice(max(0, sb), min(N, N + sb))
    out[ra, rb] = w[ra.start - sa:ra.stop - sa, rb.start - sb:rb.stop - sb]
    return out


def _transform_rows(prod: np.ndarray, grid: Grid) -> np.ndarray:
    """Continuum Fourier samples along the trailing ``dim`` axes."""
    alt, ph = _axis_phase(grid)
    nd = prod.ndim
    axes = tuple(range(nd - grid.dim, nd))
    for ax in axes:
        prod = prod * _along(alt, ax, nd)
    out = scipy.fft.fftn(prod, axes=axes, workers=fft_workers())
    for ax in axes:
        out = out * _along(ph, ax, nd)
    return out * grid.cell


def _direct_rows(prod: np.ndarray, grid: Grid, xi: np.ndarray) -> np.ndarray:
    """``sum_j prod[., j] exp(-2 pi i y_j xi) dy`` at arbitrary 1D frequencies."""
    E = np.exp(-2j * np.pi * np.outer(grid.axis, xi))
    return prod @ E * grid.step


def stft_chunks(f: SampledFunction, window: SampledFunction, grid_xi: Optional[Grid] = None,
                stride: int = 1, chunk: Optional[int] = None) -> Iterator:
    """Yield ``(translate indices, V rows)`` blocks, the streaming form of :func:`stft`.

    Indices refer to ``translate_grid(f.grid, stride)``; 2D blocks carry flat
    indices and values of shape ``(k, N, N)``.
    """
    _check_pair(f, window)
    grid = f.grid
    if grid_xi is None:
        grid_xi = grid.reciprocal()
    fast = grid_xi == grid.reciprocal()
    if not fast and grid.dim != 1:
        raise ValueError("non-reciprocal frequency grids are supported in 1D only")
    xs = translate_grid(grid, stride)
    fv = np.asarray(f.values)
    if chunk is None:
        chunk = max(1, CHUNK_BYTES // (16 * grid.size))
    if grid.dim == 1:
        idx_all = np.arange(xs.N) * stride
        for a in range(0, xs.N, chunk):
            idx = idx_all[a:a + chunk]
            prod = fv[None, :] * _window_rows(window, idx)
            rows = _transform_rows(prod, grid) if fast else _direct_rows(prod, grid, grid_xi.axis)
            yield np.arange(a, a + idx.size), rows
    else:
        flat = [(i, j) for i in range(xs.N) for j in range(xs.N)]
        for a in range(0, len(flat), chunk):
            block = flat[a:a + chunk]
            prod = np.stack([fv * _window_block(window, i * stride, j * stride) for i, j in block])
            yield np.arange(a, a + len(block)), _transform_rows(prod, grid)


def stft(f: SampledFunction, window: SampledFunction, grid_xi: Optional[Grid] = None,
         stride: int = 1) -> PhaseSpaceFunction:
    """``V_phi f`` on (translate grid) x ``grid_xi``; ``grid_xi`` defaults to the reciprocal lattice."""
    if grid_xi is None:
        grid_xi = f.grid.reciprocal()
    xs = translate_grid(f.grid, stride)
    out = np.empty((xs.size,) + grid_xi.shape, dtype=complex)
    for idx, rows in stft_chunks(f, window, grid_xi, stride):
        out[idx] = rows
    return PhaseSpaceFunction(xs, grid_xi, out)


def stft_at_frequency(f: SampledFunction, window: SampledFunction, xi: float,
                      stride: int = 1) -> np.ndarray:
    """``V_phi f(x, xi)`` for every translate ``x`` at one 1D frequency."""
    _check_pair(f, window)
    if f.grid.dim != 1:
        raise ValueError("stft_at_frequency is one-dimensional")
    xs = translate_grid(f.grid, stride)
    idx = np.arange(xs.N) * stride
    prod = np.asarray(f.values)[None, :] * _window_rows(window, idx)
    return _direct_rows(prod, f.grid, np.array([float(xi)]))[:, 0]


def stft_gaussian_closed(t0: float, x, xi, n: int = 1, printed: bool = False):
    """``V_{h_t0} h_t0 (x, xi) = exp(-2 pi^2 t0 |xi|^2) exp(-pi i x.xi) h_{2 t0}(x)``.

    The spatial factor is ``D_{sqrt(8 pi t0)} e^{-pi|.|^2} = h_{2 t0}``; at
    ``(0, 0)`` this is ``||h_t0||_2^2``.  ``printed=True`` substitutes
    ``h_{t0/2}``, a variant that does not match the transform.
    """
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if n == 1:
        r2x, r2xi, dot = x * x, xi * xi, x * xi
    else:
        r2x, r2xi, dot = np.sum(x * x, -1), np.sum(xi * xi, -1), np.sum(x * xi, -1)
    tx = t0 / 2.0 if printed else 2.0 * t0
    return (np.exp(-2.0 * math.pi ** 2 * t0 * r2xi) * np.exp(-1j * math.pi * dot)
            * kernels.heat_kernel_r2(tx, r2x, n))


def log_abs_stft_gaussian_closed(t0: float, r2x, r2xi, n: int = 1):
    """``log |V_{h_t0} h_t0|`` from squared radii."""
    return -2.0 * math.pi ** 2 * t0 * np.asarray(r2xi) + kernels.log_heat_kernel_r2(2.0 * t0, r2x, n)


def poisson_window(t0: float, xi, grid: Grid) -> SampledFunction:
    """``M_{-xi} p_t0``: the window whose transform is ``exp(-2 pi t0 |eta + xi|)``."""
    pts = grid.points()
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (grid.dim,))
    phase = np.exp(-2j * math.pi * (pts @ xi))
    return SampledFunction(grid, phase * kernels.poisson_kernel_r2(t0, grid.radius2(), grid.dim))


def stft_poisson_closed(t0: float, x, xi, n: int = 1, printed: bool = False):
    """``V_phi p_t0 (x, xi)`` for the window ``phi = M_{-xi} p_t0``.

    Equals ``exp(-2 pi i x.xi) p_{2 t0}(x)``; its modulus ``p_{2 t0}(x)`` does
    not depend on ``xi``.  ``printed=True`` returns the conjugate phase
    ``exp(+2 pi i x.xi)`` instead.
    """
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if n == 1:
        r2x, dot = x * x, x * xi
    else:
        r2x, dot = np.sum(x * x, -1), np.sum(x * xi, -1)
    sign = 1.0 if printed else -1.0
    return np.exp(sign * 2j * math.pi * dot) * kernels.poisson_kernel_r2(2.0 * t0, r2x, n)


def phase_inner(F: PhaseSpaceFunction, G: PhaseSpaceFunction) -> complex:
    if F.grid_x != G.grid_x or F.grid_xi != G.grid_xi:
        raise ValueError("phase-space grids differ")
    return csum_complex(F.values * np.conj(G.values)) * F.cell


def moyal_check(f1: SampledFunction, f2: SampledFunction, phi1: SampledFunction,
                phi2: SampledFunction):
    """``(<V_phi1 f1, V_phi2 f2>, <f1, f2> conj(<phi1, phi2>))``."""
    grids = {f1.grid, f2.grid, phi1.grid, phi2.grid}
    if len(grids) != 1:
        raise ValueError("all four functions must share a grid")
    lhs = 0j
    parts = []
    for (i1, r1), (_, r2) in zip(stft_chunks(f1, phi1), stft_chunks(f2, phi2)):
        parts.append(csum_complex(r1 * np.conj(r2)))
    grid = f1.grid
    lhs = csum_complex(np.array(parts)) * grid.cell * grid.reciprocal().cell
    rhs = inner(f1, f2) * np.conj(inner(phi1, phi2))
    return complex(lhs), complex(rhs)


def write_phase_csv(F: PhaseSpaceFunction, path) -> None:
    lines = ["# grids", f"# x:{F.grid_x.header()};xi:{F.grid_xi.header()}", "ix,ixi,re,im"]
    vals = np.asarray(F.values, dtype=complex).reshape(F.grid_x.size, F.grid_xi.size)
    for ix in range(F.grid_x.size):
        row = vals[ix]
        for ixi in range(F.grid_xi.size):
            v = row[ixi]
            lines.append(f"{ix},{ixi},{float(v.real)!r},{float(v.imag)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def _grid_from_header(text: str) -> Grid:
    d, L, N, off = text.split(",")
    return Grid(int(d), float(L), int(N), off.strip())


def read_phase_csv(path) -> PhaseSpaceFunction:
    with open(path) as fh:
        if fh.readline().strip() != "# grids":
            raise ValueError(f"{path}: missing '# grids' header")
        meta = fh.readline().strip().lstrip("#").strip()
        gx, gxi = (part.split(":", 1)[1] for part in meta.split(";"))
        grid_x, grid_xi = _grid_from_header(gx), _grid_from_header(gxi)
        fh.readline()
        vals = np.zeros((grid_x.size, grid_xi.size), dtype=complex)
        for line in fh:
            if line.strip():
                ix, ixi, re, im = line.split(",")
                vals[int(ix), int(ixi)] = complex(float(re), float(im))
    return PhaseSpaceFunction(grid_x, grid_xi, vals)
