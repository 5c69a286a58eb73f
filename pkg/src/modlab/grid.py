"""Uniform grids, sampled functions, quadrature, transforms and convolution.

Every other module computes on :class:`SampledFunction` objects living on a
:class:`Grid`, a uniform lattice of the centered cube ``[-L, L)^dim``.

Fourier convention: ``F f(xi) = int f(y) exp(-2 pi i y.xi) dy``.  The discrete
transform returns samples of this integral on the reciprocal lattice, whose
step is ``1 / (2L)`` and which has the same number of points per axis.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft
from scipy.signal import fftconvolve

OFFSETS = ("none", "half_step")


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by ``MODLAB_THREADS``."""
    env = os.environ.get("MODLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def csum(values) -> float:
    """Compensated (order independent) sum of a real array."""
    return math.fsum(np.asarray(values, dtype=float).ravel())


def csum_complex(values) -> complex:
    arr = np.asarray(values)
    if np.iscomplexobj(arr):
        return complex(csum(arr.real), csum(arr.imag))
    return complex(csum(arr), 0.0)


@dataclass(frozen=True)
class Grid:
    dim: int
    L: float
    N: int
    offset: str = "none"

    @property
    def step(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def cell(self) -> float:
        """Volume element ``step**dim``."""
        return self.step ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.dim

    @property
    def size(self) -> int:
        return self.N ** self.dim

    @property
    def shift(self) -> float:
        return 0.5 if self.offset == "half_step" else 0.0

    @property
    def axis(self) -> np.ndarray:
        return -self.L + (np.arange(self.N) + self.shift) * self.step

    def mesh(self) -> list:
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        if self.dim == 1:
            return [self.axis]
        return list(np.meshgrid(self.axis, self.axis, indexing="ij"))

    def points(self) -> np.ndarray:
        """Coordinates with a trailing axis of length ``dim``."""
        return np.stack(self.mesh(), axis=-1)

    def radius2(self) -> np.ndarray:
        return sum(c * c for c in self.mesh())

    def reciprocal(self) -> "Grid":
        """Frequency lattice matched to this grid by the discrete transform."""
        return Grid(self.dim, self.N / (4.0 * self.L), self.N, "none")

    def padded(self) -> "Grid":
        return Grid(self.dim, 2.0 * self.L, 2 * self.N, self.offset)

    def header(self) -> str:
        return f"{self.dim},{self.L!r},{self.N},{self.offset}"


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def make_grid(dim: int, L: float, N: int, offset: str = "none") -> Grid:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if not (isinstance(N, (int, np.integer)) and _is_pow2(int(N))):
        raise ValueError(f"N must be a power of two, got {N}")
    if N < 8:
        raise ValueError(f"N must be at least 8, got {N}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    if offset not in OFFSETS:
        raise ValueError(f"offset must be one of {OFFSETS}, got {offset!r}")
    return Grid(int(dim), float(L), int(N), offset)


class SampledFunction:
    """Immutable complex or real samples on a grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, copy=True)
        if arr.dtype.kind not in "fc":
            arr = arr.astype(float)
        if arr.size != grid.size:
            raise ValueError(f"expected {grid.size} samples, got {arr.size}")
        arr = arr.reshape(grid.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("sampled values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("SampledFunction is immutable")

    def __repr__(self):
        return f"SampledFunction({self.grid}, dtype={self.values.dtype})"

    @property
    def is_real(self) -> bool:
        return self.values.dtype.kind == "f"

    def real_part(self) -> "SampledFunction":
        return SampledFunction(self.grid, np.real(self.values))

    def abs(self) -> "SampledFunction":
        return SampledFunction(self.grid, np.abs(self.values))

    def conj(self) -> "SampledFunction":
        return SampledFunction(self.grid, np.conj(self.values))

    def scaled(self, c) -> "SampledFunction":
        return SampledFunction(self.grid, c * self.values)

    def with_values(self, values) -> "SampledFunction":
        return SampledFunction(self.grid, values)

    def __add__(self, other):
        _check_same_grid(self, other)
        return SampledFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return SampledFunction(self.grid, self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, SampledFunction):
            _check_same_grid(self, other)
            return SampledFunction(self.grid, self.values * other.values)
        return self.scaled(other)

    __rmul__ = __mul__


def _check_same_grid(f: SampledFunction, g: SampledFunction) -> None:
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")


# ---------------------------------------------------------------------------
# function descriptors

_DESCRIPTOR_TAGS = (
    "gaussian", "poisson", "indicator", "falpha", "hermite", "omega",
    "gausswin", "const", "table",
)


@dataclass(frozen=True)
class FunctionDescriptor:
    """Named closed-form function, e.g. ``gaussian(t)`` or ``falpha(alpha)``.

    ``gaussian`` is the heat kernel ``h_t``, ``gausswin`` the self-dual
    window ``exp(-pi |x|^2)``, ``hermite`` a normalized Hermite function
    (indices per axis), ``table`` a CSV written by :func:`write_csv`.
    """

    tag: str
    params: tuple = ()
    path: Optional[str] = None

    def __post_init__(self):
        if self.tag not in _DESCRIPTOR_TAGS:
            raise ValueError(f"unknown function descriptor {self.tag!r}")
        p = self.params
        if self.tag in ("gaussian", "poisson") and not (len(p) == 1 and p[0] > 0):
            raise ValueError(f"{self.tag} needs t > 0")
        if self.tag == "indicator" and not (len(p) == 1 and p[0] > 0):
            raise ValueError("indicator needs radius > 0")
        if self.tag == "falpha" and not (len(p) == 1 and p[0] > 0):
            raise ValueError("falpha needs alpha > 0")
        if self.tag == "hermite" and not (1 <= len(p) <= 2 and all(k >= 0 and int(k) == k for k in p)):
            raise ValueError("hermite needs integer indices k >= 0")
        if self.tag == "table" and not self.path:
            raise ValueError("table descriptor needs a path")

    def __str__(self):
        if self.tag == "table":
            return f"table:{self.path}"
        if not self.params:
            return self.tag
        return self.tag + ":" + ",".join(_fmt_num(v) for v in self.params)


def _fmt_num(v) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def parse_descriptor(text: str) -> FunctionDescriptor:
    """Parse ``tag`` or ``tag:a,b`` (``table:path`` keeps the path verbatim)."""
    text = text.strip()
    tag, _, rest = text.partition(":")
    tag = tag.strip().lower()
    aliases = {"gauss": "gaussian", "f_alpha": "falpha", "phi0": "hermite"}
    if tag == "phi0" and not rest:
        return FunctionDescriptor("hermite", (0,))
    tag = aliases.get(tag, tag)
    if tag == "table":
        return FunctionDescriptor("table", (), rest.strip())
    params = tuple(float(s) for s in rest.split(",") if s.strip()) if rest else ()
    if tag == "hermite":
        if any(v != int(v) for v in params):
            raise ValueError("hermite needs integer indices k >= 0")
        params = tuple(int(v) for v in params)
    return FunctionDescriptor(tag, params)


def sample(desc: FunctionDescriptor, grid: Grid) -> SampledFunction:
    # local imports: kernels and hermite build on this module
    from . import kernels, hermite

    n = grid.dim
    r2 = grid.radius2()
    tag, p = desc.tag, desc.params
    if tag == "gaussian":
        vals = kernels.heat_kernel_r2(p[0], r2, n)
    elif tag == "poisson":
        vals = kernels.poisson_kernel_r2(p[0], r2, n)
    elif tag == "indicator":
        vals = (r2 <= p[0] ** 2).astype(float)
    elif tag == "falpha":
        if p[0] >= n:
            raise ValueError(f"falpha needs 0 < alpha < {n}")
        if np.any(r2 == 0.0):
            raise ValueError("singular sample point: falpha needs a grid that avoids the origin")
        vals = r2 ** (-p[0] / 2.0)
    elif tag == "hermite":
        idx = list(p) + [0] * (n - len(p))
        if len(idx) > n:
            raise ValueError("too many Hermite indices for the grid dimension")
        vals = np.ones(grid.shape)
        for k, c in zip(idx, grid.mesh()):
            vals = vals * hermite.hermite_function(k, c)
    elif tag == "omega":
        vals = kernels.omega_weight_r2(r2, n)
    elif tag == "gausswin":
        vals = np.exp(-np.pi * r2)
    elif tag == "const":
        vals = np.full(grid.shape, p[0] if p else 1.0)
    else:
        table = read_csv(desc.path)
        if table.grid != grid:
            raise ValueError(f"table grid {table.grid} does not match {grid}")
        return table
    return SampledFunction(grid, vals)


# ---------------------------------------------------------------------------
# quadrature and norms


def integrate(f: SampledFunction) -> complex:
    return csum_complex(f.values) * f.grid.cell


def lp_norm(f: SampledFunction, p: float, v=None) -> float:
    """Weighted ``L^p`` norm; ``v`` is an array or callable of the grid points."""
    a = np.abs(f.values)
    if v is not None:
        w = v(f.grid) if callable(v) else np.asarray(v, dtype=float)
        w = np.broadcast_to(w, a.shape)
        if np.any(w <= 0):
            raise ValueError("weight must be strictly positive")
    else:
        w = None
    if math.isinf(p):
        return float(np.max(a * w if w is not None else a))
    if p < 1:
        raise ValueError("p must be >= 1 or inf")
    s = a ** p if w is None else a ** p * w
    return (csum(s) * f.grid.cell) ** (1.0 / p)


def inner(f: SampledFunction, g: SampledFunction) -> complex:
    """``<f, g> = int f conj(g)``."""
    _check_same_grid(f, g)
    return csum_complex(f.values * np.conj(g.values)) * f.grid.cell


# ---------------------------------------------------------------------------
# Fourier transform


def _axis_phase(grid: Grid) -> tuple:
    """Per-axis factors turning the FFT into continuum transform samples."""
    N = grid.N
    j = np.arange(N)
    alt = np.where(j % 2 == 0, 1.0, -1.0)
    xi = grid.reciprocal().axis
    x0 = -grid.L + grid.shift * grid.step
    return alt, np.exp(-2j * np.pi * x0 * xi)


def fourier(f: SampledFunction) -> SampledFunction:
    g = f.grid
    alt, ph = _axis_phase(g)
    vals = np.asarray(f.values, dtype=complex)
    for ax in range(g.dim):
        vals = vals * _along(alt, ax, g.dim)
    out = scipy.fft.fftn(vals, workers=fft_workers())
    for ax in range(g.dim):
        out = out * _along(ph, ax, g.dim)
    return SampledFunction(g.reciprocal(), out * g.cell)


def inverse_fourier(F: SampledFunction, grid: Optional[Grid] = None) -> SampledFunction:
    """Inverse of :func:`fourier`; ``grid`` is the spatial grid to land on."""
    if grid is None:
        grid = Grid(F.grid.dim, F.grid.N / (4.0 * F.grid.L), F.grid.N, "none")
    if grid.reciprocal() != F.grid:
        raise ValueError("frequency samples are not on the reciprocal lattice of grid")
    alt, ph = _axis_phase(grid)
    vals = np.asarray(F.values, dtype=complex)
    for ax in range(grid.dim):
        vals = vals * _along(np.conj(ph), ax, grid.dim)
    out = scipy.fft.ifftn(vals, workers=fft_workers())
    for ax in range(grid.dim):
        out = out * _along(alt, ax, grid.dim)
    return SampledFunction(grid, out / grid.cell)


def _along(vec: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = vec.size
    return vec.reshape(shape)


# ---------------------------------------------------------------------------
# convolution


def _real_if(f_real: bool, arr: np.ndarray) -> np.ndarray:
    return arr.real.copy() if f_real else arr


def convolve(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """Linear convolution ``int f(y) g(x - y) dy`` restricted to the window.

    Both inputs are zero outside the window.  On half-step grids the sums
    ``x_j + x_m`` fall between grid points, and the result is moved onto the
    grid by a band-limited half-sample shift.
    """
    _check_same_grid(f, g)
    grid = f.grid
    N = grid.N
    full = fftconvolve(f.values, g.values, mode="full")
    if grid.offset == "half_step":
        full = _half_sample_shift(full)
        # after the shift, entry s sits at -2L + (s + 3/2) step
        sl = tuple(slice(N // 2 - 1, N // 2 - 1 + N) for _ in range(grid.dim))
    else:
        sl = tuple(slice(N // 2, N // 2 + N) for _ in range(grid.dim))
    out = full[sl] * grid.cell
    return SampledFunction(grid, _real_if(f.is_real and g.is_real, out))


def _half_sample_shift(arr: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation of ``arr`` at ``index + 1/2`` per axis."""
    out = np.asarray(arr)
    real = out.dtype.kind == "f"
    for ax in range(out.ndim):
        n = out.shape[ax]
        m = 1 << int(math.ceil(math.log2(2 * n)))
        spec = scipy.fft.fft(out, n=m, axis=ax, workers=fft_workers())
        k = scipy.fft.fftfreq(m) * m
        ph = np.exp(2j * np.pi * k * 0.5 / m)
        if m % 2 == 0:
            ph[m // 2] = np.cos(np.pi * 0.5)  # symmetric Nyquist handling
        spec = spec * _along(ph, ax, out.ndim)
        out = scipy.fft.ifft(spec, axis=ax, workers=fft_workers())
        out = np.take(out, np.arange(n), axis=ax)
    return out.real if real else out


def difference_lattice(grid: Grid) -> np.ndarray:
    """Points ``k * step`` for ``|k| < N`` per axis, trailing axis ``dim``."""
    d = (np.arange(2 * grid.N - 1) - (grid.N - 1)) * grid.step
    if grid.dim == 1:
        return d[:, None]
    a, b = np.meshgrid(d, d, indexing="ij")
    return np.stack([a, b], axis=-1)


def convolve_kernel(f: SampledFunction, kernel: Callable[[np.ndarray], np.ndarray],
                    normalize_to: Optional[float] = None) -> SampledFunction:
    """Convolve with a closed-form kernel sampled at exact point differences.

    ``kernel`` receives an array of difference vectors with a trailing axis of
    length ``dim``.  Works for either grid offset since ``x_i - y_j`` is always
    an integer multiple of the step.  With ``normalize_to`` the sampled kernel
    is rescaled so its Riemann sum equals that value.
    """
    grid = f.grid
    N = grid.N
    K = np.asarray(kernel(difference_lattice(grid)))
    if normalize_to is not None:
        mass = csum_complex(K) * grid.cell
        if mass == 0:
            raise ValueError("kernel has zero discrete mass")
        scale = normalize_to / mass
        K = K * (scale.real if scale.imag == 0 else scale)
    full = fftconvolve(f.values, K, mode="full")
    sl = tuple(slice(N - 1, 2 * N - 1) for _ in range(grid.dim))
    out = full[sl] * grid.cell
    return SampledFunction(grid, _real_if(f.is_real and np.isrealobj(K), out))


# ---------------------------------------------------------------------------
# CSV serialization

GRID_HEADER = "# dim,L,N,offset"


def write_csv(f: SampledFunction, path) -> None:
    from .io import atomic_write_text

    grid = f.grid
    lines = [GRID_HEADER, "# " + grid.header()]
    pts = grid.points().reshape(-1, grid.dim)
    vals = np.asarray(f.values, dtype=complex).ravel()
    for i in range(grid.size):
        coords = ",".join(repr(float(c)) for c in pts[i])
        lines.append(f"{i},{coords},{float(vals[i].real)!r},{float(vals[i].imag)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path) -> SampledFunction:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != GRID_HEADER:
            raise ValueError(f"{path}: missing grid header {GRID_HEADER!r}")
        meta = fh.readline().strip().lstrip("#").strip().split(",")
        grid = make_grid(int(meta[0]), float(meta[1]), int(meta[2]), meta[3].strip())
        vals = np.zeros(grid.size, dtype=complex)
        for row in csv.reader(fh):
            if not row:
                continue
            idx = int(row[0])
            vals[idx] = complex(float(row[-2]), float(row[-1]))
    if np.all(vals.imag == 0):
        vals = vals.real
    return SampledFunction(grid, vals)


def sampled_from(grid: Grid, fn: Callable[..., np.ndarray]) -> SampledFunction:
    """Evaluate ``fn(*mesh)`` on the grid."""
    return SampledFunction(grid, fn(*grid.mesh()))


def restrict_mask(grid: Grid, r_min: float = 0.0, r_max: Optional[float] = None) -> np.ndarray:
    r = np.sqrt(grid.radius2())
    mask = r > r_min
    if r_max is not None:
        mask &= r < r_max
    return mask


__all__ = [
    "Grid", "make_grid", "SampledFunction", "FunctionDescriptor", "parse_descriptor",
    "sample", "integrate", "lp_norm", "inner", "fourier", "inverse_fourier",
    "convolve", "convolve_kernel", "difference_lattice", "write_csv", "read_csv",
    "sampled_from", "restrict_mask", "csum", "csum_complex", "fft_workers",
]
