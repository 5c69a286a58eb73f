"""Closed-form semigroup kernels, the omega envelope, and kernel-bound checks.

Point arguments follow one rule throughout: for ``n == 1`` a point is a
scalar (or an array of scalars); for ``n == 2`` it is an array whose trailing
axis has length 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_genlaguerre

from .grid import Grid, SampledFunction

DEFAULT_NODES = 64


def _r2(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if n == 1:
        return x * x
    return np.sum(x * x, axis=-1)


def _dot(x, y, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if n == 1:
        return x * y
    return np.sum(x * y, axis=-1)


def _check_t(t: float) -> None:
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")


# ---------------------------------------------------------------------------
# Euclidean kernels


def heat_kernel_r2(t: float, r2, n: int = 1):
    _check_t(t)
    return (4.0 * math.pi * t) ** (-n / 2.0) * np.exp(-np.asarray(r2) / (4.0 * t))


def heat_kernel(t: float, x, n: int = 1):
    """``(4 pi t)^(-n/2) exp(-|x|^2 / 4t)``."""
    return heat_kernel_r2(t, _r2(x, n), n)


def log_heat_kernel_r2(t: float, r2, n: int = 1):
    _check_t(t)
    return -(n / 2.0) * math.log(4.0 * math.pi * t) - np.asarray(r2) / (4.0 * t)


def poisson_kernel_r2(t: float, r2, n: int = 1):
    _check_t(t)
    c = math.exp(gammaln((n + 1) / 2.0)) * math.pi ** (-(n + 1) / 2.0)
    return c * (t / (t * t + np.asarray(r2))) ** ((n + 1) / 2.0)


def poisson_kernel(t: float, x, n: int = 1):
    """``Gamma((n+1)/2) pi^(-(n+1)/2) (t / (t^2 + |x|^2))^((n+1)/2)``."""
    return poisson_kernel_r2(t, _r2(x, n), n)


def log_poisson_kernel_r2(t: float, r2, n: int = 1):
    _check_t(t)
    c = gammaln((n + 1) / 2.0) - (n + 1) / 2.0 * math.log(math.pi)
    return c + (n + 1) / 2.0 * (math.log(t) - np.log(t * t + np.asarray(r2)))


def omega_weight_r2(r2, n: int = 1):
    r = np.sqrt(np.asarray(r2, dtype=float))
    return np.exp(-r * r / 2.0) * (1.0 + r) ** (-n / 2.0) * np.log(math.e + r) ** (-1.5)


def omega_weight(y, n: int = 1):
    """Two-sided envelope of the Hermite-Poisson kernel in ``y``."""
    return omega_weight_r2(_r2(y, n), n)


# ---------------------------------------------------------------------------
# Hermite kernels


def hermite_heat_kernel(t: float, x, y, n: int = 1, form: str = "meda"):
    """Kernel of ``exp(-tH)``, ``H = -Laplacian + |x|^2``.

    ``form="mehler"`` evaluates
    ``(2 pi sinh 2t)^(-n/2) exp(-[|x-y|^2 coth(2t) / 2 + x.y tanh t])``;
    ``form="meda"`` the same function in the variable ``s = tanh t``, which is
    stable as ``t -> 0``.  ``form="flipped"`` negates the ``x.y`` term; it is
    kept only to demonstrate that the spectral expansion rules it out.
    """
    _check_t(t)
    d2 = _r2(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), n)
    xy = _dot(x, y, n)
    if form == "meda":
        s = math.tanh(t)
        p2 = d2 + 4.0 * xy  # |x + y|^2
        pref = ((1.0 - s * s) / (4.0 * math.pi * s)) ** (n / 2.0)
        return pref * np.exp(-0.25 * (s * p2 + d2 / s))
    if form in ("mehler", "flipped"):
        sign = 1.0 if form == "mehler" else -1.0
        pref = (2.0 * math.pi * math.sinh(2.0 * t)) ** (-n / 2.0)
        return pref * np.exp(-(0.5 * d2 / math.tanh(2.0 * t) + sign * xy * math.tanh(t)))
    raise ValueError(f"unknown form {form!r}")


@lru_cache(maxsize=16)
def laguerre_nodes(M: int):
    """Gauss nodes/weights for ``int_0^inf tau^(-1/2) e^(-tau) F(tau) dtau``."""
    if M < 8:
        raise ValueError("need at least 8 quadrature nodes")
    return roots_genlaguerre(M, -0.5)


def subordination_nodes(t: float, M: int = DEFAULT_NODES, n: int = 1, rule: str = "logtrap"):
    """Times ``s_m`` and weights ``c_m`` with ``exp(-t sqrt(L)) ~ sum c_m exp(-s_m L)``.

    Valid for spectra ``L >= n``.  ``rule="logtrap"`` is the trapezoid rule in
    ``u = log tau``, where the integrand decays double-exponentially at both
    ends; ``rule="laguerre"`` is generalized Gauss-Laguerre, which converges
    slowly because of the ``exp(-a / tau)`` factor at the origin.
    """
    _check_t(t)
    if M < 8:
        raise ValueError("need at least 8 quadrature nodes")
    if rule == "laguerre":
        tau, w = laguerre_nodes(M)
        c = w / math.sqrt(math.pi)
    elif rule == "logtrap":
        u = np.linspace(math.log(n * t * t / 4.0) - 3.5, math.log(40.0), M)
        h = u[1] - u[0]
        tau = np.exp(u)
        c = h * np.exp(u / 2.0 - tau) / math.sqrt(math.pi)
        c[0] *= 0.5
        c[-1] *= 0.5
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return t * t / (4.0 * tau), c


def hermite_poisson_kernel(t: float, x, y, M: int = DEFAULT_NODES, n: int = 1,
                           return_change: bool = False, rule: str = "logtrap"):
    """Kernel of ``exp(-t sqrt(H))`` by subordination to the heat kernel.

    ``pi^(-1/2) int_0^inf e^(-tau) tau^(-1/2) h^H_{t^2/(4 tau)}(x, y) dtau``
    with ``M`` nodes.  With ``return_change`` the change against a ``2M``-node
    evaluation is returned alongside.
    """
    _check_t(t)

    def quad(m):
        s, c = subordination_nodes(t, m, n, rule)
        acc = 0.0
        for sk, ck in zip(s, c):
            acc = acc + ck * hermite_heat_kernel(sk, x, y, n)
        return acc

    val = quad(M)
    if return_change:
        return val, float(np.max(np.abs(quad(2 * M) - val)))
    return val


@dataclass(frozen=True)
class KernelSpec:
    tag: str
    t: float
    M: int = DEFAULT_NODES

    def __post_init__(self):
        if self.tag not in ("heat", "poisson", "hermite_heat", "hermite_poisson"):
            raise ValueError(f"unknown kernel {self.tag!r}")
        _check_t(self.t)
        if self.tag == "hermite_poisson" and self.M < 8:
            raise ValueError("hermite_poisson needs M >= 8")


# ---------------------------------------------------------------------------
# bound checks over grid squares


def _pair_chunks(grid: Grid, chunk: int = 64):
    """Yield ``(x, y)`` point blocks covering grid x grid."""
    pts = grid.points().reshape(-1, grid.dim)
    for i in range(0, pts.shape[0], chunk):
        xb = pts[i:i + chunk][:, None, :]
        yield xb, pts[None, :, :]


def _squeeze(p, n):
    return p[..., 0] if n == 1 else p


def check_hermite_upper_bound(t: float, grid: Grid, literal: bool = False) -> float:
    """Max of ``h^H_t(x,y) - (1 - s^2)^(n/2) h_s(x - y)``, ``s = tanh t``.

    The prefactor power ``n/2`` is what the Meda form gives directly.  With
    ``literal=True`` the power is fixed at 1, which only agrees when ``n = 2``
    and fails on the anti-diagonal ``x = -y`` in one dimension.
    """
    _check_t(t)
    n = grid.dim
    s = math.tanh(t)
    c = (1.0 - s * s) if literal else (1.0 - s * s) ** (n / 2.0)
    worst = -math.inf
    for xb, yb in _pair_chunks(grid):
        x, y = _squeeze(xb, n), _squeeze(yb, n)
        lhs = hermite_heat_kernel(t, x, y, n)
        worst = max(worst, float(np.max(lhs - c * heat_kernel(s, x - y, n))))
    return worst


def check_hermite_lower_bound(t: float, grid: Grid) -> float:
    """Max of ``lower(x,y) - h^H_t(x,y)`` for the Gaussian lower bound."""
    _check_t(t)
    n = grid.dim
    s = math.tanh(t)
    a = s / (1.0 + 9.0 * s * s)
    c = ((1.0 - s * s) / (1.0 + 9.0 * s * s)) ** (n / 2.0)
    worst = -math.inf
    for xb, yb in _pair_chunks(grid):
        x, y = _squeeze(xb, n), _squeeze(yb, n)
        lower = np.exp(-2.25 * s * _r2(x, n)) * c * heat_kernel(a, x - y, n)
        worst = max(worst, float(np.max(lower - hermite_heat_kernel(t, x, y, n))))
    return worst


def check_poisson_sandwich(t: float, x, grid_y: Grid, M: int = DEFAULT_NODES):
    """Return ``(min, max)`` of ``p^H_t(x, y) / omega(y)`` over the grid."""
    n = grid_y.dim
    y = _squeeze(grid_y.points(), n)
    xx = np.broadcast_to(np.asarray(x, dtype=float), np.shape(y))
    ratio = hermite_poisson_kernel(t, xx, y, M, n) / omega_weight(y, n)
    return float(np.min(ratio)), float(np.max(ratio))


def kernel_function(tag: str, t: float, n: int = 1):
    """Closed-form translation-invariant kernel ``k(d)`` for convolution."""
    if tag == "heat":
        return lambda d: heat_kernel_r2(t, np.sum(d * d, axis=-1), n)
    if tag == "poisson":
        return lambda d: poisson_kernel_r2(t, np.sum(d * d, axis=-1), n)
    raise ValueError(f"{tag} is not translation invariant")
