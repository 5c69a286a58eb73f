"""Weighted mixed norms, modulation norms and weight-class membership tests.

All norms are accumulated in the log domain: exponential weights such as
``exp(|z|^2)`` at ``|z| = 32`` overflow long before the norm itself does.
STFT rows are streamed, so no ``N x N`` phase-space array is ever stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .grid import Grid, SampledFunction, convolve_kernel, lp_norm, make_grid, sample, parse_descriptor
from .stft import PhaseSpaceFunction, log_abs_stft_gaussian_closed, stft_chunks, translate_grid
from .weights import CONST, Weight

CAUCHY_TOL = 1e-3
DEFAULT_RADII = (8, 16, 32)
# relative size of FFT round-off against the largest STFT sample
NOISE_FLOOR = 1e-13


@dataclass(frozen=True)
class MixedNormParams:
    p: float
    q: float

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (v >= 1):
                raise ValueError(f"{name} must be >= 1 or inf, got {v}")

    @staticmethod
    def _conj(r: float) -> float:
        if r == 1:
            return math.inf
        if math.isinf(r):
            return 1.0
        return r / (r - 1.0)

    def conjugate(self) -> "MixedNormParams":
        return MixedNormParams(self._conj(self.p), self._conj(self.q))


def parse_exponent(text: str) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "oo"):
        return math.inf
    return float(t)


class MixedAccumulator:
    """Streaming ``log ||F||_{L^{p,q}_v}``; rows arrive as blocks of translates."""

    def __init__(self, params: MixedNormParams, xi_shape: tuple, cell_x: float, cell_xi: float):
        self.params = params
        self.acc = np.full(xi_shape, -np.inf)
        self.log_cx = math.log(cell_x)
        self.log_cxi = math.log(cell_xi)

    def add(self, log_abs: np.ndarray, log_w) -> None:
        p = self.params.p
        with np.errstate(divide="ignore", invalid="ignore"):
            if math.isinf(p):
                blk = np.max(log_abs + log_w, axis=0)
                self.acc = np.maximum(self.acc, blk)
            else:
                blk = logsumexp(p * log_abs + log_w, axis=0)
                self.acc = np.logaddexp(self.acc, blk)

    def result(self) -> float:
        p, q = self.params.p, self.params.q
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = self.acc if math.isinf(p) else (self.acc + self.log_cx) / p
            if math.isinf(q):
                return float(np.max(inner))
            return float((logsumexp(q * inner) + self.log_cxi) / q)


def _points_x(grid_x: Grid, idx: np.ndarray) -> np.ndarray:
    """Translate coordinates for flat indices, shaped to broadcast against xi."""
    pts = grid_x.points().reshape(-1, grid_x.dim)[idx]
    return pts.reshape((idx.size,) + (1,) * grid_x.dim + (grid_x.dim,))


def _points_xi(grid_xi: Grid) -> np.ndarray:
    return grid_xi.points()[None]


def _log_abs(values) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(values))


def _log_weight(v: Optional[Weight], x, xi):
    if v is None:
        return 0.0
    lw = v.log_eval(x, xi)
    if np.any(np.isnan(lw)) or np.any(lw == -np.inf):
        raise ValueError("weight must be strictly positive")
    return lw


def log_mixed_norm(F: PhaseSpaceFunction, params: MixedNormParams, v: Optional[Weight] = None) -> float:
    acc = MixedAccumulator(params, F.grid_xi.shape, F.grid_x.cell, F.grid_xi.cell)
    idx = np.arange(F.grid_x.size)
    vals = F.values.reshape((F.grid_x.size,) + F.grid_xi.shape)
    acc.add(_log_abs(vals), _log_weight(v, _points_x(F.grid_x, idx), _points_xi(F.grid_xi)))
    return acc.result()


def mixed_norm(F: PhaseSpaceFunction, params: MixedNormParams, v: Optional[Weight] = None) -> float:
    """``( int ( int |F|^p v dx )^(q/p) dxi )^(1/q)`` by nested Riemann sums."""
    return math.exp(log_mixed_norm(F, params, v))


def log_modulation_norm(f: SampledFunction, window: SampledFunction, params: MixedNormParams,
                        v: Optional[Weight] = None, stride: int = 1) -> float:
    grid = f.grid
    xs = translate_grid(grid, stride)
    gxi = grid.reciprocal()
    acc = MixedAccumulator(params, gxi.shape, xs.cell, gxi.cell)
    pxi = _points_xi(gxi)
    for idx, rows in stft_chunks(f, window, gxi, stride):
        acc.add(_log_abs(rows), _log_weight(v, _points_x(xs, idx), pxi))
    return acc.result()


def modulation_norm(f: SampledFunction, window: SampledFunction, params: MixedNormParams,
                    v: Optional[Weight] = None, stride: int = 1) -> float:
    """``||V_window f||_{L^{p,q}_v}`` streamed over translates."""
    return math.exp(log_modulation_norm(f, window, params, v, stride))


def canonical_window(grid: Grid) -> SampledFunction:
    """``exp(-pi |y|^2)`` on the given grid."""
    return sample(parse_descriptor("gausswin"), grid)


# ---------------------------------------------------------------------------
# weight classes


@dataclass
class WeightClassReport:
    class_tag: str
    t0_tested: list
    norms: list  # one list per t0 (a single list for Domega), one value per radius
    verdict: str
    radii: tuple = DEFAULT_RADII
    log_norms: list = field(default_factory=list)
    per_t0: list = field(default_factory=list)
    floor_limited: list = field(default_factory=list)

    def rows(self):
        tags = self.t0_tested or [None]
        for t0, ln, ver, fl in zip(tags, self.log_norms, self.per_t0, self.floor_limited):
            for R, l in zip(self.radii, ln):
                yield [self.class_tag, "" if t0 is None else t0, R, l, ver, fl]


def cauchy_verdict(log_norms: Sequence[float], tol: float = CAUCHY_TOL) -> str:
    """Member when the last three truncations agree to ``tol`` relatively."""
    if len(log_norms) < 3:
        raise ValueError("need at least three truncations")
    ln = list(log_norms)
    if any(not math.isfinite(l) for l in ln):
        return "non_member"
    last = ln[-3:]
    step = [abs(b - a) for a, b in zip(last, last[1:])]
    if all(d <= math.log1p(tol) for d in step):
        return "member"
    if all(b - a > math.log1p(tol) for a, b in zip(last, last[1:])):
        return "non_member"
    return "inconclusive"


def _kernel_sample(class_tag: str, t0: Optional[float], grid: Grid, shift: float) -> SampledFunction:
    r2 = (grid.axis - shift) ** 2
    if class_tag == "Dh":
        vals = kernels.heat_kernel_r2(t0, r2)
    elif class_tag == "DP":
        vals = kernels.poisson_kernel_r2(t0, r2)
    elif class_tag == "Domega":
        vals = kernels.omega_weight_r2(r2)
    else:
        raise ValueError(f"unknown class {class_tag!r}")
    return SampledFunction(grid, vals)


def kernel_log_norm(class_tag: str, t0: Optional[float], R: float, params: MixedNormParams,
                    v_inv: Weight, shift: float = 0.0):
    """``log ||K(. - shift)||_{M^{p,q}_{v_inv}}`` on the truncation of radius ``R``.

    Returns ``(log_norm, floor_limited)``.  ``Dh`` uses the exact modulus of
    ``V_{h_t0} h_t0``; the other classes a numerical STFT with the canonical
    window, where samples below the FFT noise floor are tested for whether
    they carry the norm.
    """
    N = int(4 * R * R)
    grid = make_grid(1, float(R), N)
    xs = translate_grid(grid)
    gxi = grid.reciprocal()
    acc = MixedAccumulator(params, gxi.shape, xs.cell, gxi.cell)
    pxi = _points_xi(gxi)
    r2xi = gxi.axis[None, :] ** 2
    chunk = max(1, (1 << 21) // N)
    if class_tag == "Dh":
        for a in range(0, N, chunk):
            idx = np.arange(a, min(N, a + chunk))
            x = xs.axis[idx][:, None]
            la = log_abs_stft_gaussian_closed(t0, (x - shift) ** 2, r2xi)
            acc.add(la, _log_weight(v_inv, x[..., None], pxi))
        return acc.result(), False
    f = _kernel_sample(class_tag, t0, grid, shift)
    window = canonical_window(grid)
    clean = MixedAccumulator(params, gxi.shape, xs.cell, gxi.cell)
    top = -np.inf
    blocks = []
    for idx, rows in stft_chunks(f, window, gxi, chunk=chunk):
        la = _log_abs(rows)
        top = max(top, float(np.max(la)))
        lw = _log_weight(v_inv, _points_x(xs, idx), pxi)
        acc.add(la, lw)
        blocks.append((la, lw))
    floor = top + math.log(NOISE_FLOOR)
    for la, lw in blocks:
        clean.add(np.where(la > floor, la, -np.inf), lw)
    full, kept = acc.result(), clean.result()
    limited = not (math.isfinite(full) and abs(full - kept) <= math.log1p(CAUCHY_TOL))
    return full, limited


def weight_class_membership(class_tag: str, v: Weight, params: MixedNormParams,
                            t0_candidates: Iterable[float] = (0.2,),
                            radii: Sequence[float] = DEFAULT_RADII) -> WeightClassReport:
    """Is ``K_t0`` in ``M^{p',q'}_{1/v}`` for some ``t0``?  Decided by truncation stability."""
    if class_tag not in ("Dh", "DP", "Domega"):
        raise ValueError(f"unknown class {class_tag!r}")
    conj = params.conjugate()
    v_inv = v.inverse()
    t0s = [] if class_tag == "Domega" else [float(t) for t in t0_candidates]
    if class_tag != "Domega" and not t0s:
        raise ValueError("need at least one t0 candidate")
    all_logs, verdicts, limited = [], [], []
    for t0 in (t0s or [None]):
        logs, lim = [], False
        for R in radii:
            ln, fl = kernel_log_norm(class_tag, t0, R, conj, v_inv)
            logs.append(ln)
            lim = lim or fl
        ver = cauchy_verdict(logs)
        if lim and ver == "non_member":
            ver = "inconclusive"
        all_logs.append(logs)
        verdicts.append(ver)
        limited.append(lim)
    if "member" in verdicts:
        verdict = "member"
    elif all(v_ == "non_member" for v_ in verdicts):
        verdict = "non_member"
    else:
        verdict = "inconclusive"
    norms = [[_safe_exp(l) for l in logs] for logs in all_logs]
    return WeightClassReport(class_tag, t0s, norms, verdict, tuple(radii), all_logs, verdicts, limited)


def _safe_exp(l: float) -> float:
    return math.exp(l) if l < 709.0 else math.inf


def g_sup(class_tag: str, t0: Optional[float], R: float, params: MixedNormParams, v: Weight) -> float:
    """``log max g_t0(x)`` over ``x in {-R/4, 0, R/4}``, ``g_t0(x) = ||K(x - .)||_{M^{p',q'}_{1/v}}``."""
    conj = params.conjugate()
    return max(kernel_log_norm(class_tag, t0, R, conj, v.inverse(), s)[0] for s in (-R / 4, 0.0, R / 4))


def characterization_check(class_tag: str, v: Weight, params: MixedNormParams, f: SampledFunction,
                           t0: Optional[float] = 0.2, radii: Sequence[float] = DEFAULT_RADII):
    """Both sides of ``||K_t0 * f||_{M_u} <~ ||f||_{M_v}``; returns ``(ratio, report)``.

    ``u = min(1, u' / (C ||phi||_1))`` with ``u' = exp(-pi(|x|^2 + |xi|^2))``
    and ``C`` the largest ``g_t0`` found, which bounds ``|V_phi g_t0|``.  The
    report lists ``log C`` per truncation radius.  These grow without bound
    when ``v`` is outside the class.
    """
    if f.grid.dim != 1:
        raise ValueError("characterization_check is one-dimensional")
    logs = [g_sup(class_tag, t0, R, params, v) for R in radii]
    ver = cauchy_verdict(logs)
    report = WeightClassReport(class_tag, [] if t0 is None else [t0], [[_safe_exp(l) for l in logs]],
                               ver, tuple(radii), [logs], [ver], [False])
    window = canonical_window(f.grid)
    log_c = logs[-1] + math.log(lp_norm(window, 1))
    u = Weight("exp", (-math.pi, 2.0))
    u_capped = _CappedWeight(u, log_c)
    if class_tag == "Dh":
        Kf = convolve_kernel(f, kernels.kernel_function("heat", t0))
    elif class_tag == "DP":
        Kf = convolve_kernel(f, kernels.kernel_function("poisson", t0))
    else:
        Kf = convolve_kernel(f, lambda d: kernels.omega_weight_r2(np.sum(d * d, axis=-1)))
    lhs = log_modulation_norm(Kf, window, params, u_capped)
    rhs = log_modulation_norm(f, window, params, v)
    return math.exp(lhs - rhs), report


class _CappedWeight(Weight):
    """``min(1, base / e^log_c)``."""

    def __init__(self, base: Weight, log_c: float):
        object.__setattr__(self, "form", "capped")
        object.__setattr__(self, "params", (log_c,))
        object.__setattr__(self, "parts", (base,))
        object.__setattr__(self, "path", None)
        object.__setattr__(self, "_table", None)

    def log_eval(self, x, xi):
        return np.minimum(0.0, self.parts[0].log_eval(x, xi) - self.params[0])
