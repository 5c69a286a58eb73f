"""Identity checks shared by ``modlab verify`` and the acceptance tests.

Each check group returns a list of :class:`Check` rows.  ``value`` is the
measured slack quantity and ``bound`` its tolerance; ``passed`` compares the
two in the direction the row states.  Rows with ``asserted=False`` are
reported but do not affect the exit status.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from . import hermite, kernels
from .convergence import SemigroupSpec, apply_semigroup, forward_suite
from .grid import (SampledFunction, convolve_kernel, lp_norm, make_grid, parse_descriptor,
                   restrict_mask, sample)
from .maximal import (RadiiSet, check_domination, check_maximal_convolution_order,
                      check_stft_maximal_inequality, maximal_bruteforce, maximal_function,
                      maximal_modnorm_check)
from .stft import (poisson_window, stft, stft_at_frequency, stft_gaussian_closed,
                   stft_poisson_closed, moyal_check, translate_grid)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Check:
    group: str
    name: str
    value: float
    bound: float
    passed: bool
    asserted: bool = True

    def row(self):
        return [self.group, self.name, self.value, self.bound, self.passed, self.asserted]


HEADER = ["group", "check", "value", "bound", "passed", "asserted"]


def _le(group, name, value, bound, asserted=True) -> Check:
    value = float(value)
    return Check(group, name, value, float(bound), bool(value <= bound), asserted)


def _d(text, grid):
    return sample(parse_descriptor(text), grid)


# ---------------------------------------------------------------------------

MOYAL_SET = ("gaussian:0.05", "gaussian:0.5", "hermite:1", "hermite:4", "indicator:1", "omega")


def moyal_checks() -> List[Check]:
    """Cyclic pairs of the test set with windows ``exp(-pi y^2)`` and ``h_0.1``."""
    grid = make_grid(1, 16.0, 1024)
    fs = [_d(s, grid) for s in MOYAL_SET]
    w1, w2 = _d("gausswin", grid), _d("gaussian:0.1", grid)
    out = []
    for i, f1 in enumerate(fs):
        f2 = fs[(i + 1) % len(fs)]
        lhs, rhs = moyal_check(f1, f2, w1, w2)
        scale = lp_norm(f1, 2) * lp_norm(f2, 2) * lp_norm(w1, 2) * lp_norm(w2, 2)
        name = f"{MOYAL_SET[i]}|{MOYAL_SET[(i + 1) % len(fs)]}"
        out.append(_le("moyal", name, abs(lhs - rhs) / scale, 1e-6))
    return out


GAUSS_T0 = (1.0 / (4.0 * math.pi), 0.2)


def gaussian_closed_error(t0: float, printed: bool = False) -> float:
    """``sup |V - closed| / sup |closed|`` on a 64 x 64 lattice of ``[-8,8) x [-4,4)``."""
    grid = make_grid(1, 8.0, 1024)
    h = _d(f"gaussian:{t0!r}", grid)
    gxi = make_grid(1, 4.0, 64)
    V = stft(h, h, gxi, stride=16)
    X, XI = np.meshgrid(V.grid_x.axis, gxi.axis, indexing="ij")
    closed = stft_gaussian_closed(t0, X, XI, printed=printed)
    return float(np.max(np.abs(V.values - closed)) / np.max(np.abs(closed)))


def gaussian_closed_checks(printed_rows: bool = True) -> List[Check]:
    out = [_le("gaussian_closed", f"t0={t0!r}", gaussian_closed_error(t0), 1e-6) for t0 in GAUSS_T0]
    if printed_rows:
        out += [_le("gaussian_closed", f"t0={t0!r},printed", gaussian_closed_error(t0, True), 1e-6,
                    asserted=False) for t0 in GAUSS_T0]
    return out


POISSON_XI = (0.0, 0.5, 2.0)


def poisson_closed_error(xi: float, t0: float = 0.5, printed: bool = False) -> float:
    """``sup |V - closed| / sup |closed|`` on ``|x| <= 8`` (step 1/8) with window ``M_{-xi} p_t0``."""
    grid = make_grid(1, 64.0, 8192)
    p = _d(f"poisson:{t0!r}", grid)
    V = stft_at_frequency(p, poisson_window(t0, xi, grid), xi, stride=8)
    x = translate_grid(grid, 8).axis
    closed = stft_poisson_closed(t0, x, xi, printed=printed)
    keep = np.abs(x) <= 8.0
    return float(np.max(np.abs(V - closed)[keep]) / np.max(np.abs(closed)))


def poisson_closed_checks(printed_rows: bool = True) -> List[Check]:
    out = [_le("poisson_closed", f"xi={xi!r}", poisson_closed_error(xi), 1e-4) for xi in POISSON_XI]
    if printed_rows:
        out += [_le("poisson_closed", f"xi={xi!r},printed", poisson_closed_error(xi, printed=True), 1e-4,
                    asserted=False) for xi in POISSON_XI]
    return out


MEHLER_W = (0.1, 0.5, 0.9)


def mehler_error(w: float, K: int = 300) -> float:
    pts = np.linspace(-2.0, 2.0, 17)
    series, closed = hermite.mehler_check(w, pts[:, None], pts[None, :], K)
    return float(np.max(np.abs(series - closed)))


def mehler_checks() -> List[Check]:
    return [_le("mehler", f"w={w!r}", mehler_error(w), 1e-8) for w in MEHLER_W]


def hermite_route_errors(t: float):
    """``(heat, poisson)`` sup differences of kernel against spectral routes for ``h_0.25``."""
    N = 2048 if t < 0.3 else 1024
    grid = make_grid(1, 12.0, N, "half_step")
    f = _d("gaussian:0.25", grid)
    basis = hermite.HermiteBasis(grid)
    out = []
    for tag in ("hermite_heat", "hermite_poisson"):
        a = apply_semigroup(SemigroupSpec(tag, "kernel_convolution"), f, t).values
        b = apply_semigroup(SemigroupSpec(tag, "spectral"), f, t, basis).values
        out.append(float(np.max(np.abs(a - b))))
    return tuple(out)


def hermite_route_checks() -> List[Check]:
    out = []
    for t in (0.1, 0.5):
        heat, poi = hermite_route_errors(t)
        out.append(_le("hermite_routes", f"heat,t={t!r}", heat, 1e-6))
        out.append(_le("hermite_routes", f"poisson,t={t!r}", poi, 1e-6))
    return out


BOUND_T = (0.25, 1.0, 2.0)


def kernel_bound_checks(literal_rows: bool = True) -> List[Check]:
    grid = make_grid(1, 8.0, 256)
    out = []
    for t in BOUND_T:
        out.append(_le("kernel_bounds", f"upper,t={t!r}", kernels.check_hermite_upper_bound(t, grid), 1e-12))
        out.append(_le("kernel_bounds", f"lower,t={t!r}", kernels.check_hermite_lower_bound(t, grid), 1e-12))
        if literal_rows:
            out.append(_le("kernel_bounds", f"upper,t={t!r},printed",
                           kernels.check_hermite_upper_bound(t, grid, literal=True), 1e-12, asserted=False))
    gy = make_grid(1, 8.0, 256)
    for x in (0.0, 1.0, 2.0):
        lo, hi = kernels.check_poisson_sandwich(1.0, x, gy)
        ok = math.isfinite(lo) and math.isfinite(hi) and 0.0 < lo <= hi
        out.append(Check("kernel_bounds", f"sandwich_min,x={x!r}", lo, 0.0, ok))
        out.append(Check("kernel_bounds", f"sandwich_max,x={x!r}", hi, math.inf, ok))
    return out


def semigroup_errors():
    """``(heat, poisson, chapman_kolmogorov, min scaled eigenvalue)``."""
    g = make_grid(1, 8.0, 1024)
    c = convolve_kernel(_d("gaussian:0.2", g), kernels.kernel_function("heat", 0.1)).values
    heat = float(np.max(np.abs(c - kernels.heat_kernel(0.3, g.axis))))
    g = make_grid(1, 64.0, 8192)
    c = convolve_kernel(_d("poisson:0.5", g), kernels.kernel_function("poisson", 0.5)).values
    inside = np.abs(g.axis) < g.L / 2.0
    poi = float(np.max(np.abs(c - kernels.poisson_kernel(1.0, g.axis))[inside]))
    g = make_grid(1, 8.0, 512)
    X, Y = np.meshgrid(g.axis, g.axis, indexing="ij")
    A = kernels.hermite_heat_kernel(0.2, X, Y)
    B = kernels.hermite_heat_kernel(0.3, X, Y)
    C = kernels.hermite_heat_kernel(0.5, X, Y)
    ck = float(np.max(np.abs(A @ B * g.step - C)))
    eig = float(np.min(np.linalg.eigvalsh(A * g.step)))
    return heat, poi, ck, eig


def semigroup_checks() -> List[Check]:
    heat, poi, ck, eig = semigroup_errors()
    return [
        _le("semigroup", "heat", heat, 1e-8),
        _le("semigroup", "poisson", poi, 1e-4),
        _le("semigroup", "chapman_kolmogorov", ck, 1e-6),
        _le("semigroup", "hermite_psd", -eig, 1e-10),
    ]


DOMINATION_CASES = (("indicator:1", "gauss"), ("gaussian:0.25", "poisson"), ("indicator:1", "indicator"))
LEMMA_XI = (0.0, 0.5, 1.0, 2.0)


def maximal_checks(lemma_asserted: bool = False) -> List[Check]:
    g = make_grid(1, 8.0, 1024, "half_step")
    chi = _d("indicator:1", g)
    Mf = maximal_function(chi)
    i3 = int(np.argmin(np.abs(g.axis - 3.0)))
    out = [_le("maximal", "M_chi(3)", abs(Mf.values[i3] - 0.25), 2.0 * g.step)]
    g64 = make_grid(1, 8.0, 64, "half_step")
    f64 = _d("gaussian:0.5", g64).with_values(_d("gaussian:0.5", g64).values
                                              + _d("indicator:2", g64).values)
    radii = RadiiSet.default(g64)
    brute = maximal_bruteforce(f64, radii)
    out.append(_le("maximal", "bruteforce", np.max(np.abs(maximal_function(f64, radii).values - brute)), 1e-12))
    for data, prof in DOMINATION_CASES:
        out.append(_le("maximal", f"domination,{data},{prof}", check_domination(_d(data, g), prof), 1.05))
    for xi in LEMMA_XI:
        viol, scale = check_stft_maximal_inequality(chi, "gauss", xi)
        out.append(_le("maximal", f"lemma,xi={xi!r}", viol, 1e-3 * scale, asserted=lemma_asserted))
    viol, scale = check_maximal_convolution_order(chi, "gauss")
    out.append(_le("maximal", "order", viol, 1e-12 * max(scale, 1.0)))
    return out


MODNORM_DATA = ("gaussian:0.25", "falpha:0.5")
MODNORM_P = (2.0, 4.0)
MODNORM_N = (2048, 4096)


def modnorm_drift(data: str, p: float, Ns=MODNORM_N):
    """``(drift, norms)`` of ``||Mf||_{M^{p,inf}}`` under ``N -> 2N`` at ``L = 8``."""
    norms = []
    for N in Ns:
        f = _d(data, make_grid(1, 8.0, N, "half_step"))
        norms.append(maximal_modnorm_check(f, p)[0])
    return abs(norms[1] - norms[0]) / norms[0], norms


def modnorm_checks() -> List[Check]:
    out = []
    for data in MODNORM_DATA:
        for p in MODNORM_P:
            drift, norms = modnorm_drift(data, p)
            finite = all(math.isfinite(v) and v > 0 for v in norms)
            out.append(Check("modnorm", f"{data},p={p!r}", drift, 0.05, bool(finite and drift <= 0.05)))
    return out


def suite_checks() -> List[Check]:
    out = []
    for row, rep, ok in forward_suite():
        member = rep.membership.verdict == "member"
        final = rep.max_error[-1]
        passed = bool(ok and (not member or (rep.verdict == "converges" and final <= row.eps)))
        out.append(Check("suite", f"{row.name}:{rep.membership.verdict}/{rep.verdict}", final, row.eps, passed))
    return out


GROUPS: Dict[str, Callable[[], List[Check]]] = {
    "moyal": moyal_checks,
    "gaussian_closed": gaussian_closed_checks,
    "poisson_closed": poisson_closed_checks,
    "mehler": mehler_checks,
    "hermite_routes": hermite_route_checks,
    "kernel_bounds": kernel_bound_checks,
    "semigroup": semigroup_checks,
    "maximal": maximal_checks,
    "modnorm": modnorm_checks,
    "suite": suite_checks,
}


def run_checks(only: Optional[Iterable[str]] = None) -> List[Check]:
    names = list(GROUPS) if not only else list(only)
    unknown = [n for n in names if n not in GROUPS]
    if unknown:
        raise ValueError(f"unknown check group {unknown[0]!r}; choose from {', '.join(GROUPS)}")
    out = []
    for name in names:
        log.info("verify: %s", name)
        out.extend(GROUPS[name]())
    return out


def all_passed(checks: Iterable[Check]) -> bool:
    return all(c.passed for c in checks if c.asserted)
