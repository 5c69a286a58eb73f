"""Semigroup application and t -> 0 convergence experiments.

Four semigroups: ``exp(-t Laplacian)`` (heat), ``exp(-t sqrt(Laplacian))``
(poisson), ``exp(-tH)`` (hermite_heat) and ``exp(-t sqrt(H))``
(hermite_poisson), with ``Laplacian`` meaning ``-Delta``.  Hermite tags run
either by kernel quadrature in ``(x, y)`` or spectrally.
"""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import hermite, kernels
from .grid import Grid, SampledFunction, convolve_kernel, csum, make_grid, parse_descriptor, restrict_mask, sample
from .modnorm import MixedNormParams, WeightClassReport, parse_exponent, weight_class_membership
from .weights import parse_weight

log = logging.getLogger(__name__)

TAGS = ("heat", "poisson", "hermite_heat", "hermite_poisson")
METHODS = ("kernel_convolution", "spectral")
SLACK = 0.10


@dataclass(frozen=True)
class SemigroupSpec:
    tag: str
    method: str = "kernel_convolution"
    M: int = kernels.DEFAULT_NODES
    K_max: Optional[int] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown semigroup {self.tag!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "spectral" and not self.tag.startswith("hermite"):
            raise ValueError(f"{self.tag} has no spectral route")

    def resolved_floor(self, grid: Grid) -> float:
        """Smallest ``t`` whose kernel still spans about four grid steps."""
        if self.method == "spectral":
            return 0.0
        if self.tag in ("heat", "hermite_heat"):
            return 8.0 * grid.step ** 2
        return 4.0 * grid.step


def _meda_band(s: float, step: float, N: int) -> int:
    """Half-width in samples beyond which ``exp(-|x-y|^2 / 4 tanh s)`` is below ``e^-40``."""
    return min(N - 1, int(math.ceil(math.sqrt(160.0 * math.tanh(s)) / step)) + 1)


def hermite_kernel_apply(f: SampledFunction, times: Sequence[float], weights: Sequence[float]) -> SampledFunction:
    """``sum_m c_m int h^H_{s_m}(x, y) f(y) dy`` by quadrature at the grid points."""
    grid = f.grid
    fv = np.asarray(f.values)
    out = np.zeros(grid.shape, dtype=fv.dtype if np.iscomplexobj(fv) else float)
    if grid.dim == 1:
        x = grid.axis
        N = grid.N
        i = np.arange(N)
        for s, c in zip(times, weights):
            b = _meda_band(s, grid.step, N)
            k = np.arange(-b, b + 1)
            j = i[:, None] + k[None, :]
            ok = (j >= 0) & (j < N)
            jc = np.clip(j, 0, N - 1)
            K = kernels.hermite_heat_kernel(s, x[:, None], x[jc])
            out = out + c * np.sum(np.where(ok, K * fv[jc], 0.0), axis=1)
        return SampledFunction(grid, out * grid.step)
    pts = grid.points().reshape(-1, 2)
    flat = fv.reshape(-1)
    res = np.zeros(flat.shape, dtype=out.dtype)
    for a in range(0, pts.shape[0], 256):
        xb = pts[a:a + 256][:, None, :]
        acc = 0.0
        for s, c in zip(times, weights):
            acc = acc + c * kernels.hermite_heat_kernel(s, xb, pts[None], n=2)
        res[a:a + 256] = acc @ flat
    return SampledFunction(grid, res.reshape(grid.shape) * grid.cell)


def apply_semigroup(spec: SemigroupSpec, f: SampledFunction, t: float,
                    basis: Optional[hermite.HermiteBasis] = None) -> SampledFunction:
    if not t > 0:
        raise ValueError("t must be positive")
    n = f.grid.dim
    if spec.tag in ("heat", "poisson"):
        return convolve_kernel(f, kernels.kernel_function(spec.tag, t, n))
    if spec.method == "spectral":
        basis = basis or hermite.HermiteBasis(f.grid, spec.K_max)
        if spec.tag == "hermite_heat":
            return hermite.hermite_heat_spectral(f, t, basis=basis)
        return hermite.hermite_poisson_spectral(f, t, basis=basis)
    if spec.tag == "hermite_heat":
        return hermite_kernel_apply(f, [t], [1.0])
    s, c = kernels.subordination_nodes(t, spec.M, n)
    keep = c > 1e-18 * np.max(c)
    return hermite_kernel_apply(f, s[keep], c[keep])


@dataclass
class ExperimentReport:
    t_values: list
    max_error: list
    mean_error: list
    excluded_radius: float
    verdict: str
    membership: Optional[WeightClassReport] = None
    tag: str = ""
    weight: str = ""
    data: str = ""
    slack: float = SLACK

    def rows(self):
        for t, mx, mn in zip(self.t_values, self.max_error, self.mean_error):
            yield [self.tag, self.weight, self.data, t, mx, mn, self.verdict]


def decide(max_error: Sequence[float], eps: float, slack: float = SLACK) -> str:
    """``converges`` iff the last four errors are nonincreasing within ``slack`` and the last is ``<= eps``."""
    tail = list(max_error[-4:])
    monotone = all(b <= (1.0 + slack) * a for a, b in zip(tail, tail[1:]))
    if monotone and tail[-1] <= eps:
        return "converges"
    if tail[-1] > (1.0 + slack) * tail[0]:
        return "diverges"
    return "stagnates"


def dyadic_sweep(k_min: int = 2, k_max: int = 12) -> list:
    return [2.0 ** -k for k in range(k_min, k_max + 1)]


def convergence_experiment(spec: SemigroupSpec, f: SampledFunction, t_values: Sequence[float],
                           excluded_radius: float = 0.0, eps: float = 1e-2,
                           reference: Optional[SampledFunction] = None) -> ExperimentReport:
    """Sup and mean of ``|T_t f - f|`` on ``excluded_radius < |x| < L/2`` for each ``t``."""
    t_values = [float(t) for t in t_values]
    if len(t_values) < 4:
        raise ValueError("need at least four t values")
    if any(b >= a for a, b in zip(t_values, t_values[1:])):
        raise ValueError("t values must be strictly decreasing")
    if excluded_radius < 0:
        raise ValueError("excluded_radius must be >= 0")
    grid = f.grid
    floor = spec.resolved_floor(grid)
    if t_values[-1] < floor * (1 - 1e-12):
        log.warning("t=%g is below the resolved floor %g for %s", t_values[-1], floor, spec.tag)
    mask = restrict_mask(grid, excluded_radius, grid.L / 2.0)
    if not np.any(mask):
        raise ValueError("empty admissible subgrid")
    ref = (reference or f).values[mask]
    basis = None
    if spec.method == "spectral":
        basis = hermite.HermiteBasis(grid, spec.K_max)
    mx, mn = [], []
    for t in t_values:
        err = np.abs(apply_semigroup(spec, f, t, basis).values[mask] - ref)
        mx.append(float(np.max(err)))
        mn.append(csum(err) / err.size)
    return ExperimentReport(t_values, mx, mn, float(excluded_radius), decide(mx, eps), tag=spec.tag)


# ---------------------------------------------------------------------------
# the forward suite

CLASS_FOR = {"heat": "Dh", "hermite_heat": "Dh", "poisson": "DP", "hermite_poisson": "Domega"}

DEFAULT_SUITE = """
[gauss-heat]
weight = const
data = gaussian:0.25
semigroup = heat
p = 2
q = 2
N = 4096

[falpha-heat]
weight = exp:-1,2
data = falpha:0.5
semigroup = heat
p = 4
q = 4
N = 8192
t0 = 0.05,0.1,0.2
t_values = dyadic:2:13,0.0001
excluded_radius = 0.5

[phi0-hermite-poisson]
weight = const
data = hermite:0
semigroup = hermite_poisson
method = spectral
p = 2
q = 2
N = 1024

[gauss-poisson]
weight = const
data = gaussian:0.25
semigroup = poisson
p = 2
q = 2
N = 8192
t_values = dyadic:2:7

[gauss-hermite-heat]
weight = const
data = gaussian:0.25
semigroup = hermite_heat
p = 2
q = 2
N = 2048
t_values = dyadic:2:11
"""

ROW_KEYS = {"weight", "data", "semigroup", "method", "p", "q", "dim", "L", "N", "offset",
            "t0", "t_values", "excluded_radius", "eps"}


@dataclass
class SuiteRow:
    name: str
    weight: str
    data: str
    semigroup: str
    method: str = "kernel_convolution"
    p: float = 2.0
    q: float = 2.0
    dim: int = 1
    L: float = 8.0
    N: int = 1024
    offset: str = "half_step"
    t0: tuple = (0.2,)
    t_values: Optional[tuple] = None
    excluded_radius: float = 0.0
    eps: float = 1e-2


def parse_t_values(text: str) -> tuple:
    """Comma list; ``dyadic:a:b`` expands to ``2^-a .. 2^-b``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.startswith("dyadic:"):
            _, a, b = part.split(":")
            out.extend(dyadic_sweep(int(a), int(b)))
        elif part:
            out.append(float(part))
    return tuple(out)


def rows_from_config(cp: configparser.ConfigParser) -> list:
    rows = []
    for name in cp.sections():
        sec = cp[name]
        unknown = set(sec.keys()) - {k.lower() for k in ROW_KEYS}
        if unknown:
            raise ValueError(f"[{name}]: unknown key {sorted(unknown)[0]!r}")
        missing = {"weight", "data", "semigroup"} - set(sec.keys())
        if missing:
            raise ValueError(f"[{name}]: missing key {sorted(missing)[0]!r}")
        row = SuiteRow(name, sec["weight"], sec["data"], sec["semigroup"])
        if "method" in sec:
            row.method = sec["method"]
        for key, conv in (("p", parse_exponent), ("q", parse_exponent), ("dim", int), ("l", float),
                          ("n", int), ("excluded_radius", float), ("eps", float)):
            if key in sec:
                setattr(row, {"l": "L", "n": "N"}.get(key, key), conv(sec[key]))
        if "offset" in sec:
            row.offset = sec["offset"]
        if "t0" in sec:
            row.t0 = tuple(float(v) for v in sec["t0"].split(","))
        if "t_values" in sec:
            row.t_values = parse_t_values(sec["t_values"])
        rows.append(row)
    return rows


def default_rows() -> list:
    cp = configparser.ConfigParser()
    cp.optionxform = str.lower
    cp.read_string(DEFAULT_SUITE)
    return rows_from_config(cp)


def run_row(row: SuiteRow, cache: Optional[dict] = None):
    """Membership and convergence for one row; returns ``(ExperimentReport, ok)``."""
    spec = SemigroupSpec(row.semigroup, row.method)
    grid = make_grid(row.dim, row.L, row.N, row.offset)
    f = sample(parse_descriptor(row.data), grid)
    cls = CLASS_FOR[row.semigroup]
    params = MixedNormParams(row.p, row.q)
    key = (cls, row.weight, row.p, row.q, row.t0)
    cache = {} if cache is None else cache
    if key not in cache:
        cache[key] = weight_class_membership(cls, parse_weight(row.weight), params, row.t0)
    member = cache[key]
    if row.t_values is None:
        floor = spec.resolved_floor(grid)
        t_values = [t for t in dyadic_sweep() if t >= floor]
    else:
        t_values = list(row.t_values)
    rep = convergence_experiment(spec, f, t_values, row.excluded_radius, row.eps)
    rep.membership = member
    rep.weight, rep.data = row.weight, row.data
    ok = not (member.verdict == "member" and rep.verdict != "converges")
    return rep, ok


def forward_suite(rows: Optional[Sequence[SuiteRow]] = None):
    """Run every row; a member weight whose data fails to converge is a suite failure."""
    rows = default_rows() if rows is None else rows
    cache = {}
    out = []
    for row in rows:
        rep, ok = run_row(row, cache)
        log.info("%s: %s / %s", row.name, rep.membership.verdict, rep.verdict)
        out.append((row, rep, ok))
    return out
