"""Command-line front end.

Every subcommand takes ``--config FILE``: plain ``key = value`` lines under
``[section]`` headers, where the section is named after the subcommand and
keys are the long flag names.  Flags given on the command line win over the
file.  ``converge --suite`` reads every other section as one suite row.

Exit codes: 0 success, 1 a verification failed, 2 bad input, 3 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .grid import OFFSETS, make_grid, parse_descriptor, sample, write_csv
from .io import csv_text, atomic_write_text
from .modnorm import MixedNormParams, parse_exponent

log = logging.getLogger("modlab")

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_IO = 0, 1, 2, 3

REPORT_HEADER = ["tag", "weight", "data", "t", "max_err", "mean_err", "verdict"]


class ConfigError(ValueError):
    def __init__(self, source: str, line: int, col: int, msg: str):
        super().__init__(f"{source}:{line}:{col}: {msg}")
        self.line, self.col = line, col


# ---------------------------------------------------------------------------
# value types; argparse reports their ValueError text


def exponent(text: str) -> float:
    try:
        v = parse_exponent(text)
    except ValueError:
        v = float("nan")
    if not v >= 1:
        raise ValueError("p must be ≥ 1 or inf")
    return v


def exponent_named(name: str) -> Callable[[str], float]:
    def conv(text):
        try:
            return exponent(text)
        except ValueError:
            raise ValueError(f"{name} must be ≥ 1 or inf") from None
    conv.__name__ = name
    return conv


def positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise ValueError(f"expected a positive number, got {text!r}")
    return v


def nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise ValueError(f"expected a number >= 0, got {text!r}")
    return v


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise ValueError(f"expected a positive integer, got {text!r}")
    return v


def float_list(text: str) -> Tuple[float, ...]:
    vals = tuple(float(v) for v in str(text).split(",") if v.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def t_list(text: str) -> Tuple[float, ...]:
    from .convergence import parse_t_values

    vals = parse_t_values(str(text))
    if not vals or any(not v > 0 for v in vals):
        raise ValueError("t values must be positive")
    return vals


def descriptor(text: str):
    parse_descriptor(text)
    return text.strip()


def weight(text: str):
    from .weights import parse_weight

    return str(parse_weight(text))


def boolean(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _argtype(conv):
    """Wrap a converter so argparse shows its message verbatim."""
    def wrapped(text):
        try:
            return conv(text)
        except (ValueError, TypeError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    wrapped.__name__ = getattr(conv, "__name__", "value")
    return wrapped


# ---------------------------------------------------------------------------
# option tables


@dataclass(frozen=True)
class Opt:
    dest: str
    conv: Callable
    default: object = None
    help: str = ""
    choices: Optional[Sequence[str]] = None
    flag: bool = False
    required: bool = False


def _grid_opts(L=8.0, N=1024, offset="none"):
    return [
        Opt("dim", positive_int, 1, "spatial dimension (1 or 2)", choices=None),
        Opt("L", positive_float, L, "half-width of the window [-L, L)^n"),
        Opt("N", positive_int, N, "samples per axis (even)"),
        Opt("offset", str, offset, "sample offset", choices=OFFSETS),
    ]


OUT = Opt("out", str, None, "output CSV path (stdout if omitted)")

OPTIONS: Dict[str, List[Opt]] = {
    "stft": _grid_opts(L=16.0, N=256) + [
        Opt("data", descriptor, None, "function descriptor, e.g. gaussian:0.25", required=True),
        Opt("window", descriptor, "gausswin", "window descriptor"),
        Opt("stride", positive_int, 1, "translate stride in samples"),
        OUT,
    ],
    "norm": _grid_opts(L=16.0, N=512) + [
        Opt("data", descriptor, None, "function descriptor", required=True),
        Opt("window", descriptor, "gausswin", "window descriptor"),
        Opt("weight", weight, "const", "weight, e.g. exp:-1,2 or prod(poly:1,const)"),
        Opt("p", exponent_named("p"), 2.0, "space exponent"),
        Opt("q", exponent_named("q"), 2.0, "frequency exponent"),
        Opt("stride", positive_int, 1, "translate stride in samples"),
        OUT,
    ],
    "kernels": _grid_opts(L=8.0, N=256) + [
        Opt("t", float_list, (0.25, 1.0, 2.0), "comma list of times"),
        Opt("x", float_list, (0.0, 1.0, 2.0), "points for the Hermite-Poisson sandwich"),
        Opt("literal", boolean, False, "also report the printed upper-bound prefactor", flag=True),
        OUT,
    ],
    "semigroup": _grid_opts() + [
        Opt("semigroup", str, "heat", "semigroup tag",
            choices=("heat", "poisson", "hermite_heat", "hermite_poisson")),
        Opt("method", str, "kernel_convolution", "route", choices=("kernel_convolution", "spectral")),
        Opt("data", descriptor, None, "function descriptor", required=True),
        Opt("t", positive_float, None, "time", required=True),
        Opt("M", positive_int, 64, "subordination nodes"),
        Opt("out", str, None, "output CSV path", required=True),
    ],
    "maximal": _grid_opts(offset="half_step") + [
        Opt("data", descriptor, None, "function descriptor", required=True),
        Opt("radii_max", positive_float, None, "largest radius (default L)"),
        Opt("profile", str, None, "report sup_t |phi_t * f| for this profile instead of M f",
            choices=("indicator", "gauss", "poisson")),
        Opt("out", str, None, "output CSV path", required=True),
    ],
    "converge": _grid_opts(offset="half_step") + [
        Opt("semigroup", str, "heat", "semigroup tag",
            choices=("heat", "poisson", "hermite_heat", "hermite_poisson")),
        Opt("method", str, "kernel_convolution", "route", choices=("kernel_convolution", "spectral")),
        Opt("data", descriptor, "gaussian:0.25", "nonnegative function descriptor"),
        Opt("weight", weight, "const", "weight for the class membership test"),
        Opt("p", exponent_named("p"), 2.0, "space exponent"),
        Opt("q", exponent_named("q"), 2.0, "frequency exponent"),
        Opt("t0", float_list, (0.2,), "comma list of kernel times for the membership test"),
        Opt("t_values", t_list, None, "decreasing times, comma list or dyadic:a:b"),
        Opt("excluded_radius", nonneg_float, 0.0, "skip |x| <= this radius"),
        Opt("eps", positive_float, 1e-2, "tolerance on the final error"),
        Opt("suite", boolean, False, "run suite rows (default suite unless the config has rows)",
            flag=True),
        OUT,
    ],
    "weightclass": [
        Opt("class_tag", str, "Dh", "weight class", choices=("Dh", "DP", "Domega")),
        Opt("weight", weight, "const", "weight"),
        Opt("p", exponent_named("p"), 2.0, "space exponent"),
        Opt("q", exponent_named("q"), 2.0, "frequency exponent"),
        Opt("t0", float_list, (0.2,), "comma list of kernel times"),
        Opt("radii", float_list, (8.0, 16.0, 32.0), "truncation radii"),
        OUT,
    ],
    "verify": [
        Opt("only", str, None, "comma list of check groups"),
        OUT,
    ],
}

ALIASES = {"kernels": ["verify-kernels"]}

HELP = {
    "stft": "short-time Fourier transform of a sampled function",
    "norm": "weighted modulation norm",
    "kernels": "Hermite kernel bound checks (slack CSV)",
    "semigroup": "apply a semigroup at one time",
    "maximal": "Hardy-Littlewood maximal function or a dilation sup",
    "converge": "t -> 0 convergence experiment or the forward suite",
    "weightclass": "weight class membership by truncation stability",
    "verify": "run the identity checks",
}


def _flag_name(dest: str) -> str:
    return "--class" if dest == "class_tag" else "--" + dest.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modlab", description="Modulation-space numerics toolkit.")
    parser.add_argument("--version", action="version", version=f"modlab {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(OPTIONS) + "}")
    sub.required = True
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name, aliases=ALIASES.get(name, []), help=HELP[name], description=HELP[name])
        sp.set_defaults(command=name)
        sp.add_argument("--config", help="key = value file with [section] headers")
        for o in opts:
            kw = dict(dest=o.dest, default=None, help=o.help)
            if o.flag:
                sp.add_argument(_flag_name(o.dest), action="store_const", const=True, **kw)
            else:
                sp.add_argument(_flag_name(o.dest), type=_argtype(o.conv), choices=o.choices,
                                metavar=o.dest.upper() if o.choices is None else None, **kw)
    return parser


# ---------------------------------------------------------------------------
# config files


def read_config(path: str) -> Dict[str, Dict[str, Tuple[str, int, int]]]:
    """``{section: {key: (value, line, col)}}`` with positions of the values.

    The header line of each section is stored under the key ``""``.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    out: Dict[str, Dict[str, Tuple[str, int, int]]] = {}
    section = None
    for ln, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in "#;":
            continue
        col = len(raw) - len(raw.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]") or len(stripped) < 3:
                raise ConfigError(path, ln, col, "malformed section header")
            section = stripped[1:-1].strip()
            if section in out:
                raise ConfigError(path, ln, col, f"duplicate section [{section}]")
            out[section] = {"": ("", ln, col)}
            continue
        sep = min((i for i in (raw.find("="), raw.find(":")) if i >= 0), default=-1)
        if sep < 0:
            raise ConfigError(path, ln, col, "expected 'key = value'")
        if section is None:
            raise ConfigError(path, ln, col, "key outside of a [section]")
        key = raw[:sep].strip().lower().replace("-", "_")
        if not key:
            raise ConfigError(path, ln, col, "missing key")
        value = raw[sep + 1:]
        vcol = sep + 2 + (len(value) - len(value.lstrip()))
        if key in out[section]:
            raise ConfigError(path, ln, col, f"duplicate key {key!r}")
        out[section][key] = (value.strip(), ln, vcol)
    return out


def _key_index(opts: Sequence[Opt]) -> Dict[str, Opt]:
    idx = {}
    for o in opts:
        idx[o.dest.lower()] = o
        if o.dest == "class_tag":
            idx["class"] = o
    return idx


def apply_config(args: argparse.Namespace, path: str) -> List:
    """Fill unset options from the file; returns suite row sections for ``converge``."""
    from .convergence import ROW_KEYS

    cfg = read_config(path)
    name = args.command
    opts = OPTIONS[name]
    index = _key_index(opts)
    rows = []
    for section, entries in cfg.items():
        head = entries.pop("")
        if section != name:
            if name != "converge":
                raise ConfigError(path, head[1], head[2], f"unknown section [{section}]")
            row_keys = {k.lower() for k in ROW_KEYS}
            for key, (value, ln, col) in entries.items():
                if key not in row_keys:
                    raise ConfigError(path, ln, 1, f"unknown key {key!r} in suite row [{section}]")
            rows.append((section, head[1], entries))
            continue
        for key, (value, ln, col) in entries.items():
            opt = index.get(key)
            if opt is None:
                raise ConfigError(path, ln, 1, f"unknown key {key!r} in [{section}]")
            try:
                conv = boolean if opt.flag else opt.conv
                val = conv(value)
            except (ValueError, TypeError) as exc:
                raise ConfigError(path, ln, col, f"{key}: {exc}") from None
            if opt.choices is not None and val not in opt.choices:
                raise ConfigError(path, ln, col, f"{key}: choose from {', '.join(opt.choices)}")
            if getattr(args, opt.dest) is None:
                setattr(args, opt.dest, val)
    return rows


def _rows_from_sections(path: str, sections) -> list:
    from .convergence import rows_from_config

    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str.lower
    cp.read_dict({s: {k: v[0] for k, v in e.items()} for s, _, e in sections})
    try:
        return rows_from_config(cp)
    except ValueError as exc:
        section = str(exc).split("]")[0].lstrip("[")
        where = next((ln for s, ln, _ in sections if s == section), 1)
        raise ConfigError(path, where, 1, str(exc)) from None


def parse_config(argv: Optional[Sequence[str]] = None):
    """Parse flags and the optional config file into a namespace; raises on bad input."""
    parser = build_parser()
    args = parser.parse_args(argv)
    args.rows = []
    if args.config:
        sections = apply_config(args, args.config)
        if sections:
            args.rows = _rows_from_sections(args.config, sections)
    for o in OPTIONS[args.command]:
        if getattr(args, o.dest) is None:
            if o.required:
                parser.error(f"{args.command}: {_flag_name(o.dest)} is required (flag or config key)")
            setattr(args, o.dest, o.default)
    if getattr(args, "N", None) is not None and args.N % 2:
        parser.error("N must be even")
    if getattr(args, "dim", 1) not in (1, 2):
        parser.error("dim must be 1 or 2")
    return args


# ---------------------------------------------------------------------------
# commands


def _emit(args, header, rows) -> None:
    text = csv_text(header, rows)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _grid(args):
    return make_grid(args.dim, args.L, args.N, args.offset)


def _fn(text, grid):
    return sample(parse_descriptor(text), grid)


def cmd_stft(args) -> int:
    from .stft import stft, write_phase_csv

    grid = _grid(args)
    V = stft(_fn(args.data, grid), _fn(args.window, grid), stride=args.stride)
    if args.out:
        write_phase_csv(V, args.out)
    else:
        import numpy as np

        vals = np.asarray(V.values).reshape(V.grid_x.size, V.grid_xi.size)
        rows = ([ix, ixi, float(vals[ix, ixi].real), float(vals[ix, ixi].imag)]
                for ix in range(vals.shape[0]) for ixi in range(vals.shape[1]))
        sys.stdout.write(csv_text(["ix", "ixi", "re", "im"], rows))
    return EXIT_OK


def cmd_norm(args) -> int:
    from .modnorm import log_modulation_norm
    from .weights import parse_weight

    grid = _grid(args)
    params = MixedNormParams(args.p, args.q)
    ln = log_modulation_norm(_fn(args.data, grid), _fn(args.window, grid), params,
                             parse_weight(args.weight), args.stride)
    norm = math.exp(ln) if ln < 709.0 else math.inf
    _emit(args, ["data", "window", "weight", "p", "q", "log_norm", "norm"],
          [[args.data, args.window, args.weight, args.p, args.q, ln, norm]])
    return EXIT_OK


def cmd_kernels(args) -> int:
    from . import kernels

    grid = _grid(args)
    rows, ok = [], True
    for t in args.t:
        checks = [("upper", kernels.check_hermite_upper_bound(t, grid), True),
                  ("lower", kernels.check_hermite_lower_bound(t, grid), True)]
        if args.literal:
            checks.append(("upper_printed", kernels.check_hermite_upper_bound(t, grid, literal=True), False))
        for name, slack, asserted in checks:
            passed = slack <= 1e-12
            ok = ok and (passed or not asserted)
            rows.append([name, t, "", args.L, args.N, slack, 1e-12, passed])
    gy = make_grid(1, args.L, args.N, args.offset)
    for x in args.x:
        lo, hi = kernels.check_poisson_sandwich(1.0, x, gy)
        passed = math.isfinite(lo) and math.isfinite(hi) and 0.0 < lo <= hi
        ok = ok and passed
        rows.append(["sandwich_min", 1.0, x, args.L, args.N, lo, 0.0, passed])
        rows.append(["sandwich_max", 1.0, x, args.L, args.N, hi, math.inf, passed])
    _emit(args, ["check", "t", "x", "L", "N", "value", "bound", "passed"], rows)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_semigroup(args) -> int:
    from .convergence import SemigroupSpec, apply_semigroup

    spec = SemigroupSpec(args.semigroup, args.method, args.M)
    grid = _grid(args)
    floor = spec.resolved_floor(grid)
    if args.t < floor:
        log.warning("t=%g is below the resolved floor %g", args.t, floor)
    write_csv(apply_semigroup(spec, _fn(args.data, grid), args.t), args.out)
    return EXIT_OK


def cmd_maximal(args) -> int:
    from .maximal import RadiiSet, dilation_sup, maximal_function

    grid = _grid(args)
    f = _fn(args.data, grid)
    if args.profile:
        t_max = args.radii_max if args.radii_max is not None else None
        from .maximal import default_t_list

        res = dilation_sup(f, args.profile, default_t_list(grid, t_max=t_max))
    else:
        res = maximal_function(f, RadiiSet.default(grid, args.radii_max))
    write_csv(res, args.out)
    return EXIT_OK


def _report_rows(rep):
    return list(rep.rows())


def cmd_converge(args) -> int:
    from .convergence import (CLASS_FOR, SemigroupSpec, SuiteRow, convergence_experiment,
                              default_rows, dyadic_sweep, forward_suite)
    from .modnorm import weight_class_membership
    from .weights import parse_weight

    if args.suite:
        results = forward_suite(args.rows or default_rows())
        rows, ok = [], True
        for row, rep, good in results:
            rows.extend(_report_rows(rep))
            ok = ok and good
            log.info("%s: membership %s, %s", row.name, rep.membership.verdict, rep.verdict)
        _emit(args, REPORT_HEADER, rows)
        return EXIT_OK if ok else EXIT_FAIL
    if args.rows:
        raise ValueError("suite rows in the config need --suite")
    spec = SemigroupSpec(args.semigroup, args.method)
    grid = _grid(args)
    f = _fn(args.data, grid)
    if args.t_values is None:
        floor = spec.resolved_floor(grid)
        t_values = [t for t in dyadic_sweep() if t >= floor]
    else:
        t_values = list(args.t_values)
    member = None
    if grid.dim == 1:
        member = weight_class_membership(CLASS_FOR[args.semigroup], parse_weight(args.weight),
                                         MixedNormParams(args.p, args.q), args.t0)
    rep = convergence_experiment(spec, f, t_values, args.excluded_radius, args.eps)
    rep.weight, rep.data = args.weight, args.data
    _emit(args, REPORT_HEADER, _report_rows(rep))
    if member is not None:
        log.info("membership %s, %s", member.verdict, rep.verdict)
        if member.verdict == "member" and rep.verdict != "converges":
            return EXIT_FAIL
    return EXIT_OK


def cmd_weightclass(args) -> int:
    from .modnorm import weight_class_membership
    from .weights import parse_weight

    rep = weight_class_membership(args.class_tag, parse_weight(args.weight),
                                  MixedNormParams(args.p, args.q), args.t0, args.radii)
    rows = [r + [rep.verdict] for r in rep.rows()]
    _emit(args, ["class", "t0", "R", "log_norm", "verdict_t0", "floor_limited", "verdict"], rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import HEADER, all_passed, run_checks

    only = [s.strip() for s in args.only.split(",") if s.strip()] if args.only else None
    checks = run_checks(only)
    _emit(args, HEADER, [c.row() for c in checks])
    for c in checks:
        if c.asserted and not c.passed:
            log.error("FAILED %s/%s: %r > %r", c.group, c.name, c.value, c.bound)
    return EXIT_OK if all_passed(checks) else EXIT_FAIL


COMMANDS = {
    "stft": cmd_stft, "norm": cmd_norm, "kernels": cmd_kernels, "semigroup": cmd_semigroup,
    "maximal": cmd_maximal, "converge": cmd_converge, "weightclass": cmd_weightclass,
    "verify": cmd_verify,
}


def run(args) -> int:
    try:
        return COMMANDS[args.command](args)
    except OSError as exc:
        print(f"modlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"modlab: {exc}", file=sys.stderr)
        return EXIT_PARSE


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_config(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"modlab: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"modlab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"modlab: {exc}", file=sys.stderr)
        return EXIT_PARSE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
