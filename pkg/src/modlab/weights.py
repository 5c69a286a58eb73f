"""Weights on phase space and their small text language.

Grammar::

    const | const:c | exp:c,beta | poly:s | prod(WX,WXI) | table:path

``exp`` and ``poly`` act on the joint vector ``z = (x, xi)``.  Inside
``prod`` the two factors act on ``x`` and on ``xi`` alone.  A table is a CSV
with header ``x,xi,value`` on a regular 1D x 1D lattice; it is interpolated
bilinearly and clamped outside its range.

Every weight evaluates in the log domain so that e.g. ``exp(|z|^2)`` at
``|z| = 32`` stays representable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator


def _sq(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.sum(p * p, axis=-1)


@dataclass(frozen=True)
class Weight:
    """A strictly positive weight ``v(x, xi)``.

    ``form`` is one of ``const``, ``exp``, ``poly``, ``prod``, ``table``.
    Points carry a trailing axis of length ``dim``.
    """

    form: str
    params: tuple = ()
    parts: tuple = ()
    path: Optional[str] = None
    _table: object = field(default=None, compare=False, repr=False)

    def log_eval(self, x, xi) -> np.ndarray:
        if self.form == "const":
            c = self.params[0] if self.params else 1.0
            return np.full(np.broadcast_shapes(np.shape(x)[:-1], np.shape(xi)[:-1]), math.log(c))
        if self.form == "exp":
            c, beta = self.params
            r2 = _sq(x) + _sq(xi)
            return c * r2 ** (beta / 2.0)
        if self.form == "poly":
            return self.params[0] / 2.0 * np.log1p(_sq(x) + _sq(xi))
        if self.form == "prod":
            wx, wxi = self.parts
            zx = np.zeros_like(np.asarray(x, dtype=float))
            zxi = np.zeros_like(np.asarray(xi, dtype=float))
            return wx.log_eval(x, zxi) + wxi.log_eval(zx, xi)
        if self.form == "table":
            x = np.asarray(x, dtype=float)[..., 0]
            xi = np.asarray(xi, dtype=float)[..., 0]
            x, xi = np.broadcast_arrays(x, xi)
            interp, lo, hi = self._table
            pts = np.stack([np.clip(x, lo[0], hi[0]), np.clip(xi, lo[1], hi[1])], axis=-1)
            vals = interp(pts)
            if np.any(vals <= 0):
                raise ValueError("weight table has non-positive values")
            return np.log(vals)
        raise ValueError(f"unknown weight form {self.form!r}")

    def __call__(self, x, xi) -> np.ndarray:
        return np.exp(self.log_eval(x, xi))

    def inverse(self) -> "Weight":
        return InverseWeight(self)

    def space(self, grid) -> np.ndarray:
        """Values at ``(x, 0)`` on a spatial grid, for ``lp_norm``."""
        pts = grid.points()
        return self(pts, np.zeros_like(pts))

    def __str__(self):
        if self.form == "const":
            return "const" if not self.params else f"const:{self.params[0]!r}"
        if self.form == "exp":
            return f"exp:{self.params[0]!r},{self.params[1]!r}"
        if self.form == "poly":
            return f"poly:{self.params[0]!r}"
        if self.form == "prod":
            return f"prod({self.parts[0]},{self.parts[1]})"
        return f"table:{self.path}"


class InverseWeight(Weight):
    def __init__(self, base: Weight):
        object.__setattr__(self, "form", "inverse")
        object.__setattr__(self, "params", ())
        object.__setattr__(self, "parts", (base,))
        object.__setattr__(self, "path", None)
        object.__setattr__(self, "_table", None)

    def log_eval(self, x, xi):
        return -self.parts[0].log_eval(x, xi)

    def inverse(self):
        return self.parts[0]

    def __str__(self):
        return f"1/{self.parts[0]}"


CONST = Weight("const")


def _load_table(path: str):
    xs, xis, vals = [], [], []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        head = [h.strip() for h in next(rows)]
        if head != ["x", "xi", "value"]:
            raise ValueError(f"{path}: expected header x,xi,value")
        for row in rows:
            if row:
                xs.append(float(row[0]))
                xis.append(float(row[1]))
                vals.append(float(row[2]))
    ux, uxi = np.unique(xs), np.unique(xis)
    if ux.size * uxi.size != len(vals):
        raise ValueError(f"{path}: table is not a full regular lattice")
    V = np.empty((ux.size, uxi.size))
    V[np.searchsorted(ux, xs), np.searchsorted(uxi, xis)] = vals
    if np.any(V <= 0):
        raise ValueError(f"{path}: weight must be strictly positive")
    interp = RegularGridInterpolator((ux, uxi), V, method="linear")
    return interp, (ux[0], uxi[0]), (ux[-1], uxi[-1])


def _split_top(text: str) -> list:
    depth, cur, out = 0, "", []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return out


def parse_weight(text: str) -> Weight:
    s = text.strip()
    if s == "const":
        return CONST
    if s.startswith("prod(") and s.endswith(")"):
        # factor parameters contain commas too, so accept the split that parses
        tokens = _split_top(s[5:-1])
        found = []
        for k in range(1, len(tokens)):
            try:
                found.append((parse_weight(",".join(tokens[:k])), parse_weight(",".join(tokens[k:]))))
            except ValueError:
                pass
        if len(found) != 1:
            raise ValueError(f"prod needs exactly two factors: {text!r}")
        return Weight("prod", parts=found[0])
    head, sep, rest = s.partition(":")
    if not sep:
        raise ValueError(f"cannot parse weight {text!r}")
    if head == "table":
        return Weight("table", path=rest, _table=_load_table(rest))
    try:
        nums = tuple(float(v) for v in rest.split(","))
    except ValueError:
        raise ValueError(f"bad number in weight {text!r}") from None
    if head == "const" and len(nums) == 1:
        if nums[0] <= 0:
            raise ValueError("constant weight must be positive")
        return Weight("const", nums)
    if head == "exp" and len(nums) == 2:
        if nums[1] <= 0:
            raise ValueError("exp weight needs beta > 0")
        return Weight("exp", nums)
    if head == "poly" and len(nums) == 1:
        return Weight("poly", nums)
    raise ValueError(f"cannot parse weight {text!r}")
