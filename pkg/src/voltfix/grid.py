"""Uniform grids on ``[0, L]``, grid functions and Volterra quadrature."""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .expr import BinOp, Expr, Neg, Num, compile_expr, evaluate_array

RULES = ("trapezoid", "simpson")

KERNEL_VARS = ("t", "s", "x")


@dataclass(frozen=True)
class Grid:
    """Nodes ``t_i = i*h``, ``i = 0..n-1``, with ``h = L/(n-1)``."""

    L: float
    n: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"grid horizon must be positive, got {self.L}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs at least 2 nodes, got {self.n}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return self.L / (self.n - 1)

    @cached_property
    def t(self) -> np.ndarray:
        t = np.arange(self.n) * self.h
        t[-1] = self.L
        t.setflags(write=False)
        return t

    def refine(self) -> "Grid":
        """Grid with every other node shared with this one."""
        return Grid(self.L, 2 * self.n - 1)


class GridFunction:
    """Real function sampled on the nodes of a :class:`Grid`.

    Values are copied and made read-only on construction.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        v = np.array(values, dtype=np.float64)
        if v.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        self.grid = grid
        self.values = v

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n))

    @classmethod
    def from_expr(cls, grid, e, var="t"):
        e = compile_expr(e, (var,))
        v = evaluate_array(e, {var: grid.t})
        return cls(grid, np.broadcast_to(v, (grid.n,)))

    @property
    def t(self):
        return self.grid.t

    def __len__(self):
        return self.grid.n

    def __repr__(self):
        return f"GridFunction(L={self.grid.L}, n={self.grid.n})"

    def to_csv(self) -> str:
        return grid_function_csv(self)


def sup_norm_distance(x: GridFunction, y: GridFunction) -> float:
    if x.grid != y.grid:
        raise ValueError("grid functions live on different grids")
    return float(np.max(np.abs(x.values - y.values)))


def grid_function_csv(x: GridFunction) -> str:
    buf = io.StringIO(newline="")
    buf.write("t,x\n")
    for t, v in zip(x.t, x.values):
        buf.write(f"{t:.17g},{v:.17g}\n")
    return buf.getvalue()


def read_grid_function_csv(text: str) -> GridFunction:
    lines = text.strip("\n").split("\n")
    if lines[0] != "t,x":
        raise ValueError("expected header 't,x'")
    rows = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    grid = Grid(rows[-1, 0], len(rows))
    return GridFunction(grid, rows[:, 1])


# ---------------------------------------------------------------------------
# quadrature

def row_weights(i: int, h: float, rule: str = "trapezoid") -> np.ndarray:
    """Weights of the composite rule over nodes ``0..i``."""
    _check_rule(rule)
    w = np.zeros(i + 1)
    if i == 0:
        return w
    if rule == "trapezoid":
        w[:] = h
        w[0] = w[i] = 0.5 * h
        return w
    m = i if i % 2 == 0 else i - 1
    if m >= 2:
        w[: m + 1] = 2.0
        w[1:m:2] = 4.0
        w[0] = w[m] = 1.0
        w *= h / 3.0
    if m != i:
        w[i - 1] += 0.5 * h
        w[i] += 0.5 * h
    return w


def simpson(f, a: float, b: float, panels: int = 64) -> float:
    """Composite Simpson rule of a vectorized callable on ``[a, b]``."""
    if panels % 2:
        panels += 1
    s = np.linspace(a, b, panels + 1)
    w = row_weights(panels, (b - a) / panels, "simpson")
    return float(w @ np.broadcast_to(f(s), s.shape))


def cumulative_rule(v, h: float, rule: str = "trapezoid") -> np.ndarray:
    """Composite-rule integrals of samples ``v`` over ``[t_0, t_i]`` for every ``i``.

    Matches :func:`row_weights` row by row; ``v`` may hold several columns.
    """
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(v)
    if len(v) < 2:
        return out
    trap = 0.5 * h * (v[1:] + v[:-1])
    if rule == "trapezoid":
        out[1:] = np.cumsum(trap, axis=0)
        return out
    pairs = h / 3.0 * (v[0:-2:2] + 4.0 * v[1:-1:2] + v[2::2])
    even = np.cumsum(pairs, axis=0)
    out[2::2] = even
    out[1] = trap[0]
    out[3::2] = even[: len(out[3::2])] + trap[2::2][: len(out[3::2])]
    return out


def _check_rule(rule):
    if rule not in RULES:
        raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {RULES}")


def inner_integral(g, x: GridFunction, i: int, rule: str = "trapezoid") -> float:
    """``int_0^{t_i} g(t_i, s, x(s)) ds`` over the nodes ``s_0..s_i``."""
    g = compile_expr(g, KERNEL_VARS)
    if not 0 <= i < x.grid.n:
        raise IndexError(f"node index {i} outside 0..{x.grid.n - 1}")
    if i == 0:
        return 0.0
    t = x.t
    vals = evaluate_array(g, {"t": t[i], "s": t[: i + 1], "x": x.values[: i + 1]})
    vals = np.broadcast_to(vals, (i + 1,))
    return float(row_weights(i, x.grid.h, rule) @ vals)


def inner_integral_all(g, x: GridFunction, rule: str = "trapezoid") -> GridFunction:
    """The function ``t -> int_0^t g(t, s, x(s)) ds`` on the grid of ``x``."""
    q = KernelQuadrature(g, x.grid, rule)
    return GridFunction(x.grid, q(x.values))


def _split_product(e: Expr):
    """Flatten ``e`` into (sign, numerator factors, denominator factors)."""
    if isinstance(e, Neg):
        sign, num, den = _split_product(e.operand)
        return -sign, num, den
    if isinstance(e, BinOp) and e.op == "*":
        s1, n1, d1 = _split_product(e.left)
        s2, n2, d2 = _split_product(e.right)
        return s1 * s2, n1 + n2, d1 + d2
    if isinstance(e, BinOp) and e.op == "/":
        s1, n1, d1 = _split_product(e.left)
        return s1, n1, d1 + [e.right]
    return 1.0, [e], []


def _quotient(num, den):
    out = _product(num)
    return BinOp("/", out, _product(den)) if den else out


def _product(factors):
    if not factors:
        return Num(1.0)
    out = factors[0]
    for f in factors[1:]:
        out = BinOp("*", out, f)
    return out


class KernelQuadrature:
    """Evaluates ``I(t_i) = int_0^{t_i} g(t_i, s, x(s)) ds`` at every node.

    Sub-expressions of ``g`` that do not involve ``x`` are evaluated once.
    When ``g`` factors as ``k(t, s) * m(s, x)`` the integral is a single
    matrix product with the weighted ``k``; otherwise the full lower
    triangle is evaluated and summed by :func:`kernels.tri_rowsum`.

    Instances are callable on a 1-d array of node values, or on a 2-d array
    of shape ``(n, m)`` holding ``m`` functions column-wise.
    """

    def __init__(self, g, grid: Grid, rule: str = "trapezoid", backend=None):
        _check_rule(rule)
        self.g = compile_expr(g, KERNEL_VARS)
        self.grid = grid
        self.rule = rule
        self.backend = backend
        t = grid.t
        self._tcol = t[:, None]
        self._srow = t[None, :]
        self._mask = np.tri(grid.n, dtype=bool)
        self._memo = {}
        self._separable = self._try_separate()

    def _try_separate(self):
        sign, num, den = _split_product(self.g)
        factors = num + den
        if any("x" in f.variables and "t" in f.variables for f in factors):
            return None
        if not any({"t", "s"} <= f.variables for f in factors):
            # k(t, s) = k1(t) k2(s): one cumulative sum per application
            outer = _quotient([f for f in num if "s" not in f.variables and "x" not in f.variables],
                              [f for f in den if "s" not in f.variables and "x" not in f.variables])
            rest = _quotient([f for f in num if f.variables & {"s", "x"}], [f for f in den if f.variables & {"s", "x"}])
            scale = sign * np.broadcast_to(evaluate_array(outer, {"t": self.grid.t}), (self.grid.n,))
            return "rank1", scale, rest
        static = [f for f in num if "x" not in f.variables]
        static_den = [f for f in den if "x" not in f.variables]
        kern = _quotient(static, static_den)
        weighted = evaluate_array(kern, {"t": self._tcol, "s": self._srow}, mask=self._mask)
        weighted = np.broadcast_to(weighted, (self.grid.n, self.grid.n))
        W = kernels.weight_matrix(self.grid.n, self.grid.h, self.rule == "simpson")
        K = sign * np.where(self._mask, weighted, 0.0) * W
        dyn = _quotient([f for f in num if "x" in f.variables], [f for f in den if "x" in f.variables])
        return "dense", K, dyn

    def __call__(self, xvals):
        xvals = np.asarray(xvals, dtype=np.float64)
        if xvals.shape[0] != self.grid.n:
            raise ValueError(f"expected {self.grid.n} node values, got {xvals.shape[0]}")
        if self._separable is not None:
            kind, K, dyn_expr = self._separable
            s = self.grid.t if xvals.ndim == 1 else self.grid.t[:, None]
            m = np.broadcast_to(evaluate_array(dyn_expr, {"s": s, "x": xvals}), xvals.shape)
            if kind == "rank1":
                scale = K if xvals.ndim == 1 else K[:, None]
                return scale * cumulative_rule(m, self.grid.h, self.rule)
            return K @ m
        if xvals.ndim == 2:
            return np.stack([self(xvals[:, k]) for k in range(xvals.shape[1])], axis=1)
        G = evaluate_array(
            self.g,
            {"t": self._tcol, "s": self._srow, "x": xvals[None, :]},
            mask=self._mask,
            memo=self._memo,
            dynamic={"x"},
        )
        G = np.broadcast_to(G, (self.grid.n, self.grid.n))
        return kernels.tri_rowsum(G, self.grid.h, self.rule == "simpson", backend=self.backend)

    @property
    def separable(self) -> bool:
        return self._separable is not None
