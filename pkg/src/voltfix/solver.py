"""Fixed points of ``(Tx)(t) = f(t, int_0^t g(t, s, x(s)) ds, x(t))`` on a grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comparison import PropertyReport, _bad, _ok, TOL
from .expr import EvalError, evaluate_array
from .grid import Grid, GridFunction, KernelQuadrature, sup_norm_distance
from .problem import IntegralProblem, find_r0
from .sampling import trig_sum_values

MODES = ("picard", "pointwise-implicit")
BRACKET_SAMPLES = 1025
BRACKET_EXPANSIONS = 3


class ScalarSolveError(RuntimeError):
    def __init__(self, message, node):
        self.node = node
        super().__init__(message)


class Operator:
    """``T`` for one problem on one grid; reuses the kernel quadrature across calls."""

    def __init__(self, p: IntegralProblem, grid: Grid, rule: str = "trapezoid", backend=None):
        self.p = p
        self.grid = grid
        self.rule = rule
        self.quad = KernelQuadrature(p.g, grid, rule, backend)

    def inner(self, values):
        try:
            return self.quad(values)
        except EvalError as err:
            raise self._locate(err, "inner integral") from None

    def f(self, inner, values):
        t = self.grid.t if np.ndim(values) == 1 else self.grid.t[:, None]
        try:
            v = evaluate_array(self.p.f, {"t": t, "x": inner, "y": values})
        except EvalError as err:
            raise self._locate(err, "f") from None
        return np.broadcast_to(v, np.shape(values))

    def values(self, values):
        """``T`` on raw node values; 2-d input holds one function per column."""
        values = np.asarray(values, dtype=np.float64)
        return np.array(self.f(self.inner(values), values))

    def __call__(self, x: GridFunction) -> GridFunction:
        if x.grid != self.grid:
            raise ValueError("grid function lives on a different grid")
        return GridFunction(self.grid, self.values(x.values))

    def _locate(self, err, where):
        idx = err.index
        node = idx[0] if idx else None
        msg = f"{err.detail} while evaluating {where}"
        if node is not None and node < self.grid.n:
            msg += f" at node {node} (t={self.grid.t[node]:.6g})"
        out = EvalError(msg, err.position, idx)
        out.node = node
        return out


def apply_T(p: IntegralProblem, x: GridFunction, rule: str = "trapezoid") -> GridFunction:
    return Operator(p, x.grid, rule)(x)


@dataclass
class SolverConfig:
    mode: str = "picard"
    tol: float = 1e-10
    max_iter: int = 200
    initial: str = "zero"
    grid_n: int = 2001
    rule: str = "trapezoid"
    bracket_radius: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveResult:
    solution: GridFunction
    iterations: int
    residual: float
    converged: bool
    history: list = field(default_factory=list)
    mode: str = "picard"
    message: str = ""

    def report(self) -> str:
        lines = [
            f"converged={str(self.converged).lower()}",
            f"iterations={self.iterations}",
            f"residual={self.residual:.17g}",
            f"mode={self.mode}",
        ]
        v = self.solution.values
        lines.append(f"range={v.min():.17g},{v.max():.17g}")
        if self.message:
            lines.append(f"message={self.message}")
        return "\n".join(lines) + "\n"


def initial_iterate(grid: Grid, initial: str = "zero") -> GridFunction:
    if initial in ("zero", "", None):
        return GridFunction.zeros(grid)
    return GridFunction.from_expr(grid, initial)


def solve(p: IntegralProblem, cfg: SolverConfig | None = None, x0: GridFunction | None = None) -> SolveResult:
    """Iterate to a fixed point of ``T``.

    ``picard`` repeats ``x <- Tx``. ``pointwise-implicit`` freezes the inner
    integral from the previous sweep and solves ``u = f(t_i, I_i, u)`` at
    every node. A run stops when ``sup|x - Tx| <= tol``; evaluation failures
    and exhausted iterations return ``converged=False`` with the iterate of
    smallest residual.
    """
    cfg = cfg or SolverConfig()
    grid = x0.grid if x0 is not None else p.grid(cfg.grid_n)
    op = Operator(p, grid, cfg.rule)
    x = x0 if x0 is not None else initial_iterate(grid, cfg.initial)
    if cfg.mode == "picard":
        return _picard(op, x, cfg)
    return _pointwise(op, x, cfg)


class _Best:
    def __init__(self, x):
        self.x, self.r = x, np.inf

    def offer(self, x, r):
        if r < self.r:
            self.x, self.r = x, r


def _picard(op, x, cfg):
    history = []
    best = _Best(x)
    for k in range(cfg.max_iter + 1):
        try:
            Tx = op(x)
        except (EvalError, ValueError) as err:
            return SolveResult(best.x, k, best.r, False, history, cfg.mode, str(err))
        r = sup_norm_distance(x, Tx)
        best.offer(x, r)
        if r <= cfg.tol:
            return SolveResult(x, k, r, True, history, cfg.mode)
        if k == cfg.max_iter:
            break
        history.append(r)
        x = Tx
    return SolveResult(best.x, cfg.max_iter, best.r, False, history, cfg.mode, "iteration limit reached")


def _pointwise(op, x, cfg):
    radius = cfg.bracket_radius
    if radius is None:
        r0 = find_r0(op.p) if op.p.a is not None and op.p.b is not None else None
        radius = (r0 if r0 is not None else 10.0) + 1.0
    history = []
    best = _Best(x)
    for k in range(cfg.max_iter + 1):
        try:
            inner = op.inner(x.values)
            Tx = GridFunction(op.grid, op.f(inner, x.values))
        except (EvalError, ValueError) as err:
            return SolveResult(best.x, k, best.r, False, history, cfg.mode, str(err))
        r = sup_norm_distance(x, Tx)
        best.offer(x, r)
        if r <= cfg.tol:
            return SolveResult(x, k, r, True, history, cfg.mode)
        if k == cfg.max_iter:
            break
        try:
            new = GridFunction(op.grid, solve_nodes(op, inner, x.values, radius))
        except (ScalarSolveError, ValueError) as err:
            return SolveResult(best.x, k, best.r, False, history, cfg.mode, str(err))
        history.append(sup_norm_distance(new, x))
        x = new
    return SolveResult(best.x, cfg.max_iter, best.r, False, history, cfg.mode, "iteration limit reached")


def solve_nodes(op: Operator, inner, guess, radius, samples=BRACKET_SAMPLES, max_steps=200):
    """Solve ``u = f(t_i, inner_i, u)`` at every node at once.

    Each node's root is bracketed by scanning ``[-radius, radius]`` (doubled
    up to three times when no sign change is found). Among several roots the
    one where ``|df/du| < 1`` and closest to ``guess`` is taken, so the
    result matches the limit of the plain iteration. Brackets are then
    narrowed by Newton steps that fall back to bisection.
    """
    t = op.grid.t
    n = len(t)
    f = op.p.f

    def h(tt, ii, u):
        v = evaluate_array(f, {"t": tt, "x": ii, "y": u}, mask=False)
        shape = np.broadcast_shapes(np.shape(tt), np.shape(ii), np.shape(u))
        return u - np.broadcast_to(v, shape)

    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    exact = np.full(n, np.nan)
    todo = np.arange(n)
    R = float(radius)
    for _ in range(BRACKET_EXPANSIONS + 1):
        u = np.linspace(-R, R, samples)
        H = h(t[todo, None], inner[todo, None], u[None, :])
        finite = np.isfinite(H)
        zero = finite & (H == 0)
        change = finite[:, :-1] & finite[:, 1:] & (np.sign(H[:, :-1]) * np.sign(H[:, 1:]) < 0)
        slope = np.diff(H, axis=1) / (u[1] - u[0])
        mid = 0.5 * (u[:-1] + u[1:])
        score = np.abs(mid[None, :] - guess[todo, None]) + np.where((slope > 0) & (slope < 2), 0.0, 1e6)
        score = np.where(change, score, np.inf)
        zscore = np.where(zero, np.abs(u[None, :] - guess[todo, None]), np.inf)
        j = np.argmin(score, axis=1)
        jz = np.argmin(zscore, axis=1)
        rows = np.arange(len(todo))
        has_change = np.isfinite(score[rows, j])
        has_zero = np.isfinite(zscore[rows, jz])
        use_zero = has_zero & (~has_change | (zscore[rows, jz] <= score[rows, j]))
        exact[todo[use_zero]] = u[jz[use_zero]]
        sel = has_change & ~use_zero
        lo[todo[sel]] = u[j[sel]]
        hi[todo[sel]] = u[j[sel] + 1]
        todo = todo[~(sel | use_zero)]
        if todo.size == 0:
            break
        R *= 2.0
    if todo.size:
        i = int(todo[0])
        raise ScalarSolveError(
            f"no root of u = f(t, I, u) in [-{R:g}, {R:g}] at node {i} (t={t[i]:.6g})", i
        )

    out = exact.copy()
    idx = np.nonzero(np.isnan(exact))[0]
    if idx.size:
        out[idx] = _newton_bisect(lambda ii, u: h(t[ii], inner[ii], u), idx, lo[idx], hi[idx], max_steps)
    return out


def _newton_bisect(h, idx, lo, hi, max_steps):
    hlo = h(idx, lo)
    u = 0.5 * (lo + hi)
    active = np.ones(len(idx), dtype=bool)
    for _ in range(max_steps):
        a = np.nonzero(active)[0]
        if a.size == 0:
            break
        ua = u[a]
        hu = h(idx[a], ua)
        done = (hu == 0) | (hi[a] - lo[a] <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(ua)))
        left = np.sign(hu) == np.sign(hlo[a])
        lo[a] = np.where(left, ua, lo[a])
        hlo[a] = np.where(left, hu, hlo[a])
        hi[a] = np.where(left, hi[a], ua)
        delta = 1e-7 * np.maximum(1.0, np.abs(ua))
        d = (h(idx[a], ua + delta) - hu) / delta
        with np.errstate(all="ignore"):
            nxt = ua - hu / d
        bisect = ~np.isfinite(nxt) | (nxt <= lo[a]) | (nxt >= hi[a])
        nxt = np.where(bisect, 0.5 * (lo[a] + hi[a]), nxt)
        u[a] = np.where(done, ua, nxt)
        active[a[done]] = False
    return u


# ---------------------------------------------------------------------------


def random_pair_values(p: IntegralProblem, grid: Grid, count: int, r: float, seed: int):
    rng = np.random.default_rng(seed)
    lo, hi = p.value_range(r)
    X = np.stack([trig_sum_values(grid, rng, lo, hi) for _ in range(count)], axis=1)
    Y = np.stack([trig_sum_values(grid, rng, lo, hi) for _ in range(count)], axis=1)
    return X, Y


def contraction_probe(
    p: IntegralProblem,
    pairs: int = 100,
    r: float = 1.0,
    seed: int = 0,
    grid_n: int = 2001,
    rule: str = "trapezoid",
    tol: float = TOL,
    name: str = "pointwise_contraction",
) -> PropertyReport:
    """Check ``Phi(L|Tx-Ty|) <= Psi(L|x-y|) + Psi(L(2 a(t) int_0^t |b|))`` at every node.

    ``L`` is the accumulated density. Pairs are seeded random trig sums in
    the ball of radius ``r`` (its nonnegative half for nonnegative problems).
    """
    if not r > 0:
        raise ValueError("r must be positive")
    grid = p.grid(grid_n)
    op = Operator(p, grid, rule)
    X, Y = random_pair_values(p, grid, pairs, r, seed)
    return probe_pairs(p, op, X, Y, tol, name)


def probe_pairs(p, op, X, Y, tol=TOL, name="pointwise_contraction"):
    tr = p.triple
    try:
        TX, TY = op.values(X), op.values(Y)
    except EvalError as err:
        return _bad(name, [("error", err.position if err.position is not None else -1)], note=str(err))
    slack = tr.Psi(tr.Lambda(2.0 * p.kernel_envelope(op.grid.t)))[:, None]
    lhs = tr.Phi(tr.Lambda(np.abs(TX - TY)))
    rhs = tr.Psi(tr.Lambda(np.abs(X - Y))) + slack
    bad = np.argwhere(lhs > rhs + tol)
    if bad.size:
        i, k = bad[0]
        return _bad(name, [("pair", k), ("t", op.grid.t[i]), ("lhs", lhs[i, k]), ("rhs", rhs[i, k])])
    return _ok(name, note=f"{X.shape[1]} pairs, min slack {np.min(rhs - lhs):.3g}")
