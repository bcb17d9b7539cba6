"""Sampled measure of noncompactness and the hull-of-image set iteration.

The measure of a bounded set ``X`` of functions on the half-line is

    mu(X) = omega0(X) + limsup_{t -> inf} diam X(t)

where ``omega0`` is the equicontinuity defect. On a finite ensemble over a
truncated grid both limits are replaced by proxies: ``omega0`` is the
ensemble modulus at the smallest scale of a geometric schedule, and the
lim sup is the largest spread over the final ``tail_fraction`` of nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .comparison import TOL, PropertyReport, _bad, _ok
from .grid import Grid, GridFunction
from .problem import IntegralProblem, find_r0
from .sampling import trig_sum_values
from .solver import Operator

DEFAULT_TAIL_FRACTION = 0.1
DEFAULT_ENSEMBLE_SIZE = 16
DEFAULT_STEPS = 10
DEFAULT_HULL_COUNT = 64
DEFAULT_SEED = 42
MONOTONE_TOL = 1e-9
CSV_HEADER = "step,omega0,tail_diam,mu_hat"


class Ensemble:
    """A nonempty collection of grid functions on one grid.

    Values are held as an ``(m, n)`` array, one member per row.
    """

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=np.float64, ndmin=2)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("an ensemble needs at least one member")
        if arr.shape[1] != grid.n:
            raise ValueError(f"members have {arr.shape[1]} values, grid has {grid.n} nodes")
        if not np.all(np.isfinite(arr)):
            raise ValueError("ensemble values must be finite")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    @classmethod
    def from_members(cls, members):
        members = list(members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        grid = members[0].grid
        if any(m.grid != grid for m in members):
            raise ValueError("ensemble members must share one grid")
        return cls(grid, np.stack([m.values for m in members]))

    @property
    def members(self):
        return [GridFunction(self.grid, row) for row in self.values]

    def __len__(self):
        return self.values.shape[0]

    def subset(self, indices) -> "Ensemble":
        return Ensemble(self.grid, self.values[np.asarray(indices)])

    def __repr__(self):
        return f"Ensemble(members={len(self)}, grid={self.grid})"


@dataclass(frozen=True)
class MncEstimate:
    omega0: float
    tail_diam: float
    epsilon_schedule: tuple = field(default=())

    def __post_init__(self):
        if not (self.omega0 >= 0 and self.tail_diam >= 0):
            raise ValueError("measure components must be nonnegative")

    @property
    def mu_hat(self) -> float:
        return self.omega0 + self.tail_diam


def _window(grid: Grid, eps: float) -> int:
    if not eps >= grid.h * (1 - 1e-9):
        raise ValueError(f"eps={eps:g} is below the grid spacing {grid.h:g}")
    return int(math.floor(eps / grid.h + 1e-9))


def modulus(x: GridFunction, eps: float, backend=None) -> float:
    """Largest ``|x(t) - x(s)|`` over node pairs with ``|t - s| <= eps``."""
    w = _window(x.grid, eps)
    return float(kernels.window_modulus(x.values[None, :], w, backend=backend)[0])


def ensemble_modulus(X: Ensemble, eps: float, backend=None) -> float:
    w = _window(X.grid, eps)
    return float(np.max(kernels.window_modulus(X.values, w, backend=backend)))


def diam_at(X: Ensemble, i: int) -> float:
    col = X.values[:, i]
    return float(col.max() - col.min())


def spread(X: Ensemble) -> np.ndarray:
    """``diam X(t_i)`` at every node."""
    return X.values.max(axis=0) - X.values.min(axis=0)


def default_schedule(grid: Grid) -> tuple:
    """``L/2, L/4, ...`` down to the last scale not below ``2h``."""
    out = []
    eps = grid.L / 2.0
    while eps >= 2.0 * grid.h * (1 - 1e-12):
        out.append(eps)
        eps /= 2.0
    if not out:
        out.append(2.0 * grid.h)
    return tuple(out)


def tail_nodes(n: int, tail_fraction: float) -> int:
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    return max(1, int(math.ceil(tail_fraction * n - 1e-9)))


def estimate_mu(X: Ensemble, eps_schedule=None, tail_fraction: float = DEFAULT_TAIL_FRACTION, backend=None) -> MncEstimate:
    schedule = tuple(float(e) for e in (eps_schedule if eps_schedule is not None else default_schedule(X.grid)))
    if not schedule:
        raise ValueError("empty epsilon schedule")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("epsilon schedule must be strictly decreasing")
    if schedule[-1] < 2.0 * X.grid.h * (1 - 1e-12):
        raise ValueError(f"smallest epsilon {schedule[-1]:g} is below 2h = {2 * X.grid.h:g}")
    k = tail_nodes(X.grid.n, tail_fraction)
    omega0 = ensemble_modulus(X, schedule[-1], backend=backend)
    tail = float(np.max(spread(X)[-k:]))
    return MncEstimate(omega0, tail, schedule)


def hull_sample(X: Ensemble, count: int, seed: int) -> Ensemble:
    """The members of ``X`` followed by ``count - len(X)`` random convex combinations.

    Weights are uniform on the simplex.
    """
    m = len(X)
    if count < m:
        raise ValueError(f"hull count {count} is smaller than the ensemble ({m} members)")
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(m), size=count - m)
    combos = weights @ X.values
    # a convex combination never leaves the per-node range of its members
    combos = np.clip(combos, X.values.min(axis=0), X.values.max(axis=0))
    return Ensemble(X.grid, np.vstack([X.values, combos]))


def mix(A: Ensemble, B: Ensemble, lam: float) -> Ensemble:
    """``lam*A + (1-lam)*B``: every pairwise combination."""
    if A.grid != B.grid:
        raise ValueError("ensembles live on different grids")
    vals = lam * A.values[:, None, :] + (1.0 - lam) * B.values[None, :, :]
    return Ensemble(A.grid, vals.reshape(-1, A.grid.n))


def apply_members(op: Operator, X: Ensemble) -> Ensemble:
    return Ensemble(X.grid, op.values(X.values.T).T)


def random_ensemble(p: IntegralProblem, grid: Grid, size: int, seed: int, r: float | None = None) -> Ensemble:
    """Seeded random trig sums inside the ball of radius ``r`` (``r0`` by default)."""
    if r is None:
        r = find_r0(p) if p.a is not None and p.b is not None else None
        r = 1.0 if r is None else r
    rng = np.random.default_rng(seed)
    lo, hi = p.value_range(r)
    return Ensemble(grid, np.stack([trig_sum_values(grid, rng, lo, hi) for _ in range(int(size))]))


def darbo_iterate(
    p: IntegralProblem,
    X0: Ensemble,
    n_steps: int = DEFAULT_STEPS,
    hull_count: int = DEFAULT_HULL_COUNT,
    seed: int = DEFAULT_SEED,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    rule: str = "trapezoid",
    eps_schedule=None,
) -> list:
    """``A_{n+1} = hull(T A_n)``; returns the estimate for ``A_0 .. A_{n_steps}``.

    Evaluation errors from ``T`` propagate.
    """
    op = Operator(p, X0.grid, rule)
    X = X0
    out = [estimate_mu(X, eps_schedule, tail_fraction)]
    for step in range(int(n_steps)):
        image = apply_members(op, X)
        X = hull_sample(image, max(hull_count, len(image)), seed + step + 1)
        out.append(estimate_mu(X, eps_schedule, tail_fraction))
    return out


def is_nonincreasing(estimates, tol: float = MONOTONE_TOL) -> bool:
    mu = [e.mu_hat for e in estimates]
    return all(b <= a + tol for a, b in zip(mu, mu[1:]))


def estimates_csv(estimates) -> str:
    lines = [CSV_HEADER]
    for k, e in enumerate(estimates):
        lines.append(f"{k},{e.omega0:.17g},{e.tail_diam:.17g},{e.mu_hat:.17g}")
    return "\n".join(lines) + "\n"


def check_inequality_2_1(
    p: IntegralProblem,
    X: Ensemble,
    hull_count: int | None = None,
    seed: int = DEFAULT_SEED,
    tol: float = TOL,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    rule: str = "trapezoid",
    name: str = "set_contraction",
) -> PropertyReport:
    """Compare ``Phi(L(mu(hull TX)))`` with ``Psi(L(mu(X)))``, ``L`` the accumulated density."""
    tr = p.triple
    op = Operator(p, X.grid, rule)
    image = apply_members(op, X)
    count = hull_count if hull_count is not None else 4 * len(image)
    image = hull_sample(image, max(count, len(image)), seed)
    before = estimate_mu(X, tail_fraction=tail_fraction)
    after = estimate_mu(image, tail_fraction=tail_fraction)
    lhs = float(tr.Phi(tr.Lambda(after.mu_hat)))
    rhs = float(tr.Psi(tr.Lambda(before.mu_hat)))
    if lhs > rhs + tol:
        return _bad(name, [("mu_X", before.mu_hat), ("mu_TX", after.mu_hat), ("lhs", lhs), ("rhs", rhs)])
    return _ok(name, note=f"mu_X={before.mu_hat:.6g} mu_TX={after.mu_hat:.6g}")
