"""Comparison functions and their sampled property checks.

A :class:`ComparisonTriple` bundles the control function ``psi`` (in ``u``),
the dominating function ``phi_big`` (in ``u``) and the density
``phi_density`` (in ``gamma``). ``Lambda(u) = int_0^u phi_density`` is
computed by :func:`accumulated_density`.

Every check samples a finite grid and returns a :class:`PropertyReport`;
"pass" always means "pass on the sample", never a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import BinOp, EvalError, Expr, Neg, Num, Var, compile_expr, evaluate_array, is_constant, constant_value

TOL = 1e-9
TOL_MONO = 1e-12
DEFAULT_U_MAX = 100.0
DEFAULT_POINTS = 10_000
# iterates of psi = ln(1+u) decay like 2/n, so 200 steps stall
# near 1e-2; 5000 steps reach 4e-4.
DEFAULT_N_MAX = 5000
DEFAULT_DECAY_TOL = 1e-3
DEFAULT_RESOLUTION = 64
DEFAULT_LEMMA_POINTS = (0.1, 1.0, 10.0, 100.0)
DEFAULT_EPSILONS = (1e-6, 1e-3, 1.0)


@dataclass
class PropertyReport:
    """Outcome of one sampled check.

    ``witness`` is a list of ``(point, value)`` pairs locating the first
    violation; it is ``None`` for passing reports.
    """

    name: str
    passed: bool
    witness: list | None = None
    note: str = ""
    assumed: bool = False

    def __post_init__(self):
        if not self.passed and not self.witness:
            raise ValueError(f"failed report {self.name!r} needs a witness")

    @property
    def status(self) -> str:
        if self.assumed:
            return "assumed"
        return "pass" if self.passed else "fail"

    def to_line(self) -> str:
        if self.witness:
            w = ";".join(f"{_fmt(a)},{_fmt(b)}" for a, b in self.witness)
        else:
            w = "none"
        return f"property={self.name} status={self.status} witness={w}"

    def __bool__(self):
        return self.passed


def _fmt(v):
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def _ok(name, note=""):
    return PropertyReport(name, True, None, note)


def _bad(name, witness, note=""):
    return PropertyReport(name, False, [(a, b) for a, b in witness], note)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonTriple:
    psi: Expr
    phi_big: Expr
    phi_density: Expr
    check_domain: float = DEFAULT_U_MAX
    check_points: int = DEFAULT_POINTS
    preset: str | None = field(default=None, compare=False)

    @classmethod
    def from_strings(cls, psi="ln(1+u)", phi_big="u", phi_density="1", **kw):
        return cls(
            compile_expr(psi, ("u",)),
            compile_expr(phi_big, ("u",)),
            compile_expr(phi_density, ("gamma",)),
            **kw,
        )

    def __post_init__(self):
        if not self.check_domain > 0:
            raise ValueError("check_domain must be positive")
        if int(self.check_points) < 2:
            raise ValueError("check_points must be at least 2")

    @property
    def samples(self) -> np.ndarray:
        return np.linspace(0.0, self.check_domain, int(self.check_points))

    def Psi(self, u):
        return _eval(self.psi, "u", u)

    def Phi(self, u):
        return _eval(self.phi_big, "u", u)

    def density(self, gamma):
        return _eval(self.phi_density, "gamma", gamma)

    def Lambda(self, u, resolution=DEFAULT_RESOLUTION):
        return accumulated_density(self, u, resolution)

    @property
    def tag(self) -> str:
        return classify(self)


def _eval(e, var, u):
    v = evaluate_array(e, {var: np.asarray(u, dtype=np.float64)})
    out = np.broadcast_to(v, np.shape(u)).astype(np.float64)
    return float(out) if out.ndim == 0 else out


def accumulated_density(triple: ComparisonTriple, u, resolution: int = DEFAULT_RESOLUTION):
    """``Lambda(u) = int_0^u phi_density(gamma) d gamma`` by composite Simpson.

    Vectorized over ``u``. A constant density ``c`` gives ``c*u`` exactly,
    so ``phi_density = 1`` makes ``Lambda`` the identity.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr < 0):
        raise ValueError("Lambda is defined for u >= 0 only")
    e = triple.phi_density
    if is_constant(e):
        out = constant_value(e) * u_arr
        return float(out) if out.ndim == 0 else out
    panels = int(resolution) + int(resolution) % 2
    z = np.linspace(0.0, 1.0, panels + 1)
    w = np.full(panels + 1, 2.0)
    w[1:panels:2] = 4.0
    w[0] = w[-1] = 1.0
    w /= 3.0 * panels
    flat = u_arr.reshape(-1)
    out = np.empty_like(flat)
    chunk = max(1, 2_000_000 // (panels + 1))
    for lo in range(0, flat.size, chunk):
        uu = flat[lo : lo + chunk]
        nodes = uu[:, None] * z[None, :]
        vals = np.broadcast_to(evaluate_array(e, {"gamma": nodes}), nodes.shape)
        out[lo : lo + chunk] = uu * (vals @ w)
    out = out.reshape(u_arr.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# sampled checks on a single expression


def _samples(domain, N):
    if np.ndim(domain) == 0:
        lo, hi = 0.0, float(domain)
    else:
        lo, hi = map(float, domain)
    return np.linspace(lo, hi, int(N))


def _single_var(e):
    vs = sorted(e.variables)
    return vs[0] if vs else "u"


def _values(e, pts, var):
    return np.broadcast_to(evaluate_array(e, {var: pts}), pts.shape)


def check_nondecreasing(e: Expr, domain=DEFAULT_U_MAX, N=DEFAULT_POINTS, tol_mono=TOL_MONO, name="nondecreasing"):
    u = _samples(domain, N)
    v = _values(e, u, _single_var(e))
    bad = np.nonzero(v[1:] < v[:-1] - tol_mono)[0]
    if bad.size:
        k = bad[0]
        return _bad(name, [(u[k], v[k]), (u[k + 1], v[k + 1])])
    return _ok(name)


def check_concave(e: Expr, domain=DEFAULT_U_MAX, N=DEFAULT_POINTS, tol=TOL, name="concave"):
    """Midpoint concavity on pairs ``(u_k, u_{k+2s})`` for strides ``s = 1, 2, 4, ...``."""
    u = _samples(domain, N)
    var = _single_var(e)
    v = _values(e, u, var)
    s = 1
    while 2 * s < len(u):
        a, b = u[: -2 * s], u[2 * s :]
        mid = 0.5 * (a + b)
        vm = _values(e, mid, var)
        bad = np.nonzero(vm < 0.5 * (v[: -2 * s] + v[2 * s :]) - tol)[0]
        if bad.size:
            k = bad[0]
            return _bad(name, [(a[k], v[k]), (mid[k], vm[k]), (b[k], v[k + 2 * s])])
        s *= 2
    return _ok(name)


def check_subadditive(e: Expr, domain=DEFAULT_U_MAX, N=DEFAULT_POINTS, tol=TOL, name="subadditive"):
    """``e(a+b) <= e(a) + e(b)`` for every sample ``a`` against ~40 geometric ``b``."""
    u = _samples(domain, N)
    var = _single_var(e)
    v = _values(e, u, var)
    idx = np.unique(np.geomspace(1, len(u) - 1, 40).astype(int))
    for j in idx:
        b = u[j]
        keep = u + b <= u[-1]
        a = u[keep]
        va = v[keep]
        vs = _values(e, a + b, var)
        bad = np.nonzero(vs > va + v[j] + tol)[0]
        if bad.size:
            k = bad[0]
            return _bad(name, [(a[k], va[k]), (b, v[j]), (a[k] + b, vs[k])])
    return _ok(name)


def check_dominates_identity(e: Expr, domain=DEFAULT_U_MAX, N=DEFAULT_POINTS, tol=TOL, name="dominates_identity"):
    u = _samples(domain, N)
    v = _values(e, u, _single_var(e))
    bad = np.nonzero(v < u - tol)[0]
    if bad.size:
        k = bad[0]
        return _bad(name, [(u[k], v[k])])
    return _ok(name)


def check_below_identity(e: Expr, domain=DEFAULT_U_MAX, N=DEFAULT_POINTS, tol=TOL, name="below_identity"):
    """``e(u) < u - tol`` at every positive sample."""
    u = _samples(domain, N)[1:]
    v = _values(e, u, _single_var(e))
    bad = np.nonzero(~(v < u - tol))[0]
    if bad.size:
        k = bad[0]
        return _bad(name, [(u[k], v[k])])
    return _ok(name)


def check_nonnegative(e: Expr, domain=DEFAULT_U_MAX, N=DEFAULT_POINTS, tol=TOL, name="nonnegative"):
    u = _samples(domain, N)
    v = _values(e, u, _single_var(e))
    bad = np.nonzero(v < -tol)[0]
    if bad.size:
        k = bad[0]
        return _bad(name, [(u[k], v[k])])
    return _ok(name)


def check_vanishes_only_at_zero(e: Expr, domain=DEFAULT_U_MAX, N=DEFAULT_POINTS, tol=TOL, name="vanishes_only_at_zero"):
    """``e(0) ~ 0`` and ``e(u) > tol`` for positive samples."""
    u = _samples(domain, N)
    v = _values(e, u, _single_var(e))
    if abs(v[0]) > tol:
        return _bad(name, [(u[0], v[0])])
    bad = np.nonzero(v[1:] <= tol)[0]
    if bad.size:
        k = bad[0] + 1
        return _bad(name, [(u[k], v[k])])
    return _ok(name)


# ---------------------------------------------------------------------------
# checks on the triple


def iterate_psi(triple: ComparisonTriple, t0, n_max: int = 200):
    """``[psi^k(t0) for k = 0..n_max]``. ``t0`` may be an array."""
    seq = [np.asarray(t0, dtype=np.float64)]
    for _ in range(int(n_max)):
        seq.append(np.broadcast_to(evaluate_array(triple.psi, {"u": seq[-1]}), seq[0].shape))
    if seq[0].ndim == 0:
        return [float(v) for v in seq]
    return np.stack(seq)


def check_lemma1_equivalence(
    triple: ComparisonTriple,
    ts: Sequence[float] = DEFAULT_LEMMA_POINTS,
    n_max: int = DEFAULT_N_MAX,
    decay_tol: float = DEFAULT_DECAY_TOL,
    tol: float = TOL,
    name="iterates_vanish_iff_below_identity",
):
    """Compare "psi^n_max(t) < decay_tol" with "psi(t) < t - tol" at each ``t > 0``.

    Meaningful only for nondecreasing ``psi``.
    """
    ts = np.asarray(ts, dtype=np.float64)
    if np.any(ts <= 0):
        raise ValueError("sample points must be positive")
    v = ts
    for _ in range(int(n_max)):
        v = np.broadcast_to(evaluate_array(triple.psi, {"u": v}), ts.shape)
    decays = v < decay_tol
    one = np.broadcast_to(evaluate_array(triple.psi, {"u": ts}), ts.shape)
    below = one < ts - tol
    bad = np.nonzero(decays != below)[0]
    if bad.size:
        k = bad[0]
        return _bad(
            name,
            [(ts[k], v[k]), (ts[k], one[k])],
            note=f"psi^{n_max}(t) {'<' if decays[k] else '>='} {decay_tol:g} but psi(t) "
            f"{'<' if below[k] else '>='} t",
        )
    return _ok(name)


def check_phi_positivity(triple: ComparisonTriple, epsilons=DEFAULT_EPSILONS, name="density_integral_positive"):
    eps = np.asarray(epsilons, dtype=np.float64)
    if np.any(eps <= 0):
        raise ValueError("epsilons must be positive")
    lam = np.atleast_1d(accumulated_density(triple, eps))
    bad = np.nonzero(~(lam > 0))[0]
    if bad.size:
        k = bad[0]
        return _bad(name, [(eps[k], lam[k])])
    return _ok(name)


def comparison_suite(
    triple: ComparisonTriple,
    n_max: int = DEFAULT_N_MAX,
    decay_tol: float = DEFAULT_DECAY_TOL,
    lemma_points=DEFAULT_LEMMA_POINTS,
) -> list[PropertyReport]:
    """Every sampled requirement on ``(psi, phi_big, phi_density)``."""
    U, N = triple.check_domain, triple.check_points
    psi, Phi, dens = triple.psi, triple.phi_big, triple.phi_density
    checks = [
        ("psi_nonnegative", lambda n: check_nonnegative(psi, U, N, name=n)),
        ("psi_nondecreasing", lambda n: check_nondecreasing(psi, U, N, name=n)),
        ("psi_concave", lambda n: check_concave(psi, U, N, name=n)),
        ("psi_below_identity", lambda n: check_below_identity(psi, U, N, name=n)),
        ("psi_iterates_vanish_iff_below_identity", lambda n: check_lemma1_equivalence(triple, lemma_points, n_max, decay_tol, name=n)),
        ("phi_big_nonnegative", lambda n: check_nonnegative(Phi, U, N, name=n)),
        ("phi_big_nondecreasing", lambda n: check_nondecreasing(Phi, U, N, name=n)),
        ("phi_big_subadditive", lambda n: check_subadditive(Phi, U, N, name=n)),
        ("phi_big_dominates_identity", lambda n: check_dominates_identity(Phi, U, N, name=n)),
        ("phi_big_vanishes_only_at_zero", lambda n: check_vanishes_only_at_zero(Phi, U, N, name=n)),
        ("density_nonnegative", lambda n: check_nonnegative(dens, U, N, name=n)),
        ("density_integral_positive", lambda n: check_phi_positivity(triple, name=n)),
    ]
    reports = [_guarded(name, fn) for name, fn in checks]
    reports.append(PropertyReport("upper_semicontinuity", True, assumed=True, note="not checkable by sampling"))
    return reports


def _guarded(name, fn):
    try:
        return fn(name)
    except EvalError as err:
        where = err.position if err.position is not None else -1
        return _bad(name, [("position", where)], note=f"evaluation failed: {err.detail}")


# ---------------------------------------------------------------------------
# presets

PRESETS = {
    # phi_big = identity: the integral condition with a general comparison function
    "aghajani": dict(psi="ln(1+u)", phi_big="u", phi_density="1+gamma"),
    # phi_big = identity, linear psi: integral-type contraction
    "branciari": dict(psi="0.5*u", phi_big="u", phi_density="1+gamma"),
    # phi_big = identity, linear psi, unit density: mu(TX) <= k mu(X)
    "darbo": dict(psi="0.5*u", phi_big="u", phi_density="1"),
    # worked integral equation; phi_big = u is the k -> 1 limit of k*u
    "example32": dict(psi="ln(1+u)", phi_big="u", phi_density="1"),
}

EXAMPLE32_PROBLEM = dict(
    f="sin(t)+ln(1+x)+ln(1+y)",
    g="(1/(t^2+1))*exp(0-s^2)*cos(x)",
    a="1/(t^2+1)",
    b="exp(0-s^2)",
    L=10.0,
)


def preset_triple(name: str, **kw) -> ComparisonTriple:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return ComparisonTriple.from_strings(**PRESETS[name], preset=name, **kw)


def linear_coefficient(e: Expr, var: str):
    """``k`` if ``e`` is syntactically ``k*var`` (or ``var*k``, ``var/k``, ``var``, ``-...``), else ``None``."""
    if isinstance(e, Var):
        return 1.0 if e.name == var else None
    if isinstance(e, Neg):
        k = linear_coefficient(e.operand, var)
        return None if k is None else -k
    if isinstance(e, BinOp) and e.op in "*/":
        left_const = not e.left.variables
        right_const = not e.right.variables
        if e.op == "*" and left_const:
            k = linear_coefficient(e.right, var)
            return None if k is None else constant_value(e.left) * k
        if right_const:
            k = linear_coefficient(e.left, var)
            c = constant_value(e.right)
            if k is None or (e.op == "/" and c == 0):
                return None
            return k * c if e.op == "*" else k / c
    return None


def classify(triple: ComparisonTriple) -> str:
    """Name the special case a triple reduces to, decided from the expressions."""
    if linear_coefficient(triple.phi_big, "u") != 1.0:
        return "general"
    k = linear_coefficient(triple.psi, "u")
    if k is not None and 0.0 <= k < 1.0:
        if is_constant(triple.phi_density) and constant_value(triple.phi_density) == 1.0:
            return "darbo"
        return "branciari"
    return "aghajani"
