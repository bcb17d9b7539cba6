"""Instances of ``x(t) = f(t, int_0^t g(t, s, x(s)) ds, x(t))`` and their hypothesis checks.

The four hypotheses are reported as:

``h1``
    ``f`` is evaluable and ``f(t, x, 0)`` stays bounded on samples.
``h2``
    ``f`` satisfies the integral contraction in each of its last two slots,
    and the comparison triple has every property it needs.
``h3``
    ``|g(t, s, x)| <= a(t) b(s)`` for ``s <= t``, ``a`` decays, ``b`` is integrable.
``h4``
    A radius ``r0`` exists with ``psi(Lambda(r0)) + M0 + M1 <= Lambda(r0)``.

The ``h4`` inequality is the self-mapping estimate ``T B_r0 subset B_r0``
actually needed by the existence argument; the variant with ``Lambda(r)``
on both sides holds for every ``r`` and carries no information.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import comparison as cmp
from .comparison import ComparisonTriple, PropertyReport, _bad, _ok
from .expr import EvalError, Expr, compile_expr, evaluate_array, to_source
from .grid import Grid
from .sampling import low_discrepancy

F_VARS = ("t", "x", "y")
G_VARS = ("t", "s", "x")
DOMAINS = ("nonnegative", "real")

DEFAULT_SAMPLES = 10_000
DEFAULT_RADIUS = 2.0
DEFAULT_R_MAX = 100.0
DEFAULT_R_RESOLUTION = 10_000
DEFAULT_T_SAMPLES = 2001
DEFAULT_TAIL_FRACTION = 0.1
DEFAULT_DECAY_THRESHOLD = 0.05
INNER_PANELS = 64


@dataclass(frozen=True)
class IntegralProblem:
    """Data ``(f, g, a, b, L)`` plus the comparison triple used to check it.

    ``domain`` says where the unknown takes values when sampling balls:
    ``"nonnegative"`` samples ``[0, r]`` (``f`` declared on the half-line),
    ``"real"`` samples ``[-r, r]``.
    """

    f: Expr
    g: Expr
    a: Expr | None = None
    b: Expr | None = None
    L: float = 10.0
    triple: ComparisonTriple = field(default_factory=ComparisonTriple.from_strings)
    domain: str = "nonnegative"

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}, got {self.domain!r}")

    @classmethod
    def from_strings(cls, f, g, a=None, b=None, L=10.0, triple=None, domain="nonnegative"):
        return cls(
            compile_expr(f, F_VARS),
            compile_expr(g, G_VARS),
            None if a is None else compile_expr(a, ("t",)),
            None if b is None else compile_expr(b, ("s",)),
            float(L),
            triple if triple is not None else ComparisonTriple.from_strings(),
            domain,
        )

    def grid(self, n: int) -> Grid:
        return Grid(self.L, n)

    def value_range(self, r: float):
        return (0.0, r) if self.domain == "nonnegative" else (-r, r)

    def f_at(self, t, x, y):
        return _bcast(evaluate_array(self.f, {"t": t, "x": x, "y": y}), t, x, y)

    def g_at(self, t, s, x):
        return _bcast(evaluate_array(self.g, {"t": t, "s": s, "x": x}), t, s, x)

    def a_at(self, t):
        return _bcast(evaluate_array(self._need("a"), {"t": t}), t)

    def b_at(self, s):
        return _bcast(evaluate_array(self._need("b"), {"s": s}), s)

    def _need(self, name):
        e = getattr(self, name)
        if e is None:
            raise ValueError(f"problem has no bound function {name!r}")
        return e

    def b_integral(self, t):
        """``int_0^t |b(s)| ds`` by composite Simpson, vectorized over ``t``."""
        t = np.asarray(t, dtype=np.float64)
        z = np.linspace(0.0, 1.0, INNER_PANELS + 1)
        w = np.full(INNER_PANELS + 1, 2.0)
        w[1:INNER_PANELS:2] = 4.0
        w[0] = w[-1] = 1.0
        w /= 3.0 * INNER_PANELS
        nodes = t[..., None] * z
        return t * (np.abs(self.b_at(nodes)) @ w)

    def kernel_envelope(self, t):
        """``a(t) * int_0^t |b|``, the bound on the inner integral."""
        return np.abs(self.a_at(t)) * self.b_integral(t)


def _bcast(v, *args):
    return np.broadcast_to(v, np.broadcast_shapes(*(np.shape(a) for a in args))).astype(np.float64)


def _guard(name, fn):
    """Turn an evaluation error into a failed report."""
    try:
        return fn()
    except EvalError as err:
        return _bad(name, [("error", err.position if err.position is not None else -1)], note=str(err))


# ---------------------------------------------------------------------------
# h1, h3


def check_f_regularity(p: IntegralProblem, samples=DEFAULT_SAMPLES, r=DEFAULT_RADIUS, seed=0, name="f_evaluable_bounded"):
    def run():
        lo, hi = p.value_range(r)
        pts = low_discrepancy(samples, [(0, p.L), (lo, hi), (lo, hi)], seed)
        t, x, y = pts.T
        p.f_at(t, x, y)
        at0 = p.f_at(t, x, np.zeros_like(t))
        return _ok(name, note=f"max |f(t,x,0)| = {np.max(np.abs(at0)):.17g}")

    return _guard(name, run)


def check_kernel_bound(p: IntegralProblem, samples=DEFAULT_SAMPLES, r=DEFAULT_RADIUS, seed=0, tol=cmp.TOL, name="kernel_bound"):
    """``|g(t,s,x)| <= a(t) b(s) + tol`` on low-discrepancy ``s <= t <= L``, ``|x| <= r``."""
    if not r > 0:
        raise ValueError("r must be positive")
    pts = low_discrepancy(samples, [(0, p.L), (0, 1), (-r, r)], seed)
    t, frac, x = pts.T
    s = t * frac
    lhs = np.abs(p.g_at(t, s, x))
    rhs = p.a_at(t) * p.b_at(s)
    bad = np.nonzero(lhs > rhs + tol)[0]
    if bad.size:
        k = bad[0]
        return _bad(name, [("t", t[k]), ("s", s[k]), ("x", x[k]), ("|g|", lhs[k]), ("a*b", rhs[k])])
    return _ok(name)


def check_ab_nonnegative(p: IntegralProblem, points=DEFAULT_T_SAMPLES, name="a_b_nonnegative"):
    t = np.linspace(0, p.L, points)
    for label, v in (("a", p.a_at(t)), ("b", p.b_at(t))):
        bad = np.nonzero(v < 0)[0]
        if bad.size:
            k = bad[0]
            return _bad(name, [("t" if label == "a" else "s", t[k]), (label, v[k])])
    return _ok(name)


def check_a_decay(p: IntegralProblem, tail_fraction=DEFAULT_TAIL_FRACTION, threshold=DEFAULT_DECAY_THRESHOLD, points=DEFAULT_T_SAMPLES, name="a_decays"):
    """Max of ``|a|`` over the last ``tail_fraction`` of ``[0, L]`` is below ``threshold``."""
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    t = np.linspace((1 - tail_fraction) * p.L, p.L, points)
    v = np.abs(p.a_at(t))
    k = int(np.argmax(v))
    note = f"tail max |a| = {v[k]:.17g} (threshold {threshold:g})"
    if v[k] < threshold:
        return _ok(name, note)
    return _bad(name, [(t[k], v[k])], note)


def check_b_integrable(p: IntegralProblem, points=DEFAULT_T_SAMPLES, tail_fraction=DEFAULT_TAIL_FRACTION, name="b_integrable"):
    """Simpson integral of ``|b|`` is stable under refinement and its tail is < 1% of the total."""
    coarse = _simpson_abs_b(p, 0.0, p.L, points)
    fine = _simpson_abs_b(p, 0.0, p.L, 2 * points - 1)
    tail = _simpson_abs_b(p, (1 - tail_fraction) * p.L, p.L, points)
    change = abs(fine - coarse)
    note = f"int_0^L |b| = {fine:.17g}, refinement change {change:.3g}, tail share {tail / fine if fine else 0:.3g}"
    if change <= 1e-6 * max(1.0, abs(fine)) and tail <= 0.01 * fine:
        return _ok(name, note)
    return _bad(name, [("integral", fine), ("tail", tail)], note)


def _simpson_abs_b(p, lo, hi, points):
    points += (points + 1) % 2  # odd node count -> even panels
    s = np.linspace(lo, hi, points)
    w = np.full(points, 2.0)
    w[1:-1:2] = 4.0
    w[0] = w[-1] = 1.0
    return float((hi - lo) / (3 * (points - 1)) * (w @ np.abs(p.b_at(s))))


# ---------------------------------------------------------------------------
# M0, M1, r0


def _sampled_sup(fn, lo, hi, samples, refine):
    """Max of a vectorized ``fn`` on a uniform grid, polished by bounded Brent."""
    t = np.linspace(lo, hi, int(samples))
    v = fn(t)
    k = int(np.argmax(v))
    best = float(v[k])
    if refine and len(t) > 2:
        a, b = t[max(k - 1, 0)], t[min(k + 1, len(t) - 1)]
        res = minimize_scalar(lambda s: -float(fn(np.asarray(s))), bounds=(a, b), method="bounded", options={"xatol": 1e-13})
        best = max(best, -float(res.fun))
    return best


def estimate_M0(p: IntegralProblem, t_samples=DEFAULT_T_SAMPLES, refine=True) -> float:
    """``sup_t Lambda(|a(t)| int_0^t |b|)`` over ``[0, L]``."""
    return _sampled_sup(lambda t: p.triple.Lambda(p.kernel_envelope(t)), 0.0, p.L, t_samples, refine)


def sup_abs_f00(p: IntegralProblem, t_samples=DEFAULT_T_SAMPLES, refine=True) -> float:
    def fn(t):
        z = np.zeros_like(t)
        return np.abs(p.f_at(t, z, z))

    return _sampled_sup(fn, 0.0, p.L, t_samples, refine)


def estimate_M1(p: IntegralProblem, t_samples=DEFAULT_T_SAMPLES, refine=True) -> float:
    """``Phi(Lambda(sup_t |f(t, 0, 0)|))``."""
    return p.triple.Phi(p.triple.Lambda(sup_abs_f00(p, t_samples, refine)))


def self_mapping_slack(p: IntegralProblem, r, m0, m1):
    """``Lambda(r) - psi(Lambda(r)) - M0 - M1``; nonnegative where the ball maps into itself."""
    lam = p.triple.Lambda(r)
    return lam - p.triple.Psi(lam) - m0 - m1


def find_r0(p: IntegralProblem, r_max=DEFAULT_R_MAX, resolution=DEFAULT_R_RESOLUTION, m0=None, m1=None):
    """Smallest ``r = k r_max / resolution`` with nonnegative :func:`self_mapping_slack`, or ``None``."""
    if m0 is None:
        m0 = estimate_M0(p)
    if m1 is None:
        m1 = estimate_M1(p)
    r = np.arange(1, int(resolution) + 1) * (r_max / resolution)
    ok = np.nonzero(self_mapping_slack(p, r, m0, m1) >= 0)[0]
    return float(r[ok[0]]) if ok.size else None


# ---------------------------------------------------------------------------
# h2


def check_f_contraction(p: IntegralProblem, samples=DEFAULT_SAMPLES, r=DEFAULT_RADIUS, seed=0, tol=cmp.TOL, name="f_contraction"):
    """Both slot-wise inequalities ``Phi(Lambda(|df|)) <= Psi(Lambda(|d arg|)) + tol``."""
    if not r > 0:
        raise ValueError("r must be positive")

    def run():
        tr = p.triple
        lo, hi = p.value_range(r)
        pts = low_discrepancy(samples, [(0, p.L), (lo, hi), (lo, hi), (lo, hi)], seed)
        t, u, v1, v2 = pts.T
        for slot, (fa, fb, d) in {
            "y": (p.f_at(t, u, v1), p.f_at(t, u, v2), v1 - v2),
            "x": (p.f_at(t, v1, u), p.f_at(t, v2, u), v1 - v2),
        }.items():
            lhs = tr.Phi(tr.Lambda(np.abs(fa - fb)))
            rhs = tr.Psi(tr.Lambda(np.abs(d)))
            bad = np.nonzero(lhs > rhs + tol)[0]
            if bad.size:
                k = bad[0]
                other = "x" if slot == "y" else "y"
                return _bad(
                    name,
                    [("t", t[k]), (other, u[k]), (f"{slot}1", v1[k]), (f"{slot}2", v2[k]), ("lhs", lhs[k]), ("rhs", rhs[k])],
                    note=f"inequality in the {slot} slot",
                )
        return _ok(name)

    return _guard(name, run)


# ---------------------------------------------------------------------------


@dataclass
class HypothesisReport:
    hypotheses: dict
    M0: float
    M1: float
    r0: float | None
    warnings: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def status(self, key) -> str:
        return "pass" if all(self.hypotheses[key]) else "fail"

    @property
    def passed(self) -> bool:
        return all(self.status(k) == "pass" for k in self.hypotheses)

    def to_text(self) -> str:
        lines = [f"{k} = {self.status(k)}" for k in self.hypotheses]
        lines.append(f"M0 = {self.M0:.17g}")
        lines.append(f"M1 = {self.M1:.17g}")
        lines.append(f"r0 = {'none' if self.r0 is None else format(self.r0, '.17g')}")
        lines.append("self_mapping_condition = psi(Lambda(r)) + M0 + M1 <= Lambda(r)")
        for note in self.notes:
            lines.append(f"note = {note}")
        lines.append("[properties]")
        for k, reports in self.hypotheses.items():
            for rep in reports:
                line = f"{k} {rep.to_line()}"
                if rep.note:
                    line += f" note={rep.note}"
                lines.append(line)
        lines.append("[WARNINGS]")
        lines.extend(self.warnings or ["none"])
        return "\n".join(lines) + "\n"


_WARNING_TEXT = {
    "phi_big_dominates_identity": "phi_big(u) >= u is violated",
    "phi_big_subadditive": "phi_big is not subadditive",
    "psi_below_identity": "psi(t) < t is violated",
    "psi_iterates_vanish_iff_below_identity": "psi^n(t) -> 0 and psi(t) < t disagree",
    "kernel_bound": "|g(t,s,x)| <= a(t) b(s) is violated",
    "f_contraction": "the integral contraction of f is violated",
    "self_mapping_radius": "no radius r0 with psi(Lambda(r0)) + M0 + M1 <= Lambda(r0)",
}


def _warning(key, rep):
    what = _WARNING_TEXT.get(rep.name, f"property {rep.name} failed")
    wit = ", ".join(f"{cmp._fmt(a)}={cmp._fmt(b)}" if isinstance(a, str) else f"at {cmp._fmt(a)} value {cmp._fmt(b)}" for a, b in rep.witness)
    extra = f" ({rep.note})" if rep.note else ""
    return f"WARNING {key} {rep.name}: {what}; witness {wit}{extra}"


def check_hypotheses(
    p: IntegralProblem,
    samples=DEFAULT_SAMPLES,
    seed=0,
    r_max=DEFAULT_R_MAX,
    r_resolution=DEFAULT_R_RESOLUTION,
    tail_fraction=DEFAULT_TAIL_FRACTION,
    decay_threshold=DEFAULT_DECAY_THRESHOLD,
    n_max=cmp.DEFAULT_N_MAX,
    decay_tol=cmp.DEFAULT_DECAY_TOL,
) -> HypothesisReport:
    if p.a is None or p.b is None:
        raise ValueError("hypothesis checks need both bound functions a and b")
    notes = []
    m0 = estimate_M0(p)
    m1 = estimate_M1(p)
    r0 = find_r0(p, r_max, r_resolution, m0, m1)
    r = r0 if r0 is not None else DEFAULT_RADIUS
    if r0 is None:
        notes.append(f"no r0 found; ball checks use radius {r:g}")

    h4 = [
        _ok("self_mapping_radius", note=f"r0 = {r0:.17g}")
        if r0 is not None
        else _bad("self_mapping_radius", [("r_max", r_max), ("slack_at_r_max", self_mapping_slack(p, r_max, m0, m1))])
    ]
    report = HypothesisReport(
        {
            "h1": [check_f_regularity(p, samples, r, seed)],
            "h2": [check_f_contraction(p, samples, r, seed)] + cmp.comparison_suite(p.triple, n_max, decay_tol),
            "h3": [
                check_kernel_bound(p, samples, r, seed),
                check_ab_nonnegative(p),
                check_a_decay(p, tail_fraction, decay_threshold),
                check_b_integrable(p, tail_fraction=tail_fraction),
            ],
            "h4": h4,
        },
        m0,
        m1,
        r0,
        notes=notes,
    )
    for key, reports in report.hypotheses.items():
        for rep in reports:
            if not rep.passed:
                report.warnings.append(_warning(key, rep))
    if p.triple.preset == "example32":
        notes.append("phi_big defaults to u; the choice phi_big = k*u with k < 1 fails phi_big(u) >= u")
    notes.append(f"comparison triple reduces to the {p.triple.tag} case")
    return report


def describe(p: IntegralProblem) -> str:
    parts = [f"f = {to_source(p.f)}", f"g = {to_source(p.g)}"]
    if p.a is not None:
        parts.append(f"a = {to_source(p.a)}")
    if p.b is not None:
        parts.append(f"b = {to_source(p.b)}")
    return ", ".join(parts)
