import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import erf

from voltfix.comparison import ComparisonTriple, EXAMPLE32_PROBLEM, preset_triple
from voltfix.problem import (
    IntegralProblem,
    check_a_decay,
    check_b_integrable,
    check_f_contraction,
    check_hypotheses,
    check_kernel_bound,
    estimate_M0,
    estimate_M1,
    find_r0,
    self_mapping_slack,
)

# max_t erf(t) sqrt(pi)/2 / (1 + t^2), from a 30-digit mpmath root of the derivative
M0_EXAMPLE = 0.40360113537119356
# root of ln(1 + r) + M0 + 1 = r at the same precision
R0_EXAMPLE = 2.7163406134336849


def problem(**kw):
    spec = dict(EXAMPLE32_PROBLEM)
    triple = kw.pop("triple", preset_triple("example32"))
    spec.update(kw)
    return IntegralProblem.from_strings(**spec, triple=triple)


def test_invalid_problem_inputs():
    with pytest.raises(ValueError):
        problem(L=0.0)
    with pytest.raises(ValueError):
        problem(domain="complex")
    with pytest.raises(ValueError):
        problem(f="sin(s)")


# --- kernel bound ----------------------------------------------------------

def test_kernel_bound_example(example32):
    assert check_kernel_bound(example32, 10_000, 2.0).passed


def test_kernel_bound_factor_two_violation():
    rep = check_kernel_bound(problem(g="2*(1/(t^2+1))*exp(0-s^2)"), 10_000, 2.0)
    assert not rep.passed
    assert rep.witness


def test_kernel_bound_zero_kernel():
    assert check_kernel_bound(problem(g="0"), 1000, 2.0).passed


def test_kernel_bound_sine_variant_also_holds():
    assert check_kernel_bound(problem(g="(1/(t^2+1))*exp(0-s^2)*sin(x)"), 10_000, 2.0).passed


# --- decay and integrability -------------------------------------------------

def test_a_decay_example(example32):
    rep = check_a_decay(example32, 0.1, 0.05)
    assert rep.passed
    assert "0.012195121951219" in rep.note  # 1/82, the tail max at t = 9


@pytest.mark.parametrize("a, passes", [("1", False), ("exp(0-t)", True)])
def test_a_decay_variants(a, passes):
    assert check_a_decay(problem(a=a), 0.1, 0.05).passed is passes


def test_b_integrable():
    assert check_b_integrable(problem()).passed
    assert not check_b_integrable(problem(b="1")).passed


# --- M0, M1, r0 -------------------------------------------------------------

def test_M0_zero_bound():
    assert estimate_M0(problem(a="0")) == 0.0


def test_M0_linear_case():
    p = problem(a="1", b="1", L=2.0)
    assert estimate_M0(p) == pytest.approx(2.0, rel=1e-12)


def test_M0_example_against_dense_grid(example32):
    t = np.linspace(0.0, 10.0, 100_001)
    dense = np.max(np.sqrt(np.pi) / 2 * erf(t) / (1 + t * t))
    got = estimate_M0(example32)
    assert abs(got - dense) <= 1e-4
    assert abs(got - M0_EXAMPLE) <= 1e-8


def test_M0_refinement_monotone(example32):
    values = [estimate_M0(example32, n, refine=False) for n in (11, 21, 41, 81, 161)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_M1_example(example32):
    assert estimate_M1(example32) == 1.0


def test_M1_zero_and_scaled():
    assert estimate_M1(problem(f="ln(1+x)+ln(1+y)")) == 0.0
    doubled = ComparisonTriple.from_strings(phi_big="2*u")
    assert estimate_M1(problem(triple=doubled)) == 2.0


def test_r0_example_matches_bisection(example32):
    m0 = estimate_M0(example32)
    root = brentq(lambda r: np.log1p(r) + m0 + 1 - r, 1.0, 10.0, xtol=1e-14)
    assert root == pytest.approx(R0_EXAMPLE, abs=1e-8)
    r0 = find_r0(example32)
    step = 100.0 / 10_000
    assert root <= r0 <= root + step
    assert self_mapping_slack(example32, r0, m0, 1.0) >= 0


def test_r0_without_offsets_is_first_sample():
    p = problem(a="0", f="ln(1+x)+ln(1+y)")
    assert find_r0(p, 100.0, 10_000) == pytest.approx(0.01)


def test_r0_absent_for_identity_control():
    p = problem(triple=ComparisonTriple.from_strings(psi="u"))
    assert find_r0(p) is None


# --- contraction of f ----------------------------------------------------------

def test_f_contraction_example(example32):
    assert check_f_contraction(example32, 10_000, 2.0).passed


def test_f_contraction_identity_fails():
    rep = check_f_contraction(problem(f="y"), 10_000, 2.0)
    assert not rep.passed and rep.witness


def test_f_contraction_constant():
    assert check_f_contraction(problem(f="3"), 1000, 2.0).passed


def test_f_contraction_darbo_is_lipschitz():
    darbo = preset_triple("darbo")  # psi = 0.5 u
    assert check_f_contraction(problem(f="0.4*y+0.3*x", triple=darbo), 5000, 2.0).passed
    assert not check_f_contraction(problem(f="0.6*y", triple=darbo), 5000, 2.0).passed


# --- full report ---------------------------------------------------------------

def test_report_example(example32):
    rep = check_hypotheses(example32)
    assert rep.passed
    text = rep.to_text()
    for key in ("h1 = pass", "h2 = pass", "h3 = pass", "h4 = pass", "M1 = 1\n", "r0 = 2.72"):
        assert key in text
    assert "psi(Lambda(r)) + M0 + M1 <= Lambda(r)" in text
    assert text.rstrip().endswith("[WARNINGS]\nnone")


def test_report_warns_on_small_dominating_function():
    p = problem(triple=ComparisonTriple.from_strings(phi_big="0.5*u", preset="example32"))
    rep = check_hypotheses(p)
    assert not rep.passed
    assert rep.status("h2") == "fail"
    warn = [w for w in rep.warnings if "phi_big_dominates_identity" in w]
    assert warn and "h2" in warn[0] and "witness" in warn[0]


def test_report_is_deterministic(example32):
    assert check_hypotheses(example32, seed=3).to_text() == check_hypotheses(example32, seed=3).to_text()
