import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from voltfix.comparison import EXAMPLE32_PROBLEM, ComparisonTriple, preset_triple
from voltfix.grid import Grid, GridFunction
from voltfix.mnc import (
    CSV_HEADER,
    Ensemble,
    MncEstimate,
    check_inequality_2_1,
    darbo_iterate,
    default_schedule,
    diam_at,
    ensemble_modulus,
    estimate_mu,
    estimates_csv,
    hull_sample,
    is_nonincreasing,
    mix,
    modulus,
    random_ensemble,
)
from voltfix.problem import IntegralProblem
from voltfix.sampling import trig_sum_values


def const(grid, *cs):
    return Ensemble(grid, np.array([np.full(grid.n, c) for c in cs]))


def trig_ensemble(grid, m, seed, lo=-1.0, hi=1.0):
    rng = np.random.default_rng(seed)
    return Ensemble(grid, np.stack([trig_sum_values(grid, rng, lo, hi, 5.0) for _ in range(m)]))


def brute_modulus(values, t, eps):
    d = np.abs(t[:, None] - t[None, :]) <= eps + 1e-12
    return max(np.max(np.abs(v[:, None] - v[None, :])[d]) for v in values)


G10 = Grid(10.0, 2001)


# --- modulus ------------------------------------------------------------------

def test_modulus_constant():
    assert modulus(GridFunction(G10, np.full(G10.n, 3.0)), 0.5) == 0.0


def test_modulus_linear():
    g = Grid(1.0, 1001)
    assert modulus(GridFunction.from_expr(g, "t"), 0.1) == pytest.approx(0.1, abs=g.h)


def test_modulus_sine():
    w = modulus(GridFunction.from_expr(G10, "sin(t)"), 0.01)
    assert 0.0099 <= w <= 0.01


def test_modulus_below_spacing_rejected():
    with pytest.raises(ValueError):
        modulus(GridFunction.zeros(G10), G10.h / 2)


def test_ensemble_modulus_examples():
    assert ensemble_modulus(const(G10, 0.0, 2.0), 1.0) == 0.0
    x = GridFunction.from_expr(G10, "sin(3*t)")
    assert ensemble_modulus(Ensemble.from_members([x]), 0.05) == modulus(x, 0.05)
    g = Grid(1.0, 11)
    X = Ensemble(g, np.stack([0.2 * g.t, 0.5 * g.t]))
    assert ensemble_modulus(X, 1.0) == 0.5


def test_modulus_matches_pair_scan():
    g = Grid(10.0, 201)
    X = trig_ensemble(g, 20, 7)
    for eps in (0.05, 0.1, 0.35, 2.0):
        assert ensemble_modulus(X, eps) == brute_modulus(X.values, g.t, eps)


# --- diameter and estimate ---------------------------------------------------------

def test_diameter_examples():
    g = Grid(10.0, 11)
    assert diam_at(const(g, 4.0), 5) == 0.0
    assert diam_at(const(g, 0.0, 1.0), 3) == 1.0
    X = Ensemble(g, np.stack([g.t, -g.t]))
    assert diam_at(X, 10) == 20.0


def test_estimate_singleton_constant():
    est = estimate_mu(const(G10, 0.7))
    assert est.mu_hat == 0.0 and est.omega0 == 0.0 and est.tail_diam == 0.0


def test_estimate_two_constants():
    est = estimate_mu(const(G10, 0.0, 1.0))
    assert (est.omega0, est.tail_diam, est.mu_hat) == (0.0, 1.0, 1.0)


def test_estimate_trig_sums_against_pair_scan():
    g = Grid(10.0, 401)
    X = trig_ensemble(g, 20, 11)
    est = estimate_mu(X)
    eps = est.epsilon_schedule[-1]
    assert est.omega0 == brute_modulus(X.values, g.t, eps)
    assert est.omega0 <= 5 * eps + 5 * g.h


def test_default_schedule():
    s = default_schedule(G10)
    assert s[0] == 5.0
    assert all(b == a / 2 for a, b in zip(s, s[1:]))
    assert s[-1] >= 2 * G10.h > s[-1] / 2


def test_estimate_rejects_bad_schedules():
    X = const(G10, 1.0)
    with pytest.raises(ValueError):
        estimate_mu(X, [0.5, 1.0])
    with pytest.raises(ValueError):
        estimate_mu(X, [G10.h])
    with pytest.raises(ValueError):
        estimate_mu(X, tail_fraction=0.0)


def test_estimate_components_nonnegative():
    with pytest.raises(ValueError):
        MncEstimate(-1.0, 0.0)


@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    g = Grid(5.0, 101)
    X = trig_ensemble(g, 6, seed)
    perm = np.random.default_rng(seed).permutation(6)
    assert estimate_mu(X) == estimate_mu(X.subset(perm))


@given(st.integers(0, 2**32 - 1))
def test_subset_monotonicity(seed):
    g = Grid(5.0, 101)
    rng = np.random.default_rng(seed)
    X = trig_ensemble(g, 8, seed)
    Y = X.subset(rng.choice(8, size=rng.integers(1, 8), replace=False))
    assert estimate_mu(Y).mu_hat <= estimate_mu(X).mu_hat


def test_duplicates_do_not_matter():
    X = trig_ensemble(Grid(5.0, 101), 4, 1)
    assert estimate_mu(X) == estimate_mu(X.subset([0, 1, 2, 3, 3, 0]))


# --- hulls ------------------------------------------------------------------

def test_hull_of_singleton():
    X = Ensemble.from_members([GridFunction.from_expr(G10, "cos(t)")])
    H = hull_sample(X, 16, 0)
    assert len(H) == 16
    assert np.allclose(H.values, X.values[0], rtol=0, atol=1e-15)
    assert estimate_mu(H).mu_hat == pytest.approx(estimate_mu(X).mu_hat, abs=1e-14)


def test_hull_of_two_constants():
    H = hull_sample(const(G10, 0.0, 1.0), 64, 3)
    assert np.all((H.values >= 0) & (H.values <= 1))
    assert diam_at(H, 100) == 1.0


def test_hull_keeps_originals_and_is_seeded():
    X = trig_ensemble(Grid(5.0, 51), 5, 2)
    H = hull_sample(X, 20, 9)
    assert np.array_equal(H.values[:5], X.values)
    assert np.array_equal(H.values, hull_sample(X, 20, 9).values)
    with pytest.raises(ValueError):
        hull_sample(X, 4, 0)


@pytest.mark.parametrize("seed", range(100))
def test_hull_does_not_grow_estimate(seed):
    g = Grid(5.0, 101)
    X = trig_ensemble(g, 5, seed)
    H = hull_sample(X, 20, seed)
    assert estimate_mu(H).mu_hat <= estimate_mu(X).mu_hat + 1e-12
    spread = lambda E: E.values.max(axis=0) - E.values.min(axis=0)
    assert np.max(np.abs(spread(H) - spread(X))) <= 1e-12


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]))
def test_convex_mixing(seed, lam):
    g = Grid(5.0, 101)
    A = trig_ensemble(g, 4, seed)
    B = trig_ensemble(g, 3, seed + 1)
    lhs = estimate_mu(mix(A, B, lam)).mu_hat
    rhs = lam * estimate_mu(A).mu_hat + (1 - lam) * estimate_mu(B).mu_hat
    assert lhs <= rhs + 1e-12


def test_ensemble_validation():
    g = Grid(1.0, 3)
    with pytest.raises(ValueError):
        Ensemble(g, np.zeros((0, 3)))
    with pytest.raises(ValueError):
        Ensemble(g, [[0.0, np.inf, 1.0]])
    with pytest.raises(ValueError):
        Ensemble.from_members([GridFunction.zeros(g), GridFunction.zeros(Grid(2.0, 3))])


# --- set iteration --------------------------------------------------------------

def problem(f, triple=None):
    spec = dict(EXAMPLE32_PROBLEM, f=f)
    return IntegralProblem.from_strings(**spec, triple=triple or preset_triple("example32"))


def test_identity_map_keeps_estimate():
    p = problem("y")
    X = random_ensemble(p, p.grid(401), 8, 0, r=1.0)
    mus = [e.mu_hat for e in darbo_iterate(p, X, 4, 32, 0)]
    assert np.allclose(mus, mus[0], rtol=0, atol=1e-12)


def test_constant_map_collapses():
    p = problem("0.5")
    X = random_ensemble(p, p.grid(401), 8, 0, r=1.0)
    est = darbo_iterate(p, X, 3, 32, 0)
    assert est[0].mu_hat > 0.1
    assert all(e.mu_hat == 0.0 for e in est[1:])


def test_shifted_problem_shrinks(shifted):
    X = random_ensemble(shifted, shifted.grid(1001), 16, 42)
    est = darbo_iterate(shifted, X, 10, 64, 42)
    assert len(est) == 11
    assert is_nonincreasing(est)
    assert est[-1].mu_hat <= 0.1 * est[0].mu_hat


def test_example_iteration_hits_log_domain(example32):
    X = random_ensemble(example32, example32.grid(2001), 16, 42)
    with pytest.raises(ValueError, match="ln of non-positive"):
        darbo_iterate(example32, X, 10, 64, 42)


def test_csv_format():
    est = [MncEstimate(0.5, 0.25), MncEstimate(0.0, 0.125)]
    assert estimates_csv(est) == f"{CSV_HEADER}\n0,0.5,0.25,0.75\n1,0,0.125,0.125\n"


def test_nonincreasing_tolerance():
    est = [MncEstimate(0.0, 1.0), MncEstimate(0.0, 1.0 + 5e-10), MncEstimate(0.0, 0.5)]
    assert is_nonincreasing(est)
    assert not is_nonincreasing(est, tol=1e-12)


# --- condensing inequality ------------------------------------------------------

def test_inequality_singleton_limited_by_resolution(example32):
    # mu_hat of the single image T x is its modulus at the smallest scale, about
    # slope * eps_min, not 0; the check only passes in the eps -> 0 limit
    gaps = []
    for n in (401, 801, 1601, 3201):
        grid = example32.grid(n)
        X = Ensemble.from_members([GridFunction(grid, np.full(n, 0.5))])
        rep = check_inequality_2_1(example32, X)
        assert not rep.passed
        w = dict(rep.witness)
        assert w["mu_X"] == 0.0
        eps = default_schedule(grid)[-1]
        assert w["mu_TX"] <= 2.0 * eps
        gaps.append(w["lhs"] - w["rhs"])
    assert all(0.4 <= b / a <= 0.6 for a, b in zip(gaps, gaps[1:]))


def test_inequality_darbo_linear_operator():
    # T x = 0.3 x + kernel term with zero kernel: Lipschitz 0.3 < k = 0.5
    darbo = preset_triple("darbo")
    spec = dict(EXAMPLE32_PROBLEM, f="0.3*y", g="0")
    p = IntegralProblem.from_strings(**spec, triple=darbo)
    X = random_ensemble(p, p.grid(401), 16, 5, r=1.0)
    assert check_inequality_2_1(p, X).passed
    spec["f"] = "0.8*y"
    q = IntegralProblem.from_strings(**spec, triple=darbo)
    assert not check_inequality_2_1(q, X).passed


def test_inequality_example_random_members(example32):
    X = random_ensemble(example32, example32.grid(2001), 16, 1)
    assert check_inequality_2_1(example32, X).passed


def test_inequality_fails_for_tripled_map():
    p = problem("3*y", ComparisonTriple.from_strings(preset="example32"))
    X = random_ensemble(p, p.grid(401), 16, 0, r=2.72)
    rep = check_inequality_2_1(p, X)
    assert not rep.passed and rep.witness
