import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import cumulative_trapezoid, quad

from voltfix import kernels
from voltfix.grid import (
    Grid,
    GridFunction,
    KernelQuadrature,
    cumulative_rule,
    grid_function_csv,
    inner_integral,
    inner_integral_all,
    read_grid_function_csv,
    row_weights,
    sup_norm_distance,
)

ERF_1 = math.sqrt(math.pi) / 2 * math.erf(1.0)


def test_grid_nodes():
    g = Grid(10.0, 2001)
    assert g.h == 0.005
    assert g.t[0] == 0.0
    assert abs(g.t[-1] - 10.0) <= 1e-12 * 10
    assert g.refine().n == 4001
    with pytest.raises(ValueError):
        Grid(1.0, 1)
    with pytest.raises(ValueError):
        Grid(-1.0, 5)


def test_grid_function_rejects_bad_values():
    g = Grid(1.0, 3)
    with pytest.raises(ValueError):
        GridFunction(g, [0.0, np.nan, 1.0])
    with pytest.raises(ValueError):
        GridFunction(g, [0.0, 1.0])
    x = GridFunction(g, [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        x.values[0] = 5.0


def test_csv_format_and_round_trip():
    g = Grid(1.0, 5)
    x = GridFunction.from_expr(g, "sin(t)")
    text = grid_function_csv(x)
    assert text.startswith("t,x\n0,0\n")
    assert "\r" not in text and text.endswith("\n")
    back = read_grid_function_csv(text)
    assert back.grid == g
    assert np.array_equal(back.values, x.values)


def test_sup_norm_distance_examples():
    g = Grid(10.0, 101)
    x = GridFunction.from_expr(g, "sin(t)")
    assert sup_norm_distance(x, x) == 0.0
    assert sup_norm_distance(GridFunction.zeros(g), GridFunction(g, np.ones(g.n))) == 1.0
    bumped = x.values.copy()
    bumped[37] += 0.25
    d = sup_norm_distance(x, GridFunction(g, bumped))
    assert d == pytest.approx(0.25, abs=1e-15)
    assert sup_norm_distance(GridFunction(g, bumped), x) == d


# --- quadrature -----------------------------------------------------------

@pytest.mark.parametrize("rule", ["trapezoid", "simpson"])
def test_first_node_is_zero(rule):
    x = GridFunction.zeros(Grid(1.0, 11))
    assert inner_integral("exp(s)*t", x, 0, rule) == 0.0


@pytest.mark.parametrize("n", [2, 3, 11, 200, 1001])
def test_trapezoid_linear_exact(n):
    x = GridFunction.zeros(Grid(1.0, n))
    assert inner_integral("s", x, n - 1) == pytest.approx(0.5, rel=1e-12, abs=0)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.5, 20), st.integers(2, 400))
def test_trapezoid_affine_exact(c0, c1, L, n):
    x = GridFunction.zeros(Grid(L, n))
    got = inner_integral(f"{c0!r}+({c1!r})*s", x, n - 1)
    exact = c0 * L + 0.5 * c1 * L * L
    assert got == pytest.approx(exact, rel=1e-12, abs=1e-12 * (abs(c0) * L + abs(c1) * L * L))


@pytest.mark.parametrize("n", [3, 5, 21, 201])
def test_simpson_cubic_exact_on_even_panels(n):
    x = GridFunction.zeros(Grid(2.0, n))
    for i in range(0, n, 2):
        t = x.t[i]
        exact = t**4 / 4 - t**3 + 0.5 * t * t + 3 * t
        assert inner_integral("s^3-3*s^2+s+3", x, i, "simpson") == pytest.approx(exact, abs=1e-10)


def test_simpson_odd_node_uses_trapezoid_last_panel():
    g = Grid(1.0, 4)
    w = row_weights(3, g.h, "simpson")
    h = g.h
    assert np.allclose(w, [h / 3, 4 * h / 3, h / 3 + h / 2, h / 2])
    assert np.allclose(row_weights(1, h, "simpson"), [h / 2, h / 2])


def test_gaussian_against_erf():
    x = GridFunction.zeros(Grid(1.0, 201))
    got = inner_integral("exp(0-s^2)", x, 200, "simpson")
    assert abs(got - 0.7468241) <= 1e-6
    assert abs(got - ERF_1) <= 1e-10


def test_trapezoid_refinement_ratio():
    # exact values from adaptive quadrature at the shared node t = 2
    g = "cos(t*s)*exp(0-s)"
    exact = quad(lambda s: math.cos(2 * s) * math.exp(-s), 0, 2, epsabs=1e-14)[0]
    errs = []
    for n in (41, 81, 161, 321):
        x = GridFunction.zeros(Grid(2.0, n))
        errs.append(abs(inner_integral(g, x, n - 1) - exact))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.2 <= r <= 4.8 for r in ratios), ratios


def test_all_nodes_constant_kernel():
    x = GridFunction.from_expr(Grid(2.0, 41), "sin(5*t)")
    assert np.allclose(inner_integral_all("1", x).values, x.t, rtol=0, atol=1e-14)


def test_all_nodes_nonnegative_integrand_is_monotone():
    x = GridFunction.zeros(Grid(5.0, 101))
    v = inner_integral_all("exp(0-s^2)", x).values
    assert np.all(np.diff(v) >= 0)


def test_example_kernel_with_zero_function():
    grid = Grid(10.0, 401)
    x = GridFunction.zeros(grid)
    got = inner_integral_all("(1/(t^2+1))*exp(0-s^2)*cos(x)", x).values
    same_rule = cumulative_trapezoid(np.exp(-grid.t**2), grid.t, initial=0.0) / (grid.t**2 + 1)
    assert np.max(np.abs(got - same_rule)) <= 1e-14
    exact = np.array([quad(lambda s: math.exp(-s * s), 0, t)[0] for t in grid.t]) / (grid.t**2 + 1)
    assert np.max(np.abs(got - exact)) <= grid.h**2 / 12 * 1.0


def test_x_free_kernel_ignores_x():
    grid = Grid(3.0, 61)
    a = inner_integral_all("t*exp(0-s)", GridFunction.zeros(grid)).values
    b = inner_integral_all("t*exp(0-s)", GridFunction.from_expr(grid, "sin(3*t)")).values
    assert np.array_equal(a, b)


@pytest.mark.parametrize("rule", ["trapezoid", "simpson"])
@pytest.mark.parametrize(
    "g",
    [
        "(1/(t^2+1))*exp(0-s^2)*cos(x)",  # factors
        "sin(t*s)+x^2/(1+s)",  # does not factor
        "-(t+1)*x/(2+s)",
        "exp(0-t*s)*cos(x)/(1+t)",  # mixed t, s factor
    ],
)
def test_vectorized_matches_node_by_node(g, rule):
    grid = Grid(4.0, 33)
    x = GridFunction.from_expr(grid, "cos(2*t)")
    fast = inner_integral_all(g, x, rule).values
    slow = np.array([inner_integral(g, x, i, rule) for i in range(grid.n)])
    assert np.allclose(fast, slow, rtol=1e-13, atol=1e-14)


def test_separable_detection():
    grid = Grid(1.0, 5)
    assert KernelQuadrature("(1/(t^2+1))*exp(0-s^2)*cos(x)", grid).separable
    assert KernelQuadrature("exp(0-t*s)*cos(x)", grid).separable
    assert not KernelQuadrature("sin(t*x)", grid).separable


@pytest.mark.parametrize("rule", ["trapezoid", "simpson"])
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 10, 11])
def test_cumulative_rule_matches_row_weights(n, rule):
    h = 0.3
    v = np.random.default_rng(n).normal(size=n)
    expected = [row_weights(i, h, rule) @ v[: i + 1] for i in range(n)]
    assert np.allclose(cumulative_rule(v, h, rule), expected, rtol=1e-14, atol=1e-15)
    V = np.stack([v, 2 * v], axis=1)
    assert np.allclose(cumulative_rule(V, h, rule)[:, 1], 2 * np.array(expected), rtol=1e-14, atol=1e-15)


def test_batched_columns_match_single_calls():
    grid = Grid(2.0, 41)
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, size=(grid.n, 4))
    for g in ("exp(0-s)*x^2*t", "sin(t+x*s)"):
        q = KernelQuadrature(g, grid)
        batch = q(X)
        for k in range(4):
            assert np.allclose(batch[:, k], q(X[:, k]), rtol=1e-14, atol=1e-15)


# --- compiled and pure kernels agree -------------------------------------

needs_cython = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")


@needs_cython
@pytest.mark.parametrize("simpson", [False, True])
@pytest.mark.parametrize("n", [1, 2, 3, 10, 57])
def test_backends_agree_on_row_sums(n, simpson):
    rng = np.random.default_rng(n)
    G = rng.normal(size=(n, n))
    a = kernels.tri_rowsum(G, 0.1, simpson, backend="cython")
    b = kernels.tri_rowsum(G, 0.1, simpson, backend="python")
    assert np.allclose(a, b, rtol=1e-13, atol=1e-14)


@needs_cython
@pytest.mark.parametrize("w", [0, 1, 3, 50])
def test_backends_agree_on_window_modulus(w):
    X = np.random.default_rng(w).normal(size=(5, 40))
    a = kernels.window_modulus(X, w, backend="cython")
    b = kernels.window_modulus(X, w, backend="python")
    assert np.array_equal(a, b)


def test_row_sums_ignore_upper_triangle():
    G = np.tril(np.ones((6, 6))) + np.triu(np.full((6, 6), np.nan), 1)
    out = kernels.tri_rowsum(G, 1.0, False, backend="python")
    assert np.array_equal(out, np.arange(6.0))
    if kernels.BACKEND == "cython":
        assert np.array_equal(kernels.tri_rowsum(G, 1.0, False, backend="cython"), out)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.tri_rowsum(np.zeros((2, 2)), 1.0, backend="fortran")
