import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from countyrisk.car import CarFit, CarOptions, _Profile, fit_car, phi_bounds, select_response, smooth
from countyrisk.errors import InputError
from countyrisk.graph import graph_from_edge_list, weights
from countyrisk.synth import gen_car_field, grid_graph


def binary(g):
    return weights(g, "binary")


def test_bounds_k2():
    w = binary(graph_from_edge_list("AB", [("A", "B")]))
    np.testing.assert_allclose(phi_bounds(w), (-1.0, 1.0), atol=1e-12)


def test_bounds_k3():
    w = binary(graph_from_edge_list("ABC", [("A", "B"), ("B", "C"), ("A", "C")]))
    np.testing.assert_allclose(phi_bounds(w), (-1.0, 0.5), atol=1e-12)


def test_bounds_c4():
    w = binary(graph_from_edge_list("ABCD", [("A", "B"), ("B", "C"), ("C", "D"), ("D", "A")]))
    np.testing.assert_allclose(phi_bounds(w), (-0.5, 0.5), atol=1e-12)


def test_bounds_queen_grid_closed_form():
    # queen W on an n x n grid is (I + P)(I + P) - I with P the path adjacency,
    # eigenvalues (1 + 2cos a)(1 + 2cos b) - 1 with a, b = k pi / (n + 1)
    n = 10
    c = 1 + 2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    ev = np.outer(c, c).ravel() - 1
    lo, hi = phi_bounds(binary(grid_graph(n, n)))
    assert lo == pytest.approx(1 / ev.min(), rel=1e-10)
    assert hi == pytest.approx(1 / ev.max(), rel=1e-10)


def test_row_weights_rejected():
    with pytest.raises(InputError):
        phi_bounds(weights(grid_graph(3, 3), "row_standardized"))


def test_fixed_phi_zero_is_sample_mean():
    w = binary(grid_graph(3, 3))
    y = np.random.default_rng(0).standard_normal(9)
    fit = fit_car(y, w, CarOptions(phi_bracket=(0.0, 0.0)))
    assert fit.phi == 0.0
    assert fit.beta[0] == pytest.approx(y.mean(), abs=1e-14)
    assert fit.sigma2 == pytest.approx(np.mean((y - y.mean()) ** 2), abs=1e-14)
    np.testing.assert_allclose(fit.smoothed, y.mean(), atol=1e-14)
    np.testing.assert_allclose(fit.fitted_nonspatial, y.mean(), atol=1e-14)


def test_phi_zero_recovery_queen10():
    w = binary(grid_graph(10, 10))
    y = gen_car_field(w, 0.0, 1.0, 3.0, seed=11)
    fit = fit_car(y, w)
    assert abs(fit.phi) <= 0.15
    assert fit.phi_bounds[0] < fit.phi < fit.phi_bounds[1]
    assert np.mean(np.abs(fit.smoothed - y.mean())) < np.mean(np.abs(y - y.mean()))


def test_phi_recovery_inside_queen_bounds():
    w = binary(grid_graph(10, 10))
    est = [fit_car(gen_car_field(w, 0.10, 1.0, 0.0, seed=s), w).phi for s in range(100)]
    assert np.mean(est) == pytest.approx(0.10, abs=0.03)


def test_phi_outside_bounds_not_sampled():
    w = binary(grid_graph(10, 10))
    with pytest.raises(InputError):
        gen_car_field(w, 0.15, 1.0, 0.0, seed=0)


def test_single_neighbor_smoothing_by_hand():
    # path A-B-C-D-E; unit A has one neighbour B
    g = graph_from_edge_list("ABCDE", [("A", "B"), ("B", "C"), ("C", "D"), ("D", "E")])
    w = binary(g)
    y = np.array([0.2, 0.9, 0.4, 0.5, 0.3])
    fit = fit_car(y, w, CarOptions(phi_bracket=(0.1, 0.1)))
    r_b = y[1] - fit.beta[0]
    assert fit.smoothed[0] == pytest.approx(fit.beta[0] + 0.1 * r_b, abs=1e-14)
    np.testing.assert_array_equal(smooth(fit, y, w), fit.smoothed)


def test_loglik_dominates_grid():
    w = binary(grid_graph(6, 6))
    y = gen_car_field(w, 0.12, 1.0, 0.0, seed=3)
    fit = fit_car(y, w)
    lo, hi = fit.phi_bounds
    grid = lo + (hi - lo) * np.arange(1, 201) / 201
    prof = _Profile(y, np.ones((36, 1)), np.asarray(w.values, float), np.ones(36))
    assert all(fit.loglik >= prof(g) - 1e-12 for g in grid)


def test_loglik_matches_dense_density():
    from scipy.stats import multivariate_normal

    w = binary(grid_graph(4, 4))
    y = gen_car_field(w, 0.1, 0.5, 1.0, seed=4)
    fit = fit_car(y, w)
    cov = fit.sigma2 * np.linalg.inv(np.eye(16) - fit.phi * np.asarray(w.values))
    ll = multivariate_normal(fit.fitted_nonspatial, cov).logpdf(y)
    assert fit.loglik == pytest.approx(ll, abs=1e-8)
    assert fit.aic == pytest.approx(-2 * ll + 2 * 3, abs=1e-7)


def test_intercept_residual_mean_zero():
    w = binary(grid_graph(6, 6))
    y = gen_car_field(w, 0.1, 1.0, 2.0, seed=5)
    fit = fit_car(y, w)
    assert abs(np.mean(y - fit.smoothed)) < 1e-8


@settings(max_examples=10)
@given(st.floats(-50, 50), st.integers(0, 1000))
def test_shift_equivariance(c, seed):
    w = binary(grid_graph(5, 5))
    y = gen_car_field(w, 0.1, 1.0, 0.0, seed=seed)
    a, b = fit_car(y, w), fit_car(y + c, w)
    assert b.phi == pytest.approx(a.phi, abs=1e-6)
    assert b.sigma2 == pytest.approx(a.sigma2, rel=1e-6)
    assert b.beta[0] == pytest.approx(a.beta[0] + c, abs=1e-6)
    np.testing.assert_allclose(b.smoothed, a.smoothed + c, atol=1e-6)


def test_relabeling_equivariance():
    g = grid_graph(5, 5)
    y = gen_car_field(binary(g), 0.1, 1.0, 0.0, seed=9)
    perm = np.random.default_rng(0).permutation(25)
    labels = [g.unit_labels[i] for i in perm]
    edges = g.edges()
    g2 = graph_from_edge_list(labels, edges)
    assert g2.unit_labels == tuple(labels)
    a = fit_car(y, binary(g))
    b = fit_car(y[perm], binary(g2))
    np.testing.assert_allclose(b.smoothed, a.smoothed[perm], atol=1e-8)


def test_heteroskedastic_option():
    w = binary(grid_graph(5, 5))
    y = gen_car_field(w, 0.1, 1.0, 0.0, seed=2)
    v = np.linspace(0.5, 2.0, 25)
    fit = fit_car(y, w, CarOptions(variances=v))
    s = np.sqrt(v)
    D = fit.phi * np.asarray(w.values) * s[:, None] / s[None, :]
    np.testing.assert_allclose(fit.smoothed, fit.fitted_nonspatial + D @ (y - fit.fitted_nonspatial), atol=1e-12)
    unit = fit_car(y, w, CarOptions(variances=np.ones(25)))
    assert unit.phi == pytest.approx(fit_car(y, w).phi, abs=1e-12)


def test_input_errors():
    w = binary(grid_graph(3, 3))
    with pytest.raises(InputError):
        fit_car(np.ones(8), w)
    y = np.arange(9.0)
    y[3] = np.nan
    with pytest.raises(InputError, match="drop or impute"):
        fit_car(y, w)


def _fit(aic, rv):
    return CarFit(0.0, np.zeros(1), 1.0, -aic / 2, aic, rv, np.zeros(3), np.zeros(3), (-1.0, 1.0))


def test_select_lowest_aic():
    sel = select_response({"mean": _fit(-50, 0.1), "q1": _fit(-40, 0.1), "q3": _fit(-42, 0.1)})
    assert sel.best == "mean"
    assert len(sel.table) == 3 and sum(r["selected"] for r in sel.table) == 1


def test_select_tie_breaks_on_residual_variance():
    sel = select_response([("b", _fit(-50.0, 0.02)), ("a", _fit(-50.0 + 5e-7, 0.01))])
    assert sel.best == "a"


def test_select_single_candidate_warns():
    sel = select_response({"mean": _fit(-50, 0.1)})
    assert sel.best == "mean"
    assert sel.warnings
