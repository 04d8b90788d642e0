import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import oracle_weights, random_cloud, stationarity_residual
from sentinel.boundary import (
    EllipsoidBoundary, SphereBoundary, boundary_from_dict, center_square, collect_cloud,
    ellipsoid_score, fit_boundaries, fit_ellipsoid, fit_sphere, midrange_centroid, set_threshold,
    solve_weights, sphere_score,
)
from sentinel.errors import ConfigError, DataError
from sentinel.ssa import fit_subspace

PLUS = np.array([[1, -1, 0, 0], [0, 0, 1, -1]], dtype=float)


def _sinusoid_model(n=1200, lag=40, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    x = 3 + np.sin(2 * np.pi * t / 20) + 0.05 * rng.standard_normal(n)
    return x, fit_subspace(x[:600], lag, dim)


# collect_cloud -----------------------------------------------------------------

def test_cloud_single_column_when_length_equals_lag():
    x, model = _sinusoid_model()
    assert collect_cloud(model, x[:40]).shape == (3, 1)


def test_cloud_default_dims():
    rng = np.random.default_rng(0)
    model = fit_subspace(rng.standard_normal(2400), 500, 3)
    assert collect_cloud(model, rng.standard_normal(4000)).shape == (3, 3501)


def test_cloud_constant_series_identical_columns():
    _, model = _sinusoid_model()
    cloud = collect_cloud(model, np.full(100, 7.0))
    np.testing.assert_allclose(cloud, cloud[:, :1].repeat(cloud.shape[1], axis=1), rtol=1e-12)


def test_cloud_too_short():
    x, model = _sinusoid_model()
    with pytest.raises(DataError):
        collect_cloud(model, x[:39])


def test_cloud_matches_columnwise_projection():
    x, model = _sinusoid_model()
    cloud = collect_cloud(model, x[:200])
    for i in (0, 17, 160):
        np.testing.assert_allclose(cloud[:, i], model.basis.T @ x[i:i + 40], rtol=1e-12)


# sphere ------------------------------------------------------------------------

def test_sphere_examples():
    assert fit_sphere(PLUS, np.zeros(2)).radius_sq == 1.0
    assert fit_sphere(np.array([[2.0], [3.0]]), np.array([2.0, 3.0])).radius_sq == 0.0
    with pytest.raises(DataError):
        fit_sphere(np.empty((2, 0)), np.zeros(2))


def test_sphere_matches_linear_scan():
    x, model = _sinusoid_model()
    cloud = collect_cloud(model, x[:900])
    c = cloud.mean(axis=1)
    best = max(sum((cloud[r, j] - c[r]) ** 2 for r in range(3)) for j in range(cloud.shape[1]))
    assert fit_sphere(cloud, c).radius_sq == pytest.approx(best, rel=1e-12)


def test_sphere_score():
    b = SphereBoundary(np.zeros(2), 1.0)
    assert sphere_score(b, [0, 0]) == 0
    assert sphere_score(b, [3, 4]) == 25
    with pytest.raises(DataError):
        sphere_score(b, [1, 2, 3])


# centroid / center_square / threshold ------------------------------------------

def test_midrange_examples():
    np.testing.assert_array_equal(midrange_centroid(np.array([[0, 2], [0, 4]])), [1, 2])
    np.testing.assert_array_equal(midrange_centroid(PLUS), [0, 0])
    skewed = np.array([[0, 0, 0, 10], [0, 0, 0, 0]], dtype=float)
    np.testing.assert_array_equal(midrange_centroid(skewed), [5, 0])
    assert skewed.mean(axis=1)[0] == 2.5
    with pytest.raises(DataError):
        midrange_centroid(np.empty((2, 0)))


def test_center_square():
    np.testing.assert_array_equal(center_square([1, 2], [1, 2]), [0, 0])
    np.testing.assert_array_equal(center_square([3, 0], [1, 0]), [4, 0])
    rng = np.random.default_rng(0)
    x, c = rng.standard_normal((2, 5))
    np.testing.assert_array_equal(center_square(x, c), [(x[i] - c[i]) ** 2 for i in range(5)])
    with pytest.raises(DataError):
        center_square([1, 2], [1])


def test_set_threshold():
    assert set_threshold(0) == 1
    assert set_threshold(0.1) == 1.1
    assert set_threshold(1) == 2
    with pytest.raises(ConfigError):
        set_threshold(-0.01)
    with pytest.raises(ConfigError):
        set_threshold(float("nan"))


def test_ellipsoid_score():
    b = EllipsoidBoundary(np.zeros(2), np.array([0.25, 1.0]))
    assert ellipsoid_score(b, [0, 0]) == 0
    assert ellipsoid_score(b, [2, 0]) == 1.0
    rng = np.random.default_rng(1)
    w, c, x = rng.uniform(0.1, 2, 3), rng.standard_normal(3), rng.standard_normal(3)
    e = EllipsoidBoundary(c, w)
    assert ellipsoid_score(e, x) == pytest.approx(sum(w[i] * (x[i] - c[i]) ** 2 for i in range(3)), rel=1e-14)
    with pytest.raises(DataError):
        ellipsoid_score(b, [1.0])


# ellipsoid fit -----------------------------------------------------------------

def test_separable_cases_exact():
    np.testing.assert_allclose(fit_ellipsoid(PLUS, np.zeros(2)), [1, 1], atol=1e-8, rtol=0)
    wide = np.array([[2, -2, 0, 0], [0, 0, 1, -1]], dtype=float)
    np.testing.assert_allclose(fit_ellipsoid(wide, np.zeros(2)), [0.25, 1], atol=1e-8, rtol=0)


def test_random_3d_matches_oracle():
    rng = np.random.default_rng(42)
    cloud = random_cloud(rng, 3, 200)
    c = midrange_centroid(cloud)
    a = center_square(cloud, c).T
    w = fit_ellipsoid(cloud, c)
    np.testing.assert_allclose(w, oracle_weights(a), rtol=1e-4)


clouds = st.builds(
    lambda seed, r, k: random_cloud(np.random.default_rng(seed), r, k),
    st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(2, 120),
)


@settings(max_examples=60, deadline=None)
@given(clouds)
def test_fit_postconditions(cloud):
    c = midrange_centroid(cloud)
    a = center_square(cloud, c).T
    sol = solve_weights(a)
    w = sol.weights
    assert np.all(w > 0) and np.all(np.isfinite(w))
    assert sol.max_constraint <= 1 + 1e-9
    assert np.max(a @ w) <= 1 + 1e-9
    assert sol.n_active >= 1
    assert sol.kkt_residual <= 1e-6
    assert stationarity_residual(a, w) <= 1e-6
    # multipliers reconstruct the gradient 1/w
    grad = sol.multipliers @ sol.constraints
    np.testing.assert_allclose(grad * w, 1.0, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(clouds, st.integers(0, 2**32 - 1))
def test_permutation_invariance(cloud, seed):
    c = midrange_centroid(cloud)
    perm = np.random.default_rng(seed).permutation(cloud.shape[1])
    np.testing.assert_allclose(fit_ellipsoid(cloud[:, perm], c), fit_ellipsoid(cloud, c), rtol=1e-9)


@settings(max_examples=30, deadline=None)
@given(clouds, st.floats(1e-2, 1e2), st.data())
def test_axis_scaling_covariance(cloud, s, data):
    axis = data.draw(st.integers(0, cloud.shape[0] - 1))
    c = midrange_centroid(cloud)
    w = fit_ellipsoid(cloud, c)
    scaled = cloud.copy()
    scaled[axis] = c[axis] + s * (cloud[axis] - c[axis])
    ws = fit_ellipsoid(scaled, c)
    expect = w.copy()
    expect[axis] /= s * s
    np.testing.assert_allclose(ws, expect, rtol=1e-7)
    # scores of correspondingly scaled test points are unchanged
    x = cloud[:, 0] + 0.3
    xs = x.copy()
    xs[axis] = c[axis] + s * (x[axis] - c[axis])
    assert ellipsoid_score(EllipsoidBoundary(c, ws), xs) == pytest.approx(
        ellipsoid_score(EllipsoidBoundary(c, w), x), rel=1e-7)


@settings(max_examples=40, deadline=None)
@given(clouds)
def test_semi_axes_bracketed_by_half_range(cloud):
    # Every point is inside, so semi_i >= half range h_i. At the optimum the
    # multipliers sum to R, so 1/w_i <= R * h_i**2.
    c = midrange_centroid(cloud)
    sol = solve_weights(center_square(cloud, c).T)
    h = 0.5 * (cloud.max(axis=1) - cloud.min(axis=1))
    live = ~sol.degenerate_axes
    semi = sol.weights[live] ** -0.5
    assert np.all(semi >= h[live] * (1 - 1e-9))
    assert np.all(semi <= np.sqrt(cloud.shape[0]) * h[live] * (1 + 1e-6))
    assert sol.multipliers.sum() == pytest.approx(live.sum(), rel=1e-6)


def test_corner_points_exceed_inflated_box():
    corners = np.array([[1, 1, -1, -1], [1, -1, 1, -1]], dtype=float)
    w = fit_ellipsoid(corners, np.zeros(2))
    np.testing.assert_allclose(w, [0.5, 0.5], rtol=1e-9)
    assert np.all(w ** -0.5 > np.sqrt(1.1))


def test_circle_gives_equal_weights():
    theta = np.linspace(0, 2 * np.pi, 360, endpoint=False)
    cloud = np.vstack([np.cos(theta), np.sin(theta)]) * 2.0
    c = midrange_centroid(cloud)
    w = fit_ellipsoid(cloud, c)
    assert w[0] == pytest.approx(w[1], rel=1e-6)
    sphere = fit_sphere(cloud, c)
    # with eps=0, alarm sets coincide up to threshold normalisation
    rng = np.random.default_rng(0)
    pts = rng.uniform(-3, 3, size=(2, 500))
    e = EllipsoidBoundary(c, w)
    np.testing.assert_array_equal(e.score(pts) > 1.0 + 1e-6, sphere.score(pts) > sphere.radius_sq * (1 + 1e-6))


def test_volume_not_larger_than_sphere():
    x, model = _sinusoid_model()
    sphere, ellipsoid, _ = fit_boundaries(model, x[:900], 600)
    r = model.signal_dim
    assert np.prod(ellipsoid.semi_axes) <= sphere.radius_sq ** (r / 2) * (1 + 1e-9)


def test_zero_range_axis_is_floored():
    cloud = np.array([[1.0, -1.0, 0.5], [2.0, 2.0, 2.0]])
    c = midrange_centroid(cloud)
    sol = solve_weights(center_square(cloud, c).T)
    assert sol.degenerate_axes.tolist() == [False, True]
    assert sol.weights[0] == pytest.approx(1.0)
    floor = max(1e-6 * 1.0, 1e-12)
    assert sol.weights[1] == pytest.approx(1 / floor**2)
    assert np.all(np.isfinite(sol.weights))


def test_all_axes_degenerate():
    cloud = np.full((3, 10), 4.0)
    sol = solve_weights(center_square(cloud, midrange_centroid(cloud)).T)
    assert np.all(sol.weights == 1 / 1e-12**2)
    assert sol.degenerate_axes.all()


def test_solver_input_validation():
    with pytest.raises(DataError):
        solve_weights(np.empty((0, 2)))
    with pytest.raises(DataError):
        solve_weights(np.array([[1.0, -1.0]]))
    with pytest.raises(DataError):
        solve_weights(np.array([[1.0, np.inf]]))


def test_duplicates_do_not_change_optimum():
    rng = np.random.default_rng(3)
    cloud = random_cloud(rng, 3, 50)
    c = midrange_centroid(cloud)
    doubled = np.hstack([cloud, cloud, cloud[:, :10]])
    np.testing.assert_allclose(fit_ellipsoid(doubled, c), fit_ellipsoid(cloud, c), rtol=1e-12)


# fit_boundaries / serialisation --------------------------------------------------

def test_fit_boundaries_invariants():
    x, model = _sinusoid_model()
    sphere, ellipsoid, sol = fit_boundaries(model, x[:900], 600, epsilon=0.1)
    cloud = collect_cloud(model, x[:900])
    np.testing.assert_allclose(sphere.centroid, collect_cloud(model, x[:600]).mean(axis=1), rtol=1e-12)
    np.testing.assert_array_equal(ellipsoid.centroid, midrange_centroid(cloud))
    assert np.max(sphere.score(cloud)) <= sphere.radius_sq * (1 + 1e-12)
    assert np.max(sphere.score(cloud)) >= sphere.radius_sq * (1 - 1e-12)  # tight
    assert np.max(ellipsoid.score(cloud)) <= 1 + 1e-9
    assert ellipsoid.threshold == 1.1
    assert np.all(ellipsoid.weights > 0)


def test_fit_boundaries_errors():
    x, model = _sinusoid_model()
    with pytest.raises(ConfigError):
        fit_boundaries(model, x[:900], 600, epsilon=-1)
    with pytest.raises(DataError):
        fit_boundaries(model, x[:900], 10)


def test_boundary_round_trip():
    x, model = _sinusoid_model()
    for b in fit_boundaries(model, x[:900], 600, 0.2)[:2]:
        back = boundary_from_dict(b.to_dict())
        assert type(back) is type(b)
        assert back.threshold == b.threshold
        np.testing.assert_array_equal(back.centroid, b.centroid)
        np.testing.assert_array_equal(back.weights, b.weights)
    with pytest.raises(DataError):
        boundary_from_dict({"kind": "torus", "centroid": [0]})


def test_with_epsilon():
    e = EllipsoidBoundary(np.zeros(2), np.ones(2))
    assert e.with_epsilon(0.3).threshold == 1.3
    with pytest.raises(ConfigError):
        e.with_epsilon(-0.1)
