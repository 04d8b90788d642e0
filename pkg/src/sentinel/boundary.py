"""Decision boundaries in signal space.

Two boundary kinds enclose the projected normal cloud:

* ``SphereBoundary`` -- squared Euclidean distance from the projected mean of
  the training cloud, threshold = largest distance seen on train+validation.
* ``EllipsoidBoundary`` -- axis-aligned ellipsoid about the per-axis midrange,
  with weights chosen to minimise the ellipsoid volume subject to containing
  every train+validation point, threshold = 1 + slack.

The ellipsoid weights solve ``max sum(log w) s.t. A w <= 1, w > 0`` where row
``j`` of ``A`` is ``(x_j - c)**2``. The problem is strictly concave with
non-negative linear constraints. A primal-dual interior point method reaches the
unique optimum in a few dozen iterations; the dimension is the signal
dimension R (small).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from sentinel._kernel import stream_scores
from sentinel.errors import ConfigError, DataError, NumericalError
from sentinel.ssa import SubspaceModel, hankel

AXIS_FLOOR_REL = 1e-6
AXIS_FLOOR_ABS = 1e-12
USABLE_KKT = 1e-8


def collect_cloud(model: SubspaceModel, values) -> np.ndarray:
    """Project every lagged vector of ``values`` into signal space (R x K')."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) < model.lag:
        raise DataError(f"need at least L={model.lag} values to build a cloud, got {len(values)}")
    cloud = model.basis.T @ hankel(values, model.lag)
    if not np.all(np.isfinite(cloud)):
        raise NumericalError("signal cloud contains non-finite values")
    return cloud


def _as_cloud(cloud) -> np.ndarray:
    cloud = np.asarray(cloud, dtype=np.float64)
    if cloud.ndim == 1:
        cloud = cloud[:, None]
    if cloud.ndim != 2 or cloud.shape[1] == 0:
        raise DataError("signal cloud is empty")
    return cloud


def _check_len(x: np.ndarray, centroid: np.ndarray) -> None:
    if x.shape[0] != centroid.shape[0]:
        raise DataError(f"point has dimension {x.shape[0]}, boundary has {centroid.shape[0]}")


def center_square(x, centroid) -> np.ndarray:
    """Element-wise ``(x - c)**2``; ``x`` may be a vector or an R x K matrix."""
    x = np.asarray(x, dtype=np.float64)
    centroid = np.asarray(centroid, dtype=np.float64)
    _check_len(x, centroid)
    d = x - (centroid if x.ndim == 1 else centroid[:, None])
    return d * d


def midrange_centroid(cloud) -> np.ndarray:
    """Per-axis midpoint of the cloud's range. Unlike the mean, not pulled toward dense regions."""
    cloud = _as_cloud(cloud)
    return 0.5 * (cloud.min(axis=1) + cloud.max(axis=1))


def set_threshold(epsilon: float) -> float:
    if not epsilon >= 0:
        raise ConfigError(f"slack epsilon must be non-negative, got {epsilon}")
    return 1.0 + epsilon


@dataclass(frozen=True)
class SphereBoundary:
    centroid: np.ndarray
    radius_sq: float

    kind = "sphere"

    @property
    def threshold(self) -> float:
        return self.radius_sq

    @property
    def weights(self) -> np.ndarray:
        return np.ones_like(self.centroid)

    def score(self, x) -> np.ndarray:
        return center_square(x, self.centroid).sum(axis=0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "centroid": [float(c) for c in self.centroid], "radius_sq": float(self.radius_sq)}


@dataclass(frozen=True)
class EllipsoidBoundary:
    """Axis-aligned ellipsoid ``sum(w * (x - c)**2) <= 1 + epsilon``.

    Semi-axis ``i`` has length ``w[i] ** -0.5`` at the unit level set.
    """

    centroid: np.ndarray
    weights: np.ndarray
    epsilon: float = 0.0

    kind = "ellipsoid"

    @property
    def threshold(self) -> float:
        return set_threshold(self.epsilon)

    @property
    def semi_axes(self) -> np.ndarray:
        return self.weights ** -0.5

    def score(self, x) -> np.ndarray:
        return self.weights @ center_square(x, self.centroid)

    def with_epsilon(self, epsilon: float) -> "EllipsoidBoundary":
        set_threshold(epsilon)
        return EllipsoidBoundary(self.centroid, self.weights, epsilon)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "centroid": [float(c) for c in self.centroid],
            "weights": [float(w) for w in self.weights],
            "epsilon": float(self.epsilon),
        }


def boundary_from_dict(record: dict):
    kind = record.get("kind")
    centroid = np.asarray(record["centroid"], dtype=np.float64)
    if kind == "sphere":
        return SphereBoundary(centroid, float(record["radius_sq"]))
    if kind == "ellipsoid":
        return EllipsoidBoundary(centroid, np.asarray(record["weights"], dtype=np.float64), float(record["epsilon"]))
    raise DataError(f"unknown boundary kind {kind!r}")


def sphere_score(boundary: SphereBoundary, x) -> float:
    return boundary.score(np.asarray(x, dtype=np.float64))


def ellipsoid_score(boundary: EllipsoidBoundary, x) -> float:
    return boundary.score(np.asarray(x, dtype=np.float64))


def fit_sphere(cloud, centroid) -> SphereBoundary:
    """Radius^2 = largest squared distance from ``centroid`` over the cloud."""
    cloud = _as_cloud(cloud)
    centroid = np.asarray(centroid, dtype=np.float64)
    radius_sq = float(np.max(center_square(cloud, centroid).sum(axis=0)))
    return SphereBoundary(centroid, radius_sq)


@dataclass
class WeightSolution:
    weights: np.ndarray
    multipliers: np.ndarray  # one per row of the deduplicated constraint matrix
    constraints: np.ndarray  # deduplicated rows a_j (original scale)
    kkt_residual: float
    iterations: int
    degenerate_axes: np.ndarray  # bool mask of zero-range axes set to the floor

    @property
    def max_constraint(self) -> float:
        return float(np.max(self.constraints @ self.weights)) if len(self.constraints) else 0.0

    @property
    def n_active(self) -> int:
        return int(np.sum(self.constraints @ self.weights >= 1.0 - 1e-6))


def _primal_dual(b: np.ndarray, tol: float, max_iter: int):
    """Primal-dual interior point for ``max sum(log v) s.t. b v <= 1``.

    ``b`` is non-negative with every column maximum equal to 1. Slacks are
    recomputed as ``1 - b v`` each iteration, so iterates stay exactly primal
    feasible. Newton systems are solved in ``v``-scaled coordinates, where the
    reduced matrix is ``I + (b V)^T diag(lam / s) (b V)``.
    """
    m, r = b.shape
    eye = np.eye(r)
    v = np.full(r, 0.5 / r)
    s = 1.0 - b @ v
    # Start on the central path: lam = mu / s with mu fitted to stationarity.
    g = v * (b.T @ (1.0 / s))
    lam = (float(g.sum()) / float(g @ g)) / s

    def newton(rd, rc):
        bv = b * v
        lhs = eye + bv.T @ (bv * (lam / s)[:, None])
        rhs = -v * (rd - b.T @ (rc / s))
        dv = v * np.linalg.solve(lhs, rhs)
        ds = -(b @ dv)
        dlam = (-rc - lam * ds) / s
        return dv, ds, dlam

    def max_step(x, dx):
        neg = dx < 0
        return min(1.0, float(np.min(-x[neg] / dx[neg]))) if np.any(neg) else 1.0

    # Rounding can stall the residual just above a tight tol; the best iterate
    # is then returned if it is accurate to ``usable``.
    usable = max(tol, USABLE_KKT)
    best = (np.inf, v, lam, 0)
    stationarity = gap = np.inf
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            rd = -1.0 / v + b.T @ lam
            gap = float(lam @ s)
            stationarity = float(np.max(np.abs(v * rd)))
            if stationarity <= tol and gap <= tol:
                return v, lam, it - 1
            if max(stationarity, gap) < best[0]:
                best = (max(stationarity, gap), v, lam, it - 1)
            mu = gap / m
            try:
                dv, ds, dlam = newton(rd, lam * s)
                alpha = min(max_step(v, dv), max_step(s, ds), max_step(lam, dlam))
                mu_aff = float((lam + alpha * dlam) @ (s + alpha * ds)) / m
                sigma = min((mu_aff / mu) ** 3, 1.0)
                if stationarity > 1e-2:
                    sigma = max(sigma, 0.1)
                dv, ds, dlam = newton(rd, lam * s + dlam * ds - sigma * mu)
            except np.linalg.LinAlgError:
                return _best_or_raise(best, usable, "singular Newton system in ellipsoid fit", it)
            alpha = 0.995 * min(max_step(v, dv), max_step(s, ds), max_step(lam, dlam))
            v = v + alpha * dv
            lam = lam + alpha * dlam
            stepped = s + alpha * ds
            s = 1.0 - b @ v
            # Active slacks near 1e-16 can round to <= 0; the stepped value is positive by construction.
            s = np.where(s > 0, s, stepped)
            ok = np.all(np.isfinite(v)) and np.all(np.isfinite(lam))
            if not (ok and np.all(v > 0) and np.all(s > 0) and np.all(lam > 0)):
                return _best_or_raise(best, usable, "interior point iterate left the feasible region", it)
    return _best_or_raise(best, usable, f"ellipsoid fit did not converge in {max_iter} iterations", max_iter)


def _best_or_raise(best, usable, message, iterations):
    residual, v, lam, it = best
    if residual <= usable:
        return v, lam, it
    raise NumericalError(message, iterations, residual)


def solve_weights(a, tol: float = 1e-10, max_iter: int = 100_000,
                  axis_floor: Optional[float] = None) -> WeightSolution:
    """Maximise ``sum(log w)`` subject to ``a @ w <= 1`` and ``w > 0``.

    ``a`` is a K x R non-negative matrix. Axes whose column is identically zero
    are unconstrained; their weight is set to ``1 / axis_floor**2``. The same cap
    applies to any axis whose optimal semi-axis falls below the floor.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0:
        raise DataError("no constraints: the signal cloud is empty")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise DataError("constraint rows must be finite and non-negative")
    r = a.shape[1]
    col_max = a.max(axis=0)
    if axis_floor is None:
        scale = float(np.sqrt(col_max.max()))
        axis_floor = max(AXIS_FLOOR_REL * scale, AXIS_FLOOR_ABS)
    w_cap = 1.0 / axis_floor**2

    live = col_max > 0
    rows = np.unique(a, axis=0)
    rows = rows[np.any(rows[:, live] > 0, axis=1)] if np.any(live) else rows[:0]

    weights = np.full(r, w_cap)
    lam = np.zeros(len(rows))
    iterations = 0
    residual = 0.0
    if np.any(live):
        b = rows[:, live] / col_max[live]
        v, lam, iterations = _primal_dual(b, tol=tol, max_iter=max_iter)
        # Slack is kept positive, but b @ v can still round a hair above 1.
        peak = float(np.max(b @ v))
        if peak > 1.0:
            v = v / peak
        weights[live] = v / col_max[live]
        stationarity = float(np.max(np.abs(1.0 - v * (b.T @ lam))))
        complementarity = float(np.sum(lam * (1.0 - b @ v)))
        residual = max(stationarity, complementarity)
    weights = np.minimum(weights, w_cap)
    return WeightSolution(weights, lam, rows, residual, iterations, ~live)


def fit_ellipsoid(cloud, centroid, tol: float = 1e-10) -> np.ndarray:
    """Minimum-volume axis-aligned ellipsoid weights about ``centroid`` enclosing the cloud."""
    cloud = _as_cloud(cloud)
    centroid = np.asarray(centroid, dtype=np.float64)
    return solve_weights(center_square(cloud, centroid).T, tol=tol).weights


def fit_boundaries(model: SubspaceModel, fit_values, train_len: int, epsilon: float = 0.0):
    """Fit both boundary kinds on the train+validation series ``fit_values``.

    The sphere is centred on the mean of the training-only part of the cloud;
    the ellipsoid on the midrange of the whole cloud. Returns
    ``(sphere, ellipsoid, solution)``.
    """
    set_threshold(epsilon)
    cloud = collect_cloud(model, fit_values)
    k_train = train_len - model.lag + 1
    if k_train < 1:
        raise DataError(f"training length {train_len} shorter than lag {model.lag}")
    centre = cloud[:, :k_train].mean(axis=1)
    # Radius from the online kernel itself, so no fit point can alarm through rounding.
    radius_sq = float(np.max(stream_scores(fit_values, model.basis.T, centre, np.ones(model.signal_dim))))
    sphere = SphereBoundary(centre, radius_sq)
    centroid = midrange_centroid(cloud)
    solution = solve_weights(center_square(cloud, centroid).T)
    ellipsoid = EllipsoidBoundary(centroid, solution.weights, epsilon)
    return sphere, ellipsoid, solution
