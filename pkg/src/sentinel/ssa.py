"""Singular spectrum analysis front end.

Only the first two SSA stages are needed here: embedding the series into a
Hankel trajectory matrix and extracting the leading eigenvectors of its
lagged covariance. Those eigenvectors span the signal subspace that the
detectors score in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from sentinel.errors import ConfigError, DataError, NumericalError

MODEL_FORMAT = "sentinel.subspace/1"


def hankel(values, lag: int) -> np.ndarray:
    """L x K trajectory matrix (read-only view); column j is values[j:j+lag]."""
    values = np.asarray(values, dtype=np.float64)
    if lag < 1 or lag > len(values):
        raise ConfigError(f"lag {lag} incompatible with series of length {len(values)}")
    return sliding_window_view(values, lag).T


def embed(values, lag: int) -> np.ndarray:
    """Trajectory matrix of ``values`` with window length ``lag``.

    Requires ``1 < lag < N/2``.

    >>> embed([1., 2., 3., 4., 5.], 2)
    array([[1., 2., 3., 4.],
           [2., 3., 4., 5.]])
    """
    n = len(values)
    if not (1 < lag and 2 * lag < n):
        raise ConfigError(f"lag L={lag} requires 1 < L < N/2 with N={n}")
    return hankel(values, lag)


def lagged_covariance(trajectory: np.ndarray) -> np.ndarray:
    """Unnormalised lagged covariance M M^T, symmetrised exactly."""
    s = trajectory @ trajectory.T
    return 0.5 * (s + s.T)


def eigh(s: np.ndarray, sym_tol: float = 1e-10):
    """Full eigendecomposition of a symmetric matrix, sorted by descending eigenvalue.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors as columns. Each
    eigenvector is oriented so its largest-magnitude component is positive.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DataError(f"expected a square matrix, got shape {s.shape}")
    scale = np.max(np.abs(s)) if s.size else 0.0
    asym = np.max(np.abs(s - s.T)) if s.size else 0.0
    if asym > sym_tol * max(scale, np.finfo(float).tiny):
        raise DataError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    try:
        vals, vecs = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed to converge: {exc}") from exc
    order = np.argsort(vals, kind="stable")[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    return vals, _orient(vecs)


def _orient(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[idx, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    return vecs * signs


@dataclass(frozen=True)
class SubspaceModel:
    """Projection onto the R-dimensional signal subspace of a lag-L embedding."""

    lag: int
    signal_dim: int
    basis: np.ndarray  # L x R, orthonormal columns
    spectrum: np.ndarray  # all L eigenvalues, descending

    @property
    def capture_ratio(self) -> float:
        """Share of the eigenvalue mass held by the R leading components."""
        total = float(np.sum(self.spectrum))
        if total <= 0:
            return 1.0
        return float(np.sum(self.spectrum[: self.signal_dim]) / total)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "lag": self.lag,
            "signal_dim": self.signal_dim,
            "basis": [float(x) for x in self.basis.ravel(order="C")],
            "spectrum": [float(x) for x in self.spectrum],
        }

    @classmethod
    def from_dict(cls, record: dict) -> "SubspaceModel":
        if record.get("format") != MODEL_FORMAT:
            raise DataError(f"unsupported subspace model format {record.get('format')!r}")
        lag, dim = int(record["lag"]), int(record["signal_dim"])
        basis = np.asarray(record["basis"], dtype=np.float64).reshape(lag, dim)
        return cls(lag, dim, basis, np.asarray(record["spectrum"], dtype=np.float64))


def fit_subspace(values, lag: int, signal_dim: int) -> SubspaceModel:
    """Learn the signal subspace from an attack-free training series."""
    if not (1 <= signal_dim <= lag):
        raise ConfigError(f"signal dimension R={signal_dim} must satisfy 1 <= R <= L={lag}")
    trajectory = embed(values, lag)
    vals, vecs = eigh(lagged_covariance(trajectory))
    basis = np.ascontiguousarray(vecs[:, :signal_dim])
    return SubspaceModel(lag, signal_dim, basis, vals)


def project(model: SubspaceModel, lagged) -> np.ndarray:
    """U^T applied to a lagged vector (length L) or to each column of an L x K matrix."""
    lagged = np.asarray(lagged, dtype=np.float64)
    if lagged.shape[0] != model.lag:
        raise DataError(f"lagged input has leading size {lagged.shape[0]}, model lag is {model.lag}")
    return model.basis.T @ lagged
