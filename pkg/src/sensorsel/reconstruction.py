"""Least-squares state estimation from sparse measurements."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .dataio import SnapshotMatrix
from .errors import IllConditionedError, NumericalError, ValidationError
from .pod import as_basis, relative_errors
from .selection import SensorSet

COND_LIMIT = 1e12
MIN_DRAWS = 100


@dataclass
class Measurement:
    """Sensor readings ``y`` ordered like ``sensor_ref.indices``.

    ``values`` may be a (p,) vector or a (p, N) block of N snapshots.
    """

    values: np.ndarray
    sensor_ref: SensorSet | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("measurement contains non-finite values")
        if self.sensor_ref is not None and self.values.shape[0] != self.sensor_ref.p:
            raise ValidationError(f"{self.values.shape[0]} readings for {self.sensor_ref.p} sensors")


@dataclass(frozen=True)
class NoiseModel:
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValidationError(f"sigma must be finite and >= 0, got {self.sigma!r}")


def _indices(sensors) -> np.ndarray:
    if isinstance(sensors, SensorSet):
        return sensors.indices
    return np.asarray(sensors, dtype=np.int64).ravel()


def _factor(g: np.ndarray):
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(f"Gram matrix condition number {cond:.3e} exceeds {COND_LIMIT:.0e}")
    try:
        return sla.cho_factor(g, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("Gram matrix is not positive definite") from None


def estimator(basis, sensors) -> np.ndarray:
    """The r x p matrix ``C^dagger`` mapping readings to latent coefficients.

    ``C^T (C C^T)^{-1}`` when p <= r, ``(C^T C)^{-1} C^T`` when p > r.
    """
    u = as_basis(basis).modes
    c = u[_indices(sensors)]
    p, r = c.shape
    if p <= r:
        return c.T @ sla.cho_solve(_factor(c @ c.T), np.eye(p))
    return sla.cho_solve(_factor(c.T @ c), c.T)


def estimate_state(basis, sensors, y) -> np.ndarray:
    """Latent coefficients ``x_hat`` from readings ``y``.

    Minimum-norm solution for p <= r, least squares for p > r, both via a
    Cholesky solve with the Gram matrix.

    Raises
    ------
    IllConditionedError
        Gram condition number above 1e12.
    """
    u = as_basis(basis).modes
    idx = _indices(sensors)
    yv = y.values if isinstance(y, Measurement) else np.asarray(y, dtype=float)
    if yv.shape[0] != idx.size:
        raise ValidationError(f"{yv.shape[0]} readings for {idx.size} sensors")
    c = u[idx]
    p, r = c.shape
    if p <= r:
        return c.T @ sla.cho_solve(_factor(c @ c.T), yv)
    return sla.cho_solve(_factor(c.T @ c), c.T @ yv)


def reconstruct_field(basis, x_hat) -> np.ndarray:
    """Full state ``U x_hat``."""
    u = as_basis(basis).modes
    x_hat = np.asarray(x_hat, dtype=float)
    if x_hat.shape[0] != u.shape[1]:
        raise ValidationError(f"x_hat has {x_hat.shape[0]} coefficients, basis has {u.shape[1]} modes")
    return u @ x_hat


def reconstruct_snapshots(basis, sensors, truth) -> np.ndarray:
    """Sample ``truth`` at the sensors and reconstruct every column.

    A centered basis has its temporal mean removed from the readings and
    added back to the field.
    """
    basis = as_basis(basis)
    idx = _indices(sensors)
    x = truth.data if isinstance(truth, SnapshotMatrix) else np.atleast_2d(np.asarray(truth, dtype=float))
    y = x[idx]
    if basis.mean is None:
        return reconstruct_field(basis, estimate_state(basis, idx, y))
    mu = basis.mean[:, None]
    return mu + reconstruct_field(basis, estimate_state(basis, idx, y - mu[idx]))


def estimation_error(truth, reconstructed) -> float:
    """``(1/N) sum_j ||x_j - x_hat_j||^2 / ||x_j||^2`` over snapshot columns.

    Zero-norm truth columns are skipped (with a warning giving their
    count). A mask on ``truth`` restricts the norms to valid rows.
    """
    valid = None
    if isinstance(truth, SnapshotMatrix):
        valid = truth.mask
        truth = truth.data
    if isinstance(reconstructed, SnapshotMatrix):
        reconstructed = reconstructed.data
    a = np.asarray(truth, dtype=float)
    b = np.asarray(reconstructed, dtype=float)
    if a.ndim == 1:
        a, b = a[:, None], b.reshape(-1, 1)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    if valid is not None:
        a, b = a[valid], b[valid]
    ratio, zero = relative_errors(a, b)
    if zero.all():
        raise ValidationError("estimation error undefined: every truth column has zero norm")
    if zero.any():
        warnings.warn(f"skipped {int(zero.sum())} zero-norm column(s)", RuntimeWarning, stacklevel=2)
    return float(np.mean(ratio[~zero]))


@dataclass
class CovarianceReport:
    draws: int
    sigma: float
    distance: float
    empirical: np.ndarray
    predicted: np.ndarray
    mean_error: float
    mean_error_bound: float

    @property
    def unbiased(self) -> bool:
        # absolute floor covers the sigma == 0 case, where only round-off remains
        return self.mean_error <= self.mean_error_bound + 1e-12


def verify_error_covariance(basis, sensors, noise: NoiseModel, draws: int = 10_000, seed: int = 0,
                            *, x=None) -> CovarianceReport:
    """Monte Carlo check of ``Cov(x_hat - x) = sigma^2 (C^T C)^{-1}``.

    A fixed latent state ``x`` (standard normal from ``seed`` unless given)
    is observed ``draws`` times through ``y = C x + sigma v``. The estimation
    error of each draw is the estimator applied to the noise alone, which
    equals ``x_hat - x`` exactly in real arithmetic and is exactly zero when
    ``sigma == 0``. ``distance`` is the Frobenius-relative gap between the
    empirical second moment of the errors and the predicted covariance.
    """
    basis = as_basis(basis)
    idx = _indices(sensors)
    u = basis.modes
    p, r = idx.size, u.shape[1]
    if p <= r:
        raise ValidationError(f"covariance check needs p > r (got p={p}, r={r})")
    draws = int(draws)
    if draws < MIN_DRAWS:
        raise ValidationError(f"need at least {MIN_DRAWS} draws, got {draws}")
    rng = np.random.default_rng(seed)
    if x is None:
        x = rng.standard_normal(r)
    c = u[idx]
    pinv = estimator(basis, idx)
    predicted = noise.sigma**2 * np.linalg.inv(c.T @ c)
    v = rng.standard_normal((p, draws))
    err = pinv @ (noise.sigma * v)  # (r, draws)
    x_hat = pinv @ (c @ x)[:, None] + err
    empirical = err @ err.T / draws
    scale = np.linalg.norm(predicted)
    distance = float(np.linalg.norm(empirical - predicted) / scale) if scale > 0 else float(np.linalg.norm(empirical))
    mean_error = float(np.linalg.norm(x_hat.mean(axis=1) - x))
    bound = 3.0 * noise.sigma * math.sqrt(np.trace(np.linalg.inv(c.T @ c)) / draws)
    return CovarianceReport(draws, noise.sigma, distance, empirical, predicted, mean_error, bound)
