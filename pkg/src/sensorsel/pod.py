"""Truncated POD basis of snapshot data and its full-observation error."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataio import SnapshotMatrix
from .errors import NumericalError, ValidationError


@dataclass
class PodBasis:
    """Sensor-candidate matrix U (n x r) with its singular values.

    ``modes`` rows are candidate locations. Rows excluded by ``mask`` are
    kept (as zeros when produced by :func:`compute_pod`) so that indices
    refer to the original grid. ``mean`` is the temporal mean removed
    before the SVD, or None for an uncentered basis.

    Any n x r array can be wrapped, orthonormal or not; the random sensor
    problem uses plain Gaussian matrices.
    """

    modes: np.ndarray
    singular_values: np.ndarray | None = None
    mask: np.ndarray | None = None
    mean: np.ndarray | None = None

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=float)
        if modes.ndim == 1:
            modes = modes[:, None]
        if modes.ndim != 2 or modes.size == 0:
            raise ValidationError(f"modes must be a non-empty 2D array, got shape {modes.shape}")
        if not np.all(np.isfinite(modes)):
            raise ValidationError("modes contain non-finite entries")
        self.modes = modes
        if self.singular_values is not None:
            self.singular_values = np.asarray(self.singular_values, dtype=float).ravel()
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool).ravel()
            if self.mask.shape[0] != modes.shape[0]:
                raise ValidationError("mask length does not match number of rows")
        if self.mean is not None:
            self.mean = np.asarray(self.mean, dtype=float).ravel()
            if self.mean.shape[0] != modes.shape[0]:
                raise ValidationError("mean length does not match number of rows")

    @property
    def n_points(self) -> int:
        return self.modes.shape[0]

    @property
    def r_modes(self) -> int:
        return self.modes.shape[1]

    @property
    def valid(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.n_points, dtype=bool)
        return self.mask

    def truncate(self, r: int) -> "PodBasis":
        """Leading ``r`` modes of this basis."""
        if not 1 <= r <= self.r_modes:
            raise ValidationError(f"r={r} outside [1, {self.r_modes}]")
        sv = None if self.singular_values is None else self.singular_values[:r]
        return PodBasis(self.modes[:, :r], sv, self.mask, self.mean)

    def orthonormality_defect(self) -> float:
        """max |U^T U - I| entrywise."""
        g = self.modes.T @ self.modes
        return float(np.max(np.abs(g - np.eye(self.r_modes))))


def as_basis(basis) -> PodBasis:
    """Accept a :class:`PodBasis` or anything array-like."""
    if isinstance(basis, PodBasis):
        return basis
    return PodBasis(np.asarray(basis, dtype=float))


def _fix_signs(u: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive; argmax gives the
    # lowest index on ties
    piv = np.argmax(np.abs(u), axis=0)
    s = np.sign(u[piv, np.arange(u.shape[1])])
    s[s == 0] = 1.0
    return u * s


def compute_pod(snapshots, r: int, *, center: bool = False) -> PodBasis:
    """Leading ``r`` left singular vectors of the snapshot matrix.

    Masked rows are dropped before the SVD and re-inserted as zero rows.

    Parameters
    ----------
    snapshots : SnapshotMatrix or array_like
        n x m data, columns are snapshots.
    r : int
        Number of modes, ``1 <= r <= min(n_valid, m)``.
    center : bool
        Subtract the temporal (row-wise) mean first. Off by default.

    Returns
    -------
    PodBasis
    """
    if not isinstance(snapshots, SnapshotMatrix):
        snapshots = SnapshotMatrix(snapshots)
    valid = snapshots.valid
    x = snapshots.data[valid]
    r = int(r)
    if not 1 <= r <= min(x.shape):
        raise ValidationError(f"r={r} must lie in [1, min(n_valid, m)] = [1, {min(x.shape)}]")
    mean = None
    if center:
        mu = x.mean(axis=1)
        x = x - mu[:, None]
        mean = np.zeros(snapshots.n)
        mean[valid] = mu
    try:
        u, s, _ = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from None
    u = _fix_signs(u[:, :r])
    modes = np.zeros((snapshots.n, r))
    modes[valid] = u
    return PodBasis(modes, s[:r].copy(), snapshots.mask, mean)


def _project(basis: PodBasis, x: np.ndarray) -> np.ndarray:
    u = basis.modes
    if basis.mean is None:
        return u @ (u.T @ x)
    mu = basis.mean[:, None]
    return mu + u @ (u.T @ (x - mu))


def relative_errors(truth: np.ndarray, approx: np.ndarray):
    """Per-column ``||x - x_hat||^2 / ||x||^2`` and the zero-norm column mask."""
    num = np.sum((truth - approx) ** 2, axis=0)
    den = np.sum(truth**2, axis=0)
    zero = den == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(zero, np.nan, num / np.where(zero, 1.0, den))
    return ratio, zero


def truncation_error(snapshots, basis: PodBasis) -> float:
    """Mean relative squared error of projecting every snapshot onto the basis.

    Only valid (unmasked) rows enter the norms. Zero-norm snapshots are
    skipped and reported through a warning.
    """
    if not isinstance(snapshots, SnapshotMatrix):
        snapshots = SnapshotMatrix(snapshots)
    basis = as_basis(basis)
    if snapshots.n != basis.n_points:
        raise ValidationError(f"snapshot rows n={snapshots.n} do not match basis rows {basis.n_points}")
    valid = snapshots.valid
    x = snapshots.data
    ratio, zero = relative_errors(x[valid], _project(basis, x)[valid])
    if zero.all():
        raise ValidationError("all snapshots have zero norm")
    if zero.any():
        warnings.warn(f"skipped {int(zero.sum())} zero-norm snapshot(s)", RuntimeWarning, stacklevel=2)
    return float(np.mean(ratio[~zero]))
