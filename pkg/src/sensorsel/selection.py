"""Greedy and reference sensor selection.

Every selector takes a candidate matrix U (n x r, rows are candidate
locations) and returns a :class:`SensorSet`. Ties in every argmax go to the
lowest row index. Rows excluded by the basis mask are never selected, but
indices always refer to the full row space.

Methods
-------
qr
    Column-pivoted QR greedy on ``V = U`` (p <= r) or ``V = U U^T`` (p > r),
    deflating ``V`` after each pick.
dg
    Determinant greedy. Up to r sensors it maximizes ``det(C C^T)`` through
    the Schur complement of the new row against the selected ones, keeping
    ``(C C^T)^{-1}`` with a block update. Past r sensors it maximizes
    ``det(C^T C)``, keeping ``(C^T C)^{-1}`` with a rank-one inversion-lemma
    update.
qd
    QR greedy up to r sensors, then the oversampled determinant steps.
random, gappy-r
    Uniform random choice, and QR up to r followed by random extra sensors.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import NumericalError, RankDeficiencyError, ValidationError
from .pod import as_basis

RANK_TOL = 1e-12
REFRESH_EVERY = 64
DENSE_WARN_N = 5000

UNDERSAMPLED = "undersampled"
OVERSAMPLED = "oversampled"


@dataclass
class SensorSet:
    """Ordered sensor indices with the argmax value found at each step."""

    indices: np.ndarray
    step_values: np.ndarray
    method: str = ""

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).ravel()
        self.step_values = np.asarray(self.step_values, dtype=float).ravel()
        if self.indices.size != self.step_values.size:
            raise ValidationError("indices and step_values differ in length")
        if np.unique(self.indices).size != self.indices.size:
            raise ValidationError("sensor indices must be distinct")
        if self.indices.size and self.indices.min() < 0:
            raise ValidationError("negative sensor index")

    def __len__(self):
        return self.indices.size

    @property
    def p(self) -> int:
        return self.indices.size

    def prefix(self, k: int) -> "SensorSet":
        return SensorSet(self.indices[:k], self.step_values[:k], self.method)

    def selection_matrix(self, n: int) -> np.ndarray:
        """The p x n 0/1 matrix H with ``H U = C``."""
        h = np.zeros((self.p, n))
        h[np.arange(self.p), self.indices] = 1.0
        return h


@dataclass
class GramState:
    """Running inverse Gram matrix of the selected rows.

    ``inv`` is ``(C C^T)^{-1}`` (k x k) in the undersampled regime and
    ``(C^T C)^{-1}`` (r x r) in the oversampled one. ``logdet`` is the log
    of the matching Gram determinant.
    """

    regime: str
    inv: np.ndarray
    logdet: float = 0.0
    updates: int = 0

    @classmethod
    def empty(cls) -> "GramState":
        return cls(UNDERSAMPLED, np.zeros((0, 0)), 0.0, 0)


def spd_inverse(g: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    try:
        low = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NumericalError("Gram matrix is not positive definite") from None
    linv = sla.solve_triangular(low, np.eye(g.shape[0]), lower=True)
    return linv.T @ linv


def gram_update_under(state: GramState, c_prev: np.ndarray, u_new: np.ndarray, *, tol: float = RANK_TOL) -> GramState:
    """Append row ``u_new`` to ``C`` and update ``(C C^T)^{-1}`` blockwise.

    With ``M = (C C^T)^{-1}``, ``c = C u^T`` and the Schur complement
    ``delta = u u^T - c^T M c``, the new inverse is
    ``[[M + (Mc)(Mc)^T / delta, -Mc / delta], [-(Mc)^T / delta, 1 / delta]]``
    and the log-determinant grows by ``log(delta)``.

    Raises
    ------
    RankDeficiencyError
        ``delta <= tol``: the new row is (numerically) in the span of ``C``.
    """
    if state.regime != UNDERSAMPLED:
        raise ValidationError("gram_update_under needs an undersampled state")
    u = np.asarray(u_new, dtype=float).ravel()
    c_prev = np.asarray(c_prev, dtype=float).reshape(-1, u.size)
    m = state.inv
    k = c_prev.shape[0]
    if m.shape != (k, k):
        raise ValidationError(f"state inverse is {m.shape}, expected ({k}, {k})")
    c = c_prev @ u
    mc = m @ c
    delta = float(u @ u - c @ mc)
    if not np.isfinite(delta):
        raise NumericalError(f"non-finite Schur complement at step {k + 1}")
    if delta <= tol:
        raise RankDeficiencyError(k + 1, delta)
    new = np.empty((k + 1, k + 1))
    new[:k, :k] = m + np.outer(mc, mc) / delta
    new[:k, k] = new[k, :k] = -mc / delta
    new[k, k] = 1.0 / delta
    return GramState(UNDERSAMPLED, new, state.logdet + np.log(delta), state.updates + 1)


def gram_update_over(state: GramState, u_new: np.ndarray) -> GramState:
    """Add ``u^T u`` to ``C^T C`` and update its inverse by the inversion lemma.

    ``inv <- inv (I - u^T (1 + u inv u^T)^{-1} u inv)``; the log-determinant
    grows by ``log(1 + u inv u^T)``.
    """
    if state.regime != OVERSAMPLED:
        raise ValidationError("gram_update_over needs an oversampled state")
    u = np.asarray(u_new, dtype=float).ravel()
    m = state.inv
    mu = m @ u
    gain = 1.0 + float(u @ mu)
    if not np.isfinite(gain) or gain <= 0.0:
        raise NumericalError(f"invalid inversion-lemma denominator {gain!r}")
    # inv (I - u^T u inv / gain) == inv - (inv u^T)(u inv) / gain, inv symmetric
    new = m - np.outer(mu, mu) / gain
    if not np.all(np.isfinite(new)):
        raise NumericalError("non-finite inverse after rank-one update")
    return GramState(OVERSAMPLED, new, state.logdet + np.log(gain), state.updates + 1)


def refresh_state(state: GramState, c: np.ndarray) -> GramState:
    """Recompute the inverse directly from the selected rows."""
    g = c @ c.T if state.regime == UNDERSAMPLED else c.T @ c
    return GramState(state.regime, spd_inverse(g), state.logdet, state.updates)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _setup(basis, p: int):
    basis = as_basis(basis)
    u = basis.modes
    avail = basis.valid.copy()
    p = int(p)
    if p < 1:
        raise ValidationError(f"number of sensors must be >= 1, got {p}")
    if p > int(avail.sum()):
        raise ValidationError(f"p={p} exceeds the {int(avail.sum())} valid candidates")
    return basis, u, avail, p


def _argmax(values: np.ndarray, avail: np.ndarray) -> int:
    v = np.where(avail, values, -np.inf)
    return int(np.argmax(v))


def _oversample(u, avail, rows, state, steps):
    """Run ``steps`` oversampled determinant-greedy picks; mutates ``avail``."""
    work = u.copy()
    work[~avail] = 0.0
    picked, values = [], []
    for _ in range(steps):
        k = len(rows) + 1
        crit = 1.0 + np.einsum("ij,ij->i", work @ state.inv, work)
        i = _argmax(crit, avail)
        val = crit[i]
        if not np.isfinite(val):
            raise NumericalError(f"non-finite selection criterion at step {k}")
        state = gram_update_over(state, u[i])
        rows.append(u[i])
        work[i] = 0.0
        avail[i] = False
        picked.append(i)
        values.append(val)
        if state.updates % REFRESH_EVERY == 0:
            state = refresh_state(state, np.asarray(rows))
    return picked, values, state


def step_increments(u: np.ndarray, indices) -> np.ndarray:
    """Gram determinant ratio contributed by each row of a given selection.

    Computed from direct log-determinants, so it applies to any selection;
    rank-deficient steps report 0.
    """
    u = np.asarray(u, dtype=float)
    r = u.shape[1]
    out = np.empty(len(indices))
    prev = 0.0
    for k in range(1, len(indices) + 1):
        c = u[np.asarray(indices[:k])]
        g = c @ c.T if k <= r else c.T @ c
        sign, ld = np.linalg.slogdet(g)
        if sign <= 0 or not np.isfinite(prev):
            out[k - 1] = 0.0
            prev = -np.inf
        else:
            out[k - 1] = np.exp(ld - prev)
            prev = ld
    return out


# ---------------------------------------------------------------------------
# selectors
# ---------------------------------------------------------------------------

def select_qr(basis, p: int, *, tol: float = RANK_TOL) -> SensorSet:
    """QR-pivoting greedy selection.

    ``V = U`` when ``p <= r`` and ``V = U U^T`` otherwise. Each step takes
    the row of ``V`` with the largest squared norm, ``w``, then deflates
    ``V <- V - V w^T w / ||w||^2``.

    Beyond r steps the rows of ``U U^T`` are exhausted up to round-off and
    the picks follow that residual; the rank check therefore only covers
    the first ``min(p, r)`` steps.
    """
    basis, u, avail, p = _setup(basis, p)
    n, r = u.shape
    if p <= r:
        v = u.copy()
    else:
        if n > DENSE_WARN_N:
            warnings.warn(f"QR oversampling forms a dense {n}x{n} matrix", RuntimeWarning, stacklevel=2)
        v = u @ u.T
    v[~avail] = 0.0
    picked, values = [], []
    for k in range(1, p + 1):
        norms = np.einsum("ij,ij->i", v, v)
        i = _argmax(norms, avail)
        val = float(norms[i])
        if not np.isfinite(val):
            raise NumericalError(f"non-finite pivot norm at step {k}")
        if k <= r and val <= tol:
            raise RankDeficiencyError(k, val)
        w = v[i].copy()
        if val > 0.0:
            v -= np.outer(v @ w, w / val)
        avail[i] = False
        picked.append(i)
        values.append(val)
    return SensorSet(picked, values, "qr")


def select_dg(basis, p: int, *, tol: float = RANK_TOL) -> SensorSet:
    """Determinant-based greedy selection.

    For step ``k <= r`` the pick maximizes the Schur complement
    ``u_i (I - C^T (C C^T)^{-1} C) u_i^T``, which is the factor by which
    ``det(C C^T)`` grows. For ``k > r`` it maximizes
    ``1 + u_i (C^T C)^{-1} u_i^T``, the growth factor of ``det(C^T C)``.
    Selected rows are zeroed in a working copy.

    Raises
    ------
    RankDeficiencyError
        An undersampled pivot is ``<= tol``.
    """
    basis, u, avail, p = _setup(basis, p)
    n, r = u.shape
    work = u.copy()
    work[~avail] = 0.0
    sq = np.einsum("ij,ij->i", work, work)
    rows: list[np.ndarray] = []
    picked, values = [], []
    state = GramState.empty()
    for k in range(1, min(p, r) + 1):
        if k == 1:
            crit = sq
        else:
            b = work @ np.asarray(rows).T
            crit = sq - np.einsum("ij,ij->i", b @ state.inv, b)
        i = _argmax(crit, avail)
        val = float(crit[i])
        if not np.isfinite(val):
            raise NumericalError(f"non-finite selection criterion at step {k}")
        if val <= tol:
            raise RankDeficiencyError(k, val)
        state = gram_update_under(state, np.asarray(rows).reshape(-1, r), u[i], tol=tol)
        rows.append(u[i])
        work[i] = 0.0
        sq[i] = 0.0
        avail[i] = False
        picked.append(i)
        values.append(val)
        if state.updates % REFRESH_EVERY == 0:
            state = refresh_state(state, np.asarray(rows))
    if p > r:
        c = np.asarray(rows)
        # square C: (C^T C)^{-1} = C^T (C C^T)^{-2} C
        over = c.T @ state.inv @ state.inv @ c
        over = 0.5 * (over + over.T)
        state = GramState(OVERSAMPLED, over, state.logdet, state.updates)
        more, vals, state = _oversample(u, avail, rows, state, p - r)
        picked += more
        values += vals
    return SensorSet(picked, values, "dg")


def select_qd(basis, p: int, *, seed_method: str = "qr", tol: float = RANK_TOL) -> SensorSet:
    """Hybrid: QR greedy for the first ``min(p, r)`` sensors, determinant greedy after.

    The oversampled stage starts from ``(U^T H^T H U)^{-1}`` of the first r
    sensors. ``seed_method="dg"`` seeds with :func:`select_dg` instead of QR;
    both give the same sensors.
    """
    basis, u, avail, p = _setup(basis, p)
    r = u.shape[1]
    if seed_method == "qr":
        first = select_qr(basis, min(p, r), tol=tol)
    elif seed_method == "dg":
        first = select_dg(basis, min(p, r), tol=tol)
    else:
        raise ValidationError(f"unknown seed method {seed_method!r}")
    if p <= r:
        return SensorSet(first.indices, first.step_values, "qd")
    c = u[first.indices]
    g = c.T @ c
    sign, ld = np.linalg.slogdet(g)
    if sign <= 0:
        raise NumericalError("seed Gram matrix is singular")
    state = GramState(OVERSAMPLED, spd_inverse(g), float(ld), 0)
    avail[first.indices] = False
    more, vals, _ = _oversample(u, avail, list(c), state, p - r)
    return SensorSet(np.concatenate([first.indices, more]), np.concatenate([first.step_values, vals]), "qd")


def select_random(n: int, p: int, mask=None, seed: int = 0, *, basis=None) -> SensorSet:
    """Uniform sample of ``p`` distinct valid indices out of ``n``.

    Draws come from ``numpy.random.default_rng(seed)`` (PCG64), whose stream
    is identical across platforms for a given NumPy version. With a
    ``basis`` the step values are the Gram-determinant ratios of the drawn
    rows; otherwise they are zero.
    """
    valid = np.ones(int(n), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).ravel()
    if valid.size != n:
        raise ValidationError("mask length does not match n")
    cand = np.flatnonzero(valid)
    p = int(p)
    if not 1 <= p <= cand.size:
        raise ValidationError(f"p={p} outside [1, {cand.size}] valid candidates")
    rng = np.random.default_rng(seed)
    idx = rng.choice(cand, size=p, replace=False)
    vals = np.zeros(p) if basis is None else step_increments(as_basis(basis).modes, idx)
    return SensorSet(idx, vals, "random")


def select_gappy_r(basis, p: int, seed: int = 0, *, tol: float = RANK_TOL) -> SensorSet:
    """QR greedy for the first ``min(p, r)`` sensors, uniform random beyond."""
    basis, u, avail, p = _setup(basis, p)
    r = u.shape[1]
    first = select_qr(basis, min(p, r), tol=tol)
    if p <= r:
        return SensorSet(first.indices, first.step_values, "gappy-r")
    avail[first.indices] = False
    rng = np.random.default_rng(seed)
    extra = rng.choice(np.flatnonzero(avail), size=p - r, replace=False)
    idx = np.concatenate([first.indices, extra])
    vals = np.concatenate([first.step_values, step_increments(u, idx)[r:]])
    return SensorSet(idx, vals, "gappy-r")


METHODS = ("qr", "dg", "qd", "random", "gappy-r")


def select(basis, p: int, method: str, *, seed: int = 0, seed_method: str = "qr") -> SensorSet:
    """Dispatch to one of the selectors in :data:`METHODS`."""
    basis = as_basis(basis)
    if method == "qr":
        return select_qr(basis, p)
    if method == "dg":
        return select_dg(basis, p)
    if method == "qd":
        return select_qd(basis, p, seed_method=seed_method)
    if method == "random":
        return select_random(basis.n_points, p, basis.mask, seed, basis=basis)
    if method == "gappy-r":
        return select_gappy_r(basis, p, seed)
    raise ValidationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
