"""Objective values and checks of the theory behind the greedy selectors.

The regularized objective used throughout is

    f(S) = log det(C_S^T C_S + eps I) - r log eps = log det(I + C_S^T C_S / eps)

which is zero for the empty set, monotone and submodular, so greedy
maximization is within a factor (1 - 1/e) of the optimum.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .pod import as_basis
from .selection import SensorSet, step_increments

DEFAULT_EPSILON = 1e-6
BRUTE_FORCE_LIMIT = 10**6
RESIDUAL_MAX_N = 5000


@dataclass(frozen=True)
class ObjectiveConfig:
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValidationError(f"epsilon must be positive and finite, got {self.epsilon!r}")


def _indices(sensors) -> np.ndarray:
    if isinstance(sensors, SensorSet):
        return sensors.indices
    return np.asarray(list(sensors), dtype=np.int64).ravel()


def gram(u: np.ndarray, idx) -> np.ndarray:
    """``C C^T`` when p <= r, else ``C^T C``."""
    c = u[np.asarray(idx, dtype=np.int64)]
    return c @ c.T if c.shape[0] <= u.shape[1] else c.T @ c


def logdet_gram(basis, sensors) -> float:
    """log det of the estimation Gram matrix; ``-inf`` when singular."""
    u = as_basis(basis).modes
    idx = _indices(sensors)
    if idx.size == 0:
        raise ValidationError("empty sensor set")
    sign, ld = np.linalg.slogdet(gram(u, idx))
    return float(ld) if sign > 0 else -np.inf


def det_gram(basis, sensors) -> float:
    """``det(C C^T)`` for p <= r, ``det(C^T C)`` for p > r.

    Singular selections give 0 (or a round-off sized value); overflow gives
    ``inf``. Use :func:`det_gram_parts` for large magnitudes.
    """
    ld = logdet_gram(basis, sensors)
    return 0.0 if ld == -np.inf else float(np.exp(ld))


def det_gram_parts(basis, sensors) -> tuple[float, int]:
    """Gram determinant as ``(mantissa, exponent)`` with ``det = mantissa * 10**exponent``."""
    ld = logdet_gram(basis, sensors)
    return split_log(ld)


def split_log(ld: float) -> tuple[float, int]:
    if ld == -np.inf:
        return 0.0, 0
    l10 = ld / math.log(10.0)
    e = math.floor(l10)
    return 10.0 ** (l10 - e), int(e)


def unified_logdet(basis, sensors, cfg: ObjectiveConfig = ObjectiveConfig()) -> float:
    """``f(S) = log det(C^T C + eps I) - r log eps``.

    Evaluated as ``log det(I + G / eps)`` on the smaller of ``C C^T`` and
    ``C^T C`` (the two share their nonzero spectrum) through a Cholesky
    factor, so the ``r log eps`` offset never has to be subtracted.
    """
    u = as_basis(basis).modes
    idx = _indices(sensors)
    if idx.size == 0:
        return 0.0
    g = gram(u, idx)
    m = np.eye(g.shape[0]) + g / cfg.epsilon
    try:
        low = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise NumericalError("regularized Gram matrix is not positive definite") from None
    f = 2.0 * float(np.sum(np.log(np.diag(low))))
    if not math.isfinite(f):
        raise NumericalError("non-finite objective value")
    return f


def _batch_objective(u: np.ndarray, combos: np.ndarray, eps: float) -> np.ndarray:
    c = u[combos]  # (K, p, r)
    p, r = combos.shape[1], u.shape[1]
    g = c @ np.swapaxes(c, 1, 2) if p <= r else np.swapaxes(c, 1, 2) @ c
    k = g.shape[-1]
    sign, ld = np.linalg.slogdet(np.eye(k) + g / eps)
    return np.where(sign > 0, ld, -np.inf)


def brute_force_optimal(basis, p: int, cfg: ObjectiveConfig = ObjectiveConfig(), *, limit: int = BRUTE_FORCE_LIMIT):
    """Exhaustive maximizer of :func:`unified_logdet` over all p-subsets.

    Ties (within a relative 1e-12) go to the lexicographically smallest
    subset.

    Returns
    -------
    (SensorSet, float)
        The optimal subset in ascending order and its objective value.

    Raises
    ------
    ValidationError
        More than ``limit`` subsets would need to be scanned.
    """
    basis = as_basis(basis)
    u = basis.modes
    cand = np.flatnonzero(basis.valid)
    p = int(p)
    if not 1 <= p <= cand.size:
        raise ValidationError(f"p={p} outside [1, {cand.size}]")
    total = math.comb(cand.size, p)
    if total > limit:
        raise ValidationError(f"C({cand.size},{p}) = {total} subsets exceeds the limit {limit}")
    vals_all, combos_all = [], []
    it = itertools.combinations(cand.tolist(), p)
    while True:
        chunk = list(itertools.islice(it, 20000))
        if not chunk:
            break
        combos = np.array(chunk, dtype=np.int64)
        vals_all.append(_batch_objective(u, combos, cfg.epsilon))
        combos_all.append(combos)
    vals = np.concatenate(vals_all)
    combos = np.concatenate(combos_all)
    best_val = float(vals.max())
    tol = 1e-12 * max(1.0, abs(best_val))
    best = combos[int(np.argmax(vals >= best_val - tol))]
    return SensorSet(best, step_increments(u, best), "brute-force"), best_val


@dataclass
class SubmodularityReport:
    trials: int
    monotone_violations: list = field(default_factory=list)
    submodular_violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.monotone_violations and not self.submodular_violations


def check_submodular_triple(basis, s, t, i, cfg: ObjectiveConfig = ObjectiveConfig()):
    """Evaluate both properties for one nested pair ``S ⊂ T`` and ``i ∉ T``.

    Returns ``(gain_s, gain_t, f_s, f_t)``.
    """
    s, t = sorted(s), sorted(t)
    fs = unified_logdet(basis, s, cfg)
    ft = unified_logdet(basis, t, cfg)
    gain_s = unified_logdet(basis, s + [i], cfg) - fs
    gain_t = unified_logdet(basis, t + [i], cfg) - ft
    return gain_s, gain_t, fs, ft


def check_monotone_submodular(basis, trials: int, seed: int = 0, cfg: ObjectiveConfig = ObjectiveConfig(),
                              *, slack: float = 1e-9) -> SubmodularityReport:
    """Probe diminishing returns and monotonicity on random nested pairs.

    For each trial a random ``T``, a random ``S ⊂ T`` and ``i ∉ T`` are drawn;
    a violation is recorded when ``f(S+i) - f(S) < f(T+i) - f(T) - slack`` or
    ``f(S) > f(T) + slack``. Violations are collected, never raised.
    """
    basis = as_basis(basis)
    cand = np.flatnonzero(basis.valid)
    if cand.size < 2:
        raise ValidationError("need at least two candidates")
    rng = np.random.default_rng(seed)
    rep = SubmodularityReport(int(trials))
    for trial in range(int(trials)):
        size_t = int(rng.integers(0, cand.size))
        perm = rng.permutation(cand)
        t = perm[:size_t].tolist()
        i = int(perm[size_t])
        s = [j for j in t if rng.random() < 0.5]
        gain_s, gain_t, fs, ft = check_submodular_triple(basis, s, t, i, cfg)
        if gain_s < gain_t - slack:
            rep.submodular_violations.append({"trial": trial, "S": s, "T": t, "i": i, "gap": gain_t - gain_s})
        if fs > ft + slack:
            rep.monotone_violations.append({"trial": trial, "S": s, "T": t, "gap": fs - ft})
    return rep


def greedy_bound_holds(f_greedy: float, f_opt: float, slack: float = 1e-9) -> bool:
    """``f_greedy >= (1 - 1/e) f_opt`` up to ``slack``."""
    return f_greedy - (1.0 - 1.0 / math.e) * f_opt >= -slack


def qr_rank_residual(basis, r_prime: int, *, allow_large: bool = False) -> float:
    """Relative error of truncating the QR factorization of ``U U^T`` to rank ``r'``.

    ``||QR - Q'R'||_F / ||QR||_F`` with ``Q'`` the first ``r'`` columns of Q
    and ``R'`` the first ``r'`` rows of R (unpivoted Householder QR).
    """
    u = as_basis(basis).modes
    n = u.shape[0]
    r_prime = int(r_prime)
    if not 1 <= r_prime <= n:
        raise ValidationError(f"r_prime={r_prime} outside [1, {n}]")
    if n > RESIDUAL_MAX_N and not allow_large:
        raise ValidationError(f"n={n} exceeds {RESIDUAL_MAX_N}; the dense n x n product is refused")
    v = u @ u.T
    q, r = np.linalg.qr(v)
    full = q @ r
    trunc = q[:, :r_prime] @ r[:r_prime, :]
    return float(np.linalg.norm(full - trunc) / np.linalg.norm(full))
