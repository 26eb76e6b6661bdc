"""Self-checks of the selectors and objective, run by ``sensorsel verify``.

Each check returns a :class:`Check`; ``quick=True`` shrinks trial counts so
the whole suite finishes in a few seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .objective import (ObjectiveConfig, brute_force_optimal, check_monotone_submodular,
                        greedy_bound_holds, qr_rank_residual, unified_logdet)
from .pod import compute_pod, truncation_error
from .reconstruction import NoiseModel, estimation_error, reconstruct_snapshots, verify_error_covariance
from .selection import (OVERSAMPLED, GramState, gram_update_over, gram_update_under, select_dg,
                        select_qd, select_qr)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def check_qr_dg(n_bases=200, n=200, r=10, seed=0) -> Check:
    bad = 0
    for b in range(n_bases):
        u = np.random.default_rng([seed, b]).standard_normal((n, r))
        for p in range(1, r + 1):
            if not np.array_equal(select_qr(u, p).indices, select_dg(u, p).indices):
                bad += 1
    return Check("qr-dg-equivalence", bad == 0, f"{bad} mismatching (basis, p) pairs over {n_bases} bases")


def check_qd_dg(n_bases=200, n=200, r=10, p_max=20, seed=0) -> Check:
    bad = 0
    for b in range(n_bases):
        u = np.random.default_rng([seed, b]).standard_normal((n, r))
        for p in range(1, p_max + 1):
            if not np.array_equal(select_qd(u, p).indices, select_dg(u, p).indices):
                bad += 1
    return Check("qd-dg-equivalence", bad == 0, f"{bad} mismatching (basis, p) pairs over {n_bases} bases")


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def check_updates(steps=500, seed=0) -> Check:
    """Recursive inverses and log-determinants against direct recomputation."""
    rng = np.random.default_rng(seed)
    worst_inv = worst_det = 0.0
    done = 0
    while done < steps:
        r = 12
        rows = []
        st = GramState.empty()
        for _ in range(r):
            u = rng.standard_normal(r)
            st = gram_update_under(st, np.asarray(rows).reshape(-1, r), u)
            rows.append(u)
            c = np.asarray(rows)
            g = c @ c.T
            worst_inv = max(worst_inv, _rel(st.inv, np.linalg.inv(g)))
            worst_det = max(worst_det, abs(math.expm1(st.logdet - np.linalg.slogdet(g)[1])))
            done += 1
    done = 0
    while done < steps:
        r = 6
        c = rng.standard_normal((r, r))
        st = GramState(OVERSAMPLED, np.linalg.inv(c.T @ c), np.linalg.slogdet(c.T @ c)[1])
        for _ in range(10):
            u = rng.standard_normal(r)
            st = gram_update_over(st, u)
            c = np.vstack([c, u])
            g = c.T @ c
            worst_inv = max(worst_inv, _rel(st.inv, np.linalg.inv(g)))
            worst_det = max(worst_det, abs(math.expm1(st.logdet - np.linalg.slogdet(g)[1])))
            done += 1
    ok = worst_inv <= 1e-8 and worst_det <= 1e-8
    return Check("update-fidelity", ok, f"max inverse rel err {worst_inv:.2e}, max det rel err {worst_det:.2e}")


def check_submodularity(n_bases=20, trials=100, n=20, r=5, seed=0) -> Check:
    total = 0
    for b in range(n_bases):
        u = np.random.default_rng([seed, b]).standard_normal((n, r))
        rep = check_monotone_submodular(u, trials, seed=b)
        total += len(rep.monotone_violations) + len(rep.submodular_violations)
    return Check("monotone-submodular", total == 0, f"{total} violations in {n_bases * trials} triples")


def check_greedy_bound(instances=50, n=12, r=3, ps=(2, 3, 4, 5), eps=1e-6, seed=0) -> Check:
    cfg = ObjectiveConfig(eps)
    worst = math.inf
    fails = 0
    for k in range(instances):
        u = np.random.default_rng([seed, k]).standard_normal((n, r))
        for p in ps:
            _, f_opt = brute_force_optimal(u, p, cfg)
            f_g = unified_logdet(u, select_dg(u, p), cfg)
            worst = min(worst, f_g / f_opt)
            fails += not greedy_bound_holds(f_g, f_opt)
    return Check("greedy-bound", fails == 0, f"{fails} failures; worst f_greedy/f_opt = {worst:.4f} (bound {1 - 1 / math.e:.4f})")


def check_covariance(draws=10_000, seed=0) -> Check:
    u = np.random.default_rng(seed).standard_normal((40, 4))
    sel = select_dg(u, 8)
    rep = verify_error_covariance(u, sel, NoiseModel(0.1), draws, seed)
    return Check("error-covariance", rep.distance <= 0.05 and rep.unbiased,
                 f"relative distance {rep.distance:.4f} (<= 0.05), mean error {rep.mean_error:.2e} <= {rep.mean_error_bound:.2e}")


def check_residual(seed=0) -> Check:
    u = np.random.default_rng(seed).standard_normal((200, 10))
    full, one = qr_rank_residual(u, 10), qr_rank_residual(u, 1)
    return Check("qr-rank-residual", full <= 1e-12 and one > 1e-3, f"r'=10: {full:.2e}, r'=1: {one:.3f}")


def check_reconstruction(seed=0) -> Check:
    rng = np.random.default_rng(seed)
    n, r, m = 100, 6, 40
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    x = q @ rng.standard_normal((r, m))
    basis = compute_pod(x, r)
    sel = select_qd(basis, r)
    err = estimation_error(x, reconstruct_snapshots(basis, sel, x))
    noisy = x + 0.1 * rng.standard_normal(x.shape)
    b2 = compute_pod(noisy, r)
    full_gap = abs(estimation_error(noisy, b2.modes @ (b2.modes.T @ noisy)) - truncation_error(noisy, b2))
    ok = err <= 1e-12 and full_gap <= 1e-12
    return Check("reconstruction", ok, f"in-span error {err:.2e}, full-observation gap {full_gap:.2e}")


def run_all(quick: bool = True, seed: int = 0) -> list[Check]:
    if quick:
        return [
            check_qr_dg(20, seed=seed),
            check_qd_dg(20, seed=seed),
            check_updates(100, seed=seed),
            check_submodularity(4, 50, seed=seed),
            check_greedy_bound(5, seed=seed),
            check_covariance(10_000, seed=seed),
            check_residual(seed=seed),
            check_reconstruction(seed=seed),
        ]
    return [
        check_qr_dg(seed=seed),
        check_qd_dg(seed=seed),
        check_updates(seed=seed),
        check_submodularity(seed=seed),
        check_greedy_bound(seed=seed),
        check_covariance(seed=seed),
        check_residual(seed=seed),
        check_reconstruction(seed=seed),
    ]

