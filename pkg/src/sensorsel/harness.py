"""Benchmark experiments: random sensor problem, timing, K-fold cross-validation.

All experiments are deterministic for a given configuration. Trial ``t``
draws from ``numpy.random.default_rng([seed, t])`` so results do not depend
on how many workers run the trials (``SENSORSEL_THREADS`` caps the pool).
Timing columns are the only non-reproducible outputs.
"""
from __future__ import annotations

import datetime as _dt
import logging
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .dataio import SelectionReport, SnapshotMatrix
from .errors import SensorSelError, ValidationError
from .objective import ObjectiveConfig, logdet_gram, split_log, unified_logdet
from .pod import compute_pod, truncation_error
from .reconstruction import estimation_error, reconstruct_snapshots
from .selection import METHODS, select

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    n: int = 2000
    r: int = 10
    p_range: tuple = tuple(range(1, 21))
    trials: int = 1
    seed: int = 0
    methods: tuple = ("qr", "dg", "qd", "random", "gappy-r")
    epsilon: float = 1e-6
    kfolds: int = 5
    shuffle_folds: bool = False
    center: bool = False
    reps: int = 5

    def __post_init__(self):
        self.p_range = tuple(int(p) for p in self.p_range)
        self.methods = tuple(self.methods)
        if not self.p_range or any(b <= a for a, b in zip(self.p_range, self.p_range[1:])):
            raise ValidationError("p_range must be nonempty and strictly ascending")
        if self.p_range[0] < 1:
            raise ValidationError("p_range values must be >= 1")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.methods:
            raise ValidationError("methods must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValidationError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
        if self.kfolds < 2:
            raise ValidationError("kfolds must be >= 2")
        if self.reps < 1:
            raise ValidationError("reps must be >= 1")


def parse_range(text: str) -> tuple:
    """``"1:20"`` -> 1..20, ``"2:20:2"`` -> 2,4,..,20, ``"5,10,15"`` or ``"7"`` literal."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(t) for t in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            lo, hi, step = parts
            if step < 1:
                raise ValueError
            return tuple(range(lo, hi + 1, step))
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise ValidationError(f"cannot parse range {text!r}") from None


def worker_count() -> int:
    env = os.environ.get("SENSORSEL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"SENSORSEL_THREADS must be an integer, got {env!r}") from None
    return 1


def _sub_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def timed_select(basis, p, method, seed=0):
    t0 = time.perf_counter()
    sel = select(basis, p, method, seed=seed)
    return sel, time.perf_counter() - t0


def make_report(basis, sensors, method: str, config: dict | None = None, wall_time: float = 0.0,
                cfg: ObjectiveConfig = ObjectiveConfig(), timestamp: str | None = None) -> SelectionReport:
    """Assemble a :class:`SelectionReport` for a finished selection."""
    ld = logdet_gram(basis, sensors)
    mant, expo = split_log(ld)
    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return SelectionReport(
        method=method,
        indices=sensors.indices.tolist(),
        step_values=sensors.step_values.tolist(),
        config=dict(config or {}),
        det_mantissa=mant,
        det_exponent=expo,
        logdet=ld,
        unified_logdet=unified_logdet(basis, sensors, cfg),
        wall_time=wall_time,
        timestamp=timestamp,
    )


# ---------------------------------------------------------------------------
# random sensor problem
# ---------------------------------------------------------------------------

def _random_trial(cfg: ExperimentConfig, trial: int) -> dict:
    rng = np.random.default_rng([cfg.seed, trial])
    u = rng.standard_normal((cfg.n, cfg.r))
    out = {}
    for p in cfg.p_range:
        for method in cfg.methods:
            try:
                sel, dt = timed_select(u, p, method, _sub_seed(cfg.seed, trial, p))
                out[method, p] = (logdet_gram(u, sel), dt)
            except SensorSelError as exc:
                log.warning("trial %d, %s, p=%d failed: %s", trial, method, p, exc)
                out[method, p] = None
    if "qr" not in cfg.methods:
        for p in cfg.p_range:
            try:
                out["qr", p] = (logdet_gram(u, select(u, p, "qr")), float("nan"))
            except SensorSelError:
                out["qr", p] = None
    return out


def run_random_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Gram determinants of each method normalized by the QR method's.

    Each trial draws ``U`` with i.i.d. N(0, 1) entries. Ratios are formed
    per (trial, p) and then averaged; a failed run drops that trial from the
    ratio mean of the affected (method, p) cell and is counted.
    """
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(lambda t: _random_trial(cfg, t), range(cfg.trials)))
    rows = []
    for method in cfg.methods:
        for p in cfg.p_range:
            ratios, times, failed = [], [], 0
            for res in results:
                ref, cur = res["qr", p], res[method, p]
                if ref is None or cur is None:
                    failed += 1
                    continue
                ratios.append(math.exp(cur[0] - ref[0]) if method != "qr" else 1.0)
                times.append(cur[1])
            rows.append({
                "method": method,
                "p": p,
                "mean_ratio": float(np.mean(ratios)) if ratios else float("nan"),
                "std_ratio": float(np.std(ratios)) if ratios else float("nan"),
                "mean_time": float(np.mean(times)) if times else float("nan"),
                "trials_ok": len(ratios),
                "trials_failed": failed,
            })
    return rows


# ---------------------------------------------------------------------------
# timing
# ---------------------------------------------------------------------------

def run_timing(cfg: ExperimentConfig) -> list[dict]:
    """Median wall time of each (method, p) over ``cfg.reps`` runs after one warmup.

    Runs on a single thread of control; one basis drawn from ``cfg.seed``.
    """
    rng = np.random.default_rng([cfg.seed, 0])
    u = rng.standard_normal((cfg.n, cfg.r))
    rows = []
    for method in cfg.methods:
        for p in cfg.p_range:
            seed = _sub_seed(cfg.seed, 0, p)
            timed_select(u, p, method, seed)
            times = [timed_select(u, p, method, seed)[1] for _ in range(cfg.reps)]
            rows.append({"method": method, "p": p, "median_time": statistics.median(times), "reps": cfg.reps})
    return rows


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

def synthetic_snapshots(n: int, m: int, r: int, noise: float = 0.01, seed: int = 0) -> SnapshotMatrix:
    """Low-rank-plus-noise field ``x_j = U* a_j + eta_j``.

    ``U*`` is a random n x r orthonormal matrix and ``a_j`` standard normal.
    ``noise`` is the standard deviation of ``eta`` relative to the rms
    entry of the noiseless field (``sqrt(r / n)``).
    """
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    a = rng.standard_normal((r, m))
    x = q @ a + noise * math.sqrt(r / n) * rng.standard_normal((n, m))
    return SnapshotMatrix(x, meta={"generator": "synthetic", "rank": str(r), "noise": repr(noise)})


def fold_indices(m: int, k: int, *, shuffle: bool = False, seed: int = 0) -> list[np.ndarray]:
    """Contiguous blocks of column indices (or shuffled blocks)."""
    order = np.random.default_rng(seed).permutation(m) if shuffle else np.arange(m)
    return [np.sort(b) for b in np.array_split(order, k)]


def run_crossval(data, cfg: ExperimentConfig) -> list[dict]:
    """K-fold estimation error of each method over ``cfg.p_range``.

    For every fold the POD basis (``cfg.r`` modes) and the sensors come from
    the training columns; the held-out columns are reconstructed from their
    sensor readings. A ``full`` row gives the projection (all points
    observed) error as a floor.
    """
    if not isinstance(data, SnapshotMatrix):
        data = SnapshotMatrix(data)
    m, k = data.m, cfg.kfolds
    if m < k:
        raise ValidationError(f"m={m} snapshots cannot be split into {k} folds")
    if m // k < cfg.r:
        raise ValidationError(f"fold size {m // k} is smaller than r={cfg.r}")
    folds = fold_indices(m, k, shuffle=cfg.shuffle_folds, seed=cfg.seed)
    errs = {(meth, p): [] for meth in cfg.methods for p in cfg.p_range}
    failures = {key: 0 for key in errs}
    full = []
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(m), test_idx)
        train, test = data.columns(train_idx), data.columns(test_idx)
        basis = compute_pod(train, cfg.r, center=cfg.center)
        full.append(truncation_error(test, basis))
        for meth in cfg.methods:
            for p in cfg.p_range:
                try:
                    sel = select(basis, p, meth, seed=_sub_seed(cfg.seed, f, p))
                    rec = reconstruct_snapshots(basis, sel, test)
                    errs[meth, p].append(estimation_error(test, rec))
                except SensorSelError as exc:
                    log.warning("fold %d, %s, p=%d failed: %s", f, meth, p, exc)
                    failures[meth, p] += 1
    rows = []
    for (meth, p), vals in errs.items():
        rows.append({
            "method": meth,
            "p": p,
            "mean_error": float(np.mean(vals)) if vals else float("nan"),
            "std_error": float(np.std(vals)) if vals else float("nan"),
            "folds_ok": len(vals),
            "folds_failed": failures[meth, p],
        })
    rows.append({
        "method": "full",
        "p": data.n_valid,
        "mean_error": float(np.mean(full)),
        "std_error": float(np.std(full)),
        "folds_ok": len(full),
        "folds_failed": 0,
    })
    return rows


def config_echo(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["p_range"] = list(d["p_range"])
    d["methods"] = list(d["methods"])
    return d
