"""Monte Carlo ROC estimation for arbitrary detectors."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .baseline import square_law_score
from .channel import generate_batch
from .net import NetworkParams, receiver_logit
from .signal import total_covariance

ScoreFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class RocCurve:
    """Points ordered by increasing threshold; Pfa and Pd are non-increasing.

    ``pd_lo``/``pd_hi`` hold bootstrap percentile bands when computed.
    """

    threshold: np.ndarray
    pfa: np.ndarray
    pd: np.ndarray
    pd_lo: Optional[np.ndarray] = None
    pd_hi: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.threshold)

    def pd_at(self, pfa: float) -> float:
        """Pd interpolated linearly in Pfa (curve points only)."""
        order = np.argsort(self.pfa, kind="stable")
        return float(np.interp(pfa, self.pfa[order], self.pd[order]))

    def to_csv(self, path) -> None:
        cols = ["threshold", "pfa", "pd"]
        data = [self.threshold, self.pfa, self.pd]
        if self.pd_lo is not None:
            cols += ["pd_lo", "pd_hi"]
            data += [self.pd_lo, self.pd_hi]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in zip(*data):
                w.writerow([_fmt(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "RocCurve":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        get = lambda k: np.array([float(r[k]) for r in rows])
        band = "pd_lo" in (rows[0] if rows else {})
        return cls(get("threshold"), get("pfa"), get("pd"),
                   get("pd_lo") if band else None, get("pd_hi") if band else None)


def _fmt(v: float) -> str:
    return repr(float(v)) if np.isinf(v) else format(float(v), ".17g")


def _exceed_fraction(sorted_scores, thresholds):
    # fraction of scores strictly above each threshold
    n = len(sorted_scores)
    return (n - np.searchsorted(sorted_scores, thresholds, side="right")) / n


def roc_from_scores(scores_h0, scores_h1, n_points: int = 512) -> RocCurve:
    """Empirical ROC with thresholds at pooled-score quantiles plus +-inf.

    A sample is declared a detection when its score is strictly above the
    threshold.
    """
    h0 = np.sort(np.asarray(scores_h0, dtype=float).ravel())
    h1 = np.sort(np.asarray(scores_h1, dtype=float).ravel())
    if h0.size == 0 or h1.size == 0:
        raise ValueError("both score sets must be nonempty")
    pooled = np.concatenate([h0, h1])
    q = np.quantile(pooled, np.linspace(0.0, 1.0, n_points))
    thr = np.unique(np.concatenate([[-np.inf], q, [np.inf]]))
    return RocCurve(thr, _exceed_fraction(h0, thr), _exceed_fraction(h1, thr))


def pd_at_pfa(scores_h0, scores_h1, pfa: float) -> float:
    """Pd at the empirical threshold giving false-alarm rate <= ``pfa``."""
    h0 = np.sort(np.asarray(scores_h0, dtype=float))
    h1 = np.asarray(scores_h1, dtype=float)
    n = h0.size
    # smallest threshold among H0 scores with at most floor(pfa*n) exceedances
    k = int(np.floor(pfa * n))
    thr = h0[n - k - 1] if k < n else -np.inf
    return float(np.mean(h1 > thr))


def receiver_scorer(theta_R: NetworkParams) -> ScoreFn:
    """Scores returns by the receiver's pre-sigmoid output (same ordering as ``p``)."""
    return lambda z: receiver_logit(theta_R, z)


def square_law_scorer(y, env) -> ScoreFn:
    omega = total_covariance(y, env)
    return lambda z: square_law_score(z, y, omega)


@dataclass
class Scores:
    h0: np.ndarray
    h1: np.ndarray

    def roc(self, n_points: int = 512) -> RocCurve:
        return roc_from_scores(self.h0, self.h1, n_points)

    def pd_at_pfa(self, pfa: float) -> float:
        return pd_at_pfa(self.h0, self.h1, pfa)


def worker_count() -> int:
    """Thread count for scoring, from ``RADAR_E2E_WORKERS`` (speed only, never results)."""
    try:
        return max(1, int(os.environ.get("RADAR_E2E_WORKERS", "1")))
    except ValueError:
        return 1


def simulate_scores(score_fn: ScoreFn, y, envs, N_per_hyp: int, rng: np.random.Generator,
                    chunk: int = 50_000, workers: Optional[int] = None) -> Scores:
    """Detector scores on ``N_per_hyp`` returns under each hypothesis.

    Samples are produced in chunks, each on its own child stream spawned from
    ``rng``, so the result does not depend on ``workers``.
    """
    if N_per_hyp < 1:
        raise ValueError("N_per_hyp must be >= 1")
    sizes = [min(chunk, N_per_hyp - i) for i in range(0, N_per_hyp, chunk)]
    jobs = [(m, n, child) for m in (0, 1)
            for n, child in zip(sizes, rng.spawn(len(sizes)))]

    def score(job):
        m, n, child = job
        batch = generate_batch(y, n, envs, False, child, labels=np.full(n, m))
        return np.asarray(score_fn(batch.z), dtype=float)

    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(score, jobs))
    else:
        parts = [score(j) for j in jobs]
    k = len(sizes)
    return Scores(np.concatenate(parts[:k]), np.concatenate(parts[k:]))


def bootstrap_band(scores: Scores, roc: RocCurve, n_boot: int, rng: np.random.Generator,
                   level: float = 0.95):
    """Percentile band of Pd at the curve's thresholds, resampling H1 scores."""
    h1 = scores.h1
    draws = np.empty((n_boot, len(roc)))
    for b in range(n_boot):
        s = np.sort(h1[rng.integers(0, h1.size, h1.size)])
        draws[b] = _exceed_fraction(s, roc.threshold)
    a = (1 - level) / 2
    return np.quantile(draws, a, axis=0), np.quantile(draws, 1 - a, axis=0)


def evaluate_system(score_fn: ScoreFn, y, envs, N_per_hyp: int, rng: np.random.Generator,
                    n_points: int = 512, n_boot: int = 0) -> RocCurve:
    """Monte Carlo ROC of ``score_fn`` for waveform ``y`` in ``envs``."""
    scores = simulate_scores(score_fn, y, envs, N_per_hyp, rng)
    roc = scores.roc(n_points)
    if n_boot:
        roc.pd_lo, roc.pd_hi = bootstrap_band(scores, roc, n_boot, rng)
    return roc
