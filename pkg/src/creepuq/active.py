"""Pool-based batch active learning: variance reduction with k-means diversity."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset, transform
from .metrics import r_squared, rmse
from .models.registry import fit_model

STRATEGIES = ("vr_kmeans", "random")
TRACE_COLUMNS = ("iteration", "n_labeled", "r2", "rmse", "indices")


class ActiveLearningError(ValueError):
    pass


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a centroid already
            idx = int(np.setdiff1d(np.arange(n), chosen)[0])
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(points, K: int, seed: int, max_iters: int = 300) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds.

    Stops when assignments no longer change or after ``max_iters`` rounds.
    An empty cluster is re-seeded at the point farthest from its own
    centroid. Distance ties go to the lowest centroid index.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ActiveLearningError("points must be a 2-D array")
    n = points.shape[0]
    if not 1 <= K <= n:
        raise ActiveLearningError(f"K must lie in [1, {n}], got {K}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(points, K, rng)
    labels = np.full(n, -1)
    it = 0
    for it in range(1, max_iters + 1):
        new = np.argmin(_sq_dists(points, centroids), axis=1)
        counts = np.bincount(new, minlength=K)
        for k in np.flatnonzero(counts == 0):
            own = ((points - centroids[new]) ** 2).sum(axis=1)
            far = int(np.argmax(own))
            new[far] = k
            centroids[k] = points[far]
            counts = np.bincount(new, minlength=K)
        if np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            centroids[k] = points[labels == k].mean(axis=0)
    inertia = float(((points - centroids[labels]) ** 2).sum())
    return KMeansResult(labels, centroids, inertia, it)


def select_batch_vr_kmeans(sigma, pool_features, B: int, seed: int) -> np.ndarray:
    """Positions (into the pool) of ``B`` points: the largest ``sigma`` in each of B clusters.

    ``sigma`` is the predicted standard deviation per pool point. Ties go
    to the lowest position.
    """
    if sigma is None:
        raise ActiveLearningError("vr_kmeans needs a model with predictive uncertainty")
    sigma = np.asarray(sigma, dtype=np.float64)
    pool_features = np.asarray(pool_features, dtype=np.float64)
    if not 1 <= B <= pool_features.shape[0]:
        raise ActiveLearningError(f"batch size {B} must lie in [1, {pool_features.shape[0]}]")
    labels = kmeans(pool_features, B, seed).labels
    picks = []
    for k in range(B):
        members = np.flatnonzero(labels == k)
        if members.size:
            picks.append(int(members[np.argmax(sigma[members])]))
    if len(picks) < B:
        # only reachable with duplicated points; fill by global variance order
        rest = [i for i in np.argsort(-sigma, kind="stable") if i not in picks]
        picks.extend(int(i) for i in rest[:B - len(picks)])
    return np.array(sorted(picks), dtype=int)


@dataclass
class AlState:
    labeled: np.ndarray
    pool: np.ndarray
    test: np.ndarray
    iteration: int
    seed: int
    n_total: int

    def check(self) -> None:
        """Raise if labeled, pool and test fail to partition ``range(n_total)``."""
        everything = np.concatenate([self.labeled, self.pool, self.test])
        if everything.size != self.n_total or not np.array_equal(np.sort(everything), np.arange(self.n_total)):
            raise ActiveLearningError(f"index sets do not partition the data at iteration {self.iteration}")


@dataclass(frozen=True)
class AlRecord:
    iteration: int
    n_labeled: int
    r2: float
    rmse: float
    selected: tuple[int, ...]


@dataclass
class ActiveLearningTrace:
    strategy: str
    model: str
    seed: int
    records: list[AlRecord] = field(default_factory=list)

    def labeled_counts(self) -> np.ndarray:
        return np.array([r.n_labeled for r in self.records])

    def r2(self) -> np.ndarray:
        return np.array([r.r2 for r in self.records])

    def labels_to_reach(self, r2_threshold: float) -> float:
        """Smallest labeled count whose test R² reaches the threshold (inf if never)."""
        for rec in self.records:
            if rec.r2 >= r2_threshold:
                return float(rec.n_labeled)
        return math.inf

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.records:
            writer.writerow([r.iteration, r.n_labeled, repr(r.r2), repr(r.rmse), " ".join(map(str, r.selected))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, strategy: str, model: str, seed: int) -> "ActiveLearningTrace":
        rows = list(csv.DictReader(io.StringIO(text)))
        records = [AlRecord(int(r["iteration"]), int(r["n_labeled"]), float(r["r2"]), float(r["rmse"]),
                            tuple(int(i) for i in r["indices"].split())) for r in rows]
        return cls(strategy, model, seed, records)


def run_al_loop(ds: Dataset, model: str, strategy: str, B: int, initial_size: int | None = None,
                label_budget: int | None = None, seed: int = 0, model_options: dict | None = None,
                test_fraction: float = 0.2,
                on_iteration: Callable[[AlState], None] | None = None) -> ActiveLearningTrace:
    """Run one active-learning replicate and return its trace.

    A fixed ``test_fraction`` of the rows is held out first. Features are
    min-max scaled with bounds from the non-test rows, which are all known
    in the pool setting. Each iteration fits ``model`` on the labeled rows,
    scores it on the test rows and then acquires up to ``B`` pool rows.
    """
    if strategy not in STRATEGIES:
        raise ActiveLearningError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    if B < 1:
        raise ActiveLearningError("batch size must be at least 1")
    initial_size = 2 * B if initial_size is None else int(initial_size)
    n = ds.n_samples
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    test = np.sort(order[:n_test])
    rest = order[n_test:]
    if initial_size + B > rest.size:
        raise ActiveLearningError(f"initial size {initial_size} plus batch {B} exceeds the {rest.size} pool rows")
    label_budget = rest.size if label_budget is None else int(label_budget)
    if label_budget < initial_size:
        raise ActiveLearningError(f"label budget {label_budget} is smaller than the initial size {initial_size}")
    X = transform(ds, list(zip(ds.features[rest].min(axis=0), ds.features[rest].max(axis=0)))).features
    y = ds.target
    labeled = np.sort(rng.choice(rest, initial_size, replace=False))
    pool = np.setdiff1d(rest, labeled)
    state = AlState(labeled, pool, test, 0, seed, n)
    trace = ActiveLearningTrace(strategy, model, seed)
    while True:
        state.check()
        if on_iteration is not None:
            on_iteration(state)
        fitted = fit_model(model, X[state.labeled], y[state.labeled], model_options, seed)
        pred = fitted.predict(X[test])
        b = min(B, state.pool.size, label_budget - state.labeled.size)
        selected = np.array([], dtype=int)
        if b > 0:
            if strategy == "random":
                selected = np.sort(rng.choice(state.pool, b, replace=False))
            else:
                sigma = fitted.predict(X[state.pool]).std
                km_seed = int(np.random.SeedSequence((seed, state.iteration)).generate_state(1)[0])
                selected = state.pool[select_batch_vr_kmeans(sigma, X[state.pool], b, km_seed)]
        trace.records.append(AlRecord(state.iteration, int(state.labeled.size), r_squared(y[test], pred.mean),
                                      rmse(y[test], pred.mean), tuple(int(i) for i in selected)))
        if b == 0:
            return trace
        state = AlState(np.sort(np.concatenate([state.labeled, selected])), np.setdiff1d(state.pool, selected),
                        test, state.iteration + 1, seed, n)
