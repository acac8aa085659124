"""Worst-case memorized datasets for IS, k-means PR and k-nn PR, and a probe
for the requirement that a divergence decreases as the generated set grows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classical import kmeans, pairwise_sq_distances
from .data import Dataset, as_points
from .errors import InputError
from .rng import substream


@dataclass
class MinimalDataset:
    rows: Dataset
    distinct_count: int
    target_metric: str  # "is", "kmeans_pr" or "knn_pr"

    def __post_init__(self):
        if self.distinct_count > len(self.rows):
            raise InputError("distinct_count exceeds row count")


def distinct_rows(points) -> int:
    return len(np.unique(np.ascontiguousarray(as_points(points)), axis=0))


def build_dstar_is(D_train: Dataset, C: int) -> MinimalDataset:
    """One training point per class (the lowest-index one); classes are 0..C-1."""
    if D_train.labels is None:
        raise InputError("IS construction needs labels")
    idx = []
    for c in range(C):
        hits = np.flatnonzero(D_train.labels == c)
        if len(hits) == 0:
            raise InputError(f"class {c} is missing from the training set")
        idx.append(hits[0])
    rows = D_train.subset(np.array(idx))
    return MinimalDataset(rows, distinct_rows(rows.points), "is")


def build_dstar_kmeans(D_train, D_test, k: int, seed=0, retries: int = 5) -> MinimalDataset:
    """Cluster the test set; replace each cluster by copies of the training point
    nearest its centroid, one copy per test point in the cluster."""
    train, test = as_points(D_train), as_points(D_test)
    if len(test) < k:
        raise InputError(f"need at least k={k} test points")
    for attempt in range(retries):
        centres, assign = kmeans(test, k, seed=substream(seed, "dstar_kmeans", attempt))
        counts = np.bincount(assign, minlength=k)
        if np.all(counts > 0):
            break
    else:
        raise InputError(f"k-means left an empty cluster in {retries} attempts")
    nearest = np.argmin(pairwise_sq_distances(centres, train), axis=1)
    rows = np.repeat(train[nearest], counts, axis=0)
    return MinimalDataset(Dataset(rows), distinct_rows(rows), "kmeans_pr")


def build_dstar_knn(D_train) -> MinimalDataset:
    """The two training points furthest apart (lowest index pair on ties)."""
    x = as_points(D_train)
    if len(x) < 2:
        raise InputError("need at least two training points")
    d2 = pairwise_sq_distances(x, x)
    d2[np.tril_indices(len(x))] = -1.0
    i, j = np.unravel_index(np.argmax(d2), d2.shape)
    if d2[i, j] <= 0:
        raise InputError("all training points are identical")
    rows = x[[i, j]]
    return MinimalDataset(Dataset(rows), 2, "knn_pr")


@dataclass
class ProbeResult:
    sizes: list
    values: dict  # size -> list of per-seed values
    means: list = field(default_factory=list)
    decreasing: bool = False

    def rows(self):
        for n in self.sizes:
            for s, v in enumerate(self.values[n]):
                yield n, s, v


def monotonicity_probe(metric, data_sampler, m: int, sizes, n_seeds: int = 3, seed: int = 0,
                       transform=None) -> ProbeResult:
    """Mean ``metric(D_test, D_n)`` per size ``n`` over fresh disjoint samples.

    ``transform`` (optional) replaces each ``D_n`` before evaluation, e.g. by a
    minimal fooling subset of it.
    """
    sizes = [int(n) for n in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise InputError("sizes must be strictly increasing")
    if n_seeds < 3:
        raise InputError("need at least 3 seeds")
    values = {n: [] for n in sizes}
    for s in range(n_seeds):
        test = data_sampler.sample(m, substream(seed, "probe", s, "test"))
        test_keys = {row.tobytes() for row in np.ascontiguousarray(as_points(test))}
        for n in sizes:
            D_n = data_sampler.sample(n, substream(seed, "probe", s, n))
            if any(row.tobytes() in test_keys for row in np.ascontiguousarray(as_points(D_n))):
                raise InputError("sampler produced overlapping test and generated sets")
            if transform is not None:
                D_n = transform(D_n)
            values[n].append(float(metric(test, D_n)))
    means = [float(np.mean(values[n])) for n in sizes]
    decreasing = all(b < a for a, b in zip(means, means[1:]))
    return ProbeResult(sizes, values, means, decreasing)
