"""Classical sample-based metrics: IS pseudo-divergence, Fréchet distance,
k-means precision/recall (PRD curves) and k-nn precision/recall.

All functions take datasets as ``Dataset`` objects or ``(n, d)`` arrays and
work in raw data space; pass ``features=`` to embed points first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, as_points
from .errors import ConfigError, InputError
from .rng import as_generator


# --- classifiers for the IS pseudo-divergence ---------------------------------

class LabeledClassifier:
    num_classes: int

    def predict_proba(self, x) -> np.ndarray:
        raise NotImplementedError


class OracleClassifier(LabeledClassifier):
    """Perfect classifier: one-hot ground truth for known points.

    Points not in the reference set get the label of their nearest reference
    point, which keeps the classifier total.
    """

    def __init__(self, reference: Dataset, num_classes: int | None = None):
        if reference.labels is None:
            raise InputError("oracle classifier needs a labelled reference dataset")
        self.points = reference.points
        self.labels = reference.labels
        self.num_classes = int(num_classes if num_classes is not None else self.labels.max() + 1)
        self._lookup = {row.tobytes(): int(l) for row, l in zip(self.points, self.labels)}

    def predict_labels(self, x) -> np.ndarray:
        x = as_points(x)
        out = np.empty(len(x), dtype=np.int64)
        for i, row in enumerate(x):
            lab = self._lookup.get(np.ascontiguousarray(row).tobytes())
            if lab is None:
                lab = int(self.labels[np.argmin(np.sum((self.points - row) ** 2, axis=1))])
            out[i] = lab
        return out

    def predict_proba(self, x):
        lab = self.predict_labels(x)
        p = np.zeros((len(lab), self.num_classes))
        p[np.arange(len(lab)), lab] = 1.0
        return p


class UniformClassifier(LabeledClassifier):
    def __init__(self, num_classes: int):
        self.num_classes = num_classes

    def predict_proba(self, x):
        return np.full((len(as_points(x)), self.num_classes), 1.0 / self.num_classes)


class MixturePosteriorClassifier(LabeledClassifier):
    """Bayes posterior of an isotropic Gaussian mixture (component = class)."""

    def __init__(self, means, sigma=1.0, weights=None):
        self.means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        self.sigma = float(sigma)
        self.num_classes = len(self.means)
        w = np.full(self.num_classes, 1.0 / self.num_classes) if weights is None else np.asarray(weights)
        self.log_w = np.log(w)

    def predict_proba(self, x):
        x = as_points(x)
        d2 = pairwise_sq_distances(x, self.means)
        logits = self.log_w - 0.5 * d2 / self.sigma ** 2
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(axis=1, keepdims=True)


def inception_pseudo_divergence(clf: LabeledClassifier, D_g, features=None) -> float:
    """``C - exp(E_x KL(p(y|x) || p(y)))``; 0 is the best attainable value."""
    x = as_points(D_g)
    if len(x) == 0:
        raise InputError("generated dataset is empty")
    if features is not None:
        x = features(x)
    probs = np.asarray(clf.predict_proba(x), dtype=np.float64)
    C = clf.num_classes
    if probs.shape != (len(x), C):
        raise ConfigError(f"classifier returned shape {probs.shape}, expected ({len(x)}, {C})")
    # C - exp(E KL(p(y|x) || p(y))) rewritten as C * (1 - exp(-KL(p(y) || U) - E H(y|x))),
    # which is exactly 0 for one-hot predictions with uniform marginals
    mass = probs.sum(axis=0)
    p_y = mass / len(x)
    ratio = mass * C / len(x)  # C * p(y), exactly 1 when balanced
    with np.errstate(divide="ignore", invalid="ignore"):
        d_uniform = float(np.sum(np.where(p_y > 0, p_y * np.log(ratio), 0.0)))
        h_cond = -float(np.mean(np.sum(np.where(probs > 0, probs * np.log(probs), 0.0), axis=1)))
    return float(-C * np.expm1(-d_uniform - h_cond)) + 0.0  # no negative zero


# --- Fréchet distance ------------------------------------------------------------

def matrix_sqrt_psd(M, tol=1e-12) -> np.ndarray:
    """Principal square root of the symmetric part of a PSD matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"matrix sqrt needs a square matrix, got {M.shape}")
    sym = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.where(vals < tol, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


def _moments(x):
    if len(x) < 2:
        raise InputError("need at least 2 rows to estimate a covariance")
    mu = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    return mu, cov


def frechet_distance(D_r, D_g, features=None) -> float:
    """Fréchet distance between Gaussians fitted to the two samples.

    ``Tr((S_r S_g)^{1/2})`` is computed as ``Tr((S_r^{1/2} S_g S_r^{1/2})^{1/2})``,
    which is similar to it and symmetric PSD.
    """
    xr, xg = as_points(D_r), as_points(D_g)
    if xr.shape[1] != xg.shape[1]:
        raise InputError(f"dimension mismatch: {xr.shape[1]} vs {xg.shape[1]}")
    if features is not None:
        xr, xg = features(xr), features(xg)
    mu_r, cov_r = _moments(xr)
    mu_g, cov_g = _moments(xg)
    root_r = matrix_sqrt_psd(cov_r)
    cross = matrix_sqrt_psd(root_r @ cov_g @ root_r)
    trace = np.trace(cov_r) + np.trace(cov_g) - 2.0 * np.trace(cross)
    return float(np.sum((mu_r - mu_g) ** 2) + max(trace, 0.0))


# --- PRD curves ---------------------------------------------------------------------

@dataclass
class PrdCurve:
    precision: np.ndarray
    recall: np.ndarray
    slopes: np.ndarray | None = None

    def __post_init__(self):
        if len(self.precision) == 0 or len(self.precision) != len(self.recall):
            raise InputError("PRD curve must be non-empty with matching arrays")

    def pairs(self):
        return list(zip(self.precision.tolist(), self.recall.tolist()))


def prd_slopes(num_angles=1001) -> np.ndarray:
    j = np.arange(1, num_angles + 1)
    return np.tan(j * np.pi / (2.0 * (num_angles + 1)))


def prd_curve(hist_r, hist_g, num_angles=1001, slopes=None) -> PrdCurve:
    hist_r = np.asarray(hist_r, dtype=np.float64)
    hist_g = np.asarray(hist_g, dtype=np.float64)
    if hist_r.shape != hist_g.shape or hist_r.ndim != 1:
        raise InputError("histograms must be 1-D and of equal length")
    for h in (hist_r, hist_g):
        if abs(h.sum() - 1.0) > 1e-9 or np.any(h < 0):
            raise InputError("histograms must be non-negative and sum to 1")
    lam = prd_slopes(num_angles) if slopes is None else np.asarray(slopes, dtype=np.float64)
    precision = np.minimum(lam[:, None] * hist_r[None, :], hist_g[None, :]).sum(axis=1)
    recall = np.minimum(hist_r[None, :], hist_g[None, :] / lam[:, None]).sum(axis=1)
    return PrdCurve(np.clip(precision, 0.0, 1.0), np.clip(recall, 0.0, 1.0), lam)


def f_score(curve: PrdCurve, beta: float) -> float:
    p, r = curve.precision, curve.recall
    b2 = beta * beta
    den = b2 * p + r
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(den > 0, (1.0 + b2) * p * r / den, 0.0)
    return float(f.max())


# --- k-means -----------------------------------------------------------------------

def kmeans(x, k, seed=0, max_iter=100):
    """Lloyd's algorithm with k-means++ seeding. Returns ``(centres, assignment)``.

    Ties in assignment go to the lowest cluster index; a cluster that loses
    all its points keeps its previous centre.
    """
    x = as_points(x)
    if k < 1:
        raise InputError("k must be >= 1")
    if len(x) < k:
        raise InputError(f"cannot form {k} clusters from {len(x)} points")
    rng = as_generator(seed)
    centres = np.empty((k, x.shape[1]))
    centres[0] = x[rng.integers(len(x))]
    d2 = np.sum((x - centres[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise InputError(f"data has fewer than {k} distinct points")
        centres[j] = x[rng.choice(len(x), p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centres[j]) ** 2, axis=1))
    assign = None
    for _ in range(max_iter):
        new = np.argmin(pairwise_sq_distances(x, centres), axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for j in range(k):
            members = assign == j
            if members.any():
                centres[j] = x[members].mean(axis=0)
    return centres, assign


def _canonical_order(x):
    return np.lexsort(x.T[::-1])


def kmeans_pr(D_r, D_g, k=20, beta=8.0, seed=0, num_angles=1001, num_runs=1, features=None):
    """k-means precision/recall; returns ``(F_beta, F_1/beta, curve)``.

    Clusters the union of both sets (rows sorted canonically so the result does
    not depend on input order) and compares per-cluster histograms.  With
    ``num_runs > 1`` the curves of independently seeded clusterings are averaged.
    """
    xr, xg = as_points(D_r), as_points(D_g)
    if xr.shape[1] != xg.shape[1]:
        raise InputError("dimension mismatch")
    if len(xr) == 0 or len(xg) == 0:
        raise InputError("empty dataset")
    if beta <= 1:
        raise InputError("beta must be > 1")
    if features is not None:
        xr, xg = features(xr), features(xg)
    union = np.vstack([xr, xg])
    is_fake = np.r_[np.zeros(len(xr), bool), np.ones(len(xg), bool)]
    order = _canonical_order(union)
    union, is_fake = union[order], is_fake[order]
    rng = as_generator(seed)
    precisions, recalls = [], []
    for _ in range(num_runs):
        _, assign = kmeans(union, k, seed=rng)
        hist_r = np.bincount(assign[~is_fake], minlength=k) / len(xr)
        hist_g = np.bincount(assign[is_fake], minlength=k) / len(xg)
        c = prd_curve(hist_r, hist_g, num_angles)
        precisions.append(c.precision)
        recalls.append(c.recall)
    curve = PrdCurve(np.mean(precisions, axis=0), np.mean(recalls, axis=0), prd_slopes(num_angles))
    return f_score(curve, beta), f_score(curve, 1.0 / beta), curve


# --- k-nn precision/recall ------------------------------------------------------------

def pairwise_sq_distances(a, b, chunk=512) -> np.ndarray:
    """Exact squared Euclidean distances (no ``|a|^2 + |b|^2 - 2ab`` shortcut)."""
    out = np.empty((len(a), len(b)))
    for s in range(0, len(a), chunk):
        diff = a[s:s + chunk, None, :] - b[None, :, :]
        out[s:s + chunk] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


@dataclass
class KnnManifold:
    centers: np.ndarray
    radii: np.ndarray

    def contains(self, x) -> np.ndarray:
        """Boolean mask: rows of ``x`` inside at least one (closed) sphere."""
        d2 = pairwise_sq_distances(as_points(x), self.centers)
        return np.any(d2 <= self.radii[None, :] ** 2, axis=1)


def knn_manifold(D, k) -> KnnManifold:
    x = as_points(D)
    if k < 1 or k >= len(x):
        raise InputError(f"k={k} needs at least k+1 points, dataset has {len(x)}")
    d2 = pairwise_sq_distances(x, x)
    np.fill_diagonal(d2, np.inf)
    kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
    return KnnManifold(x, np.sqrt(kth))


def knn_pr(D_r, D_g, k=3, k_fake=None, features=None):
    """k-nn precision and recall.

    Precision is the fraction of fake points inside the real manifold, recall
    the fraction of real points inside the fake manifold.  ``k_fake`` sets a
    separate neighbour count for the fake manifold (default: ``k``).
    """
    xr, xg = as_points(D_r), as_points(D_g)
    if xr.shape[1] != xg.shape[1]:
        raise InputError("dimension mismatch")
    if features is not None:
        xr, xg = features(xr), features(xg)
    real_m = knn_manifold(xr, k)
    fake_m = knn_manifold(xg, k if k_fake is None else k_fake)
    precision = float(real_m.contains(xg).mean())
    recall = float(fake_m.contains(xr).mean())
    return precision, recall
