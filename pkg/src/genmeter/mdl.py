"""Path-speed complexity of latent variable generators.

A latent pair ``(z0, z1)`` is joined by the constant-speed line; the generator
maps it to a data-space path whose speed is estimated by forward differences
on a uniform grid of ``T`` segments.  The complexity COMP is the Monte Carlo
mean, over prior pairs, of the maximum speed along each path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .generators import interpolate_latent
from .rng import substream


@dataclass
class PathSample:
    t_grid: np.ndarray
    points: np.ndarray
    speeds: np.ndarray

    @property
    def dt(self) -> float:
        return 1.0 / len(self.speeds)


def _speeds(points, T):
    return np.linalg.norm(np.diff(points, axis=-2), axis=-1) * T


def sample_path(gen, z0, z1, T: int = 128, features=None) -> PathSample:
    if T < 2:
        raise InputError("need T >= 2 segments")
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.float64))
    z1 = np.atleast_1d(np.asarray(z1, dtype=np.float64))
    if z0.shape != (gen.latent.dim,) or z1.shape != (gen.latent.dim,):
        raise InputError(f"latent endpoints must have dimension {gen.latent.dim}")
    t = np.linspace(0.0, 1.0, T + 1)
    x = gen.map(interpolate_latent(z0, z1, t))
    if features is not None:
        x = features(x)
    return PathSample(t, x, _speeds(x, T))


def path_length(p: PathSample) -> float:
    return float(np.sum(p.speeds) * p.dt)


def s_max(p: PathSample) -> float:
    return float(np.max(p.speeds))


def speed_variance(gen, z0, z1, T: int = 128, features=None) -> float:
    """Mean squared deviation of segment speeds from their mean on one path."""
    s = sample_path(gen, z0, z1, T, features).speeds
    return float(np.mean((s - s.mean()) ** 2))


@dataclass
class PathStats:
    """Per-pair statistics over Monte Carlo latent pairs."""

    s_max: np.ndarray
    length: np.ndarray
    speed_var: np.ndarray
    T: int
    seed: int


def latent_pairs(gen, n_pairs, seed):
    z = gen.sample_latent(2 * n_pairs, substream(seed, "paths", "pairs"))
    return z[:n_pairs], z[n_pairs:]


def path_statistics(gen, n_pairs: int, T: int = 128, seed: int = 0, features=None,
                    chunk_rows: int = 1 << 18) -> PathStats:
    if n_pairs < 1:
        raise InputError("n_pairs must be >= 1")
    if T < 2:
        raise InputError("need T >= 2 segments")
    z0, z1 = latent_pairs(gen, n_pairs, seed)
    t = np.linspace(0.0, 1.0, T + 1)
    per_chunk = max(1, chunk_rows // (T + 1))
    smax, length, var = (np.empty(n_pairs) for _ in range(3))
    for s in range(0, n_pairs, per_chunk):
        a, b = z0[s:s + per_chunk], z1[s:s + per_chunk]
        zs = (1.0 - t)[None, :, None] * a[:, None, :] + t[None, :, None] * b[:, None, :]
        x = gen.map(zs.reshape(-1, zs.shape[-1]))
        if features is not None:
            x = features(x)
        sp = _speeds(x.reshape(len(a), T + 1, -1), T)
        smax[s:s + per_chunk] = sp.max(axis=1)
        length[s:s + per_chunk] = sp.sum(axis=1) / T
        var[s:s + per_chunk] = sp.var(axis=1)
    return PathStats(smax, length, var, T, seed)


@dataclass
class CompEstimate:
    value: float
    n_pairs: int
    T: int
    standard_error: float
    seed: int
    absolute_max: float = float("nan")  # diagnostic only


def _estimate(values, stats):
    n = len(values)
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return CompEstimate(float(np.mean(values)), n, stats.T, se, stats.seed, float(np.max(values)))


def comp(gen, n_pairs: int = 1000, T: int = 128, seed: int = 0, features=None) -> CompEstimate:
    """Mean over prior pairs of the per-path maximum speed."""
    stats = path_statistics(gen, n_pairs, T, seed, features)
    return _estimate(stats.s_max, stats)


def pairwise_path_length(gen, n_pairs: int = 1000, T: int = 128, seed: int = 0,
                         features=None) -> CompEstimate:
    """Mean path length over the same prior pairs ``comp`` uses for ``seed``."""
    stats = path_statistics(gen, n_pairs, T, seed, features)
    return _estimate(stats.length, stats)


def mean_speed_variance(gen, n_pairs: int = 1000, T: int = 128, seed: int = 0,
                        features=None) -> float:
    return float(np.mean(path_statistics(gen, n_pairs, T, seed, features).speed_var))


def f_gen(divergence_value: float, comp_value: float, alpha: float = 1.0) -> float:
    """Generalization score ``alpha * divergence + complexity`` (lower is better)."""
    if alpha <= 0:
        raise InputError("alpha must be > 0")
    if not (np.isfinite(divergence_value) and np.isfinite(comp_value)):
        raise InputError("f_gen inputs must be finite")
    return float(alpha * divergence_value + comp_value)
