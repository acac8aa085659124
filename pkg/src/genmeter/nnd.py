"""Neural net divergence: train a critic to maximise ``E_real f - E_fake f``.

Two protocols are provided.  *Streaming* draws fresh generator samples for
every critic batch.  *Fixed* materialises a generated dataset of a fixed size
once and trains on it like any finite dataset, so generator noise cannot
pass for diversity.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import spearmanr

from . import diffnet
from .data import as_points
from .errors import ConfigError, InputError, TrainingDiverged
from .rng import derive_seed, substream

PROTOCOLS = ("streaming", "fixed")


@dataclass
class NndConfig:
    hidden: tuple = (64, 64, 64)
    activation: str = "leaky_relu"
    iterations: int = 2000
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 128
    gp_mode: str = "one_centered_gp"
    gp_weight: float = 10.0
    protocol: str = "streaming"
    m: int | None = None  # generated-set size for the fixed protocol
    eval_batches: int = 1
    eval_window: int = 200
    holdout: float = 0.1  # fraction of each FixedDataset kept for evaluation
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.gp_mode not in diffnet.GP_MODES:
            raise ConfigError(f"unknown gp_mode {self.gp_mode!r}")
        if not (self.iterations >= self.eval_window >= 1):
            raise ConfigError("need iterations >= eval_window >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if not (0.0 <= self.holdout < 1.0):
            raise ConfigError("holdout must lie in [0, 1)")


PRESETS = {
    "desk": NndConfig(),
    # full-scale recipe: 3x512 MLP, 20000 iterations, lr 1e-4, Adam(0.9, 0.999)
    "paper": NndConfig(hidden=(512, 512, 512), iterations=20000, lr=1e-4, beta1=0.9,
                       beta2=0.999, eval_window=200),
}
FULL_TEST_SIZE = 10000


def preset(name: str, **overrides) -> NndConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return replace(PRESETS[name], **overrides)


class SampleSource:
    dim: int

    def next_batch(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def eval_batch(self, n: int) -> np.ndarray:
        raise NotImplementedError


class FixedDataset(SampleSource):
    """Cycles a finite dataset; each epoch visits every training row once.

    With ``holdout > 0`` that fraction of rows is reserved for evaluation
    batches and never used for training.
    """

    def __init__(self, data, seed, holdout=0.0):
        x = as_points(data)
        if len(x) < 2:
            raise InputError("fixed dataset needs at least 2 rows")
        self._rng = substream(seed, "fixed", "shuffle")
        self._eval_rng = substream(seed, "fixed", "eval")
        perm = self._rng.permutation(len(x))
        n_hold = int(round(holdout * len(x)))
        self.eval_rows = x[perm[:n_hold]] if n_hold else x
        self.train_rows = x[perm[n_hold:]] if n_hold else x
        self.dim = x.shape[1]
        self._order = self._rng.permutation(len(self.train_rows))
        self._pos = 0

    def next_batch(self, n):
        out = []
        while n > 0:
            if self._pos == len(self._order):
                self._order = self._rng.permutation(len(self.train_rows))
                self._pos = 0
            take = min(n, len(self._order) - self._pos)
            out.append(self.train_rows[self._order[self._pos:self._pos + take]])
            self._pos += take
            n -= take
        return np.vstack(out) if len(out) > 1 else out[0]

    def eval_batch(self, n):
        idx = self._eval_rng.integers(len(self.eval_rows), size=n)
        return self.eval_rows[idx]


class StreamingGenerator(SampleSource):
    """Fresh generator samples on every call, each from its own substream."""

    def __init__(self, gen, seed):
        self.gen = gen
        self.seed = seed
        self.dim = gen.data_dim
        self._calls = 0

    def _draw(self, n, tag):
        self._calls += 1
        return self.gen.sample(n, substream(self.seed, "stream", tag, self._calls))

    def next_batch(self, n):
        return self._draw(n, "train")

    def eval_batch(self, n):
        return self._draw(n, "eval")


@dataclass
class CriticResult:
    critic: diffnet.MlpNetwork
    estimate: float
    trace: np.ndarray = field(repr=False)
    eval_trace: np.ndarray = field(repr=False)


def _critic_mean_gap(critic, xr, xf):
    out = diffnet.forward(critic, np.vstack([xr, xf]))[:, 0]
    return float(out[:len(xr)].mean() - out[len(xr):].mean())


def train_critic(cfg: NndConfig, real: SampleSource, fake: SampleSource) -> CriticResult:
    """Adam ascent on ``E_real f - E_fake f - gp_weight * penalty``.

    The estimate averages the objective on evaluation batches over the final
    ``eval_window`` iterations.
    """
    if real.dim != fake.dim:
        raise InputError(f"real data has dim {real.dim}, fake data has dim {fake.dim}")
    widths = [real.dim, *cfg.hidden, 1]
    critic = diffnet.init_mlp(widths, hidden=cfg.activation, seed=substream(cfg.seed, "critic", "init"))
    state = diffnet.AdamState.fresh(critic.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    gp_rng = substream(cfg.seed, "critic", "gp")
    B = cfg.batch_size
    out_grad = np.r_[np.full(B, -1.0 / B), np.full(B, 1.0 / B)][:, None]
    trace = np.empty(cfg.iterations)
    evals = []
    for it in range(cfg.iterations):
        xr = real.next_batch(B)
        xf = fake.next_batch(B)
        both = np.vstack([xr, xf])
        pre, post = diffnet._forward_cache(critic, both)
        out = post[-1][:, 0]
        objective = out[:B].mean() - out[B:].mean()
        grads = diffnet._backward_cached(critic, pre, post, out_grad)
        penalty = 0.0
        if cfg.gp_weight > 0:
            penalty, gp_grads = diffnet.gradient_penalty(critic, xr, xf, cfg.gp_mode, gp_rng)
            grads = grads + gp_grads.scaled(cfg.gp_weight)
        if not (np.isfinite(objective) and np.isfinite(penalty)):
            raise TrainingDiverged(f"critic loss became non-finite at iteration {it}", iteration=it)
        params, state = diffnet.adam_step(state, critic.parameters(), grads.parameters())
        critic = critic.with_parameters(params)
        trace[it] = objective
        if it >= cfg.iterations - cfg.eval_window:
            gaps = [_critic_mean_gap(critic, real.eval_batch(B), fake.eval_batch(B))
                    for _ in range(cfg.eval_batches)]
            evals.append(np.mean(gaps))
    return CriticResult(critic, float(np.mean(evals)), trace, np.asarray(evals))


def nnd_streaming(cfg: NndConfig, D_test, gen) -> float:
    real = FixedDataset(D_test, derive_seed(cfg.seed, "nnd", "real"), cfg.holdout)
    fake = StreamingGenerator(gen, derive_seed(cfg.seed, "nnd", "stream"))
    return train_critic(cfg, real, fake).estimate


def nnd_datasets(cfg: NndConfig, D_test, D_g) -> float:
    """Fixed-protocol NND between two finite datasets."""
    real = FixedDataset(D_test, derive_seed(cfg.seed, "nnd", "real"), cfg.holdout)
    fake = FixedDataset(D_g, derive_seed(cfg.seed, "nnd", "fake"), cfg.holdout)
    return train_critic(cfg, real, fake).estimate


def nnd_fixed(cfg: NndConfig, D_test, gen, m: int | None = None, seed=None) -> float:
    m = cfg.m if m is None else m
    if m is None:
        m = len(as_points(D_test))
    if m < cfg.batch_size:
        raise InputError(f"fixed generated set size {m} is smaller than the batch size")
    seed = cfg.seed if seed is None else seed
    D_g = gen.sample(m, substream(seed, "nnd", "materialise"))
    return nnd_datasets(cfg, D_test, D_g)


def nnd(cfg: NndConfig, D_test, gen) -> float:
    """Dispatch on ``cfg.protocol``."""
    if cfg.protocol == "streaming":
        return nnd_streaming(cfg, D_test, gen)
    return nnd_fixed(cfg, D_test, gen)


def grid_orderings(rows):
    """Per-(protocol, |D|) means over seeds and the ordering of the means in epsilon.

    ``rows`` are (epsilon, subset_size, protocol, seed, estimate).  Returns the
    summary rows (protocol, size, epsilon, mean, std, n_seeds) and one ordering
    row (protocol, size, spearman_rho, monotone, direction) per column, where
    rho is the rank correlation between epsilon and every per-seed estimate.
    """
    groups = {}
    for eps, size, protocol, seed, value in rows:
        groups.setdefault((protocol, size), {}).setdefault(eps, []).append(value)
    summary, orders = [], []
    for (protocol, size), by_eps in groups.items():
        eps = sorted(by_eps)
        means = [float(np.mean(by_eps[e])) for e in eps]
        for e, mu in zip(eps, means):
            summary.append((protocol, size, e, mu, float(np.std(by_eps[e])), len(by_eps[e])))
        xs = [e for e in eps for _ in by_eps[e]]
        ys = [v for e in eps for v in by_eps[e]]
        rho = float(spearmanr(xs, ys).statistic) if len(set(ys)) > 1 else 0.0
        steps = np.diff(means)
        direction = "decreasing" if np.all(steps < 0) else "increasing" if np.all(steps > 0) else "mixed"
        orders.append((protocol, size, rho, direction != "mixed", direction))
    return summary, orders
