"""Small MLP GANs on low-dimensional data.

Variants differ in discriminator loss and penalty:

==============  ======================  ==================================
variant         loss                    penalty
==============  ======================  ==================================
GAN0GP          non-saturating GAN      zero-centred GP on interpolates
GANR1           non-saturating GAN      R1 (zero-centred at real points)
WGAN1GP         Wasserstein             one-centred GP on interpolates
WGAN0GP         Wasserstein             zero-centred GP on interpolates
WGAN1GP-const   Wasserstein             one-centred GP + constant-speed
                                        regularizer on the generator
==============  ======================  ==================================
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diffnet
from .classical import kmeans_pr, knn_pr
from .data import as_points
from .errors import ConfigError, GenmeterError, InputError, TrainingDiverged
from .generators import LatentSpec, MlpGenerator
from .mdl import comp, f_gen, pairwise_path_length, path_statistics
from .nnd import NndConfig, nnd_fixed, nnd_streaming
from .report import MetricReport, rows_to_csv
from .rng import substream

VARIANTS = ("GAN0GP", "GANR1", "WGAN1GP", "WGAN0GP", "WGAN1GP-const")
_PENALTY = {"GAN0GP": "zero_centered_gp", "GANR1": "r1", "WGAN1GP": "one_centered_gp",
            "WGAN0GP": "zero_centered_gp", "WGAN1GP-const": "one_centered_gp"}


@dataclass
class GanConfig:
    variant: str = "WGAN1GP"
    latent: LatentSpec = field(default_factory=lambda: LatentSpec(2, "uniform"))
    generator_hidden: tuple = (64, 64, 64)
    discriminator_hidden: tuple = (64, 64, 64)
    activation: str = "leaky_relu"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    gp_weight: float = 10.0
    const_weight: float = 0.0
    const_T: int = 16
    const_pairs: int = 16
    epochs: int = 100
    batch_size: int = 128
    checkpoint_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown GAN variant {self.variant!r}")
        if self.gp_weight < 0:
            raise ConfigError("gp_weight must be >= 0")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.const_weight > 0 and self.variant != "WGAN1GP-const":
            raise ConfigError("const_weight > 0 is only meaningful for WGAN1GP-const")
        if self.variant == "WGAN1GP-const" and self.const_weight <= 0:
            raise ConfigError("WGAN1GP-const needs const_weight > 0")
        if self.const_T < 2 or self.const_pairs < 1:
            raise ConfigError("const_T must be >= 2 and const_pairs >= 1")

    @property
    def wasserstein(self) -> bool:
        return self.variant.startswith("WGAN")

    @property
    def penalty(self) -> str:
        return _PENALTY[self.variant]


DESK_EPOCHS = 100
DESK_CONST_WEIGHT = 10.0
LR_PRESETS = {"default": 2e-4, "large": 1e-3}  # "large" collapses GAN0GP on purpose


def desk_config(variant: str, seed: int = 0, **overrides) -> GanConfig:
    """Desk preset: 100 epochs; the constant-speed variant gets weight 10."""
    base = {"variant": variant, "seed": seed, "epochs": DESK_EPOCHS}
    if variant == "WGAN1GP-const":
        base["const_weight"] = DESK_CONST_WEIGHT
    base.update(overrides)
    return GanConfig(**base)


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)  # (epoch, g_loss, d_loss, regularizer, checkpoint)
    checkpoints: dict = field(default_factory=dict)  # epoch -> MlpGenerator

    COLUMNS = ("epoch", "generator_loss", "discriminator_loss", "regularizer", "checkpoint")

    def to_csv(self) -> str:
        return rows_to_csv(self.COLUMNS, self.records)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def const_speed_loss(gen_net: diffnet.MlpNetwork, z0, z1, T: int):
    """Mean over pairs of the variance of segment speeds along the generated
    path, with its gradient w.r.t. the generator parameters."""
    z0, z1 = np.atleast_2d(z0), np.atleast_2d(z1)
    if len(z0) == 0 or z0.shape != z1.shape:
        raise InputError("need a non-empty set of matching latent pairs")
    if T < 2:
        raise InputError("need T >= 2")
    P = len(z0)
    t = np.linspace(0.0, 1.0, T + 1)
    zs = ((1.0 - t)[None, :, None] * z0[:, None, :] + t[None, :, None] * z1[:, None, :]).reshape(-1, z0.shape[1])
    pre, post = diffnet._forward_cache(gen_net, zs)
    x = post[-1].reshape(P, T + 1, -1)
    diff = np.diff(x, axis=1)
    norm = np.linalg.norm(diff, axis=2)
    s = norm * T
    dev = s - s.mean(axis=1, keepdims=True)
    loss = float(np.mean(dev ** 2))
    # d loss / d s = 2 dev / (P T); the mean term drops out since dev sums to 0
    ds = 2.0 * dev / (P * T)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(norm[..., None] > 0, diff / norm[..., None], 0.0)
    seg = (ds * T)[..., None] * unit
    xbar = np.zeros_like(x)
    xbar[:, 1:] += seg
    xbar[:, :-1] -= seg
    grads = diffnet._backward_cached(gen_net, pre, post, xbar.reshape(-1, x.shape[2]))
    grads.inputs = None
    return loss, grads


def _disc_step(cfg, D, d_state, real, fake, gp_rng):
    B = len(real)
    pre, post = diffnet._forward_cache(D, np.vstack([real, fake]))
    out = post[-1][:, 0]
    fr, ff = out[:B], out[B:]
    if cfg.wasserstein:
        loss = ff.mean() - fr.mean()
        g_out = np.r_[np.full(B, -1.0 / B), np.full(len(fake), 1.0 / len(fake))]
    else:
        loss = _softplus(-fr).mean() + _softplus(ff).mean()
        g_out = np.r_[-_sigmoid(-fr) / B, _sigmoid(ff) / len(fake)]
    grads = diffnet._backward_cached(D, pre, post, g_out[:, None])
    penalty = 0.0
    if cfg.gp_weight > 0:
        penalty, gp_grads = diffnet.gradient_penalty(D, real, fake, cfg.penalty, gp_rng)
        grads = grads + gp_grads.scaled(cfg.gp_weight)
    params, d_state = diffnet.adam_step(d_state, D.parameters(), grads.parameters())
    return D.with_parameters(params), d_state, float(loss + cfg.gp_weight * penalty)


def _gen_step(cfg, G, g_state, D, z, pair_rng):
    pre, post = diffnet._forward_cache(G, z)
    x = post[-1]
    f = diffnet.forward(D, x)[:, 0]
    n = len(z)
    if cfg.wasserstein:
        loss = -f.mean()
        df = np.full(n, -1.0 / n)
    else:
        loss = _softplus(-f).mean()
        df = -_sigmoid(-f) / n
    dx = diffnet.backward(D, x, df[:, None]).inputs
    grads = diffnet._backward_cached(G, pre, post, dx)
    grads.inputs = None
    reg = 0.0
    if cfg.const_weight > 0:
        za = cfg.latent.sample(cfg.const_pairs, pair_rng)
        zb = cfg.latent.sample(cfg.const_pairs, pair_rng)
        reg, reg_grads = const_speed_loss(G, za, zb, cfg.const_T)
        grads = grads + reg_grads.scaled(cfg.const_weight)
    params, g_state = diffnet.adam_step(g_state, G.parameters(), grads.parameters())
    return G.with_parameters(params), g_state, float(loss + cfg.const_weight * reg), reg


def train_gan(cfg: GanConfig, D_train, checkpoint_dir=None):
    """Alternating discriminator/generator Adam updates, one each per step.

    Returns the final ``MlpGenerator`` and a ``TrainingLog`` that keeps an
    in-memory generator snapshot at epoch 0 and every ``checkpoint_every``
    epochs (also written to ``checkpoint_dir`` when given).
    """
    x = as_points(D_train)
    if len(x) == 0:
        raise InputError("training set is empty")
    d = x.shape[1]
    G = diffnet.init_mlp([cfg.latent.dim, *cfg.generator_hidden, d], hidden=cfg.activation,
                         seed=substream(cfg.seed, "gan", "g_init"))
    D = diffnet.init_mlp([d, *cfg.discriminator_hidden, 1], hidden=cfg.activation,
                         seed=substream(cfg.seed, "gan", "d_init"))
    g_state = diffnet.AdamState.fresh(G.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    d_state = diffnet.AdamState.fresh(D.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    data_rng = substream(cfg.seed, "gan", "batches")
    z_rng = substream(cfg.seed, "gan", "latent")
    gp_rng = substream(cfg.seed, "gan", "gp")
    pair_rng = substream(cfg.seed, "gan", "const_pairs")
    B = min(cfg.batch_size, len(x))
    steps = max(1, len(x) // B)
    log = TrainingLog()
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    def snapshot(epoch, Gnet):
        gen = MlpGenerator(Gnet.copy(), cfg.latent)
        log.checkpoints[epoch] = gen
        if checkpoint_dir is None:
            return ""
        path = checkpoint_dir / f"{cfg.variant}_seed{cfg.seed}_epoch{epoch:04d}.gmtr"
        gen.save(path)
        return path.name

    ref = snapshot(0, G)
    log.records.append((0, float("nan"), float("nan"), float("nan"), ref))
    for epoch in range(1, cfg.epochs + 1):
        perm = data_rng.permutation(len(x))
        g_losses, d_losses, regs = [], [], []
        for s in range(steps):
            real = x[perm[s * B:(s + 1) * B]]
            fake = diffnet.forward(G, cfg.latent.sample(B, z_rng))
            D, d_state, d_loss = _disc_step(cfg, D, d_state, real, fake, gp_rng)
            G, g_state, g_loss, reg = _gen_step(cfg, G, g_state, D, cfg.latent.sample(B, z_rng), pair_rng)
            if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
                raise TrainingDiverged(f"{cfg.variant} diverged in epoch {epoch}", iteration=epoch)
            g_losses.append(g_loss)
            d_losses.append(d_loss)
            regs.append(reg)
        ref = snapshot(epoch, G) if epoch % cfg.checkpoint_every == 0 or epoch == cfg.epochs else ""
        log.records.append((epoch, float(np.mean(g_losses)), float(np.mean(d_losses)),
                            float(np.mean(regs)), ref))
    return MlpGenerator(G, cfg.latent), log


@dataclass
class SuiteConfig:
    n_generated: int | None = None  # defaults to |D_test|
    kmeans_k: int = 20
    beta: float = 8.0
    knn_k: int = 3
    nnd: NndConfig = field(default_factory=lambda: NndConfig(iterations=1000, eval_window=200))
    n_pairs: int = 500
    T: int = 128
    alpha: float = 1.0
    streaming: bool = True
    seed: int = 0


def evaluate_checkpoint(gen, D_train, D_test, suite: SuiteConfig | None = None) -> MetricReport:
    """Run the metric suite on one generator; every sub-metric is seeded from ``suite.seed``."""
    suite = suite or SuiteConfig()
    test = as_points(D_test)
    n_gen = suite.n_generated or len(test)
    seed = suite.seed
    fake = gen.sample(n_gen, substream(seed, "suite", "sample"))
    report = MetricReport()

    def run(name, fn):
        try:
            return fn()
        except GenmeterError as exc:
            exc.args = (f"[{name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
            raise

    fb, fib, _ = run("kmeans_pr", lambda: kmeans_pr(test, fake, suite.kmeans_k, suite.beta,
                                                    seed=substream(seed, "suite", "kmeans")))
    report.add("kmeans_F_beta", fb, {"k": suite.kmeans_k, "beta": suite.beta}, seed)
    report.add("kmeans_F_inv_beta", fib, {"k": suite.kmeans_k, "beta": suite.beta}, seed)
    p, r = run("knn_pr", lambda: knn_pr(test, fake, suite.knn_k))
    report.add("knn_precision", p, {"k": suite.knn_k}, seed)
    report.add("knn_recall", r, {"k": suite.knn_k}, seed)
    ncfg = replace(suite.nnd, seed=seed)
    nf = run("nnd_fixed", lambda: nnd_fixed(ncfg, test, gen, n_gen))
    report.add("nnd_fixed", nf, {"m": n_gen, "iterations": ncfg.iterations}, seed)
    if suite.streaming:
        ns = run("nnd_streaming", lambda: nnd_streaming(ncfg, test, gen))
        report.add("nnd_streaming", ns, {"iterations": ncfg.iterations}, seed)
    stats = run("comp", lambda: path_statistics(gen, suite.n_pairs, suite.T, seed))
    comp_value = float(np.mean(stats.s_max))
    report.add("comp", comp_value, {"n_pairs": suite.n_pairs, "T": suite.T}, seed)
    report.add("comp_stderr", float(np.std(stats.s_max, ddof=1) / np.sqrt(suite.n_pairs)),
               {"n_pairs": suite.n_pairs, "T": suite.T}, seed)
    report.add("pairwise_path_length", float(np.mean(stats.length)),
               {"n_pairs": suite.n_pairs, "T": suite.T}, seed)
    report.add("speed_variance", float(np.mean(stats.speed_var)),
               {"n_pairs": suite.n_pairs, "T": suite.T}, seed)
    report.add("f_gen", f_gen(nf, comp_value, suite.alpha), {"alpha": suite.alpha, "divergence": "nnd_fixed"}, seed)
    return report
