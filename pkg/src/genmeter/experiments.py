"""Experiment runners behind the command line.

Each runner takes an ``ExperimentConfig`` and returns a list of ``Table``
objects (plus side artifacts such as checkpoints written under ``workdir``).
Runners never touch global random state; every stream is derived from the
configured seeds by name.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import gan_lab, nnd as nnd_mod
from .adversarial import build_dstar_is, build_dstar_kmeans, build_dstar_knn, monotonicity_probe
from .classical import OracleClassifier, inception_pseudo_divergence, kmeans_pr, knn_pr
from .config import ExperimentConfig
from .data import Dataset, SyntheticSampler, load_dataset, save_dataset, split_disjoint
from .errors import ConfigError
from .generators import (LatentSpec, MlpGenerator, NoisyMemorizer, SigmoidStepGenerator,
                         constant_generator, identity_generator)
from .mdl import path_statistics
from .report import REPORT_COLUMNS
from .rng import substream

GRID_COLUMNS = ("epsilon", "subset_size", "protocol", "seed", "nnd_estimate")
GRID_SUMMARY_COLUMNS = ("protocol", "subset_size", "epsilon", "mean", "std", "n_seeds")
GRID_ORDER_COLUMNS = ("protocol", "subset_size", "spearman_rho", "monotone", "direction")
PROBE_COLUMNS = ("metric", "size", "seed", "value")
COMP_COLUMNS = ("generator_id", "n_pairs", "T", "comp", "stderr", "pairwise_length", "seed")
ADVERSARIAL_COLUMNS = ("construction", "distinct_count", "n_rows", "metric_name", "value", "full_train_value",
                       "seed")
LOG_COLUMNS = ("variant", "seed") + gan_lab.TrainingLog.COLUMNS
CHECKPOINT_METRIC_COLUMNS = ("variant", "seed", "epoch", "metric_name", "value", "params")
DATASET_COLUMNS = ("path", "n_points", "dim", "labels", "seed")

SCHEMAS = {
    "nnd_grid": GRID_COLUMNS,
    "nnd_grid_summary": GRID_SUMMARY_COLUMNS,
    "nnd_grid_orderings": GRID_ORDER_COLUMNS,
    "probe": PROBE_COLUMNS,
    "comp": COMP_COLUMNS,
    "adversarial": ADVERSARIAL_COLUMNS,
    "training_log": LOG_COLUMNS,
    "checkpoint_metrics": CHECKPOINT_METRIC_COLUMNS,
    "report": REPORT_COLUMNS,
    "dataset": DATASET_COLUMNS,
}


@dataclass
class Table:
    name: str
    columns: tuple
    rows: list


# --- shared helpers ----------------------------------------------------------

def _run_jobs(fn, jobs, n_jobs=1):
    """Run ``fn(*job)`` for every job; results come back in job order."""
    if n_jobs <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(n_jobs, os.cpu_count() or 1)) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def sampler_from(section: dict) -> SyntheticSampler:
    section = dict(section)
    family = section.pop("family", "gaussian_mixture")
    dim = int(section.pop("dim", 2))
    for key in ("n_train", "n_test", "data_seed", "train_path", "test_path", "path", "n"):
        section.pop(key, None)
    return SyntheticSampler(family, dim, section)


def load_data(cfg: ExperimentConfig, n_train=2000, n_test=1000):
    """Train/test sets from ``[data]``: file paths or a sampler spec."""
    data = cfg.section("data")
    if data.get("train_path") or data.get("test_path"):
        if not (data.get("train_path") and data.get("test_path")):
            raise ConfigError("[data] needs both train_path and test_path")
        return load_dataset(data["train_path"]), load_dataset(data["test_path"])
    sampler = sampler_from(data)
    return split_disjoint(sampler, int(data.get("n_train", n_train)), int(data.get("n_test", n_test)),
                          int(data.get("data_seed", 0)))


def nnd_config(cfg: ExperimentConfig, seed=0, **extra) -> nnd_mod.NndConfig:
    over = cfg.section("nnd")
    names = {f.name for f in fields(nnd_mod.NndConfig)}
    unknown = set(over) - names
    if unknown:
        raise ConfigError(f"[nnd] unknown keys: {', '.join(sorted(unknown))}")
    if "hidden" in over:
        over["hidden"] = tuple(int(h) for h in np.atleast_1d(over["hidden"]))
    over.update(extra)
    over["seed"] = seed
    return nnd_mod.preset(cfg.preset, **over)


def make_generator(spec: str, D_train: Dataset, seed: int = 0):
    """Generator from a short id.

    ``identity[:dim]``, ``constant``, ``linear``, ``sigmoid[:sharpness]``,
    ``memorizer:<size>[:<epsilon>]``, ``ckpt:<path>``.
    """
    kind, _, rest = str(spec).partition(":")
    args = rest.split(":") if rest else []
    if kind == "identity":
        return identity_generator(int(args[0]) if args else 1)
    if kind == "ckpt":
        return MlpGenerator.load(rest)
    if D_train is None:
        raise ConfigError(f"generator {spec!r} needs a training set")
    x = D_train.points
    if kind == "constant":
        return constant_generator(x[0])
    if kind in ("sigmoid", "linear"):
        far = build_dstar_knn(D_train).rows.points
        sig = SigmoidStepGenerator(far[0], far[1], float(args[0]) if args else 50.0)
        return sig if kind == "sigmoid" else sig.matched_linear()
    if kind == "memorizer":
        size = int(args[0]) if args else len(x)
        eps = float(args[1]) if len(args) > 1 else 0.0
        idx = substream(seed, "memorizer", "subset").permutation(len(x))[:size]
        return NoisyMemorizer(x[np.sort(idx)], eps)
    raise ConfigError(f"unknown generator id {spec!r}")


# --- nnd noise grid ------------------------------------------------------------

def _grid_job(ncfg, test_points, train_points, size, eps, protocol, m, noise_kind, seed):
    idx = substream(seed, "grid", "subset", size).permutation(len(train_points))[:size]
    gen = NoisyMemorizer(train_points[np.sort(idx)], eps, noise_kind)
    cfg = replace(ncfg, protocol=protocol, seed=seed, m=m)
    return nnd_mod.nnd(cfg, Dataset(test_points), gen)


def noise_grid_rows(ncfg, D_train, D_test, epsilons, sizes, protocols, seeds, m=None,
                    noise_kind="uniform", n_jobs=1):
    """Rows of (epsilon, subset_size, protocol, seed, nnd_estimate).

    The memorized subset depends on (seed, size) only, so every epsilon sees
    the same rows, and the memorizer's noise draws are shared across epsilon.
    """
    keys, jobs = [], []
    for protocol in protocols:
        for size in sizes:
            for eps in epsilons:
                for seed in seeds:
                    keys.append((float(eps), int(size), protocol, int(seed)))
                    jobs.append((ncfg, D_test.points, D_train.points, int(size), float(eps), protocol,
                                 m, noise_kind, int(seed)))
    values = _run_jobs(_grid_job, jobs, n_jobs)
    return [k + (float(v),) for k, v in zip(keys, values)]


def run_nnd_grid(cfg: ExperimentConfig, workdir: Path, n_jobs=1):
    D_train, D_test = load_data(cfg, n_train=10000, n_test=2000)
    grid = cfg.section("grid")
    eps = [float(e) for e in np.atleast_1d(grid.get("epsilons", [0.0, 0.1, 0.5, 1.0]))]
    sizes = [len(D_train) if s == "full" else int(s) for s in np.atleast_1d(grid.get("sizes", [100, 1000, "full"]))]
    protocols = [str(p) for p in np.atleast_1d(grid.get("protocols", ["streaming", "fixed"]))]
    m = grid.get("m")
    ncfg = nnd_config(cfg)
    rows = noise_grid_rows(ncfg, D_train, D_test, eps, sizes, protocols, cfg.seeds, m,
                           grid.get("noise_kind", "uniform"), n_jobs)
    summary, orders = nnd_mod.grid_orderings(rows)
    return [Table("nnd_grid", GRID_COLUMNS, rows),
            Table("nnd_grid_summary", GRID_SUMMARY_COLUMNS, summary),
            Table("nnd_grid_orderings", GRID_ORDER_COLUMNS, orders)]


# --- adversarial ---------------------------------------------------------------

def adversarial_rows(D_train, D_test, C, k_means=20, beta=8.0, k_nn=3, seed=0):
    rows = []
    n_test = len(D_test)
    baseline = D_train.subset(np.arange(min(len(D_train), n_test)))

    star = build_dstar_is(D_train, C)
    clf = OracleClassifier(D_train, C)
    rows.append(("dstar_is", star.distinct_count, len(star.rows), "f_is",
                 inception_pseudo_divergence(clf, star.rows), inception_pseudo_divergence(clf, baseline)))

    star = build_dstar_kmeans(D_train, D_test, k_means, seed)
    fb, fib, _ = kmeans_pr(D_test, star.rows, k_means, beta, seed=substream(seed, "adversarial", "kmeans"))
    bb, bib, _ = kmeans_pr(D_test, baseline, k_means, beta, seed=substream(seed, "adversarial", "kmeans"))
    rows.append(("dstar_kmeans", star.distinct_count, len(star.rows), "kmeans_F_beta", fb, bb))
    rows.append(("dstar_kmeans", star.distinct_count, len(star.rows), "kmeans_F_inv_beta", fib, bib))

    star = build_dstar_knn(D_train)
    p, r = knn_pr(D_test, star.rows, k_nn, k_fake=1)
    bp, br = knn_pr(D_test, baseline, k_nn)
    rows.append(("dstar_knn", star.distinct_count, len(star.rows), "knn_precision", p, bp))
    rows.append(("dstar_knn", star.distinct_count, len(star.rows), "knn_recall", r, br))
    return rows


def run_adversarial(cfg: ExperimentConfig, workdir: Path, n_jobs=1):
    D_train, D_test = load_data(cfg)
    adv = cfg.section("adversarial")
    if D_train.labels is None:
        raise ConfigError("adversarial experiments need a labelled dataset")
    C = int(adv.get("classes", int(D_train.labels.max()) + 1))
    rows = []
    for seed in cfg.seeds:
        rows += [r + (seed,) for r in adversarial_rows(
            D_train, D_test, C, int(adv.get("k_means", 20)), float(adv.get("beta", 8.0)),
            int(adv.get("k_nn", 3)), seed)]
    return [Table("adversarial", ADVERSARIAL_COLUMNS, rows)]


# --- monotonicity probe --------------------------------------------------------

class NndFixedMetric:
    """``metric(D_test, D_n)`` = fixed-protocol NND of the clean memorizer of ``D_n``."""

    def __init__(self, ncfg, m=None):
        self.ncfg, self.m = ncfg, m

    def __call__(self, D_test, D_n):
        return nnd_mod.nnd_fixed(self.ncfg, D_test, NoisyMemorizer(D_n.points), self.m)


def knn_recall_metric(k=3):
    return lambda D_test, D_n: knn_pr(D_test, D_n, k, k_fake=1)[1]


def dstar_knn_transform(D_n):
    return build_dstar_knn(D_n).rows


def run_probe(cfg: ExperimentConfig, workdir: Path, n_jobs=1):
    probe = cfg.section("probe")
    sampler = sampler_from(cfg.section("data"))
    m = int(probe.get("m", 1000))
    sizes = [int(s) for s in np.atleast_1d(probe.get("sizes", [100, 1000, 10000]))]
    n_seeds = int(probe.get("n_seeds", 5))
    metrics = [str(x) for x in np.atleast_1d(probe.get("metrics", ["nnd_fixed", "knn_recall_dstar"]))]
    base = int(cfg.seeds[0])
    rows = []
    for name in metrics:
        if name == "nnd_fixed":
            res = monotonicity_probe(NndFixedMetric(nnd_config(cfg, base), probe.get("nnd_m")),
                                     sampler, m, sizes, n_seeds, base)
        elif name == "knn_recall_dstar":
            res = monotonicity_probe(knn_recall_metric(int(probe.get("k", 3))), sampler, m, sizes,
                                     n_seeds, base, transform=dstar_knn_transform)
        elif name == "knn_recall":
            res = monotonicity_probe(knn_recall_metric(int(probe.get("k", 3))), sampler, m, sizes, n_seeds, base)
        else:
            raise ConfigError(f"unknown probe metric {name!r}")
        rows += [(name, n, s, v) for n, s, v in res.rows()]
        rows += [(name, f"mean@{n}", "", mu) for n, mu in zip(res.sizes, res.means)]
        rows.append((name, "summary", "", "decreasing" if res.decreasing else "not_decreasing"))
    return [Table("probe", PROBE_COLUMNS, rows)]


# --- comp sweep ----------------------------------------------------------------

def run_comp(cfg: ExperimentConfig, workdir: Path, n_jobs=1):
    sec = cfg.section("comp")
    gens = [str(g) for g in np.atleast_1d(sec.get("generators", ["identity", "linear", "sigmoid:50"]))]
    n_pairs, T = int(sec.get("n_pairs", 1000)), int(sec.get("T", 128))
    needs_data = any(not g.startswith(("identity", "ckpt")) for g in gens)
    D_train = load_data(cfg)[0] if needs_data else None
    rows = []
    for g in gens:
        for seed in cfg.seeds:
            stats = path_statistics(make_generator(g, D_train, seed), n_pairs, T, seed)
            se = float(np.std(stats.s_max, ddof=1) / np.sqrt(n_pairs)) if n_pairs > 1 else 0.0
            rows.append((g, n_pairs, T, float(np.mean(stats.s_max)), se, float(np.mean(stats.length)), seed))
    return [Table("comp", COMP_COLUMNS, rows)]


# --- metrics suite on one generator ----------------------------------------------

def suite_config(cfg: ExperimentConfig, seed: int) -> gan_lab.SuiteConfig:
    sec = cfg.section("suite")
    names = {f.name for f in fields(gan_lab.SuiteConfig)} - {"nnd", "seed"}
    unknown = set(sec) - names - {"evaluate"}
    if unknown:
        raise ConfigError(f"[suite] unknown keys: {', '.join(sorted(unknown))}")
    kw = {k: v for k, v in sec.items() if k in names}
    return gan_lab.SuiteConfig(nnd=nnd_config(cfg, seed), seed=seed, **kw)


def run_metrics(cfg: ExperimentConfig, workdir: Path, n_jobs=1):
    D_train, D_test = load_data(cfg)
    spec = cfg.get("generator", "id", "memorizer")
    rows = []
    for seed in cfg.seeds:
        gen = make_generator(spec, D_train, seed)
        report = gan_lab.evaluate_checkpoint(gen, D_train, D_test, suite_config(cfg, seed))
        rows += report.rows
    return [Table("report", REPORT_COLUMNS, rows)]


# --- GAN training ----------------------------------------------------------------

def gan_config(cfg: ExperimentConfig, variant: str, seed: int) -> gan_lab.GanConfig:
    sec = cfg.section("gan")
    sec.pop("variants", None)
    latent_dim = int(sec.pop("latent_dim", 2))
    prior = sec.pop("prior", "uniform")
    if cfg.preset == "paper":
        sec.setdefault("generator_hidden", [512, 512, 512])
        sec.setdefault("discriminator_hidden", [512, 512, 512])
        sec.setdefault("epochs", 500)
    if isinstance(sec.get("lr"), str):
        if sec["lr"] not in gan_lab.LR_PRESETS:
            raise ConfigError(f"[gan] lr must be a number or one of {', '.join(gan_lab.LR_PRESETS)}")
        sec["lr"] = gan_lab.LR_PRESETS[sec["lr"]]
    for key in ("generator_hidden", "discriminator_hidden"):
        if key in sec:
            sec[key] = tuple(int(h) for h in np.atleast_1d(sec[key]))
    names = {f.name for f in fields(gan_lab.GanConfig)}
    unknown = set(sec) - names
    if unknown:
        raise ConfigError(f"[gan] unknown keys: {', '.join(sorted(unknown))}")
    return gan_lab.desk_config(variant, seed, latent=LatentSpec(latent_dim, prior), **sec)


def _train_job(gcfg, train_points, test_points, suite, evaluate, ckpt_dir):
    D_train, D_test = Dataset(train_points), Dataset(test_points)
    _, log = gan_lab.train_gan(gcfg, D_train, ckpt_dir)
    epochs = sorted(log.checkpoints)
    if evaluate == "final":
        epochs = [epochs[0], epochs[-1]]
    metrics = []
    for ep in epochs:
        rep = gan_lab.evaluate_checkpoint(log.checkpoints[ep], D_train, D_test, suite)
        metrics += [(ep, name, value, params) for name, value, params, _ in rep.rows]
    return log.records, metrics


def run_train(cfg: ExperimentConfig, workdir: Path, n_jobs=1):
    data = cfg.section("data")
    data.setdefault("family", "two_moons")
    cfg = replace(cfg, sections={**cfg.sections, "data": data})
    D_train, D_test = load_data(cfg)
    variants = [str(v) for v in np.atleast_1d(cfg.get("gan", "variants", list(gan_lab.VARIANTS)))]
    evaluate = cfg.get("suite", "evaluate", "final")
    keys, jobs = [], []
    for variant in variants:
        for seed in cfg.seeds:
            keys.append((variant, seed))
            jobs.append((gan_config(cfg, variant, seed), D_train.points, D_test.points,
                         suite_config(cfg, seed), evaluate, workdir / "checkpoints"))
    results = _run_jobs(_train_job, jobs, n_jobs)
    log_rows, metric_rows = [], []
    for (variant, seed), (records, metrics) in zip(keys, results):
        log_rows += [(variant, seed, *r) for r in records]
        metric_rows += [(variant, seed, *m) for m in metrics]
    return [Table("training_log", LOG_COLUMNS, log_rows),
            Table("checkpoint_metrics", CHECKPOINT_METRIC_COLUMNS, metric_rows)]


# --- dataset generation ------------------------------------------------------------

def run_dataset(cfg: ExperimentConfig, workdir: Path, n_jobs=1):
    data = cfg.section("data")
    sampler = sampler_from(data)
    name = data.get("path", f"{sampler.family}.csv")
    path = workdir / name
    rows = []
    for seed in cfg.seeds:
        target = path if len(cfg.seeds) == 1 else path.with_name(f"{path.stem}_seed{seed}{path.suffix}")
        ds = sampler.sample(int(data.get("n", 1000)), seed)
        save_dataset(ds, target)
        rows.append((target.name, len(ds), ds.dim, ds.labels is not None, seed))
    return [Table("dataset", DATASET_COLUMNS, rows)]


RUNNERS = {
    "metrics": run_metrics,
    "nnd_noise_grid": run_nnd_grid,
    "adversarial": run_adversarial,
    "monotonicity": run_probe,
    "train_gan": run_train,
    "comp_sweep": run_comp,
    "dataset": run_dataset,
}
