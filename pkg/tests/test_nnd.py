import numpy as np
import pytest

from genmeter.data import SyntheticSampler, split_disjoint
from genmeter.errors import ConfigError, InputError
from genmeter.generators import NoisyMemorizer
from genmeter.nnd import (FixedDataset, NndConfig, StreamingGenerator, grid_orderings, nnd, nnd_datasets,
                          nnd_fixed, nnd_streaming, preset, train_critic)

FAST = dict(hidden=(32, 32), iterations=400, eval_window=100)


class SamplerGenerator:
    """Adapts a synthetic sampler to the generator sampling interface."""

    def __init__(self, sampler):
        self.sampler = sampler
        self.data_dim = sampler.dim

    def sample(self, n, seed):
        return self.sampler.sample(n, seed).points


def gaussian(mean=0.0, d=2):
    return SyntheticSampler("gaussian_mixture", d, {"means": [[mean] * d]})


def test_identical_distributions_give_near_zero():
    cfg = NndConfig(**FAST)
    D_test = gaussian().sample(2000, 0)
    assert abs(nnd_streaming(cfg, D_test, SamplerGenerator(gaussian()))) < 0.05


def test_shifted_1d_gaussians_in_wasserstein_band():
    cfg = NndConfig(**FAST)
    D_test = gaussian(0.0, 1).sample(2000, 1)
    est = nnd_streaming(cfg, D_test, SamplerGenerator(gaussian(2.0, 1)))
    assert 1.0 <= est <= 3.0  # W1 = 2, 1-Lipschitz critic


def test_memorizing_the_test_set_is_near_zero():
    cfg = NndConfig(**FAST)
    D_test = gaussian().sample(1000, 2)
    assert abs(nnd_streaming(cfg, D_test, NoisyMemorizer(D_test.points))) < 0.05


GRID_SEEDS = range(5)
GRID_SIZES = (100, 1000, 10000)


@pytest.fixture(scope="module")
def memorizer_grid():
    """Mean estimates over 5 seeds: {(protocol, |D|, eps): mean} on an 8-D Gaussian."""
    s = gaussian(0.0, 8)
    D_train, D_test = split_disjoint(s, 10000, 2000, 0)
    out = {}
    for protocol in ("streaming", "fixed"):
        for size in GRID_SIZES:
            for eps in (0.0, 1.0):
                gen = NoisyMemorizer(D_train.points[:size], eps)
                vals = []
                for seed in GRID_SEEDS:
                    cfg = NndConfig(hidden=(64, 64), iterations=800, eval_window=200, seed=seed)
                    vals.append(nnd_streaming(cfg, D_test, gen) if protocol == "streaming"
                                else nnd_fixed(cfg, D_test, gen, m=2000))
                out[(protocol, size, eps)] = float(np.mean(vals))
    return out


def test_noisy_small_memorizer_beats_clean_full_set_when_streaming(memorizer_grid):
    assert memorizer_grid[("streaming", 100, 1.0)] < memorizer_grid[("streaming", 10000, 0.0)]


@pytest.mark.parametrize("eps", [0.0, 1.0])
def test_streaming_decreases_with_memorized_set_size(memorizer_grid, eps):
    means = [memorizer_grid[("streaming", n, eps)] for n in GRID_SIZES]
    assert means[0] > means[1] > means[2]


def test_fixed_clean_memorizer_decreases_with_size(memorizer_grid):
    means = [memorizer_grid[("fixed", n, 0.0)] for n in GRID_SIZES]
    assert means[0] > means[1] > means[2]


def test_streaming_noise_lowers_small_set_estimate(memorizer_grid):
    assert memorizer_grid[("streaming", 100, 1.0)] < memorizer_grid[("streaming", 100, 0.0)]


def test_fixed_noise_raises_large_set_estimate(memorizer_grid):
    assert memorizer_grid[("fixed", 10000, 1.0)] > memorizer_grid[("fixed", 10000, 0.0)]


def test_fixed_dataset_visits_each_row_once_per_epoch():
    x = np.arange(10.0)[:, None]
    src = FixedDataset(x, 0)
    for _ in range(3):
        rows = np.concatenate([src.next_batch(4), src.next_batch(6)])[:, 0]
        assert sorted(rows.tolist()) == list(range(10))


def test_fixed_dataset_holdout_is_disjoint():
    x = np.arange(100.0)[:, None]
    src = FixedDataset(x, 1, holdout=0.1)
    assert len(src.eval_rows) == 10 and len(src.train_rows) == 90
    train = set(src.next_batch(90)[:, 0])
    assert train.isdisjoint(set(src.eval_batch(50)[:, 0]))


def test_streaming_source_draws_fresh_samples():
    src = StreamingGenerator(SamplerGenerator(gaussian()), 0)
    assert not np.array_equal(src.next_batch(5), src.next_batch(5))


def test_estimates_are_deterministic():
    cfg = NndConfig(hidden=(16,), iterations=60, eval_window=20)
    D_test = gaussian().sample(300, 0)
    gen = NoisyMemorizer(D_test.points[:50], 0.3)
    assert nnd_streaming(cfg, D_test, gen) == nnd_streaming(cfg, D_test, gen)
    assert nnd_fixed(cfg, D_test, gen, m=200) == nnd_fixed(cfg, D_test, gen, m=200)
    assert nnd(NndConfig(hidden=(16,), iterations=60, eval_window=20, protocol="fixed", m=200), D_test, gen) == \
        nnd_fixed(cfg, D_test, gen, m=200)


def test_fixed_m_below_batch_raises():
    with pytest.raises(InputError):
        nnd_fixed(NndConfig(**FAST), gaussian().sample(300, 0), SamplerGenerator(gaussian()), m=50)


def test_dimension_mismatch_raises():
    cfg = NndConfig(hidden=(8,), iterations=5, eval_window=1)
    with pytest.raises(InputError):
        nnd_datasets(cfg, np.zeros((10, 2)), np.zeros((10, 3)))


@pytest.mark.parametrize("kw", [dict(protocol="online"), dict(gp_mode="lipschitz"),
                                dict(iterations=10, eval_window=20), dict(batch_size=1),
                                dict(holdout=1.0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        NndConfig(**kw)


def test_presets():
    assert preset("desk").iterations == 2000 and preset("desk").hidden == (64, 64, 64)
    full = preset("paper")
    assert full.iterations == 20000 and full.hidden == (512, 512, 512) and full.lr == 1e-4
    assert (full.beta1, full.beta2) == (0.9, 0.999)
    assert preset("desk", iterations=50, eval_window=10).iterations == 50
    with pytest.raises(ConfigError):
        preset("huge")


def test_trace_lengths():
    cfg = NndConfig(hidden=(8,), iterations=30, eval_window=10, batch_size=16)
    real = FixedDataset(np.random.default_rng(0).normal(size=(64, 2)), 0)
    res = train_critic(cfg, real, StreamingGenerator(SamplerGenerator(gaussian()), 1))
    assert res.trace.shape == (30,) and res.eval_trace.shape == (10,)
    assert res.estimate == pytest.approx(res.eval_trace.mean())


def test_grid_orderings_directions():
    rows = []
    for seed in range(3):
        for i, eps in enumerate([0.0, 0.5, 1.0]):
            rows.append((eps, 100, "streaming", seed, 1.0 - 0.3 * i + 0.01 * seed))
            rows.append((eps, 100, "fixed", seed, 0.2 + 0.3 * i))
            rows.append((eps, 10, "fixed", seed, [0.5, 0.2, 0.7][i]))
    summary, orders = grid_orderings(rows)
    by = {(o[0], o[1]): o for o in orders}
    assert by[("streaming", 100)][4] == "decreasing" and by[("streaming", 100)][2] < -0.9
    assert by[("fixed", 100)][4] == "increasing" and by[("fixed", 100)][3]
    assert by[("fixed", 10)][4] == "mixed" and not by[("fixed", 10)][3]
    assert len(summary) == 9 and all(r[5] == 3 for r in summary)
