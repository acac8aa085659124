import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genmeter.errors import InputError
from genmeter.generators import (LinearGenerator, NoisyMemorizer, SigmoidStepGenerator, constant_generator,
                                 identity_generator)
from genmeter.mdl import (comp, f_gen, mean_speed_variance, pairwise_path_length, path_length,
                          path_statistics, s_max, sample_path, speed_variance)


def sigmoid_speed_oracle(anchor_gap, k, n=2_000_001):
    """Exact speed profile of the sigmoid map along z = -1 + 2t (dz/dt = 2)."""
    z = np.linspace(-1.0, 1.0, n)
    sig = 0.5 * (1 + np.tanh(0.5 * k * z))
    return anchor_gap * k * sig * (1 - sig) * 2.0


def test_identity_unit_path():
    p = sample_path(identity_generator(2), [0.0, 0.0], [1.0, 0.0], 64)
    assert np.allclose(p.speeds, 1.0)
    assert path_length(p) == pytest.approx(1.0)
    assert s_max(p) == pytest.approx(path_length(p))
    assert p.t_grid[0] == 0 and p.t_grid[-1] == 1 and len(p.points) == 65


def test_path_endpoints_are_generator_outputs():
    gen = SigmoidStepGenerator([0.0, 1.0], [2.0, 3.0], 5.0)
    p = sample_path(gen, [-0.3], [0.8], 16)
    assert np.array_equal(p.points[0], gen.map([[-0.3]])[0])
    assert np.array_equal(p.points[-1], gen.map([[0.8]])[0])


def test_linear_path_speed_and_length():
    A = np.array([[1.0, 2.0], [-1.0, 0.5], [0.0, 3.0]])
    gen = LinearGenerator(A)
    z0, z1 = np.array([0.2, -0.4]), np.array([-0.9, 0.7])
    p = sample_path(gen, z0, z1, 100)
    expect = np.linalg.norm(A @ (z1 - z0))
    assert np.max(np.abs(p.speeds - expect)) < 1e-9
    assert path_length(p) == pytest.approx(expect, abs=1e-9)
    assert speed_variance(gen, z0, z1, 100) < 1e-12


def test_sample_path_errors():
    with pytest.raises(InputError):
        sample_path(identity_generator(2), [0.0], [1.0], 8)
    with pytest.raises(InputError):
        sample_path(identity_generator(1), [0.0], [1.0], 1)


def test_sigmoid_speed_peaks_at_midpoint_and_matches_analytic_max():
    gen = SigmoidStepGenerator([0.0, 0.0], [3.0, 4.0], sharpness=50.0)
    p = sample_path(gen, [-1.0], [1.0], 1024)
    mid = np.argmax(p.speeds)
    assert abs(mid - 511.5) <= 1
    assert s_max(p) == pytest.approx(5.0 * 50.0 / 4 * 2, rel=0.01)


def test_sigmoid_speed_variance_matches_analytic_profile():
    gen = SigmoidStepGenerator([0.0, 0.0], [3.0, 4.0], sharpness=50.0)
    exact = sigmoid_speed_oracle(5.0, 50.0)
    v = speed_variance(gen, [-1.0], [1.0], 1024)
    assert v == pytest.approx(exact.var(), rel=0.01)
    lin = speed_variance(gen.matched_linear(), [-1.0], [1.0], 1024)
    assert v > 1e3 * max(lin, 1e-12)
    assert speed_variance(gen, [1.0], [-1.0], 1024) == pytest.approx(v, rel=1e-12)


def test_sigmoid_and_linear_lengths_agree_but_smax_separates():
    sig = SigmoidStepGenerator([1.0], [4.0], sharpness=50.0)
    lin = sig.matched_linear()
    ps, pl = sample_path(sig, [-1.0], [1.0], 1024), sample_path(lin, [-1.0], [1.0], 1024)
    assert path_length(ps) == pytest.approx(path_length(pl), rel=0.02)
    assert s_max(ps) > 5 * s_max(pl)


@pytest.mark.parametrize("gen", [identity_generator(1), SigmoidStepGenerator([0.0], [1.0], 8.0),
                                 LinearGenerator([[2.0], [1.0]])])
def test_refinement_consistency(gen):
    a = path_length(sample_path(gen, [-1.0], [1.0], 512))
    b = path_length(sample_path(gen, [-1.0], [1.0], 1024))
    assert abs(a - b) / b < 0.01


def test_identity_comp_and_length_are_two_thirds():
    gen = identity_generator(1)
    c = comp(gen, 4000, 16, seed=0)
    L = pairwise_path_length(gen, 4000, 16, seed=0)
    assert abs(c.value - 2 / 3) < 3 * c.standard_error
    assert abs(L.value - 2 / 3) < 3 * L.standard_error
    assert c.value == pytest.approx(L.value, rel=1e-12)  # constant speed: max = mean on every path
    assert c.n_pairs == 4000 and c.T == 16 and c.standard_error > 0


def test_comp_scale_equivariance():
    base = comp(identity_generator(2), 300, 32, seed=5).value
    scaled = comp(LinearGenerator(3.0 * np.eye(2)), 300, 32, seed=5).value
    assert scaled == pytest.approx(3.0 * base, rel=1e-12)


def test_sigmoid_comp_exceeds_matched_linear():
    sig = SigmoidStepGenerator([0.0, 0.0], [3.0, 4.0], sharpness=50.0)
    a = path_statistics(sig, 200, 256, seed=1).s_max
    b = path_statistics(sig.matched_linear(), 200, 256, seed=1).s_max
    assert a.mean() > b.mean()
    assert comp(sig, 200, 256, 1).value > comp(sig.matched_linear(), 200, 256, 1).value


def test_clean_memorizer_comp_above_linear_reference():
    D = np.array([[0.0, 0.0], [1.0, 1.0], [3.0, -1.0]])
    mem = NoisyMemorizer(D, 0.0)
    lin = LinearGenerator(np.array([[1.5, 0.0, 0.0], [0.0, 0.0, 0.0]]), prior="uniform")
    assert comp(mem, 300, 128, 0).value > comp(lin, 300, 128, 0).value


def test_constant_generator_has_zero_length_and_comp():
    g = constant_generator([1.0, 2.0])
    assert pairwise_path_length(g, 50, 16).value == 0.0
    assert comp(g, 50, 16).value == 0.0


def test_comp_is_deterministic_and_seed_dependent():
    g = SigmoidStepGenerator([0.0], [1.0], 10.0)
    assert comp(g, 100, 32, 3).value == comp(g, 100, 32, 3).value
    assert comp(g, 100, 32, 3).value != comp(g, 100, 32, 4).value


def test_chunked_statistics_match_single_paths():
    g = SigmoidStepGenerator([0.0, 1.0], [1.0, -2.0], 20.0)
    stats = path_statistics(g, 7, 32, seed=2, chunk_rows=40)
    full = path_statistics(g, 7, 32, seed=2)
    assert np.allclose(stats.s_max, full.s_max, rtol=1e-12)
    assert mean_speed_variance(g, 7, 32, 2) == pytest.approx(np.mean(full.speed_var))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), k=st.floats(0.5, 80.0))
def test_comp_dominates_pairwise_length(seed, k):
    g = SigmoidStepGenerator([0.0, 0.0], [1.0, 2.0], k)
    stats = path_statistics(g, 20, 64, seed=seed)
    assert np.all(stats.s_max >= stats.length - 1e-12) and np.all(stats.length >= 0)
    assert comp(g, 20, 64, seed).value >= pairwise_path_length(g, 20, 64, seed).value - 1e-12


def test_f_gen_cases():
    assert f_gen(0.0, 1.7, 3.0) == 1.7
    assert f_gen(2.0, 0.0, 0.5) == 1.0
    for alpha in (0.1, 1.0, 10.0):
        assert (f_gen(0.4, 1.0, alpha) < f_gen(0.4, 2.0, alpha))
    with pytest.raises(InputError):
        f_gen(1.0, 1.0, 0.0)
    with pytest.raises(InputError):
        f_gen(float("nan"), 1.0)
