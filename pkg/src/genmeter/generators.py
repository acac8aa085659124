"""Generator models: latent prior plus a deterministic map into data space."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .diffnet import MlpNetwork, forward, load_network, save_network
from .errors import ConfigError, InputError
from .rng import as_generator

PRIORS = ("uniform", "standard_gaussian")
NOISE_KINDS = ("uniform", "standard_gaussian")


@dataclass(frozen=True)
class LatentSpec:
    dim: int = 1
    prior: str = "uniform"  # uniform(-1, 1)^dim or N(0, I)

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("latent dimension must be >= 1")
        if self.prior not in PRIORS:
            raise ConfigError(f"unknown prior {self.prior!r}")

    def sample(self, n, seed) -> np.ndarray:
        rng = as_generator(seed)
        if self.prior == "uniform":
            return rng.uniform(-1.0, 1.0, size=(n, self.dim))
        return rng.standard_normal(size=(n, self.dim))


class GeneratorModel:
    """Base class. Subclasses implement ``map`` and set ``latent``."""

    latent: LatentSpec
    data_dim: int

    def map(self, z) -> np.ndarray:
        raise NotImplementedError

    def sample_latent(self, n, seed) -> np.ndarray:
        return self.latent.sample(n, seed)

    def sample(self, n, seed) -> np.ndarray:
        if n < 1:
            raise InputError("n must be >= 1")
        return self.map(self.sample_latent(n, seed))

    def _latent_batch(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            z = z[None, :]
        if z.shape[1] != self.latent.dim:
            raise InputError(f"latent batch has width {z.shape[1]}, expected {self.latent.dim}")
        return z


class NoisyMemorizer(GeneratorModel):
    """Outputs a uniformly chosen memorized point plus ``epsilon``-scaled noise.

    The latent vector is ``(c, u)``: a selector coordinate ``c`` in [-1, 1) that
    picks the row of ``memorized``, followed by the ``d``-dimensional noise
    vector ``u``.  Setting ``clip`` limits outputs to the box of the memorized
    data; it is off by default.
    """

    def __init__(self, memorized, epsilon=0.0, noise_kind="uniform", clip=False, source=None):
        memorized = np.asarray(memorized, dtype=np.float64)
        if memorized.ndim != 2 or len(memorized) == 0:
            raise InputError("memorizer needs a non-empty 2-D dataset")
        if epsilon < 0:
            raise InputError("epsilon must be >= 0")
        if noise_kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {noise_kind!r}")
        self.memorized = memorized
        self.epsilon = float(epsilon)
        self.noise_kind = noise_kind
        self.clip = clip
        self.source = source
        self.data_dim = memorized.shape[1]
        self.latent = LatentSpec(1 + self.data_dim, "uniform")

    def sample_latent(self, n, seed):
        rng = as_generator(seed)
        sel = rng.uniform(-1.0, 1.0, size=(n, 1))
        if self.noise_kind == "uniform":
            u = rng.uniform(-1.0, 1.0, size=(n, self.data_dim))
        else:
            u = rng.standard_normal(size=(n, self.data_dim))
        return np.hstack([sel, u])

    def map(self, z):
        z = self._latent_batch(z)
        m = len(self.memorized)
        idx = np.clip(np.floor((z[:, 0] + 1.0) * 0.5 * m).astype(np.int64), 0, m - 1)
        x = self.memorized[idx] + self.epsilon * z[:, 1:]
        if self.clip:
            x = np.clip(x, self.memorized.min(axis=0), self.memorized.max(axis=0))
        return x

    def to_dict(self) -> dict:
        return {"kind": "noisy_memorizer", "dataset": self.source, "epsilon": self.epsilon,
                "noise_kind": self.noise_kind, "clip": self.clip}


def memorizer_sample(gen: NoisyMemorizer, n: int, seed):
    return Dataset(gen.sample(n, seed))


class LinearGenerator(GeneratorModel):
    """``x = A z + b``."""

    def __init__(self, A, b=None, prior="uniform"):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        self.A = A
        self.b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
        self.data_dim = A.shape[0]
        self.latent = LatentSpec(A.shape[1], prior)

    def map(self, z):
        return self._latent_batch(z) @ self.A.T + self.b


def identity_generator(dim=1, prior="uniform") -> LinearGenerator:
    return LinearGenerator(np.eye(dim), prior=prior)


def constant_generator(point, latent_dim=1, prior="uniform") -> LinearGenerator:
    """Total mode collapse: every latent maps to ``point``."""
    point = np.atleast_1d(np.asarray(point, dtype=np.float64))
    return LinearGenerator(np.zeros((len(point), latent_dim)), point, prior)


class SigmoidStepGenerator(GeneratorModel):
    """Analytic stand-in for a generator that memorizes two points.

    ``x = x0 + (x1 - x0) * sigmoid(sharpness * z)`` on a 1-D latent: outputs
    cluster at the two anchors and the interpolation speed spikes at z = 0.
    """

    def __init__(self, x0, x1, sharpness=50.0, prior="uniform"):
        self.x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
        self.x1 = np.atleast_1d(np.asarray(x1, dtype=np.float64))
        if self.x0.shape != self.x1.shape:
            raise InputError("anchors differ in dimension")
        self.sharpness = float(sharpness)
        self.data_dim = len(self.x0)
        self.latent = LatentSpec(1, prior)

    def map(self, z):
        z = self._latent_batch(z)
        s = 0.5 * (1.0 + np.tanh(0.5 * self.sharpness * z))
        return self.x0 + (self.x1 - self.x0) * s

    def matched_linear(self, z0=-1.0, z1=1.0) -> LinearGenerator:
        """Linear generator through ``G(z0)`` and ``G(z1)`` of this one."""
        a, b = self.map([[z0]])[0], self.map([[z1]])[0]
        slope = (b - a) / (z1 - z0)
        return LinearGenerator(slope[:, None], a - slope * z0, self.latent.prior)


def sigmoid_step_map(gen: SigmoidStepGenerator, z) -> np.ndarray:
    return gen.map(z)


class MlpGenerator(GeneratorModel):
    def __init__(self, net: MlpNetwork, latent: LatentSpec):
        if net.input_width != latent.dim:
            raise ConfigError("network input width differs from latent dimension")
        self.net = net
        self.latent = latent
        self.data_dim = net.output_width

    def map(self, z):
        return forward(self.net, self._latent_batch(z))

    def save(self, path) -> None:
        path = Path(path)
        save_network(self.net, path)
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps({"kind": "mlp", "latent_dim": self.latent.dim, "prior": self.latent.prior}))

    @classmethod
    def load(cls, path) -> "MlpGenerator":
        path = Path(path)
        meta_path = path.with_suffix(path.suffix + ".json")
        net = load_network(path)
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            latent = LatentSpec(meta["latent_dim"], meta["prior"])
        else:
            latent = LatentSpec(net.input_width, "uniform")
        return cls(net, latent)


def interpolate_latent(z0, z1, t):
    """Constant-speed line ``(1 - t) z0 + t z1``; ``t`` may be a scalar or 1-D grid."""
    z0 = np.asarray(z0, dtype=np.float64)
    z1 = np.asarray(z1, dtype=np.float64)
    if z0.shape != z1.shape:
        raise InputError("latent endpoints differ in dimension")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > 1) or not np.all(np.isfinite(t_arr)):
        raise InputError("t must lie in [0, 1]")
    if t_arr.ndim == 0:
        return (1.0 - t_arr) * z0 + t_arr * z1
    return (1.0 - t_arr)[:, None] * z0 + t_arr[:, None] * z1
