"""Dense feed-forward networks with hand-written reverse-mode gradients.

Networks are small MLPs stored as lists of float64 numpy arrays.  Batches are
row-major ``(n, width)`` arrays.  Besides the usual forward/backward pass this
module differentiates *through* the input-gradient computation, which is what
the gradient penalties (zero-centred, one-centred, R1) need for their
parameter gradients.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, InputError
from .rng import as_generator

ACTIVATION_CODES = {"identity": 0, "relu": 1, "leaky_relu": 2, "tanh": 3, "sigmoid": 4}
_CODE_NAMES = {v: k for k, v in ACTIVATION_CODES.items()}
CHECKPOINT_MAGIC = b"GMTR1"
GP_MODES = ("one_centered_gp", "zero_centered_gp", "r1")


@dataclass(frozen=True)
class Activation:
    kind: str = "identity"
    slope: float = 0.2  # only used by leaky_relu

    def __post_init__(self):
        if self.kind not in ACTIVATION_CODES:
            raise ConfigError(f"unknown activation {self.kind!r}")

    def value(self, a):
        k = self.kind
        if k == "identity":
            return a
        if k == "relu":
            return np.maximum(a, 0.0)
        if k == "leaky_relu":
            return np.where(a > 0, a, self.slope * a)
        if k == "tanh":
            return np.tanh(a)
        return 0.5 * (1.0 + np.tanh(0.5 * a))  # overflow-free sigmoid

    def d1(self, a, h):
        """First derivative, given pre-activation ``a`` and output ``h``."""
        k = self.kind
        if k == "identity":
            return np.ones_like(a)
        if k == "relu":
            return (a > 0).astype(a.dtype)
        if k == "leaky_relu":
            return np.where(a > 0, 1.0, self.slope)
        if k == "tanh":
            return 1.0 - h * h
        return h * (1.0 - h)

    def d2(self, a, h):
        k = self.kind
        if k == "tanh":
            return -2.0 * h * (1.0 - h * h)
        if k == "sigmoid":
            return h * (1.0 - h) * (1.0 - 2.0 * h)
        return np.zeros_like(a)  # piecewise linear


@dataclass
class MlpNetwork:
    """An MLP; ``weights[l]`` has shape ``(widths[l+1], widths[l])``."""

    layer_widths: list
    weights: list
    biases: list
    activations: list

    def __post_init__(self):
        n = len(self.layer_widths) - 1
        if n < 1 or not (len(self.weights) == len(self.biases) == len(self.activations) == n):
            raise ConfigError("layer lists do not match layer_widths")
        for l in range(n):
            shape = (self.layer_widths[l + 1], self.layer_widths[l])
            if self.weights[l].shape != shape or self.biases[l].shape != (shape[0],):
                raise ConfigError(f"layer {l} has shape {self.weights[l].shape}, expected {shape}")

    @property
    def input_width(self) -> int:
        return self.layer_widths[0]

    @property
    def output_width(self) -> int:
        return self.layer_widths[-1]

    def parameters(self) -> list:
        """Parameters in canonical order ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_parameters(self, params) -> "MlpNetwork":
        return MlpNetwork(list(self.layer_widths), list(params[0::2]), list(params[1::2]),
                          list(self.activations))

    def copy(self) -> "MlpNetwork":
        return self.with_parameters([p.copy() for p in self.parameters()])

    def __call__(self, batch):
        return forward(self, batch)


def init_mlp(layer_widths, hidden="relu", output="identity", seed=0, slope=0.2) -> MlpNetwork:
    """Glorot-uniform weights, zero biases."""
    rng = as_generator(seed)
    widths = [int(w) for w in layer_widths]
    if len(widths) < 2 or min(widths) < 1:
        raise ConfigError(f"invalid layer widths {widths}")
    weights, biases, acts = [], [], []
    for l in range(len(widths) - 1):
        fan_in, fan_out = widths[l], widths[l + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
        kind = output if l == len(widths) - 2 else hidden
        acts.append(Activation(kind, slope))
    return MlpNetwork(widths, weights, biases, acts)


def _check_batch(net, batch):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.input_width:
        raise ConfigError(f"batch shape {batch.shape} does not match input width {net.input_width}")
    return batch


def _forward_cache(net, x):
    pre, post = [], [x]
    h = x
    for w, b, act in zip(net.weights, net.biases, net.activations):
        a = h @ w.T + b
        h = act.value(a)
        pre.append(a)
        post.append(h)
    return pre, post


def forward(net: MlpNetwork, batch) -> np.ndarray:
    x = _check_batch(net, batch)
    return _forward_cache(net, x)[1][-1]


@dataclass
class Gradients:
    weights: list
    biases: list
    inputs: np.ndarray | None = None

    def parameters(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def scaled(self, c) -> "Gradients":
        return Gradients([c * w for w in self.weights], [c * b for b in self.biases],
                         None if self.inputs is None else c * self.inputs)

    def __add__(self, other: "Gradients") -> "Gradients":
        inputs = None
        if self.inputs is not None and other.inputs is not None:
            inputs = self.inputs + other.inputs
        return Gradients([a + b for a, b in zip(self.weights, other.weights)],
                         [a + b for a, b in zip(self.biases, other.biases)], inputs)


def zero_gradients(net: MlpNetwork) -> Gradients:
    return Gradients([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])


def _backward_cached(net, pre, post, output_grad):
    n_layers = len(net.weights)
    gw, gb = [None] * n_layers, [None] * n_layers
    delta = output_grad
    for l in reversed(range(n_layers)):
        da = delta * net.activations[l].d1(pre[l], post[l + 1])
        gw[l] = da.T @ post[l]
        gb[l] = da.sum(axis=0)
        delta = da @ net.weights[l]
    return Gradients(gw, gb, delta)


def backward(net: MlpNetwork, batch, output_grad) -> Gradients:
    """Gradients of ``sum(output * output_grad)`` w.r.t. parameters and inputs."""
    x = _check_batch(net, batch)
    output_grad = np.asarray(output_grad, dtype=np.float64)
    if output_grad.shape != (x.shape[0], net.output_width):
        raise ConfigError(f"output_grad shape {output_grad.shape} does not match "
                          f"({x.shape[0]}, {net.output_width})")
    pre, post = _forward_cache(net, x)
    return _backward_cached(net, pre, post, output_grad)


def input_gradient(net: MlpNetwork, batch) -> np.ndarray:
    """Per-row gradient of a scalar-output network w.r.t. its input."""
    x = _check_batch(net, batch)
    if net.output_width != 1:
        raise ConfigError("input_gradient needs a scalar-output network")
    return backward(net, x, np.ones((x.shape[0], 1))).inputs


def _norm_penalty(net, x, centre):
    """``mean((|grad_x f| - centre)^2)`` over rows, and its parameter gradients.

    Runs the forward pass, the input-gradient (backward) pass, then reverse-mode
    through both of them.
    """
    n = x.shape[0]
    pre, post = _forward_cache(net, x)
    n_layers = len(net.weights)
    d1 = [net.activations[l].d1(pre[l], post[l + 1]) for l in range(n_layers)]

    # input-gradient chain: e[l] = d f / d h[l], u[l] = d f / d a[l]
    e = [None] * (n_layers + 1)
    u = [None] * n_layers
    e[n_layers] = np.ones((n, 1))
    for l in reversed(range(n_layers)):
        u[l] = e[l + 1] * d1[l]
        e[l] = u[l] @ net.weights[l]
    g = e[0]
    r = np.sqrt(np.sum(g * g, axis=1))
    value = float(np.mean((r - centre) ** 2))

    if centre == 0.0:
        coef = np.full(n, 2.0 / n)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(r > 0, 2.0 * (r - centre) / (r * n), 0.0)
    e_bar = coef[:, None] * g

    gw = [np.zeros_like(w) for w in net.weights]
    gb = [np.zeros_like(b) for b in net.biases]
    a_bar = [None] * n_layers
    for l in range(n_layers):
        # e[l] = u[l] @ W[l]
        gw[l] += u[l].T @ e_bar
        u_bar = e_bar @ net.weights[l].T
        # u[l] = e[l+1] * act'(a[l])
        e_bar = u_bar * d1[l]
        a_bar[l] = u_bar * e[l + 1] * net.activations[l].d2(pre[l], post[l + 1])

    h_bar = None
    for l in reversed(range(n_layers)):
        da = a_bar[l] if h_bar is None else a_bar[l] + h_bar * d1[l]
        gw[l] += da.T @ post[l]
        gb[l] += da.sum(axis=0)
        h_bar = da @ net.weights[l]
    return value, Gradients(gw, gb)


def gradient_penalty(net: MlpNetwork, real_batch, fake_batch, mode: str, seed=0):
    """Gradient penalty of a scalar critic and its parameter gradients.

    ``one_centered_gp`` and ``zero_centered_gp`` are evaluated at points drawn
    uniformly on the segments between paired real/fake rows; ``r1`` at the real
    rows only.
    """
    if mode not in GP_MODES:
        raise ConfigError(f"unknown gradient penalty mode {mode!r}")
    if net.output_width != 1:
        raise ConfigError("gradient penalty needs a scalar-output critic")
    real = _check_batch(net, real_batch)
    if len(real) == 0:
        raise InputError("empty batch")
    if mode == "r1":
        return _norm_penalty(net, real, 0.0)
    fake = _check_batch(net, fake_batch)
    n = min(len(real), len(fake))
    if n == 0:
        raise InputError("empty batch")
    t = as_generator(seed).uniform(size=(n, 1))
    xhat = t * real[:n] + (1.0 - t) * fake[:n]
    return _norm_penalty(net, xhat, 1.0 if mode == "one_centered_gp" else 0.0)


@dataclass
class AdamState:
    first_moment: list
    second_moment: list
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    @classmethod
    def fresh(cls, params, lr=1e-4, beta1=0.9, beta2=0.999, eps_adam=1e-8) -> "AdamState":
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                   0, lr, beta1, beta2, eps_adam)


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ConfigError("parameter, gradient and moment lists differ in length")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ConfigError(f"shape mismatch {p.shape} vs {g.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps_adam))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t, state.lr, b1, b2, state.eps_adam)


@dataclass
class Optimizer:
    """Adam bound to a network; convenience for training loops."""

    net: MlpNetwork
    state: AdamState = field(default=None)

    def __post_init__(self):
        if self.state is None:
            self.state = AdamState.fresh(self.net.parameters())

    def step(self, grads: Gradients):
        params, self.state = adam_step(self.state, self.net.parameters(), grads.parameters())
        self.net = self.net.with_parameters(params)
        return self.net


# checkpoint container: magic, uint32 layer count, uint32 widths,
# per layer (uint8 activation code, float64 slope), then W/b as <f8 in layer order

def checkpoint_bytes(net: MlpNetwork) -> bytes:
    n = len(net.weights)
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", n), struct.pack(f"<{n + 1}I", *net.layer_widths)]
    for act in net.activations:
        parts.append(struct.pack("<Bd", ACTIVATION_CODES[act.kind], act.slope))
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def network_from_bytes(data: bytes) -> MlpNetwork:
    if data[:5] != CHECKPOINT_MAGIC:
        raise DataFormatError("not a GMTR1 network checkpoint")
    try:
        pos = 5
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        widths = list(struct.unpack_from(f"<{n + 1}I", data, pos))
        pos += 4 * (n + 1)
        acts = []
        for _ in range(n):
            code, slope = struct.unpack_from("<Bd", data, pos)
            pos += struct.calcsize("<Bd")
            acts.append(Activation(_CODE_NAMES[code], slope))
        weights, biases = [], []
        for l in range(n):
            rows, cols = widths[l + 1], widths[l]
            w = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=pos).reshape(rows, cols)
            pos += 8 * rows * cols
            b = np.frombuffer(data, dtype="<f8", count=rows, offset=pos)
            pos += 8 * rows
            weights.append(w.astype(np.float64))
            biases.append(b.astype(np.float64))
    except (struct.error, ValueError, KeyError) as exc:
        raise DataFormatError(f"truncated or corrupt checkpoint: {exc}") from exc
    if pos != len(data):
        raise DataFormatError("trailing bytes after checkpoint payload")
    return MlpNetwork(widths, weights, biases, acts)


def save_network(net: MlpNetwork, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(net))


def load_network(path) -> MlpNetwork:
    return network_from_bytes(Path(path).read_bytes())
