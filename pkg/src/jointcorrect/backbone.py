"""Fully-connected softmax classifier with hand-written backprop and Adam.

Hidden layers use tanh; the output layer is a softmax over C classes.
Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``x`` of
shape ``(B, d)`` maps through ``x @ W + b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, NumericError

# Single numeric-stability constant: probabilities are floored here before
# any logarithm.
PROB_FLOOR = 1e-12


@dataclass
class NetParams:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    def size(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "NetParams":
        return NetParams(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def arrays(self) -> list[np.ndarray]:
        """Flat view order used by the optimizer: w0, b0, w1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class ForwardCache:
    activations: list[np.ndarray]  # input plus every hidden activation
    preacts: list[np.ndarray]  # one per layer; the last entry is the logits
    probs: np.ndarray


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: NetParams, **kw) -> "AdamState":
        return cls(
            m=[np.zeros_like(a) for a in params.arrays()],
            v=[np.zeros_like(a) for a in params.arrays()],
            **kw,
        )


def _check_dims(layer_dims):
    dims = list(layer_dims) if layer_dims is not None else []
    if len(dims) < 2:
        raise ConfigError(f"layer_dims needs an input and an output width, got {dims}")
    for d in dims:
        if int(d) != d or d < 1:
            raise ConfigError(f"layer widths must be positive integers, got {dims}")
    return [int(d) for d in dims]


def init_params(layer_dims, seed) -> NetParams:
    """Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases."""
    dims = _check_dims(layer_dims)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetParams(dims, weights, biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: NetParams, features) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.layer_dims[0]:
        raise DimensionError(
            f"features of shape {x.shape} do not match input width {params.layer_dims[0]}"
        )
    activations = [x]
    preacts = []
    a = x
    last = params.num_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        preacts.append(z)
        if i < last:
            a = np.tanh(z)
            activations.append(a)
    probs = np.maximum(softmax(preacts[-1]), PROB_FLOOR)
    return probs, ForwardCache(activations, preacts, probs)


def predict(params: NetParams, features) -> np.ndarray:
    probs, _ = forward(params, features)
    return probs.argmax(axis=1)


def backprop(params: NetParams, cache: ForwardCache, dloss_dlogits) -> NetParams:
    """Gradients of a scalar loss given its gradient w.r.t. the logits.

    Returned as a ``NetParams`` so it lines up with the parameters it
    differentiates. The loss is a sum over the batch rows; any averaging
    must already be folded into ``dloss_dlogits``.
    """
    g = np.asarray(dloss_dlogits, dtype=np.float64)
    logits = cache.preacts[-1]
    if g.shape != logits.shape:
        raise DimensionError(f"logit gradient shape {g.shape} != logits shape {logits.shape}")
    if len(cache.preacts) != params.num_layers:
        raise DimensionError("cache was produced by a network with a different depth")

    gw = [None] * params.num_layers
    gb = [None] * params.num_layers
    for i in range(params.num_layers - 1, -1, -1):
        a_in = cache.activations[i]
        gw[i] = a_in.T @ g
        gb[i] = g.sum(axis=0)
        if i > 0:
            # tanh'(z) = 1 - tanh(z)^2, and activations[i] is tanh(preacts[i-1])
            g = (g @ params.weights[i].T) * (1.0 - a_in * a_in)
    return NetParams(list(params.layer_dims), gw, gb)


def adam_step(params: NetParams, grads: NetParams, state: AdamState, lr: float):
    """One Adam update. Returns new ``(params, state)``; inputs are not mutated."""
    if lr < 0:
        raise ConfigError(f"learning rate must be non-negative, got {lr}")
    p_arrays = params.arrays()
    g_arrays = grads.arrays()
    if len(p_arrays) != len(g_arrays) or len(p_arrays) != len(state.m):
        raise DimensionError("gradient / optimizer state layout does not match parameters")
    for j, (p, g) in enumerate(zip(p_arrays, g_arrays)):
        if p.shape != g.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            layer = j // 2
            raise NumericError(f"non-finite gradient in layer {layer}", layer=layer)

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)

    out = NetParams(list(params.layer_dims), new_p[0::2], new_p[1::2])
    new_state = AdamState(new_m, new_v, step, b1, b2, state.eps)
    return out, new_state
