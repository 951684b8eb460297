"""Minimal dense-network toolkit: forward, exact backward, plain SGD.

Networks are plain values (lists of weight/bias layers with elementwise
activations). A forward pass returns the output together with a tape of
cached activations; backward consumes the tape and produces parameter
gradients plus the gradient w.r.t. the input, which is what lets callers
chain networks (backprop through a sequence of transitions).
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ContractViolation, NumericError, ShapeError

CHECKPOINT_VERSION = 1


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# name -> (f(z), f'(z) given z and f(z))
ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "identity": (lambda z: z, lambda z, y: np.ones_like(z)),
    "sigmoid": (_sigmoid, lambda z, y: y * (1.0 - y)),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, y: (z > 0).astype(np.float64)),
    "tanh": (np.tanh, lambda z, y: 1.0 - y * y),
}


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("layer expects a 2-d weight matrix and 1-d bias")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} != output dim {self.weights.shape[0]}"
            )


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("network needs at least one layer")
        for k in range(1, len(self.layers)):
            need = self.layers[k].weights.shape[1]
            have = self.layers[k - 1].weights.shape[0]
            if need != have:
                raise ShapeError(
                    f"layer {k} expects input dim {need}, previous layer emits {have}"
                )
        for layer in self.layers:
            if not (np.isfinite(layer.weights).all() and np.isfinite(layer.bias).all()):
                raise NumericError("network parameters must be finite")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[0]


@dataclass
class Tape:
    """Cached activations from one forward pass, tied to its exact network."""

    net: Network
    inputs: list[np.ndarray]  # input to each layer (post-activation of previous)
    preacts: list[np.ndarray]
    outputs: list[np.ndarray]


@dataclass
class Gradient:
    """Per-parameter partials, shape-congruent with the network, plus the
    gradient w.r.t. the forward input for chaining."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_grad: np.ndarray

    def scaled(self, factor: float) -> "Gradient":
        return Gradient(
            [w * factor for w in self.weights],
            [b * factor for b in self.biases],
            self.input_grad * factor,
        )

    def add_(self, other: "Gradient") -> None:
        for w, ow in zip(self.weights, other.weights):
            w += ow
        for b, ob in zip(self.biases, other.biases):
            b += ob


def zero_gradient(net: Network) -> Gradient:
    return Gradient(
        [np.zeros_like(l.weights) for l in net.layers],
        [np.zeros_like(l.bias) for l in net.layers],
        np.zeros(net.input_dim),
    )


def init_network(
    dims: Sequence[int], activations: Sequence[str] | str, seed: int
) -> Network:
    """Build a network with the given layer sizes.

    dims = [in, hidden..., out]; weights are uniform in +/-sqrt(6/(fan_in +
    fan_out)), biases zero. A single activation name applies to every layer.
    """
    if len(dims) < 2:
        raise ShapeError("need at least an input and an output dimension")
    n_layers = len(dims) - 1
    if isinstance(activations, str):
        activations = [activations] * n_layers
    if len(activations) != n_layers:
        raise ShapeError(f"expected {n_layers} activations, got {len(activations)}")
    rng = np.random.default_rng(seed)
    layers = []
    for k in range(n_layers):
        fan_in, fan_out = dims[k], dims[k + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out), activations[k]))
    return Network(tuple(layers))


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise ShapeError(f"input has shape {x.shape}, network expects ({net.input_dim},)")
    if not np.isfinite(x).all():
        raise NumericError("non-finite network input")
    tape = Tape(net, [], [], [])
    a = x
    for layer in net.layers:
        z = layer.weights @ a + layer.bias
        y = ACTIVATIONS[layer.activation][0](z)
        tape.inputs.append(a)
        tape.preacts.append(z)
        tape.outputs.append(y)
        a = y
    return a, tape


def backward(net: Network, tape: Tape, dL_dy: np.ndarray) -> Gradient:
    """Exact reverse pass; requires the tape produced by forward(net, .)."""
    if tape.net is not net:
        raise ContractViolation("tape does not belong to this network")
    delta = np.asarray(dL_dy, dtype=np.float64)
    if delta.shape != (net.output_dim,):
        raise ShapeError(
            f"dL_dy has shape {delta.shape}, network emits ({net.output_dim},)"
        )
    grads_w: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        dact = ACTIVATIONS[layer.activation][1](tape.preacts[k], tape.outputs[k])
        delta = delta * dact
        grads_w[k] = np.outer(delta, tape.inputs[k])
        grads_b[k] = delta.copy()
        delta = layer.weights.T @ delta
    return Gradient(grads_w, grads_b, delta)


def sgd_step(net: Network, grad: Gradient, lr: float) -> Network:
    """p <- p - lr * g for every parameter; rejects non-finite gradients."""
    if len(grad.weights) != len(net.layers):
        raise ShapeError("gradient layer count does not match network")
    new_layers = []
    for layer, gw, gb in zip(net.layers, grad.weights, grad.biases):
        if gw.shape != layer.weights.shape or gb.shape != layer.bias.shape:
            raise ShapeError("gradient shape does not match layer")
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise NumericError("non-finite gradient; step rejected")
        new_layers.append(
            Layer(layer.weights - lr * gw, layer.bias - lr * gb, layer.activation)
        )
    return Network(tuple(new_layers))


def relative_error_loss(pred: float, truth: float, floor: float = 1.0) -> tuple[float, float]:
    """L1 relative error with a clamped denominator.

    loss = |pred - truth| / max(truth, floor); the derivative w.r.t. pred is
    the sign over the same denominator, 0 exactly at pred == truth.
    """
    if floor <= 0:
        raise ConfigError(f"floor must be positive, got {floor}")
    denom = max(truth, floor)
    diff = pred - truth
    if diff == 0:
        return 0.0, 0.0
    return abs(diff) / denom, (1.0 if diff > 0 else -1.0) / denom


# ---------------------------------------------------------------------------
# Checkpointing: several named networks per file, bit-exact round trips.

def save_networks(path: str | Path, nets: dict[str, Network], meta: dict | None = None) -> None:
    arrays: dict[str, np.ndarray] = {}
    manifest: dict = {"version": CHECKPOINT_VERSION, "networks": {}, "meta": meta or {}}
    for name, net in nets.items():
        manifest["networks"][name] = [l.activation for l in net.layers]
        for k, layer in enumerate(net.layers):
            arrays[f"{name}__w{k}"] = layer.weights
            arrays[f"{name}__b{k}"] = layer.bias
    arrays["__manifest__"] = np.frombuffer(
        json.dumps(manifest, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    # npz layout written by hand: zipfile stamps entries with wall-clock time
    # at 2 s resolution, which would break byte-identical reruns.
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            blob = io.BytesIO()
            np.lib.format.write_array(blob, np.ascontiguousarray(arrays[name]))
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, blob.getvalue())
    Path(path).write_bytes(buf.getvalue())


def load_networks(path: str | Path) -> tuple[dict[str, Network], dict]:
    with np.load(path, allow_pickle=False) as blob:
        manifest = json.loads(bytes(blob["__manifest__"]).decode("utf-8"))
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(
                f"checkpoint version {manifest.get('version')} unsupported "
                f"(expected {CHECKPOINT_VERSION})"
            )
        nets: dict[str, Network] = {}
        for name, activations in manifest["networks"].items():
            layers = [
                Layer(blob[f"{name}__w{k}"], blob[f"{name}__b{k}"], act)
                for k, act in enumerate(activations)
            ]
            nets[name] = Network(tuple(layers))
    return nets, manifest["meta"]
