"""Trainable nonlinear paired autoencoders: four dense networks joined by two
affine latent maps, the four-term training loss, exact reverse-mode gradients,
and Adam training.

All networks operate in normalized coordinates (global mean/std scaling per
space, copied from the training dataset); the composite roles `end_to_end` and
`surrogate_forward` de/normalize at their physical boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .dataset import Dataset, Normalization

MODEL_FORMAT_VERSION = 1

ROLES = (
    "encode_x",
    "decode_x",
    "encode_y",
    "decode_y",
    "map_fwd",
    "map_bwd",
    "end_to_end",
    "surrogate_forward",
)


class ModelFormatError(ValueError):
    """A model file is malformed, truncated, or of an unsupported version."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths input -> hidden... -> output; final layer is linear."""

    widths: tuple
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ValueError(f"invalid widths {self.widths}")
        if self.activation not in ("tanh", "elu"):
            raise ValueError(f"unsupported activation {self.activation!r}")


class Mlp:
    """Dense network; layers hold (weight (out, in), bias (out,)) pairs."""

    def __init__(self, spec: MlpSpec, layers):
        self.spec = spec
        self.layers = layers

    @classmethod
    def init(cls, spec: MlpSpec, rng: np.random.Generator) -> "Mlp":
        layers = []
        for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append(
                (rng.uniform(-bound, bound, size=(fan_out, fan_in)), np.zeros(fan_out))
            )
        return cls(spec, layers)

    def forward(self, tape: Tape, v):
        """Trace the network on `tape`; v is a Node."""
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            v = tape.affine(v, tape.leaf(w), tape.leaf(b))
            if i < last:
                v = tape.activation(v, self.spec.activation)
        return v

    def forward_params(self, tape: Tape, v, param_nodes):
        """As forward() but reusing already-created parameter leaf nodes."""
        last = len(self.layers) - 1
        for i, (w_node, b_node) in enumerate(param_nodes):
            v = tape.affine(v, w_node, b_node)
            if i < last:
                v = tape.activation(v, self.spec.activation)
        return v

    def __call__(self, v: np.ndarray) -> np.ndarray:
        act = np.tanh if self.spec.activation == "tanh" else _elu
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            v = v @ w.T + b
            if i < last:
                v = act(v)
        return v


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


@dataclass
class AffineMap:
    """Latent-to-latent map z -> weight @ z + offset."""

    weight: np.ndarray
    offset: np.ndarray

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return z @ self.weight.T + self.offset


@dataclass(frozen=True)
class PairSpec:
    """Architecture of the four networks plus the implied latent dimensions."""

    e_x: MlpSpec
    d_x: MlpSpec
    e_y: MlpSpec
    d_y: MlpSpec

    def __post_init__(self):
        lx, ly = self.latent_x, self.latent_y
        chain = (
            self.d_x.widths[0] == lx
            and self.d_y.widths[0] == ly
            and self.e_x.widths[0] == self.d_x.widths[-1]
            and self.e_y.widths[0] == self.d_y.widths[-1]
        )
        if not chain:
            raise ValueError("inconsistent encoder/decoder width chain")

    @property
    def latent_x(self) -> int:
        return self.e_x.widths[-1]

    @property
    def latent_y(self) -> int:
        return self.e_y.widths[-1]

    @classmethod
    def default(
        cls,
        n: int,
        q: int,
        latent_x: int = 64,
        latent_y: int = 64,
        hidden_x=(128, 64),
        hidden_y=(256, 128),
        activation: str = "tanh",
    ) -> "PairSpec":
        return cls(
            e_x=MlpSpec((n, *hidden_x, latent_x), activation),
            d_x=MlpSpec((latent_x, *reversed(hidden_x), n), activation),
            e_y=MlpSpec((q, *hidden_y, latent_y), activation),
            d_y=MlpSpec((latent_y, *reversed(hidden_y), q), activation),
        )


class PairModel:
    """Four dense networks + two affine latent maps + normalization statistics."""

    NETS = ("e_x", "d_x", "e_y", "d_y")
    MAPS = ("m_fwd", "m_bwd")

    def __init__(self, spec: PairSpec, nets: dict, maps: dict, normalization: Normalization):
        self.spec = spec
        self.e_x: Mlp = nets["e_x"]
        self.d_x: Mlp = nets["d_x"]
        self.e_y: Mlp = nets["e_y"]
        self.d_y: Mlp = nets["d_y"]
        self.m_fwd: AffineMap = maps["m_fwd"]
        self.m_bwd: AffineMap = maps["m_bwd"]
        self.normalization = normalization

    @property
    def latent_x(self) -> int:
        return self.spec.latent_x

    @property
    def latent_y(self) -> int:
        return self.spec.latent_y

    @property
    def n(self) -> int:
        return self.spec.e_x.widths[0]

    @property
    def q(self) -> int:
        return self.spec.e_y.widths[0]

    # -- parameter access ---------------------------------------------------
    def parameters(self):
        """Flat (name, array) list in a fixed order; arrays are the live ones."""
        out = []
        for net_name in self.NETS:
            net: Mlp = getattr(self, net_name)
            for i, (w, b) in enumerate(net.layers):
                out.append((f"{net_name}.{i}.weight", w))
                out.append((f"{net_name}.{i}.bias", b))
        for map_name in self.MAPS:
            amap: AffineMap = getattr(self, map_name)
            out.append((f"{map_name}.weight", amap.weight))
            out.append((f"{map_name}.offset", amap.offset))
        return out

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        parts = name.split(".")
        if parts[0] in self.NETS:
            net: Mlp = getattr(self, parts[0])
            idx = int(parts[1])
            w, b = net.layers[idx]
            net.layers[idx] = (value, b) if parts[2] == "weight" else (w, value)
        else:
            setattr(getattr(self, parts[0]), parts[1], value)

    def copy(self) -> "PairModel":
        nets = {
            name: Mlp(getattr(self, name).spec,
                      [(w.copy(), b.copy()) for w, b in getattr(self, name).layers])
            for name in self.NETS
        }
        maps = {
            name: AffineMap(getattr(self, name).weight.copy(), getattr(self, name).offset.copy())
            for name in self.MAPS
        }
        return PairModel(self.spec, nets, maps, self.normalization)

    # -- normalization ------------------------------------------------------
    def norm_x(self, x):
        return (np.asarray(x, dtype=float) - self.normalization.x_mean) / self.normalization.x_std

    def denorm_x(self, xn):
        return np.asarray(xn, dtype=float) * self.normalization.x_std + self.normalization.x_mean

    def norm_y(self, y):
        return (np.asarray(y, dtype=float) - self.normalization.y_mean) / self.normalization.y_std

    def denorm_y(self, yn):
        return np.asarray(yn, dtype=float) * self.normalization.y_std + self.normalization.y_mean

    # -- forward evaluation (normalized coordinates) -------------------------
    def encode_x(self, xn):
        return self.e_x(np.asarray(xn, dtype=float))

    def decode_x(self, z):
        return self.d_x(np.asarray(z, dtype=float))

    def encode_y(self, yn):
        return self.e_y(np.asarray(yn, dtype=float))

    def decode_y(self, z):
        return self.d_y(np.asarray(z, dtype=float))

    def map_fwd(self, z):
        return self.m_fwd(np.asarray(z, dtype=float))

    def map_bwd(self, z):
        return self.m_bwd(np.asarray(z, dtype=float))

    def apply(self, role: str, v: np.ndarray) -> np.ndarray:
        """Evaluate one role. Primitive roles take/return normalized
        coordinates; end_to_end and surrogate_forward take/return physical ones.
        """
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}; expected one of {ROLES}")
        v = np.asarray(v, dtype=float)
        expected = {
            "encode_x": self.n,
            "decode_x": self.latent_x,
            "encode_y": self.q,
            "decode_y": self.latent_y,
            "map_fwd": self.latent_x,
            "map_bwd": self.latent_y,
            "end_to_end": self.q,
            "surrogate_forward": self.n,
        }[role]
        if v.shape[-1] != expected:
            raise ValueError(f"role {role!r} expects length {expected}, got {v.shape[-1]}")
        if role == "end_to_end":
            return self.denorm_x(self.decode_x(self.map_bwd(self.encode_y(self.norm_y(v)))))
        if role == "surrogate_forward":
            return self.denorm_y(self.decode_y(self.map_fwd(self.encode_x(self.norm_x(v)))))
        return getattr(self, role)(v)


def init_model(
    spec: PairSpec, normalization: Normalization, seed: int
) -> PairModel:
    """Glorot-uniform weights, zero offsets; deterministic per seed."""
    rng = np.random.Generator(np.random.Philox(key=[seed % 2**64, 0]))
    nets = {name: Mlp.init(getattr(spec, name), rng) for name in PairModel.NETS}
    lx, ly = spec.latent_x, spec.latent_y
    bound_f = np.sqrt(6.0 / (lx + ly))
    maps = {
        "m_fwd": AffineMap(rng.uniform(-bound_f, bound_f, size=(ly, lx)), np.zeros(ly)),
        "m_bwd": AffineMap(rng.uniform(-bound_f, bound_f, size=(lx, ly)), np.zeros(lx)),
    }
    return PairModel(spec, nets, maps, normalization)


def zeroed_model(spec: PairSpec, normalization: Normalization) -> PairModel:
    """Test hook: all weights and offsets zero."""
    model = init_model(spec, normalization, seed=0)
    for _, arr in model.parameters():
        arr[...] = 0.0
    return model


# -- loss and gradient -------------------------------------------------------

def _trace_loss(model: PairModel, x_batch, y_batch, weights):
    """Record the four-term loss on a tape; returns (tape, root, param_nodes)."""
    tape = Tape()
    param_nodes = {}
    net_nodes = {}
    for net_name in PairModel.NETS:
        net: Mlp = getattr(model, net_name)
        nodes = []
        for i, (w, b) in enumerate(net.layers):
            wn, bn = tape.leaf(w), tape.leaf(b)
            param_nodes[f"{net_name}.{i}.weight"] = wn
            param_nodes[f"{net_name}.{i}.bias"] = bn
            nodes.append((wn, bn))
        net_nodes[net_name] = nodes
    map_nodes = {}
    for map_name in PairModel.MAPS:
        amap: AffineMap = getattr(model, map_name)
        wn, bn = tape.leaf(amap.weight), tape.leaf(amap.offset)
        param_nodes[f"{map_name}.weight"] = wn
        param_nodes[f"{map_name}.offset"] = bn
        map_nodes[map_name] = (wn, bn)

    x = tape.leaf(np.asarray(x_batch, dtype=float))
    y = tape.leaf(np.asarray(y_batch, dtype=float))
    zx = model.e_x.forward_params(tape, x, net_nodes["e_x"])
    zy = model.e_y.forward_params(tape, y, net_nodes["e_y"])
    ax = model.d_x.forward_params(tape, zx, net_nodes["d_x"])
    ay = model.d_y.forward_params(tape, zy, net_nodes["d_y"])
    x_from_y = model.d_x.forward_params(
        tape, tape.affine(zy, *map_nodes["m_bwd"]), net_nodes["d_x"]
    )
    y_from_x = model.d_y.forward_params(
        tape, tape.affine(zx, *map_nodes["m_fwd"]), net_nodes["d_y"]
    )
    terms = [
        tape.sq_norm(tape.add(ax, tape.scale(x, -1.0))),
        tape.sq_norm(tape.add(ay, tape.scale(y, -1.0))),
        tape.sq_norm(tape.add(x_from_y, tape.scale(x, -1.0))),
        tape.sq_norm(tape.add(y_from_x, tape.scale(y, -1.0))),
    ]
    root = tape.scale(terms[0], weights[0])
    for term, w in zip(terms[1:], weights[1:]):
        root = tape.add(root, tape.scale(term, w))
    return tape, root, param_nodes


def pair_loss(model: PairModel, x_batch, y_batch, weights=(1.0, 1.0, 1.0, 1.0)) -> float:
    """Sum over the batch of the four weighted squared-residual terms.

    Batches are in normalized coordinates.
    """
    if len(np.atleast_2d(x_batch)) == 0:
        raise ValueError("batch is empty")
    _, root, _ = _trace_loss(model, x_batch, y_batch, weights)
    return float(root.value)


def pair_loss_grad(model: PairModel, x_batch, y_batch, weights=(1.0, 1.0, 1.0, 1.0)):
    """Loss and its exact gradient for every parameter, keyed by parameter name."""
    tape, root, param_nodes = _trace_loss(model, x_batch, y_batch, weights)
    tape.backward(root)
    grads = {
        name: (node.grad if node.grad is not None else np.zeros_like(node.value))
        for name, node in param_nodes.items()
    }
    return float(root.value), grads


# -- training ----------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    loss_weights: tuple = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if any(w < 0 for w in self.loss_weights):
            raise ValueError("loss weights must be >= 0")


def train(model: PairModel, dataset: Dataset, config: TrainConfig):
    """Adam on the four-term loss; returns (trained copy, per-epoch mean loss).

    Pure in its inputs: the argument model is not mutated, shuffling is a fixed
    function of (seed, epoch), and the trace records the mean per-sample loss
    of each epoch.
    """
    model = model.copy()
    xn = model.norm_x(dataset.x)
    yn = model.norm_y(dataset.y)
    count = xn.shape[0]
    params = model.parameters()
    m_state = {name: np.zeros_like(arr) for name, arr in params}
    v_state = {name: np.zeros_like(arr) for name, arr in params}
    step = 0
    trace = []
    for epoch in range(config.epochs):
        perm = np.random.Generator(
            np.random.Philox(key=[config.seed % 2**64, epoch])
        ).permutation(count)
        epoch_loss = 0.0
        for lo in range(0, count, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            loss, grads = pair_loss_grad(model, xn[idx], yn[idx], config.loss_weights)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            epoch_loss += loss
            step += 1
            scale = 1.0 / len(idx)  # per-sample mean gradient
            for name, arr in params:
                g = grads[name] * scale
                m_state[name] = config.beta1 * m_state[name] + (1 - config.beta1) * g
                v_state[name] = config.beta2 * v_state[name] + (1 - config.beta2) * g * g
                m_hat = m_state[name] / (1 - config.beta1**step)
                v_hat = v_state[name] / (1 - config.beta2**step)
                arr -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
        trace.append(epoch_loss / count)
    return model, trace


# -- serialization -------------------------------------------------------------

def _encode_array(arr: np.ndarray) -> list:
    return [float.hex(float(v)) for v in np.asarray(arr, dtype=float).ravel()]

def _decode_array(values, shape) -> np.ndarray:
    return np.array([float.fromhex(v) for v in values]).reshape(shape)


def save_model(model: PairModel, path) -> None:
    """JSON model file; float64 values stored as lossless hex-float strings."""
    obj = {
        "format_version": MODEL_FORMAT_VERSION,
        "float_encoding": "hex",
        "normalization": model.normalization.to_dict(),
        "specs": {
            name: {
                "widths": list(getattr(model.spec, name).widths),
                "activation": getattr(model.spec, name).activation,
            }
            for name in PairModel.NETS
        },
        "parameters": {
            name: {"shape": list(arr.shape), "data": _encode_array(arr)}
            for name, arr in model.parameters()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_model(path) -> PairModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    version = obj.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported format_version {version!r} (expected {MODEL_FORMAT_VERSION})"
        )
    try:
        spec = PairSpec(
            **{
                name: MlpSpec(tuple(s["widths"]), s["activation"])
                for name, s in obj["specs"].items()
            }
        )
        normalization = Normalization.from_dict(obj["normalization"])
        model = init_model(spec, normalization, seed=0)
        for name, arr in model.parameters():
            entry = obj["parameters"][name]
            decoded = _decode_array(entry["data"], tuple(entry["shape"]))
            if decoded.shape != arr.shape:
                raise ModelFormatError(f"{path}: parameter {name} has shape {decoded.shape}")
            model.set_parameter(name, decoded)
    except ModelFormatError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"{path}: malformed model file: {exc}") from exc
    return model
