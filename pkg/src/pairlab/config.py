"""Experiment configuration: one canonical JSON document per run.

Defaults encode the desk-scale reference experiment (32x32 images, 60 angles,
47 detectors, 10% noise, 2000/100 train/test, 25%-of-angles masks, 10 LSI
iterations). Values can be replaced by a config file and further overridden
with dotted --key=value flags; the resolved document round-trips losslessly
through its file form and is hashed into every output file's provenance line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace

from .lbfgs import LbfgsConfig
from .pair_net import PairSpec, TrainConfig


@dataclass(frozen=True)
class GeometrySection:
    grid_side: int = 32
    angle_count: int = 60
    detector_count: int = 47
    detector_spacing: float = 1.0


@dataclass(frozen=True)
class DataSection:
    train_count: int = 2000
    test_count: int = 100
    ood_count: int = 100
    noise_fraction: float = 0.1
    seed: int = 101
    make_ood: bool = True


@dataclass(frozen=True)
class MaskSection:
    fraction: float = 0.25
    seed: int = 7
    alternate_seed: int = 8


@dataclass(frozen=True)
class ModelSection:
    latent_x: int = 64
    latent_y: int = 64
    hidden_x: tuple = (128, 64)
    hidden_y: tuple = (256, 128)
    activation: str = "tanh"
    init_seed: int = 3


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 5
    loss_weights: tuple = (1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class LsiSection:
    max_iterations: int = 10
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    gradient_tolerance: float = 1e-8
    max_line_search: int = 25
    latent_penalty: float = 0.0


@dataclass(frozen=True)
class MlsiSection:
    max_iterations: int = 100
    ensemble: int = 3
    seed: int = 11
    perturbation: float = 0.1


@dataclass(frozen=True)
class SweepSection:
    fractions: tuple = (0.0, 0.3, 0.6, 0.9)
    mask_kind: str = "random-entries"
    sample_count: int = 32
    lsi_iterations: int = 25
    mlsi_ensemble: int = 2


@dataclass(frozen=True)
class TikhonovSection:
    lambdas: tuple = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class CertifySection:
    calibration_count: int = 50
    pair_count: int = 200
    seed: int = 17
    mask_kind: str = "random-columns"
    linear_latent: int = 48


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: GeometrySection = field(default_factory=GeometrySection)
    data: DataSection = field(default_factory=DataSection)
    masks: MaskSection = field(default_factory=MaskSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    lsi: LsiSection = field(default_factory=LsiSection)
    mlsi: MlsiSection = field(default_factory=MlsiSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    tikhonov: TikhonovSection = field(default_factory=TikhonovSection)
    certify: CertifySection = field(default_factory=CertifySection)
    output_dir: str = "runs/desk"

    # -- derived objects the modules consume --------------------------------
    def pair_spec(self, n: int, q: int) -> PairSpec:
        return PairSpec.default(
            n,
            q,
            latent_x=self.model.latent_x,
            latent_y=self.model.latent_y,
            hidden_x=self.model.hidden_x,
            hidden_y=self.model.hidden_y,
            activation=self.model.activation,
        )

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            epochs=t.epochs,
            batch_size=t.batch_size,
            learning_rate=t.learning_rate,
            beta1=t.beta1,
            beta2=t.beta2,
            epsilon=t.epsilon,
            seed=t.seed,
            loss_weights=tuple(t.loss_weights),
        )

    def lsi_config(self, max_iterations: int | None = None) -> LbfgsConfig:
        s = self.lsi
        return LbfgsConfig(
            memory=s.memory,
            max_iterations=s.max_iterations if max_iterations is None else max_iterations,
            c1=s.c1,
            c2=s.c2,
            gradient_tolerance=s.gradient_tolerance,
            max_line_search=s.max_line_search,
        )

    def observation_shape(self) -> tuple:
        return (self.geometry.detector_count, self.geometry.angle_count)

    def to_dict(self) -> dict:
        return _tuples_to_lists(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()[:12]


def _tuples_to_lists(obj):
    if isinstance(obj, dict):
        return {k: _tuples_to_lists(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tuples_to_lists(v) for v in obj]
    return obj


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, path="")


def _build(cls, data: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"unknown config key(s) {sorted(unknown)} under '{path or 'root'}'")
    base = cls()
    kwargs = {}
    for name, value in data.items():
        current = getattr(base, name)
        if is_dataclass(current) and isinstance(value, dict):
            kwargs[name] = _build(type(current), value, f"{path}{name}.")
        elif isinstance(current, tuple):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = type(current)(value) if current is not None else value
    return replace(base, **kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def apply_overrides(config: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply dotted-path overrides like train.epochs=5; values parse as JSON
    with a plain-string fallback."""
    data = config.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ValueError(f"unknown config path {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ValueError(f"unknown config path {key!r}")
        node[parts[-1]] = value
    return config_from_dict(data)
