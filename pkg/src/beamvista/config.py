"""TOML configuration: shipped defaults overlaid by an optional user file."""

import dataclasses
from dataclasses import dataclass
from importlib import resources

try:
    import tomllib
except ImportError:
    import tomli as tomllib

import numpy as np

from .errors import ConfigError
from .dataset import LinkConfig
from .nn.train import TrainConfig
from .render import default_cameras
from .scene import PropagationConfig, WorldConfig
from .wireless import OfdmConfig, TxConfig


@dataclass(frozen=True)
class WirelessSection:
    num_antennas: int
    num_subcarriers: int
    cyclic_prefix: int
    num_beams: int
    symbol_power: float
    noise_variance: float
    gain_ref: float
    reflection_coeff: float
    tap_length_m: float


@dataclass(frozen=True)
class WorldSection:
    num_cars: int
    num_buses: int
    num_trucks: int
    num_buildings: int
    street_x: tuple
    street_y: tuple
    bs_spacing: float
    bs_side_offset: float
    bs_height: float
    seed: int


@dataclass(frozen=True)
class TrajectoriesSection:
    count: int
    total_samples: int
    y_min: float
    y_max: float
    seed: int


@dataclass(frozen=True)
class RenderSection:
    width: int
    height: int
    fov_deg: float
    marker_min_px: float


@dataclass(frozen=True)
class DatasetSection:
    seed: int
    split_ratio: float
    split_seed: int
    per_trajectory_split: bool


@dataclass(frozen=True)
class TrainSection:
    epochs: int
    batch_size: int
    learning_rate: float
    weight_decay: float
    decay_epochs: tuple
    decay_factor: float
    dtype: str
    seed: int


@dataclass(frozen=True)
class PruneSection:
    ratio: float
    finetune_epochs: int
    finetune_lr: float


@dataclass(frozen=True)
class EvalSection:
    topk: tuple
    num_ranges: int
    fractions: tuple
    locality_window: int


@dataclass(frozen=True)
class BenchSection:
    batch_sizes: tuple
    trials: int


@dataclass(frozen=True)
class AppConfig:
    wireless: WirelessSection
    world: WorldSection
    trajectories: TrajectoriesSection
    render: RenderSection
    dataset: DatasetSection
    train: TrainSection
    prune: PruneSection
    eval: EvalSection
    bench: BenchSection


_SECTIONS = {
    "wireless": WirelessSection,
    "world": WorldSection,
    "trajectories": TrajectoriesSection,
    "render": RenderSection,
    "dataset": DatasetSection,
    "train": TrainSection,
    "prune": PruneSection,
    "eval": EvalSection,
    "bench": BenchSection,
}


def _merge(base, overlay):
    out = dict(base)
    for k, v in overlay.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _coerce(cls, name, value):
    ftype = {f.name: f.type for f in dataclasses.fields(cls)}[name]
    if ftype in (float, "float") and isinstance(value, int) \
            and not isinstance(value, bool):
        return float(value)
    if ftype in (tuple, "tuple"):
        if not isinstance(value, list):
            raise ConfigError(f"{name} must be an array, got {value!r}")
        return tuple(value)
    return value


def _build_section(name, data):
    cls = _SECTIONS[name]
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - fields)
    if unknown:
        raise ConfigError(f"[{name}] has unknown keys {unknown}")
    missing = sorted(fields - set(data))
    if missing:
        raise ConfigError(f"[{name}] is missing keys {missing}")
    return cls(**{k: _coerce(cls, k, v) for k, v in data.items()})


def _parse_toml_bytes(raw, source):
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"{source}: {e}") from e


def load_config(path=None):
    """Shipped defaults, optionally overlaid by the TOML file at `path`."""
    raw = resources.files(__package__).joinpath("default.toml").read_bytes()
    data = _parse_toml_bytes(raw, "default.toml")
    if path is not None:
        with open(path, "rb") as f:
            overlay = _parse_toml_bytes(f.read(), path)
        unknown = sorted(set(overlay) - set(_SECTIONS))
        if unknown:
            raise ConfigError(f"{path}: unknown sections {unknown}")
        data = _merge(data, overlay)
    return AppConfig(**{name: _build_section(name, data[name])
                        for name in _SECTIONS})


def make_world_config(cfg):
    w = cfg.world
    return WorldConfig(
        street_x_range=w.street_x,
        street_y_range=w.street_y,
        num_cars=w.num_cars,
        num_buses=w.num_buses,
        num_trucks=w.num_trucks,
        num_buildings=w.num_buildings,
        bs_spacing=w.bs_spacing,
        bs_side_offset=w.bs_side_offset,
        bs_height=w.bs_height,
        num_antennas=cfg.wireless.num_antennas,
    )


def make_link(cfg):
    w = cfg.wireless
    return LinkConfig(
        ofdm=OfdmConfig(num_subcarriers=w.num_subcarriers,
                        cyclic_prefix=w.cyclic_prefix),
        tx=TxConfig(symbol_power=w.symbol_power,
                    noise_variance=w.noise_variance),
        prop=PropagationConfig(gain_ref=w.gain_ref,
                               reflection_coeff=w.reflection_coeff,
                               tap_length_m=w.tap_length_m,
                               max_delay_taps=w.cyclic_prefix),
        num_beams=w.num_beams,
    )


def make_cameras(cfg):
    r = cfg.render
    return default_cameras(r.width, r.height, r.fov_deg)


def make_train_config(cfg, seed=None):
    t = cfg.train
    return TrainConfig(
        epochs=t.epochs,
        batch_size=t.batch_size,
        learning_rate=t.learning_rate,
        weight_decay=t.weight_decay,
        decay_epochs=tuple(t.decay_epochs),
        decay_factor=t.decay_factor,
        seed=t.seed if seed is None else int(seed),
    )


def train_dtype(cfg):
    name = cfg.train.dtype
    if name not in ("float32", "float64"):
        raise ConfigError(f"train dtype must be float32 or float64, got {name!r}")
    return np.dtype(name)
