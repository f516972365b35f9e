"""Synthetic downtown street world and drone flight geometry.

A world holds two roadside basestations and a population of moving vehicles
and static buildings on a street strip along the x axis. Drones fly linear
constant-height trajectories above the street. Propagation between a
basestation and the drone is a dominant line-of-sight ray plus a single
ground-bounce ray.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError
from .wireless import PropagationPath, UlaConfig

OBJECT_KINDS = ("car", "bus", "truck", "building", "basestation_marker")

# reserved for basestation markers, never assigned to distractors
MARKER_COLOR = (1.0, 0.0, 1.0)

DRONE_HEIGHT = 50.0
TRAJECTORY_Y_RANGE = (-5.625, 1.875)


@dataclass(frozen=True)
class Basestation:
    id: int
    position: tuple
    ula: UlaConfig

    @property
    def position_vector(self):
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class SceneObject:
    """Axis-aligned box with a class color and per-step velocity."""

    kind: str
    box_min: tuple
    box_max: tuple
    velocity: tuple = (0.0, 0.0, 0.0)
    color: tuple = (0.5, 0.5, 0.5)

    def __post_init__(self):
        if self.kind not in OBJECT_KINDS:
            raise ValueError(f"unknown object kind {self.kind!r}")
        lo = np.asarray(self.box_min, float)
        hi = np.asarray(self.box_max, float)
        if np.any(hi <= lo):
            raise ValueError("box must have positive extents")
        if self.kind == "building" and any(v != 0 for v in self.velocity):
            raise ValueError("buildings must be static")
        if not all(0.0 <= c <= 1.0 for c in self.color):
            raise ValueError("color components must lie in [0, 1]")


@dataclass(frozen=True)
class World:
    street_x_range: tuple
    street_y_range: tuple
    basestations: tuple
    objects: tuple
    seed: int

    def __post_init__(self):
        if not self.basestations:
            raise ConfigError("world needs at least one basestation")
        ids = [bs.id for bs in self.basestations]
        if len(set(ids)) != len(ids):
            raise ConfigError("basestation ids must be distinct")


@dataclass(frozen=True)
class Trajectory:
    """Linear constant-height flight along +/-x at a fixed lateral offset."""

    id: int
    start: tuple
    end: tuple
    num_steps: int
    direction: int  # +1 for +x travel, -1 for -x

    def __post_init__(self):
        s = np.asarray(self.start, float)
        e = np.asarray(self.end, float)
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if s[2] != DRONE_HEIGHT or e[2] != DRONE_HEIGHT:
            raise ValueError(f"flight height is fixed at {DRONE_HEIGHT} m")
        if s[1] != e[1]:
            raise ValueError("motion must be purely along x")
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")


@dataclass(frozen=True)
class WorldConfig:
    street_x_range: tuple = (-100.0, 300.0)
    street_y_range: tuple = (-16.0, 16.0)
    num_cars: int = 14
    num_buses: int = 4
    num_trucks: int = 6
    num_buildings: int = 10
    bs_spacing: float = 100.0
    bs_side_offset: float = 8.0
    bs_height: float = 6.0
    num_antennas: int = 64

    def __post_init__(self):
        for rng in (self.street_x_range, self.street_y_range):
            if len(rng) != 2 or not rng[0] < rng[1]:
                raise ConfigError(f"malformed bounds {rng}")
        for n in (self.num_cars, self.num_buses, self.num_trucks, self.num_buildings):
            if n < 0:
                raise ConfigError("object counts must be non-negative")


@dataclass(frozen=True)
class PropagationConfig:
    """Line-of-sight + ground-bounce ray synthesis parameters.

    gain_ref is the free-space amplitude at 1 m (amplitude g0/d); the default
    keeps the best-beam receive SNR above 0 dB at the far end of the street
    with the default tx settings. Delays are quantized to tap_length_m meters
    of excess path and clamped to max_delay_taps.
    """

    gain_ref: float = 10.0
    reflection_coeff: float = 0.3
    tap_length_m: float = 2.0
    max_delay_taps: int = 8

    def __post_init__(self):
        if self.gain_ref <= 0 or self.tap_length_m <= 0:
            raise ConfigError("gain_ref and tap_length_m must be positive")
        if not 0.0 <= self.reflection_coeff <= 1.0:
            raise ConfigError("reflection_coeff must lie in [0, 1]")
        if self.max_delay_taps < 0:
            raise ConfigError("max_delay_taps must be non-negative")


# lane layout: (y center, direction sign); vehicles drive both ways
_LANES = ((-6.0, 1.0), (-2.0, 1.0), (2.0, -1.0), (6.0, -1.0))

_VEHICLE_SPECS = {
    # kind: (length, width, height, speed range m/step)
    "car": ((3.8, 5.0), (1.7, 2.0), (1.4, 1.6), (0.4, 1.2)),
    "bus": ((10.0, 13.0), (2.4, 2.6), (2.9, 3.3), (0.3, 0.8)),
    "truck": ((7.0, 9.5), (2.3, 2.6), (2.7, 3.5), (0.3, 0.9)),
}

_VEHICLE_PALETTES = {
    "car": [(0.75, 0.75, 0.78), (0.2, 0.25, 0.6), (0.65, 0.15, 0.15),
            (0.15, 0.15, 0.18), (0.85, 0.85, 0.85), (0.2, 0.45, 0.25)],
    "bus": [(0.8, 0.55, 0.1), (0.15, 0.4, 0.65), (0.7, 0.7, 0.2)],
    "truck": [(0.45, 0.45, 0.5), (0.3, 0.5, 0.55), (0.55, 0.35, 0.2)],
}


def _sample_vehicle(kind, rng, cfg):
    length_r, width_r, height_r, speed_r = _VEHICLE_SPECS[kind]
    L = rng.uniform(*length_r)
    Wd = rng.uniform(*width_r)
    Hgt = rng.uniform(*height_r)
    lane_y, direction = _LANES[rng.integers(len(_LANES))]
    x0, x1 = cfg.street_x_range
    cx = rng.uniform(x0 + L, x1 - L)
    speed = direction * rng.uniform(*speed_r)
    palette = _VEHICLE_PALETTES[kind]
    base = np.asarray(palette[rng.integers(len(palette))])
    color = np.clip(base + rng.uniform(-0.05, 0.05, 3), 0.0, 1.0)
    return SceneObject(
        kind=kind,
        box_min=(cx - L / 2, lane_y - Wd / 2, 0.0),
        box_max=(cx + L / 2, lane_y + Wd / 2, Hgt),
        velocity=(speed, 0.0, 0.0),
        color=tuple(color),
    )


def _sample_building(rng, cfg):
    x0, x1 = cfg.street_x_range
    y0, y1 = cfg.street_y_range
    L = rng.uniform(12.0, 30.0)
    depth = rng.uniform(3.0, 5.0)
    height = rng.uniform(8.0, 25.0)
    cx = rng.uniform(x0 + L, x1 - L)
    side = 1.0 if rng.random() < 0.5 else -1.0
    edge = y1 - depth - 0.5 if side > 0 else y0 + 0.5
    g = rng.uniform(0.35, 0.6)
    color = (g, g * rng.uniform(0.9, 1.0), g * rng.uniform(0.85, 1.0))
    return SceneObject(
        kind="building",
        box_min=(cx - L / 2, edge, 0.0),
        box_max=(cx + L / 2, edge + depth, height),
        color=color,
    )


def generate_world(cfg, seed):
    """Seeded world: two roadside basestations plus vehicles and buildings."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    xc = 0.5 * (cfg.street_x_range[0] + cfg.street_x_range[1])
    ula = UlaConfig(num_antennas=cfg.num_antennas)
    basestations = (
        Basestation(id=1, position=(xc - cfg.bs_spacing / 2, -cfg.bs_side_offset,
                                    cfg.bs_height), ula=ula),
        Basestation(id=2, position=(xc + cfg.bs_spacing / 2, cfg.bs_side_offset,
                                    cfg.bs_height), ula=ula),
    )
    objects = []
    for kind, count in (("car", cfg.num_cars), ("bus", cfg.num_buses),
                        ("truck", cfg.num_trucks)):
        objects.extend(_sample_vehicle(kind, rng, cfg) for _ in range(count))
    objects.extend(_sample_building(rng, cfg) for _ in range(cfg.num_buildings))
    return World(
        street_x_range=tuple(cfg.street_x_range),
        street_y_range=tuple(cfg.street_y_range),
        basestations=basestations,
        objects=tuple(objects),
        seed=seed,
    )


def generate_trajectories(n, steps_per_trajectory=None, seed=0, total_samples=None,
                          x_range=(-100.0, 300.0), y_range=TRAJECTORY_Y_RANGE):
    """n linear flights across the street, alternating headings.

    Either give a uniform steps_per_trajectory or a total_samples budget;
    the budget is distributed as evenly as integers allow (the first
    total % n trajectories get one extra step).
    """
    if n < 1:
        raise ValueError("need at least one trajectory")
    if (steps_per_trajectory is None) == (total_samples is None):
        raise ValueError("give exactly one of steps_per_trajectory / total_samples")
    if total_samples is not None:
        base, extra = divmod(total_samples, n)
        steps = [base + 1 if i < extra else base for i in range(n)]
        if base < 1:
            raise ValueError("total_samples too small for the trajectory count")
    else:
        if steps_per_trajectory < 1:
            raise ValueError("steps_per_trajectory must be >= 1")
        steps = [steps_per_trajectory] * n

    out = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7A41, i]))
        y = rng.uniform(*y_range)
        direction = 1 if rng.random() < 0.5 else -1
        xa, xb = (x_range[0], x_range[1]) if direction > 0 else (x_range[1], x_range[0])
        out.append(Trajectory(
            id=i,
            start=(xa, y, DRONE_HEIGHT),
            end=(xb, y, DRONE_HEIGHT),
            num_steps=steps[i],
            direction=direction,
        ))
    return out


def drone_state(traj, t):
    """Drone position at step t: linear interpolation start -> end."""
    if not 0 <= t < traj.num_steps:
        raise IndexError(f"step {t} outside [0, {traj.num_steps})")
    s = np.asarray(traj.start, float)
    e = np.asarray(traj.end, float)
    frac = 0.0 if traj.num_steps == 1 else t / (traj.num_steps - 1)
    return s + frac * (e - s)


@dataclass(frozen=True)
class PosedObject:
    kind: str
    box_min: np.ndarray
    box_max: np.ndarray
    color: tuple


def _marker_box(bs):
    p = bs.position_vector
    half = 1.0
    return (np.array([p[0] - half, p[1] - half, 0.0]),
            np.array([p[0] + half, p[1] + half, p[2] + 2.0]))


def world_at(world, t):
    """Object poses at step t: velocity * t translation, wrapped along x.

    Basestation marker boxes are appended last so the renderer can treat
    them like any other posed box.
    """
    if t < 0:
        raise ValueError("step index must be non-negative")
    x0, x1 = world.street_x_range
    span = x1 - x0
    posed = []
    for obj in world.objects:
        lo = np.asarray(obj.box_min, float)
        hi = np.asarray(obj.box_max, float)
        shift = t * np.asarray(obj.velocity, float)
        lo = lo + shift
        hi = hi + shift
        cx = 0.5 * (lo[0] + hi[0])
        wrapped = x0 + math.fmod(cx - x0, span)
        if wrapped < x0:
            wrapped += span
        dx = wrapped - cx
        lo[0] += dx
        hi[0] += dx
        posed.append(PosedObject(obj.kind, lo, hi, obj.color))
    for bs in world.basestations:
        lo, hi = _marker_box(bs)
        posed.append(PosedObject("basestation_marker", lo, hi, MARKER_COLOR))
    return posed


def paths_between(bs, drone_pos, prop, seed):
    """LOS ray plus one ground-bounce ray from basestation to drone.

    The bounce uses the image of the basestation mirrored through the ground
    plane; its delay is the excess path length quantized to taps and clamped
    to the configured maximum. Phases are uniform draws from the sample seed.
    """
    drone = np.asarray(drone_pos, float)
    p = bs.position_vector
    diff = drone - p
    d = float(np.linalg.norm(diff))
    if d < 1e-9:
        raise GeometryError("drone and basestation positions coincide")
    axis = bs.ula.axis_vector
    rng = np.random.default_rng(seed)
    phase_los, phase_bounce = rng.uniform(0.0, 2.0 * np.pi, 2)

    u_los = float(np.clip(diff @ axis / d, -1.0, 1.0))
    los = PropagationPath(
        gain=(prop.gain_ref / d) * np.exp(1j * phase_los),
        direction_cosine=u_los,
        delay=0,
    )

    mirror = p * np.array([1.0, 1.0, -1.0])
    bdiff = drone - mirror
    db = float(np.linalg.norm(bdiff))
    u_b = float(np.clip(bdiff @ axis / db, -1.0, 1.0))
    delay = min(int(round((db - d) / prop.tap_length_m)), prop.max_delay_taps)
    bounce = PropagationPath(
        gain=(prop.reflection_coeff * prop.gain_ref / db) * np.exp(1j * phase_bounce),
        direction_cosine=u_b,
        delay=delay,
    )
    return [los, bounce]
