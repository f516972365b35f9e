"""Co-existing camera/beam sample generation and the on-disk container.

Each sample pairs a rendered camera frame with the index of the best
codebook beam for the serving basestation at that drone position. Samples
are written to a single binary file with the layout

    magic "VWDR" | u16 version | u16 flags | 8 reserved bytes
    u32 manifest length | manifest JSON (sorted keys)
    fixed-size sample records
    sha256 of everything above

so any byte flip anywhere in the file is detectable on load.
"""

import hashlib
import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, CorruptionError, DataError, FormatError,
                     VisibilityError)
from .fileio import atomic_write_bytes, canonical_json
from .render import render_frame, select_camera
from .scene import drone_state, paths_between, world_at
from .wireless import (build_codebook, channel_from_paths, optimal_beam,
                       steering_vector)

MAGIC = b"VWDR"
VERSION = 1
_HEADER = struct.Struct("<4sHH8x")
_U32 = struct.Struct("<I")
_DIGEST_SIZE = 32

SCENARIOS = ("bs1", "bs2", "combined")


@dataclass(frozen=True)
class LinkConfig:
    """Everything the label derivation needs besides geometry."""

    ofdm: object
    tx: object
    prop: object
    num_beams: int

    def __post_init__(self):
        if self.num_beams < 1:
            raise ConfigError("num_beams must be >= 1")
        if self.prop.max_delay_taps > self.ofdm.cyclic_prefix:
            raise ConfigError("max_delay_taps exceeds the cyclic prefix")


def record_dtype(height, width, channels):
    return np.dtype([
        ("img", "u1", (height * width * channels,)),
        ("label", "<u2"),
        ("bs", "<u2"),
        ("tid", "<u2"),
        ("step", "<u4"),
        ("pos", "<f8", (3,)),
        ("u", "<f8"),
    ])


class Dataset:
    """In-memory sample arrays plus the manifest that describes them."""

    def __init__(self, pixels, labels, bs_ids, traj_ids, steps, positions,
                 los_u, manifest):
        self.pixels = pixels
        self.labels = labels
        self.bs_ids = bs_ids
        self.traj_ids = traj_ids
        self.steps = steps
        self.positions = positions
        self.los_u = los_u
        self.manifest = manifest
        n = len(pixels)
        for arr in (labels, bs_ids, traj_ids, steps, positions, los_u):
            if len(arr) != n:
                raise DataError("sample arrays disagree in length")

    def __len__(self):
        return len(self.pixels)

    @property
    def image_shape(self):
        return self.pixels.shape[1:]

    def image(self, i):
        """Dequantized float frame in [0, 1]."""
        return self.pixels[i].astype(np.float64) / 255.0

    def images(self, indices):
        """Dequantized float batch (N, H, W, C)."""
        return self.pixels[indices].astype(np.float64) / 255.0

    def to_records(self):
        h, w, c = self.image_shape
        rec = np.zeros(len(self), dtype=record_dtype(h, w, c))
        rec["img"] = self.pixels.reshape(len(self), -1)
        rec["label"] = self.labels
        rec["bs"] = self.bs_ids
        rec["tid"] = self.traj_ids
        rec["step"] = self.steps
        rec["pos"] = self.positions
        rec["u"] = self.los_u
        return rec

    def content_hash(self):
        return hashlib.sha256(self.to_records().tobytes()).hexdigest()

    def save(self, path):
        rec_bytes = self.to_records().tobytes()
        manifest = dict(self.manifest)
        manifest["content_hash"] = hashlib.sha256(rec_bytes).hexdigest()
        manifest["num_samples"] = len(self)
        mbytes = canonical_json(manifest)
        body = (_HEADER.pack(MAGIC, VERSION, 0) + _U32.pack(len(mbytes))
                + mbytes + rec_bytes)
        atomic_write_bytes(path, body + hashlib.sha256(body).digest())
        self.manifest = manifest

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            blob = f.read()
        if len(blob) < _HEADER.size + _U32.size + _DIGEST_SIZE:
            raise FormatError(f"{path}: too short to be a dataset file")
        magic, version, _flags = _HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        body, digest = blob[:-_DIGEST_SIZE], blob[-_DIGEST_SIZE:]
        if hashlib.sha256(body).digest() != digest:
            raise CorruptionError(f"{path}: file hash mismatch")
        (mlen,) = _U32.unpack_from(body, _HEADER.size)
        mstart = _HEADER.size + _U32.size
        if mstart + mlen > len(body):
            raise CorruptionError(f"{path}: manifest extends past end of file")
        try:
            manifest = json.loads(body[mstart:mstart + mlen])
        except json.JSONDecodeError as e:
            raise CorruptionError(f"{path}: manifest is not valid JSON") from e
        h, w, c = manifest["height"], manifest["width"], manifest["channels"]
        n = manifest["num_samples"]
        dtype = record_dtype(h, w, c)
        rec_bytes = body[mstart + mlen:]
        if len(rec_bytes) != n * dtype.itemsize:
            raise CorruptionError(f"{path}: record section length mismatch")
        if hashlib.sha256(rec_bytes).hexdigest() != manifest["content_hash"]:
            raise CorruptionError(f"{path}: record hash mismatch")
        rec = np.frombuffer(rec_bytes, dtype=dtype).copy()
        return cls(
            pixels=rec["img"].reshape(n, h, w, c),
            labels=rec["label"].copy(),
            bs_ids=rec["bs"].copy(),
            traj_ids=rec["tid"].copy(),
            steps=rec["step"].copy(),
            positions=rec["pos"].copy(),
            los_u=rec["u"].copy(),
            manifest=manifest,
        )


def _los_beam_score(bs, pos, codebook, prop):
    """Noiseless best-beam receive power over the line-of-sight ray only.

    Phase cancels in the magnitude, so this is deterministic and usable for
    association before any per-sample randomness is drawn.
    """
    diff = np.asarray(pos, float) - bs.position_vector
    d = float(np.linalg.norm(diff))
    u = float(np.clip(diff @ bs.ula.axis_vector / d, -1.0, 1.0))
    v = steering_vector(u, bs.ula)
    return (prop.gain_ref / d) ** 2 * float(np.max(np.abs(codebook.beams @ v) ** 2))


def serving_basestation(world, pos, link, codebooks):
    """Basestation with the stronger beamformed line-of-sight power.

    Ties go to the lower id.
    """
    best = None
    best_score = -1.0
    for bs in sorted(world.basestations, key=lambda b: b.id):
        score = _los_beam_score(bs, pos, codebooks[bs.id], link.prop)
        if score > best_score:
            best, best_score = bs, score
    return best


def sample_seed(root_seed, traj_id, step, bs_id):
    return np.random.SeedSequence([int(root_seed), int(traj_id), int(step),
                                   int(bs_id)])


def derive_label(bs, pos, link, codebook, seed):
    """Optimal beam index and line-of-sight direction cosine for one sample."""
    paths = paths_between(bs, pos, link.prop, seed)
    channel = channel_from_paths(paths, bs.ula, link.ofdm)
    label, _gain = optimal_beam(channel, codebook, link.tx)
    return label, paths[0].direction_cosine


def build_dataset(world, trajectories, link, cameras, seed, marker_min_px=3.0):
    """Render and label every trajectory step against the serving basestation.

    Steps where no camera sees the serving mast are discarded and counted in
    the manifest.
    """
    dims = {(c.width, c.height) for c in cameras}
    if len(dims) != 1:
        raise ConfigError("all cameras must share one frame size")
    width, height = dims.pop()

    codebooks = {bs.id: build_codebook(bs.ula, link.num_beams)
                 for bs in world.basestations}
    posed_cache = {}
    pixels, labels, bs_ids, traj_ids, steps_out, positions, los_u = \
        [], [], [], [], [], [], []
    discarded = 0

    for traj in trajectories:
        for t in range(traj.num_steps):
            pos = drone_state(traj, t)
            bs = serving_basestation(world, pos, link, codebooks)
            try:
                cam = select_camera(pos, bs, cameras)
            except VisibilityError:
                discarded += 1
                continue
            sseed = sample_seed(seed, traj.id, t, bs.id)
            label, u = derive_label(bs, pos, link, codebooks[bs.id], sseed)
            if t not in posed_cache:
                posed_cache[t] = world_at(world, t)
            frame = render_frame(posed_cache[t], pos, cam, marker_min_px)
            pixels.append(np.rint(frame * 255.0).astype(np.uint8))
            labels.append(label)
            bs_ids.append(bs.id)
            traj_ids.append(traj.id)
            steps_out.append(t)
            positions.append(pos)
            los_u.append(u)

    if not pixels:
        raise DataError("every step was discarded; nothing to build")

    manifest = {
        "format": "VWDR",
        "version": VERSION,
        "height": int(height),
        "width": int(width),
        "channels": 3,
        "num_beams": int(link.num_beams),
        "num_samples": len(pixels),
        "num_discarded": int(discarded),
        "seed": int(seed),
        "world_seed": int(world.seed),
        "num_trajectories": len(trajectories),
        "marker_min_px": float(marker_min_px),
        "basestations": {str(bs.id): [float(v) for v in bs.position]
                         for bs in world.basestations},
        "content_hash": "",
    }
    ds = Dataset(
        pixels=np.stack(pixels),
        labels=np.asarray(labels, np.uint16),
        bs_ids=np.asarray(bs_ids, np.uint16),
        traj_ids=np.asarray(traj_ids, np.uint16),
        steps=np.asarray(steps_out, np.uint32),
        positions=np.asarray(positions, np.float64),
        los_u=np.asarray(los_u, np.float64),
        manifest=manifest,
    )
    ds.manifest["content_hash"] = ds.content_hash()
    return ds


def audit_labels(ds, world, link):
    """Recompute every stored label from stored geometry; return mismatches."""
    codebooks = {bs.id: build_codebook(bs.ula, link.num_beams)
                 for bs in world.basestations}
    by_id = {bs.id: bs for bs in world.basestations}
    root = ds.manifest["seed"]
    bad = 0
    for i in range(len(ds)):
        bs = by_id[int(ds.bs_ids[i])]
        sseed = sample_seed(root, ds.traj_ids[i], ds.steps[i], ds.bs_ids[i])
        label, _u = derive_label(bs, ds.positions[i], link, codebooks[bs.id],
                                 sseed)
        if label != int(ds.labels[i]):
            bad += 1
    return bad


def split_dataset(dataset_or_size, ratio=0.7, seed=0):
    """Seeded shuffle split into (train_idx, val_idx), both sorted.

    The train side takes ceil(ratio * n) samples.
    """
    n = dataset_or_size if isinstance(dataset_or_size, int) \
        else len(dataset_or_size)
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    if n < 2:
        raise DataError("need at least two samples to split")
    n_train = math.ceil(ratio * n)
    perm = np.random.default_rng(
        np.random.SeedSequence([int(seed), 0x5B117])).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_by_trajectory(ds, ratio=0.7, seed=0):
    """Split on whole trajectories so no flight spans both sides."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    ids = np.unique(ds.traj_ids)
    if len(ids) < 2:
        raise DataError("need at least two trajectories to split this way")
    perm = np.random.default_rng(
        np.random.SeedSequence([int(seed), 0x7B117])).permutation(len(ids))
    target = math.ceil(ratio * len(ds))
    train_ids, count = [], 0
    for tid in ids[perm]:
        if count >= target:
            break
        train_ids.append(tid)
        count += int(np.sum(ds.traj_ids == tid))
    mask = np.isin(ds.traj_ids, train_ids)
    if mask.all():
        # greedy fill ate every flight; give the last one back to validation
        mask = np.isin(ds.traj_ids, train_ids[:-1])
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def subsample(indices, fraction, seed=0):
    """First floor(fraction * n) entries of a seeded shuffle, sorted."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    indices = np.asarray(indices)
    k = math.floor(fraction * len(indices))
    if k < 1:
        raise ValueError("fraction leaves no samples")
    perm = np.random.default_rng(
        np.random.SeedSequence([int(seed), 0x5AB5])).permutation(len(indices))
    return np.sort(indices[perm[:k]])


def filter_scenario(ds, scenario):
    """Index array for one serving-basestation slice of the data."""
    if scenario == "combined":
        return np.arange(len(ds))
    if scenario == "bs1":
        return np.flatnonzero(ds.bs_ids == 1)
    if scenario == "bs2":
        return np.flatnonzero(ds.bs_ids == 2)
    raise ValueError(f"unknown scenario {scenario!r}; pick from {SCENARIOS}")
