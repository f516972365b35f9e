"""Uniform-linear-array beamforming over a geometric OFDM multipath channel.

Conventions: the array sits along a unit ``axis`` vector; spatial directions
are parameterized by the direction cosine u = d̂·axis ∈ [-1, 1] of the unit
propagation direction d̂, not by angles. All complex arithmetic is double
precision.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError


@dataclass(frozen=True)
class UlaConfig:
    """Uniform linear array: element count, spacing in wavelengths, axis."""

    num_antennas: int
    element_spacing: float = 0.5
    axis: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ValueError(f"num_antennas must be >= 1, got {self.num_antennas}")
        if self.element_spacing <= 0:
            raise ValueError("element_spacing must be positive")
        a = np.asarray(self.axis, dtype=float)
        if a.shape != (3,) or abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("axis must be a unit 3-vector")

    @property
    def axis_vector(self):
        return np.asarray(self.axis, dtype=float)


@dataclass(frozen=True)
class OfdmConfig:
    """OFDM dimensioning: subcarrier count and cyclic-prefix length in taps."""

    num_subcarriers: int
    cyclic_prefix: int = 0

    def __post_init__(self):
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be >= 1")
        if self.cyclic_prefix < 0:
            raise ValueError("cyclic_prefix must be non-negative")
        if self.cyclic_prefix >= self.num_subcarriers:
            raise ValueError("cyclic_prefix must be smaller than num_subcarriers")


@dataclass(frozen=True)
class PropagationPath:
    """One geometric ray: complex gain, direction cosine, integer tap delay."""

    gain: complex
    direction_cosine: float
    delay: int = 0

    def __post_init__(self):
        if not -1.0 <= self.direction_cosine <= 1.0:
            raise ValueError(
                f"direction_cosine must lie in [-1, 1], got {self.direction_cosine}")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")


@dataclass(frozen=True)
class TxConfig:
    """Transmit parameters: symbol power P, noise variance, pilot symbol."""

    symbol_power: float = 1.0
    noise_variance: float = 0.01
    symbol: complex = field(default=None)  # defaults to sqrt(P)

    def __post_init__(self):
        if self.symbol_power <= 0:
            raise ValueError("symbol_power must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")
        if self.symbol is None:
            object.__setattr__(self, "symbol", complex(math.sqrt(self.symbol_power)))
        elif abs(abs(self.symbol) ** 2 - self.symbol_power) > 1e-9:
            raise ValueError("symbol magnitude must satisfy |x|^2 = P")

    @property
    def snr(self):
        if self.noise_variance == 0:
            raise NumericError("SNR undefined for zero noise variance")
        return self.symbol_power / self.noise_variance


@dataclass(frozen=True)
class Channel:
    """Per-subcarrier channel vectors, one row of length M per subcarrier."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        if h.ndim != 2:
            raise ValueError(f"channel must be a K x M matrix, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "h", h)

    @property
    def num_subcarriers(self):
        return self.h.shape[0]

    @property
    def num_antennas(self):
        return self.h.shape[1]


@dataclass(frozen=True)
class Codebook:
    """Unit-norm beamforming vectors over a strictly increasing u grid."""

    beams: np.ndarray  # (Q, M), row q is beam q
    grid: np.ndarray   # (Q,) direction cosines

    def __post_init__(self):
        beams = np.asarray(self.beams, dtype=np.complex128)
        grid = np.asarray(self.grid, dtype=float)
        if beams.ndim != 2 or grid.ndim != 1 or beams.shape[0] != grid.shape[0]:
            raise ValueError("beams must be (Q, M) with a matching length-Q grid")
        norms = np.linalg.norm(beams, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("every beam must be unit-norm within 1e-12")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "beams", beams)
        object.__setattr__(self, "grid", grid)

    @property
    def num_beams(self):
        return self.beams.shape[0]

    @property
    def num_antennas(self):
        return self.beams.shape[1]


def steering_vector(u, cfg):
    """Array response a(u): entry m is exp(j*2*pi*spacing*m*u)."""
    if not -1.0 <= u <= 1.0:
        raise ValueError(f"direction cosine must lie in [-1, 1], got {u}")
    m = np.arange(cfg.num_antennas)
    return np.exp(2j * np.pi * cfg.element_spacing * m * u)


def build_codebook(cfg, num_beams):
    """Half-offset uniform direction-cosine grid of unit-norm conjugate beams.

    Grid point q sits at u_q = -1 + (2q+1)/Q; with Q equal to the antenna
    count the beams are pairwise orthonormal (DFT codebook).
    """
    if num_beams < 1:
        raise ValueError(f"num_beams must be >= 1, got {num_beams}")
    q = np.arange(num_beams)
    grid = -1.0 + (2.0 * q + 1.0) / num_beams
    m = np.arange(cfg.num_antennas)
    phases = 2j * np.pi * cfg.element_spacing * np.outer(grid, m)
    beams = np.exp(phases).conj() / math.sqrt(cfg.num_antennas)
    return Codebook(beams=beams, grid=grid)


def channel_from_paths(paths, ula, ofdm):
    """Sum per-path rank-one contributions into h_k for every subcarrier.

    h_k = sum_l gain_l * exp(-j*2*pi*k*delay_l/K) * a(u_l)
    """
    if not paths:
        raise ValueError("path list must be non-empty")
    K = ofdm.num_subcarriers
    k = np.arange(K)
    h = np.zeros((K, ula.num_antennas), dtype=np.complex128)
    for p in paths:
        if p.delay > ofdm.cyclic_prefix:
            raise ValueError(
                f"path delay {p.delay} exceeds cyclic prefix {ofdm.cyclic_prefix}")
        phase = np.exp(-2j * np.pi * k * p.delay / K)
        h += np.outer(p.gain * phase, steering_vector(p.direction_cosine, ula))
    return Channel(h=h)


def _beam_objectives(channel, beams):
    """(1/K) sum_k |h_k^T f_q|^2 for each beam, without the SNR prefactor."""
    proj = channel.h @ beams.T
    return np.mean(np.abs(proj) ** 2, axis=0)


def receive_gain(channel, beam, tx):
    """Average receive SNR for one beam: (1/K) sum_k SNR |h_k^T f|^2."""
    beam = np.asarray(beam)
    if beam.shape != (channel.num_antennas,):
        raise ValueError(
            f"beam length {beam.shape} does not match {channel.num_antennas} antennas")
    base = float(np.mean(np.abs(channel.h @ beam) ** 2))
    return tx.snr * base


def optimal_beam(channel, codebook, tx):
    """Index and gain of the codebook beam maximizing the average receive SNR.

    Ties break toward the lowest index. The SNR prefactor is applied after
    the argmax so the selection is exactly invariant to transmit power.
    """
    if codebook.num_antennas != channel.num_antennas:
        raise ValueError("codebook and channel antenna counts differ")
    snr = tx.snr  # validates noise_variance > 0 up front
    base = _beam_objectives(channel, codebook.beams)
    q = int(np.argmax(base))
    return q, snr * float(base[q])


def simulate_rx(channel, beam, tx, seed):
    """Received pilot samples y_k = h_k^T f x + v_k with seeded complex noise."""
    beam = np.asarray(beam)
    if beam.shape != (channel.num_antennas,):
        raise ValueError("beam length does not match channel antenna count")
    clean = (channel.h @ beam) * tx.symbol
    if tx.noise_variance == 0:
        return clean
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((channel.num_subcarriers, 2))
    noise = math.sqrt(tx.noise_variance / 2.0) * (draws[:, 0] + 1j * draws[:, 1])
    return clean + noise
