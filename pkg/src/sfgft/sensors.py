"""Sensor fields, test signals, noise, sampling sets and SNR scoring.

Randomness comes from numpy's PCG64 bit generator seeded with a 64-bit
integer.  Uniform doubles are taken from ``Generator.random`` and normal
draws are produced from them by the Box-Muller transform, so every stream
is fixed by the seed alone.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedSNRError
from .graph import VertexPartition

SNR_CAP_DB = 300.0


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


def standard_normal(seed, size):
    """``size`` N(0, 1) draws via Box-Muller on PCG64 uniforms."""
    rng = make_rng(seed)
    pairs = (size + 1) // 2
    u = rng.random((pairs, 2))
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1 - u lies in (0, 1]
    angle = 2.0 * np.pi * u[:, 1]
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:size]


@dataclass(frozen=True, eq=False)
class SensorField:
    positions: np.ndarray
    seed: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 2:
            raise ValueError("a sensor field needs at least 2 points in the plane")
        if np.any(pos < 0) or np.any(pos > 1):
            raise ValueError("sensor coordinates must lie in the unit square")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self):
        return self.positions.shape[0]


@dataclass(frozen=True)
class SignalSpec:
    omega: float

    def __post_init__(self):
        if not math.isfinite(self.omega) or self.omega < 0:
            raise ValueError(f"omega must be finite and >= 0, got {self.omega}")


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def place_sensors(n, seed):
    """``n`` sensors i.i.d. uniform on the unit square."""
    if n < 2:
        raise ValueError("need at least 2 sensors")
    return SensorField(make_rng(seed).random((n, 2)), seed)


def eval_signal(field, spec):
    """``cos(2 pi omega x)`` at every sensor; depends on x only."""
    return np.cos(2.0 * np.pi * spec.omega * field.positions[:, 0])


def add_noise(signal, noise):
    signal = np.asarray(signal, dtype=float)
    if noise.sigma == 0:
        return signal.copy()
    return signal + noise.sigma * standard_normal(noise.seed, signal.size).reshape(signal.shape)


def sample_random(n, m, seed):
    """``m`` distinct vertices drawn uniformly without replacement."""
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    chosen = make_rng(seed).permutation(n)[:m]
    return VertexPartition(np.sort(chosen), n)


def grid_side(m):
    return max(1, int(math.floor(math.sqrt(m) + 0.5)))


def sample_uniform_grid(field, m):
    """Nearest sensor to each cell center of a ``g x g`` grid, ``g = round(sqrt(m))``.

    Duplicates collapse, so the returned set may hold fewer than ``g**2``
    vertices.  Equal distances resolve to the lower sensor index.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    g = grid_side(m)
    ticks = (np.arange(g) + 0.5) / g
    cx, cy = np.meshgrid(ticks, ticks, indexing="ij")
    centers = np.column_stack([cx.ravel(), cy.ravel()])
    d2 = ((field.positions[None, :, :] - centers[:, None, :]) ** 2).sum(axis=2)
    chosen = np.unique(np.argmin(d2, axis=1))
    if chosen.size >= field.n:
        raise ValueError(
            f"grid of {g}x{g} cells selects every sensor; no vertex left to interpolate"
        )
    return VertexPartition(chosen, field.n)


def snr_db(truth, estimate, eval_set=None):
    """``10 log10(|truth|^2 / |truth - estimate|^2)`` over ``eval_set``.

    Returns ``inf`` for an exact estimate; see ``cap_snr`` for reporting.
    """
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if eval_set is not None:
        idx = np.asarray(eval_set, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("evaluation set is empty")
        truth, estimate = truth[idx], estimate[idx]
    signal = float(truth @ truth)
    if signal == 0.0:
        raise UndefinedSNRError("undefined SNR: truth has zero energy on the evaluation set")
    err = truth - estimate
    noise = float(err @ err)
    if noise == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / noise)


def cap_snr(value, cap=SNR_CAP_DB):
    return min(value, cap)
