"""Rayleigh block fading and receiver noise.

Randomness comes from numpy's Philox counter-based generator keyed by a
:class:`numpy.random.SeedSequence` built from ``(seed, *keys)``.  The
simulator keys streams by ``(seed, snr_point, block)`` so the draws of a
frame never depend on how work is split between processes.

Circularly-symmetric complex Gaussians are built from two independent real
normals (numpy's ziggurat sampler), each scaled to variance 1/2.
"""

from dataclasses import dataclass

import numpy as np

_HALF = np.sqrt(0.5)


def frame_rng(seed, *keys):
    """Independent Philox generator for the stream ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def complex_normal(rng, size):
    """i.i.d. CN(0, 1) samples of the given shape."""
    size = (size,) if np.isscalar(size) else tuple(size)
    x = rng.standard_normal(size + (2,))
    return _HALF * (x[..., 0] + 1j * x[..., 1])


@dataclass(frozen=True)
class ChannelRealization:
    """Fade coefficients of one cooperation frame.

    ``g0`` is the source-destination gain, ``f[i]`` source to relay ``i``
    and ``g[i]`` relay ``i`` to destination.
    """

    g0: complex
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.f, dtype=complex))
        g = np.atleast_1d(np.asarray(self.g, dtype=complex))
        if f.shape != g.shape or f.ndim != 1:
            raise ValueError("f and g must be 1-D with the same length")
        if not (np.isfinite(self.g0) and np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise ValueError("fade coefficients must be finite")
        object.__setattr__(self, "g0", complex(self.g0))
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @property
    def R(self):
        return len(self.f)


@dataclass(frozen=True)
class NoiseDraws:
    """Relay noise ``v`` (R x T1) and destination noise ``w1`` (T1), ``w2`` (T2)."""

    v: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    def scaled(self, factor):
        return NoiseDraws(self.v * factor, self.w1 * factor, self.w2 * factor)

    @classmethod
    def zeros(cls, config):
        return cls(
            np.zeros((config.R, config.T1), complex),
            np.zeros(config.T1, complex),
            np.zeros(config.T2, complex),
        )


def draw_channel(R, rng):
    if R < 1:
        raise ValueError("need at least one relay")
    h = complex_normal(rng, 2 * R + 1)
    return ChannelRealization(h[0], h[1 : R + 1], h[R + 1 :])


def draw_noise(config, rng):
    v = complex_normal(rng, (config.R, config.T1))
    w1 = complex_normal(rng, config.T1)
    w2 = complex_normal(rng, config.T2)
    return NoiseDraws(v, w1, w2)


def draw_channels(R, n, rng):
    """Batch of ``n`` frames: arrays ``g0`` (n,), ``f`` (n, R), ``g`` (n, R)."""
    h = complex_normal(rng, (n, 2 * R + 1))
    return h[:, 0], h[:, 1 : R + 1], h[:, R + 1 :]


def draw_noises(config, n, rng):
    """Batch of ``n`` frames: ``v`` (n, R, T1), ``w1`` (n, T1), ``w2`` (n, T2)."""
    v = complex_normal(rng, (n, config.R, config.T1))
    w1 = complex_normal(rng, (n, config.T1))
    w2 = complex_normal(rng, (n, config.T2))
    return v, w1, w2
