"""Two-phase GNAF transmission model.

A frame has a broadcast phase of ``T1`` channel uses, in which the source
sends ``sqrt(pi1 P) s``, followed by a cooperation phase of ``T2`` uses in
which relay ``i`` sends ``sqrt(pi3 P / (pi1 P + 1)) (A_i r_i + B_i conj(r_i))``
and, for GNAF-I and GNAF-III, the source sends
``sqrt(pi2 P) (A0 s + B0 conj(s))``.

Two independent code paths produce the destination observation: the
slot-level signal chain (:func:`transmit_frame`) and the codeword-matrix
form ``y = sqrt(pi3 pi1 P^2 / (pi1 P + 1)) S H + W``
(:func:`equivalent_model`).  They must agree to rounding.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .channel import ChannelRealization, NoiseDraws


class Variant(str, Enum):
    GNAF_I = "GNAF-I"
    GNAF_II = "GNAF-II"
    GNAF_III = "GNAF-III"
    JING_HASSIBI = "JING-HASSIBI"


@dataclass(frozen=True)
class ProtocolConfig:
    """Frame durations, relay count, power split and total power ``P``."""

    variant: Variant
    T1: int
    T2: int
    R: int
    pi1: float
    pi2: float
    pi3: float
    P: float

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        for name in ("T1", "T2", "R"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.pi1 <= 0 or self.pi3 <= 0:
            raise ValueError("pi1 and pi3 must be positive (they divide the codeword scale factors)")
        if self.pi2 < 0:
            raise ValueError("pi2 must be nonnegative")
        if not self.P > 0:
            raise ValueError("P must be positive")
        total = self.pi1 + self.pi2 + self.R * self.pi3
        if abs(total - (self.T1 + self.T2)) > 1e-10 * max(1.0, self.T1 + self.T2):
            raise ValueError(f"pi1 + pi2 + R*pi3 = {total!r} differs from T1 + T2 = {self.T1 + self.T2}")
        if self.variant in (Variant.GNAF_II, Variant.JING_HASSIBI) and self.pi2 != 0:
            raise ValueError(f"{self.variant.value} requires pi2 = 0")
        if self.variant is Variant.JING_HASSIBI and self.T1 != self.T2:
            raise ValueError("JING-HASSIBI requires T1 = T2")

    @property
    def observes_broadcast(self):
        """Whether the destination keeps its broadcast-phase observation."""
        return self.variant in (Variant.GNAF_I, Variant.GNAF_II)

    @property
    def source_cooperates(self):
        return self.variant in (Variant.GNAF_I, Variant.GNAF_III)

    @property
    def obs_len(self):
        return self.T1 + self.T2 if self.observes_broadcast else self.T2

    @property
    def max_diversity(self):
        return self.R if self.variant is Variant.JING_HASSIBI else self.R + 1

    def with_power(self, P):
        return replace(self, P=float(P))

    # scale factors of the signal model
    @property
    def relay_gain(self):
        return np.sqrt(self.pi3 * self.P / (self.pi1 * self.P + 1))

    @property
    def mean_scale(self):
        return np.sqrt(self.pi3 * self.pi1 * self.P**2 / (self.pi1 * self.P + 1))

    @property
    def broadcast_column_scale(self):
        return np.sqrt((self.pi1 * self.P + 1) / (self.pi3 * self.P))

    @property
    def source_column_scale(self):
        return np.sqrt(self.pi2 * (self.pi1 * self.P + 1) / (self.pi3 * self.pi1 * self.P))

    def to_dict(self):
        return {
            "variant": self.variant.value,
            "T1": self.T1,
            "T2": self.T2,
            "R": self.R,
            "pi1": self.pi1,
            "pi2": self.pi2,
            "pi3": self.pi3,
            "P": self.P,
        }


def gnaf_config(variant, T1, T2, R, P, pi1=None, pi2=0.0, pi3=None):
    """Config with the default split ``pi1 = (T1+T2)/2``, ``pi3 = (T1+T2-pi1-pi2)/R``."""
    total = T1 + T2
    if pi1 is None:
        pi1 = total / 2
    if pi3 is None:
        pi3 = (total - pi1 - pi2) / R
    return ProtocolConfig(Variant(variant), T1, T2, R, float(pi1), float(pi2), float(pi3), float(P))


def jing_hassibi_config(T, R, P, pi1=None, pi3=None):
    """The protocol of Jing and Hassibi: ``T1 = T2 = T``, ``pi2 = 0``, broadcast unobserved."""
    if T < R:
        raise ValueError("Jing-Hassibi needs T >= R")
    return gnaf_config(Variant.JING_HASSIBI, T, T, R, P, pi1=pi1, pi2=0.0, pi3=pi3)


def source_pair(config, code):
    """``(A0, B0)`` as used by ``config``; zero when the source is silent in cooperation."""
    shape = (config.T2, config.T1)
    if not config.source_cooperates or code.A0 is None:
        return np.zeros(shape, complex), np.zeros(shape, complex)
    return code.A0, code.B0


def _check_shapes(config, code):
    if code.A.shape != (config.R, config.T2, config.T1):
        raise ValueError(f"relay matrices have shape {code.A.shape[1:]} for {code.A.shape[0]} relays, "
                         f"config needs {config.R} relays of {(config.T2, config.T1)}")


@dataclass(frozen=True)
class FrameTrace:
    """Every signal of one frame; ``yD1`` is None when the destination ignores the broadcast."""

    s: np.ndarray
    r: np.ndarray
    t: np.ndarray
    yD1: Optional[np.ndarray]
    yD2: np.ndarray
    noise: NoiseDraws

    @property
    def y(self):
        return self.yD2 if self.yD1 is None else np.concatenate([self.yD1, self.yD2])


def transmit_frame(config, code, s, channel, noise):
    """Simulate one frame slot by slot."""
    _check_shapes(config, code)
    s = np.asarray(s, dtype=complex)
    if s.shape != (config.T1,):
        raise ValueError(f"s must have length T1 = {config.T1}")
    if channel.R != config.R:
        raise ValueError("channel relay count differs from config")
    P = config.P
    A0, B0 = source_pair(config, code)

    r = np.sqrt(config.pi1 * P) * channel.f[:, None] * s[None, :] + noise.v
    t = config.relay_gain * (code.A @ r[:, :, None] + code.B @ np.conj(r)[:, :, None])[:, :, 0]
    yD2 = (channel.g[:, None] * t).sum(axis=0)
    yD2 = yD2 + np.sqrt(config.pi2 * P) * channel.g0 * (A0 @ s + B0 @ np.conj(s)) + noise.w2
    yD1 = None
    if config.observes_broadcast:
        yD1 = np.sqrt(config.pi1 * P) * channel.g0 * s + noise.w1
    return FrameTrace(s, r, t, yD1, yD2, noise)


def codeword_matrix(config, code, s):
    """Codeword matrix ``S`` for broadcast vector(s) ``s``.

    Column order is ``[source, A_1 s .. A_R s, source-conjugate, B_1 s* .. B_R s*]``.
    The broadcast block (first ``T1`` rows) is present only when the
    destination observes the broadcast phase.  ``s`` may be stacked with
    leading batch dimensions.
    """
    _check_shapes(config, code)
    s = np.asarray(s, dtype=complex)
    R, T1, T2 = config.R, config.T1, config.T2
    A0, B0 = source_pair(config, code)
    c0 = config.source_column_scale
    lead = s.shape[:-1]
    bottom = np.zeros(lead + (T2, 2 * (R + 1)), complex)
    bottom[..., 0] = c0 * np.einsum("kl,...l->...k", A0, s)
    bottom[..., 1 : R + 1] = np.einsum("ikl,...l->...ki", code.A, s)
    bottom[..., R + 1] = c0 * np.einsum("kl,...l->...k", B0, np.conj(s))
    bottom[..., R + 2 :] = np.einsum("ikl,...l->...ki", code.B, np.conj(s))
    if not config.observes_broadcast:
        return bottom
    top = np.zeros(lead + (T1, 2 * (R + 1)), complex)
    top[..., 0] = config.broadcast_column_scale * s
    return np.concatenate([top, bottom], axis=-2)


def stacked_channel(channel):
    """``H = (g0, g1 f1, .., gR fR, g0, g1 f1*, .., gR fR*)``."""
    return np.concatenate([[channel.g0], channel.g * channel.f, [channel.g0], channel.g * np.conj(channel.f)])


def equivalent_noise(config, code, channel, noise):
    """Noise vector ``W`` of the codeword-matrix model."""
    fwd = code.A @ noise.v[:, :, None] + code.B @ np.conj(noise.v)[:, :, None]
    W2 = config.relay_gain * (channel.g[:, None] * fwd[:, :, 0]).sum(axis=0) + noise.w2
    if not config.observes_broadcast:
        return W2
    return np.concatenate([noise.w1, W2])


def equivalent_model(config, code, s, channel, noise):
    """Destination observation via ``y = mean_scale * S H + W``; returns ``(y, W)``."""
    S = codeword_matrix(config, code, s)
    H = stacked_channel(channel)
    W = equivalent_noise(config, code, channel, noise)
    return config.mean_scale * (S @ H) + W, W


def observe_batch(config, code, s, g0, f, g, v, w1, w2):
    """Vectorized slot-level observation for ``n`` frames.

    Shapes: ``s`` (n, T1), ``g0`` (n,), ``f``/``g`` (n, R), ``v`` (n, R, T1),
    ``w1`` (n, T1), ``w2`` (n, T2).  Returns ``y`` of shape (n, obs_len).
    """
    P = config.P
    A0, B0 = source_pair(config, code)
    r = np.sqrt(config.pi1 * P) * f[:, :, None] * s[:, None, :] + v
    t = config.relay_gain * (np.einsum("ikl,nil->nik", code.A, r) + np.einsum("ikl,nil->nik", code.B, np.conj(r)))
    yD2 = np.einsum("ni,nik->nk", g, t) + w2
    if config.source_cooperates and config.pi2 > 0:
        src = np.einsum("kl,nl->nk", A0, s) + np.einsum("kl,nl->nk", B0, np.conj(s))
        yD2 = yD2 + np.sqrt(config.pi2 * P) * g0[:, None] * src
    if not config.observes_broadcast:
        return yD2
    yD1 = np.sqrt(config.pi1 * P) * g0[:, None] * s + w1
    return np.concatenate([yD1, yD2], axis=1)


#: NAF slot order expressed as indices into the GNAF-I observation (T1 = T2 = 2).
NAF_PERMUTATION = np.array([0, 2, 1, 3])


def naf_frame(config, code, s, channel, noise):
    """Destination observation of the two-relay NAF frame, in NAF slot order.

    Slot 1: the source sends the first symbol, heard by relay 1 and the
    destination.  Slot 2: relay 1 forwards ``b1`` times what it heard while
    the source keeps transmitting.  Slots 3 and 4 repeat this for the second
    symbol and relay 2.  ``b1``/``b2`` are read from the diagonal relay
    matrices of ``code`` (see :func:`gnaf.codes.naf_relay_code`).
    """
    if (config.R, config.T1, config.T2) != (2, 2, 2) or not config.observes_broadcast:
        raise ValueError("the NAF frame is defined for two relays, T1 = T2 = 2, broadcast observed")
    P = config.P
    b = [code.A[0][0, 0], code.A[1][1, 1]]
    A0, B0 = source_pair(config, code)
    src_coop = np.sqrt(config.pi2 * P) * (A0 @ s + B0 @ np.conj(s))
    out = []
    for k in range(2):
        x = np.sqrt(config.pi1 * P) * s[k]
        out.append(channel.g0 * x + noise.w1[k])
        heard = channel.f[k] * x + noise.v[k][k]
        relayed = config.relay_gain * b[k] * heard
        out.append(channel.g[k] * relayed + channel.g0 * src_coop[k] + noise.w2[k])
    return np.array(out)
