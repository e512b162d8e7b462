"""Three-step channel probing: uplink sounding, downlink sounding, combining.

Pilots are unit modulus, so the least-squares estimate is the received
sample itself; everything here is written with ``s_u = s_d = 1``. All
functions broadcast over leading axes of the channel arrays, which is how
the Monte Carlo loops run many rounds at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import ChannelRealization, SystemConfig, complex_normal

UNIT_MODULUS_TOL = 1e-12
POWER_TOL = 1e-12


@dataclass(frozen=True)
class Beamformers:
    """Transmit vector ``w`` (sqrt-watts) and RIS reflection vector ``v``."""

    w: np.ndarray
    v: np.ndarray
    theta: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        v = np.asarray(self.v, dtype=complex)
        if w.ndim != 1 or v.ndim != 1:
            raise ValueError("w and v must be vectors")
        if np.max(np.abs(np.abs(v) - 1.0)) > UNIT_MODULUS_TOL:
            raise ValueError("reflection coefficients must have unit modulus")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_phases(cls, w, theta) -> "Beamformers":
        theta = np.asarray(theta, dtype=float)
        return cls(w, np.exp(1j * theta), theta)

    @property
    def power(self) -> float:
        return float(np.vdot(self.w, self.w).real)

    def check_power(self, p_a: float) -> None:
        if self.power > p_a + POWER_TOL:
            raise ValueError(f"transmit power {self.power:.6g} W exceeds budget {p_a:.6g} W")


@dataclass(frozen=True)
class ProbingObservation:
    h_hat_a: np.ndarray
    h_hat_b: np.ndarray
    eve_uplink: Optional[np.ndarray] = None
    eve_downlink: Optional[np.ndarray] = None
    noise: dict = field(default_factory=dict)


def _noise(rng, shape, var):
    if var == 0.0:
        return np.zeros(shape, dtype=complex)
    return math.sqrt(var) * complex_normal(rng, shape)


def _check_dims(ch: ChannelRealization, bf: Beamformers):
    M, N = ch.G_ra.shape[-2:]
    if bf.w.shape != (M,) or bf.v.shape != (N,):
        raise ValueError(f"beamformer sizes {bf.w.shape}, {bf.v.shape} do not match channel {M}x{N}")


def _noise_var(config, noise_var):
    return config.sigma2 if noise_var is None else float(noise_var)


def uplink_sound(ch: ChannelRealization, bf: Beamformers, config: SystemConfig, rng, noise_var=None,
                 _record=None) -> np.ndarray:
    """Alice's LS estimate ``sqrt(P_B) (G_ra Phi h_br + h_ba) + z``."""
    _check_dims(ch, bf)
    clean = math.sqrt(config.p_b) * (ch.G_ra @ (bf.v * ch.h_br)[..., None])[..., 0] + math.sqrt(config.p_b) * ch.h_ba
    z = _noise(rng, clean.shape, _noise_var(config, noise_var))
    if _record is not None:
        _record["uplink"] = z
    return clean + z


def downlink_sound(ch: ChannelRealization, bf: Beamformers, config: SystemConfig, rng, noise_var=None,
                   _record=None) -> np.ndarray:
    """Bob's LS estimate ``(h_rb^T Phi G_ar + h_ab^T) w + z``."""
    _check_dims(ch, bf)
    row = ((bf.v * ch.h_rb)[..., None, :] @ ch.G_ar)[..., 0, :] + ch.h_ab
    clean = row @ bf.w
    z = _noise(rng, np.shape(clean), _noise_var(config, noise_var))
    if _record is not None:
        _record["downlink"] = z
    return clean + z


def combine_uplink(h_hat_a_u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Alice's combined gain ``w^T h_hat_a_u`` (no conjugation)."""
    return np.asarray(h_hat_a_u) @ np.asarray(w)


def eve_observe(ch: ChannelRealization, bf: Beamformers, config: SystemConfig, rng, noise_var=None):
    """Eve's uplink and downlink estimates, each a K-vector per round."""
    if not ch.has_eve:
        raise ValueError("channel realization has no Eve channels")
    _check_dims(ch, bf)
    var = _noise_var(config, noise_var)
    up = math.sqrt(config.p_b) * ((ch.G_re @ (bf.v * ch.h_br)[..., None])[..., 0] + ch.h_be)
    up = up + _noise(rng, up.shape, var)
    cascade = ch.G_re @ (bf.v[:, None] * ch.G_ar)
    down = ((cascade + ch.H_ae) @ bf.w[:, None])[..., 0]
    down = down + _noise(rng, down.shape, var)
    return up, down


def probe(ch: ChannelRealization, bf: Beamformers, config: SystemConfig, rng, noise_var=None,
          eve: bool = False) -> ProbingObservation:
    """Run uplink, downlink and combining; noise draws are independent per step."""
    rec = {}
    h_u = uplink_sound(ch, bf, config, rng, noise_var, _record=rec)
    h_b = downlink_sound(ch, bf, config, rng, noise_var, _record=rec)
    h_a = combine_uplink(h_u, bf.w)
    e_up = e_down = None
    if eve:
        e_up, e_down = eve_observe(ch, bf, config, rng, noise_var)
    return ProbingObservation(h_a, h_b, e_up, e_down, rec)
