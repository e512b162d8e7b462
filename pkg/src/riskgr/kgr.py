"""Key generation rate: closed form, general 2x2 form, and a Monte Carlo oracle.

The closed form assumes equal noise variances at Alice and Bob. The
general form ``log2(R_aa R_bb / det R)`` works from any valid set of
covariances, and :func:`kgr_monte_carlo` estimates the same quantity from
simulated probing rounds without using any of the covariance algebra.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .channel import PathLossSet, SystemConfig, sample_channels, substream
from .correlation import hadamard_self, matrix_sqrt
from .probing import Beamformers, probe

DET_TOL = 1e-12
MIN_TRIALS = 10_000


@dataclass(frozen=True)
class KgrReport:
    r_aa: float
    r_bb: float
    r_ab: complex
    x: float
    kgr_bits: float

    def as_dict(self) -> dict:
        d = asdict(self)
        d["r_ab_re"], d["r_ab_im"] = float(self.r_ab.real), float(self.r_ab.imag)
        del d["r_ab"]
        return d


def transmit_gain(R_S, w) -> float:
    """``q = w^T R_S w*`` (real and non-negative for PSD R_S)."""
    w = np.asarray(w)
    return float(np.real(w @ np.asarray(R_S) @ w.conj()))


def reflection_gain(R_I, v) -> float:
    """``t = v^H (R_I^T o R_I) v``."""
    v = np.asarray(v)
    return float(np.real(v.conj() @ hadamard_self(R_I) @ v))


def monotone_scalar(R_S, R_I, bf: Beamformers, pl: PathLossSet) -> float:
    """The scalar the KGR is monotone in: ``q * (beta_r t + beta_ba)``."""
    q = transmit_gain(R_S, bf.w)
    t = reflection_gain(R_I, bf.v) if pl.beta_r else 0.0
    return q * (pl.beta_r * t + pl.beta_ba)


def covariances(R_S, R_I, bf: Beamformers, pl: PathLossSet, config: SystemConfig,
                sigma2_a: Optional[float] = None, sigma2_b: Optional[float] = None):
    """Second moments of Alice's combined gain and Bob's gain.

    Returns ``(R_aa, R_bb, R_ab)`` with ``R_ab = E{h_a h_b^*}``. Noise
    variances default to ``config.sigma2`` at both ends.
    """
    M, N = np.shape(R_S)[0], np.shape(R_I)[0]
    if bf.w.shape != (M,) or bf.v.shape != (N,):
        raise ValueError(f"beamformer sizes {bf.w.shape}, {bf.v.shape} do not match {M}x{N} correlations")
    s_a = config.sigma2 if sigma2_a is None else sigma2_a
    s_b = config.sigma2 if sigma2_b is None else sigma2_b
    x = monotone_scalar(R_S, R_I, bf, pl)
    r_aa = config.p_b * x + bf.power * s_a
    r_bb = x + s_b
    r_ab = complex(math.sqrt(config.p_b) * x)
    return r_aa, r_bb, r_ab


def kgr_general(r_aa: float, r_bb: float, r_ab: complex) -> float:
    """``log2(R_aa R_bb / (R_aa R_bb - |R_ab|^2))`` in bits."""
    if not (r_aa > 0 and r_bb > 0):
        raise ValueError(f"variances must be positive, got R_aa={r_aa!r}, R_bb={r_bb!r}")
    prod = r_aa * r_bb
    det = prod - abs(r_ab) ** 2
    if det <= -DET_TOL * prod:
        raise ValueError(f"covariance determinant {det:.3e} is negative")
    if det <= 0:
        raise ValueError("covariance matrix is singular (perfectly correlated gains)")
    return max(math.log2(prod / det), 0.0)


def kgr_from_x(x: float, p_b: float, w_power: float, sigma2: float) -> float:
    """Equal-noise closed form as a function of the monotone scalar x."""
    num = (p_b * x + w_power * sigma2) * (x + sigma2)
    den = (w_power + p_b) * sigma2 * x + w_power * sigma2**2
    return max(math.log2(num / den), 0.0)


def kgr_closed_form(R_S, R_I, bf: Beamformers, pl: PathLossSet, config: SystemConfig,
                    sigma2_a: Optional[float] = None, sigma2_b: Optional[float] = None) -> KgrReport:
    """Closed-form KGR for beamformers ``bf``.

    With distinct noise variances this falls back to :func:`kgr_general`.
    """
    s_a = config.sigma2 if sigma2_a is None else sigma2_a
    s_b = config.sigma2 if sigma2_b is None else sigma2_b
    if not (s_a > 0 and s_b > 0):
        raise ValueError("noise variances must be positive")
    r_aa, r_bb, r_ab = covariances(R_S, R_I, bf, pl, config, s_a, s_b)
    x = monotone_scalar(R_S, R_I, bf, pl)
    if s_a == s_b:
        bits = kgr_from_x(x, config.p_b, bf.power, s_a)
    else:
        bits = kgr_general(r_aa, r_bb, r_ab)
    return KgrReport(r_aa, r_bb, r_ab, x, bits)


class MonteCarloKgr(NamedTuple):
    bits: float
    stderr: float
    r_aa: float
    r_bb: float
    r_ab: complex
    trials: int


def sample_covariances(h_a: np.ndarray, h_b: np.ndarray):
    """Unbiased sample covariances (mean removed, 1/(T-1))."""
    T = h_a.shape[-1]
    da = h_a - h_a.mean(axis=-1, keepdims=True)
    db = h_b - h_b.mean(axis=-1, keepdims=True)
    r_aa = np.sum(np.abs(da) ** 2, axis=-1) / (T - 1)
    r_bb = np.sum(np.abs(db) ** 2, axis=-1) / (T - 1)
    r_ab = np.sum(da * db.conj(), axis=-1) / (T - 1)
    return r_aa, r_bb, r_ab


def _gaussian_mi(r_aa, r_bb, r_ab):
    tiny = np.finfo(float).tiny
    if np.any(r_aa <= tiny) or np.any(r_bb <= tiny):
        raise ValueError("degenerate sample covariance: a gain has (near-)zero variance")
    prod = r_aa * r_bb
    det = prod - np.abs(r_ab) ** 2
    if np.any(det <= 0):
        raise ValueError("degenerate sample covariance: singular 2x2 matrix")
    return np.log2(prod / det)


def simulate_gains(config: SystemConfig, R_S, R_I, bf: Beamformers, trials: int, seed: int, *,
                   pathloss: Optional[PathLossSet] = None, block_size: int = 4096, workers: int = 1):
    """Run ``trials`` independent probing rounds; returns ``(h_a, h_b)``.

    Round ``i`` lives in block ``i // block_size``, and each block draws
    from its own stream, so the output does not depend on ``workers``.
    """
    pl = config.path_losses() if pathloss is None else pathloss
    s_s, s_i = matrix_sqrt(R_S), matrix_sqrt(R_I)
    starts = list(range(0, trials, block_size))

    def run_block(b):
        n = min(block_size, trials - starts[b])
        rng = substream(seed, 0, b)
        ch = sample_channels(config, R_S, R_I, rng, size=n, pathloss=pl, sqrt_S=s_s, sqrt_I=s_i)
        obs = probe(ch, bf, config, rng)
        return obs.h_hat_a, obs.h_hat_b

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run_block, range(len(starts))))
    else:
        parts = [run_block(b) for b in range(len(starts))]
    h_a = np.concatenate([p[0] for p in parts])
    h_b = np.concatenate([p[1] for p in parts])
    return h_a, h_b


def kgr_monte_carlo(config: SystemConfig, R_S, R_I, bf: Beamformers, trials: int, seed: int, *,
                    pathloss: Optional[PathLossSet] = None, bootstrap: int = 200,
                    block_size: int = 4096, workers: int = 1) -> MonteCarloKgr:
    """Simulated KGR: Gaussian MI of the sample covariances of ``(h_a, h_b)``.

    Every round draws fresh channels and noise. The standard error comes
    from ``bootstrap`` resamples of the rounds.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")
    h_a, h_b = simulate_gains(config, R_S, R_I, bf, trials, seed, pathloss=pathloss,
                              block_size=block_size, workers=workers)
    r_aa, r_bb, r_ab = sample_covariances(h_a, h_b)
    bits = float(_gaussian_mi(r_aa, r_bb, r_ab))

    rng = substream(seed, 1)
    boot = np.empty(bootstrap)
    for k in range(bootstrap):
        idx = rng.integers(0, trials, trials)
        boot[k] = _gaussian_mi(*sample_covariances(h_a[idx], h_b[idx]))
    stderr = float(boot.std(ddof=1)) if bootstrap > 1 else float("nan")
    return MonteCarloKgr(bits, stderr, float(r_aa), float(r_bb), complex(r_ab), trials)


def within_oracle_tolerance(closed: float, mc: MonteCarloKgr, rel: float = 0.02, n_se: float = 3.0) -> bool:
    """``|mc - closed| <= max(rel * |closed|, n_se * stderr)``."""
    return abs(mc.bits - closed) <= max(rel * abs(closed), n_se * mc.stderr)
