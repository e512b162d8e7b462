"""Optimal and baseline beamformers, plus eigenvalue bounds for UPA arrays.

The KGR is monotone in ``q * (beta_r t + beta_ba)`` with
``q = w^T R_S w*`` and ``t = v^H (R_I^T o R_I) v``, so the two vectors
are optimized separately: ``w`` by the dominant eigenvector of ``R_S``,
``v`` by a common phase on every element (all entries of ``R_I^T o R_I``
are non-negative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import PathLossSet, SystemConfig, complex_normal
from .correlation import GridShape, dominant_eigenpair, ula_correlation, upa_correlation
from .kgr import KgrReport, kgr_closed_form
from .probing import Beamformers

# above this size transmit_gain_bounds takes lambda_max from the two ULA factors
_DENSE_UPA_LIMIT = 64


def optimal_transmit(R_S, p_a: float) -> np.ndarray:
    """``w = sqrt(P_A) conj(u_max)`` so that ``w^T R_S w* = P_A lambda_max``."""
    _, u = dominant_eigenpair(R_S)
    w = math.sqrt(p_a) * u.conj()
    return w


def optimal_reflection(n: int, theta: float = 0.0) -> np.ndarray:
    """Equal-phase reflection vector ``v_n = exp(j theta)``."""
    if n < 1:
        raise ValueError("RIS must have at least one element")
    if not 0.0 <= theta < 2 * math.pi:
        raise ValueError(f"theta must lie in [0, 2pi), got {theta!r}")
    return np.full(n, np.exp(1j * theta))


def random_transmit(m: int, p_a: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """Isotropic random direction scaled to ``||w||^2 = P_A``."""
    shape = (m,) if size is None else (size, m)
    w0 = complex_normal(rng, shape)
    return math.sqrt(p_a) * w0 / np.linalg.norm(w0, axis=-1, keepdims=True)


def random_reflection(n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Phases i.i.d. uniform on ``[0, 2pi)``."""
    shape = (n,) if size is None else (size, n)
    return np.exp(1j * rng.uniform(0.0, 2 * math.pi, shape))


def ula_lambda_bounds(n: int, rho: float) -> dict:
    """Bounds on ``lambda_max`` of the n-element exponential-correlation ULA.

    ``lower`` is the Rayleigh quotient at the normalized all-ones vector.
    ``upper`` embeds the Toeplitz matrix in a ``(2n-1)``-circulant and
    evaluates its all-ones quadratic form numerically. ``upper_closed``
    is ``(1+rho-2rho^n)/(1-rho)``, the same number in closed form, and
    ``upper_printed`` is ``(1+rho)(1-rho^(n-1))/(1-rho)``.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    lower = (n * (1 - rho**2) - 2 * rho * (1 - rho**n)) / (n * (1 - rho) ** 2)
    size = 2 * n - 1
    lag = np.arange(size)
    first_row = float(rho) ** np.minimum(lag, size - lag)
    circ = first_row[(lag[None, :] - lag[:, None]) % size]
    ones = np.ones(size)
    upper = float(ones @ circ @ ones) / size
    return {
        "lower": lower,
        "upper": upper,
        "upper_closed": (1 + rho - 2 * rho**n) / (1 - rho),
        "upper_printed": (1 + rho) * (1 - rho ** (n - 1)) / (1 - rho),
    }


@lru_cache(maxsize=64)
def _ula_lambda_max(n: int, rho: float) -> float:
    return dominant_eigenpair(ula_correlation(n, rho))[0]


@dataclass(frozen=True)
class BoundsReport:
    """Bounds on ``w_opt^T R_S w_opt*`` for a UPA, all in watts.

    ``f_upper`` is the circulant-embedding bound (the one that holds);
    ``f_upper_printed`` is the per-dimension closed form
    ``(1+rho)(1-rho^(N-1))/(1-rho)`` and ``f_upper_squared_factor`` the variant with
    a ``(1+rho^2)`` factor. Both are kept for comparison only.
    """

    f_lower: float
    f_upper: float
    f_upper_printed: float
    f_upper_squared_factor: float
    achieved: float
    rho: float
    shape: GridShape
    p_a: float


def transmit_gain_bounds(shape: GridShape, rho: float, p_a: float = 1.0) -> BoundsReport:
    h = ula_lambda_bounds(shape.horizontal, rho)
    v = ula_lambda_bounds(shape.vertical, rho)
    if shape.total <= _DENSE_UPA_LIMIT:
        lam = dominant_eigenpair(upa_correlation(shape, rho))[0]
    else:
        lam = _ula_lambda_max(shape.horizontal, rho) * _ula_lambda_max(shape.vertical, rho)
    n_h, n_v = shape.horizontal, shape.vertical
    squared = (1 + rho**2) * (1 - rho ** (n_h - 1)) * (1 - rho ** (n_v - 1)) / (1 - rho) ** 2
    return BoundsReport(
        f_lower=p_a * h["lower"] * v["lower"],
        f_upper=p_a * h["upper"] * v["upper"],
        f_upper_printed=p_a * h["upper_printed"] * v["upper_printed"],
        f_upper_squared_factor=p_a * squared,
        achieved=p_a * lam,
        rho=float(rho),
        shape=shape,
        p_a=p_a,
    )


def joint_optimize(R_S, R_I, pl: PathLossSet, config: SystemConfig, theta: float = 0.0):
    """Globally optimal ``(w, v)`` and the KGR they achieve."""
    w = optimal_transmit(R_S, config.p_a)
    v = optimal_reflection(np.shape(R_I)[0], theta)
    bf = Beamformers(w, v, np.full(v.shape, theta))
    report: KgrReport = kgr_closed_form(R_S, R_I, bf, pl, config)
    return bf, report
