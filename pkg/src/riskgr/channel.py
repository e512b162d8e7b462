"""Geometry, path loss and Kronecker-model channel sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .correlation import (
    CorrelationMatrix,
    GridShape,
    RisLayout,
    identity_correlation,
    matrix_sqrt,
    ris_sinc_correlation,
    upa_correlation,
)

PATHLOSS_CONVENTIONS = ("paper", "conventional")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under the master ``seed``.

    Streams depend only on ``(seed, key)``, never on the order in which
    they are requested.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples: real and imaginary parts are each N(0, 1/2)."""
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    pairs = rng.standard_normal(shape + (2,))
    return pairs.view(np.complex128)[..., 0] * np.sqrt(0.5)


@dataclass(frozen=True)
class Geometry:
    """Node coordinates in meters plus the log-distance path-loss constants.

    Eve's links reuse the exponent of the matching legitimate link unless
    given explicitly (RIS links use ``alpha_ar``, direct links ``alpha_ba``).
    """

    alice_pos: tuple = (0.0, 0.0)
    bob_pos: tuple = (70.0, 0.0)
    ris_pos: tuple = (50.0, 10.0)
    eve_pos: Optional[tuple] = None
    alpha_ba: float = 4.0
    alpha_ar: float = 2.0
    alpha_br: float = 2.0
    zeta0: float = 1e-3
    alpha_ae: Optional[float] = None
    alpha_re: Optional[float] = None
    alpha_be: Optional[float] = None

    def __post_init__(self):
        for name in ("alice_pos", "bob_pos", "ris_pos", "eve_pos"):
            pos = getattr(self, name)
            if pos is None:
                continue
            pos = tuple(float(c) for c in pos)
            if len(pos) != 2 or not all(math.isfinite(c) for c in pos):
                raise ValueError(f"{name} must be two finite coordinates, got {pos!r}")
            object.__setattr__(self, name, pos)
        for name in ("alpha_ba", "alpha_ar", "alpha_br", "alpha_ae", "alpha_re", "alpha_be"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not self.zeta0 > 0:
            raise ValueError(f"zeta0 must be positive, got {self.zeta0!r}")
        nodes = [("alice", self.alice_pos), ("bob", self.bob_pos), ("ris", self.ris_pos)]
        if self.eve_pos is not None:
            nodes.append(("eve", self.eve_pos))
        for i, (na, pa) in enumerate(nodes):
            for nb, pb in nodes[i + 1:]:
                if math.dist(pa, pb) == 0.0:
                    raise ValueError(f"{na} and {nb} are at the same position")

    def distance(self, a: str, b: str) -> float:
        return math.dist(getattr(self, f"{a}_pos"), getattr(self, f"{b}_pos"))


@dataclass(frozen=True)
class PathLossSet:
    """Amplitude-model path losses; channels scale by their square roots.

    Zero entries are allowed so that links can be switched off (e.g. the
    no-RIS benchmark sets ``beta_ar = beta_br = 0``).
    """

    beta_ba: float
    beta_ar: float
    beta_br: float
    beta_ae: Optional[float] = None
    beta_re: Optional[float] = None
    beta_be: Optional[float] = None

    def __post_init__(self):
        for name in ("beta_ba", "beta_ar", "beta_br", "beta_ae", "beta_re", "beta_be"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {value!r}")

    @property
    def beta_r(self) -> float:
        return self.beta_ar * self.beta_br

    def without_ris(self) -> "PathLossSet":
        return replace(self, beta_ar=0.0, beta_br=0.0)


def _link_loss(zeta0: float, d: float, alpha: float, convention: str) -> float:
    gain = zeta0 * d ** (-alpha)
    if convention == "paper":
        return math.sqrt(gain)
    if convention == "conventional":
        return gain
    raise ValueError(f"unknown path-loss convention {convention!r}")


def path_losses(geometry: Geometry, convention: str = "paper") -> PathLossSet:
    """Per-link path losses from node positions.

    ``convention="paper"`` uses ``sqrt(zeta0 * d**-alpha)`` (the channel
    model then applies a further square root); ``"conventional"`` uses
    ``zeta0 * d**-alpha``.
    """
    g = geometry

    def loss(a, b, alpha):
        return _link_loss(g.zeta0, g.distance(a, b), alpha, convention)

    eve = {}
    if g.eve_pos is not None:
        eve = dict(
            beta_ae=loss("alice", "eve", g.alpha_ae or g.alpha_ba),
            beta_re=loss("ris", "eve", g.alpha_re or g.alpha_ar),
            beta_be=loss("bob", "eve", g.alpha_be or g.alpha_ba),
        )
    return PathLossSet(
        beta_ba=loss("bob", "alice", g.alpha_ba),
        beta_ar=loss("alice", "ris", g.alpha_ar),
        beta_br=loss("bob", "ris", g.alpha_br),
        **eve,
    )


@dataclass(frozen=True)
class SystemConfig:
    """Everything needed to build channels; powers and noise in watts."""

    bs_grid: GridShape
    ris_layout: RisLayout
    rho: float
    p_a: float
    p_b: float
    sigma2: float
    geometry: Geometry = field(default_factory=Geometry)
    eve_antennas: int = 1
    pathloss_convention: str = "paper"

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho!r}")
        for name in ("p_a", "p_b", "sigma2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.eve_antennas < 1:
            raise ValueError("eve_antennas must be at least 1")
        if self.pathloss_convention not in PATHLOSS_CONVENTIONS:
            raise ValueError(f"pathloss_convention must be one of {PATHLOSS_CONVENTIONS}")

    @property
    def M(self) -> int:
        return self.bs_grid.total

    @property
    def N(self) -> int:
        return self.ris_layout.n_elements

    def bs_correlation(self) -> CorrelationMatrix:
        return upa_correlation(self.bs_grid, self.rho)

    def ris_correlation(self) -> CorrelationMatrix:
        return ris_sinc_correlation(self.ris_layout)

    def path_losses(self) -> PathLossSet:
        return path_losses(self.geometry, self.pathloss_convention)

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


def reference_config(
    bs_grid: GridShape = GridShape(4, 4),
    rho: float = 0.3,
    ris_grid: GridShape = GridShape(8, 8),
    spacing: float = 0.5,
    power_dbm: float = 20.0,
    noise_dbm: float = -80.0,
) -> SystemConfig:
    """The default simulation setting: Alice (0,0), Bob (70,0), RIS (50,10).

    ``spacing`` is the RIS pitch in wavelengths.
    """
    p = dbm_to_watts(power_dbm)
    return SystemConfig(
        bs_grid=bs_grid,
        ris_layout=RisLayout.from_fraction(ris_grid, spacing),
        rho=rho,
        p_a=p,
        p_b=p,
        sigma2=dbm_to_watts(noise_dbm),
        geometry=Geometry(zeta0=db_to_linear(-30.0)),
    )


@dataclass(frozen=True)
class ChannelRealization:
    """One draw (or a stack of draws along leading axes) of all channels.

    Only one direction of each reciprocal link is stored; the other is a
    transposed view.
    """

    G_ra: np.ndarray
    h_br: np.ndarray
    h_ba: np.ndarray
    G_re: Optional[np.ndarray] = None
    H_ae: Optional[np.ndarray] = None
    h_eb: Optional[np.ndarray] = None

    @property
    def G_ar(self) -> np.ndarray:
        return np.swapaxes(self.G_ra, -1, -2)

    @property
    def h_rb(self) -> np.ndarray:
        return self.h_br

    @property
    def h_ab(self) -> np.ndarray:
        return self.h_ba

    @property
    def h_be(self) -> Optional[np.ndarray]:
        return self.h_eb

    @property
    def has_eve(self) -> bool:
        return self.G_re is not None


def sample_channels(
    config: SystemConfig,
    R_S,
    R_I,
    rng: np.random.Generator,
    *,
    size: Optional[int] = None,
    eve: bool = False,
    pathloss: Optional[PathLossSet] = None,
    sqrt_S: Optional[np.ndarray] = None,
    sqrt_I: Optional[np.ndarray] = None,
) -> ChannelRealization:
    """Draw Kronecker-correlated Rayleigh channels.

    Parameters
    ----------
    config : SystemConfig
    R_S, R_I : CorrelationMatrix or ndarray
        BS and RIS correlation matrices (M x M and N x N).
    rng : numpy.random.Generator
    size : int, optional
        Stack this many independent realizations along a leading axis.
    eve : bool
        Also draw Eve's channels (i.i.d. across Eve's antennas).
    pathloss : PathLossSet, optional
        Overrides ``config.path_losses()``.
    sqrt_S, sqrt_I : ndarray, optional
        Precomputed matrix square roots, to skip the eigendecomposition.
    """
    M, N = config.M, config.N
    r_s = np.asarray(R_S)
    r_i = np.asarray(R_I)
    if r_s.shape != (M, M):
        raise ValueError(f"R_S has shape {r_s.shape}, expected {(M, M)}")
    if r_i.shape != (N, N):
        raise ValueError(f"R_I has shape {r_i.shape}, expected {(N, N)}")
    pl = config.path_losses() if pathloss is None else pathloss
    s_s = matrix_sqrt(r_s) if sqrt_S is None else sqrt_S
    s_i = matrix_sqrt(r_i) if sqrt_I is None else sqrt_I
    lead = () if size is None else (int(size),)

    h_core = complex_normal(rng, lead + (M, N))
    # R_S^(1/2) H R_I^(1/2) as two large GEMMs over the whole stack
    right = (h_core.reshape(-1, N) @ s_i).reshape(h_core.shape)
    g_ra = np.moveaxis(np.tensordot(s_s, right, axes=([1], [-2])), 0, -2)
    g_ra = math.sqrt(pl.beta_ar) * np.ascontiguousarray(g_ra)
    h_br = math.sqrt(pl.beta_br) * (complex_normal(rng, lead + (N,)) @ s_i.T)
    h_ba = math.sqrt(pl.beta_ba) * (complex_normal(rng, lead + (M,)) @ s_s.T)

    if not eve:
        return ChannelRealization(g_ra, h_br, h_ba)
    if pl.beta_re is None:
        raise ValueError("Eve channels need eve_pos in the geometry")
    K = config.eve_antennas
    g_re = math.sqrt(pl.beta_re) * (complex_normal(rng, lead + (K, N)) @ s_i)
    # row k of H_ae is h_ak^T with h_ak = sqrt(beta) R_S^(1/2) h~
    h_ae = math.sqrt(pl.beta_ae) * (complex_normal(rng, lead + (K, M)) @ s_s.T)
    h_eb = math.sqrt(pl.beta_be) * complex_normal(rng, lead + (K,))
    return ChannelRealization(g_ra, h_br, h_ba, g_re, h_ae, h_eb)


__all__ = [
    "ChannelRealization",
    "Geometry",
    "PathLossSet",
    "SystemConfig",
    "complex_normal",
    "db_to_linear",
    "dbm_to_watts",
    "identity_correlation",
    "reference_config",
    "path_losses",
    "sample_channels",
    "substream",
    "watts_to_dbm",
]
