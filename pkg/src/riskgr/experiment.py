"""Sweeps over power, RIS size/spacing and BS size/correlation.

Each sweep point evaluates a set of beamforming schemes with the closed
form (random schemes are averaged over ``random_draws`` beamformer draws)
and, when ``trials > 0``, checks one beamformer pair per scheme against
the Monte Carlo oracle.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .beamforming import transmit_gain_bounds, optimal_reflection, optimal_transmit, random_reflection, random_transmit
from .channel import SystemConfig, dbm_to_watts, reference_config, substream, watts_to_dbm
from .correlation import GridShape, RisLayout
from .kgr import MIN_TRIALS, kgr_closed_form, kgr_monte_carlo
from .probing import Beamformers

log = logging.getLogger(__name__)


class Scheme(str, enum.Enum):
    OPTIMAL_BOTH = "optimal_both"
    RANDOM_BOTH = "random_both"
    OPTIMAL_W_RANDOM_V = "optimal_w_random_v"
    RANDOM_W_OPTIMAL_V = "random_w_optimal_v"
    NO_RIS_OPTIMAL_W = "no_ris_optimal_w"
    # beamformers designed for R_S = I and R_I^T o R_I = I: any w and v are
    # then optimal, so both are drawn at random and scored on the true channel
    IID_ASSUMPTION = "iid_assumption"

    @property
    def random_w(self) -> bool:
        return self in (Scheme.RANDOM_BOTH, Scheme.RANDOM_W_OPTIMAL_V, Scheme.IID_ASSUMPTION)

    @property
    def random_v(self) -> bool:
        return self in (Scheme.RANDOM_BOTH, Scheme.OPTIMAL_W_RANDOM_V, Scheme.IID_ASSUMPTION)


ALL_SCHEMES = tuple(Scheme)
SWEEP_KINDS = ("power_dbm", "ris_elements", "bs_antennas")


@dataclass(frozen=True)
class Sweep:
    """One of three sweep kinds.

    ``power_dbm`` sets P_A = P_B to each value. ``ris_elements`` runs every
    grid for each spacing (in wavelengths). ``bs_antennas`` runs every grid
    for each rho. Outer loop is spacing/rho, inner loop is grid.
    """

    kind: str
    power_dbm: tuple = ()
    grids: tuple = ()
    spacings: tuple = ()
    rhos: tuple = ()

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"sweep kind must be one of {SWEEP_KINDS}, got {self.kind!r}")
        if self.kind == "power_dbm" and not self.power_dbm:
            raise ValueError("power sweep needs at least one value")
        if self.kind == "ris_elements" and not (self.grids and self.spacings):
            raise ValueError("RIS sweep needs grids and spacings")
        if self.kind == "bs_antennas" and not (self.grids and self.rhos):
            raise ValueError("BS sweep needs grids and rhos")

    def configs(self, base: SystemConfig) -> list:
        if self.kind == "power_dbm":
            return [base.replace(p_a=dbm_to_watts(p), p_b=dbm_to_watts(p)) for p in self.power_dbm]
        out = []
        if self.kind == "ris_elements":
            lam = base.ris_layout.wavelength
            for s in self.spacings:
                out += [base.replace(ris_layout=RisLayout.from_fraction(g, s, lam)) for g in self.grids]
        else:
            for rho in self.rhos:
                out += [base.replace(bs_grid=g, rho=rho) for g in self.grids]
        return out


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    base: SystemConfig
    sweep: Sweep
    schemes: tuple = ALL_SCHEMES
    trials: int = 0
    seed: int = 0
    random_draws: int = 100

    def __post_init__(self):
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        object.__setattr__(self, "schemes", tuple(Scheme(s) for s in self.schemes))
        if self.trials < 0 or 0 < self.trials < MIN_TRIALS:
            raise ValueError(f"trials must be 0 (no Monte Carlo) or at least {MIN_TRIALS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.random_draws < 1:
            raise ValueError("random_draws must be at least 1")


# (name, unit) in output order; unit None means dimensionless or text
COLUMNS = (
    ("experiment", None),
    ("point", None),
    ("scheme", None),
    ("power", "dBm"),
    ("bs_grid", None),
    ("M", None),
    ("rho", None),
    ("ris_grid", None),
    ("N", None),
    ("spacing", "lambda"),
    ("kgr", "bits"),
    ("kgr_std", "bits"),
    ("draws", None),
    ("x", "W"),
    ("mc_kgr", "bits"),
    ("mc_stderr", "bits"),
    ("mc_reference_kgr", "bits"),
    ("mc_trials", None),
    ("f_lower", "W"),
    ("f_upper", "W"),
    ("achieved", "W"),
    ("seed", None),
    ("version", None),
)


@dataclass(frozen=True)
class ResultRow:
    """One (sweep point, scheme) result.

    ``kgr``/``x`` are means over beamformer draws for random schemes (with
    ``kgr_std`` their spread). The Monte Carlo columns refer to a single
    beamformer pair whose own closed-form KGR is ``mc_reference_kgr``.
    Bounds are filled for schemes that use the optimal transmit vector.
    """

    experiment: str
    point: int
    scheme: str
    power: float
    bs_grid: str
    M: int
    rho: float
    ris_grid: str
    N: int
    spacing: float
    kgr: float
    kgr_std: float
    draws: int
    x: float
    mc_kgr: Optional[float] = None
    mc_stderr: Optional[float] = None
    mc_reference_kgr: Optional[float] = None
    mc_trials: int = 0
    f_lower: Optional[float] = None
    f_upper: Optional[float] = None
    achieved: Optional[float] = None
    seed: int = 0
    version: str = field(default_factory=lambda: f"v{__version__}")


assert tuple(f.name for f in fields(ResultRow)) == tuple(c for c, _ in COLUMNS)


def _mc_seed(seed: int, point: int, scheme_index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(3, point, scheme_index)).generate_state(1, np.uint64)[0])


def _evaluate_point(spec: ExperimentSpec, index: int, config: SystemConfig) -> list:
    R_S = config.bs_correlation()
    R_I = config.ris_correlation()
    pl = config.path_losses()
    M, N = config.M, config.N
    w_opt = optimal_transmit(R_S, config.p_a)
    v_opt = optimal_reflection(N)

    rng = substream(spec.seed, 2, index)
    D = spec.random_draws
    w_rand = random_transmit(M, config.p_a, rng, size=D)
    v_rand = random_reflection(N, rng, size=D)

    bounds = transmit_gain_bounds(config.bs_grid, config.rho, config.p_a)
    rows = []
    for j, scheme in enumerate(spec.schemes):
        scheme_pl = pl.without_ris() if scheme is Scheme.NO_RIS_OPTIMAL_W else pl
        randomized = scheme.random_w or scheme.random_v
        n_draws = D if randomized else 1
        pairs = [
            Beamformers(w_rand[k] if scheme.random_w else w_opt, v_rand[k] if scheme.random_v else v_opt)
            for k in range(n_draws)
        ]
        reports = [kgr_closed_form(R_S, R_I, bf, scheme_pl, config) for bf in pairs]
        kgr = np.array([r.kgr_bits for r in reports])
        x = np.array([r.x for r in reports])

        mc = dict(mc_trials=0)
        if spec.trials > 0:
            est = kgr_monte_carlo(config, R_S, R_I, pairs[0], spec.trials, _mc_seed(spec.seed, index, j),
                                  pathloss=scheme_pl)
            mc = dict(mc_kgr=est.bits, mc_stderr=est.stderr, mc_reference_kgr=reports[0].kgr_bits,
                      mc_trials=spec.trials)
        bnd = {}
        if not scheme.random_w:
            bnd = dict(f_lower=bounds.f_lower, f_upper=bounds.f_upper, achieved=bounds.achieved)
        rows.append(ResultRow(
            experiment=spec.name,
            point=index,
            scheme=scheme.value,
            power=round(watts_to_dbm(config.p_a), 9),
            bs_grid=str(config.bs_grid),
            M=M,
            rho=config.rho,
            ris_grid=str(config.ris_layout.grid),
            N=N,
            spacing=round(config.ris_layout.spacing / config.ris_layout.wavelength, 12),
            kgr=float(kgr.mean()),
            kgr_std=float(kgr.std(ddof=1)) if n_draws > 1 else 0.0,
            draws=n_draws,
            x=float(x.mean()),
            seed=spec.seed,
            **mc,
            **bnd,
        ))
    log.debug("%s point %d done", spec.name, index)
    return rows


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> list:
    """Evaluate every (sweep point, scheme) pair; rows come back in sweep order.

    Output is identical for any ``workers``: each point draws from its own
    seed substream and BLAS is pinned to one thread.
    """
    configs = spec.sweep.configs(spec.base)
    with threadpool_limits(limits=1):
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                chunks = list(pool.map(lambda ic: _evaluate_point(spec, *ic), enumerate(configs)))
        else:
            chunks = [_evaluate_point(spec, i, c) for i, c in enumerate(configs)]
    return [row for chunk in chunks for row in chunk]


def curve(rows, scheme: str, column: str = "kgr"):
    """``(power, value)`` arrays for one scheme, sorted by power."""
    sel = sorted((r for r in rows if r.scheme == Scheme(scheme).value), key=lambda r: r.power)
    if not sel:
        raise ValueError(f"no rows for scheme {scheme!r}")
    return np.array([r.power for r in sel]), np.array([getattr(r, column) for r in sel])


def _power_at(rows, scheme, level):
    power, kgr = curve(rows, scheme)
    if np.any(np.diff(kgr) <= 0):
        raise ValueError(f"KGR curve of {scheme!r} is not strictly increasing in power")
    if not kgr[0] <= level <= kgr[-1]:
        raise ValueError(f"KGR level {level:.6g} bits is outside the {scheme!r} curve [{kgr[0]:.6g}, {kgr[-1]:.6g}]")
    return float(np.interp(level, kgr, power))


def dbm_gain(rows, scheme_a: str, scheme_b: str, kgr_level: float) -> float:
    """Extra transmit power (dB) ``scheme_b`` needs to match ``scheme_a`` at ``kgr_level``."""
    return _power_at(rows, scheme_b, kgr_level) - _power_at(rows, scheme_a, kgr_level)


PRESET_SEED = 20220913


def preset(name: str) -> ExperimentSpec:
    """Built-in sweeps for the three figure setups."""
    if name == "fig2":
        return ExperimentSpec(
            name="fig2",
            base=reference_config(),
            sweep=Sweep("power_dbm", power_dbm=tuple(float(p) for p in range(0, 31, 2))),
            schemes=ALL_SCHEMES,
            seed=PRESET_SEED,
        )
    if name == "fig3":
        return ExperimentSpec(
            name="fig3",
            base=reference_config(),
            sweep=Sweep("ris_elements", grids=tuple(GridShape.square(k) for k in range(4, 11)),
                        spacings=(0.5, 0.25, 0.125)),
            schemes=(Scheme.OPTIMAL_BOTH, Scheme.OPTIMAL_W_RANDOM_V, Scheme.IID_ASSUMPTION),
            seed=PRESET_SEED,
        )
    if name == "fig4":
        return ExperimentSpec(
            name="fig4",
            base=reference_config(),
            sweep=Sweep("bs_antennas", grids=tuple(GridShape.square(k) for k in range(2, 9)),
                        rhos=(0.0, 0.3, 0.6)),
            schemes=(Scheme.OPTIMAL_BOTH, Scheme.RANDOM_W_OPTIMAL_V, Scheme.IID_ASSUMPTION),
            seed=PRESET_SEED,
        )
    raise ValueError(f"unknown preset {name!r}; choose fig2, fig3 or fig4")


PRESETS = ("fig2", "fig3", "fig4")


def with_overrides(spec: ExperimentSpec, trials: Optional[int] = None, seed: Optional[int] = None) -> ExperimentSpec:
    changes = {}
    if trials is not None:
        changes["trials"] = trials
    if seed is not None:
        changes["seed"] = seed
    return replace(spec, **changes) if changes else spec
