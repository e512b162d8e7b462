"""YAML experiment files.

Every key is optional except ``sweep``; omitted system keys take the
default simulation setting. Units: positions in meters, powers in dBm,
path loss at 1 m in dB, RIS spacing in wavelengths.

.. code-block:: yaml

    name: fig2                 # used for the output file name
    seed: 20220913             # 64-bit unsigned master seed
    trials: 0                  # Monte Carlo rounds per row (0 = skip, else >= 10000)
    random_draws: 100          # beamformer draws averaged by random schemes
    schemes: [optimal_both, random_both, optimal_w_random_v,
              random_w_optimal_v, no_ris_optimal_w, iid_assumption]
    system:
      bs_grid: [4, 4]          # [horizontal, vertical] BS antennas
      rho: 0.3                 # BS correlation index, 0 <= rho < 1
      ris_grid: [8, 8]         # [per row, per column] RIS elements
      ris_spacing: 0.5         # wavelengths
      wavelength: 0.1          # m (only the spacing ratio matters)
      power_dbm: 20            # P_A = P_B
      p_a_dbm: null            # optional override of P_A
      p_b_dbm: null            # optional override of P_B
      noise_dbm: -80           # sigma^2
      eve_antennas: 1
      pathloss_convention: paper   # paper | conventional
      geometry:
        alice: [0, 0]
        bob: [70, 0]
        ris: [50, 10]
        eve: null
        alpha_ba: 4
        alpha_ar: 2
        alpha_br: 2
        zeta0_db: -30
    sweep:                     # exactly one of the three kinds
      power_dbm: [0, 2, 4]
      # ris_elements: {grids: [[4, 4], [8, 8]], spacings: [0.5, 0.25]}
      # bs_antennas: {grids: [[2, 2], [4, 4]], rhos: [0, 0.3]}
"""

from __future__ import annotations

import math
from pathlib import Path

import yaml

from .channel import Geometry, SystemConfig, db_to_linear, dbm_to_watts, watts_to_dbm
from .correlation import GridShape, RisLayout
from .experiment import ExperimentSpec, Scheme, Sweep

DEFAULT_SYSTEM = {
    "bs_grid": [4, 4],
    "rho": 0.3,
    "ris_grid": [8, 8],
    "ris_spacing": 0.5,
    "wavelength": 0.1,
    "power_dbm": 20.0,
    "p_a_dbm": None,
    "p_b_dbm": None,
    "noise_dbm": -80.0,
    "eve_antennas": 1,
    "pathloss_convention": "paper",
}
DEFAULT_GEOMETRY = {
    "alice": [0.0, 0.0],
    "bob": [70.0, 0.0],
    "ris": [50.0, 10.0],
    "eve": None,
    "alpha_ba": 4.0,
    "alpha_ar": 2.0,
    "alpha_br": 2.0,
    "zeta0_db": -30.0,
}
TOP_KEYS = {"name", "seed", "trials", "random_draws", "schemes", "system", "sweep"}


class ConfigError(ValueError):
    """Invalid experiment file; ``key`` is the dotted path, ``line`` 1-based."""

    def __init__(self, message: str, key: str = "", line: int | None = None, source: str = "<config>"):
        self.key, self.line, self.source = key, line, source
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {key}: {message}" if key else f"{where}: {message}")


def _line_map(node, prefix="", out=None) -> dict:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _line_map(v, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            path = f"{prefix}[{i}]"
            out[path] = v.start_mark.line + 1
            _line_map(v, path, out)
    return out


class _Reader:
    def __init__(self, source, lines):
        self.source, self.lines = source, lines

    def fail(self, key, message):
        line = None
        probe = key
        while probe:
            if probe in self.lines:
                line = self.lines[probe]
                break
            probe = probe.rsplit(".", 1)[0] if "." in probe else ""
        raise ConfigError(message, key, line, self.source)

    def mapping(self, value, key, allowed):
        if value is None:
            return {}
        if not isinstance(value, dict):
            self.fail(key, "expected a mapping")
        for k in value:
            if k not in allowed:
                self.fail(f"{key}.{k}" if key else str(k), f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return value

    def number(self, value, key, lo=None, hi=None, lo_open=False, hi_open=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(key, f"expected a finite number, got {value!r}")
        value = float(value)
        if lo is not None and (value < lo or (lo_open and value == lo)):
            self.fail(key, f"must be {'>' if lo_open else '>='} {lo:g}, got {value:g}")
        if hi is not None and (value > hi or (hi_open and value == hi)):
            self.fail(key, f"must be {'<' if hi_open else '<='} {hi:g}, got {value:g}")
        return value

    def integer(self, value, key, lo=None):
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(key, f"expected an integer, got {value!r}")
        if lo is not None and value < lo:
            self.fail(key, f"must be >= {lo}, got {value}")
        return value

    def grid(self, value, key):
        if not (isinstance(value, (list, tuple)) and len(value) == 2):
            self.fail(key, f"expected [horizontal, vertical], got {value!r}")
        return GridShape(self.integer(value[0], f"{key}[0]", 1), self.integer(value[1], f"{key}[1]", 1))

    def point(self, value, key):
        if not (isinstance(value, (list, tuple)) and len(value) == 2):
            self.fail(key, f"expected [x, y] in meters, got {value!r}")
        return tuple(self.number(c, f"{key}[{i}]") for i, c in enumerate(value))

    def nonempty_list(self, value, key):
        if not isinstance(value, list) or not value:
            self.fail(key, "expected a non-empty list")
        return value


def _system(r: _Reader, raw) -> SystemConfig:
    raw = r.mapping(raw, "system", set(DEFAULT_SYSTEM) | {"geometry"})
    s = {**DEFAULT_SYSTEM, **{k: v for k, v in raw.items() if k != "geometry"}}
    g = {**DEFAULT_GEOMETRY, **r.mapping(raw.get("geometry"), "system.geometry", set(DEFAULT_GEOMETRY))}
    try:
        geometry = Geometry(
            alice_pos=r.point(g["alice"], "system.geometry.alice"),
            bob_pos=r.point(g["bob"], "system.geometry.bob"),
            ris_pos=r.point(g["ris"], "system.geometry.ris"),
            eve_pos=None if g["eve"] is None else r.point(g["eve"], "system.geometry.eve"),
            alpha_ba=r.number(g["alpha_ba"], "system.geometry.alpha_ba", 0, lo_open=True),
            alpha_ar=r.number(g["alpha_ar"], "system.geometry.alpha_ar", 0, lo_open=True),
            alpha_br=r.number(g["alpha_br"], "system.geometry.alpha_br", 0, lo_open=True),
            zeta0=db_to_linear(r.number(g["zeta0_db"], "system.geometry.zeta0_db")),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        r.fail("system.geometry", str(exc))
    power = r.number(s["power_dbm"], "system.power_dbm")
    p_a = power if s["p_a_dbm"] is None else r.number(s["p_a_dbm"], "system.p_a_dbm")
    p_b = power if s["p_b_dbm"] is None else r.number(s["p_b_dbm"], "system.p_b_dbm")
    convention = s["pathloss_convention"]
    if convention not in ("paper", "conventional"):
        r.fail("system.pathloss_convention", f"must be 'paper' or 'conventional', got {convention!r}")
    wavelength = r.number(s["wavelength"], "system.wavelength", 0, lo_open=True)
    return SystemConfig(
        bs_grid=r.grid(s["bs_grid"], "system.bs_grid"),
        ris_layout=RisLayout.from_fraction(
            r.grid(s["ris_grid"], "system.ris_grid"),
            r.number(s["ris_spacing"], "system.ris_spacing", 0, lo_open=True),
            wavelength,
        ),
        rho=r.number(s["rho"], "system.rho", 0, 1, hi_open=True),
        p_a=dbm_to_watts(p_a),
        p_b=dbm_to_watts(p_b),
        sigma2=dbm_to_watts(r.number(s["noise_dbm"], "system.noise_dbm")),
        geometry=geometry,
        eve_antennas=r.integer(s["eve_antennas"], "system.eve_antennas", 1),
        pathloss_convention=convention,
    )


def _sweep(r: _Reader, raw) -> Sweep:
    if raw is None:
        r.fail("sweep", "a sweep is required")
    raw = r.mapping(raw, "sweep", {"power_dbm", "ris_elements", "bs_antennas"})
    if len(raw) != 1:
        r.fail("sweep", "give exactly one of power_dbm, ris_elements, bs_antennas")
    (kind, body), = raw.items()
    key = f"sweep.{kind}"
    if kind == "power_dbm":
        vals = r.nonempty_list(body, key)
        return Sweep(kind, power_dbm=tuple(r.number(v, f"{key}[{i}]") for i, v in enumerate(vals)))
    other = "spacings" if kind == "ris_elements" else "rhos"
    body = r.mapping(body, key, {"grids", other})
    for needed in ("grids", other):
        if needed not in body:
            r.fail(f"{key}.{needed}", "missing")
    grids = tuple(r.grid(g, f"{key}.grids[{i}]") for i, g in enumerate(r.nonempty_list(body["grids"], f"{key}.grids")))
    values = r.nonempty_list(body[other], f"{key}.{other}")
    if kind == "ris_elements":
        spacings = tuple(r.number(v, f"{key}.spacings[{i}]", 0, lo_open=True) for i, v in enumerate(values))
        return Sweep(kind, grids=grids, spacings=spacings)
    rhos = tuple(r.number(v, f"{key}.rhos[{i}]", 0, 1, hi_open=True) for i, v in enumerate(values))
    return Sweep(kind, grids=grids, rhos=rhos)


def spec_from_dict(data, source: str = "<config>", lines: dict | None = None) -> ExperimentSpec:
    r = _Reader(source, lines or {})
    data = r.mapping(data, "", TOP_KEYS)
    name = data.get("name", "experiment")
    if not isinstance(name, str) or not name or "/" in name:
        r.fail("name", "must be a non-empty string without '/'")
    schemes = data.get("schemes", [s.value for s in Scheme])
    for i, s in enumerate(r.nonempty_list(schemes, "schemes")):
        if s not in {m.value for m in Scheme}:
            r.fail(f"schemes[{i}]", f"unknown scheme {s!r}")
    trials = r.integer(data.get("trials", 0), "trials", 0)
    if 0 < trials < 10_000:
        r.fail("trials", "must be 0 (skip Monte Carlo) or at least 10000")
    seed = r.integer(data.get("seed", 0), "seed", 0)
    if seed >= 2**64:
        r.fail("seed", "must fit in 64 bits")
    return ExperimentSpec(
        name=name,
        base=_system(r, data.get("system")),
        sweep=_sweep(r, data.get("sweep")),
        schemes=tuple(schemes),
        trials=trials,
        seed=seed,
        random_draws=r.integer(data.get("random_draws", 100), "random_draws", 1),
    )


def loads(text: str, source: str = "<config>") -> ExperimentSpec:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          line=None if mark is None else mark.line + 1, source=source) from exc
    return spec_from_dict(data, source, _line_map(node) if node is not None else {})


def load(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror or exc}", source=str(path)) from exc
    return loads(text, str(path))


def _num(x: float) -> float | int:
    x = float(format(x, ".12g"))
    return int(x) if x.is_integer() else x


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """Plain-data form of a spec, loadable with :func:`spec_from_dict`."""
    b, g = spec.base, spec.base.geometry
    lam = b.ris_layout.wavelength
    system = {
        "bs_grid": [b.bs_grid.horizontal, b.bs_grid.vertical],
        "rho": _num(b.rho),
        "ris_grid": [b.ris_layout.grid.horizontal, b.ris_layout.grid.vertical],
        "ris_spacing": _num(b.ris_layout.spacing / lam),
        "wavelength": _num(lam),
        "power_dbm": _num(watts_to_dbm(b.p_a)),
        "noise_dbm": _num(watts_to_dbm(b.sigma2)),
        "eve_antennas": b.eve_antennas,
        "pathloss_convention": b.pathloss_convention,
        "geometry": {
            "alice": [_num(c) for c in g.alice_pos],
            "bob": [_num(c) for c in g.bob_pos],
            "ris": [_num(c) for c in g.ris_pos],
            "eve": None if g.eve_pos is None else [_num(c) for c in g.eve_pos],
            "alpha_ba": _num(g.alpha_ba),
            "alpha_ar": _num(g.alpha_ar),
            "alpha_br": _num(g.alpha_br),
            "zeta0_db": _num(10 * math.log10(g.zeta0)),
        },
    }
    if b.p_b != b.p_a:
        system["p_b_dbm"] = _num(watts_to_dbm(b.p_b))
    sw = spec.sweep
    if sw.kind == "power_dbm":
        sweep = {"power_dbm": [_num(p) for p in sw.power_dbm]}
    elif sw.kind == "ris_elements":
        sweep = {"ris_elements": {"grids": [[s.horizontal, s.vertical] for s in sw.grids],
                                  "spacings": [_num(s) for s in sw.spacings]}}
    else:
        sweep = {"bs_antennas": {"grids": [[s.horizontal, s.vertical] for s in sw.grids],
                                 "rhos": [_num(r) for r in sw.rhos]}}
    return {
        "name": spec.name,
        "seed": spec.seed,
        "trials": spec.trials,
        "random_draws": spec.random_draws,
        "schemes": [s.value for s in spec.schemes],
        "system": system,
        "sweep": sweep,
    }


def dumps(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False, default_flow_style=None)
