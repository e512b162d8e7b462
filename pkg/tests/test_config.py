import textwrap

import pytest

from riskgr.config import ConfigError, dumps, load, loads, spec_to_dict
from riskgr.channel import dbm_to_watts
from riskgr.correlation import GridShape
from riskgr.experiment import PRESETS, Scheme, preset

MINIMAL = "sweep:\n  power_dbm: [0, 10]\n"


def test_minimal_defaults():
    spec = loads(MINIMAL)
    assert spec.name == "experiment" and spec.trials == 0 and spec.seed == 0
    assert spec.schemes == tuple(Scheme)
    assert spec.base.bs_grid == GridShape(4, 4) and spec.base.N == 64
    assert spec.base.sigma2 == pytest.approx(dbm_to_watts(-80))
    assert spec.base.geometry.zeta0 == pytest.approx(1e-3)
    assert spec.sweep.power_dbm == (0.0, 10.0)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_round_trip(name):
    spec = preset(name)
    assert loads(dumps(spec)) == spec


def test_full_file(tmp_path):
    text = textwrap.dedent("""\
        name: custom
        seed: 7
        trials: 10000
        random_draws: 3
        schemes: [optimal_both, no_ris_optimal_w]
        system:
          bs_grid: [2, 3]
          rho: 0.5
          ris_grid: [4, 2]
          ris_spacing: 0.25
          p_b_dbm: 10
          geometry:
            eve: [60, -5]
            alpha_ba: 3.5
        sweep:
          bs_antennas:
            grids: [[1, 1], [2, 2]]
            rhos: [0, 0.3]
        """)
    path = tmp_path / "c.yaml"
    path.write_text(text)
    spec = load(path)
    assert spec.name == "custom" and spec.trials == 10_000 and spec.random_draws == 3
    assert spec.base.M == 6 and spec.base.rho == 0.5
    assert spec.base.p_b == pytest.approx(0.01) and spec.base.p_a == pytest.approx(0.1)
    assert spec.base.geometry.eve_pos == (60.0, -5.0) and spec.base.geometry.alpha_ba == 3.5
    assert spec.sweep.rhos == (0.0, 0.3)
    assert loads(dumps(spec)) == spec
    assert spec_to_dict(spec)["system"]["p_b_dbm"] == 10


@pytest.mark.parametrize("text, key, line", [
    ("sweep:\n  power_dbm: [0]\nbogus: 1\n", "bogus", 3),
    ("system:\n  rho: 1.5\nsweep:\n  power_dbm: [0]\n", "system.rho", 2),
    ("system:\n  bs_grid: [0, 2]\nsweep:\n  power_dbm: [0]\n", "system.bs_grid[0]", 2),
    ("sweep:\n  power_dbm: []\n", "sweep.power_dbm", 2),
    ("sweep:\n  power_dbm: [0]\n  bs_antennas: {grids: [[1,1]], rhos: [0]}\n", "sweep", 1),
    ("schemes: [optimal_both, nope]\nsweep:\n  power_dbm: [0]\n", "schemes[1]", 1),
    ("trials: 50\nsweep:\n  power_dbm: [0]\n", "trials", 1),
    ("seed: -1\nsweep:\n  power_dbm: [0]\n", "seed", 1),
    ("sweep:\n  ris_elements:\n    grids: [[2, 2]]\n", "sweep.ris_elements.spacings", 2),
    ("system:\n  geometry:\n    bob: [0, 0]\nsweep:\n  power_dbm: [0]\n", "system.geometry", 2),
    ("system:\n  pathloss_convention: odd\nsweep:\n  power_dbm: [0]\n", "system.pathloss_convention", 2),
    ("name: fig2\n", "sweep", None),
])
def test_diagnostics(text, key, line):
    with pytest.raises(ConfigError) as info:
        loads(text, "exp.yaml")
    err = info.value
    assert err.key == key
    assert err.line == line
    assert str(err).startswith("exp.yaml")


def test_yaml_syntax_error():
    with pytest.raises(ConfigError) as info:
        loads("sweep: [unclosed\n", "bad.yaml")
    assert info.value.line is not None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load(tmp_path / "nope.yaml")
