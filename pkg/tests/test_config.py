import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from roboemu.casestudy import CASES, configs
from roboemu.config import ScenarioConfig
from roboemu.errors import ConfigError


def test_defaults_build():
    scn = ScenarioConfig().build()
    assert scn.scheme == "A"
    assert scn.gains.omega_p == 10.0
    assert scn.correction == "clik"


@pytest.mark.parametrize("name", list(CASES))
def test_casestudy_round_trip(name):
    cfg = configs()[name]
    again = ScenarioConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()
    assert again.digest() == cfg.digest()
    cfg.build()


@given(
    st.floats(1.0, 500.0), st.floats(1.0, 50.0), st.sampled_from(["A", "B", "oracle"]),
    st.integers(0, 2**31), st.floats(1e-5, 1e-3),
)
def test_round_trip_identity(k_p, k_v, scheme, seed, h):
    cfg = ScenarioConfig.from_dict({"gains": {"G_p": k_p, "G_v": k_v}, "scheme": scheme, "seed": seed, "h": h})
    assert ScenarioConfig.from_json(cfg.to_json()) == cfg


def test_digest_tracks_content():
    a = ScenarioConfig()
    b = ScenarioConfig.from_dict({"seed": 1})
    assert a.digest() != b.digest()
    assert len(a.digest()) == 16
    assert a.digest() == ScenarioConfig().digest()


def test_save_and_load(tmp_path):
    cfg = configs()["casestudy_1dof.json"]
    path = tmp_path / "c.json"
    cfg.save(path)
    assert ScenarioConfig.load(path) == cfg
    assert json.loads(path.read_text())["static_force"] == pytest.approx(0.17376, abs=1e-5)


ERRORS = [
    ({"gains": {"G_p": -1}}, "gains.G_p"),
    ({"gains": {"G_v": "ten"}}, "gains.G_v"),
    ({"gains": {"G_f": 1.0}, "models": {"target": {"id": "flexible_two_link"},
                                       "emulator": {"id": "two_link"}}}, "gains.mdot_max"),
    ({"gains": {"G_f": 5.0, "mdot_max": 4.0}, "models": {"target": {"id": "flexible_two_link"},
                                                       "emulator": {"id": "two_link"}}}, "gains.G_f"),
    ({"gainz": {}}, "gainz"),
    ({"gains": {"K_p": 1}}, "gains.K_p"),
    ({"models": {"emulator": {"id": "scara"}}}, "models.emulator.id"),
    ({"models": {"target": {"id": "flexible_joint_1dof", "params": {"mass": 1}}}}, "models.target.params.mass"),
    ({"models": {"target": {"params": {}}}}, "models.target.id"),
    ({"models": {"target": {"id": "flexible_two_link"}}}, "models"),
    ({"scheme": "C"}, "scheme"),
    ({"actuator": {"mode": "delay"}}, "actuator.mode"),
    ({"actuator": {"omega_a": 0}}, "actuator.omega_a"),
    ({"environment": {"positions": [0.1, 0.2]}}, "environment.positions"),
    ({"environment": {"positions": [0.1], "sides": [2]}}, "environment.sides"),
    ({"disturbance": {"kind": "pink", "amplitude": [1]}}, "disturbance.kind"),
    ({"disturbance": {"kind": "constant"}}, "disturbance.amplitude"),
    ({"target_controller": {"tau0": [1, 2]}}, "target_controller.tau0"),
    ({"target_controller": {"mode": "resolved_rate"}}, "target_controller.setpoint"),
    ({"initial": {"q_s": [0.1]}}, "initial.q_s"),
    ({"correction": {"method": "lm"}}, "correction.method"),
    ({"correction": {"K": -5}}, "correction.K"),
    ({"duration": 0}, "duration"),
    ({"h": -1e-4}, "h"),
    ({"record_every": 0}, "record_every"),
    ({"seed": 1.5}, "seed"),
    ({"static_force": 0}, "static_force"),
    ([], "<root>"),
]


@pytest.mark.parametrize("data,field", ERRORS, ids=[e[1] for e in ERRORS])
def test_errors_name_the_field(data, field):
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_dict(data).build()
    assert exc.value.field == field
    assert str(exc.value).startswith(field)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.load(tmp_path / "missing.json")
    assert exc.value.field == "<file>"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        ScenarioConfig.load(bad)


def test_force_gain_allowed_for_constant_inertia_target():
    scn = ScenarioConfig.from_dict({"gains": {"G_f": 1.0}}).build()
    assert scn.gains.k_f == 1.0
    scn = ScenarioConfig.from_dict(
        {"gains": {"G_f": 1.0, "mdot_max": 0.5},
         "models": {"target": {"id": "flexible_two_link"}, "emulator": {"id": "two_link"}}}
    ).build()
    assert scn.gains.k_f == 1.0


def test_seed_drives_the_disturbance():
    a = ScenarioConfig.from_dict({"seed": 7, "disturbance": {"kind": "noise", "amplitude": [0.1]}}).build()
    assert a.disturbance.seed == 7
