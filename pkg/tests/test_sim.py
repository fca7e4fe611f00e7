import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given
from hypothesis import strategies as st

from roboemu.casestudy import WALL, configs, fma_press_force
from roboemu.control import ControllerGains
from roboemu.errors import ConfigError, IntegrationError
from roboemu.sim import (
    AXES,
    CHANNELS,
    DisturbanceSpec,
    Environment,
    TargetController,
    dominant_frequency,
    inertia_ratio_eigs,
    run,
    run_direct_oracle,
    run_scheme_a,
    run_scheme_b,
    summarize,
    sweep,
    with_axis,
)


@pytest.fixture(scope="module")
def cases():
    return {name: cfg.build() for name, cfg in configs().items()}


@given(st.floats(-0.1, 0.1), st.floats(-2.0, 2.0))
def test_wall_is_unilateral(p, pd):
    env = Environment((WALL,), (1,), 1e4, 20.0)
    f = env.force([p], [pd])[0]
    # pushes back only, and only while penetrating
    assert f <= 0.0
    if p <= WALL:
        assert f == 0.0
    else:
        assert f == pytest.approx(min(0.0, -(1e4 * (p - WALL) + 20.0 * pd)), abs=1e-12)


def test_wall_side_and_free_axes():
    env = Environment((None, 0.5), (1, -1))
    np.testing.assert_allclose(env.penetration([3.0, 0.4]), [0.0, 0.1], atol=1e-15)
    assert env.force([3.0, 0.4], [0.0, 0.0])[1] == pytest.approx(1e4 * 0.1)
    with pytest.raises(ConfigError):
        Environment((0.1,), (1, 1))
    with pytest.raises(ConfigError):
        Environment(k_e=0.0)


def test_disturbance_signals():
    assert np.all(DisturbanceSpec().value(1.0, 2) == 0.0)
    np.testing.assert_allclose(DisturbanceSpec("constant", (0.3,)).value(1.0, 2), [0.3, 0.3])
    sin = DisturbanceSpec("sinusoid", (0.1,), omega=30.0, t_on=0.5)
    assert sin.value(0.4, 1)[0] == 0.0
    # phase is measured from switch-on
    assert sin.value(0.6, 1)[0] == pytest.approx(0.1 * np.sin(30.0 * 0.1), rel=1e-12)
    with pytest.raises(ConfigError):
        DisturbanceSpec("pink")
    with pytest.raises(ConfigError):
        DisturbanceSpec("sinusoid")


def test_noise_is_seeded():
    ts = np.linspace(0, 2, 201)
    a = np.array([DisturbanceSpec("noise", (0.1,), seed=3).value(t, 1)[0] for t in ts])
    b = np.array([DisturbanceSpec("noise", (0.1,), seed=3).value(t, 1)[0] for t in ts])
    c = np.array([DisturbanceSpec("noise", (0.1,), seed=4).value(t, 1)[0] for t in ts])
    np.testing.assert_array_equal(a, b)
    assert np.abs(a - c).max() > 1e-3


def test_scenario_validation(cases):
    scn = cases["casestudy_free_space.json"]
    for kw in [{"h": 0.0}, {"duration": -1.0}, {"scheme": "C"}, {"correction": "lm"}]:
        with pytest.raises(ConfigError):
            replace(scn, **kw)
    with pytest.raises(ConfigError):
        TargetController(mode="resolved_rate")
    with pytest.raises(ConfigError):
        run(scn, "C")


def test_zero_input_equilibrium(cases):
    scn = replace(
        cases["casestudy_free_space.json"], target_controller=TargetController(), q_s0=(0.1, 0.1), duration=0.5
    )
    for scheme in ("A", "B", "oracle"):
        rows = run(scn, scheme).rows()
        finite = np.isfinite(rows[0])
        np.testing.assert_allclose(rows[:, finite][:, 1:], rows[:1, finite][:, 1:].repeat(len(rows), 0), atol=1e-14)


def test_oracle_static_press_matches_hand_calculation(cases):
    # at rest the spring balances the link: tau0 = l |f|
    scn = replace(
        cases["casestudy_sweep.json"], q_s0=(WALL / 0.3, WALL / 0.3), e_p0=(), duration=20.0, h=5e-4,
        record_every=100,
    )
    scn = replace(scn, actuator=replace(scn.actuator, mode="ideal"))
    tr = run_direct_oracle(scn)
    assert tr["f_a"][-1, 0] == pytest.approx(-0.2 / 0.3, rel=1e-3)
    for name in ("q_r", "lambda", "e_f", "phi"):
        assert np.isnan(tr[name]).all()


def test_free_space_scheme_a_matches_oracle(cases):
    scn = cases["casestudy_free_space.json"]
    a, o = run_scheme_a(scn), run_direct_oracle(scn)
    rms = np.sqrt(np.mean((a["p_s"] - o["p_s"]) ** 2))
    assert rms < 1e-4 * 0.3
    np.testing.assert_array_equal(a.t, o.t)


def test_disturbance_identity_in_scheme_a(cases):
    # e_f = f_a - lambda equals -Mc_s edd_p with edd_p = pdd_r - a_tilde
    tr = run_scheme_a(cases["casestudy_disturbance.json"])
    ef = tr["e_f"][:, 0]
    assert np.abs(ef).max() > 0.05
    np.testing.assert_allclose(ef, -tr["Mc_s"][:, 0] * tr["edd_p"][:, 0], atol=1e-12)


def test_scheme_b_constant_disturbance_offset(cases):
    # steady Phi = d / (Mc_r G_p) for a constant tip force in free space
    scn = replace(cases["casestudy_disturbance.json"], disturbance=DisturbanceSpec("constant", (0.1,)), duration=3.0)
    tr = run_scheme_b(scn)
    Mc_r = 0.05 / 0.09
    assert tr["phi"][-1, 0] == pytest.approx(0.1 / (Mc_r * 50.0), rel=1e-4)


def test_trace_layout(cases):
    scn = replace(cases["casestudy_free_space.json"], duration=0.01, record_every=2)
    tr = run(scn)
    assert len(tr.t) == 51
    assert tr.h == pytest.approx(2e-4)
    cols = tr.columns()
    assert cols[:4] == ["t", "q_r1", "qd_r1", "q_s1"]
    assert tr.rows().shape == (51, len(cols))
    assert set(CHANNELS) <= set(tr.channels)


def test_integration_error_reports_step(cases):
    scn = replace(cases["casestudy_free_space.json"], gains=ControllerGains(1e12, 1e6), h=1e-2, duration=5.0)
    with pytest.raises(IntegrationError) as exc:
        run(scn)
    assert exc.value.step > 0
    assert exc.value.t == pytest.approx(exc.value.step * 1e-2)


def test_with_axis(cases):
    scn = cases["casestudy_sweep.json"]
    for value in (1.0, 2.5, 6.0):
        assert inertia_ratio_eigs(with_axis(scn, "inertia_ratio", value))[-1] == pytest.approx(value, rel=1e-12)
    # rescaling is relative to the unscaled emulator, not cumulative
    twice = with_axis(with_axis(scn, "inertia_ratio", 3.0), "inertia_ratio", 2.0)
    assert inertia_ratio_eigs(twice)[-1] == pytest.approx(2.0)
    assert with_axis(scn, "omega_p", 20.0).gains.omega_p == pytest.approx(20.0)
    assert with_axis(scn, "omega_a", 40.0).actuator.omega_a == 40.0
    assert with_axis(scn, "k_e", 5e3).environment.k_e == 5e3
    assert with_axis(scn, "disturbance_amplitude", 0.2).disturbance.amplitude == (0.2,)
    assert inertia_ratio_eigs(with_axis(scn, "mass_scale", 2.0))[-1] == pytest.approx(inertia_ratio_eigs(scn)[-1] / 2)
    with pytest.raises(ConfigError):
        with_axis(scn, "gravity", 1.0)
    with pytest.raises(ConfigError):
        with_axis(scn, "inertia_ratio", 0.0)
    assert "inertia_ratio" in AXES


def test_dominant_frequency():
    t = np.arange(0, 4, 1e-3)
    assert dominant_frequency(t, np.sin(7.0 * t) + 0.3) == pytest.approx(7.0, rel=1e-3)


def test_sweep_keeps_value_order_in_parallel(cases):
    scn = replace(cases["casestudy_sweep.json"], duration=0.3)
    values = [4.0, 1.0, 2.0]
    serial = sweep(scn, "inertia_ratio", values)
    parallel = sweep(scn, "inertia_ratio", values, jobs=2)
    assert [r.value for r in serial] == values
    assert serial == parallel
    with pytest.raises(ConfigError):
        sweep(scn, "gravity", [1.0])


def test_summarize_contact_case(cases):
    tr = run(cases["casestudy_1dof.json"])
    row = summarize(tr, 0.0)
    assert row.verdict == "bounded"
    # the resolved-rate press settles on its own static force
    assert tr.norm("f_a")[-1] == pytest.approx(abs(fma_press_force(0.05, 2.0, 0.5, 0.05)), rel=5e-3)
    assert row.steady_ef < 1e-6


def _phasor(t, x, w):
    A = np.column_stack([np.sin(w * t), np.cos(w * t), np.ones_like(t)])
    c = np.linalg.lstsq(A, x, rcond=None)[0]
    return c[0] + 1j * c[1]


@pytest.mark.parametrize("omega", [3.0, 7.0, 15.0])
def test_contact_force_follows_transmissivity(cases, omega):
    from roboemu import freq

    base = cases["casestudy_sweep.json"]
    scn = replace(base, e_p0=(), duration=8.0,
                  target_controller=TargetController(tau0=(0.2,), amplitude=(0.05,), omega=omega))
    tr = run(scn)
    late = tr.t >= 4.0
    ratio = _phasor(tr.t[late], tr["f_a"][late, 0], omega) / _phasor(tr.t[late], tr["lambda"][late, 0], omega)
    T = freq.transmissivity(inertia_ratio_eigs(base)[-1], base.actuator.omega_a, base.gains).at(omega)
    assert abs(ratio) == pytest.approx(abs(T), rel=0.02)
