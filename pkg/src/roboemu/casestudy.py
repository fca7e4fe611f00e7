"""Canonical 1-DOF flexible-joint case-study scenarios.

The target is a single elastic-joint link (link inertia 0.05, drive inertia
0.1 kg m^2, arm 0.3 m, joint stiffness 3 Nm/rad, joint damping 0.1 Nm s/rad)
emulated by a rigid link (inertia 0.05 kg m^2, viscous friction
0.022 Nm s/rad, peak gravity torque 0.5 Nm).
"""

from __future__ import annotations

import copy

from .config import ScenarioConfig

TARGET_PARAMS = {"m_s1": 0.05, "m_s2": 0.1, "l": 0.3, "k": 3.0, "zeta": 0.1}
EMULATOR_PARAMS = {"m_r": 0.05, "c_r": 0.022, "w": 0.5, "l": 0.3}

WALL = 0.03
K_E = 1e4
PRESS_TORQUE = 0.2


def press_equilibrium(tau0: float = PRESS_TORQUE, wall: float = WALL, k_e: float = K_E) -> list[float]:
    """``(link, motor)`` angles at rest against the wall under motor torque ``tau0``."""
    l, k = TARGET_PARAMS["l"], TARGET_PARAMS["k"]
    force = tau0 / l
    q1 = (wall + force / k_e) / l
    return [q1, q1 + tau0 / k]


def fma_press_force(setpoint: float, k_pos: float, k_vel: float, k_fma: float,
                    wall: float = WALL, k_e: float = K_E) -> float:
    """Steady contact force of the resolved-rate/FMA loop holding the link on the wall.

    At rest the drive torque ``k_vel v / l`` balances the spring, which
    balances ``-l f``; ``v = k_pos (setpoint - p) + k_fma f`` with
    ``p = wall - f / k_e``. Assumes the velocity command is not saturated.
    """
    l = TARGET_PARAMS["l"]
    a = k_vel / l
    return -a * k_pos * (setpoint - wall) / (l + a * k_fma + a * k_pos / k_e)


def _base(output: str) -> dict:
    return {
        "models": {
            "emulator": {"id": "one_link", "params": dict(EMULATOR_PARAMS)},
            "target": {"id": "flexible_joint_1dof", "params": dict(TARGET_PARAMS)},
        },
        "scheme": "A",
        "gains": {"G_p": 50.0, "G_v": 10.0, "G_f": 0.0},
        "actuator": {"mode": "ideal", "omega_a": 25.0},
        "duration": 5.0,
        "h": 1e-4,
        "seed": 0,
        "output": output,
    }


def free_space() -> dict:
    """Open-loop sinusoidal drive torque, no wall."""
    cfg = _base("free_space.csv")
    cfg["target_controller"] = {"mode": "open_loop", "amplitude": [0.2], "omega": 3.0}
    return cfg


def contact_press() -> dict:
    """Resolved-rate approach toward a setpoint behind the wall, with FMA."""
    cfg = _base("contact_press.csv")
    cfg["environment"] = {"positions": [WALL], "sides": [1], "k_e": K_E, "b_e": 20.0}
    rr = {"setpoint": 0.05, "k_pos": 2.0, "k_vel": 0.5, "k_fma": 0.05}
    cfg["target_controller"] = {
        "mode": "resolved_rate", "setpoint": [rr["setpoint"]], "k_pos": rr["k_pos"], "v_max": 0.1,
        "k_vel": rr["k_vel"], "k_fma": rr["k_fma"],
    }
    cfg["static_force"] = abs(fma_press_force(**rr))
    return cfg


def disturbance_study() -> dict:
    """Free space, target at rest, sinusoidal force disturbance at ``3 omega_p``."""
    cfg = _base("disturbance.csv")
    cfg["disturbance"] = {"kind": "sinusoid", "amplitude": [0.1], "omega": 30.0}
    return cfg


def stability_sweep() -> dict:
    """Pressed against the wall at rest, lagging actuator, small pose kick.

    Meant for ``sweep --axis inertia_ratio``; with ``omega_a = 25`` and
    ``omega_p = 10`` the contact loses stability above an inertia ratio of 5.
    """
    cfg = _base("stability_sweep.csv")
    cfg["actuator"] = {"mode": "lag", "omega_a": 25.0}
    cfg["environment"] = {"positions": [WALL], "sides": [1], "k_e": K_E, "b_e": 20.0}
    cfg["target_controller"] = {"mode": "open_loop", "tau0": [PRESS_TORQUE]}
    cfg["initial"] = {"q_s": press_equilibrium(), "e_p": [1e-3]}
    cfg["record_every"] = 10
    return cfg


CASES = {
    "casestudy_free_space.json": free_space,
    "casestudy_1dof.json": contact_press,
    "casestudy_disturbance.json": disturbance_study,
    "casestudy_sweep.json": stability_sweep,
}


def configs() -> dict[str, ScenarioConfig]:
    return {name: ScenarioConfig.from_dict(copy.deepcopy(make())) for name, make in CASES.items()}
