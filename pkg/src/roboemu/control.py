"""Torque laws for the emulating robot and the actuator lag model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .dynamics import Dynamics, rk4_step
from .errors import ConfigError, SingularConfigurationError


@dataclass(frozen=True)
class ControllerGains:
    """Diagonal gains ``G_v = k_v I``, ``G_p = k_p I``, ``G_f = k_f I``."""

    k_p: float = 50.0
    k_v: float = 10.0
    k_f: float = 0.0

    def __post_init__(self):
        if not self.k_p > 0:
            raise ConfigError("gains.G_p", f"must be positive, got {self.k_p}")
        if not self.k_v > 0:
            raise ConfigError("gains.G_v", f"must be positive, got {self.k_v}")
        if not self.k_f >= 0:
            raise ConfigError("gains.G_f", f"must be nonnegative, got {self.k_f}")

    @property
    def omega_p(self) -> float:
        """Controller bandwidth ``2 G_p / G_v``."""
        return 2.0 * self.k_p / self.k_v

    @property
    def error_poles(self) -> np.ndarray:
        return np.roots([1.0, self.k_v, self.k_p])

    @property
    def resonant(self) -> bool:
        """True when ``s^2 / (s^2 + k_v s + k_p)`` peaks above one."""
        return self.k_v**2 < 2.0 * self.k_p


def force_gain_bound(k_v: float, mdot_max: float) -> float:
    """Largest admissible force-feedback gain, ``2 G_v / lmax(dM_s/dt)``."""
    if mdot_max <= 0:
        return np.inf
    return 2.0 * k_v / mdot_max


def validate_force_gain(gains: ControllerGains, mdot_max: float) -> None:
    bound = force_gain_bound(gains.k_v, mdot_max)
    if gains.k_f >= bound:
        raise ConfigError("gains.G_f", f"{gains.k_f} exceeds the stability bound {bound:.6g}")


@dataclass
class ControllerState:
    """Drift integrators and the latest emitted channels of one run."""

    v_ref: np.ndarray
    p_ref: np.ndarray
    a_tilde: np.ndarray | None = None
    e_p: np.ndarray | None = None
    ed_p: np.ndarray | None = None
    edd_p: np.ndarray | None = None
    e_f: np.ndarray | None = None
    tau_cmd: np.ndarray | None = None

    @classmethod
    def consistent(cls, p_r, pd_r) -> "ControllerState":
        """Start the integrators on the measured pose so ``e_p = ed_p = 0``."""
        return cls(v_ref=np.array(pd_r, dtype=float), p_ref=np.array(p_r, dtype=float))

    def reset(self) -> None:
        n = self.v_ref.shape[0]
        self.v_ref = np.zeros(n)
        self.p_ref = np.zeros(n)
        self.a_tilde = self.e_p = self.ed_p = self.edd_p = self.e_f = self.tau_cmd = None


def estimated_accel(dyn_s: Dynamics, B: np.ndarray, qd_s, tau_s, f_a) -> np.ndarray:
    """Target pose acceleration from the unconstrained model under ``f_a``.

    ``J_s M_s^-1 (B tau_s - h_s + J_s^T f_a) + Jdot_s qd_s``
    """
    rhs = B @ tau_s - dyn_s.h + dyn_s.J.T @ f_a
    return dyn_s.J @ la.solve(dyn_s.M, rhs) + dyn_s.Jdot @ qd_s


def _inv_J(J: np.ndarray) -> np.ndarray:
    try:
        return la.inv(J)
    except np.linalg.LinAlgError as exc:
        raise SingularConfigurationError("emulating-robot Jacobian is singular") from exc


def cartesian_inertia_fast(M: np.ndarray, J: np.ndarray) -> np.ndarray:
    return la.inv(J @ la.solve(M, J.T))


def base_torque_law(dyn_r: Dynamics, qd_r, dyn_s: Dynamics, qd_s, B, tau_s, f_a) -> np.ndarray:
    """Computed-torque law that equates the contact force with the multiplier.

    ``h_r + M_r J_r^-1 (J_s M_s^-1 (B tau_s - h_s) + Jdot_s qd_s - Jdot_r qd_r)
    - J_r^T (I - Mc_r Mc_s^-1) f_a``
    """
    Jr_inv = _inv_J(dyn_r.J)
    a_free = dyn_s.J @ la.solve(dyn_s.M, B @ tau_s - dyn_s.h) + dyn_s.Jdot @ qd_s
    Mc_r = cartesian_inertia_fast(dyn_r.M, dyn_r.J)
    Mc_s = cartesian_inertia_fast(dyn_s.M, dyn_s.J)
    n = len(f_a)
    feedback = dyn_r.J.T @ ((np.eye(n) - Mc_r @ la.inv(Mc_s)) @ f_a)
    return dyn_r.h + dyn_r.M @ (Jr_inv @ (a_free - dyn_r.Jdot @ qd_r)) - feedback


def auxiliary_input(a_tilde, e_p, ed_p, gains: ControllerGains, ef_hat=None) -> np.ndarray:
    u = a_tilde - gains.k_v * ed_p - gains.k_p * e_p
    if ef_hat is not None and gains.k_f:
        u = u - gains.k_f * ef_hat
    return u


def torque_from_aux(dyn_r: Dynamics, qd_r, f_a, u) -> np.ndarray:
    """``h_r - M_r J_r^-1 Jdot_r qd_r - J_r^T f_a + M_r J_r^-1 u``."""
    Jr_inv = _inv_J(dyn_r.J)
    return dyn_r.h + dyn_r.M @ (Jr_inv @ (u - dyn_r.Jdot @ qd_r)) - dyn_r.J.T @ f_a


def drift_compensated_law(
    dyn_r: Dynamics,
    qd_r,
    dyn_s: Dynamics,
    qd_s,
    B,
    tau_s,
    f_a,
    gains: ControllerGains,
    state: ControllerState,
) -> np.ndarray:
    """Computed torque with the drift-compensating auxiliary input.

    The pose error is measured against the double integral of the estimated
    target acceleration held in ``state``. The term the torque law writes
    as ``-J_r^T f_r`` is the measured contact force ``f_a``.
    """
    a = estimated_accel(dyn_s, B, qd_s, tau_s, f_a)
    e_p = dyn_r.p - state.p_ref
    ed_p = dyn_r.J @ qd_r - state.v_ref
    tau = torque_from_aux(dyn_r, qd_r, f_a, auxiliary_input(a, e_p, ed_p, gains))
    state.a_tilde, state.e_p, state.ed_p, state.tau_cmd = a, e_p, ed_p, tau
    return tau


def force_feedback_law(
    dyn_r: Dynamics,
    qd_r,
    dyn_s: Dynamics,
    qd_s,
    B,
    tau_s,
    f_a,
    gains: ControllerGains,
    state: ControllerState,
    edd_p,
) -> np.ndarray:
    """Drift-compensated law with ``-G_f e_f`` added to the auxiliary input.

    The force error is estimated as ``Mc_s edd_p`` from a pose-acceleration
    error estimate, which yields ``(I + Mc_s G_f) edd_p + G_v ed_p + G_p e_p = 0``.
    """
    a = estimated_accel(dyn_s, B, qd_s, tau_s, f_a)
    e_p = dyn_r.p - state.p_ref
    ed_p = dyn_r.J @ qd_r - state.v_ref
    ef_hat = cartesian_inertia_fast(dyn_s.M, dyn_s.J) @ np.asarray(edd_p, dtype=float)
    tau = torque_from_aux(dyn_r, qd_r, f_a, auxiliary_input(a, e_p, ed_p, gains, ef_hat))
    state.a_tilde, state.e_p, state.ed_p, state.edd_p, state.e_f, state.tau_cmd = a, e_p, ed_p, edd_p, ef_hat, tau
    return tau


@dataclass(frozen=True)
class ActuatorModel:
    """``ideal`` passes the command through; ``lag`` is ``1 / (1 + s / omega_a)``."""

    mode: str = "ideal"
    omega_a: float = 25.0

    def __post_init__(self):
        if self.mode not in ("ideal", "lag"):
            raise ConfigError("actuator.mode", f"unknown mode {self.mode!r}")
        if not self.omega_a > 0:
            raise ConfigError("actuator.omega_a", f"must be positive, got {self.omega_a}")

    @property
    def stateful(self) -> bool:
        return self.mode == "lag"

    def rate(self, tau, tau_cmd) -> np.ndarray:
        return self.omega_a * (tau_cmd - tau)


def actuator_step(actuator: ActuatorModel, tau, tau_cmd, h: float) -> np.ndarray:
    """Advance the actuator torque over one step with the command held."""
    tau_cmd = np.asarray(tau_cmd, dtype=float)
    if not actuator.stateful:
        return tau_cmd.copy()
    return rk4_step(lambda t, y: actuator.rate(y, tau_cmd), 0.0, np.asarray(tau, dtype=float), h)
