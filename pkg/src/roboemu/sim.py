"""Hybrid-simulation runs.

``run_scheme_a``
    The target is a rheonomically constrained DAE: its pose is slaved to the
    emulating robot, its self-motion is integrated from the reduced dynamics,
    and the controller drives the contact force toward the multiplier.
``run_scheme_b``
    The target is an unconstrained ODE driven by the measured contact force;
    the controller makes the emulating robot follow the target's pose.
``run_direct_oracle``
    The target robot touches the wall itself, with no emulation layer.

All three share the environment, the disturbance injector and the target
robot's own controller, and record the same :class:`SimTrace` channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from . import linalg as la
from .control import ActuatorModel, ControllerGains
from .dynamics import RigidModel, ScaledInertia, TargetModel
from .errors import ConfigError, IntegrationError
from .kinematics import ClikConfig, NewtonRaphsonConfig, newton_raphson_correct


@dataclass(frozen=True)
class Environment:
    """Unilateral spring-damper walls, one optional wall per task axis.

    ``positions[i]`` is the wall location on axis ``i`` (``None``: free axis);
    ``sides[i] = +1`` blocks motion toward ``+inf``, ``-1`` toward ``-inf``.
    """

    positions: tuple = ()
    sides: tuple = ()
    k_e: float = 1e4
    b_e: float = 20.0

    def __post_init__(self):
        if not self.k_e > 0:
            raise ConfigError("environment.k_e", f"must be positive, got {self.k_e}")
        if not self.b_e >= 0:
            raise ConfigError("environment.b_e", f"must be nonnegative, got {self.b_e}")
        if self.sides and len(self.sides) != len(self.positions):
            raise ConfigError("environment.sides", "length must match environment.positions")

    def _axes(self, n: int):
        pos = tuple(self.positions) + (None,) * (n - len(self.positions))
        on = np.array([0.0 if p is None else 1.0 for p in pos[:n]])
        at = np.array([0.0 if p is None else float(p) for p in pos[:n]])
        side = np.array([float(v) for v in (tuple(self.sides) or (1.0,) * n)][:n])
        return on, at, side

    def penetration(self, p) -> np.ndarray:
        """``delta`` per axis, positive inside the wall, zero on free axes."""
        p = np.asarray(p, dtype=float)
        on, at, side = self._axes(len(p))
        return on * side * (p - at)

    def force(self, p, pd) -> np.ndarray:
        p = np.ascontiguousarray(p, dtype=float)
        on, at, side = self._axes(len(p))
        return kernels.wall_force(on, at, side, float(self.k_e), float(self.b_e), p, np.ascontiguousarray(pd, dtype=float))


@dataclass(frozen=True)
class DisturbanceSpec:
    """Generalized force ``d(t)`` added at the emulating robot's tip.

    Enters as ``M_r qdd_r + h_r = tau_r + J_r^T (f_a + d)``. ``noise`` is a
    seeded sum of random-phase sinusoids below ``bandwidth`` rad/s, scaled to
    RMS ``amplitude``; it is a fixed function of time.
    """

    kind: str = "zero"
    amplitude: tuple = ()
    omega: float = 0.0
    bandwidth: float = 50.0
    seed: int = 0
    components: int = 64
    t_on: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "sinusoid", "noise"):
            raise ConfigError("disturbance.kind", f"unknown kind {self.kind!r}")
        if self.kind != "zero" and not len(self.amplitude):
            raise ConfigError("disturbance.amplitude", f"required for kind {self.kind!r}")
        if self.kind == "noise" and not (self.bandwidth > 0 and self.components > 0):
            raise ConfigError("disturbance.bandwidth", "noise needs a positive bandwidth and component count")
        if self.kind == "noise":
            rng = np.random.default_rng(self.seed)
            freqs = rng.uniform(0.0, self.bandwidth, self.components)
            phases = rng.uniform(0.0, 2.0 * np.pi, (self.components, max(1, len(self.amplitude))))
            object.__setattr__(self, "_freqs", freqs)
            object.__setattr__(self, "_phases", phases)

    def kernel_args(self, n: int) -> tuple:
        kind = ("zero", "constant", "sinusoid", "noise").index(self.kind)
        amp = np.asarray(self.amplitude if len(self.amplitude) else 0.0, dtype=float)
        amp = np.ascontiguousarray(np.broadcast_to(amp, (n,)))
        if self.kind == "noise":
            freqs, phases = self._freqs, self._phases
        else:
            freqs, phases = np.zeros(0), np.zeros((0, 1))
        return kind, amp, float(self.omega), float(self.t_on), freqs, np.ascontiguousarray(phases)

    def value(self, t: float, n: int) -> np.ndarray:
        return kernels.signal(*self.kernel_args(n), float(t))


@dataclass(frozen=True)
class TargetController:
    """The target robot's own controller, producing ``tau_s``.

    ``open_loop``: ``tau0 + amplitude sin(omega t)`` from ``t_on`` on.
    ``resolved_rate``: tip velocity command ``sat(k_pos (setpoint - p), v_max)
    + k_fma f`` mapped to actuator rates and tracked by ``tau = k_vel (qd_cmd
    - qd_act)``; ``k_fma`` is the force-accommodation gain.
    """

    mode: str = "open_loop"
    tau0: tuple = ()
    amplitude: tuple = ()
    omega: float = 0.0
    t_on: float = 0.0
    setpoint: tuple = ()
    k_pos: float = 2.0
    v_max: float = 0.1
    k_vel: float = 0.5
    k_fma: float = 0.0

    def __post_init__(self):
        if self.mode not in ("open_loop", "resolved_rate"):
            raise ConfigError("target_controller.mode", f"unknown mode {self.mode!r}")
        if self.mode == "resolved_rate" and not self.setpoint:
            raise ConfigError("target_controller.setpoint", "required for resolved_rate mode")

    def static_force(self, target: TargetModel, q_s) -> float:
        """Contact force that balances the initial open-loop torque at rest."""
        if self.mode != "open_loop" or not self.tau0:
            return 0.0
        Ja = target.drive_jacobian(np.asarray(q_s, float))
        return float(np.linalg.norm(la.solve(Ja.T, np.asarray(self.tau0, float))))


@dataclass(frozen=True)
class Scenario:
    """Everything one run needs; built from a ``ScenarioConfig``."""

    rigid: RigidModel
    target: TargetModel
    gains: ControllerGains = ControllerGains()
    actuator: ActuatorModel = ActuatorModel()
    environment: Environment = Environment()
    disturbance: DisturbanceSpec = DisturbanceSpec()
    target_controller: TargetController = TargetController()
    q_s0: tuple = ()
    qd_s0: tuple = ()
    q_r_guess: tuple = ()
    e_p0: tuple = ()
    ed_p0: tuple = ()
    duration: float = 5.0
    h: float = 1e-4
    seed: int = 0
    scheme: str = "A"
    correction: str = "clik"
    clik: ClikConfig = ClikConfig(K=1000.0, feedforward=True)
    newton: NewtonRaphsonConfig = NewtonRaphsonConfig()
    static_force: float | None = None
    accel_noise: DisturbanceSpec = DisturbanceSpec()
    record_every: int = 1

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError("h", f"step must be positive, got {self.h}")
        if not self.duration > 0:
            raise ConfigError("duration", f"must be positive, got {self.duration}")
        if self.scheme not in ("A", "B", "oracle"):
            raise ConfigError("scheme", f"unknown scheme {self.scheme!r}")
        if self.correction not in ("clik", "newton"):
            raise ConfigError("correction", f"unknown correction {self.correction!r}")
        if self.rigid.n != self.target.n:
            raise ConfigError("models", "emulator and target pose dimensions differ")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.h))

    def reference_force(self) -> float:
        if self.static_force is not None:
            return float(self.static_force)
        ref = self.target_controller.static_force(self.target, self.initial_target()[0])
        return ref if ref > 0 else 1.0

    def initial_target(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.target.dof
        q = np.zeros(m) if not self.q_s0 else np.asarray(self.q_s0, float)
        qd = np.zeros(m) if not self.qd_s0 else np.asarray(self.qd_s0, float)
        return q, qd

    def initial_rigid(self) -> tuple[np.ndarray, np.ndarray]:
        """Emulator state with the same tip pose and tip velocity as the target."""
        q_s, qd_s = self.initial_target()
        p_s = self.target.pose(q_s)
        pd_s = self.target.jacobian(q_s) @ qd_s
        guess = np.asarray(self.q_r_guess, float) if self.q_r_guess else np.zeros(self.rigid.dof)
        q_r = newton_raphson_correct(_AsTarget(self.rigid), guess, p_s, _IK).q
        qd_r = la.solve(self.rigid.jacobian(q_r), pd_s)
        return q_r, qd_r


_IK = NewtonRaphsonConfig(1e-13, 50)


class _AsTarget:
    """Minimal adapter so Newton-Raphson can solve the emulator's own IK."""

    def __init__(self, model):
        self.model = model
        self.dof = model.dof

    def evaluate(self, q, qd):
        return self.model.evaluate(q, qd)


CHANNELS = (
    "q_r", "qd_r", "q_s", "qd_s", "xi", "p_r", "p_s", "phi", "f", "f_a",
    "lambda", "e_p", "e_f", "tau_s", "tau_r_cmd", "tau_r",
)
EXTRA_CHANNELS = ("edd_p", "a_tilde", "d", "Mc_s")


@dataclass
class SimTrace:
    """Per-step record of a run; ``channels[name]`` is ``(steps, width)``."""

    scheme: str
    t: np.ndarray
    channels: dict
    extra: dict = field(default_factory=dict)
    reference_force: float = 1.0

    def __getitem__(self, name: str) -> np.ndarray:
        if name in self.channels:
            return self.channels[name]
        return self.extra[name]

    def columns(self) -> list[str]:
        cols = ["t"]
        for name in CHANNELS:
            width = self.channels[name].shape[1]
            cols += [f"{name}{i + 1}" for i in range(width)]
        return cols

    def rows(self) -> np.ndarray:
        return np.column_stack([self.t] + [self.channels[name] for name in CHANNELS])

    def norm(self, name: str) -> np.ndarray:
        return np.linalg.norm(self[name], axis=1)

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0


def _widths(scn: Scenario) -> dict:
    n, m = scn.target.n, scn.target.dof
    k = scn.rigid.dof
    return {
        "q_r": k, "qd_r": k, "q_s": m, "qd_s": m, "xi": m - n, "p_r": n, "p_s": n,
        "phi": n, "f": n, "f_a": n, "lambda": n, "e_p": n, "e_f": n, "tau_s": n,
        "tau_r_cmd": k, "tau_r": k, "edd_p": n, "a_tilde": n, "d": n, "Mc_s": n * n,
    }


def _arr(values, n=None) -> np.ndarray:
    a = np.zeros(0) if values is None or (hasattr(values, "__len__") and len(values) == 0) else values
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if n is not None:
        a = np.ascontiguousarray(np.broadcast_to(a if a.size else np.zeros(1), (n,)))
    return np.ascontiguousarray(a)


def _kernel_model(model, role: str):
    try:
        return int(model.kernel_id), np.ascontiguousarray(model.kernel_params, dtype=float)
    except AttributeError:
        raise ConfigError("models", f"{role} model {model!r} has no compiled kernel") from None


def context(scn: Scenario) -> kernels.Ctx:
    """Flatten a scenario into the tuple consumed by the compiled kernels."""
    rigid, target = scn.rigid, scn.target
    n, m, k = target.n, target.dof, rigid.dof
    rid, rprm = _kernel_model(rigid, "emulator")
    tid, tprm = _kernel_model(target, "target")
    P = np.ascontiguousarray(target.nullspace(np.zeros(m)), dtype=float).reshape(m, m - n)
    env, dist, noise, tc = scn.environment, scn.disturbance, scn.accel_noise, scn.target_controller
    on, at, side = env._axes(n)
    return kernels.Ctx(
        rid, rprm, tid, tprm, k, m, n, m - n,
        np.ascontiguousarray(target.B, dtype=float), P,
        np.ascontiguousarray(target.drive_selection, dtype=float),
        float(scn.gains.k_p), float(scn.gains.k_v), float(scn.gains.k_f),
        bool(scn.actuator.stateful), float(scn.actuator.omega_a),
        on, at, side,
        float(env.k_e), float(env.b_e),
        *dist.kernel_args(n),
        *noise.kernel_args(n),
        0 if tc.mode == "open_loop" else 1,
        _arr(tc.tau0, n), _arr(tc.amplitude, n), float(tc.omega), float(tc.t_on),
        _arr(tc.setpoint, n), float(tc.k_pos), float(tc.v_max), float(tc.k_vel), float(tc.k_fma),
        scn.correction == "clik", np.ascontiguousarray(scn.clik.gain(n)), bool(scn.clik.feedforward),
        float(scn.newton.tol), int(scn.newton.max_iter),
    )


SCHEMES = {"A": kernels.SCHEME_A, "B": kernels.SCHEME_B, "oracle": kernels.ORACLE}


def derivative(scn: Scenario, scheme: str, t: float, z) -> tuple[np.ndarray, dict]:
    """Right-hand side and recorded channels at one state (for inspection and tests)."""
    widths = _widths(scn)
    row = np.full(sum(widths.values()), np.nan)
    dz = kernels.rhs(SCHEMES[scheme], float(t), np.ascontiguousarray(z, dtype=float), context(scn), True, row)
    return dz, _unpack(row[None, :], widths)


def _unpack(rows: np.ndarray, widths: dict) -> dict:
    out, col = {}, 0
    for name in CHANNELS + EXTRA_CHANNELS:
        out[name] = rows[:, col : col + widths[name]]
        col += widths[name]
    return out


def initial_state(scn: Scenario, scheme: str) -> np.ndarray:
    """Consistent initial state vector for ``scheme``.

    Both robots start at the same tip pose and tip velocity; the drift
    integrators start on the measured pose unless ``e_p0``/``ed_p0`` ask for
    an offset, and a lagging actuator starts at the initial command.
    """
    n = scn.target.n
    q_s0, qd_s0 = scn.initial_target()
    if scheme == "oracle":
        return np.concatenate((q_s0, qd_s0))
    q_r0, qd_r0 = scn.initial_rigid()
    na = scn.rigid.dof if scn.actuator.stateful else 0
    if scheme == "A":
        xi0 = scn.target.nullspace(q_s0).T @ qd_s0
        p_ref0 = scn.rigid.pose(q_r0) - _vec(scn.e_p0, n)
        v_ref0 = scn.rigid.jacobian(q_r0) @ qd_r0 - _vec(scn.ed_p0, n)
        z0 = np.concatenate((q_r0, qd_r0, q_s0, xi0, v_ref0, p_ref0, np.zeros(na)))
    else:
        if scn.e_p0 or scn.ed_p0:
            # offset the emulator so that e_p(0), ed_p(0) match the request
            p_target = scn.rigid.pose(q_r0) + _vec(scn.e_p0, n)
            q_r0 = newton_raphson_correct(_AsTarget(scn.rigid), q_r0, p_target, _IK).q
            pd_target = scn.target.jacobian(q_s0) @ qd_s0 + _vec(scn.ed_p0, n)
            qd_r0 = la.solve(scn.rigid.jacobian(q_r0), pd_target)
        z0 = np.concatenate((q_r0, qd_r0, q_s0, qd_s0, np.zeros(na)))
    if na:
        # with force feedback the command depends on the applied torque
        for _ in range(50):
            _, rec = derivative(scn, scheme, 0.0, z0)
            tau = rec["tau_r_cmd"][0]
            if np.allclose(tau, z0[-na:], rtol=1e-14, atol=1e-14):
                break
            z0[-na:] = tau
    return z0


def _vec(values, n) -> np.ndarray:
    return np.zeros(n) if not values else np.asarray(values, float).reshape(n)


_STATUS = {
    kernels.NON_FINITE: "non-finite state",
    kernels.CORRECTION_FAILED: "constraint correction did not converge",
    kernels.SINGULAR: "singular configuration or non-finite intermediate",
}


def run(scn: Scenario, scheme: str | None = None) -> SimTrace:
    """Integrate ``scn`` under ``scheme`` (default ``scn.scheme``)."""
    scheme = scn.scheme if scheme is None else scheme
    if scheme not in SCHEMES:
        raise ConfigError("scheme", f"unknown scheme {scheme!r}")
    z0 = initial_state(scn, scheme)
    widths = _widths(scn)
    every = max(1, int(scn.record_every))
    steps = scn.steps
    n_rows = steps // every + 1
    t_out = np.empty(n_rows)
    rows = np.full((n_rows, sum(widths.values())), np.nan)
    status, step, nrec, _ = kernels.integrate(
        SCHEMES[scheme], context(scn), z0, float(scn.h), steps, every, t_out, rows
    )
    if status != kernels.OK:
        raise IntegrationError(_STATUS[status], step=int(step), t=step * scn.h)
    channels = _unpack(rows[:nrec], widths)
    return SimTrace(
        scheme,
        t_out[:nrec].copy(),
        {name: channels[name] for name in CHANNELS},
        {name: channels[name] for name in EXTRA_CHANNELS},
        scn.reference_force(),
    )


def run_scheme_a(scn: Scenario) -> SimTrace:
    """Emulation with the target rheonomically constrained to the emulator.

    Per step the emulator command, the actuator, the emulator motion, the
    reduced (null-space) target dynamics and the CLIK or Newton-Raphson
    correction of ``q_s`` are advanced together; the multiplier is recorded.
    """
    return run(scn, "A")


def run_scheme_b(scn: Scenario) -> SimTrace:
    """Emulation with the target integrated as an ODE under the measured force."""
    return run(scn, "B")


def run_direct_oracle(scn: Scenario) -> SimTrace:
    """The target robot in direct contact with the wall, no emulation.

    Emulation channels (``q_r``, ``lambda``, ``e_f``, ...) are NaN.
    """
    return run(scn, "oracle")


def inertia_ratio_eigs(scn: Scenario) -> np.ndarray:
    """Eigenvalues of ``Q = Mc_s Mc_r^-1`` at the initial configuration."""
    from .constrained import cartesian_inertia, inertia_ratio

    q_s, _ = scn.initial_target()
    q_r, _ = scn.initial_rigid()
    dyn_s = scn.target.evaluate(q_s, np.zeros_like(q_s))
    dyn_r = scn.rigid.evaluate(q_r, np.zeros_like(q_r))
    return inertia_ratio(cartesian_inertia(dyn_s.M, dyn_s.J), cartesian_inertia(dyn_r.M, dyn_r.J))[1]


AXES = ("inertia_ratio", "mass_scale", "omega_a", "omega_p", "k_e", "disturbance_amplitude")


def with_axis(scn: Scenario, axis: str, value: float) -> Scenario:
    """Copy of ``scn`` with one sweep parameter set to ``value``.

    ``inertia_ratio`` rescales the emulator inertia so that ``lmax(Q)``
    equals ``value``; ``omega_p`` keeps ``G_v`` and sets ``G_p = omega_p G_v / 2``.
    """
    value = float(value)
    if axis == "inertia_ratio":
        if not value > 0:
            raise ConfigError("sweep.values", "inertia ratios must be positive")
        base = scn.rigid.base if isinstance(scn.rigid, ScaledInertia) else scn.rigid
        q_max = inertia_ratio_eigs(replace(scn, rigid=base))[-1]
        return replace(scn, rigid=ScaledInertia(base, q_max / value))
    if axis == "mass_scale":
        return replace(scn, rigid=ScaledInertia(scn.rigid, value))
    if axis == "omega_a":
        return replace(scn, actuator=replace(scn.actuator, omega_a=value))
    if axis == "omega_p":
        return replace(scn, gains=replace(scn.gains, k_p=0.5 * value * scn.gains.k_v))
    if axis == "k_e":
        return replace(scn, environment=replace(scn.environment, k_e=value))
    if axis == "disturbance_amplitude":
        n = scn.target.n
        return replace(scn, disturbance=replace(scn.disturbance, amplitude=(value,) * n))
    raise ConfigError("sweep.axis", f"unknown axis {axis!r}; expected one of {', '.join(AXES)}")


def dominant_frequency(t: np.ndarray, x: np.ndarray, max_samples: int = 4096, pad: int = 1 << 18) -> float:
    """Frequency (rad/s) of the largest spectral peak of ``x(t)``, mean removed.

    The signal is decimated to at most ``max_samples`` points, Hann-windowed
    and zero-padded so the peak is located well below the raw bin width.
    """
    x = np.asarray(x, dtype=float)
    step = max(1, len(x) // max_samples)
    x = x[::step]
    dt = float(t[step] - t[0]) if len(t) > step else 1.0
    x = (x - x.mean()) * np.hanning(len(x))
    spec = np.abs(np.fft.rfft(x, n=max(pad, len(x))))
    freqs = np.fft.rfftfreq(max(pad, len(x)), dt)
    return float(2.0 * np.pi * freqs[int(np.argmax(spec[1:])) + 1])


@dataclass(frozen=True)
class SweepRow:
    value: float
    verdict: str
    steady_phi: float
    steady_ef: float
    peak_force_ratio: float
    peak_T: float
    dominant_omega: float
    message: str = ""


DIVERGENCE_FACTOR = 100.0


def summarize(trace: SimTrace, value: float, tail: float = 0.2) -> SweepRow:
    """Sweep metrics of one trace; "steady" means the last ``tail`` fraction."""
    f = trace.norm("f_a")
    lam = trace.norm("lambda") if trace.scheme != "oracle" else f
    start = int(len(trace.t) * (1.0 - tail))
    peak_ratio = float(f.max() / trace.reference_force)
    diverging = peak_ratio > DIVERGENCE_FACTOR
    steady_phi = float(trace.norm("phi")[start:].max()) if trace.scheme != "oracle" else float("nan")
    steady_ef = float(trace.norm("e_f")[start:].max()) if trace.scheme != "oracle" else float("nan")
    half = len(trace.t) // 2
    return SweepRow(
        value=value,
        verdict="diverging" if diverging else "bounded",
        steady_phi=steady_phi,
        steady_ef=steady_ef,
        peak_force_ratio=peak_ratio,
        peak_T=float(f.max() / lam.max()) if lam.max() > 0 else float("nan"),
        dominant_omega=dominant_frequency(trace.t[half:], trace["f_a"][half:, 0]),
    )


def _sweep_one(args) -> SweepRow:
    scn, axis, value = args
    try:
        trace = run(with_axis(scn, axis, value))
    except IntegrationError as exc:
        nan = float("nan")
        return SweepRow(float(value), "diverging", nan, nan, float("inf"), nan, nan, str(exc))
    return summarize(trace, float(value))


def sweep(scn: Scenario, axis: str, values, jobs: int = 1) -> list[SweepRow]:
    """Run ``scn`` once per value of ``axis``; rows keep the order of ``values``.

    A run is "diverging" if ``|f_a|`` exceeds 100 times the static reference
    force or the state stops being finite.
    """
    if axis not in AXES:
        raise ConfigError("sweep.axis", f"unknown axis {axis!r}; expected one of {', '.join(AXES)}")
    tasks = [(scn, axis, float(v)) for v in values]
    if jobs <= 1 or len(tasks) <= 1:
        return [_sweep_one(task) for task in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_one, tasks))
