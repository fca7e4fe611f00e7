"""JSON scenario configuration.

A config is a JSON object with the fields of :class:`ScenarioConfig`::

    {
      "models": {"emulator": {"id": "one_link", "params": {}},
                 "target": {"id": "flexible_joint_1dof", "params": {}}},
      "scheme": "A",
      "gains": {"G_p": 50, "G_v": 10, "G_f": 0, "mdot_max": null},
      "actuator": {"mode": "ideal", "omega_a": 25},
      "environment": {"positions": [0.03], "sides": [1], "k_e": 1e4, "b_e": 20},
      "disturbance": {"kind": "zero", "amplitude": [], "omega": 0, ...},
      "target_controller": {"mode": "open_loop", "tau0": [0.2], ...},
      "initial": {"q_s": [], "qd_s": [], "q_r_guess": [], "e_p": [], "ed_p": []},
      "correction": {"method": "clik", "K": 1000, "feedforward": true, ...},
      "duration": 5, "h": 1e-4, "seed": 0, "record_every": 1,
      "static_force": null, "output": "trace.csv"
    }

Missing fields take the defaults below. Unknown fields are rejected.
Validation errors are :class:`ConfigError` naming the field, e.g. ``gains.G_p``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .control import ActuatorModel, ControllerGains, validate_force_gain
from .errors import ConfigError
from .kinematics import ClikConfig, NewtonRaphsonConfig
from .models import RIGID_MODELS, TARGET_MODELS, FlexibleJointArm, OneLinkArm, RigidAsTarget, build_rigid, build_target
from .sim import DisturbanceSpec, Environment, Scenario, TargetController


@dataclass
class ModelSpec:
    id: str
    params: dict = field(default_factory=dict)


@dataclass
class ModelsConfig:
    emulator: ModelSpec = field(default_factory=lambda: ModelSpec("one_link"))
    target: ModelSpec = field(default_factory=lambda: ModelSpec("flexible_joint_1dof"))


@dataclass
class GainsConfig:
    G_p: float = 50.0
    G_v: float = 10.0
    G_f: float = 0.0
    mdot_max: float | None = None


@dataclass
class ActuatorConfig:
    mode: str = "ideal"
    omega_a: float = 25.0


@dataclass
class EnvironmentConfig:
    positions: list = field(default_factory=list)
    sides: list = field(default_factory=list)
    k_e: float = 1e4
    b_e: float = 20.0


@dataclass
class DisturbanceConfig:
    kind: str = "zero"
    amplitude: list = field(default_factory=list)
    omega: float = 0.0
    bandwidth: float = 50.0
    components: int = 64
    t_on: float = 0.0


@dataclass
class TargetControllerConfig:
    mode: str = "open_loop"
    tau0: list = field(default_factory=list)
    amplitude: list = field(default_factory=list)
    omega: float = 0.0
    t_on: float = 0.0
    setpoint: list = field(default_factory=list)
    k_pos: float = 2.0
    v_max: float = 0.1
    k_vel: float = 0.5
    k_fma: float = 0.0


@dataclass
class InitialConfig:
    q_s: list = field(default_factory=list)
    qd_s: list = field(default_factory=list)
    q_r_guess: list = field(default_factory=list)
    e_p: list = field(default_factory=list)
    ed_p: list = field(default_factory=list)


@dataclass
class CorrectionConfig:
    method: str = "clik"
    K: float = 1000.0
    feedforward: bool = True
    tol: float = 1e-10
    max_iter: int = 20


@dataclass
class ScenarioConfig:
    models: ModelsConfig = field(default_factory=ModelsConfig)
    scheme: str = "A"
    gains: GainsConfig = field(default_factory=GainsConfig)
    actuator: ActuatorConfig = field(default_factory=ActuatorConfig)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    disturbance: DisturbanceConfig = field(default_factory=DisturbanceConfig)
    target_controller: TargetControllerConfig = field(default_factory=TargetControllerConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    correction: CorrectionConfig = field(default_factory=CorrectionConfig)
    duration: float = 5.0
    h: float = 1e-4
    seed: int = 0
    record_every: int = 1
    static_force: float | None = None
    output: str = "trace.csv"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        """Short hash of the canonical JSON, stamped into output headers."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return _parse(cls, data, "")

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
        return cls.from_json(text)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def build(self) -> Scenario:
        """Validate every field and assemble the runnable :class:`Scenario`."""
        return build_scenario(self)


_NESTED = {
    "models": ModelsConfig, "gains": GainsConfig, "actuator": ActuatorConfig,
    "environment": EnvironmentConfig, "disturbance": DisturbanceConfig,
    "target_controller": TargetControllerConfig, "initial": InitialConfig,
    "correction": CorrectionConfig, "emulator": ModelSpec, "target": ModelSpec,
}


def _parse(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", f"expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise ConfigError(path, "unknown field")
        sub = _NESTED.get(key)
        if sub is not None and cls is not ModelSpec:
            kwargs[key] = _parse(sub, value, path)
        else:
            kwargs[key] = value
    if cls is ModelSpec and "id" not in kwargs:
        raise ConfigError(f"{prefix}.id", "model id is required")
    return cls(**kwargs)


def _number(value, path: str, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigError(path, "must be finite")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value}")
    if nonneg and not value >= 0:
        raise ConfigError(path, f"must be nonnegative, got {value}")
    return value


def _vector(value, path: str, length: int | None = None) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, f"expected a list, got {value!r}")
    out = tuple(None if v is None else _number(v, f"{path}[{i}]") for i, v in enumerate(value))
    if length is not None and out and len(out) != length:
        raise ConfigError(path, f"expected {length} entries, got {len(out)}")
    return out


def _model(spec: ModelSpec, role: str, table: dict, builder):
    path = f"models.{role}"
    if spec.id not in table:
        raise ConfigError(f"{path}.id", f"unknown model {spec.id!r}; expected one of {', '.join(sorted(table))}")
    if not isinstance(spec.params, dict):
        raise ConfigError(f"{path}.params", "expected an object")
    try:
        return builder(spec.id, spec.params)
    except KeyError as exc:
        raise ConfigError(f"{path}.params.{exc.args[0]}", "unknown parameter") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.params", str(exc)) from None


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    rigid = _model(cfg.models.emulator, "emulator", RIGID_MODELS, build_rigid)
    target = _model(cfg.models.target, "target", {**TARGET_MODELS, **RIGID_MODELS}, build_target)
    if rigid.n != target.n:
        raise ConfigError("models", f"emulator pose dimension {rigid.n} != target pose dimension {target.n}")
    n, m = target.n, target.dof

    g = cfg.gains
    gains = ControllerGains(
        k_p=_number(g.G_p, "gains.G_p"), k_v=_number(g.G_v, "gains.G_v"), k_f=_number(g.G_f, "gains.G_f")
    )
    if gains.k_f > 0:
        if g.mdot_max is not None:
            mdot = _number(g.mdot_max, "gains.mdot_max", nonneg=True)
        elif _constant_cartesian_inertia(target):
            mdot = 0.0
        else:
            raise ConfigError("gains.mdot_max", "required when G_f > 0 for a configuration-dependent target inertia")
        validate_force_gain(gains, mdot)

    a = cfg.actuator
    actuator = ActuatorModel(a.mode, _number(a.omega_a, "actuator.omega_a"))

    e = cfg.environment
    positions = _vector(e.positions, "environment.positions")
    if len(positions) > n:
        raise ConfigError("environment.positions", f"at most {n} axes")
    sides = _vector(e.sides, "environment.sides", len(positions))
    if any(s not in (1.0, -1.0) for s in sides):
        raise ConfigError("environment.sides", "entries must be +1 or -1")
    env = Environment(positions, sides, _number(e.k_e, "environment.k_e"), _number(e.b_e, "environment.b_e"))

    d = cfg.disturbance
    dist = DisturbanceSpec(
        kind=d.kind,
        amplitude=_vector(d.amplitude, "disturbance.amplitude", n) if d.amplitude else (),
        omega=_number(d.omega, "disturbance.omega", nonneg=True),
        bandwidth=_number(d.bandwidth, "disturbance.bandwidth"),
        seed=int(cfg.seed),
        components=int(d.components),
        t_on=_number(d.t_on, "disturbance.t_on", nonneg=True),
    )

    c = cfg.target_controller
    tc = TargetController(
        mode=c.mode,
        tau0=_vector(c.tau0, "target_controller.tau0", n),
        amplitude=_vector(c.amplitude, "target_controller.amplitude", n),
        omega=_number(c.omega, "target_controller.omega", nonneg=True),
        t_on=_number(c.t_on, "target_controller.t_on", nonneg=True),
        setpoint=_vector(c.setpoint, "target_controller.setpoint", n),
        k_pos=_number(c.k_pos, "target_controller.k_pos", nonneg=True),
        v_max=_number(c.v_max, "target_controller.v_max", positive=True),
        k_vel=_number(c.k_vel, "target_controller.k_vel", nonneg=True),
        k_fma=_number(c.k_fma, "target_controller.k_fma", nonneg=True),
    )

    i = cfg.initial
    corr = cfg.correction
    if corr.method not in ("clik", "newton"):
        raise ConfigError("correction.method", f"unknown method {corr.method!r}")
    try:
        clik = ClikConfig(K=_number(corr.K, "correction.K"), feedforward=bool(corr.feedforward))
    except ValueError as exc:
        raise ConfigError("correction.K", str(exc)) from None
    try:
        newton = NewtonRaphsonConfig(_number(corr.tol, "correction.tol"), int(corr.max_iter))
    except ValueError as exc:
        raise ConfigError("correction.tol", str(exc)) from None

    if not isinstance(cfg.record_every, int) or cfg.record_every < 1:
        raise ConfigError("record_every", f"must be a positive integer, got {cfg.record_every!r}")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
        raise ConfigError("seed", f"must be an integer, got {cfg.seed!r}")
    static = None if cfg.static_force is None else _number(cfg.static_force, "static_force", positive=True)

    return Scenario(
        rigid=rigid,
        target=target,
        gains=gains,
        actuator=actuator,
        environment=env,
        disturbance=dist,
        target_controller=tc,
        q_s0=_vector(i.q_s, "initial.q_s", m),
        qd_s0=_vector(i.qd_s, "initial.qd_s", m),
        q_r_guess=_vector(i.q_r_guess, "initial.q_r_guess", rigid.dof),
        e_p0=_vector(i.e_p, "initial.e_p", n),
        ed_p0=_vector(i.ed_p, "initial.ed_p", n),
        duration=_number(cfg.duration, "duration", positive=True),
        h=_number(cfg.h, "h", positive=True),
        seed=cfg.seed,
        scheme=cfg.scheme,
        correction=corr.method,
        clik=clik,
        newton=newton,
        static_force=static,
        record_every=cfg.record_every,
    )


def _constant_cartesian_inertia(target) -> bool:
    if isinstance(target, RigidAsTarget):
        target = target.base
    return isinstance(target, (FlexibleJointArm, OneLinkArm))
