"""Built-in manipulator models.

* ``OneLinkArm`` / ``FlexibleJointArm``: the 1-DOF rigid emulator and the
  1-DOF flexible-joint target of the case study. The pose is the arc length
  ``l * q`` of the tip, so ``J = l``.
* ``TwoLinkArm``: planar 2R rigid arm with gravity along ``-y``.
* ``FlexibleTwoLinkArm``: planar 2R arm with elastic joints, coordinates
  ``(link1, link2, motor1, motor2)``; no gravity.

The equation-of-motion terms are compiled functions of a flat parameter
vector so the simulation kernels and the Python classes share one
implementation. Rigid models carry an inertia scale as their last parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from numba import njit

from .dynamics import Dynamics, RigidModel, TargetModel, selection_matrix

ONE_LINK, TWO_LINK, FLEX_1DOF, FLEX_TWO_LINK = 0, 1, 2, 3


@njit(cache=True)
def _one_link(prm, q, qd):
    m_r, c_r, w, l, scale = prm[0], prm[1], prm[2], prm[3], prm[4]
    M = np.full((1, 1), scale * m_r)
    h = np.array([c_r * qd[0] + w * math.cos(q[0])])
    J = np.full((1, 1), l)
    return M, h, J, np.zeros((1, 1)), np.array([l * q[0]])


@njit(cache=True)
def _flex_1dof(prm, q, qd):
    m_s1, m_s2, l, k, zeta, c_s = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5]
    spring = k * (q[1] - q[0]) + zeta * (qd[1] - qd[0])
    M = np.zeros((2, 2))
    M[0, 0] = m_s1
    M[1, 1] = m_s2
    h = np.array([-spring, spring + c_s * qd[1]])
    J = np.zeros((1, 2))
    J[0, 0] = l
    return M, h, J, np.zeros((1, 2)), np.array([l * q[0]])


@njit(cache=True)
def _planar_2r(l1, l2, lc1, lc2, m1, m2, I1, I2, q0, q1, qd0, qd1):
    """Inertia, velocity terms, Jacobian, its derivative and tip of a 2R arm."""
    c1, s1 = math.cos(q0), math.sin(q0)
    c2, s2 = math.cos(q1), math.sin(q1)
    c12, s12 = math.cos(q0 + q1), math.sin(q0 + q1)
    a = m2 * l1 * lc2
    M = np.empty((2, 2))
    M[0, 0] = m1 * lc1**2 + I1 + m2 * (l1**2 + lc2**2 + 2.0 * l1 * lc2 * c2) + I2
    M[0, 1] = M[1, 0] = m2 * (lc2**2 + l1 * lc2 * c2) + I2
    M[1, 1] = m2 * lc2**2 + I2
    cor = np.array([-a * s2 * (2.0 * qd0 * qd1 + qd1**2), a * s2 * qd0**2])
    J = np.empty((2, 2))
    J[0, 0] = -l1 * s1 - l2 * s12
    J[0, 1] = -l2 * s12
    J[1, 0] = l1 * c1 + l2 * c12
    J[1, 1] = l2 * c12
    w12 = qd0 + qd1
    Jd = np.empty((2, 2))
    Jd[0, 0] = -l1 * c1 * qd0 - l2 * c12 * w12
    Jd[0, 1] = -l2 * c12 * w12
    Jd[1, 0] = -l1 * s1 * qd0 - l2 * s12 * w12
    Jd[1, 1] = -l2 * s12 * w12
    p = np.array([l1 * c1 + l2 * c12, l1 * s1 + l2 * s12])
    return M, cor, J, Jd, p, c1, c12


@njit(cache=True)
def _two_link(prm, q, qd):
    l1, l2, lc1, lc2, m1, m2, I1, I2, g, c, scale = (
        prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6], prm[7], prm[8], prm[9], prm[10]
    )
    M, cor, J, Jd, p, c1, c12 = _planar_2r(l1, l2, lc1, lc2, m1, m2, I1, I2, q[0], q[1], qd[0], qd[1])
    g2 = m2 * lc2 * g * c12
    g1 = (m1 * lc1 + m2 * l1) * g * c1 + g2
    h = cor + np.array([g1 + c * qd[0], g2 + c * qd[1]])
    return scale * M, h, J, Jd, p


@njit(cache=True)
def _flex_two_link(prm, q, qd):
    l1, l2, lc1, lc2, m1, m2, I1, I2 = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6], prm[7]
    jm1, jm2, k1, k2, z1, z2, c_s = prm[8], prm[9], prm[10], prm[11], prm[12], prm[13], prm[14]
    Ml, cor, Jl, Jld, p, _, _ = _planar_2r(l1, l2, lc1, lc2, m1, m2, I1, I2, q[0], q[1], qd[0], qd[1])
    s1 = k1 * (q[2] - q[0]) + z1 * (qd[2] - qd[0])
    s2 = k2 * (q[3] - q[1]) + z2 * (qd[3] - qd[1])
    M = np.zeros((4, 4))
    M[:2, :2] = Ml
    M[2, 2] = jm1
    M[3, 3] = jm2
    h = np.array([cor[0] - s1, cor[1] - s2, s1 + c_s * qd[2], s2 + c_s * qd[3]])
    J = np.zeros((2, 4))
    J[:, :2] = Jl
    Jd = np.zeros((2, 4))
    Jd[:, :2] = Jld
    return M, h, J, Jd, p


@njit(cache=True)
def model_terms(model_id, prm, q, qd):
    """``(M, h, J, Jdot, p)`` of a built-in model."""
    if model_id == ONE_LINK:
        return _one_link(prm, q, qd)
    if model_id == TWO_LINK:
        return _two_link(prm, q, qd)
    if model_id == FLEX_1DOF:
        return _flex_1dof(prm, q, qd)
    return _flex_two_link(prm, q, qd)


class _Builtin:
    """Mixin for models evaluated by :func:`model_terms`."""

    kernel_id: int

    def __post_init__(self):
        object.__setattr__(self, "_prm", np.array(self.params(), dtype=float))
        for name, value in zip(self._param_names(), self._prm):
            if not math.isfinite(value):
                raise ValueError(f"{type(self).__name__}.{name} must be finite")

    def _param_names(self):
        return [f.name for f in fields(self)]

    def params(self) -> list[float]:
        return [float(getattr(self, f.name)) for f in fields(self)]

    @property
    def kernel_params(self) -> np.ndarray:
        return self._prm

    def evaluate(self, q, qd) -> Dynamics:
        return Dynamics(*model_terms(self.kernel_id, self._prm, _vec(q), _vec(qd)))


def _vec(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=float).reshape(-1)


def _positive(obj, *names):
    for name in names:
        values = getattr(obj, name)
        for v in values if isinstance(values, tuple) else (values,):
            if not v > 0:
                raise ValueError(f"{type(obj).__name__}.{name} must be positive, got {values}")


@dataclass(frozen=True)
class OneLinkArm(_Builtin, RigidModel):
    """``m_r qdd + c_r qd + w cos(q) = tau + l f``."""

    m_r: float = 0.05
    c_r: float = 0.022
    w: float = 0.5
    l: float = 0.3

    dof = 1
    n = 1
    kernel_id = ONE_LINK
    B = np.eye(1)

    def __post_init__(self):
        _positive(self, "m_r", "l")
        super().__post_init__()

    def params(self):
        return [self.m_r, self.c_r, self.w, self.l, 1.0]


@dataclass(frozen=True)
class FlexibleJointArm(_Builtin, TargetModel):
    """1-DOF elastic-joint arm; ``q = (link angle, motor angle)``.

    Link:  ``m_s1 qdd1 = k (q2 - q1) + zeta (qd2 - qd1) + l f``
    Motor: ``m_s2 qdd2 = -k (q2 - q1) - zeta (qd2 - qd1) - c_s qd2 + tau``
    """

    m_s1: float = 0.05
    m_s2: float = 0.1
    l: float = 0.3
    k: float = 3.0
    zeta: float = 0.1
    c_s: float = 0.0

    dof = 2
    n = 1
    kernel_id = FLEX_1DOF
    B = selection_matrix([1], 2)
    drive_selection = selection_matrix([0], 2)

    def __post_init__(self):
        _positive(self, "m_s1", "m_s2", "l", "k")
        super().__post_init__()

    def nullspace(self, q) -> np.ndarray:
        return _P_1

    def potential(self, q) -> float:
        return 0.5 * self.k * (q[1] - q[0]) ** 2


_P_1 = np.array([[0.0], [1.0]])


@dataclass(frozen=True)
class TwoLinkArm(_Builtin, RigidModel):
    """Planar 2R arm; centres of mass at ``lc_i``, gravity ``g`` along ``-y``,
    viscous joint friction ``c``."""

    l1: float = 0.4
    l2: float = 0.3
    lc1: float = 0.2
    lc2: float = 0.15
    m1: float = 2.0
    m2: float = 1.5
    I1: float = 0.03
    I2: float = 0.012
    g: float = 9.81
    c: float = 0.05

    dof = 2
    n = 2
    kernel_id = TWO_LINK
    B = np.eye(2)

    def __post_init__(self):
        _positive(self, "l1", "l2", "m1", "m2")
        super().__post_init__()

    def params(self):
        return [self.l1, self.l2, self.lc1, self.lc2, self.m1, self.m2, self.I1, self.I2, self.g, self.c, 1.0]

    def potential(self, q) -> float:
        y1 = self.lc1 * math.sin(q[0])
        y2 = self.l1 * math.sin(q[0]) + self.lc2 * math.sin(q[0] + q[1])
        return self.g * (self.m1 * y1 + self.m2 * y2)


@dataclass(frozen=True)
class FlexibleTwoLinkArm(_Builtin, TargetModel):
    """Planar 2R arm with elastic joints, ``q = (q_link1, q_link2, q_motor1, q_motor2)``.

    Links and motors are coupled only through the joint springs (no
    gyroscopic rotor coupling), so the off-diagonal inertia block is zero.
    """

    l1: float = 0.4
    l2: float = 0.3
    lc1: float = 0.2
    lc2: float = 0.15
    m1: float = 1.0
    m2: float = 0.8
    I1: float = 0.015
    I2: float = 0.008
    jm: tuple[float, float] = (0.05, 0.04)
    k: tuple[float, float] = (40.0, 30.0)
    zeta: tuple[float, float] = (0.4, 0.3)
    c_s: float = 0.0

    dof = 4
    n = 2
    kernel_id = FLEX_TWO_LINK
    B = selection_matrix([2, 3], 4)
    drive_selection = selection_matrix([0, 1], 4)

    def __post_init__(self):
        _positive(self, "l1", "l2", "m1", "m2", "jm", "k")
        super().__post_init__()

    def params(self):
        return [
            self.l1, self.l2, self.lc1, self.lc2, self.m1, self.m2, self.I1, self.I2,
            *self.jm, *self.k, *self.zeta, self.c_s,
        ]

    def _param_names(self):
        return ["l1", "l2", "lc1", "lc2", "m1", "m2", "I1", "I2", "jm1", "jm2", "k1", "k2", "zeta1", "zeta2", "c_s"]

    def nullspace(self, q) -> np.ndarray:
        return _P_2

    def potential(self, q) -> float:
        return 0.5 * (self.k[0] * (q[2] - q[0]) ** 2 + self.k[1] * (q[3] - q[1]) ** 2)


_P_2 = np.vstack([np.zeros((2, 2)), np.eye(2)])


@dataclass(frozen=True)
class RigidAsTarget(TargetModel):
    """Use a rigid model as a (non-redundant) target robot."""

    base: RigidModel = field(default_factory=TwoLinkArm)

    @property
    def dof(self) -> int:
        return self.base.dof

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def B(self) -> np.ndarray:
        return self.base.B

    @property
    def kernel_id(self) -> int:
        return self.base.kernel_id

    @property
    def kernel_params(self) -> np.ndarray:
        return self.base.kernel_params

    def evaluate(self, q, qd) -> Dynamics:
        return self.base.evaluate(q, qd)

    def nullspace(self, q) -> np.ndarray:
        return np.zeros((self.dof, 0))


RIGID_MODELS = {"one_link": OneLinkArm, "two_link": TwoLinkArm}
TARGET_MODELS = {"flexible_joint_1dof": FlexibleJointArm, "flexible_two_link": FlexibleTwoLinkArm}


def _coerce(cls, params: dict) -> dict:
    known = {f.name for f in fields(cls)}
    out = {}
    for key, value in params.items():
        if key not in known:
            raise KeyError(key)
        out[key] = tuple(value) if isinstance(value, list) else value
    return out


def build_rigid(model_id: str, params: dict | None = None) -> RigidModel:
    cls = RIGID_MODELS[model_id]
    return cls(**_coerce(cls, params or {}))


def build_target(model_id: str, params: dict | None = None) -> TargetModel:
    if model_id in TARGET_MODELS:
        cls = TARGET_MODELS[model_id]
        return cls(**_coerce(cls, params or {}))
    return RigidAsTarget(build_rigid(model_id, params))
