"""Manipulator models, equation-of-motion evaluation and the fixed-step integrator.

Every model is stored in the form

    M(q) qdd = -h(q, qd) + B tau + J(q)^T f_a

so ``h`` always sits on the left-hand side: gravity, friction and joint
stiffness appear in ``h`` with the sign they have there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DimensionError, IntegrationError, SingularConfigurationError


class Dynamics(NamedTuple):
    """Equation-of-motion terms of a model at one state."""

    M: np.ndarray
    h: np.ndarray
    J: np.ndarray
    Jdot: np.ndarray
    p: np.ndarray


class Manipulator:
    """A chain with ``dof`` generalized coordinates and an ``n``-dimensional pose.

    Subclasses implement :meth:`evaluate`. ``B`` is the ``dof x n`` actuation
    selection matrix.
    """

    dof: int
    n: int
    B: np.ndarray

    def evaluate(self, q: np.ndarray, qd: np.ndarray) -> Dynamics:
        raise NotImplementedError

    def pose(self, q: np.ndarray) -> np.ndarray:
        return self.evaluate(q, np.zeros(self.dof)).p

    def jacobian(self, q: np.ndarray) -> np.ndarray:
        return self.evaluate(q, np.zeros(self.dof)).J

    @property
    def drive_selection(self) -> np.ndarray:
        """Coordinates whose rates map to the tip through a rigid transmission;
        the link side of an elastic joint, otherwise the actuated ones."""
        return self.B

    def drive_jacobian(self, q: np.ndarray) -> np.ndarray:
        """``J(q) S`` (``n x n``), used by target-side velocity loops."""
        return self.jacobian(q) @ self.drive_selection

    def nullspace(self, q: np.ndarray) -> np.ndarray:
        """Orthonormal basis of null(J(q)); constant for structured models."""
        from .constrained import nullspace_basis

        return nullspace_basis(self.jacobian(q))


class RigidModel(Manipulator):
    """Fully actuated rigid chain: ``dof == n`` and ``B`` is the identity."""


class ScaledInertia(RigidModel):
    """``base`` with its inertia matrix multiplied by ``scale``."""

    def __init__(self, base: RigidModel, scale: float):
        if not scale > 0:
            raise ValueError(f"inertia scale must be positive, got {scale}")
        self.base = base
        self.scale = float(scale)
        self.dof = base.dof
        self.n = base.n
        self.B = base.B

    def evaluate(self, q, qd) -> Dynamics:
        dyn = self.base.evaluate(q, qd)
        return dyn._replace(M=self.scale * dyn.M)

    @property
    def kernel_id(self) -> int:
        return self.base.kernel_id

    @property
    def kernel_params(self) -> np.ndarray:
        prm = self.base.kernel_params.copy()
        prm[-1] *= self.scale
        return prm

    def __repr__(self) -> str:
        return f"ScaledInertia({self.base!r}, scale={self.scale!r})"


class TargetModel(Manipulator):
    """Target robot: ``dof >= n`` generalized coordinates, ``n`` actuators."""


def selection_matrix(rows: list[int] | tuple[int, ...], dof: int) -> np.ndarray:
    """``dof x len(rows)`` matrix with a single unit entry per column."""
    B = np.zeros((dof, len(rows)))
    for col, row in enumerate(rows):
        B[row, col] = 1.0
    return B


def _check_state(model: Manipulator, q, qd) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(q, dtype=float).reshape(-1)
    qd = np.asarray(qd, dtype=float).reshape(-1)
    if q.shape != (model.dof,) or qd.shape != (model.dof,):
        raise DimensionError(
            f"state has shapes {q.shape}, {qd.shape}; model expects ({model.dof},)"
        )
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
        raise DimensionError("state contains non-finite entries")
    return q, qd


def eval_dynamics(model: Manipulator, q, qd) -> Dynamics:
    """Checked evaluation of ``M, h, J, Jdot, p`` at ``(q, qd)``."""
    q, qd = _check_state(model, q, qd)
    dyn = model.evaluate(q, qd)
    # Cholesky doubles as the positive-definiteness check
    try:
        np.linalg.cholesky(dyn.M)
    except np.linalg.LinAlgError as exc:
        raise SingularConfigurationError("inertia matrix is not positive-definite", q) from exc
    return dyn


def forward_accel(model: Manipulator, q, qd, tau, f_a, dyn: Dynamics | None = None) -> np.ndarray:
    """Unconstrained acceleration ``M^-1 (B tau - h + J^T f_a)``."""
    if dyn is None:
        dyn = model.evaluate(np.asarray(q, dtype=float), np.asarray(qd, dtype=float))
    rhs = model.B @ np.asarray(tau, dtype=float) - dyn.h + dyn.J.T @ np.asarray(f_a, dtype=float)
    try:
        return np.linalg.solve(dyn.M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularConfigurationError("singular inertia matrix", q) from exc


@dataclass(frozen=True)
class PoseTransform:
    """Map from contact wrench to generalized constraint force.

    Only planar poses are supported, where the map is the identity.
    """

    n: int

    def matrix(self, phi=None) -> np.ndarray:
        return np.eye(self.n)

    def apply(self, f: np.ndarray, phi=None) -> np.ndarray:
        return np.asarray(f, dtype=float)


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 1e-4
    method: str = "rk4"

    def __post_init__(self):
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"integrator step must be positive, got {self.h}")
        if self.method != "rk4":
            raise ValueError(f"unsupported integrator {self.method!r}")


Derivative = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(f: Derivative, t: float, y: np.ndarray, h: float, k1: np.ndarray | None = None) -> np.ndarray:
    """One classical Runge-Kutta step; ``k1`` may be supplied if already known."""
    if k1 is None:
        k1 = f(t, y)
    half = 0.5 * h
    k2 = f(t + half, y + half * k1)
    k3 = f(t + half, y + half * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(y: np.ndarray, f: Derivative, h: float, t: float = 0.0) -> np.ndarray:
    """Checked RK4 step of ``y' = f(t, y)``; raises on non-finite output."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    y = np.asarray(y, dtype=float)
    y_next = rk4_step(f, t, y, h)
    if not np.all(np.isfinite(y_next)):
        raise IntegrationError("non-finite derivative encountered", t=t, step=None)
    return y_next
