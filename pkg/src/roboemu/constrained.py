"""Target robot under the rheonomic constraint ``p_r(q_r(t)) - p_s(q_s) = 0``.

The constrained target obeys ``M_s qdd_s = -h_s + B tau_s + J_s^T lambda``;
the multiplier ``lambda`` is the constraint force the simulated robot feels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .dynamics import Dynamics, Manipulator, RigidModel, TargetModel
from .errors import DimensionError, SingularConfigurationError

RANK_TOL = 1e-10


def _solve(A: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    try:
        return la.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularConfigurationError(f"singular {what}") from exc


def check_full_row_rank(J: np.ndarray, what: str = "Jacobian") -> None:
    s = np.linalg.svd(J, compute_uv=False)
    if s.size == 0 or s[-1] <= RANK_TOL * max(1.0, s[0]):
        raise SingularConfigurationError(f"{what} is not full row rank (singular values {s})")


def right_pinv(J: np.ndarray) -> np.ndarray:
    """``J^T (J J^T)^-1`` for a full-row-rank ``J``."""
    return _solve(J @ J.T, J, "J J^T").T


def nullspace_basis(J: np.ndarray) -> np.ndarray:
    """Orthonormal ``P`` with ``J P = 0``, from the SVD of ``J``.

    Returns an ``m x 0`` array when ``J`` is square and nonsingular.
    """
    J = np.atleast_2d(np.asarray(J, dtype=float))
    n, m = J.shape
    if n > m:
        raise DimensionError(f"Jacobian {J.shape} has more rows than columns")
    _, s, vt = np.linalg.svd(J)
    if s[-1] <= RANK_TOL * max(1.0, s[0]):
        raise SingularConfigurationError(f"Jacobian is rank deficient (singular values {s})")
    P = vt[n:].T.copy()
    # deterministic orientation: largest-magnitude entry of each column positive
    for k in range(P.shape[1]):
        i = np.argmax(np.abs(P[:, k]))
        if P[i, k] < 0:
            P[:, k] = -P[:, k]
    return P


def cartesian_inertia(M: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Task-space inertia ``(J M^-1 J^T)^-1``."""
    check_full_row_rank(J)
    Minv_Jt = _solve(M, J.T, "inertia matrix")
    Mc = np.linalg.inv(J @ Minv_Jt)
    return 0.5 * (Mc + Mc.T)


def inertia_ratio(Ms_cart: np.ndarray, Mr_cart: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``Q = M_s M_r^-1`` and its eigenvalues in ascending order.

    ``Q`` is similar to the symmetric ``Mr^-1/2 Ms Mr^-1/2``, so the
    eigenvalues are computed from that form and are real and positive.
    """
    Q = Ms_cart @ np.linalg.inv(Mr_cart)
    w, V = np.linalg.eigh(Mr_cart)
    Mr_isqrt = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    eig = np.linalg.eigvalsh(Mr_isqrt @ Ms_cart @ Mr_isqrt)
    return Q, np.sort(eig)


def drive_term(dyn_s: Dynamics, qd_s: np.ndarray, pdd_r: np.ndarray) -> np.ndarray:
    """``c = pdd_r - Jdot_s qd_s``."""
    return pdd_r - dyn_s.Jdot @ qd_s


def multiplier(dyn_s: Dynamics, B: np.ndarray, qd_s, tau_s, pdd_r) -> np.ndarray:
    """``(J M^-1 J^T)^-1 (c + J M^-1 (h - B tau))`` on pre-evaluated terms."""
    J = dyn_s.J
    Minv = np.linalg.inv(dyn_s.M)
    JMi = J @ Minv
    c = pdd_r - dyn_s.Jdot @ qd_s
    return _solve(JMi @ J.T, c + JMi @ (dyn_s.h - B @ tau_s), "J_s M_s^-1 J_s^T")


def null_accel(M: np.ndarray, P: np.ndarray, Jpinv: np.ndarray, free: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Solve ``N xi_dot = P^T free - (M P)^T J^+ c`` with ``N = P^T M P``.

    ``free = B tau - h`` and ``c = pdd_r - Jdot qd``; the Pdot term is
    dropped, which is exact for a constant null-space basis.
    """
    MP = M @ P
    return _solve(P.T @ MP, P.T @ free - MP.T @ (Jpinv @ c), "reduced inertia N")


def reduced_accel(dyn_s: Dynamics, B: np.ndarray, P: np.ndarray, Jpinv: np.ndarray, qd_s, tau_s, pdd_r) -> np.ndarray:
    """Null-space acceleration ``xi_dot`` of the constrained target."""
    if P.shape[1] == 0:
        return np.zeros(0)
    return null_accel(dyn_s.M, P, Jpinv, B @ tau_s - dyn_s.h, pdd_r - dyn_s.Jdot @ qd_s)


@dataclass(frozen=True)
class RheonomicConstraint:
    """Tie the target's pose to the emulating robot's measured pose."""

    rigid: RigidModel
    target: TargetModel

    def __post_init__(self):
        if self.rigid.n != self.target.n:
            raise DimensionError(
                f"pose dimensions differ: emulator {self.rigid.n}, target {self.target.n}"
            )
        if self.target.dof < self.target.n:
            raise DimensionError("target must have at least as many coordinates as pose entries")

    def phi(self, q_s, q_r) -> np.ndarray:
        return self.rigid.pose(np.asarray(q_r, float)) - self.target.pose(np.asarray(q_s, float))

    def phi_qs(self, q_s) -> np.ndarray:
        return -self.target.jacobian(np.asarray(q_s, float))

    def drive(self, q_s, qd_s, pdd_r) -> np.ndarray:
        dyn = self.target.evaluate(np.asarray(q_s, float), np.asarray(qd_s, float))
        return drive_term(dyn, np.asarray(qd_s, float), np.asarray(pdd_r, float))

    def lagrange_multiplier(self, q_s, qd_s, tau_s, pdd_r) -> np.ndarray:
        q_s, qd_s = np.asarray(q_s, float), np.asarray(qd_s, float)
        dyn = self.target.evaluate(q_s, qd_s)
        check_full_row_rank(dyn.J @ np.linalg.solve(dyn.M, dyn.J.T), "J_s M_s^-1 J_s^T")
        return multiplier(dyn, self.target.B, qd_s, np.asarray(tau_s, float), np.asarray(pdd_r, float))

    def independent_accel(self, q_s, qd_s, tau_s, pdd_r) -> np.ndarray:
        q_s, qd_s = np.asarray(q_s, float), np.asarray(qd_s, float)
        dyn = self.target.evaluate(q_s, qd_s)
        check_full_row_rank(dyn.J)
        P = self.target.nullspace(q_s)
        return reduced_accel(
            dyn, self.target.B, P, right_pinv(dyn.J), qd_s, np.asarray(tau_s, float), np.asarray(pdd_r, float)
        )

    def general_velocity(self, q_s, q_r, qd_r, xi) -> np.ndarray:
        """``qd_s = J_s^+ J_r qd_r + P xi``."""
        q_s = np.asarray(q_s, float)
        J_s = self.target.jacobian(q_s)
        check_full_row_rank(J_s)
        pd_r = self.rigid.jacobian(np.asarray(q_r, float)) @ np.asarray(qd_r, float)
        P = self.target.nullspace(q_s)
        return right_pinv(J_s) @ pd_r + P @ np.asarray(xi, float).reshape(P.shape[1])


def general_velocity(J_s: np.ndarray, P: np.ndarray, pd_r: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return right_pinv(J_s) @ pd_r + P @ xi


def kappa_bound(model: Manipulator, samples) -> float:
    """Largest eigenvalue of the Cartesian inertia over configuration samples."""
    worst = 0.0
    for q in samples:
        q = np.asarray(q, float)
        dyn = model.evaluate(q, np.zeros(model.dof))
        worst = max(worst, float(np.linalg.eigvalsh(cartesian_inertia(dyn.M, dyn.J))[-1]))
    return worst
