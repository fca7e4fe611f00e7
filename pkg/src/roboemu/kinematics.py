"""Recovering the target's generalized coordinates from the emulator's pose.

Two correction schemes are provided: Newton-Raphson projection onto the
constraint manifold, and closed-loop inverse kinematics (CLIK) with the
ultimate-boundedness radius of the Jacobian-transpose law.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .constrained import RANK_TOL, check_full_row_rank, right_pinv
from .dynamics import TargetModel, rk4_step
from .errors import ConvergenceError, DimensionError, SingularConfigurationError


@dataclass(frozen=True)
class NewtonRaphsonConfig:
    tol: float = 1e-10
    max_iter: int = 20

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Newton-Raphson tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("Newton-Raphson needs at least one iteration")


@dataclass(frozen=True)
class NewtonResult:
    q: np.ndarray
    iterations: int
    residuals: list[float]


def newton_raphson_correct(
    target: TargetModel, q0, p_r, config: NewtonRaphsonConfig = NewtonRaphsonConfig()
) -> NewtonResult:
    """Iterate ``q <- q + J_s^+ (p_r - p_s(q))`` until ``|Phi| <= tol``.

    Pseudoinverse updates lie in the row space of ``J_s``, so for a linear
    pose map the null-space component of ``q0`` is left untouched.
    """
    q = np.array(q0, dtype=float)
    p_r = np.asarray(p_r, dtype=float)
    dyn = target.evaluate(q, np.zeros(target.dof))
    phi = p_r - dyn.p
    residuals = [float(np.linalg.norm(phi))]
    k = 0
    while residuals[-1] > config.tol:
        if k == config.max_iter:
            raise ConvergenceError("Newton-Raphson did not converge", residuals[-1], k)
        try:
            q = q + right_pinv(dyn.J) @ phi
        except SingularConfigurationError as exc:
            raise SingularConfigurationError(f"singular Jacobian at iteration {k}", q) from exc
        k += 1
        dyn = target.evaluate(q, np.zeros(target.dof))
        phi = p_r - dyn.p
        residuals.append(float(np.linalg.norm(phi)))
        if not np.isfinite(residuals[-1]):
            raise ConvergenceError("Newton-Raphson diverged", residuals[-1], k)
    return NewtonResult(q, k, residuals)


@dataclass(frozen=True)
class ClikConfig:
    """Gain ``K`` (scalar means ``K = k I``), update law and feedforward flag.

    ``law="transpose"`` is ``qd = P xi + J^T K Phi``; ``law="pinv"`` uses
    ``J^+`` in place of ``J^T``. With ``feedforward=True`` the particular
    solution ``J^+ pd_r`` is added, leaving only integration drift for the
    feedback term to remove.
    """

    K: float | tuple = 100.0
    law: str = "transpose"
    feedforward: bool = False
    h: float = 1e-4

    def __post_init__(self):
        if self.law not in ("transpose", "pinv"):
            raise ValueError(f"unknown CLIK law {self.law!r}")
        K = self.gain(1) if np.isscalar(self.K) else np.asarray(self.K, dtype=float)
        if not np.allclose(K, K.T):
            raise ValueError("CLIK gain must be symmetric")
        if np.linalg.eigvalsh(K)[0] <= 0:
            raise ValueError("CLIK gain must be positive-definite")

    def gain(self, n: int) -> np.ndarray:
        if np.isscalar(self.K):
            return float(self.K) * np.eye(n)
        K = np.asarray(self.K, dtype=float)
        if K.shape != (n, n):
            raise DimensionError(f"CLIK gain has shape {K.shape}, expected ({n}, {n})")
        return K


def clik_rate(J_s: np.ndarray, P: np.ndarray, xi, phi, K: np.ndarray, law: str = "transpose", pd_r=None) -> np.ndarray:
    if law == "transpose":
        qd = J_s.T @ (K @ phi)
    else:
        qd = right_pinv(J_s) @ (K @ phi)
    if P.shape[1]:
        qd = qd + P @ xi
    if pd_r is not None:
        qd = qd + right_pinv(J_s) @ pd_r
    return qd


def clik_step(target: TargetModel, q_s, xi, p_r, config: ClikConfig = ClikConfig(), pd_r=None) -> np.ndarray:
    """CLIK velocity estimate ``qd_s`` at the current state."""
    q_s = np.asarray(q_s, dtype=float)
    if q_s.shape != (target.dof,):
        raise DimensionError(f"q_s has shape {q_s.shape}, expected ({target.dof},)")
    dyn = target.evaluate(q_s, np.zeros(target.dof))
    P = target.nullspace(q_s)
    xi = np.asarray(xi, dtype=float).reshape(P.shape[1])
    phi = np.asarray(p_r, dtype=float) - dyn.p
    ff = pd_r if config.feedforward else None
    return clik_rate(dyn.J, P, xi, phi, config.gain(target.n), config.law, ff)


@dataclass(frozen=True)
class ClikBound:
    rho: float
    mu: float
    gamma: float
    lambda_min_K: float
    lambda_min_JJt: float


def clik_bound(config: ClikConfig, jacobian_samples: Iterable, pd_max: float, configurations=None) -> ClikBound:
    """Ultimate bound ``rho = gamma^1.5 |pd_r|max / (lmin(K) lmin(J J^T))``.

    The worst (smallest) ``lmin(J J^T)`` over the samples is used. Only the
    Jacobian-transpose law is covered by this certificate.
    """
    if config.law != "transpose":
        raise ValueError("the ultimate bound is only established for the transpose law")
    worst = np.inf
    n = None
    for idx, J in enumerate(jacobian_samples):
        J = np.atleast_2d(np.asarray(J, dtype=float))
        n = J.shape[0]
        lam = float(np.linalg.eigvalsh(J @ J.T)[0])
        if lam <= RANK_TOL:
            where = configurations[idx] if configurations is not None else f"sample {idx}"
            raise SingularConfigurationError(f"degenerate workspace sample: {where}")
        worst = min(worst, lam)
    if n is None:
        raise ValueError("no Jacobian samples given")
    eig = np.linalg.eigvalsh(config.gain(n))
    lmin, lmax = float(eig[0]), float(eig[-1])
    gamma = lmax / lmin
    rho = gamma**1.5 * pd_max / (lmin * worst)
    mu = lmax * pd_max / (lmin**2 * worst)
    return ClikBound(rho=rho, mu=mu, gamma=gamma, lambda_min_K=lmin, lambda_min_JJt=worst)


@dataclass
class ClikTrace:
    t: np.ndarray
    q: np.ndarray
    phi: np.ndarray
    lyapunov: np.ndarray = field(repr=False)


def clik_track(
    target: TargetModel,
    q0,
    pose_ref: Callable[[float], np.ndarray],
    t_end: float,
    config: ClikConfig = ClikConfig(),
    xi_ref: Callable[[float], np.ndarray] | None = None,
    pose_rate: Callable[[float], np.ndarray] | None = None,
) -> ClikTrace:
    """Integrate the CLIK flow against a prescribed pose trajectory."""
    q = np.array(q0, dtype=float)
    K = config.gain(target.n)
    steps = int(round(t_end / config.h))
    m = target.dof

    def rate(t, y):
        dyn = target.evaluate(y, np.zeros(m))
        P = target.nullspace(y)
        xi = np.zeros(P.shape[1]) if xi_ref is None else np.asarray(xi_ref(t), float)
        pd = pose_rate(t) if (config.feedforward and pose_rate is not None) else None
        return clik_rate(dyn.J, P, xi, pose_ref(t) - dyn.p, K, config.law, pd)

    ts = np.arange(steps + 1) * config.h
    qs = np.empty((steps + 1, m))
    phis = np.empty((steps + 1, target.n))
    qs[0] = q
    for i in range(steps):
        phis[i] = pose_ref(ts[i]) - target.pose(q)
        q = rk4_step(rate, ts[i], q, config.h)
        qs[i + 1] = q
    phis[steps] = pose_ref(ts[steps]) - target.pose(q)
    V = 0.5 * np.einsum("ti,ij,tj->t", phis, K, phis)
    return ClikTrace(ts, qs, phis, V)
