"""Compiled simulation core.

Everything evaluated inside the integration loop lives here: the wall, the
signal generators, the target robot's controller, the emulator control law,
the right-hand sides of the three simulators and the fixed-step RK4 driver.
A run is described by a flat :data:`Ctx` tuple assembled in :mod:`roboemu.sim`.

Record rows follow ``sim.CHANNELS`` then ``sim.EXTRA_CHANNELS``.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np
from numba import njit

from .models import model_terms

SCHEME_A, SCHEME_B, ORACLE = 0, 1, 2
OK, NON_FINITE, CORRECTION_FAILED, SINGULAR = 0, 1, 2, 3

Ctx = namedtuple(
    "Ctx",
    [
        # models: ids, parameter vectors and dimensions
        "rid", "rprm", "tid", "tprm", "k", "m", "n", "r", "B", "P", "S",
        # emulator control law and actuator
        "kp", "kv", "kf", "lag", "omega_a",
        # wall
        "wall_on", "wall_pos", "wall_side", "k_e", "b_e",
        # disturbance d and acceleration-estimate noise
        "d_kind", "d_amp", "d_omega", "d_ton", "d_freqs", "d_phases",
        "a_kind", "a_amp", "a_omega", "a_ton", "a_freqs", "a_phases",
        # target controller
        "c_mode", "c_tau0", "c_amp", "c_omega", "c_ton", "c_set", "c_kpos", "c_vmax", "c_kvel", "c_kfma",
        # constraint correction
        "clik", "K", "ff", "nr_tol", "nr_iter",
    ],
)


@njit(cache=True)
def signal(kind, amp, omega, t_on, freqs, phases, t):
    """Zero, constant, sinusoid or seeded multi-sine, per axis."""
    n = amp.shape[0]
    out = np.zeros(n)
    if kind == 0 or t < t_on:
        return out
    if kind == 1:
        out[:] = amp
    elif kind == 2:
        out[:] = amp * math.sin(omega * (t - t_on))
    else:
        ncomp = freqs.shape[0]
        ncol = phases.shape[1]
        for i in range(n):
            acc = 0.0
            for j in range(ncomp):
                acc += math.sin(freqs[j] * t + phases[j, i % ncol])
            out[i] = amp[i] * acc * math.sqrt(2.0 / ncomp)
    return out


@njit(cache=True)
def wall_force(on, pos, side, k_e, b_e, p, pd):
    """Unilateral spring-damper: pushes out of the wall, never pulls."""
    n = p.shape[0]
    f = np.zeros(n)
    for i in range(n):
        if on[i] == 0.0:
            continue
        delta = side[i] * (p[i] - pos[i])
        if delta > 0.0:
            push = k_e * delta + b_e * side[i] * pd[i]
            if push > 0.0:
                f[i] = -side[i] * push
    return f


@njit(cache=True)
def target_torque(c, t, J_s, qd_s, p_s, f):
    n = c.n
    if t < c.c_ton:
        return np.zeros(n)
    if c.c_mode == 0:
        return c.c_tau0 + c.c_amp * math.sin(c.c_omega * (t - c.c_ton))
    v = c.c_kpos * (c.c_set - p_s)
    speed = np.sqrt(np.sum(v * v))
    if speed > c.c_vmax:
        v = v * (c.c_vmax / speed)
    v = v + c.c_kfma * f
    qd_cmd = np.linalg.solve(J_s @ c.S, v)
    return c.c_kvel * (qd_cmd - c.B.T @ qd_s)


@njit(cache=True)
def target_terms(c, M_s, h_s, J_s, Jd_s, qd_s, tau_s, f):
    """``(free, Mc_s_inv, Jdqd, a_free, a_tilde)`` with ``free = B tau - h``.

    ``a_free`` is the target pose acceleration without contact force and
    ``a_tilde`` the one under the measured force.
    """
    free = c.B @ tau_s - h_s
    MiJt = np.linalg.solve(M_s, np.ascontiguousarray(J_s.T))
    Mc_inv = J_s @ MiJt
    Jdqd = Jd_s @ qd_s
    a_free = np.ascontiguousarray(MiJt.T) @ free + Jdqd
    return free, Mc_inv, Jdqd, a_free, a_free + Mc_inv @ f


@njit(cache=True)
def emulate(c, t, M_r, h_r, J_r, Jd_r, qd_r, f, d, a_tilde, e_p, ed_p, Mc_inv, tau_state):
    """Emulator command ``tau_c``, applied torque and resulting motion.

    With force feedback the acceleration error and the command depend on
    each other. With an ideal actuator the pose acceleration responds to the
    auxiliary input with unit gain, so that loop is solved exactly; a lagging
    actuator makes the current acceleration independent of the command.
    """
    Jr_inv = np.linalg.inv(J_r)
    Jt = np.ascontiguousarray(J_r.T)
    Jdqd = Jd_r @ qd_r
    JtF = Jt @ f
    ext = JtF + Jt @ d
    u = a_tilde - c.kv * ed_p - c.kp * e_p
    tau_c = h_r + M_r @ (Jr_inv @ (u - Jdqd)) - JtF
    tau_r = tau_state if c.lag else tau_c
    qdd_r = np.linalg.solve(M_r, tau_r + ext - h_r)
    pdd_r = J_r @ qdd_r + Jdqd
    edd_p = pdd_r - a_tilde
    if c.kf != 0.0:
        n = c.n
        Mc_s = np.linalg.inv(Mc_inv)
        if not c.lag:
            edd_p = np.linalg.solve(np.eye(n) + c.kf * Mc_s, edd_p)
        noise = signal(c.a_kind, c.a_amp, c.a_omega, c.a_ton, c.a_freqs, c.a_phases, t)
        u = u - c.kf * (Mc_s @ (edd_p + noise))
        tau_c = h_r + M_r @ (Jr_inv @ (u - Jdqd)) - JtF
        if not c.lag:
            tau_r = tau_c
            qdd_r = np.linalg.solve(M_r, tau_r + ext - h_r)
            pdd_r = J_r @ qdd_r + Jdqd
            edd_p = pdd_r - a_tilde
    return tau_c, tau_r, qdd_r, pdd_r, edd_p


@njit(cache=True)
def _put(row, pos, values):
    w = values.shape[0]
    row[pos : pos + w] = values
    return pos + w


@njit(cache=True)
def _record(row, q_r, qd_r, q_s, qd_s, xi, p_r, p_s, phi, f, lam, e_p, e_f, tau_s, tau_c, tau_r,
            edd_p, a_tilde, d, Mc_s):
    pos = 0
    for part in (q_r, qd_r, q_s, qd_s, xi, p_r, p_s, phi, f, f, lam, e_p, e_f, tau_s, tau_c, tau_r,
                 edd_p, a_tilde, d):
        pos = _put(row, pos, part)
    _put(row, pos, Mc_s.ravel())


@njit(cache=True)
def _pinv(J):
    return np.ascontiguousarray(J.T) @ np.linalg.inv(J @ np.ascontiguousarray(J.T))


@njit(cache=True)
def rhs_a(t, z, c, rec, row):
    """Scheme A: emulator plus constrained target in independent coordinates.

    State ``(q_r, qd_r, q_s, xi, v_ref, p_ref[, tau_r])``.
    """
    k, m, n, r = c.k, c.m, c.n, c.r
    o_qs = 2 * k
    o_xi = o_qs + m
    o_v = o_xi + r
    o_p = o_v + n
    o_tau = o_p + n
    q_r = z[:k]
    qd_r = z[k:o_qs]
    q_s = z[o_qs:o_xi]
    xi = z[o_xi:o_v]
    v_ref = z[o_v:o_p]
    p_ref = z[o_p:o_tau]
    tau_state = z[o_tau:]
    M_r, h_r, J_r, Jd_r, p_r = model_terms(c.rid, c.rprm, q_r, qd_r)
    pd_r = J_r @ qd_r
    J_s = model_terms(c.tid, c.tprm, q_s, np.zeros(m))[2]
    Jpinv = _pinv(J_s)
    Pxi = c.P @ xi if r > 0 else np.zeros(m)
    qd_s = Jpinv @ pd_r + Pxi
    M_s, h_s, _, Jd_s, p_s = model_terms(c.tid, c.tprm, q_s, qd_s)
    f = wall_force(c.wall_on, c.wall_pos, c.wall_side, c.k_e, c.b_e, p_r, pd_r)
    d = signal(c.d_kind, c.d_amp, c.d_omega, c.d_ton, c.d_freqs, c.d_phases, t)
    tau_s = target_torque(c, t, J_s, qd_s, p_s, f)
    free, Mc_inv, Jdqd_s, a_free, a_tilde = target_terms(c, M_s, h_s, J_s, Jd_s, qd_s, tau_s, f)
    e_p = p_r - p_ref
    ed_p = pd_r - v_ref
    tau_c, tau_r, qdd_r, pdd_r, edd_p = emulate(
        c, t, M_r, h_r, J_r, Jd_r, qd_r, f, d, a_tilde, e_p, ed_p, Mc_inv, tau_state
    )
    dz = np.empty(z.shape[0])
    dz[:k] = qd_r
    dz[k:o_qs] = qdd_r
    phi = p_r - p_s
    if c.clik:
        base = qd_s if c.ff else Pxi
        dz[o_qs:o_xi] = base + np.ascontiguousarray(J_s.T) @ (c.K @ phi)
    else:
        dz[o_qs:o_xi] = qd_s
    if r > 0:
        # reduced dynamics N xi_dot = P^T free - (M P)^T J^+ c, constant P
        MP = M_s @ c.P
        PT = np.ascontiguousarray(c.P.T)
        N = PT @ MP
        rhs = PT @ free - np.ascontiguousarray(MP.T) @ (Jpinv @ (pdd_r - Jdqd_s))
        dz[o_xi:o_v] = np.linalg.solve(N, rhs)
    dz[o_v:o_p] = a_tilde
    dz[o_p:o_tau] = v_ref
    if c.lag:
        dz[o_tau:] = c.omega_a * (tau_c - tau_state)
    if rec:
        lam = np.linalg.solve(Mc_inv, pdd_r - a_free)
        _record(row, q_r, qd_r, q_s, qd_s, xi, p_r, p_s, phi, f, lam, e_p, f - lam, tau_s, tau_c, tau_r,
                edd_p, a_tilde, d, np.linalg.inv(Mc_inv))
    return dz


@njit(cache=True)
def rhs_b(t, z, c, rec, row):
    """Scheme B: emulator plus unconstrained target.

    State ``(q_r, qd_r, q_s, qd_s[, tau_r])``.
    """
    k, m, n, r = c.k, c.m, c.n, c.r
    o_qs = 2 * k
    o_qds = o_qs + m
    o_tau = o_qds + m
    q_r = z[:k]
    qd_r = z[k:o_qs]
    q_s = z[o_qs:o_qds]
    qd_s = z[o_qds:o_tau]
    tau_state = z[o_tau:]
    M_r, h_r, J_r, Jd_r, p_r = model_terms(c.rid, c.rprm, q_r, qd_r)
    pd_r = J_r @ qd_r
    M_s, h_s, J_s, Jd_s, p_s = model_terms(c.tid, c.tprm, q_s, qd_s)
    f = wall_force(c.wall_on, c.wall_pos, c.wall_side, c.k_e, c.b_e, p_r, pd_r)
    d = signal(c.d_kind, c.d_amp, c.d_omega, c.d_ton, c.d_freqs, c.d_phases, t)
    tau_s = target_torque(c, t, J_s, qd_s, p_s, f)
    free, Mc_inv, _, a_free, a_tilde = target_terms(c, M_s, h_s, J_s, Jd_s, qd_s, tau_s, f)
    e_p = p_r - p_s
    ed_p = pd_r - J_s @ qd_s
    tau_c, tau_r, qdd_r, pdd_r, edd_p = emulate(
        c, t, M_r, h_r, J_r, Jd_r, qd_r, f, d, a_tilde, e_p, ed_p, Mc_inv, tau_state
    )
    dz = np.empty(z.shape[0])
    dz[:k] = qd_r
    dz[k:o_qs] = qdd_r
    dz[o_qs:o_qds] = qd_s
    dz[o_qds:o_tau] = np.linalg.solve(M_s, free + np.ascontiguousarray(J_s.T) @ f)
    if c.lag:
        dz[o_tau:] = c.omega_a * (tau_c - tau_state)
    if rec:
        lam = np.linalg.solve(Mc_inv, pdd_r - a_free)
        xi = np.ascontiguousarray(c.P.T) @ qd_s if r > 0 else np.zeros(0)
        _record(row, q_r, qd_r, q_s, qd_s, xi, p_r, p_s, e_p, f, lam, e_p, f - lam, tau_s, tau_c, tau_r,
                edd_p, a_tilde, d, np.linalg.inv(Mc_inv))
    return dz


@njit(cache=True)
def rhs_oracle(t, z, c, rec, row):
    """The target robot touching the wall itself; state ``(q_s, qd_s)``."""
    m, n, r, k = c.m, c.n, c.r, c.k
    q_s = z[:m]
    qd_s = z[m:]
    M_s, h_s, J_s, _, p_s = model_terms(c.tid, c.tprm, q_s, qd_s)
    pd_s = J_s @ qd_s
    f = wall_force(c.wall_on, c.wall_pos, c.wall_side, c.k_e, c.b_e, p_s, pd_s)
    tau_s = target_torque(c, t, J_s, qd_s, p_s, f)
    dz = np.empty(z.shape[0])
    dz[:m] = qd_s
    dz[m:] = np.linalg.solve(M_s, c.B @ tau_s - h_s + np.ascontiguousarray(J_s.T) @ f)
    if rec:
        nan_k = np.full(k, np.nan)
        nan_n = np.full(n, np.nan)
        xi = np.ascontiguousarray(c.P.T) @ qd_s if r > 0 else np.zeros(0)
        _record(row, nan_k, nan_k, q_s, qd_s, xi, nan_n, p_s, nan_n, f, nan_n, nan_n, nan_n, tau_s,
                nan_k, nan_k, nan_n, nan_n, nan_n, np.full((n, n), np.nan))
    return dz


@njit(cache=True)
def rhs(scheme, t, z, c, rec, row):
    if scheme == SCHEME_A:
        return rhs_a(t, z, c, rec, row)
    if scheme == SCHEME_B:
        return rhs_b(t, z, c, rec, row)
    return rhs_oracle(t, z, c, rec, row)


@njit(cache=True)
def project(c, z):
    """Newton-Raphson projection of ``q_s`` onto ``p_s(q_s) = p_r``."""
    k, m = c.k, c.m
    o_qs = 2 * k
    p_r = model_terms(c.rid, c.rprm, z[:k], z[k:o_qs])[4]
    q = z[o_qs : o_qs + m].copy()
    zeros = np.zeros(m)
    for _ in range(c.nr_iter + 1):
        _, _, J, _, p = model_terms(c.tid, c.tprm, q, zeros)
        phi = p_r - p
        if np.sqrt(np.sum(phi * phi)) <= c.nr_tol:
            z[o_qs : o_qs + m] = q
            return True
        q = q + _pinv(J) @ phi
    return False


@njit(cache=True)
def integrate(scheme, c, z0, h, steps, every, t_out, rows):
    """Fixed-step RK4 from ``z0``; every ``every``-th state is recorded.

    Returns ``(status, step, recorded_rows, z)``; on failure ``step`` is the
    index of the step that could not be completed.
    """
    z = z0.copy()
    row = rows[0]
    nrec = 0
    half = 0.5 * h
    for i in range(steps):
        t = i * h
        record = i % every == 0
        if record:
            row = rows[nrec]
            t_out[nrec] = t
        try:
            k1 = rhs(scheme, t, z, c, record, row)
            k2 = rhs(scheme, t + half, z + half * k1, c, False, row)
            k3 = rhs(scheme, t + half, z + half * k2, c, False, row)
            k4 = rhs(scheme, t + h, z + h * k3, c, False, row)
        except Exception:  # noqa: BLE001 - singular solves surface here
            return SINGULAR, i + 1, nrec, z
        if record:
            nrec += 1
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if scheme == SCHEME_A and not c.clik:
            if not project(c, z):
                return CORRECTION_FAILED, i + 1, nrec, z
        if not np.all(np.isfinite(z)):
            return NON_FINITE, i + 1, nrec, z
    if steps % every == 0:
        t_out[nrec] = steps * h
        try:
            rhs(scheme, steps * h, z, c, True, rows[nrec])
        except Exception:  # noqa: BLE001
            return SINGULAR, steps, nrec, z
        nrec += 1
    return OK, steps, nrec, z
