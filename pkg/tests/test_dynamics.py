"""Model terms against an independent symbolic Lagrangian oracle."""

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from roboemu.dynamics import (
    IntegratorConfig,
    PoseTransform,
    ScaledInertia,
    eval_dynamics,
    forward_accel,
    integrate_step,
    rk4_step,
    selection_matrix,
)
from roboemu.errors import DimensionError, IntegrationError, SingularConfigurationError
from roboemu.models import (
    FlexibleJointArm,
    FlexibleTwoLinkArm,
    OneLinkArm,
    RigidAsTarget,
    TwoLinkArm,
    build_rigid,
    build_target,
)


def _planar_2r_oracle(arm, flexible: bool):
    """Lagrangian ``M, h, J, Jdot, p`` of a planar 2R chain, derived symbolically."""
    q1, q2, d1, d2 = sp.symbols("q1 q2 d1 d2")
    l1, l2, lc1, lc2 = arm.l1, arm.l2, arm.lc1, arm.lc2
    m1, m2, I1, I2 = arm.m1, arm.m2, arm.I1, arm.I2
    x1 = sp.Matrix([lc1 * sp.cos(q1), lc1 * sp.sin(q1)])
    x2 = sp.Matrix([l1 * sp.cos(q1) + lc2 * sp.cos(q1 + q2), l1 * sp.sin(q1) + lc2 * sp.sin(q1 + q2)])
    q = sp.Matrix([q1, q2])
    qd = sp.Matrix([d1, d2])
    v1 = x1.jacobian(q) * qd
    v2 = x2.jacobian(q) * qd
    T = sp.Rational(1, 2) * (m1 * v1.dot(v1) + m2 * v2.dot(v2) + I1 * d1**2 + I2 * (d1 + d2) ** 2)
    M = sp.hessian(T, qd).applyfunc(sp.simplify)
    # Christoffel form of the velocity-product terms
    cor = sp.zeros(2, 1)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                c = sp.Rational(1, 2) * (sp.diff(M[i, j], q[k]) + sp.diff(M[i, k], q[j]) - sp.diff(M[j, k], q[i]))
                cor[i] += c * qd[j] * qd[k]
    g = getattr(arm, "g", 0.0) if not flexible else 0.0
    V = g * (m1 * x1[1] + m2 * x2[1])
    grav = sp.Matrix([sp.diff(V, s) for s in q])
    tip = sp.Matrix([l1 * sp.cos(q1) + l2 * sp.cos(q1 + q2), l1 * sp.sin(q1) + l2 * sp.sin(q1 + q2)])
    J = tip.jacobian(q)
    Jdot = sp.zeros(2, 2)
    for k in range(2):
        Jdot += sp.diff(J, q[k]) * qd[k]
    args = (q1, q2, d1, d2)
    return tuple(sp.lambdify(args, e, "numpy") for e in (M, cor + grav, J, Jdot, tip))


@pytest.fixture(scope="module")
def oracle_2r():
    return _planar_2r_oracle(TwoLinkArm(), flexible=False)


@pytest.fixture(scope="module")
def oracle_flex_2r():
    return _planar_2r_oracle(FlexibleTwoLinkArm(), flexible=True)


angles = st.floats(-math.pi, math.pi)
rates = st.floats(-3.0, 3.0)


@given(angles, angles, rates, rates)
def test_two_link_matches_lagrangian(oracle_2r, a, b, u, v):
    arm = TwoLinkArm()
    M, hv, J, Jd, p = (np.asarray(f(a, b, u, v), dtype=float) for f in oracle_2r)
    dyn = arm.evaluate([a, b], [u, v])
    np.testing.assert_allclose(dyn.M, M, atol=1e-12)
    np.testing.assert_allclose(dyn.h, hv.ravel() + arm.c * np.array([u, v]), atol=1e-11)
    np.testing.assert_allclose(dyn.J, J, atol=1e-12)
    np.testing.assert_allclose(dyn.Jdot, Jd, atol=1e-12)
    np.testing.assert_allclose(dyn.p, p.ravel(), atol=1e-12)


@given(st.lists(angles, min_size=4, max_size=4), st.lists(rates, min_size=4, max_size=4))
def test_flexible_two_link_matches_lagrangian(oracle_flex_2r, q, qd):
    arm = FlexibleTwoLinkArm(c_s=0.02)
    M, hv, J, Jd, p = (np.asarray(f(q[0], q[1], qd[0], qd[1]), dtype=float) for f in oracle_flex_2r)
    dyn = arm.evaluate(q, qd)
    q, qd = np.array(q), np.array(qd)
    k, z = np.array(arm.k), np.array(arm.zeta)
    spring = k * (q[:2] - q[2:]) + z * (qd[:2] - qd[2:])
    h = np.concatenate([hv.ravel() + spring, -spring + arm.c_s * qd[2:]])
    np.testing.assert_allclose(dyn.M[:2, :2], M, atol=1e-12)
    np.testing.assert_allclose(dyn.M[2:, 2:], np.diag(arm.jm), atol=1e-15)
    assert not dyn.M[:2, 2:].any()
    np.testing.assert_allclose(dyn.h, h, atol=1e-11)
    np.testing.assert_allclose(dyn.J[:, :2], J, atol=1e-12)
    assert not dyn.J[:, 2:].any()
    np.testing.assert_allclose(dyn.Jdot[:, :2], Jd, atol=1e-12)
    np.testing.assert_allclose(dyn.p, p.ravel(), atol=1e-12)


def test_flexible_joint_arm_equations():
    arm = FlexibleJointArm(c_s=0.01)
    q, qd = np.array([0.2, 0.5]), np.array([-0.3, 0.7])
    dyn = arm.evaluate(q, qd)
    spring = arm.k * (q[1] - q[0]) + arm.zeta * (qd[1] - qd[0])
    np.testing.assert_array_equal(dyn.M, np.diag([0.05, 0.1]))
    np.testing.assert_allclose(dyn.h, [-spring, spring + 0.01 * qd[1]], rtol=1e-15)
    np.testing.assert_array_equal(dyn.J, [[0.3, 0.0]])
    np.testing.assert_array_equal(dyn.Jdot, [[0.0, 0.0]])
    np.testing.assert_allclose(dyn.p, [0.3 * 0.2])


def test_one_link_arm_equations():
    arm = OneLinkArm()
    dyn = arm.evaluate([0.4], [1.5])
    assert dyn.M[0, 0] == 0.05
    np.testing.assert_allclose(dyn.h, [0.022 * 1.5 + 0.5 * math.cos(0.4)], rtol=1e-15)
    np.testing.assert_allclose(dyn.J, [[0.3]])
    np.testing.assert_allclose(dyn.p, [0.12])


@given(angles, angles, rates, rates)
def test_jacobian_and_rate_are_derivatives_of_pose(a, b, u, v):
    arm = TwoLinkArm()
    q, qd, eps = np.array([a, b]), np.array([u, v]), 1e-6
    dyn = arm.evaluate(q, qd)
    Jfd = np.column_stack([(arm.pose(q + eps * e) - arm.pose(q - eps * e)) / (2 * eps) for e in np.eye(2)])
    np.testing.assert_allclose(dyn.J, Jfd, atol=1e-8)
    Jdfd = (arm.jacobian(q + eps * qd) - arm.jacobian(q - eps * qd)) / (2 * eps)
    np.testing.assert_allclose(dyn.Jdot, Jdfd, atol=1e-7)


@given(angles, angles)
def test_inertia_symmetric_positive_definite(a, b):
    for arm in (TwoLinkArm(), FlexibleTwoLinkArm()):
        q = np.zeros(arm.dof)
        q[:2] = a, b
        M = arm.evaluate(q, np.zeros(arm.dof)).M
        np.testing.assert_allclose(M, M.T, atol=0)
        assert np.linalg.eigvalsh(M)[0] > 0


def test_energy_balance_of_free_flexible_arm():
    # no damping, no friction: kinetic plus spring energy is conserved
    arm = FlexibleTwoLinkArm(zeta=(0.0, 0.0), c_s=0.0)
    y = np.array([0.3, -0.2, 0.5, 0.1, 0.0, 0.4, -0.3, 0.2])

    def f(t, y):
        q, qd = y[:4], y[4:]
        return np.concatenate([qd, forward_accel(arm, q, qd, np.zeros(2), np.zeros(2))])

    def energy(y):
        q, qd = y[:4], y[4:]
        return 0.5 * qd @ arm.evaluate(q, qd).M @ qd + arm.potential(q)

    e0 = energy(y)
    for _ in range(8000):
        y = rk4_step(f, 0.0, y, 2.5e-4)
    assert abs(energy(y) - e0) < 1e-8 * abs(e0)


def test_forward_accel_includes_contact_force():
    arm = TwoLinkArm()
    q, qd, tau, f = np.array([0.3, 0.9]), np.array([0.1, -0.2]), np.array([1.0, 0.5]), np.array([2.0, -1.0])
    dyn = arm.evaluate(q, qd)
    expect = np.linalg.solve(dyn.M, tau - dyn.h + dyn.J.T @ f)
    np.testing.assert_allclose(forward_accel(arm, q, qd, tau, f), expect, rtol=1e-13)


def test_eval_dynamics_checks_shapes_and_finiteness():
    arm = TwoLinkArm()
    with pytest.raises(DimensionError):
        eval_dynamics(arm, [0.0], [0.0, 0.0])
    with pytest.raises(DimensionError):
        eval_dynamics(arm, [np.nan, 0.0], [0.0, 0.0])
    assert eval_dynamics(arm, [0.1, 0.2], [0.0, 0.0]).M.shape == (2, 2)


def test_eval_dynamics_rejects_indefinite_inertia():
    class Broken(OneLinkArm):
        def evaluate(self, q, qd):
            dyn = super().evaluate(q, qd)
            return dyn._replace(M=-dyn.M)

    with pytest.raises(SingularConfigurationError):
        eval_dynamics(Broken(), [0.0], [0.0])


def test_scaled_inertia_scales_only_the_inertia():
    base = TwoLinkArm()
    scaled = ScaledInertia(base, 3.0)
    q, qd = [0.2, 0.4], [0.3, -0.1]
    a, b = base.evaluate(q, qd), scaled.evaluate(q, qd)
    np.testing.assert_allclose(b.M, 3.0 * a.M)
    np.testing.assert_array_equal(b.h, a.h)
    assert scaled.kernel_params[-1] == 3.0
    with pytest.raises(ValueError):
        ScaledInertia(base, 0.0)


def test_two_link_reference_values():
    # frozen from the symbolic oracle at one state
    dyn = TwoLinkArm().evaluate([0.1, 0.4], [0.1, 0.4])
    np.testing.assert_allclose(dyn.h, [11.6946, 1.9574], atol=5e-5)


def test_builders_and_validation():
    assert isinstance(build_rigid("one_link", {"m_r": 0.1}), OneLinkArm)
    assert isinstance(build_target("flexible_joint_1dof"), FlexibleJointArm)
    assert isinstance(build_target("two_link"), RigidAsTarget)
    with pytest.raises(KeyError):
        build_rigid("one_link", {"bogus": 1.0})
    with pytest.raises(ValueError):
        FlexibleJointArm(k=0.0)
    with pytest.raises(ValueError):
        OneLinkArm(m_r=float("nan"))
    assert build_target("flexible_two_link", {"k": [10.0, 20.0]}).k == (10.0, 20.0)


def test_selection_and_drive_jacobian():
    B = selection_matrix([1], 2)
    np.testing.assert_array_equal(B, [[0.0], [1.0]])
    arm = FlexibleJointArm()
    np.testing.assert_array_equal(arm.drive_jacobian(np.zeros(2)), [[0.3]])
    two = FlexibleTwoLinkArm()
    q = np.array([0.3, 0.5, 0.0, 0.0])
    np.testing.assert_allclose(two.drive_jacobian(q), two.jacobian(q)[:, :2])


def test_rk4_is_fourth_order():
    # y'' = -y, exact y = cos t
    def f(t, y):
        return np.array([y[1], -y[0]])

    errs = []
    for h in (0.1, 0.05):
        y = np.array([1.0, 0.0])
        for i in range(int(round(2.0 / h))):
            y = rk4_step(f, i * h, y, h)
        errs.append(abs(y[0] - math.cos(2.0)))
    assert 14.0 < errs[0] / errs[1] < 18.0


def test_integrate_step_guards():
    with pytest.raises(ValueError):
        integrate_step(np.zeros(1), lambda t, y: y, 0.0)
    with pytest.raises(IntegrationError):
        integrate_step(np.ones(1), lambda t, y: np.array([np.inf]), 0.1)
    with pytest.raises(ValueError):
        IntegratorConfig(h=-1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")


def test_planar_pose_transform_is_identity():
    T = PoseTransform(2)
    np.testing.assert_array_equal(T.matrix(), np.eye(2))
    np.testing.assert_array_equal(T.apply([1.0, 2.0]), [1.0, 2.0])
