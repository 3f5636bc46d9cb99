import numpy as np
import pytest

from softwrench.core import Pose, Wrench
from softwrench.gripper import (Cylinder, GripperModel, Plane, SceneSurface,
                                SpringPile, Tether, contact_wrench, deform,
                                gripper_preset, solve_equilibrium)


def _point_model(tip_a, tip_b, compliance_diag=1e-3, max_deflection=1.0):
    """Two-node-chain gripper with prescribed fingertips, for contact oracles."""
    def chain(tip):
        tip = np.asarray(tip, dtype=float)
        return np.stack([tip * f for f in (0.0, 1 / 3, 2 / 3, 1.0)])
    return GripperModel(
        kind="tendon_actuated",
        skeleton=np.stack([chain(tip_a), chain(tip_b)]),
        compliance=np.diag([compliance_diag] * 6),
        aperture=1.0,
        max_deflection=max_deflection,
    )


class TestPresets:
    def test_pneumatic_softer_by_at_least_2x(self):
        t = gripper_preset("tendon_actuated")
        p = gripper_preset("pneumatic")
        assert np.all(np.diag(p.compliance) >= 2.0 * np.diag(t.compliance))

    def test_compliance_must_be_spd(self):
        with pytest.raises(ValueError, match="positive definite"):
            GripperModel(kind="tendon_actuated",
                         skeleton=gripper_preset("tendon_actuated").skeleton,
                         compliance=-np.eye(6), aperture=1.0, max_deflection=0.03)

    def test_skeleton_mirror_symmetric(self):
        sk = gripper_preset("tendon_actuated").skeleton
        assert np.allclose(sk[0] * [-1, 1, 1], sk[1])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            gripper_preset("hydraulic")


class TestDeform:
    def test_zero_wrench_is_rest(self):
        g = gripper_preset("tendon_actuated")
        cfg = deform(g, Wrench.zero())
        assert np.array_equal(cfg.nodes, g.skeleton)

    def test_identity_compliance_millimeter(self):
        g = _point_model([0.05, 0.05, -0.1], [-0.05, 0.05, -0.1])
        cfg = deform(g, Wrench([1, 0, 0], [0, 0, 0]))
        assert np.allclose(cfg.tip_deflections[:, 0], 1e-3, atol=1e-15)
        assert np.allclose(cfg.tip_deflections[:, 1:], 0.0, atol=1e-15)

    def test_linearity_below_clamp(self):
        g = gripper_preset("tendon_actuated")
        w = Wrench([0.5, -0.3, 1.0], [0.02, 0.01, -0.03])
        base = deform(g, w).nodes - g.skeleton
        for a in (0.5, 2.0):
            scaled = deform(g, Wrench(w.force * a, w.torque * a)).nodes - g.skeleton
            assert np.abs(scaled - a * base).max() <= 1e-12

    def test_clamp_limits_node_displacement(self):
        g = gripper_preset("tendon_actuated")
        cfg = deform(g, Wrench([500.0, 0, 0], [0, 0, 0]))
        disp = np.linalg.norm(cfg.nodes - g.skeleton, axis=2)
        assert disp.max() <= g.max_deflection + 1e-12


class TestContactWrench:
    def test_no_penetration_zero(self):
        g = _point_model([0.05, 0.0, -0.1], [-0.05, 0.0, -0.1])
        w = contact_wrench(g, Pose(np.zeros(3)), SceneSurface(Plane(-0.11)),
                          np.zeros(3))
        assert np.array_equal(w.as_array(), np.zeros(6))

    def test_single_tip_cross_product(self):
        # Tip at r=(0.05, 0, -0.1) penetrating a z-plane by 1 mm at 1000 N/m:
        # force (0,0,1) N, torque r x F = (0, -0.05, 0) N*m.
        g = _point_model([0.05, 0.0, -0.1], [0.05, 0.0, 1.0])
        surf = SceneSurface(Plane(-0.099), contact_stiffness=1000.0)
        w = contact_wrench(g, Pose(np.zeros(3)), surf, np.zeros(3))
        assert np.allclose(w.force, [0, 0, 1.0], atol=1e-12)
        assert np.allclose(w.torque, [0, -0.05, 0], atol=1e-12)

    def test_tether_pull_magnitude(self):
        # Anchor at origin, slack 1 m, stiffness 10 N/m, grip 1.2 m away.
        g = _point_model([0.0, 0.0, -1.2], [0.0, 0.0, -1.2])
        surf = SceneSurface(Tether(anchor=(0, 0, 0), slack_length=1.0,
                                   stiffness=10.0))
        w = contact_wrench(g, Pose(np.zeros(3)), surf, np.zeros(3))
        assert np.allclose(np.linalg.norm(w.force), 2.0, atol=1e-9)
        assert w.force[2] > 0  # pulls the grip point up toward the anchor

    def test_friction_opposes_tangential_velocity(self):
        g = _point_model([0.0, 0.0, -0.1], [0.0, 0.0, 1.0])
        surf = SceneSurface(Plane(-0.095), friction_mu=0.5,
                            contact_stiffness=1000.0)
        w = contact_wrench(g, Pose(np.zeros(3)), surf, np.array([0.1, 0.0, 0.0]))
        normal = 1000.0 * 0.005
        assert np.allclose(w.force[2], normal, atol=1e-9)
        assert np.allclose(w.force[0], -0.5 * normal, atol=1e-9)

    def test_torque_equals_sum_of_cross_products(self):
        # Brute-force oracle: recompute per-tip penalty forces and moments.
        g = gripper_preset("tendon_actuated")
        pose = Pose(np.array([0.01, -0.02, -0.03]), yaw=0.3)
        surf = SceneSurface(Plane(-0.10), friction_mu=0.0,
                            contact_stiffness=400.0)
        w = contact_wrench(g, pose, surf, np.zeros(3))
        R = pose.rotation()
        force = np.zeros(3)
        torque = np.zeros(3)
        for tip in pose.to_world(g.rest_tips):
            depth = -0.10 - tip[2]
            if depth > 0:
                f = np.array([0.0, 0.0, 400.0 * depth])
                force += f
                torque += np.cross(tip - pose.position, f)
        assert np.allclose(w.force, R.T @ force, atol=1e-9)
        assert np.allclose(w.torque, R.T @ torque, atol=1e-9)

    def test_cylinder_radial_normal(self):
        g = _point_model([0.0, 0.0, -0.1], [0.0, 0.0, 1.0])
        cyl = Cylinder(axis_point=(0.0, 0.0, -0.16), radius=0.065)
        w = contact_wrench(g, Pose(np.zeros(3)), SceneSurface(cyl), np.zeros(3))
        assert w.force[2] > 0.0
        assert abs(w.force[0]) < 1e-12

    def test_cylinder_finite_length(self):
        g = _point_model([0.0, 0.0, -0.1], [0.0, 0.0, 1.0])
        cyl = Cylinder(axis_point=(1.0, 0.0, -0.16), radius=0.055,
                       half_length=0.5)
        w = contact_wrench(g, Pose(np.zeros(3)), SceneSurface(cyl), np.zeros(3))
        assert np.array_equal(w.as_array(), np.zeros(6))


class TestSolveEquilibrium:
    def test_free_space_one_iteration(self):
        g = gripper_preset("tendon_actuated")
        res = solve_equilibrium(g, Pose(np.zeros(3)),
                                SceneSurface(Plane(-1.0)), np.zeros(3))
        assert res.converged and res.iterations == 1
        assert np.array_equal(res.wrench.as_array(), np.zeros(6))
        assert np.array_equal(res.config.nodes, g.skeleton)

    def test_self_consistency_small_stiffness(self):
        g = gripper_preset("tendon_actuated")
        pose = Pose(np.array([0.0, 0.0, -0.03]))
        surf = SceneSurface(Plane(-0.11), contact_stiffness=1.0)
        res = solve_equilibrium(g, pose, surf, np.zeros(3))
        assert res.converged
        again = contact_wrench(g, pose, surf, np.zeros(3), config=res.config)
        assert np.abs(again.as_array() - res.wrench.as_array()).max() <= 1e-6

    def test_self_consistency_working_stiffness(self):
        g = gripper_preset("tendon_actuated")
        pose = Pose(np.array([0.01, 0.0, -0.025]), yaw=0.2)
        surf = SceneSurface(Plane(-0.11), friction_mu=0.4,
                            contact_stiffness=250.0)
        res = solve_equilibrium(g, pose, surf, np.array([0.05, 0.0, 0.0]))
        assert res.converged
        again = contact_wrench(g, pose, surf, np.array([0.05, 0.0, 0.0]),
                               config=res.config)
        assert np.abs(again.as_array() - res.wrench.as_array()).max() <= 1e-6

    def test_monotone_force_with_depth(self):
        g = gripper_preset("tendon_actuated")
        surf = SceneSurface(Plane(-0.11), contact_stiffness=250.0)
        mags = []
        for depth in np.linspace(0.001, 0.02, 10):
            pose = Pose(np.array([0.0, 0.0, -0.005 - depth]))
            res = solve_equilibrium(g, pose, surf, np.zeros(3))
            mags.append(float(np.linalg.norm(res.wrench.force)))
        assert all(b > a for a, b in zip(mags, mags[1:]))

    def test_action_reaction_sign(self):
        g = gripper_preset("tendon_actuated")
        res = solve_equilibrium(g, Pose(np.array([0.0, 0.0, -0.02])),
                                SceneSurface(Plane(-0.11)), np.zeros(3))
        assert res.wrench.force[2] > 0.0

    def test_nonconvergence_flag_instead_of_abort(self):
        # Stiffness far past the contraction limit: must return, flag false.
        g = gripper_preset("pneumatic")
        surf = SceneSurface(Plane(-0.11), contact_stiffness=5000.0)
        res = solve_equilibrium(g, Pose(np.array([0.0, 0.0, -0.05])), surf,
                                np.zeros(3))
        assert res.iterations == 50 and not res.converged
        assert np.isfinite(res.wrench.as_array()).all()

    def test_external_wrench_included_and_deforms(self):
        g = gripper_preset("tendon_actuated")
        ext = Wrench([0.0, 1.5, 0.0], [0, 0, 0])
        res = solve_equilibrium(g, Pose(np.zeros(3)), SceneSurface(Plane(-1.0)),
                                np.zeros(3), external=ext)
        assert np.allclose(res.wrench.as_array(), ext.as_array())
        assert res.config.tip_deflections[0, 1] > 0.0

    def test_spring_pile_contact(self):
        g = gripper_preset("tendon_actuated")
        surf = SceneSurface(SpringPile(rest_height=-0.11, stiffness=250.0))
        res = solve_equilibrium(g, Pose(np.array([0.0, 0.0, -0.02])), surf,
                                np.zeros(3))
        assert res.wrench.force[2] > 0.5


class TestSurfaceValidation:
    def test_friction_range(self):
        with pytest.raises(ValueError):
            SceneSurface(Plane(0.0), friction_mu=2.5)

    def test_positive_radius(self):
        with pytest.raises(ValueError):
            SceneSurface(Cylinder(radius=-0.1))

    def test_positive_stiffness(self):
        with pytest.raises(ValueError):
            SceneSurface(Plane(0.0), contact_stiffness=0.0)
