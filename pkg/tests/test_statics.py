import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tendonspace.errors import GeometryDomainError, SingularGeometryError
from tendonspace.geometry import (
    AttachmentPoint,
    EntryPoint,
    OvertubeSpec,
    Pose,
    ScaffoldCylinder,
    build_overtube,
)
from tendonspace.statics import (
    FIVE_DOF,
    SIX_DOF,
    TendonConfiguration,
    Wrench,
    is_wrench_feasible,
    reflect_configuration,
    reflect_wrench,
    tension_distribution,
    wrench_matrix,
    wrench_matrix_from_points,
)

from .oracles import (
    cvxpy_reference,
    enumeration_reference,
    nullspace_interval,
    random_cylinder_instance,
)


def _identity_pose():
    return Pose(position=np.zeros(3))


class TestWrenchMatrix:
    def test_single_tendon_through_reference_point(self):
        # Attachment at the origin, entry straight ahead on +X: pure force.
        entries = np.array([[50.0, 0.0, 0.0]])
        attachments = np.array([[0.0, 0.0, 0.0]])
        A = wrench_matrix_from_points(entries, attachments, _identity_pose(), FIVE_DOF)
        assert_allclose(A[:, 0], [1.0, 0.0, 0.0, 0.0, 0.0], atol=1e-15)

    def test_hand_cross_product(self):
        # Attachment at (0, 10, 0) relative to the tip, pulling along +Z.
        entries = np.array([[0.0, 10.0, 40.0]])
        attachments = np.array([[0.0, 10.0, 0.0]])
        A = wrench_matrix_from_points(entries, attachments, _identity_pose(), FIVE_DOF)
        # r x u = (10, 0, 0): roll moment only, which five_dof drops.
        assert_allclose(A[:3, 0], [0.0, 0.0, 1.0], atol=1e-15)
        assert_allclose(A[3:, 0], [0.0, 0.0], atol=1e-12)
        A6 = wrench_matrix_from_points(entries, attachments, _identity_pose(), SIX_DOF)
        assert_allclose(A6[3:, 0], [10.0, 0.0, 0.0], atol=1e-12)

    def test_degenerate_tendon_raises(self):
        pts = np.array([[10.0, 0.0, 0.0]])
        with pytest.raises(SingularGeometryError):
            wrench_matrix_from_points(pts, pts.copy(), _identity_pose(), FIVE_DOF)

    def test_mirror_negates_y_rows(self):
        rng = np.random.default_rng(3)
        entries = rng.normal(size=(7, 3)) * 20
        attachments = rng.normal(size=(7, 3)) * 10
        pose = Pose(position=np.array([1.0, 2.0, 3.0]))
        A = wrench_matrix_from_points(entries, attachments, pose, SIX_DOF)
        refl = np.array([1.0, -1.0, 1.0])
        pose_r = Pose(position=pose.position * refl)
        A_r = wrench_matrix_from_points(
            entries * refl, attachments * refl, pose_r, SIX_DOF
        )
        # Force y row and moment x/z rows flip sign.
        signs = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
        assert_allclose(A_r, signs[:, None] * A, atol=1e-12)


class TestTensionDistribution:
    def test_antagonistic_pair_at_rest(self):
        A = np.array([[1.0, -1.0]])
        sol = tension_distribution(A, np.zeros(1), 1.0, 60.0)
        assert sol.feasible
        assert_allclose(sol.tensions, [1.0, 1.0], atol=1e-9)

    def test_antagonistic_pair_loaded(self):
        # Net +5 N along X required: w = (-5,).
        A = np.array([[1.0, -1.0]])
        sol = tension_distribution(A, np.array([-5.0]), 1.0, 60.0)
        assert sol.feasible
        assert_allclose(sol.tensions, [6.0, 1.0], atol=1e-9)

    def test_capacity_exceeded(self):
        A = np.array([[1.0, -1.0]])
        sol = tension_distribution(A, np.array([-200.0]), 1.0, 60.0)
        assert not sol.feasible
        assert sol.margin == 0.0

    def test_degenerate_box_point(self):
        A = np.array([[1.0, -1.0]])
        sol = tension_distribution(A, np.array([-5.0]), 1.0, 1.0)
        assert not sol.feasible
        sol_ok = tension_distribution(A, np.zeros(1), 1.0, 1.0)
        assert sol_ok.feasible

    def test_rank_deficient_raises(self):
        A = np.zeros((2, 4))
        A[0] = [1.0, -1.0, 1.0, -1.0]
        A[1] = A[0]
        with pytest.raises(SingularGeometryError):
            tension_distribution(A, np.zeros(2), 1.0, 60.0)

    def test_infeasible_diagnostic_is_equilibrium(self):
        A = np.array([[1.0, -1.0]])
        w = np.array([-200.0])
        sol = tension_distribution(A, w, 1.0, 60.0)
        assert not sol.feasible
        # The diagnostic point still satisfies the equilibrium exactly.
        assert np.abs(A @ sol.tensions + w).max() < 1e-9

    def test_determinism_bitwise(self):
        rng = np.random.default_rng(11)
        A, w = random_cylinder_instance(rng)
        s1 = tension_distribution(A, w, 1.0, 60.0)
        s2 = tension_distribution(A, w, 1.0, 60.0)
        assert s1.feasible == s2.feasible
        assert s1.margin == s2.margin
        assert s1.residual == s2.residual
        assert np.array_equal(s1.tensions, s2.tensions)


class TestOracleAgreement:
    def test_feasibility_matches_interval_oracle(self):
        rng = np.random.default_rng(2024)
        checked = 0
        for _ in range(400):
            A, w = random_cylinder_instance(rng)
            feas_o, lo, hi, degeneracy = nullspace_interval(A, w, 1.0, 60.0)
            if degeneracy < 1e-6:
                continue
            sol = tension_distribution(A, w, 1.0, 60.0)
            assert sol.feasible == feas_o, (A, w, lo, hi)
            checked += 1
        assert checked > 300

    def test_feasible_solutions_satisfy_invariants(self):
        rng = np.random.default_rng(77)
        seen_feasible = 0
        for _ in range(200):
            A, w = random_cylinder_instance(rng)
            sol = tension_distribution(A, w, 1.0, 60.0)
            if not sol.feasible:
                continue
            seen_feasible += 1
            w_scale = max(1.0, np.abs(w).max())
            assert np.abs(A @ sol.tensions + w).max() <= 1e-9 * w_scale
            assert np.all(sol.tensions >= 1.0 - 1e-9)
            assert np.all(sol.tensions <= 60.0 + 1e-9)
        assert seen_feasible > 20

    def test_optimality_against_enumeration(self):
        # Exhaustive active-set enumeration is a fully independent
        # implementation of the same minimization.
        rng = np.random.default_rng(5)
        compared = 0
        for _ in range(60):
            A, w = random_cylinder_instance(rng)
            ref = enumeration_reference(A, w, 1.0, 60.0)
            sol = tension_distribution(A, w, 1.0, 60.0)
            assert sol.feasible == (ref is not None)
            if ref is None:
                continue
            assert_allclose(sol.tensions, ref, atol=1e-6)
            compared += 1
        assert compared > 15

    def test_optimality_against_cvxpy(self):
        rng = np.random.default_rng(15)
        compared = 0
        attempts = 0
        while compared < 6 and attempts < 60:
            attempts += 1
            A, w = random_cylinder_instance(rng)
            sol = tension_distribution(A, w, 1.0, 60.0)
            if not sol.feasible:
                continue
            ref = cvxpy_reference(A, w, 1.0, 60.0)
            assert ref is not None
            assert_allclose(sol.tensions, ref, atol=5e-5)
            compared += 1
        assert compared == 6

    def test_optimality_six_dof_redundancy(self):
        # n - m > 1: nullspace dimension 2 exercises the active-set path.
        rng = np.random.default_rng(6)
        compared = 0
        for _ in range(20):
            A, w = random_cylinder_instance(rng, n=8, dof_mode=SIX_DOF)
            try:
                sol = tension_distribution(A, w, 1.0, 60.0)
            except SingularGeometryError:
                continue  # e.g. no roll moment arm at all
            ref = enumeration_reference(A, w, 1.0, 60.0)
            assert sol.feasible == (ref is not None)
            if ref is None:
                continue
            assert_allclose(sol.tensions, ref, atol=1e-6)
            compared += 1
        assert compared > 4

    def test_monotonicity_in_bounds(self):
        rng = np.random.default_rng(8)
        for _ in range(150):
            A, w = random_cylinder_instance(rng)
            narrow = tension_distribution(A, w, 1.0, 60.0)
            wide = tension_distribution(A, w, 0.5, 120.0)
            if narrow.feasible:
                assert wide.feasible

    def test_convexity_of_feasible_wrenches(self):
        rng = np.random.default_rng(9)
        tried = 0
        for _ in range(400):
            if tried >= 25:
                break
            A, w1 = random_cylinder_instance(rng)
            _, w2 = random_cylinder_instance(rng)
            w2 = w2[: A.shape[0]]
            s1 = tension_distribution(A, w1, 1.0, 60.0)
            s2 = tension_distribution(A, w2, 1.0, 60.0)
            if not (s1.feasible and s2.feasible):
                continue
            tried += 1
            for alpha in (0.25, 0.5, 0.75):
                wm = alpha * w1 + (1 - alpha) * w2
                _, _, _, degeneracy = nullspace_interval(A, wm, 1.0, 60.0)
                if degeneracy < 1e-9:
                    continue
                mix = tension_distribution(A, wm, 1.0, 60.0)
                assert mix.feasible
        assert tried >= 10


def _hexagon_config(dof_mode=FIVE_DOF):
    """Six-tendon layout used across the statics/workspace tests."""
    scaffold = ScaffoldCylinder(diameter=70.0, length=150.0)
    overtube = OvertubeSpec.straight(total_length=120.0)
    model = build_overtube(overtube)
    phase = math.pi / 2
    angles = [phase, phase + 2 * math.pi / 3, phase + 4 * math.pi / 3]
    entries = [EntryPoint(angle=a, axial=145.0) for a in angles]
    entries += [EntryPoint(angle=a, axial=5.0) for a in angles]
    attachments = [
        AttachmentPoint(model.surface_point(10.0, a)) for a in angles
    ] + [AttachmentPoint(model.surface_point(50.0, a)) for a in angles]
    return TendonConfiguration(
        scaffold=scaffold,
        overtube=overtube,
        entries=tuple(entries),
        attachments=tuple(attachments),
        dof_mode=dof_mode,
    )


class TestConfigurationLevel:
    def test_force_closure_pose_feasible_at_zero_wrench(self):
        config = _hexagon_config()
        pose = Pose(position=np.array([75.0, 0.0, 0.0]))
        ok, margin = is_wrench_feasible(config, pose, Wrench.zero())
        # The minimizer hugs t_min, so the margin may legitimately be 0.
        assert ok and margin >= 0.0
        # Cross-check with the oracle on the same matrix.
        A = wrench_matrix(config, pose)
        feas, *_ = nullspace_interval(A, np.zeros(5), 1.0, 60.0)
        assert feas

    def test_gravity_wrench_feasible(self):
        config = _hexagon_config()
        pose = Pose(position=np.array([75.0, 0.0, 0.0]))
        ok, _ = is_wrench_feasible(config, pose, Wrench.gravity(-0.1))
        assert ok
        A = wrench_matrix(config, pose)
        feas, *_ = nullspace_interval(
            A, np.array([0.0, 0.0, -0.1, 0.0, 0.0]), 1.0, 60.0
        )
        assert feas

    def test_mirrored_configuration_same_tensions(self):
        config = _hexagon_config()
        mirrored = reflect_configuration(config)
        pose = Pose(position=np.array([70.0, 5.0, -3.0]), yaw=0.08, pitch=0.05)
        from tendonspace.geometry import reflect_pose

        pose_m = reflect_pose(pose)
        w = Wrench(np.array([0.3, 0.15, -0.4]), np.array([3.0, -2.0]))
        w_m = reflect_wrench(w)
        A = wrench_matrix(config, pose)
        A_m = wrench_matrix(mirrored, pose_m)
        signs = np.array([1.0, -1.0, 1.0, 1.0, -1.0])
        assert_allclose(A_m, signs[:, None] * A, atol=1e-12)
        sol = tension_distribution(A, w.as_vector(), 1.0, 60.0)
        sol_m = tension_distribution(A_m, w_m.as_vector(), 1.0, 60.0)
        assert sol.feasible == sol_m.feasible
        assert sol.feasible
        assert_allclose(sol_m.tensions, sol.tensions, atol=1e-9)

    def test_validation_rejects_offsurface_attachment(self):
        config = _hexagon_config()
        bad = list(config.attachments)
        bad[0] = AttachmentPoint(np.array([-10.0, 0.0, 0.0]))  # on centerline
        with pytest.raises(GeometryDomainError):
            TendonConfiguration(
                scaffold=config.scaffold,
                overtube=config.overtube,
                entries=config.entries,
                attachments=tuple(bad),
            )

    def test_validation_requires_redundancy(self):
        config = _hexagon_config()
        with pytest.raises(GeometryDomainError):
            TendonConfiguration(
                scaffold=config.scaffold,
                overtube=config.overtube,
                entries=config.entries[:5],
                attachments=config.attachments[:5],
            )
