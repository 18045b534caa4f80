import numpy as np
import pytest

import hadamard.right_inverse as ri
from conftest import SCALAR_PROFILES, bisection_inverse
from hadamard.descent import DescentConfig, Stalled, Status, check_trace, solve_pointwise
from hadamard.maps import affine, make_map, normalized
from hadamard.right_inverse import (
    CompactSample,
    NotACollision,
    RightInverseState,
    Verdict,
    adjacent_continuity,
    certify_pair,
    functional_step,
    lift_analysis,
    max_residual,
    sample_segment_image,
    solve_right_inverse,
)

CFG = DescentConfig()
sine_inverse = lambda y: bisection_inverse(SCALAR_PROFILES["sine_perturbed"](0.5), y)  # noqa: E731


def circle_targets(m, radius=3.0, n=4):
    phi = 2 * np.pi * np.arange(m) / m
    Y = np.zeros((m, n))
    Y[:, 0], Y[:, 1] = radius * np.cos(phi), radius * np.sin(phi)
    return Y


class TestCompactSample:
    def test_empty_targets_rejected(self):
        with pytest.raises(ValueError):
            CompactSample(np.zeros((0, 2)))

    def test_anchor_contract(self, sine4):
        y = sine4.evaluate(np.ones(4))
        CompactSample.create(sine4, [y, 2 * y], (0, np.ones(4)))
        with pytest.raises(ValueError, match="anchor"):
            CompactSample.create(sine4, [y + 1e-6, 2 * y], (0, np.ones(4)))

    def test_anchor_fields_come_together(self):
        with pytest.raises(ValueError):
            CompactSample(np.zeros((2, 2)), anchor_index=0)
        with pytest.raises(ValueError):
            CompactSample(np.zeros((2, 2)), 5, np.zeros(2))

    def test_dimension_checked_against_map(self, sine4):
        with pytest.raises(ValueError, match="dimension"):
            CompactSample(np.zeros((3, 2))).check_anchor(sine4)


class TestSegmentImage:
    def test_two_points_anchored(self, sine4):
        a = np.array([1.0, -2.0, 0.5, 3.0])
        s = sample_segment_image(sine4, a, 2)
        np.testing.assert_array_equal(s.targets, [sine4.evaluate(np.zeros(4)), sine4.evaluate(a)])
        assert s.anchor_index == 0
        np.testing.assert_array_equal(s.anchor_point, np.zeros(4))

    def test_cubic_grid(self):
        s = sample_segment_image(make_map("cubic", 1), [1.0], 3)
        np.testing.assert_array_equal(s.targets.ravel(), [0.0, 0.625, 2.0])
        assert s.anchored

    def test_unanchored_when_origin_moves(self):
        s = sample_segment_image(affine(np.eye(2), [1.0, 0.0]), [1.0, 1.0], 4)
        assert not s.anchored

    def test_normalized_spiral_traces_unit_circle(self, spiral):
        h = normalized(spiral, [0.0, 0.0])
        s = sample_segment_image(h, [0.0, -2 * np.pi], 5)
        # h(0, -pi j / 2) = (cos(pi j / 2) - 1, sin(pi j / 2))
        expected = [[0, 0], [-1, 1], [-2, 0], [-1, -1], [0, 0]]
        np.testing.assert_allclose(s.targets, expected, atol=1e-15)
        np.testing.assert_allclose(np.linalg.norm(s.targets - [-1.0, 0.0], axis=1), 1.0, atol=1e-15)

    def test_needs_two_points(self, sine4):
        with pytest.raises(ValueError):
            sample_segment_image(sine4, np.ones(4), 1)


class TestFunctionalStep:
    def test_affine_single_defect(self):
        A = np.array([[2.0, 1.0], [1.0, 3.0]])
        fmap = affine(A)
        X = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, -1.0]])
        Y = X @ A.T
        G = X.copy()
        G[1] = [5.0, 5.0]
        state = RightInverseState.initial(fmap, CompactSample(Y), G)
        new, rec = functional_step(fmap, state, CFG)
        assert rec.accepted_t == 1.0
        assert new.merit < 1e-12

    def test_singleton_matches_pointwise_step(self, sine4):
        y = np.array([4.0, -3.0, 8.0, 0.5])
        state = RightInverseState.initial(sine4, CompactSample([y]), np.zeros((1, 4)))
        new, rec = functional_step(sine4, state, CFG)
        point = solve_pointwise(sine4, y, np.zeros(4), CFG.with_(max_iterations=1))
        first = point.trace.records[0]
        assert (rec.accepted_t, rec.merit_after, rec.step_norm) == (first.accepted_t, first.merit_after, first.step_norm)
        assert new.g_values[0].tobytes() == point.solution.tobytes()

    def test_direction_bound_on_sine(self, sine4):
        Y = np.random.default_rng(2).uniform(-8, 8, (10, 4))
        state = RightInverseState.initial(sine4, CompactSample(Y), np.zeros((10, 4)))
        for i in range(5):
            W = np.array([ri.newton_direction(sine4, g, y) for g, y in zip(state.g_values, Y)])
            assert np.max(np.linalg.norm(W, axis=1)) <= 2.0 * state.merit
            state, rec = functional_step(sine4, state, CFG, index=i)
            if state.merit <= CFG.tol_residual:
                break

    def test_needs_positive_merit(self, sine4):
        X = np.zeros((2, 4))
        state = RightInverseState.initial(sine4, CompactSample(X), X)
        with pytest.raises(ValueError):
            functional_step(sine4, state, CFG)

    def test_singular_index_reported(self):
        fmap = make_map("sine_perturbed", 1, k=1.0)
        G = np.array([[0.0], [np.pi]])
        state = RightInverseState.initial(fmap, CompactSample([[1.0], [1.0]]), G)
        with pytest.raises(ri.SingularJacobian) as info:
            functional_step(fmap, state, CFG)
        assert info.value.index == 1


class TestSolveRightInverse:
    def test_exact_start(self, sine4):
        X = np.random.default_rng(0).uniform(-2, 2, (6, 4))
        Y = np.array([sine4.evaluate(x) for x in X])
        state, trace = solve_right_inverse(sine4, CompactSample(Y), X)
        assert trace.iterations == 0 and trace.status is Status.CONVERGED
        assert state.merit <= CFG.tol_residual

    def test_cubic_segment(self):
        fmap = make_map("cubic", 1)
        sample = sample_segment_image(fmap, [1.0], 3)
        state, trace = solve_right_inverse(fmap, sample, np.zeros((3, 1)))
        oracle = bisection_inverse(SCALAR_PROFILES["cubic"](None), sample.targets)
        np.testing.assert_allclose(state.g_values.ravel(), oracle, atol=1e-8)
        np.testing.assert_allclose(state.g_values.ravel(), [0.0, 0.5, 1.0], atol=1e-8)

    def test_circle_in_r4(self, sine4):
        Y = circle_targets(50)
        state, trace = solve_right_inverse(sine4, CompactSample(Y))
        assert trace.converged and state.merit <= CFG.tol_residual
        oracle = np.array([sine_inverse(y) for y in Y])
        np.testing.assert_allclose(state.g_values, oracle, atol=1e-8)
        closed = np.vstack([state.g_values, state.g_values[:1]]), np.vstack([Y, Y[:1]])
        dg = np.linalg.norm(np.diff(closed[0], axis=0), axis=1)
        dy = np.linalg.norm(np.diff(closed[1], axis=0), axis=1)
        assert np.all(dg <= 2 * dy + 4 * CFG.tol_residual)

    def test_invariants_step_by_step(self, sine4):
        Y = np.random.default_rng(8).uniform(-5, 5, (12, 4))
        Y[0] = sine4.evaluate(np.full(4, 0.25))
        sample = CompactSample.create(sine4, Y, (0, np.full(4, 0.25)))
        G = np.zeros_like(Y)
        G[0] = 0.25
        state = RightInverseState.initial(sine4, sample, G)
        anchor_bytes = state.g_values[0].tobytes()
        for i in range(100):
            if state.merit <= CFG.tol_residual:
                break
            before = state.merit
            W = np.array([np.zeros(4) if j == 0 else ri.newton_direction(sine4, g, y)
                          for j, (g, y) in enumerate(zip(state.g_values, Y))])
            state, rec = functional_step(sine4, state, CFG, index=i)
            assert abs(state.merit - state.recompute_merit(sine4)) <= 1e-15
            assert state.g_values[0].tobytes() == anchor_bytes
            assert rec.merit_after <= (1 - rec.accepted_t / 2) * before + 1e-15
            assert np.max(np.linalg.norm(W, axis=1)) <= 2.0 * before + 1e-9 * (1 + before)
        assert state.merit <= CFG.tol_residual
        assert max_residual(sine4, Y, state.g_values) <= CFG.tol_residual

    def test_path_bound_and_anchor(self, sine4):
        sample = sample_segment_image(sine4, np.array([3.0, -4.0, 1.0, 2.0]), 30)
        state, trace = solve_right_inverse(sine4, sample)
        assert trace.converged
        assert all(check_trace(trace, 2.0).values())
        assert trace.cumulative_path_length <= 2 * 2.0 * trace.initial_merit * (1 + 1e-9)
        np.testing.assert_array_equal(state.g_values[0], np.zeros(4))

    @pytest.mark.parametrize("seed", range(4))
    def test_singleton_equivalence(self, seed):
        fmap = make_map("coupled_sine", 3, k=0.5)
        y = np.random.default_rng(seed).uniform(-10, 10, 3)
        state, trace = solve_right_inverse(fmap, CompactSample([y]), np.zeros((1, 3)))
        point = solve_pointwise(fmap, y, np.zeros(3))
        assert trace.records == point.trace.records
        assert state.g_values[0].tobytes() == point.solution.tobytes()

    def test_per_point_steps_flag(self, sine4):
        Y = np.random.default_rng(4).uniform(-9, 9, (20, 4))
        cfg = CFG.with_(per_point_steps=True)
        state, trace = solve_right_inverse(sine4, CompactSample(Y), config=cfg)
        assert trace.converged
        assert check_trace(trace, 2.0)["sufficient_decrease_ok"]

    def test_g_init_must_respect_anchor(self, sine4):
        sample = sample_segment_image(sine4, np.ones(4), 4)
        with pytest.raises(ValueError, match="anchor"):
            solve_right_inverse(sine4, sample, np.ones((4, 4)))

    def test_anchored_residual_only_stalls(self):
        fmap = make_map("cubic", 1)
        sample = CompactSample([[0.0]], 0, [0.0])
        state = RightInverseState(sample, np.zeros((1, 1)), 1.0)
        with pytest.raises(Stalled):
            functional_step(fmap, state, CFG)

    def test_adjacent_continuity_report(self, sine4):
        sample = sample_segment_image(sine4, np.array([3.0, 0.0, -3.0, 1.0]), 20)
        state, _ = solve_right_inverse(sine4, sample)
        report = adjacent_continuity(state, 2.0)
        assert report["lipschitz_ok"] is True
        assert report["max_adjacent_ratio"] <= 2.0 + 1e-6


class TestLift:
    def test_affine(self):
        fmap = affine([[1.0, 2.0], [0.0, 1.0]])
        report = lift_analysis(fmap, [4.0, -3.0], 30)
        assert max(report.lift_errors) < 1e-10
        assert report.t_bar == 1.0 and report.verdict is Verdict.CONSISTENT

    def test_sine_matches_segment(self, sine4):
        rng = np.random.default_rng(12)
        a = rng.standard_normal(4)
        a *= 5 / np.linalg.norm(a)
        report = lift_analysis(sine4, a, 50)
        assert report.t_bar == 1.0 and report.verdict is Verdict.CONSISTENT
        for t, g, y in zip(report.t_grid, report.lifted, sample_segment_image(sine4, a, 50).targets):
            np.testing.assert_allclose(g, sine_inverse(y), atol=1e-8)
            np.testing.assert_allclose(g, t * a, atol=1e-8)

    def test_spiral_returns_to_start(self, spiral):
        h = normalized(spiral, [0.0, 0.0])
        report = lift_analysis(h, [0.0, -2 * np.pi], 100)
        assert report.verdict is Verdict.DISTINCT
        assert report.t_bar == pytest.approx(98 / 99)
        assert report.lift_errors[-1] == pytest.approx(2 * np.pi, rel=1e-12)
        np.testing.assert_array_equal(report.lifted[-1], [0.0, 0.0])

    def test_requires_normalized_map(self):
        with pytest.raises(ValueError, match="f\\(0\\) = 0"):
            lift_analysis(affine(np.eye(2), [1.0, 0.0]), [1.0, 1.0], 5)

    def test_failed_continuation_is_inconclusive(self, sine4):
        report = lift_analysis(sine4, np.full(4, 2.0), 10, CFG.with_(max_iterations=0))
        assert report.verdict is Verdict.INCONCLUSIVE
        assert report.failed_at == 1 and report.status is Status.MAX_ITERATIONS
        assert report.t_bar == 0.0

    @pytest.mark.parametrize("fmap", [make_map("sine_perturbed", 3, k=0.5), make_map("arctan_drift", 3, a=1.0)], ids=repr)
    def test_refinement_never_lowers_t_bar(self, fmap):
        a = np.array([4.0, -2.0, 3.0])
        t_bars = [lift_analysis(fmap, a, m).t_bar for m in (5, 10, 20, 40)]
        assert all(b >= a_ for a_, b in zip(t_bars, t_bars[1:]))

    def test_summary(self, spiral):
        report = certify_pair(spiral, [0.0, 2 * np.pi], [0.0, 0.0], 20)
        s = report.summary()
        assert s["verdict"] == "DistinctPreimagesDetected" and s["t_bar"] < 1


class TestCertify:
    def test_identical_points(self, sine4):
        b = np.array([0.5, -1.0, 2.0, 0.0])
        report = certify_pair(sine4, b, b, 10)
        assert report.verdict is Verdict.CONSISTENT and report.t_bar == 1.0
        assert np.linalg.norm(report.a) == 0.0

    def test_spiral_collision(self, spiral):
        report = certify_pair(spiral, [0.0, 2 * np.pi], [0.0, 0.0], 100)
        assert report.verdict is Verdict.DISTINCT

    def test_numerical_collision(self, sine4):
        b = np.array([0.7, -0.2, 1.5, 3.0])
        a = b + 1e-13 * np.eye(4)[0]
        assert np.linalg.norm(sine4.evaluate(a) - sine4.evaluate(b)) <= CFG.tol_residual
        report = certify_pair(sine4, a, b, 50)
        assert report.verdict is Verdict.CONSISTENT
        assert np.linalg.norm(report.a) <= 1e-6

    def test_not_a_collision(self, sine4):
        with pytest.raises(NotACollision):
            certify_pair(sine4, np.ones(4), np.zeros(4))

    def test_far_apart_consistent_is_downgraded(self, sine4, monkeypatch):
        def fake_lift(h, a, m, config, tol_lift):
            return ri.LiftReport([0.0, 1.0], [0.0, 0.0], 1.0, Verdict.CONSISTENT)

        monkeypatch.setattr(ri, "lift_analysis", fake_lift)
        monkeypatch.setattr(ri, "NotACollision", NotACollision)
        b = np.zeros(4)
        a = np.array([1e-3, 0, 0, 0])
        report = certify_pair(sine4, a, b, 10, CFG.with_(tol_residual=1e-2))
        assert report.verdict is Verdict.INCONCLUSIVE and report.notes
