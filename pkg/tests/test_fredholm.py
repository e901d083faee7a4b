import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import tracy_widom, warren_joint_n2
from onesided.experiments import warren_tail_n2
from onesided.fredholm import (
    FredholmConvergenceError,
    KernelEvaluationError,
    LabelSet,
    build_operator,
    flat_window,
    fredholm_det,
    joint_cdf_airy1,
    joint_cdf_finite,
    joint_cdf_flat,
    refined_det,
)
from onesided.kernels import FlatKernel


def rank_one(x1, n1, x2, n2):
    return np.exp(-x1[:, None] - x2[None, :])


class TestEngine:
    def test_rank_one_closed_form(self):
        # det(I - K) = 1 - int_0^2 e^{-2x} dx
        exact = 1 - (1 - np.exp(-4.0)) / 2
        res = refined_det(rank_one, LabelSet.of([0], [2.0]), [(0.0, 2.0)], 16, tol=1e-12)
        assert abs(res.value - exact) < 1e-8

    def test_rank_one_two_labels(self):
        # identical rank-one blocks on two labels: det = 1 - sum_i int e^{-2x}
        exact = 1 - 2 * (1 - np.exp(-4.0)) / 2
        res = refined_det(rank_one, LabelSet.of([0, 1], [2.0, 2.0]), [(0.0, 2.0)] * 2, 16, tol=1e-12)
        assert abs(res.value - exact) < 1e-8

    def test_empty_operator(self):
        op = build_operator(rank_one, LabelSet.of([0], [0.0]), [(1.0, 1.0)], 16)
        assert op.size == 0 and fredholm_det(op).value == 1.0

    def test_nonfinite_entries_rejected(self):
        op = build_operator(lambda *a: np.full((16, 16), np.nan), LabelSet.of([0], [1.0]), [(0, 1)], 16)
        with pytest.raises(FloatingPointError):
            fredholm_det(op)

    def test_kernel_error_carries_labels(self):
        def bad(x1, n1, x2, n2):
            raise ArithmeticError("boom")

        with pytest.raises(KernelEvaluationError) as info:
            build_operator(bad, LabelSet.of([3], [0.0]), [(-1.0, 0.0)], 16)
        assert info.value.labels == (3, 3)

    def test_nonconvergence_reports_trace(self):
        rng = np.random.default_rng(0)

        def noisy(x1, n1, x2, n2):
            return 0.1 * rng.normal(size=(len(x1), len(x2)))

        with pytest.raises(FredholmConvergenceError) as info:
            refined_det(noisy, LabelSet.of([0], [1.0]), [(0.0, 1.0)], 16, tol=1e-14, max_nodes=64)
        assert [n for n, _ in info.value.trace] == [16, 32, 64]

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            build_operator(rank_one, LabelSet.of([0], [1.0]), [(0, 1)], 4)

    def test_labelset_validation(self):
        with pytest.raises(ValueError):
            LabelSet.of([], [])
        with pytest.raises(ValueError):
            LabelSet.of([1, 2], [0.0])
        with pytest.raises(ValueError):
            LabelSet.of([1, 1], [0.0, 0.0])


class TestFlat:
    def test_node_doubling(self):
        lab = LabelSet.of([0, 3], [-1.0, -3.0])
        res = joint_cdf_flat(1.0, lab, n_nodes=24, tol=1e-6)
        n, v = res.resolution_trace[-1]
        kern = FlatKernel(1.0, conjugate=True)
        wins = [flat_window(1.0, k, a) for k, a in zip(lab.labels, lab.thresholds)]
        doubled = fredholm_det(build_operator(kern, lab, wins, 2 * n)).value
        assert abs(doubled - v) <= 1e-6

    def test_window_enlargement(self):
        lab = LabelSet.of([0, 1], [-1.0, -2.0])
        a = joint_cdf_flat(1.0, lab).value
        b = joint_cdf_flat(1.0, lab, depth=12.0).value
        assert abs(a - b) <= 1e-6
        assert abs(a - 0.59375896960) < 1e-8

    def test_conjugation_invariance(self):
        lab = LabelSet.of([0, 1], [-1.0, -2.0])
        wins = [flat_window(1.0, k, a) for k, a in zip(lab.labels, lab.thresholds)]
        plain = refined_det(FlatKernel(1.0, conjugate=False), lab, wins, 24, tol=1e-10).value
        conj = refined_det(FlatKernel(1.0, conjugate=True), lab, wins, 24, tol=1e-10).value
        assert abs(plain - conj) < 1e-8

    @pytest.mark.parametrize("k", [1, 5, 20])
    def test_stationary_in_label(self, k):
        # shifting label and threshold together leaves the law unchanged
        v = joint_cdf_flat(1.0, LabelSet.of([k], [-float(k)])).value
        assert abs(v - 0.24638981763927) < 1e-8

    def test_inclusion_bound_and_range(self):
        p01 = joint_cdf_flat(1.0, LabelSet.of([0, 3], [-1.0, -3.0])).value
        p0 = joint_cdf_flat(1.0, LabelSet.of([0], [-1.0])).value
        p3 = joint_cdf_flat(1.0, LabelSet.of([3], [-3.0])).value
        assert 0 <= p01 <= min(p0, p3) <= 1
        assert abs(p01 - 0.19004441735) < 1e-8

    def test_deep_threshold_gives_one(self):
        v = joint_cdf_flat(1.0, LabelSet.of([0], [-30.0])).value
        assert abs(v - 1) < 1e-12

    @given(st.floats(-3.0, 1.0), st.floats(0.05, 1.5))
    @settings(max_examples=8, deadline=None)
    def test_monotone_in_threshold(self, a, da):
        lo = joint_cdf_flat(1.0, LabelSet.of([0], [a])).value
        hi = joint_cdf_flat(1.0, LabelSet.of([0], [a + da])).value
        assert -1e-8 <= hi <= lo <= 1 + 1e-8


class TestFinite:
    @pytest.mark.parametrize("a1,a2", [(-1.5, -2.5), (-2.5, -1.5), (-0.5, -3.0)])
    def test_two_labels_against_density(self, a1, a2):
        v = joint_cdf_finite(1.0, LabelSet.of([1, 2], [a1, a2])).value
        assert abs(v - warren_joint_n2(a1, a2, 1.0)) < 1e-8

    def test_marginal_against_density(self):
        v = joint_cdf_finite(1.0, LabelSet.of([2], [-2.5])).value
        assert abs(v - warren_tail_n2(-2.5, 1.0, 2)) < 1e-8
        assert abs(v - 0.5548908570752) < 1e-10

    def test_frozen_values(self):
        assert abs(joint_cdf_finite(1.0, LabelSet.of([1, 2], [-1.5, -2.5])).value - 0.4525022008055) < 1e-10
        assert abs(joint_cdf_finite(1.0, LabelSet.of([1, 3], [-1.0, -3.0])).value - 0.156531484927) < 1e-9


class TestAiry1:
    def test_one_point_against_painleve(self):
        # P(A_1 <= s) = F_1(2 s)
        ss = np.array([-2.0, -1.0, 0.0, 1.0])
        f1, _ = tracy_widom(2 * ss)
        got = [joint_cdf_airy1([(0.0, s)]).value for s in ss]
        assert np.max(np.abs(np.array(got) - f1)) < 1e-9

    def test_frozen_values(self):
        assert abs(tracy_widom(np.array([0.0]))[0][0] - 0.83190807) < 1e-7
        v = joint_cdf_airy1([(0.0, 0.0), (0.5, 0.3)]).value
        assert abs(v - 0.773236994063647) < 1e-9

    def test_two_times_bounded_by_marginals(self):
        joint = joint_cdf_airy1([(0.0, 0.0), (0.5, 0.3)]).value
        m0 = joint_cdf_airy1([(0.0, 0.0)]).value
        m1 = joint_cdf_airy1([(0.5, 0.3)]).value
        assert m0 * m1 - 1e-9 <= joint <= min(m0, m1)
