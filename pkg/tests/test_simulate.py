import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onesided.simulate import (
    BrownianGrid,
    InitialCondition,
    TaggedParams,
    choose_window,
    coupled_evolve,
    ecdf_stats,
    evolve_dp,
    evolve_flat,
    evolve_reflect,
    last_passage,
    last_passage_bruteforce,
    rescale_flat,
    sample_decorrelation,
    sample_finite,
    sample_flat,
    tagged_labels,
)


class TestGrid:
    def test_same_path_whatever_the_window(self):
        a = BrownianGrid.generate(-3, 4, 2.0, 16, seed=5, replicate=2)
        b = BrownianGrid.generate(1, 2, 2.0, 16, seed=5, replicate=2)
        assert np.array_equal(a.row(1), b.row(1)) and np.array_equal(a.row(2), b.row(2))

    def test_dyadic_refinement_nests(self):
        coarse = BrownianGrid.generate(0, 1, 1.0, 8, levels=0, seed=3)
        fine = BrownianGrid.generate(0, 1, 1.0, 8, levels=3, seed=3)
        assert np.allclose(fine.path(1)[::8], coarse.path(1), atol=1e-13)

    def test_increment_variance(self):
        g = BrownianGrid.generate(0, 199, 4.0, 64, seed=1)
        v = np.var(g.increments) / g.dt
        assert abs(v - 1) < 0.02

    def test_seeds_differ(self):
        a = BrownianGrid.generate(0, 0, 1.0, 16, seed=0)
        b = BrownianGrid.generate(0, 0, 1.0, 16, seed=1)
        assert not np.allclose(a.increments, b.increments)

    def test_step_of_rejects_off_grid(self):
        g = BrownianGrid.generate(0, 0, 1.0, 4)
        assert g.step_of(0.5) == 2
        with pytest.raises(ValueError):
            g.step_of(0.3)
        with pytest.raises(IndexError):
            g.row(3)


class TestDynamics:
    @pytest.mark.parametrize("k,m", [(0, 0), (0, 1), (0, 2), (1, 3)])
    def test_last_passage_matches_enumeration(self, k, m):
        g = BrownianGrid.generate(0, 3, 1.0, 6, seed=11)
        assert abs(last_passage(g, k, m, 1.0) - last_passage_bruteforce(g, k, m, 1.0)) < 1e-12

    @given(st.integers(0, 10_000), st.sampled_from(["flat", "step"]))
    @settings(max_examples=25, deadline=None)
    def test_reflection_equals_dp(self, seed, kind):
        g = BrownianGrid.generate(1, 6, 2.0, 32, seed=seed)
        init = InitialCondition(kind)
        a = evolve_dp(g, init, 2.0).positions
        b = evolve_reflect(g, init, 2.0).positions
        assert np.allclose(a, b, atol=1e-12)

    def test_single_particle_moves_down_with_noise(self):
        g = BrownianGrid.generate(0, 0, 1.0, 16, seed=2)
        st_ = evolve_dp(g, InitialCondition.custom([0.7]), 1.0)
        assert abs(st_.position(0) - (0.7 - g.path(0)[-1])) < 1e-12

    def test_order_preserved(self):
        g = BrownianGrid.generate(1, 8, 3.0, 64, seed=4)
        x = evolve_dp(g, InitialCondition("flat"), 3.0).positions
        assert np.all(np.diff(x) <= 1e-12)

    @given(st.integers(0, 10_000), st.lists(st.floats(0, 2), min_size=5, max_size=5))
    @settings(max_examples=25, deadline=None)
    def test_attractive_coupling(self, seed, gaps):
        lower = -np.cumsum(np.asarray(gaps) + 0.5)
        upper = lower + np.linspace(0.3, 0.0, 5)
        upper = np.minimum.accumulate(upper)
        g = BrownianGrid.generate(0, 4, 1.0, 32, seed=seed)
        a, b = coupled_evolve(g, InitialCondition.custom(lower), InitialCondition.custom(upper), 1.0)
        assert np.all(a <= b + 1e-12)

    def test_custom_init_validation(self):
        with pytest.raises(ValueError):
            InitialCondition.custom([0.0, 1.0])
        with pytest.raises(ValueError):
            InitialCondition("ring")


class TestWindow:
    def test_window_grows_with_time(self):
        ms = [choose_window(T, [0]) for T in (1, 10, 100, 1000)]
        assert ms == sorted(ms) and ms[-1] > 1000

    def test_window_covers_targets(self):
        assert choose_window(10.0, [-50, 0]) >= 51 + 10

    def test_truncation_is_invisible(self):
        T = 8.0
        M = choose_window(T, [0])
        g = BrownianGrid.generate(-3 * M, 0, T, 64, seed=9)
        assert evolve_flat(g, M, [0], T)[0] == evolve_flat(g, 3 * M, [0], T)[0]


class TestEnsembles:
    def test_deterministic_by_seed(self):
        a = sample_finite(3, 1.0, [1, 3], 50, seed=7)
        b = sample_finite(3, 1.0, [1, 3], 50, seed=7)
        c = sample_finite(3, 1.0, [1, 3], 50, seed=8)
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_replicates_are_independent_of_batching(self):
        whole = sample_finite(2, 1.0, [2], 40, seed=1)
        tail = sample_finite(2, 1.0, [2], 20, seed=1, rep_offset=20)
        assert np.array_equal(whole[20:], tail)

    def test_finite_two_particles_against_exact_tail(self):
        # P(x_2(1) >= -2.5) from the transition density
        x = sample_finite(2, 1.0, [2], 20000, seed=3)[:, 0]
        p = np.mean(x >= -2.5)
        se = np.sqrt(p * (1 - p) / x.size)
        assert abs(p - 0.5548908570752) < 4 * se

    def test_first_particle_is_free(self):
        x = sample_finite(3, 2.0, [1], 20000, seed=4)[:, 0]
        assert abs(np.mean(x) + 1) < 4 * np.sqrt(2.0 / x.size)
        assert abs(np.var(x) - 2.0) < 0.1

    def test_flat_is_shift_invariant(self):
        x = sample_flat(1.0, [0, 5], 4000, seed=2)
        assert abs(np.mean(x[:, 0]) - np.mean(x[:, 1] + 5)) < 0.1

    def test_decorrelation_shape(self):
        d = sample_decorrelation(4.0, 2, 16, seed=0)
        assert d.shape == (16,) and np.all(np.isfinite(d))

    def test_off_grid_times_rejected(self):
        with pytest.raises(ValueError):
            sample_flat(1.0, [0, 1], 4, dt=0.25, times=[0.3, 1.0])


class TestObservables:
    def test_ecdf(self):
        st_ = ecdf_stats(np.array([0.0, 1.0, 2.0, 3.0]), [-1, 1.5, 3])
        assert np.allclose(st_.cdf, [0, 0.5, 1]) and np.allclose(st_.stderr, [0, 0.25, 0])

    def test_rescale_flat_picks_characteristic_label(self):
        g = BrownianGrid.generate(-40, 0, 8.0, 32, seed=0)
        state = evolve_dp(g, InitialCondition("flat"), 8.0)
        n = -8
        expected = -state.position(n) / 16 ** (1 / 3)
        assert abs(rescale_flat(state, 0.0) - expected) < 1e-12

    def test_tagged_labels_shift_together(self):
        params = TaggedParams.tagged(100.0, [0.0, 0.5])
        (n0, t0), (n1, t1) = tagged_labels(100.0, params)
        c = 2 ** (5 / 3) * 100.0 ** (2 / 3)
        assert (n0, t0) == (-100, 100.0)
        assert t1 - t0 == round(params.theta[1])
        assert n1 == np.floor(-100.0 - 0.5 * c) + round(params.theta[1])
