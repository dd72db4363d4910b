import numpy as np
import pytest

from retrialq import brute_force_ctmc, first_passage_matrix, solve_stationary
from retrialq.generator import build_generator
from retrialq.solver import (CensoredBlocks, backward_g_sequence,
                             choose_k0_and_sequence, compute_g, forward_f,
                             _col_window, _iterate_g)

from conftest import (random_scalar_config, scalar_batch_config,
                      scalar_config)


@pytest.fixture(scope="module")
def scalar_solved():
    cfg = scalar_config(epsilon=1e-11, epsilon0=1e-11, n_max=300)
    dist, state = solve_stationary(cfg, return_state=True)
    return cfg, dist, state


class TestGMatrix:
    def test_g_matches_first_passage_oracle(self, scalar_solved):
        cfg, _, state = scalar_solved
        gen = state.gen
        # G is the level -> infinity limit, approached at rate O(1/level):
        # the gap should roughly halve when the probing level doubles
        gap60 = np.abs(state.g_dense()
                       - first_passage_matrix(cfg, level=60,
                                              orbit_cap=300)).max()
        gap120 = np.abs(state.g_dense()
                        - first_passage_matrix(cfg, level=120,
                                               orbit_cap=400)).max()
        assert gap60 < 0.05
        assert gap120 < 0.7 * gap60
        # the level-dependent sequence is the sharp object:
        for lev in (1, 4, 12):
            fp = first_passage_matrix(cfg, level=lev + 1, orbit_cap=240)
            gd = np.zeros_like(fp)
            c0, c1 = state.col_window
            gd[:, c0:c1] = state.g_hat_at(lev)
            assert np.abs(gd - fp).max() < 1e-9, lev

    def test_g_rows_stochastic(self, scalar_solved):
        _, _, state = scalar_solved
        g = state.g_dense()
        assert np.all(g >= -1e-12)
        assert np.allclose(g.sum(axis=1), 1.0, atol=1e-8)

    def test_g_columns_confined_to_guard_window(self, scalar_solved):
        _, _, state = scalar_solved
        gen = state.gen
        g = state.g_dense()
        c0, c1 = _col_window(gen)
        mask = np.ones(gen.order, bool)
        mask[c0:c1] = False
        assert np.abs(g[:, mask]).max() == 0.0

    def test_dense_wrapper_agrees_with_hat_path(self):
        cfg = scalar_batch_config(epsilon=1e-10, epsilon0=1e-8, n_max=600)
        gen = build_generator(cfg)
        g_dense = compute_g(gen)
        g_hat, *_ = _iterate_g(gen)
        c0, c1 = _col_window(gen)
        assert np.allclose(g_dense[:, c0:c1], g_hat, atol=1e-12)

    def test_boundary_rows_match_y1(self, scalar_solved):
        _, _, state = scalar_solved
        assert state.boundary_rows_match


class TestLevelSequence:
    def test_backward_recursion_forgets_boundary(self, scalar_solved):
        _, _, state = scalar_solved
        gen = state.gen
        a = backward_g_sequence(gen, state.g_hat, 12)
        b = backward_g_sequence(gen, state.g_hat, 24)
        assert max(np.abs(a[k] - b[k]).max() for k in range(6)) < 1e-10

    def test_sequence_matches_level_dependent_oracle(self):
        cfg = scalar_batch_config(epsilon=1e-10, epsilon0=1e-8, n_max=600)
        gen = build_generator(cfg)
        g_hat, *_ = _iterate_g(gen)
        k0, seq = choose_k0_and_sequence(gen, g_hat)
        c0, c1 = _col_window(gen)
        for lev in (0, 2, 5):
            fp = first_passage_matrix(cfg, level=lev + 1, orbit_cap=500)
            gd = np.zeros((gen.order, gen.order))
            gd[:, c0:c1] = seq[lev]
            assert np.abs(gd - fp).max() < 1e-6, lev


class TestStationary:
    def test_matches_oracle_scalar(self, scalar_solved):
        cfg, dist, _ = scalar_solved
        ora = brute_force_ctmc(cfg, orbit_cap=100)
        worst = max(abs(dist.joint(i, b) - ora.joint(i, b))
                    for i in range(dist.n + 1) for b in range(cfg.c + 1))
        assert worst < 1e-8

    def test_matches_oracle_with_batches(self):
        cfg = scalar_batch_config(epsilon=1e-10, epsilon0=1e-9, n_max=900)
        dist = solve_stationary(cfg)
        ora = brute_force_ctmc(cfg, orbit_cap=900)
        worst = max(abs(dist.joint(i, b) - ora.joint(i, b))
                    for i in range(dist.n + 1) for b in range(cfg.c + 1))
        assert worst < 1e-6

    def test_randomized_oracle_agreement(self):
        rng = np.random.default_rng(20240817)
        for _ in range(3):
            cfg = random_scalar_config(rng)
            dist = solve_stationary(cfg)
            ora = brute_force_ctmc(cfg, orbit_cap=max(2 * dist.n, 60))
            worst = max(abs(dist.joint(i, b) - ora.joint(i, b))
                        for i in range(dist.n + 1)
                        for b in range(cfg.c + 1))
            assert worst < 1e-6

    def test_normalized_and_nonnegative(self, scalar_solved):
        _, dist, _ = scalar_solved
        assert dist.captured_mass == pytest.approx(1.0, abs=1e-12)
        for lvl in dist.levels:
            assert np.all(lvl >= 0)

    def test_truncation_depth_exceeds_cutoff(self, scalar_solved):
        _, dist, state = scalar_solved
        assert dist.n > state.k0 or state.k0 >= dist.n  # N chosen past k0
        assert dist.levels[-1].sum() < 1e-9

    def test_forward_f_path_agrees_with_vector_path(self, scalar_solved):
        # the matrix recursion F_j is the desk-scale form of the big solve
        cfg, dist, state = scalar_solved
        blocks = CensoredBlocks(state.gen, state)
        fs = forward_f(blocks, dist.n)
        p0 = dist.levels[0]
        for j in (1, 3, 7):
            assert np.allclose(p0 @ fs[j], dist.levels[j], atol=1e-12)


def test_tight_epsilon_changes_nothing_material():
    loose = solve_stationary(scalar_config(epsilon=1e-8, epsilon0=1e-6))
    tight = solve_stationary(scalar_config(epsilon=1e-12, epsilon0=1e-10,
                                           n_max=400))
    for i in range(loose.n + 1):
        for b in range(5):
            assert abs(loose.joint(i, b) - tight.joint(i, b)) < 1e-6
