import numpy as np
import pytest

from retrialq import brute_force_ctmc
from retrialq.errors import RetrialQError
from retrialq.generator import build_generator
from retrialq.oracle import (first_passage_matrix, stationary_residual,
                             truncated_generator)

from conftest import scalar_batch_config, scalar_config


class TestTruncatedGenerator:
    def test_reflected_rows_conservative(self):
        cfg = scalar_batch_config()
        gen = build_generator(cfg)
        q = truncated_generator(gen, orbit_cap=20, reflect=True)
        assert np.abs(q.sum(axis=1)).max() < 1e-10

    def test_unreflected_deficit_only_near_cap(self):
        cfg = scalar_batch_config()
        gen = build_generator(cfg)
        q = truncated_generator(gen, orbit_cap=20, reflect=False)
        sums = q.sum(axis=1).reshape(21, gen.index.order)
        # upward jumps reach at most k_max levels, so only the top
        # k_max level-rows can lose mass
        deep = sums[:21 - gen.k_max]
        assert np.abs(deep).max() < 1e-10
        assert sums.min() < -1e-6

    def test_state_cap_enforced(self):
        cfg = scalar_config(c=6, g=3)
        gen = build_generator(cfg)
        with pytest.raises(RetrialQError):
            truncated_generator(gen, orbit_cap=10**6)


class TestBruteForce:
    def test_cap_doubling_insensitivity(self):
        cfg = scalar_config()
        a = brute_force_ctmc(cfg, orbit_cap=50)
        b = brute_force_ctmc(cfg, orbit_cap=100)
        worst = max(abs(a.joint(i, k) - b.joint(i, k))
                    for i in range(51) for k in range(cfg.c + 1))
        assert worst < 1e-8

    def test_residual_at_machine_precision(self):
        cfg = scalar_config()
        dist = brute_force_ctmc(cfg, orbit_cap=60)
        assert stationary_residual(dist) < 1e-10

    def test_sparse_and_dense_paths_agree(self, monkeypatch):
        # same truncation, elimination vs sparse pinned solve
        import retrialq.oracle as oracle_mod
        cfg = scalar_batch_config()
        dense = brute_force_ctmc(cfg, orbit_cap=200)
        monkeypatch.setattr(oracle_mod, "DENSE_CAP", 10)
        sparse = brute_force_ctmc(cfg, orbit_cap=200)
        worst = max(abs(dense.joint(i, k) - sparse.joint(i, k))
                    for i in range(40) for k in range(cfg.c + 1))
        assert worst < 1e-8


class TestFirstPassage:
    def test_rows_stochastic(self):
        cfg = scalar_batch_config()
        fp = first_passage_matrix(cfg, level=5, orbit_cap=400)
        assert np.all(fp >= -1e-12)
        assert np.allclose(fp.sum(axis=1), 1.0, atol=1e-9)

    def test_level_zero_rejected(self):
        cfg = scalar_config()
        with pytest.raises(RetrialQError):
            first_passage_matrix(cfg, level=0, orbit_cap=50)

    def test_cap_doubling_insensitivity(self):
        cfg = scalar_config()
        a = first_passage_matrix(cfg, level=3, orbit_cap=100)
        b = first_passage_matrix(cfg, level=3, orbit_cap=200)
        assert np.abs(a - b).max() < 1e-10
