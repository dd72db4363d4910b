import numpy as np
import pytest

from retrialq import brute_force_ctmc, simulate
from retrialq.models import PhSpec, service_rate
from retrialq.sim import sample_ph

from conftest import cellular_config, scalar_config


@pytest.fixture(scope="module")
def scalar_est():
    cfg = scalar_config(lam1=1.2, lam2=0.4, sigma=2.0, mu=3.0, c=4, g=2)
    est = simulate(cfg, horizon=2e5, replications=8, seed=7, i_cap=40)
    return cfg, est


class TestKernel:
    def test_flow_balance_holds(self, scalar_est):
        _, est = scalar_est
        assert est.flow_balance_ok

    def test_joint_pmf_normalized(self, scalar_est):
        _, est = scalar_est
        assert est.joint.sum() == pytest.approx(1.0, abs=1e-3)

    def test_reproducible_given_seed(self):
        cfg = scalar_config()
        a = simulate(cfg, horizon=2e4, replications=3, seed=11)
        b = simulate(cfg, horizon=2e4, replications=3, seed=11)
        assert a.l_orbit == b.l_orbit
        assert np.array_equal(a.joint, b.joint)

    def test_no_drift_when_stable(self, scalar_est):
        _, est = scalar_est
        assert not est.drift

    def test_drift_flag_on_unstable_load(self):
        cfg = scalar_config(lam1=30.0, lam2=1.0, sigma=2.0, mu=3.0, c=4, g=2)
        est = simulate(cfg, horizon=5e4, replications=3, seed=3)
        assert est.drift


class TestAgainstCtmc:
    def test_cis_cover_truth(self, scalar_est):
        cfg, est = scalar_est
        truth = brute_force_ctmc(cfg, orbit_cap=80)
        lb = sum(b * truth.joint(i, b)
                 for i in range(81) for b in range(cfg.c + 1))
        lo = sum(i * truth.joint(i, b)
                 for i in range(81) for b in range(cfg.c + 1))
        # 99% intervals; allow a 2x slack factor against the rare miss
        assert abs(est.l_busy - lb) < 2 * est.l_busy_hw
        assert abs(est.l_orbit - lo) < 2 * est.l_orbit_hw

    def test_joint_cells_close(self, scalar_est):
        cfg, est = scalar_est
        truth = brute_force_ctmc(cfg, orbit_cap=80)
        for i in range(3):
            for b in range(cfg.c + 1):
                mean, hw = est.joint_ci(i, b)
                assert abs(mean - truth.joint(i, b)) < max(3 * hw, 1e-3)


class TestPhaseSampling:
    def test_sample_mean_matches_rate(self):
        cfg = cellular_config()
        rng = np.random.default_rng(5)
        x = sample_ph(cfg.service, rng, 20000)
        mu = service_rate(cfg.service)
        se = x.std(ddof=1) / np.sqrt(len(x))
        assert abs(x.mean() - 1 / mu) < 3 * se

    def test_erlang_second_moment(self):
        # Erlang-2 with stage rate 4: mean 0.5, variance 0.125
        ph = PhSpec(np.array([1.0, 0.0]),
                    np.array([[-4.0, 4.0], [0.0, -4.0]]))
        rng = np.random.default_rng(9)
        x = sample_ph(ph, rng, 20000)
        assert x.mean() == pytest.approx(0.5, abs=0.01)
        assert x.var(ddof=1) == pytest.approx(0.125, rel=0.08)


def test_short_horizon_rejected():
    with pytest.raises(ValueError):
        simulate(scalar_config(), horizon=0.0)
