import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retrialq import (BmapSpec, ConfigError, arrival_rate,
                      batch_arrival_rate, ensure_valid, retrial_rate,
                      service_rate, stationary_vector, validate)
from retrialq.models import gth_solve

from conftest import cellular_config, scalar_config


class TestValidation:
    def test_reference_instance_is_clean(self):
        assert validate(cellular_config()) == []

    def test_bad_guard_range(self):
        cfg = scalar_config(c=4, g=4)
        rules = [v.rule for v in validate(cfg)]
        assert any("g must satisfy" in r for r in rules)

    def test_negative_offdiag_rejected(self):
        b1 = BmapSpec((np.array([[-1.0]]), np.array([[1.0]])))
        bad = BmapSpec((np.array([[-2.0, -0.5], [1.0, -1.0]]),
                        np.array([[2.5, 0.0], [0.0, 0.0]])))
        cfg = scalar_config()
        from dataclasses import replace
        report = validate(replace(cfg, bmap1=bad))
        assert any("off-diagonal" in v.rule for v in report)

    def test_row_sum_violation_reported(self):
        bad = BmapSpec((np.array([[-1.0]]), np.array([[1.5]])))
        from dataclasses import replace
        report = validate(replace(scalar_config(), bmap1=bad))
        assert any("zero row sums" in v.rule for v in report)

    def test_ensure_valid_raises_with_violations_attached(self):
        cfg = scalar_config(c=1, g=1)
        with pytest.raises(ConfigError) as exc:
            ensure_valid(cfg)
        assert exc.value.violations

    def test_repair_absorbs_tiny_residual(self):
        b1 = BmapSpec((np.array([[-1.0 + 1e-13]]), np.array([[1.0]])))
        fixed = b1.repaired()
        assert abs(fixed.total().sum()) < 1e-15

    def test_validate_never_throws_on_garbage(self):
        cfg = scalar_config()
        from dataclasses import replace
        mangled = replace(cfg, bmap1=BmapSpec((np.array([[np.nan]]),
                                               np.array([[1.0]]))))
        assert validate(mangled)  # nonempty, no exception


class TestRates:
    # per-customer rates of the reference instance, at unit scale factors
    def test_primary_rate(self):
        cfg = cellular_config(lam_o=1.0)
        assert arrival_rate(cfg.bmap1) == pytest.approx(10.6364, abs=1e-4)

    def test_priority_rate(self):
        cfg = cellular_config(lam_h=1.0)
        assert arrival_rate(cfg.bmap2) == pytest.approx(1.6667, abs=1e-4)

    def test_retrial_rate(self):
        cfg = cellular_config(lam_r=1.0)
        assert retrial_rate(cfg.mmpp) == pytest.approx(13.2857, abs=1e-4)

    def test_service_rate(self):
        cfg = cellular_config()
        assert service_rate(cfg.service) == pytest.approx(8.1288, abs=1e-4)

    def test_rates_scale_linearly(self):
        assert arrival_rate(cellular_config(lam_o=3.0).bmap1) == pytest.approx(
            3 * arrival_rate(cellular_config(lam_o=1.0).bmap1))

    def test_batch_rate_below_customer_rate(self):
        cfg = cellular_config()
        assert batch_arrival_rate(cfg.bmap1) <= arrival_rate(cfg.bmap1) + 1e-12

    def test_arrival_phase_mixes(self):
        # stationary phase vectors of the three modulating chains
        cfg = cellular_config()
        assert np.allclose(stationary_vector(cfg.bmap1.total()),
                           [8 / 11, 3 / 11], atol=1e-12)
        assert np.allclose(stationary_vector(cfg.mmpp.total()),
                           [4 / 7, 3 / 7], atol=1e-12)
        assert np.allclose(stationary_vector(cfg.bmap2.total()),
                           [1 / 3, 2 / 3], atol=1e-12)


class TestStationaryVector:
    def test_two_state_closed_form(self):
        q = np.array([[-3.0, 3.0], [1.0, -1.0]])
        assert np.allclose(stationary_vector(q), [0.25, 0.75])

    def test_rejects_nonconservative(self):
        with pytest.raises(Exception):
            stationary_vector(np.array([[-1.0, 0.5], [1.0, -1.0]]))

    @given(st.integers(2, 6), st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_gth_nonnegative_and_balanced(self, n, seed):
        rng = np.random.default_rng(seed)
        q = rng.random((n, n)) + 1e-3
        np.fill_diagonal(q, 0.0)
        np.fill_diagonal(q, -q.sum(axis=1))
        pi = gth_solve(q)
        assert np.all(pi >= 0)
        assert pi.sum() == pytest.approx(1.0)
        assert np.abs(pi @ q).max() < 1e-10


def test_fingerprint_distinguishes_configs():
    a = cellular_config()
    b = cellular_config(lam_o=2.0000001)
    assert a.fingerprint() != b.fingerprint()
    assert a.fingerprint() == cellular_config().fingerprint()


def test_dims_property():
    assert cellular_config().dims == (2, 2, 2, 2)
    assert scalar_config().dims == (1, 1, 1, 1)
