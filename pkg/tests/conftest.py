"""Shared fixtures: the cellular reference instance and small test models."""

import numpy as np
import pytest

from retrialq import BmapSpec, MmppSpec, PhSpec, SystemConfig


def cellular_config(lam_o=2.0, lam_h=2.0, lam_r=2.0, c=8, g=6, m_phases=2,
                    **solver_kw):
    """The cellular-network reference instance.

    Two-phase MAPs for both call classes, a two-phase retrial modulator and
    a two-phase service law; per-customer rates are 10.6364*lam_o primary,
    1.6667*lam_h priority, 13.2857*lam_r retrial, service rate 8.1288.
    With m_phases=1 the service law collapses to an exponential of the same
    mean rate (used for desk-scale sweeps where M = 2 is too heavy).
    """
    b1 = BmapSpec((lam_o * np.array([[-11.0, 2.0], [5.0, -20.0]]),
                   lam_o * np.array([[8.0, 1.0], [3.0, 12.0]])))
    b2 = BmapSpec((lam_h * np.array([[-3.0, 0.0], [1.0, -2.0]]),
                   lam_h * np.array([[1.0, 2.0], [0.0, 1.0]])))
    mm = MmppSpec(lam_r * np.array([[-15.0, 3.0], [4.0, -19.0]]),
                  lam_r * np.array([12.0, 15.0]))
    if m_phases == 2:
        ph = PhSpec(np.array([0.4, 0.6]), np.array([[-23.0, 9.0],
                                                    [14.0, -17.0]]))
    else:
        ph = PhSpec(np.array([1.0]), np.array([[-8.12883435582822]]))
    return SystemConfig(bmap1=b1, bmap2=b2, mmpp=mm, service=ph,
                        c=c, g=g, **solver_kw)


def scalar_config(lam1=1.0, lam2=0.5, sigma=2.0, mu=3.0, c=4, g=2,
                  **solver_kw):
    """All phase dimensions 1: Poisson arrivals, exponential everything."""
    b1 = BmapSpec((np.array([[-lam1]]), np.array([[lam1]])))
    b2 = BmapSpec((np.array([[-lam2]]), np.array([[lam2]])))
    mm = MmppSpec(np.array([[-sigma]]), np.array([sigma]))
    ph = PhSpec(np.array([1.0]), np.array([[-mu]]))
    return SystemConfig(bmap1=b1, bmap2=b2, mmpp=mm, service=ph,
                        c=c, g=g, **solver_kw)


def scalar_batch_config(c=5, g=3, scale=1.0, **solver_kw):
    """Scalar phases but genuine batches in both arrival streams."""
    b1 = BmapSpec((np.array([[-3.0 * scale]]), np.array([[1.5 * scale]]),
                   np.array([[0.9 * scale]]), np.array([[0.6 * scale]])))
    b2 = BmapSpec((np.array([[-1.0 * scale]]), np.array([[0.6 * scale]]),
                   np.array([[0.4 * scale]])))
    mm = MmppSpec(np.array([[-1.5]]), np.array([1.5]))
    ph = PhSpec(np.array([1.0]), np.array([[-2.2]]))
    return SystemConfig(bmap1=b1, bmap2=b2, mmpp=mm, service=ph,
                        c=c, g=g, **solver_kw)


def random_scalar_config(rng, c=None):
    """A random stable all-scalar instance (for oracle-equivalence sweeps)."""
    while True:
        c_pick = int(c if c is not None else rng.integers(3, 7))
        g = int(rng.integers(1, c_pick))
        mu = float(rng.uniform(1.5, 5.0))
        lam1 = float(rng.uniform(0.2, 0.6) * g * mu)
        lam2 = float(rng.uniform(0.05, 0.3) * c_pick * mu)
        sigma = float(rng.uniform(0.5, 5.0))
        cfg = scalar_config(lam1=lam1, lam2=lam2, sigma=sigma, mu=mu,
                            c=c_pick, g=g, epsilon=1e-10, epsilon0=1e-10,
                            n_max=600)
        from retrialq import stability_check
        if stability_check(cfg).rho < 0.75:
            return cfg


@pytest.fixture(scope="session")
def table1_solution():
    """Session-cached full solve of the reference instance (expensive)."""
    from retrialq import solve_stationary
    cfg = cellular_config()
    dist, state = solve_stationary(cfg, return_state=True)
    return dist, state


@pytest.fixture(scope="session")
def small_solved():
    """A quick scalar solve shared by measure and CLI tests."""
    from retrialq import solve_stationary
    cfg = scalar_config(epsilon=1e-10, epsilon0=1e-10, n_max=300)
    return solve_stationary(cfg, return_state=True)
