"""Performance measures evaluated from a solved level distribution.

Blocking probabilities are computed twice: once with the published
(k - n)-weighted form and once with the accepted-rate min(k, n) form; the
two are algebraically identical because the batch matrices of a valid
arrival stream sum to a conservative generator, and the agreement is
exposed so tests can pin it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import arrival_rate, batch_arrival_rate
from .solver import StationaryDistribution


@dataclass(frozen=True)
class PerformanceReport:
    l_busy: float
    l_orbit: float
    l_orbit_tail_bound: float
    l_system: float
    p_block_1: float
    p_block_batch_1: float
    p_block_2: float
    p_block_batch_2: float
    mean_busy_period: float
    p_empty: float
    captured_mass: float
    cross_check_gap: float   # max |paper form - accepted-rate form| over all four

    def as_dict(self):
        return {
            "L_b": self.l_busy,
            "L_orb": self.l_orbit,
            "L_orb_tail_bound": self.l_orbit_tail_bound,
            "L_s": self.l_system,
            "P_b1": self.p_block_1,
            "P_bb1": self.p_block_batch_1,
            "P_b2": self.p_block_2,
            "P_bb2": self.p_block_batch_2,
            "E_B": self.mean_busy_period,
            "P(0,0)": self.p_empty,
            "captured_mass": self.captured_mass,
        }


def joint_pmf(dist: StationaryDistribution, i, b):
    """Joint probability of i orbiting customers and b busy servers."""
    if not (0 <= i <= dist.n):
        raise IndexError(f"orbit level {i} outside 0..{dist.n}")
    if not (0 <= b <= dist.config.c):
        raise IndexError(f"busy count {b} outside 0..{dist.config.c}")
    return dist.joint(i, b)


def orbit_marginal(dist):
    return np.array([lvl.sum() for lvl in dist.levels])


def server_marginal(dist):
    return np.array([sum(dist.joint(i, b) for i in range(dist.n + 1))
                     for b in range(dist.config.c + 1)])


def _phase_weights(dist, b):
    """sum_i P_{i,b}, the level-summed phase-resolved sub-vector at occupancy b."""
    lo, hi = dist.index.segment(b)
    out = np.zeros(hi - lo)
    for lvl in dist.levels:
        out += lvl[lo:hi]
    return out


def _blocking(dist, bmap, other_order_left, limit, rate, batch_rate, side):
    """Shared blocking computation for either class.

    limit is g (primary) or c (priority); side selects whether the batch
    matrix acts on the first (primary: I_R (x) D_k (x) I_V...) or second
    (priority: I_RW (x) E_k ...) arrival phase coordinate.
    """
    cfg = dist.config
    r_dim, w_dim, v_dim, m_dim = cfg.dims
    accepted_paper = 0.0
    accepted_minform = 0.0
    for n in range(1, limit + 1):
        b = limit - n
        weights = _phase_weights(dist, b)
        eye_rest = np.eye(m_dim**b)
        paper_vec = np.zeros_like(weights)
        min_vec = np.zeros_like(weights)
        for k in range(0, max(n, bmap.max_batch) + 1):
            dk = bmap.d(k)
            if side == 1:
                op = np.kron(np.eye(r_dim), np.kron(dk, np.kron(np.eye(v_dim),
                                                                eye_rest)))
            else:
                op = np.kron(np.eye(r_dim * w_dim), np.kron(dk, eye_rest))
            row = op.sum(axis=1)
            if k <= n:
                paper_vec += (k - n) * row
            if k >= 1:
                min_vec += min(k, n) * row
        accepted_paper += float(weights @ paper_vec)
        accepted_minform += float(weights @ min_vec)
    p_paper = 1.0 - accepted_paper / rate
    p_min = 1.0 - accepted_minform / rate
    # batch form: a batch counts as unblocked only when it fits entirely
    accepted_batches = 0.0
    for n in range(1, limit + 1):
        b = limit - n
        weights = _phase_weights(dist, b)
        eye_rest = np.eye(m_dim**b)
        vec = np.zeros_like(weights)
        for k in range(1, n + 1):
            dk = bmap.d(k)
            if side == 1:
                op = np.kron(np.eye(r_dim), np.kron(dk, np.kron(np.eye(v_dim),
                                                                eye_rest)))
            else:
                op = np.kron(np.eye(r_dim * w_dim), np.kron(dk, eye_rest))
            vec += op.sum(axis=1)
        accepted_batches += float(weights @ vec)
    p_batch = 1.0 - accepted_batches / batch_rate
    # tiny blocking probabilities can land a few ulps below zero through
    # cancellation in the accepted-rate sums; clamp after the cross-check
    gap = abs(p_paper - p_min)
    return max(p_paper, 0.0), max(p_batch, 0.0), gap


def blocking_primary(dist: StationaryDistribution):
    """(P_b1, P_bb1) plus the paper-form/accepted-rate-form gap."""
    cfg = dist.config
    lam = arrival_rate(cfg.bmap1)
    lam_b = batch_arrival_rate(cfg.bmap1)
    return _blocking(dist, cfg.bmap1, None, cfg.g, lam, lam_b, side=1)


def blocking_priority(dist: StationaryDistribution):
    """(P_b2, P_bb2) plus the paper-form/accepted-rate-form gap."""
    cfg = dist.config
    lam = arrival_rate(cfg.bmap2)
    lam_b = batch_arrival_rate(cfg.bmap2)
    return _blocking(dist, cfg.bmap2, None, cfg.c, lam, lam_b, side=2)


def summary_measures(dist: StationaryDistribution):
    """(L_b, L_orb, L_orb tail bound, L_s, E_B)."""
    cfg = dist.config
    marg_b = server_marginal(dist)
    l_busy = float(np.arange(cfg.c + 1) @ marg_b)
    masses = orbit_marginal(dist)
    l_orbit = float(np.arange(dist.n + 1) @ masses)
    tail = _orbit_tail_bound(masses)
    p00 = dist.joint(0, 0)
    if p00 <= 0:
        raise ZeroDivisionError("empty-system probability vanished; "
                                "mean busy period undefined")
    lam = arrival_rate(cfg.bmap1) + arrival_rate(cfg.bmap2)
    mean_busy = (1.0 / p00 - 1.0) / lam
    return l_busy, l_orbit, tail, l_orbit + l_busy, mean_busy


def _orbit_tail_bound(masses):
    """Geometric extrapolation of sum_{j>N} j P_j e from the last levels."""
    if len(masses) < 3 or masses[-2] <= 0 or masses[-3] <= 0:
        return 0.0
    r = max(masses[-1] / masses[-2], masses[-2] / masses[-3])
    if not (0 < r < 1):
        return float("nan")
    n = len(masses) - 1
    a = masses[-1]
    return float(a * (n * r / (1 - r) + r / (1 - r) ** 2))


def performance_report(dist: StationaryDistribution) -> PerformanceReport:
    l_busy, l_orbit, tail, l_sys, mean_busy = summary_measures(dist)
    pb1, pbb1, gap1 = blocking_primary(dist)
    pb2, pbb2, gap2 = blocking_priority(dist)
    return PerformanceReport(
        l_busy=l_busy, l_orbit=l_orbit, l_orbit_tail_bound=tail,
        l_system=l_sys,
        p_block_1=pb1, p_block_batch_1=pbb1,
        p_block_2=pb2, p_block_batch_2=pbb2,
        mean_busy_period=mean_busy, p_empty=dist.joint(0, 0),
        captured_mass=dist.captured_mass,
        cross_check_gap=max(gap1, gap2),
    )
