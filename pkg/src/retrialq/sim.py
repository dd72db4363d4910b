"""Discrete-event simulation of the queue, used as a statistical oracle.

The simulator follows the model dynamics directly: competing exponential
clocks for the two batch arrival streams, the retrial modulator, and every
busy server's phase-type stage.  Busy servers are exchangeable, so the
kernel tracks only the count of servers per service phase.  The hot loop is
compiled with numba; one replication of the reference instance is a few
hundred million events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats

from .models import SystemConfig, ensure_valid

CONFIDENCE = 0.99


@dataclass(frozen=True)
class SimEstimate:
    l_busy: float
    l_busy_hw: float
    l_orbit: float
    l_orbit_hw: float
    p_block_1: float
    p_block_1_hw: float
    p_block_2: float
    p_block_2_hw: float
    joint: np.ndarray          # time-average P(i, b), i <= orbit grid cap
    joint_hw: np.ndarray
    replications: int
    horizon: float
    seed: int
    drift: bool
    flow_balance_ok: bool

    def joint_ci(self, i, b):
        return float(self.joint[i, b]), float(self.joint_hw[i, b])

    def contains(self, name, value):
        """Whether the 99% CI for a scalar estimate covers `value`."""
        est = getattr(self, name)
        hw = getattr(self, name + "_hw")
        return abs(est - value) <= hw


def _event_table(matrices):
    """Flatten BMAP matrices into per-phase (rate, new_phase, batch) rows."""
    w = matrices[0].shape[0]
    rows = [[] for _ in range(w)]
    for k, mat in enumerate(matrices):
        for i in range(w):
            for j in range(w):
                if k == 0 and i == j:
                    continue
                if mat[i, j] > 0:
                    rows[i].append((mat[i, j], j, k))
    width = max(1, max(len(r) for r in rows))
    rate = np.zeros((w, width))
    newp = np.zeros((w, width), dtype=np.int64)
    batch = np.zeros((w, width), dtype=np.int64)
    count = np.zeros(w, dtype=np.int64)
    for i, r in enumerate(rows):
        count[i] = len(r)
        for j, (rt, np_, k) in enumerate(r):
            rate[i, j] = rt
            newp[i, j] = np_
            batch[i, j] = k
    exit_rate = rate.sum(axis=1)
    return rate, newp, batch, count, exit_rate


@njit(cache=True)
def _run_one(seed, horizon, warmup, c, g, i_cap,
             b1_rate, b1_newp, b1_batch, b1_count, b1_exit,
             b2_rate, b2_newp, b2_batch, b2_count, b2_exit,
             t0, t0_exit, sigma,
             alpha_cum, s_mat, s0, s_exit):
    np.random.seed(seed)
    r_dim = t0.shape[0]
    m_dim = s_mat.shape[0]

    # state
    r = 0
    nu = 0
    ga = 0
    n_orbit = 0
    n_m = np.zeros(m_dim, dtype=np.int64)
    b = 0

    # accumulators (post warm-up)
    occ = np.zeros((i_cap + 1, c + 1))
    area_b = 0.0
    area_orbit = 0.0
    area_orbit_h1 = 0.0   # first half of the measured window
    arr1 = 0
    orb1 = 0
    adm1 = 0
    arr2 = 0
    orb2 = 0
    adm2 = 0

    t = 0.0
    mid = warmup + 0.5 * (horizon - warmup)
    while t < horizon:
        retrial_rate = 0.0
        if n_orbit > 0 and b <= g - 1:
            retrial_rate = n_orbit * sigma[r]
        svc_rate = 0.0
        for m in range(m_dim):
            svc_rate += n_m[m] * s_exit[m]
        total = t0_exit[r] + retrial_rate + b1_exit[nu] + b2_exit[ga] + svc_rate
        dt = np.random.exponential(1.0 / total)
        t_next = t + dt
        lo = t if t > warmup else warmup
        hi = t_next if t_next < horizon else horizon
        if hi > lo:
            w = hi - lo
            area_b += w * b
            area_orbit += w * n_orbit
            if lo < mid:
                wh = (hi if hi < mid else mid) - lo
                area_orbit_h1 += wh * n_orbit
            if n_orbit <= i_cap:
                occ[n_orbit, b] += w
        t = t_next
        if t >= horizon:
            break
        count_events = t >= warmup

        u = np.random.random() * total
        # 1. modulator phase change
        if u < t0_exit[r]:
            for rp in range(r_dim):
                if rp == r:
                    continue
                u -= t0[r, rp]
                if u < 0:
                    r = rp
                    break
            continue
        u -= t0_exit[r]
        # 2. retrial success (only generated when admissible)
        if u < retrial_rate:
            n_orbit -= 1
            b += 1
            v = np.random.random()
            m = 0
            while alpha_cum[m] < v:
                m += 1
            n_m[m] += 1
            continue
        u -= retrial_rate
        # 3. primary stream event
        if u < b1_exit[nu]:
            for j in range(b1_count[nu]):
                u -= b1_rate[nu, j]
                if u < 0:
                    k = b1_batch[nu, j]
                    nu = b1_newp[nu, j]
                    if k > 0:
                        if b <= g - 1:
                            adm = min(k, g - b)
                        else:
                            adm = 0
                        for _ in range(adm):
                            v = np.random.random()
                            m = 0
                            while alpha_cum[m] < v:
                                m += 1
                            n_m[m] += 1
                        b += adm
                        n_orbit += k - adm
                        if count_events:
                            arr1 += k
                            adm1 += adm
                            orb1 += k - adm
                    break
            continue
        u -= b1_exit[nu]
        # 4. priority stream event
        if u < b2_exit[ga]:
            for j in range(b2_count[ga]):
                u -= b2_rate[ga, j]
                if u < 0:
                    k = b2_batch[ga, j]
                    ga = b2_newp[ga, j]
                    if k > 0:
                        adm = min(k, c - b)
                        for _ in range(adm):
                            v = np.random.random()
                            m = 0
                            while alpha_cum[m] < v:
                                m += 1
                            n_m[m] += 1
                        b += adm
                        n_orbit += k - adm
                        if count_events:
                            arr2 += k
                            adm2 += adm
                            orb2 += k - adm
                    break
            continue
        u -= b2_exit[ga]
        # 5. service stage event
        for m in range(m_dim):
            u -= n_m[m] * s_exit[m]
            if u < 0:
                u += n_m[m] * s_exit[m]
                u /= n_m[m]
                if u < s0[m]:
                    n_m[m] -= 1
                    b -= 1
                else:
                    u -= s0[m]
                    for mp in range(m_dim):
                        if mp == m:
                            continue
                        u -= s_mat[m, mp]
                        if u < 0:
                            n_m[m] -= 1
                            n_m[mp] += 1
                            break
                break

    span = horizon - warmup
    return (occ / span, area_b / span, area_orbit / span,
            area_orbit_h1 / (0.5 * span),
            arr1, adm1, orb1, arr2, adm2, orb2)


def simulate(config: SystemConfig, horizon=1e6, replications=20, seed=0,
             i_cap=50) -> SimEstimate:
    config = ensure_valid(config)
    warmup = 0.1 * horizon
    if horizon <= warmup or horizon <= 0:
        raise ValueError("horizon too short for the 10% warm-up discard")

    b1 = _event_table(config.bmap1.matrices)
    b2 = _event_table(config.bmap2.matrices)
    t0 = config.mmpp.t0.copy()
    np.fill_diagonal(t0, 0.0)
    t0_exit = t0.sum(axis=1)
    alpha_cum = np.cumsum(config.service.alpha)
    alpha_cum[-1] = 1.0
    s_mat = config.service.s.copy()
    np.fill_diagonal(s_mat, 0.0)
    s0 = config.service.s0
    s_exit = s_mat.sum(axis=1) + s0

    ss = np.random.SeedSequence(seed)
    child_seeds = [int(s.generate_state(1)[0] % (2**31 - 1)) + 1
                   for s in ss.spawn(replications)]

    occs, lbs, lorbs, lorb_h1 = [], [], [], []
    pb1s, pb2s = [], []
    balance_ok = True
    for rep_seed in child_seeds:
        (occ, lb, lorb, lorb1, arr1, adm1, orb1,
         arr2, adm2, orb2) = _run_one(
            rep_seed, float(horizon), float(warmup), config.c, config.g, i_cap,
            *b1, *b2, t0, t0_exit, config.mmpp.sigma,
            alpha_cum, s_mat, s0, s_exit)
        occs.append(occ)
        lbs.append(lb)
        lorbs.append(lorb)
        lorb_h1.append(lorb1)
        pb1s.append(orb1 / arr1 if arr1 else np.nan)
        pb2s.append(orb2 / arr2 if arr2 else np.nan)
        if adm1 + orb1 != arr1 or adm2 + orb2 != arr2:
            balance_ok = False

    tcrit = stats.t.ppf(0.5 + CONFIDENCE / 2, replications - 1)

    def ci(vals):
        a = np.asarray(vals, dtype=float)
        hw = tcrit * a.std(ddof=1) / np.sqrt(len(a)) if len(a) > 1 else np.inf
        return float(a.mean()), float(hw)

    occ_stack = np.stack(occs)
    joint = occ_stack.mean(axis=0)
    joint_hw = tcrit * occ_stack.std(axis=0, ddof=1) / np.sqrt(replications)

    lb_m, lb_h = ci(lbs)
    lo_m, lo_h = ci(lorbs)
    p1_m, p1_h = ci(pb1s)
    p2_m, p2_h = ci(pb2s)
    h1 = float(np.mean(lorb_h1))
    h2 = 2 * lo_m - h1    # second-half mean, from whole = (h1 + h2) / 2
    drift = bool(h2 > 1.5 * h1 + 1.0)

    return SimEstimate(
        l_busy=lb_m, l_busy_hw=lb_h, l_orbit=lo_m, l_orbit_hw=lo_h,
        p_block_1=p1_m, p_block_1_hw=p1_h,
        p_block_2=p2_m, p_block_2_hw=p2_h,
        joint=joint, joint_hw=joint_hw,
        replications=replications, horizon=float(horizon), seed=seed,
        drift=drift, flow_balance_ok=balance_ok,
    )


def sample_ph(ph, rng, n):
    """Draw n phase-type service durations (test helper, pure numpy)."""
    m = ph.order
    out = np.empty(n)
    trans = ph.s.copy()
    np.fill_diagonal(trans, 0.0)
    s0 = ph.s0
    exit_rate = trans.sum(axis=1) + s0
    for i in range(n):
        phase = rng.choice(m, p=ph.alpha)
        t = 0.0
        while True:
            t += rng.exponential(1.0 / exit_rate[phase])
            if rng.random() < s0[phase] / exit_rate[phase]:
                break
            row = trans[phase] / trans[phase].sum()
            phase = rng.choice(m, p=row)
        out[i] = t
    return out
