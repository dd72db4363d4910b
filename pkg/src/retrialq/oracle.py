"""Brute-force truncated-chain reference solves.

These routines deliberately avoid the censoring machinery: the orbit is
truncated at a hard cap, the full generator is materialized, and the
stationary vector is obtained by direct elimination.  They exist to pin the
fast solver, not to be fast themselves.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import RetrialQError
from .generator import GeneratorView, build_generator
from .models import SystemConfig, ensure_valid, gth_solve
from .solver import StationaryDistribution

STATE_CAP = 200_000
DENSE_CAP = 3_000


def truncated_generator(gen: GeneratorView, orbit_cap, reflect=True):
    """Dense generator of the chain with orbit size capped at orbit_cap.

    With reflect=True, upward jumps past the cap are redirected to the cap
    level so every row sums to zero; with reflect=False those jumps are
    dropped and only rows near the cap carry a deficit.
    """
    k = gen.index.order
    n_lvl = orbit_cap + 1
    total = n_lvl * k
    if total > STATE_CAP:
        raise RetrialQError(
            f"truncated chain has {total} states, above the cap {STATE_CAP}")
    q = np.zeros((total, total))
    for i in range(n_lvl):
        r0 = i * k
        q[r0:r0 + k, r0:r0 + k] = gen.q_diag(i).to_dense()
        if i >= 1:
            q[r0:r0 + k, r0 - k:r0] = gen.q_down(i).to_dense()
        for kk in range(1, gen.k_max + 1):
            j = i + kk
            blk = gen.q_up[kk].to_dense()
            if j <= orbit_cap:
                c0 = j * k
                q[r0:r0 + k, c0:c0 + k] += blk
            elif reflect:
                c0 = orbit_cap * k
                q[r0:r0 + k, c0:c0 + k] += blk
    return q


def brute_force_ctmc(config: SystemConfig, orbit_cap) -> StationaryDistribution:
    """Stationary distribution of the orbit-capped chain, solved directly."""
    config = ensure_valid(config)
    gen = build_generator(config)
    q = truncated_generator(gen, orbit_cap, reflect=True)
    total = q.shape[0]
    if total <= DENSE_CAP:
        pi = gth_solve(q)
    else:
        pi = _sparse_null_left(q)
    k = gen.index.order
    levels = [pi[i * k:(i + 1) * k] for i in range(orbit_cap + 1)]
    return StationaryDistribution(
        levels=levels, n=orbit_cap, captured_mass=1.0,
        tail_mass_bound=float("nan"), fingerprint=config.fingerprint(),
        config=config, index=gen.index,
    )


def _sparse_null_left(q):
    """Left null vector of a big conservative generator via a pinned solve."""
    n = q.shape[0]
    a = scipy.sparse.csc_matrix(q.T)
    # replace the last equation by the normalization sum(pi) = 1
    a = a.tolil()
    a[n - 1, :] = 1.0
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0
    pi = scipy.sparse.linalg.spsolve(a.tocsc(), rhs)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_residual(dist: StationaryDistribution, orbit_cap=None):
    """max |pi Q| on the reflected truncated generator (flow-balance check)."""
    gen = build_generator(dist.config)
    cap = dist.n if orbit_cap is None else orbit_cap
    q = truncated_generator(gen, cap, reflect=True)
    pi = np.concatenate(dist.levels[:cap + 1])
    return float(np.abs(pi @ q).max())


def first_passage_matrix(config: SystemConfig, level, orbit_cap):
    """Level-down first-passage probabilities, computed the slow way.

    Entry (s, s') is the probability that the chain started in phase s of
    orbit level `level` first enters level - 1 in phase s', with the orbit
    truncated (reflected) at orbit_cap.  Independent of the fixed-point
    iteration, so it can referee it.
    """
    if level < 1:
        raise RetrialQError("first passage needs a level >= 1")
    config = ensure_valid(config)
    gen = build_generator(config)
    k = gen.index.order
    n_lvl = orbit_cap - level + 1
    if n_lvl < 1 or (n_lvl * k) > STATE_CAP:
        raise RetrialQError("truncation window empty or too large")
    q_in = np.zeros((n_lvl * k, n_lvl * k))
    for ii in range(n_lvl):
        i = level + ii
        r0 = ii * k
        q_in[r0:r0 + k, r0:r0 + k] = gen.q_diag(i).to_dense()
        if ii >= 1:
            q_in[r0:r0 + k, r0 - k:r0] = gen.q_down(i).to_dense()
        for kk in range(1, gen.k_max + 1):
            jj = ii + kk
            blk = gen.q_up[kk].to_dense()
            if jj < n_lvl:
                c0 = jj * k
                q_in[r0:r0 + k, c0:c0 + k] += blk
            else:
                c0 = (n_lvl - 1) * k
                q_in[r0:r0 + k, c0:c0 + k] += blk
    exit_block = np.zeros((n_lvl * k, k))
    exit_block[:k, :] = gen.q_down(level).to_dense()
    z = scipy.linalg.solve(-q_in, exit_block)
    return z[:k, :]
