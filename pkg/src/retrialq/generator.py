"""Assembly of the level-structured generator of the orbit Markov chain.

The chain tracks (orbit size i; busy servers b; retrial-modulator phase r;
arrival phases nu, gamma; one service phase per busy server).  Within a
level, states are enumerated lexicographically by (b, r, nu, gamma,
m_1..m_b).  The generator is block lower-Hessenberg in the orbit size:
down-blocks scale linearly with i (one retrial succeeds), up-blocks are
level-independent (batch overflow into the orbit).

The diagonal Kronecker sum uses the full modulator generator T = T0 + T1 for
the retrial environment so that every block row is conservative; the
retrial outflow -i T1 (x) I appears only on sub-blocks with b <= g-1, where
a retrial can actually seize a server.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .kron import (BlockMatrix, kron_many, kron_power_product,
                   kron_power_sum, kron_sum)
from .models import SystemConfig, ensure_valid


def state_count(c, r, w, v, m):
    """Size K of one level: R W V (1 + M + ... + M^c)."""
    return r * w * v * sum(m**b for b in range(c + 1))


@dataclass(frozen=True)
class StateIndex:
    """Bijection between flat in-level indices and state tuples."""

    c: int
    r: int
    w: int
    v: int
    m: int
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        base = self.r * self.w * self.v
        offs = [0]
        for b in range(self.c + 1):
            offs.append(offs[-1] + base * self.m**b)
        object.__setattr__(self, "offsets", tuple(offs))

    @property
    def order(self):
        return self.offsets[-1]

    def segment(self, b):
        """Half-open flat index range of the states with b busy servers."""
        return self.offsets[b], self.offsets[b + 1]

    def to_flat(self, b, r, nu, gamma, phases=()):
        if len(phases) != b:
            raise ValueError("need one service phase per busy server")
        idx = (r * self.w + nu) * self.v + gamma
        for p in phases:
            idx = idx * self.m + p
        return self.offsets[b] + idx

    def to_tuple(self, flat):
        b = 0
        while flat >= self.offsets[b + 1]:
            b += 1
        idx = flat - self.offsets[b]
        phases = []
        for _ in range(b):
            idx, p = divmod(idx, self.m)
            phases.insert(0, p)
        idx, gamma = divmod(idx, self.v)
        r, nu = divmod(idx, self.w)
        return (b, r, nu, gamma, tuple(phases))


@dataclass
class GeneratorView:
    """All level blocks of the generator plus the limiting-chain ingredients."""

    config: SystemConfig
    index: StateIndex
    k_max: int
    q_diag0: BlockMatrix      # Q_{i,i} without the -i T1 (x) I retrial term
    q_down1: BlockMatrix      # Q_{i,i-1} / i
    q_up: dict                # k -> Q_{i,i+k}, level-independent
    t1_vec: np.ndarray        # diagonal of T1 (x) I on b <= g-1 rows, else 0
    delta_vec: np.ndarray     # limiting diagonal Delta = diag(-Q_diag(0))
    ibar_vec: np.ndarray      # indicator of b >= g rows

    @property
    def order(self):
        return self.index.order

    def q_diag(self, i):
        """Q_{i,i} as a BlockMatrix (the -i T1 term is diagonal)."""
        out = BlockMatrix(self.q_diag0.offsets)
        for key, mat in self.q_diag0.blocks.items():
            out.blocks[key] = mat
        if i:
            for l in range(self.config.g):
                r0, r1 = self.index.segment(l)
                blk = out.blocks.get((l, l), np.zeros((r1 - r0, r1 - r0))).copy()
                blk[np.diag_indices_from(blk)] -= i * self.t1_vec[r0:r1]
                out.blocks[(l, l)] = blk
        return out

    def q_down(self, i):
        return self.q_down1.scaled(float(i))

    def q_block(self, i, j):
        """Level block Q_{i,j} (zero BlockMatrix outside the Hessenberg band)."""
        if j == i - 1 and i >= 1:
            return self.q_down(i)
        if j == i:
            return self.q_diag(i)
        k = j - i
        if 1 <= k <= self.k_max:
            return self.q_up[k]
        return BlockMatrix(self.q_diag0.offsets)

    def lambda_vec(self, i):
        """Diagonal of -Q_{i,i} (the AQTMC scaling matrix)."""
        return self.delta_vec + i * self.t1_vec

    def row_sum_residual(self, i):
        """Max |row sum| of the assembled block row at level i."""
        total = self.q_diag(i).row_sums()
        if i >= 1:
            total += self.q_down(i).row_sums()
        for k in range(1, self.k_max + 1):
            total += self.q_up[k].row_sums()
        return float(np.abs(total).max())

    def dump_block_csv(self, block: BlockMatrix, path):
        """Debug dump (row, col, value) of one level block."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["row", "col", "value"])
            for (l, lp), mat in sorted(block.blocks.items()):
                r0, _ = block.seg(l)
                c0, _ = block.seg(lp)
                for (ri, ci) in zip(*np.nonzero(mat)):
                    wr.writerow([r0 + ri, c0 + ci, repr(mat[ri, ci])])


def build_generator(config: SystemConfig) -> GeneratorView:
    """Assemble all level blocks of the generator for a validated config."""
    config = ensure_valid(config)
    r, w, v, m = config.dims
    c, g = config.c, config.g
    idx = StateIndex(c, r, w, v, m)
    offs = idx.offsets

    d0 = config.bmap1.matrices[0]
    e0 = config.bmap2.matrices[0]
    t = config.mmpp.total()
    s = config.service.s
    s0 = config.service.s0.reshape(-1, 1)
    alpha = config.service.alpha.reshape(1, -1)

    n1 = config.bmap1.max_batch
    n2 = config.bmap2.max_batch

    i_r, i_w, i_v = np.eye(r), np.eye(w), np.eye(v)
    eye_m = [np.eye(m**l) for l in range(c + 1)]
    s_fold = [kron_power_sum(s, l) for l in range(c + 1)]
    s0_fold = [None] + [kron_power_sum(s0, l) for l in range(1, c + 1)]
    alpha_fold = [kron_power_product(alpha, l) for l in range(c + 1)]

    def with_service(core, l):
        """core (on R,W,V) (x) I_{M^l} plus I_{RWV} (x) S-fold when square."""
        return np.kron(core, eye_m[l])

    base_rwv = kron_sum(kron_sum(t, d0), e0)   # T (+) D0 (+) E0

    q_diag0 = BlockMatrix(offs)
    for l in range(c + 1):
        diag = with_service(base_rwv, l)
        if l >= 1:
            diag = diag + np.kron(np.eye(r * w * v), s_fold[l])
        q_diag0.set_block(l, l, diag)
        if l >= 1:
            q_diag0.set_block(l, l - 1, np.kron(np.eye(r * w * v), s0_fold[l]))
    # in-level admissions
    for l in range(c):
        lo_both = range(1, g - l + 1) if l <= g - 1 else range(0)
        for rr in lo_both:
            d_r = config.bmap1.d(rr)
            e_r = config.bmap2.d(rr)
            core = np.kron(d_r, i_v) + np.kron(i_w, e_r)
            blk = kron_many(i_r, core, eye_m[l], alpha_fold[rr])
            q_diag0.add_block(l, l + rr, blk)
        prio_lo = (g + 1 - l) if l <= g - 1 else 1
        for rr in range(max(prio_lo, 1), c - l + 1):
            if rr > n2:
                break
            e_r = config.bmap2.d(rr)
            blk = kron_many(i_r, i_w, e_r, eye_m[l], alpha_fold[rr])
            q_diag0.add_block(l, l + rr, blk)

    q_down1 = BlockMatrix(offs)
    t1 = config.mmpp.t1
    for l in range(g):
        blk = kron_many(t1, i_w, i_v, eye_m[l], alpha)
        q_down1.set_block(l, l + 1, blk)

    # orbit-increasing blocks; largest k with any nonzero entry defines k_max
    q_up = {}
    for k in range(1, max(n1, n2) + 1):
        blk = BlockMatrix(offs)
        for l in range(g):
            d_k = config.bmap1.d(k + g - l)
            if np.any(d_k):
                blk.add_block(l, g, kron_many(i_r, d_k, i_v, eye_m[l],
                                              alpha_fold[g - l]))
        for l in range(g, c + 1):
            d_k = config.bmap1.d(k)
            if np.any(d_k):
                blk.add_block(l, l, kron_many(i_r, d_k, i_v, eye_m[l]))
        for l in range(c):
            e_k = config.bmap2.d(k + c - l)
            if np.any(e_k):
                blk.add_block(l, c, kron_many(i_r, i_w, e_k, eye_m[l],
                                              alpha_fold[c - l]))
        e_k = config.bmap2.d(k)
        if np.any(e_k):
            blk.add_block(c, c, kron_many(i_r, i_w, e_k, eye_m[c]))
        if blk.blocks:
            q_up[k] = blk
    k_max = max(q_up) if q_up else 0
    for k in range(1, k_max + 1):
        q_up.setdefault(k, BlockMatrix(offs))

    t1_vec = np.zeros(idx.order)
    for l in range(g):
        r0, r1 = idx.segment(l)
        seg = kron_many(t1, i_w, i_v, eye_m[l])
        t1_vec[r0:r1] = np.diag(seg)

    delta_vec = np.zeros(idx.order)
    for l in range(c + 1):
        r0, r1 = idx.segment(l)
        delta_vec[r0:r1] = -np.diag(q_diag0.blocks[(l, l)])

    ibar_vec = np.zeros(idx.order)
    ibar_vec[idx.offsets[g]:] = 1.0

    return GeneratorView(config=config, index=idx, k_max=k_max,
                         q_diag0=q_diag0, q_down1=q_down1, q_up=q_up,
                         t1_vec=t1_vec, delta_vec=delta_vec, ibar_vec=ibar_vec)


def limiting_blocks(gen: GeneratorView):
    """Limit matrices Y_0..Y_{k_max+1} of the scaled far-level chain."""
    cfg = gen.config
    idx = gen.index
    if np.any(gen.delta_vec <= 0):
        raise ValueError("limiting diagonal must be strictly positive")
    scale = gen.ibar_vec / gen.delta_vec

    y0 = BlockMatrix(idx.offsets)
    alpha = cfg.service.alpha.reshape(1, -1)
    for l in range(cfg.g):
        r0, r1 = idx.segment(l)
        y0.set_block(l, l + 1, np.kron(np.eye(r1 - r0), alpha))

    y1 = gen.q_diag0.scale_rows(scale)
    for l in range(cfg.g, cfg.c + 1):
        r0, r1 = idx.segment(l)
        y1.add_block(l, l, np.eye(r1 - r0))

    ys = [y0, y1]
    for k in range(1, gen.k_max + 1):
        ys.append(gen.q_up[k].scale_rows(scale))
    return ys


def eval_y(gen: GeneratorView, z):
    """Dense Y(z) evaluated through the generating-function block formulas.

    Independent of :func:`limiting_blocks`; tests compare the two paths.
    """
    # the block entries are polynomials in z, so evaluation slightly above 1
    # is legitimate (the stability check differentiates across z = 1)
    if not (0.0 < z < 2.0):
        raise ValueError("z must lie in (0, 2)")
    cfg = gen.config
    r, w, v, m = cfg.dims
    c, g = cfg.c, cfg.g
    idx = gen.index
    i_r, i_w, i_v = np.eye(r), np.eye(w), np.eye(v)
    eye_m = [np.eye(m**l) for l in range(c + 1)]
    s = cfg.service.s
    s0 = cfg.service.s0.reshape(-1, 1)
    alpha = cfg.service.alpha.reshape(1, -1)
    alpha_fold = [kron_power_product(alpha, l) for l in range(c + 1)]
    s_fold = [kron_power_sum(s, l) for l in range(c + 1)]
    s0_fold = [None] + [kron_power_sum(s0, l) for l in range(1, c + 1)]
    d0, e0 = cfg.bmap1.matrices[0], cfg.bmap2.matrices[0]
    t = cfg.mmpp.total()
    dz = cfg.bmap1.d_of_z(z)
    ez = cfg.bmap2.d_of_z(z)

    def d_tail(n):
        """z^{-n} (D(z) - sum_{k<n} D_k z^k)."""
        head = sum(cfg.bmap1.d(k) * z**k for k in range(n))
        return (dz - head) / z**n

    def e_tail(n):
        head = sum(cfg.bmap2.d(k) * z**k for k in range(n))
        return (ez - head) / z**n

    gamma = BlockMatrix(idx.offsets)
    for l in range(c + 1):
        if l >= 1:
            gamma.set_block(l, l - 1, np.kron(np.eye(r * w * v), s0_fold[l]))
        if l <= g - 1:
            diag = np.kron(kron_sum(kron_sum(t, d0), e0), eye_m[l])
        else:
            d_use = dz
            e_use = ez if l == c else e0
            diag = np.kron(kron_sum(kron_sum(t, d_use), e_use), eye_m[l])
        if l >= 1:
            diag = diag + np.kron(np.eye(r * w * v), s_fold[l])
        gamma.add_block(l, l, diag)
    for l in range(g):
        n = g - l
        core = np.kron(i_w, cfg.bmap2.d(n)) + np.kron(d_tail(n), i_v)
        gamma.add_block(l, g, kron_many(i_r, core, eye_m[l], alpha_fold[n]))
        for rr in range(1, n):
            core = np.kron(cfg.bmap1.d(rr), i_v) + np.kron(i_w, cfg.bmap2.d(rr))
            gamma.add_block(l, l + rr, kron_many(i_r, core, eye_m[l], alpha_fold[rr]))
        for rr in range(n + 1, c - 1 - l + 1):
            gamma.add_block(l, l + rr, kron_many(i_r, i_w, cfg.bmap2.d(rr),
                                                 eye_m[l], alpha_fold[rr]))
    for l in range(g, c - 1):
        for rr in range(1, c - 1 - l + 1):
            gamma.add_block(l, l + rr, kron_many(i_r, i_w, cfg.bmap2.d(rr),
                                                 eye_m[l], alpha_fold[rr]))
    for l in range(c):
        n = c - l
        gamma.add_block(l, c, kron_many(i_r, i_w, e_tail(n), eye_m[l],
                                        alpha_fold[n]))

    scale = gen.ibar_vec / gen.delta_vec
    out = gamma.scale_rows(scale).to_dense() * z
    out += np.diag(gen.ibar_vec) * z
    alpha_row = alpha
    for l in range(g):
        r0, r1 = idx.segment(l)
        c0, c1 = idx.segment(l + 1)
        out[r0:r1, c0:c1] += np.kron(np.eye(r1 - r0), alpha_row)
    return out


def eval_y_series(gen: GeneratorView, z):
    """Dense sum_k Y_k z^k from the limit matrices (cross-check path)."""
    ys = limiting_blocks(gen)
    out = np.zeros((gen.order, gen.order))
    for k, yk in enumerate(ys):
        out += yk.to_dense() * z**k
    return out


def y22_slice(gen: GeneratorView):
    """Flat index range of the irreducible lower-right part (levels b >= g-1)."""
    return gen.index.offsets[gen.config.g - 1], gen.order
