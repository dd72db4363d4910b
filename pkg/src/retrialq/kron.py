"""Kronecker algebra and small linear-system kernels.

Everything downstream (generator assembly, ergodicity systems, censoring
recursions) is built from Kronecker products/sums of small matrices and a
handful of dense solves.  The l-fold Kronecker sum follows the convention
that the replicated factor may be rectangular with n rows: the identity
padding is always sized by n, so a column vector (service-completion
rates) folded l times maps an n^l-dimensional phase space onto an
n^(l-1)-dimensional one.
"""

from __future__ import annotations

import numpy as np

from .errors import RetrialQError

SOLVE_RTOL = 1e-10


def kron_product(a, b):
    """Kronecker product A (x) B."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def kron_sum(a, b):
    """Kronecker sum A (+) B = A (x) I + I (x) B.  Both inputs square."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != a.shape[1] or b.shape[0] != b.shape[1]:
        raise ValueError("kron_sum requires square matrices")
    return np.kron(a, np.eye(b.shape[0])) + np.kron(np.eye(a.shape[0]), b)


def kron_many(*mats):
    """Kronecker product of several factors, left to right."""
    out = np.asarray(mats[0], dtype=float)
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m, dtype=float))
    return out


def kron_power_product(a, l):
    """l-fold Kronecker product; the 0-fold product is the scalar 1 (as 1x1)."""
    if l < 0:
        raise ValueError("negative Kronecker power")
    out = np.array([[1.0]])
    a = np.asarray(a, dtype=float)
    for _ in range(l):
        out = np.kron(out, a)
    return out


def kron_power_sum(omega, l):
    """l-fold Kronecker sum sum_m I_{n^m} (x) Omega (x) I_{n^{l-m-1}}.

    n is the row count of Omega, so rectangular Omega is allowed: folding a
    column vector of length n gives an n^l x n^(l-1) matrix.  The 0-fold
    sum is the scalar 0 (as 1x1).
    """
    if l < 0:
        raise ValueError("negative Kronecker power")
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 1:
        omega = omega.reshape(-1, 1)
    if l == 0:
        return np.array([[0.0]])
    n = omega.shape[0]
    terms = [
        kron_many(np.eye(n**m), omega, np.eye(n ** (l - m - 1)))
        for m in range(l)
    ]
    return sum(terms)


def solve_linear(a, b):
    """Solve A x = b, checking the residual against the working precision."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.linalg.solve(a, b)
    resid = np.abs(a @ x - b).max()
    scale = max(np.abs(a).max(), 1.0)
    if not np.isfinite(resid) or resid > SOLVE_RTOL * scale * max(np.abs(b).max(), 1.0):
        raise RetrialQError(f"linear solve residual too large: {resid:.3e}")
    return x


def solve_null_left(a):
    """One-dimensional left null vector of A, normalized to sum 1.

    Replaces the last column of A with ones and solves x [A' ] = e_last,
    which enforces x A[:, :-1] = 0 and x e = 1 simultaneously.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    m = a.copy()
    m[:, -1] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    x = np.linalg.solve(m.T, rhs)
    resid = np.abs(x @ a).max()
    scale = max(np.abs(a).max(), 1.0)
    if not np.isfinite(resid) or resid > 1e-8 * scale:
        raise RetrialQError(f"left null-space residual too large: {resid:.3e}")
    return x


class BlockMatrix:
    """Sparse grid of dense blocks indexed by server-occupancy pair (l, l').

    offsets[l] is the first flat index of the level-l segment; block (l, l')
    is dense of shape (offsets[l+1]-offsets[l], offsets[l'+1]-offsets[l']).
    Absent blocks are structural zeros.
    """

    def __init__(self, offsets, blocks=None):
        self.offsets = list(offsets)
        self.order = self.offsets[-1]
        self.blocks = {}
        if blocks:
            for key, val in blocks.items():
                self.set_block(*key, val)

    def seg(self, l):
        return self.offsets[l], self.offsets[l + 1]

    def set_block(self, l, lp, mat):
        mat = np.asarray(mat, dtype=float)
        want = (self.offsets[l + 1] - self.offsets[l],
                self.offsets[lp + 1] - self.offsets[lp])
        if mat.shape != want:
            raise ValueError(f"block ({l},{lp}) has shape {mat.shape}, want {want}")
        if np.any(mat):
            self.blocks[(l, lp)] = mat

    def add_block(self, l, lp, mat):
        if (l, lp) in self.blocks:
            self.blocks[(l, lp)] = self.blocks[(l, lp)] + np.asarray(mat, dtype=float)
        else:
            self.set_block(l, lp, mat)

    def to_dense(self):
        out = np.zeros((self.order, self.order))
        for (l, lp), mat in self.blocks.items():
            r0, r1 = self.seg(l)
            c0, c1 = self.seg(lp)
            out[r0:r1, c0:c1] = mat
        return out

    def matmul_dense(self, x):
        """Dense product (self @ x) for x of shape (order, m)."""
        out = np.zeros((self.order, x.shape[1]))
        for (l, lp), mat in self.blocks.items():
            r0, r1 = self.seg(l)
            c0, c1 = self.seg(lp)
            out[r0:r1] += mat @ x[c0:c1]
        return out

    def rvec_mul(self, v):
        """Row-vector product v @ self for v of shape (order,)."""
        out = np.zeros(self.order)
        for (l, lp), mat in self.blocks.items():
            r0, r1 = self.seg(l)
            c0, c1 = self.seg(lp)
            out[c0:c1] += v[r0:r1] @ mat
        return out

    def scale_rows(self, d):
        """New BlockMatrix with rows scaled by the vector d."""
        out = BlockMatrix(self.offsets)
        for (l, lp), mat in self.blocks.items():
            r0, r1 = self.seg(l)
            scaled = mat * d[r0:r1, None]
            if np.any(scaled):
                out.blocks[(l, lp)] = scaled
        return out

    def scaled(self, s):
        out = BlockMatrix(self.offsets)
        for key, mat in self.blocks.items():
            out.blocks[key] = s * mat
        return out

    def row_sums(self):
        out = np.zeros(self.order)
        for (l, lp), mat in self.blocks.items():
            r0, r1 = self.seg(l)
            out[r0:r1] += mat.sum(axis=1)
        return out

    def __add__(self, other):
        out = BlockMatrix(self.offsets)
        for key, mat in self.blocks.items():
            out.blocks[key] = mat.copy()
        for key, mat in other.blocks.items():
            out.add_block(*key, mat)
        return out
