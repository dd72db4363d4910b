"""Input stochastic processes and their scalar rate summaries.

Three ingredient processes describe the queue: two batch Markovian arrival
streams (primary and priority class), one Markov-modulated retrial process,
and a common phase-type service law shared by all servers.  Validation is
non-throwing and returns a structured list of violations; the solver entry
points call :func:`ensure_valid` which raises on a non-empty report.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, RetrialQError

ROWSUM_RTOL = 1e-10


@dataclass(frozen=True)
class Violation:
    where: str
    rule: str
    row: int | None = None

    def __str__(self):
        loc = self.where if self.row is None else f"{self.where}[row {self.row}]"
        return f"{loc}: {self.rule}"


def _as_matrix_tuple(mats):
    return tuple(np.asarray(m, dtype=float) for m in mats)


@dataclass(frozen=True)
class BmapSpec:
    """Batch Markovian arrival process given by matrices D_0..D_nmax."""

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "matrices", _as_matrix_tuple(self.matrices))

    @property
    def order(self):
        return self.matrices[0].shape[0]

    @property
    def max_batch(self):
        return len(self.matrices) - 1

    def d(self, k):
        """D_k, with zeros beyond the finite batch support."""
        if 0 <= k <= self.max_batch:
            return self.matrices[k]
        return np.zeros((self.order, self.order))

    def total(self):
        """D(1) = sum_k D_k, the phase-process generator."""
        return sum(self.matrices)

    def d_of_z(self, z):
        """D(z) = sum_k D_k z^k."""
        return sum(m * z**k for k, m in enumerate(self.matrices))

    def mean_matrix(self):
        """D'(1) = sum_k k D_k."""
        return sum(k * m for k, m in enumerate(self.matrices))

    def repaired(self):
        """Absorb a tiny D(1) row-sum residual into the diagonal of D_0."""
        resid = self.total().sum(axis=1)
        d0 = self.matrices[0] - np.diag(resid)
        return replace(self, matrices=(d0,) + self.matrices[1:])

    def check(self, where="bmap"):
        out = []
        w = self.order
        if len(self.matrices) < 2:
            out.append(Violation(where, "needs at least D_0 and D_1"))
            return out
        for k, m in enumerate(self.matrices):
            if m.shape != (w, w):
                out.append(Violation(f"{where}.D{k}", f"shape {m.shape} != ({w},{w})"))
                return out
            if not np.all(np.isfinite(m)):
                out.append(Violation(f"{where}.D{k}", "entries must be finite"))
                return out
        d0 = self.matrices[0]
        for i in range(w):
            if d0[i, i] >= 0:
                out.append(Violation(f"{where}.D0", "diagonal must be negative", i))
            off = np.delete(d0[i], i)
            if np.any(off < 0):
                out.append(Violation(f"{where}.D0", "off-diagonal must be nonnegative", i))
        if abs(np.linalg.det(d0)) < 1e-300:
            out.append(Violation(f"{where}.D0", "must be nonsingular"))
        for k, m in enumerate(self.matrices[1:], start=1):
            if np.any(m < 0):
                out.append(Violation(f"{where}.D{k}", "must be entrywise nonnegative"))
        tot = self.total()
        tol = ROWSUM_RTOL * max(np.abs(np.diag(d0)).max(), 1.0)
        bad = np.abs(tot.sum(axis=1)) > tol
        for i in np.nonzero(bad)[0]:
            out.append(Violation(where, "D(1) must have zero row sums", int(i)))
        if not bad.any() and not _irreducible(tot):
            out.append(Violation(where, "D(1) must be irreducible"))
        return out


@dataclass(frozen=True)
class MmppSpec:
    """Retrial modulator: non-retrial transitions T0 and retrial rates diag(T1)."""

    t0: np.ndarray
    sigma: np.ndarray  # diagonal of T1

    def __post_init__(self):
        object.__setattr__(self, "t0", np.asarray(self.t0, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float).ravel())

    @property
    def order(self):
        return self.t0.shape[0]

    @property
    def t1(self):
        return np.diag(self.sigma)

    def total(self):
        """T = T0 + T1, the modulator generator."""
        return self.t0 + self.t1

    def repaired(self):
        resid = self.total().sum(axis=1)
        return replace(self, t0=self.t0 - np.diag(resid))

    def check(self, where="mmpp"):
        out = []
        r = self.order
        if self.sigma.shape != (r,):
            out.append(Violation(where, f"T1 diagonal length {self.sigma.shape} != {r}"))
            return out
        if not (np.all(np.isfinite(self.t0)) and np.all(np.isfinite(self.sigma))):
            out.append(Violation(where, "entries must be finite"))
            return out
        if np.any(self.sigma <= 0):
            out.append(Violation(f"{where}.T1", "retrial rates sigma_r must be > 0"))
        for i in range(r):
            off = np.delete(self.t0[i], i)
            if np.any(off < 0):
                out.append(Violation(f"{where}.T0", "off-diagonal must be nonnegative", i))
        tot = self.total()
        tol = ROWSUM_RTOL * max(np.abs(np.diag(tot)).max(), 1.0)
        bad = np.abs(tot.sum(axis=1)) > tol
        for i in np.nonzero(bad)[0]:
            out.append(Violation(where, "T0 + T1 must have zero row sums", int(i)))
        if not bad.any() and not _irreducible(tot):
            out.append(Violation(where, "T must be irreducible"))
        return out


@dataclass(frozen=True)
class PhSpec:
    """Phase-type service law (initial vector, sub-generator)."""

    alpha: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float).ravel())
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))

    @property
    def order(self):
        return self.s.shape[0]

    @property
    def s0(self):
        """Completion rate vector S0 = -S e."""
        return -self.s.sum(axis=1)

    def check(self, where="ph"):
        out = []
        m = self.order
        if self.alpha.shape != (m,):
            out.append(Violation(f"{where}.alpha", f"length {self.alpha.shape} != {m}"))
            return out
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.s))):
            out.append(Violation(where, "entries must be finite"))
            return out
        if np.any(self.alpha < 0):
            out.append(Violation(f"{where}.alpha", "entries must be nonnegative"))
        if abs(self.alpha.sum() - 1.0) > 1e-10:
            out.append(Violation(f"{where}.alpha", "PH initial vector must sum to 1"))
        for i in range(m):
            if self.s[i, i] >= 0:
                out.append(Violation(f"{where}.S", "diagonal must be negative", i))
            off = np.delete(self.s[i], i)
            if np.any(off < 0):
                out.append(Violation(f"{where}.S", "off-diagonal must be nonnegative", i))
            if self.s[i].sum() > 1e-10 * max(abs(self.s[i, i]), 1.0):
                out.append(Violation(f"{where}.S", "row sums must be nonpositive", i))
        if abs(np.linalg.det(self.s)) < 1e-300:
            out.append(Violation(f"{where}.S", "must be nonsingular"))
        if not np.any(self.s0 > 0):
            out.append(Violation(f"{where}.S", "S0 = -S e must have a positive entry"))
        return out


@dataclass(frozen=True)
class SystemConfig:
    """Full model instance plus solver tolerances."""

    bmap1: BmapSpec
    bmap2: BmapSpec
    mmpp: MmppSpec
    service: PhSpec
    c: int
    g: int
    epsilon: float = 1e-8
    epsilon0: float = 1e-6
    n_max: int = 400
    max_g_iter: int = 20000

    @property
    def dims(self):
        """(R, W, V, M) phase-space sizes."""
        return (self.mmpp.order, self.bmap1.order, self.bmap2.order,
                self.service.order)

    def check(self):
        out = []
        out += self.bmap1.check("bmap1")
        out += self.bmap2.check("bmap2")
        out += self.mmpp.check("mmpp")
        out += self.service.check("ph")
        if self.c < 2:
            out.append(Violation("servers", "c must be at least 2"))
        if not (1 <= self.g <= self.c - 1):
            out.append(Violation("servers", "g must satisfy 1 <= g <= c-1"))
        for name in ("epsilon", "epsilon0"):
            if getattr(self, name) <= 0:
                out.append(Violation("solver", f"{name} must be positive"))
        if self.n_max < 1:
            out.append(Violation("solver", "N_max must be at least 1"))
        return out

    def repaired(self):
        return replace(
            self,
            bmap1=self.bmap1.repaired(),
            bmap2=self.bmap2.repaired(),
            mmpp=self.mmpp.repaired(),
        )

    def fingerprint(self):
        h = hashlib.sha256()
        for arr in (*self.bmap1.matrices, *self.bmap2.matrices,
                    self.mmpp.t0, self.mmpp.sigma,
                    self.service.alpha, self.service.s):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        h.update(f"{self.c},{self.g},{self.epsilon},{self.epsilon0},{self.n_max}".encode())
        return h.hexdigest()[:16]


def _irreducible(gen):
    """Strong connectivity of the off-diagonal support graph."""
    a = np.asarray(gen, dtype=float).copy()
    np.fill_diagonal(a, 0.0)
    if a.shape[0] == 1:
        return True
    ncomp, _ = connected_components(csr_matrix(a > 0), connection="strong")
    return ncomp == 1


def validate(config: SystemConfig):
    """All violated invariants of a configuration (empty list if valid)."""
    try:
        return config.check()
    except Exception as exc:  # malformed numerics must not escape
        return [Violation("config", f"unreadable input: {exc}")]


def ensure_valid(config: SystemConfig) -> SystemConfig:
    """Raise ConfigError on any violation, else return the repaired config."""
    report = validate(config)
    if report:
        raise ConfigError(report)
    return config.repaired()


def stationary_vector(generator):
    """Stationary probability vector of an irreducible conservative generator.

    Uses state-reduction (GTH-style) elimination: only additions and
    multiplications of nonnegative quantities, so the result is nonnegative
    regardless of conditioning.
    """
    q = np.asarray(generator, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise RetrialQError("generator must be square")
    n = q.shape[0]
    tol = ROWSUM_RTOL * max(np.abs(np.diag(q)).max(), 1.0)
    if np.abs(q.sum(axis=1)).max() > tol:
        raise RetrialQError("generator must have zero row sums")
    if not _irreducible(q):
        raise RetrialQError("generator must be irreducible")
    return gth_solve(q)


def gth_solve(generator):
    """GTH elimination without the validation front door (internal use)."""
    a = np.array(generator, dtype=float)
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        if s <= 0:
            raise RetrialQError("state-reduction hit a non-reachable state")
        a[:k, k] /= s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    x = np.zeros(n)
    x[0] = 1.0
    for k in range(1, n):
        x[k] = x[:k] @ a[:k, k]
    return x / x.sum()


def arrival_rate(bmap: BmapSpec):
    """Stationary per-customer arrival rate theta D'(1) e."""
    theta = stationary_vector(bmap.total())
    return float(theta @ bmap.mean_matrix().sum(axis=1))


def batch_arrival_rate(bmap: BmapSpec):
    """Stationary batch arrival rate theta (-D_0) e."""
    theta = stationary_vector(bmap.total())
    return float(theta @ (-bmap.matrices[0]).sum(axis=1))


def retrial_rate(mmpp: MmppSpec):
    """Stationary per-customer retrial rate theta_0 T1 e."""
    theta = stationary_vector(mmpp.total())
    return float(theta @ mmpp.sigma)


def service_rate(ph: PhSpec):
    """Mean service rate 1 / (-alpha S^{-1} e)."""
    mean = -ph.alpha @ np.linalg.solve(ph.s, np.ones(ph.order))
    return float(1.0 / mean)
