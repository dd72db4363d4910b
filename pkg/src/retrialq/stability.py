"""Ergodicity check for the orbit chain.

The constructive condition compares each class's arrival rate with the
aggregate service completion rate of a fully loaded non-guard (g-fold) or
full (c-fold) server pool, weighted by the stationary phase mix of that
pool.  The determinant-derivative criterion on the irreducible part of the
limiting chain is kept as a desk-scale numeric cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RetrialQError
from .generator import GeneratorView, eval_y, y22_slice
from .kron import kron_power_sum
from .models import (SystemConfig, arrival_rate, ensure_valid, gth_solve)

DET_SIZE_CAP = 4000
NEAR_CRITICAL = 0.95


@dataclass(frozen=True)
class StabilityReport:
    x1: np.ndarray
    x2: np.ndarray
    mu_bar_1: float
    mu_bar_2: float
    lambda_1: float
    lambda_2: float
    rho: float
    stable: bool
    near_critical: bool
    det_derivative: float | None = None


def _pool_rate(ph, fold):
    """Stationary mix and aggregate completion rate of a saturated pool."""
    s_fold = kron_power_sum(ph.s, fold)
    s0_fold = kron_power_sum(ph.s0.reshape(-1, 1), fold)
    restart = np.kron(np.eye(ph.order ** (fold - 1)), ph.alpha.reshape(1, -1))
    gen = s_fold + s0_fold @ restart
    try:
        x = gth_solve(gen)
    except RetrialQError as exc:
        raise RetrialQError(f"saturated-pool system unsolvable: {exc}") from exc
    return x, float(x @ s0_fold.sum(axis=1))


def stability_check(config: SystemConfig) -> StabilityReport:
    config = ensure_valid(config)
    lam1 = arrival_rate(config.bmap1)
    lam2 = arrival_rate(config.bmap2)
    x1, mu1 = _pool_rate(config.service, config.g)
    x2, mu2 = _pool_rate(config.service, config.c)
    rho = lam1 / mu1 + lam2 / mu2
    return StabilityReport(
        x1=x1, x2=x2, mu_bar_1=mu1, mu_bar_2=mu2,
        lambda_1=lam1, lambda_2=lam2, rho=rho,
        stable=bool(rho < 1.0),
        near_critical=bool(NEAR_CRITICAL <= rho < 1.0),
    )


def det_derivative_check(gen: GeneratorView, step=1e-5):
    """Central-difference derivative of det(zI - Y22(z)) at z = 1.

    Positive means stable.  Works through sign/log-magnitude pairs so that
    large determinants cannot overflow; declined for matrices too large to
    materialize densely.
    """
    lo, hi = y22_slice(gen)
    n = hi - lo
    if n > DET_SIZE_CAP:
        raise RetrialQError(
            f"Y22 of order {n} exceeds the dense cap {DET_SIZE_CAP}; "
            "the determinant check is a desk-scale validator only"
        )

    def det_pair(z):
        y = eval_y(gen, z)[lo:hi, lo:hi]
        return np.linalg.slogdet(z * np.eye(n) - y)

    s_hi, l_hi = det_pair(1.0 + step)
    s_lo, l_lo = det_pair(1.0 - step)
    # derivative = (d(1+h) - d(1-h)) / 2h, combined in log space
    if s_hi == 0.0 and s_lo == 0.0:
        return 0.0
    if s_hi == -s_lo:
        sign = s_hi if s_hi != 0.0 else -s_lo
        mag = np.logaddexp(l_hi, l_lo) if s_hi and s_lo else max(l_hi, l_lo)
    elif s_hi == s_lo:
        sign = s_hi * np.sign(l_hi - l_lo)
        mag = max(l_hi, l_lo) + np.log1p(-np.exp(-abs(l_hi - l_lo)))
    else:
        sign = s_hi if s_lo == 0.0 else -s_lo
        mag = l_hi if s_lo == 0.0 else l_lo
    return float(sign * np.exp(min(mag - np.log(2 * step), 700.0)))
