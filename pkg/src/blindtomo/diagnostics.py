"""Error metrics, empirical RIP probe, convergence-trace analysis."""

from __future__ import annotations

import numpy as np

from . import measurements as meas
from .linalg import eig_hermitian
from .signals import random_rank_r_state


class InsufficientDataError(ValueError):
    """Too few usable points in a convergence trace."""


def trace_norm_error(rho_hat, rho) -> float:
    """Schatten-1 distance: sum of absolute eigenvalues of the difference."""
    vals, _ = eig_hermitian(np.asarray(rho_hat) - np.asarray(rho))
    return float(np.sum(np.abs(vals)))


def calibration_l2_error(xi_hat, xi) -> float:
    xi_hat = np.asarray(xi_hat, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if xi_hat.shape != xi.shape:
        raise ValueError(f"length mismatch: {xi_hat.shape} vs {xi.shape}")
    return float(np.linalg.norm(xi_hat - xi))


def random_omega_hat_sample(n, d, s, r, rng):
    """Unit-Frobenius sparse de-mixing signal.

    Uniform block support, Haar rank-r blocks with signed Gaussian weights,
    Frobenius-normalized -- matching the signal generators.
    """
    support = rng.choice(n, size=s, replace=False)
    x = np.zeros((n, d, d), dtype=complex)
    weights = rng.standard_normal(s)
    for k, w in zip(support, weights):
        x[k] = w * random_rank_r_state(d, r, rng)
    x /= np.linalg.norm(x)
    return x


def rip_delta_lower_bound(ens, sample_count: int, s: int, r: int, rng,
                          normalized: bool = True) -> float:
    """Sampled lower bound on the restricted isometry constant.

    Maximum of | ||A(X)||^2 - 1 | over sample_count random unit-Frobenius
    signals (the map is normalized by 1/sqrt(m) unless the caller already
    did so).  A max over a sample subset lower-bounds the true constant;
    certifying an upper bound is out of reach.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    scale = 1.0 / ens.m if normalized else 1.0
    worst = 0.0
    for _ in range(sample_count):
        x = random_omega_hat_sample(ens.n, ens.d, s, r, rng)
        val = scale * np.linalg.norm(meas.apply(ens, x)) ** 2
        worst = max(worst, abs(val - 1.0))
    return worst


def convergence_trace_fit(trace):
    """Least-squares geometric-decay fit of an error trace.

    Returns (rate, residual): rate = exp(slope) of log-error versus
    iteration, residual = RMS deviation of the log-errors from the line.
    Truncates at the first non-positive entry; needs >= 3 points.
    """
    trace = np.asarray(trace, dtype=float)
    nonpos = np.nonzero(trace <= 0)[0]
    if nonpos.size:
        trace = trace[:nonpos[0]]
    if trace.shape[0] < 3:
        raise InsufficientDataError(
            f"need at least 3 positive trace entries, have {trace.shape[0]}")
    ls = np.log(trace)
    its = np.arange(ls.shape[0])
    slope, intercept = np.polyfit(its, ls, 1)
    fit = slope * its + intercept
    residual = float(np.sqrt(np.mean((ls - fit) ** 2)))
    return float(np.exp(slope)), residual
