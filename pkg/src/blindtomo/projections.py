"""Structured hard-thresholding projections.

* s-sparse vector thresholding (keep largest-magnitude entries),
* low-rank projection of Hermitian blocks (psd / signed-psd / plain-rank),
* the hierarchical block projection onto the sparse de-mixing signal set
  (low-rank-project every block, keep the s largest projected blocks),
* the fixed-rank tangent-space projection used inside the SDT iteration.

Ties are always broken towards the lowest index so results are
deterministic and bit-comparable across runs.
"""

from __future__ import annotations

import numpy as np

from .linalg import eig_hermitian

RANK_MODES = ("psd", "signed-psd", "plain-rank")

VANISHING_BLOCK_TOL = 1e-12
REL_VANISHING_TOL = 1e-2


def hard_threshold_vector(v, s: int):
    """Euclidean projection onto s-sparse vectors.

    Keeps the s largest-magnitude entries (lowest index wins ties), zeroes
    the rest.
    """
    v = np.asarray(v, dtype=float)
    if s < 0:
        raise ValueError("sparsity must be nonnegative")
    if s >= v.shape[0]:
        return v.copy()
    out = np.zeros_like(v)
    if s == 0:
        return out
    # stable sort on -|v| -> ties resolved towards the lower index
    keep = np.argsort(-np.abs(v), kind="stable")[:s]
    out[keep] = v[keep]
    return out


def _kept_spectrum(vals, r, mode):
    """Retained eigenvalues, in the descending eigenbasis, for each mode.

    psd: the r leading eigenvalues clipped at zero.  signed-psd: the better,
    in Euclidean distance on the spectrum (equal to Frobenius distance on
    the matrices), of the psd branch and its mirror keeping the r most
    negative eigenvalues.  plain-rank: the r largest in magnitude.
    """
    kept = np.zeros_like(vals)
    if mode == "plain-rank":
        keep = np.argsort(-np.abs(vals), kind="stable")[:r]
        kept[keep] = vals[keep]
        return kept
    kept[:r] = np.clip(vals[:r], 0.0, None)
    if mode == "psd":
        return kept
    neg = np.zeros_like(vals)
    neg[vals.shape[0] - r:] = np.clip(vals[vals.shape[0] - r:], None, 0.0)
    if np.linalg.norm(vals - kept) <= np.linalg.norm(vals - neg):
        return kept
    return neg


def project_rank(x, r: int, mode: str = "psd"):
    """Rank-r projection of a Hermitian matrix.

    psd: keep the r largest nonnegative eigenvalues (fewer if fewer are
    positive).  signed-psd: the better, in Frobenius distance, of the psd
    projection of x and the negated psd projection of -x, i.e. the metric
    projection onto {c * state : c real}.  plain-rank: keep the r largest
    eigenvalues in magnitude.
    """
    if mode not in RANK_MODES:
        raise ValueError(f"unknown rank mode {mode!r}")
    x = np.asarray(x, dtype=complex)
    vals, vecs = eig_hermitian(x)
    kept = _kept_spectrum(vals, r, mode)
    return (vecs * kept) @ vecs.conj().T


def _eig_blocks(x):
    # blockwise eig_hermitian: symmetrize, batched eigh, stable descending
    h = 0.5 * (x + x.conj().transpose(0, 2, 1))
    vals, vecs = np.linalg.eigh(h)
    order = np.arange(vals.shape[1])[::-1]
    return vals[:, order], vecs[:, :, order]


def project_omega_hat(x, s: int, r: int, mode: str = "psd"):
    """Projection onto the sparse de-mixing set (Hat-Omega).

    Every block is rank-r projected; the s blocks with the largest projected
    Frobenius norm are retained (lowest index on ties), the rest zeroed.
    """
    if mode not in RANK_MODES:
        raise ValueError(f"unknown rank mode {mode!r}")
    x = np.asarray(x, dtype=complex)
    n = x.shape[0]
    if s > n:
        s = n
    vals, vecs = _eig_blocks(x)
    kept = np.stack([_kept_spectrum(vals[k], r, mode) for k in range(n)])
    norms = np.linalg.norm(kept, axis=1)
    keep = np.argsort(-norms, kind="stable")[:s]
    out = np.zeros_like(x)
    for k in keep:
        out[k] = (vecs[k] * kept[k]) @ vecs[k].conj().T
    return out


def tangent_space_project(x, g, r: int):
    """Blockwise tangent-space projection of g at the fixed-rank point x.

    For every non-vanishing block x_k the projector P_U is built from the r
    dominant eigenvectors of x_k and g_k is mapped to
    g_k - (1 - P_U) g_k (1 - P_U); blocks of g over vanishing blocks of x
    pass through unchanged.  A block counts as vanishing when its norm is
    negligible in absolute terms or relative to the largest block: the
    eigenbasis of a nearly-zero block carries no usable range information
    and restricting the gradient to it can lock the iteration.
    """
    x = np.asarray(x, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if x.shape != g.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {g.shape}")
    out = g.copy()
    d = x.shape[1]
    eye = np.eye(d)
    norms = np.linalg.norm(x.reshape(x.shape[0], -1), axis=1)
    floor = max(VANISHING_BLOCK_TOL, REL_VANISHING_TOL * float(norms.max()))
    live = [k for k in range(x.shape[0]) if norms[k] > floor]
    if not live:
        return out
    vals, vecs = _eig_blocks(x[live])
    for i, k in enumerate(live):
        lead = np.argsort(-np.abs(vals[i]), kind="stable")[:r]
        u = vecs[i][:, lead]
        comp = eye - u @ u.conj().T
        out[k] = g[k] - comp @ g[k] @ comp
    return out
