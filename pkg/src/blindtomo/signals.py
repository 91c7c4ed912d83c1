"""Signal model and seeded generators.

A block signal is an ndarray of shape (n, d, d): n Hermitian d x d blocks
stacked on top of each other, block k carrying xi_k * x_k. Calibration
vectors are real length-n arrays, density matrices Hermitian PSD trace-1
d x d arrays of rank <= r.

All generators take an explicit numpy Generator; per-trial streams are
derived from a master seed with :func:`derive_seed` so results are
reproducible independently of worker count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .linalg import eig_hermitian

XI_MODELS = ("gaussian-unit", "leading-one-scaled", "shifted-normal")


class DegenerateEstimateError(ValueError):
    """Reference block has (numerically) vanishing trace."""


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 64-bit sub-stream seed from a master seed and context labels."""
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for p in parts:
        h.update(b"|")
        h.update(str(p).encode())
    return int.from_bytes(h.digest()[:8], "little")


def spawn_rng(master_seed: int, *parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *parts))


@dataclass
class InstanceSpec:
    """Recipe for one random (xi, rho) problem instance."""

    n: int
    d: int
    s: int
    r: int
    xi_model: str = "gaussian-unit"
    xi_scale: float = 1.0      # leading-one-scaled: factor on the extra entries
    xi_mean: float = 0.2       # shifted-normal parameters
    xi_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.s <= self.n:
            raise ValueError(f"need 1 <= s <= n, got s={self.s}, n={self.n}")
        if not 1 <= self.r <= self.d:
            raise ValueError(f"need 1 <= r <= d, got r={self.r}, d={self.d}")
        if self.xi_model not in XI_MODELS:
            raise ValueError(f"unknown xi_model {self.xi_model!r}")


def random_pure_state(d: int, rng: np.random.Generator):
    """Haar-random pure state |psi><psi| via a normalized complex Gaussian."""
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def random_rank_r_state(d: int, r: int, rng: np.random.Generator, spectrum=None):
    """Rank-r state with Haar-random eigenvectors.

    The spectrum defaults to flat (1/r on the first r eigenvalues); a custom
    nonnegative spectrum summing to 1 may be supplied.
    """
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got r={r}, d={d}")
    if spectrum is None:
        spectrum = np.full(r, 1.0 / r)
    spectrum = np.asarray(spectrum, dtype=float)
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    q, _ = np.linalg.qr(g)  # Haar-random isometry d x r
    return (q * spectrum) @ q.conj().T


def random_calibration(spec: InstanceSpec, rng: np.random.Generator):
    """Draw an s-sparse calibration vector according to spec.xi_model."""
    xi = np.zeros(spec.n)
    if spec.xi_model == "gaussian-unit":
        support = rng.choice(spec.n, size=spec.s, replace=False)
        xi[support] = rng.standard_normal(spec.s)
    elif spec.xi_model == "leading-one-scaled":
        xi[0] = 1.0
        extra = rng.choice(spec.n - 1, size=spec.s - 1, replace=False) + 1
        xi[extra] = rng.standard_normal(spec.s - 1) * spec.xi_scale
    else:  # shifted-normal, xi_0 = 1 plus shifted-Gaussian corrections
        xi[0] = 1.0
        extra = rng.choice(spec.n - 1, size=spec.s - 1, replace=False) + 1
        xi[extra] = rng.normal(spec.xi_mean, spec.xi_std, size=spec.s - 1)
    return xi


def random_instance(spec: InstanceSpec, rng: np.random.Generator):
    """Draw (xi, rho) and the assembled block signal."""
    rho = random_rank_r_state(spec.d, spec.r, rng) if spec.r > 1 \
        else random_pure_state(spec.d, rng)
    xi = random_calibration(spec, rng)
    return xi, rho, assemble_signal(xi, rho)


def assemble_signal(xi, rho):
    """Lifted signal xi (x) rho as an (n, d, d) block stack."""
    xi = np.asarray(xi, dtype=float)
    rho = np.asarray(rho, dtype=complex)
    return xi[:, None, None] * rho[None, :, :]


def project_to_state(mat):
    """Nearest PSD matrix, trace-normalized to 1 (final state read-out)."""
    vals, vecs = eig_hermitian(mat)
    vals = np.clip(vals, 0.0, None)
    total = vals.sum()
    if total <= 1e-12:
        raise DegenerateEstimateError("no positive spectral weight to normalize")
    vals /= total
    return (vecs * vals) @ vecs.conj().T


def extract_estimate(x, reference_block: int = 0):
    """Read (rho_hat, xi_hat) off a block signal.

    The state estimate is the trace-normalized reference block, projected to
    PSD trace-1; calibration entries are read off as block traces (exact for
    blocks xi_k * x_k with trace-1 x_k).
    """
    x = np.asarray(x)
    xi_hat = np.real(np.trace(x, axis1=1, axis2=2))
    t = xi_hat[reference_block]
    if abs(t) <= 1e-12:
        raise DegenerateEstimateError(
            f"reference block {reference_block} has vanishing trace")
    rho_hat = project_to_state(x[reference_block] / t)
    return rho_hat, xi_hat
