"""Measurement ensembles, the forward map and its adjoint, shot noise.

An ensemble holds n blocks of m Hermitian d x d observables as a dense
(n, m, d, d) array.  Pauli-type ensembles additionally keep the generating
letter strings so that (a) a run is exactly reconstructible from JSON and
(b) the coherent-error letter-replacement rule stays exact and testable.

The forward map is y_i = sum_k <A_k^(i), x_k> over the block signal x; the
adjoint maps a data vector back to the block stack sum_i y_i A_k^(i).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import DimensionError, pauli_matrix

PAULI_LETTERS = "IXYZ"

# ordered off-diagonal replacement pairs, matching the calibration vector
# layout [xi_0, xi_{X->Y}, xi_{X->Z}, xi_{Y->X}, xi_{Y->Z}, xi_{Z->X}, xi_{Z->Y}]
REPLACEMENT_PAIRS = (
    ("X", "Y"), ("X", "Z"),
    ("Y", "X"), ("Y", "Z"),
    ("Z", "X"), ("Z", "Y"),
)


class UnsupportedNoiseError(ValueError):
    """Shot-noise simulation requested for a non-Pauli ensemble."""


@dataclass
class NoiseModel:
    kind: str = "none"          # "none" | "shot"
    samples: int = 10**8        # N per expectation value
    exact_binomial: bool = False

    def __post_init__(self):
        if self.kind not in ("none", "shot"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


@dataclass
class MeasurementEnsemble:
    kind: str                      # gue | gaussian | pauli | coherent-pauli
    observables: np.ndarray        # (n, m, d, d), Hermitian blocks
    strings: list | None = None    # pauli: n lists of m strings;
                                   # coherent-pauli: the m target strings
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.observables.shape[0]

    @property
    def m(self) -> int:
        return self.observables.shape[1]

    @property
    def d(self) -> int:
        return self.observables.shape[2]

    def block(self, k: int) -> "MeasurementEnsemble":
        """Single-block sub-ensemble (e.g. the target measurement A_0)."""
        strings = None
        if self.kind == "pauli" and self.strings is not None:
            strings = [self.strings[k]]
        elif self.kind == "coherent-pauli" and k == 0:
            strings = self.strings
        kind = "pauli" if self.kind == "coherent-pauli" and k == 0 else self.kind
        return MeasurementEnsemble(kind, self.observables[k:k + 1],
                                   strings=strings, seed=self.seed)

    def scaled(self, factor: float) -> "MeasurementEnsemble":
        return MeasurementEnsemble(self.kind, self.observables * factor,
                                   strings=self.strings, seed=self.seed)

    def _flat_parts(self):
        # cached (real, imag) observables flattened to (n, m, d*d); valid
        # because ensembles are immutable after construction
        cached = getattr(self, "_flat_cache", None)
        if cached is None:
            a = self.observables
            n, m, d = a.shape[0], a.shape[1], a.shape[2]
            cached = (np.ascontiguousarray(a.real).reshape(n, m, d * d),
                      np.ascontiguousarray(a.imag).reshape(n, m, d * d))
            self._flat_cache = cached
        return cached


def apply(ens: MeasurementEnsemble, x) -> np.ndarray:
    """Forward map: y_i = sum_k <A_k^(i), x_k> (Hilbert-Schmidt).

    Re <A, x> = Re(A).Re(x) + Im(A).Im(x) entrywise, so the contraction runs
    in real arithmetic (BLAS path, no conjugated copy of the observables).
    """
    x = np.asarray(x, dtype=complex)
    a = ens.observables
    if x.shape != (a.shape[0], a.shape[2], a.shape[3]):
        raise DimensionError(
            f"signal shape {x.shape} incompatible with ensemble "
            f"({a.shape[0]} blocks of {a.shape[2]}x{a.shape[3]})")
    n, d = a.shape[0], a.shape[2]
    ar, ai = ens._flat_parts()
    xr = np.ascontiguousarray(x.real).reshape(n, d * d, 1)
    xi = np.ascontiguousarray(x.imag).reshape(n, d * d, 1)
    return (np.matmul(ar, xr) + np.matmul(ai, xi))[:, :, 0].sum(axis=0)


def apply_block(ens: MeasurementEnsemble, k: int, xk) -> np.ndarray:
    """Forward map of a single block embedded at position k, zeros elsewhere."""
    xk = np.asarray(xk, dtype=complex)
    d = xk.shape[0]
    ar, ai = ens._flat_parts()
    return (ar[k] @ np.ascontiguousarray(xk.real).reshape(d * d)
            + ai[k] @ np.ascontiguousarray(xk.imag).reshape(d * d))


def adjoint(ens: MeasurementEnsemble, y) -> np.ndarray:
    """Adjoint map: block k = sum_i y_i A_k^(i)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (ens.m,):
        raise DimensionError(f"data length {y.shape} != m={ens.m}")
    a = ens.observables
    n, m, d = a.shape[0], a.shape[1], a.shape[2]
    out = np.matmul(y.astype(complex), a.reshape(n, m, d * d))
    return out.reshape(n, d, d)


def gue_ensemble(n, m, d, rng) -> MeasurementEnsemble:
    """n*m i.i.d. GUE observables: (B + B^dagger)/2, B entries N(0,1)+iN(0,1)."""
    b = rng.standard_normal((n, m, d, d)) + 1j * rng.standard_normal((n, m, d, d))
    obs = 0.5 * (b + b.conj().transpose(0, 1, 3, 2))
    return MeasurementEnsemble("gue", obs)


def gaussian_ensemble(n, m, d, rng) -> MeasurementEnsemble:
    """Real Gaussian observables, symmetrized to Hermitian."""
    b = rng.standard_normal((n, m, d, d))
    obs = (0.5 * (b + b.transpose(0, 1, 3, 2))).astype(complex)
    return MeasurementEnsemble("gaussian", obs)


def _random_strings(m, q, rng):
    idx = rng.integers(0, 4, size=(m, q))
    return ["".join(PAULI_LETTERS[j] for j in row) for row in idx]


def subsampled_pauli_ensemble(n, m, q, rng) -> MeasurementEnsemble:
    """n blocks of m independently uniform q-qubit Pauli strings."""
    strings = [_random_strings(m, q, rng) for _ in range(n)]
    obs = np.stack([np.stack([pauli_matrix(w) for w in block])
                    for block in strings])
    return MeasurementEnsemble("pauli", obs, strings=strings)


def replacement_observable(target: str, w: str, w_tilde: str) -> np.ndarray:
    """Sum over single-site replacements of one occurrence of w by w_tilde.

    Zero matrix if w does not occur in the target string.
    """
    d = 2 ** len(target)
    out = np.zeros((d, d), dtype=complex)
    for j, ch in enumerate(target):
        if ch == w:
            out += pauli_matrix(target[:j] + w_tilde + target[j + 1:])
    return out


def coherent_error_pauli_ensemble(m, q, rng) -> MeasurementEnsemble:
    """Target Pauli block plus the six letter-replacement calibration blocks.

    Block 0 holds m uniform target strings; blocks 1..6 hold, for each
    ordered pair W != W~ in {X, Y, Z}, the linearized coherent-error
    observables derived from the same target strings. n = 7.
    """
    targets = _random_strings(m, q, rng)
    return _coherent_from_targets(targets, q)


def add_shot_noise(y, ens: MeasurementEnsemble, noise: NoiseModel, rng):
    """Simulate finite-statistics noise on Pauli expectation values.

    Each ideal expectation y_i (clipped to [-1, 1]) is replaced by the mean
    of N simulated +-1 outcomes; by default via the Gaussian approximation
    with variance (1 - y_i^2)/N, optionally by exact binomial resampling.
    """
    y = np.asarray(y, dtype=float)
    if noise.kind == "none":
        return y.copy()
    if ens.kind != "pauli":
        raise UnsupportedNoiseError(
            f"shot noise is defined for Pauli expectation values, "
            f"not ensemble kind {ens.kind!r}")
    clipped = np.clip(y, -1.0, 1.0)
    n_samples = noise.samples
    if noise.exact_binomial:
        p = 0.5 * (1.0 + clipped)
        counts = rng.binomial(n_samples, p)
        return 2.0 * counts / n_samples - 1.0
    std = np.sqrt((1.0 - clipped**2) / n_samples)
    return clipped + std * rng.standard_normal(y.shape)


def ensemble_to_json(ens: MeasurementEnsemble) -> str:
    """Documented JSON form: kind, dims, seed, strings for Pauli kinds.

    Random dense ensembles (gue/gaussian) must carry the seed they were
    generated from; Pauli kinds are reconstructed from their strings.
    """
    payload = {"kind": ens.kind, "n": ens.n, "m": ens.m, "d": ens.d,
               "seed": ens.seed}
    if ens.kind in ("pauli", "coherent-pauli"):
        payload["strings"] = ens.strings
    elif ens.seed is None:
        raise ValueError(f"{ens.kind} ensemble without a seed is not serializable")
    return json.dumps(payload)


def ensemble_from_json(text: str) -> MeasurementEnsemble:
    payload = json.loads(text)
    kind = payload["kind"]
    n, m, d = payload["n"], payload["m"], payload["d"]
    if kind == "pauli":
        strings = payload["strings"]
        obs = np.stack([np.stack([pauli_matrix(w) for w in block])
                        for block in strings])
        return MeasurementEnsemble(kind, obs, strings=strings,
                                   seed=payload.get("seed"))
    if kind == "coherent-pauli":
        targets = payload["strings"]
        q = len(targets[0])
        ens = _coherent_from_targets(targets, q)
        ens.seed = payload.get("seed")
        return ens
    rng = np.random.default_rng(payload["seed"])
    maker = gue_ensemble if kind == "gue" else gaussian_ensemble
    ens = maker(n, m, d, rng)
    ens.seed = payload["seed"]
    return ens


def _coherent_from_targets(targets, q):
    d = 2 ** q
    m = len(targets)
    obs = np.zeros((7, m, d, d), dtype=complex)
    obs[0] = np.stack([pauli_matrix(w) for w in targets])
    for b, (w, wt) in enumerate(REPLACEMENT_PAIRS, start=1):
        obs[b] = np.stack([replacement_observable(t, w, wt) for t in targets])
    return MeasurementEnsemble("coherent-pauli", obs, strings=list(targets))
