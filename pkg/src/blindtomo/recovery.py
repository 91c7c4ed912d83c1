"""Iterative hard-thresholding solvers.

* sdt: projected gradient descent over the sparse de-mixing set, with an
  adaptive scalar step width, an optional fixed-rank tangent-space
  projection of the gradient, and a support-swap escape that hops out of
  stalled block supports.
* dt / standard_tomography: the non-sparse (s = n) and single-block
  (n = s = 1) special cases of the same iteration.
* iht_sparse_vector / iht_low_rank: the classic IHT building blocks.
* als_bt: alternating least squares for the bilinear blind-tomography
  problem, alternating a sparse xi-IHT step and a low-rank rho-IHT step,
  re-initializing from a fresh random state when progress stalls.

All solvers stop on the relative residual ||y - A(X)|| / ||y|| and return
the best iterate seen (lowest residual), while the termination reason
reflects the stopping rule that fired.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import measurements as meas
from .projections import (hard_threshold_vector, project_omega_hat,
                          project_rank, tangent_space_project)
from .signals import project_to_state, random_rank_r_state

STALL_WINDOW = 10
STALL_REL_TOL = 1e-3
CONSTANT_STALL_TOL = 1e-12
STEP_DENOM_TOL = 1e-14
MAX_BACKTRACKS = 30
SWAP_SHALLOW_ITERS = 4
SWAP_DEEP_ITERS = 25
SWAP_DEEP_CANDIDATES = 3
VANISHING_BLOCK_TOL = 1e-12


class NumericalFailureError(RuntimeError):
    """Non-finite values appeared during the iteration."""


@dataclass
class SdtConfig:
    s: int
    r: int
    max_iters: int = 600
    gamma_break: float = 1e-5
    step_mode: str = "adaptive-per-block"   # or "constant"
    mu: float = 1.0                          # constant-step width
    use_tangent_projection: bool = True
    rank_mode: str = "signed-psd"
    support_restriction: tuple | None = None  # fixed block support (informed DT)

    def __post_init__(self):
        if self.gamma_break <= 0:
            raise ValueError("gamma_break must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_mode not in ("adaptive-per-block", "constant"):
            raise ValueError(f"unknown step_mode {self.step_mode!r}")


@dataclass
class AlsConfig:
    s: int
    r: int
    max_iters: int = 1000
    gamma_break: float = 1e-5
    reinit_period: int = 50
    max_reinits: int = 10
    xi_inner_iters: int = 200
    rho_inner_iters: int = 150

    def __post_init__(self):
        if self.reinit_period > self.max_iters:
            raise ValueError("reinit_period must not exceed max_iters")


@dataclass
class RecoveryReport:
    estimate: object            # block signal (SDT family) or (rho, xi) (ALS)
    iterations: int
    final_residual: float
    termination: str            # converged | iteration-cap | stalled
    reinits: int = 0
    residual_trace: list = field(default_factory=list)
    error_trace: list = field(default_factory=list)


def _mean_step_width(ens, gp) -> float:
    """Scalar step width: mean of the per-block exact line-search widths.

    A single width shared by all blocks keeps the thresholding competition
    between blocks fair; individually line-minimized block steps turn the
    iteration greedy and lock it into the first support it selects.
    """
    widths = []
    for k in range(ens.n):
        num = np.linalg.norm(gp[k]) ** 2
        den = np.linalg.norm(meas.apply_block(ens, k, gp[k])) ** 2
        if den > STEP_DENOM_TOL:
            widths.append(num / den)
    return float(np.mean(widths)) if widths else 0.0


def _adaptive_step(y, ens, x, res, s, cfg, mask, use_tangent):
    """One monotone gradient step with the scalar adaptive width.

    The width is halved until the projected candidate does not increase the
    residual: the line-search widths are exact only for decoupled blocks,
    and correlated blocks (e.g. shared Pauli strings) can jointly overshoot
    far enough to diverge.
    """
    g = meas.adjoint(ens, y - meas.apply(ens, x))
    if not np.all(np.isfinite(g)):
        raise NumericalFailureError("non-finite gradient")
    if mask is not None:
        g[~mask] = 0
    gp = tangent_space_project(x, g, cfg.r) if use_tangent else g
    scale = _mean_step_width(ens, gp)
    for _ in range(MAX_BACKTRACKS + 1):
        cand = project_omega_hat(x + scale * gp, s, cfg.r, cfg.rank_mode)
        if mask is not None:
            cand[~mask] = 0
        cand_res = np.linalg.norm(y - meas.apply(ens, cand))
        if cand_res <= res:
            break
        scale *= 0.5
    return cand, cand_res


def _swap_escape(y, ens, x, s, cfg, mask, tabu, use_tangent):
    """Best single support swap out of a stalled iterate.

    Tries every exchange of one active block for one admissible inactive
    block whose resulting support was not visited before (tabu), seeds the
    entering block from the gradient, refits every candidate with a few
    shallow monotone steps, refines the leading few deeply, and returns the
    lowest-residual candidate together with the number of gradient steps
    consumed.  The winner is adopted even when its residual is worse than
    the stalled iterate's (the tabu set prevents cycling back); (None, cost)
    means no unvisited swap exists.
    """
    n = ens.n
    sup = [k for k in range(n)
           if np.linalg.norm(x[k]) > VANISHING_BLOCK_TOL]
    tabu.add(tuple(sup))
    allowed = range(n) if mask is None else np.nonzero(mask)[0]
    g = meas.adjoint(ens, y - meas.apply(ens, x))
    if mask is not None:
        g[~mask] = 0
    gp = tangent_space_project(x, g, cfg.r) if use_tangent else g
    scale = _mean_step_width(ens, gp)
    cands = []
    cost = 0
    for k_out in sup:
        for j_in in allowed:
            j_in = int(j_in)
            if j_in in sup:
                continue
            new_sup = tuple(sorted(set(sup) - {k_out} | {j_in}))
            if new_sup in tabu:
                continue
            cand = x.copy()
            cand[k_out] = 0
            cand[j_in] = project_rank(scale * g[j_in], cfg.r, cfg.rank_mode)
            cand_res = np.linalg.norm(y - meas.apply(ens, cand))
            for _ in range(SWAP_SHALLOW_ITERS):
                cand, cand_res = _adaptive_step(y, ens, cand, cand_res, s,
                                                cfg, mask, use_tangent)
                cost += 1
            cands.append((cand_res, len(cands), cand))
    if not cands:
        return None, cost
    cands.sort(key=lambda c: (c[0], c[1]))
    best_res, best_x = np.inf, None
    for cand_res, _, cand in cands[:SWAP_DEEP_CANDIDATES]:
        for _ in range(SWAP_DEEP_ITERS):
            cand, cand_res = _adaptive_step(y, ens, cand, cand_res, s,
                                            cfg, mask, use_tangent)
            cost += 1
        if cand_res < best_res:
            best_res, best_x = cand_res, cand
    return best_x, cost


def sdt(y, ens, cfg: SdtConfig, x0=None, true_signal=None) -> RecoveryReport:
    """SDT iteration: X <- P_OmegaHat(X + mu * P_T(A^dagger(y - A(X)))).

    In the adaptive step mode a stalled residual triggers a support-swap
    escape (see _swap_escape); the constant mode is a pure projected
    gradient iteration.  x0 overrides the zero initialization (used by
    tests and the ALS rho-step); true_signal, when given, records the
    per-iteration Frobenius error for convergence diagnostics.
    """
    y = np.asarray(y, dtype=float)
    n, d = ens.n, ens.d
    shape = (n, d, d)
    y_norm = np.linalg.norm(y)
    if y_norm == 0:
        return RecoveryReport(np.zeros(shape, dtype=complex), 1, 0.0,
                              "converged", residual_trace=[0.0])

    support = None
    mask = None
    s = min(cfg.s, n)
    if cfg.support_restriction is not None:
        support = np.asarray(sorted(cfg.support_restriction), dtype=int)
        s = min(s, support.shape[0])
        mask = np.zeros(n, dtype=bool)
        mask[support] = True

    x = np.zeros(shape, dtype=complex) if x0 is None \
        else np.asarray(x0, dtype=complex).reshape(shape).copy()
    best_x, best_rel = x.copy(), np.inf
    trace, err_trace = [], []
    termination = "iteration-cap"
    iters = 0
    tabu: set = set()
    spent = 0   # gradient-step budget consumed (main steps and swap refits)
    guard = 0   # main-line steps since the last stall response
    tangent_on = cfg.use_tangent_projection

    while True:
        rel = np.linalg.norm(y - meas.apply(ens, x)) / y_norm
        trace.append(rel)
        if true_signal is not None:
            err_trace.append(float(np.linalg.norm(x - true_signal)))
        if rel < best_rel:
            best_rel, best_x = rel, x.copy()
        if rel <= cfg.gamma_break:
            termination = "converged"
            break
        if cfg.step_mode == "constant":
            stalled = (guard >= STALL_WINDOW
                       and abs(trace[-1 - STALL_WINDOW] - rel)
                       < CONSTANT_STALL_TOL)
        else:
            stalled = (guard >= STALL_WINDOW
                       and trace[-1 - STALL_WINDOW] - rel
                       < STALL_REL_TOL * rel)
        if stalled:
            if cfg.step_mode != "constant" and tangent_on:
                # first response to a stall: drop the tangent-space
                # restriction for the rest of the run; the fixed-rank
                # tangent cone can pin the iterate at a spurious point
                tangent_on = False
                guard = 0
                continue
            escaped = None
            if cfg.step_mode != "constant":
                escaped, cost = _swap_escape(y, ens, x, s, cfg, mask, tabu,
                                             tangent_on)
                spent += cost
            if escaped is None:
                termination = "stalled"
                break
            x = escaped
            guard = 0
            if spent >= cfg.max_iters:
                break
            continue
        if spent >= cfg.max_iters:
            break
        spent += 1
        iters += 1
        guard += 1

        if cfg.step_mode == "constant":
            g = meas.adjoint(ens, y - meas.apply(ens, x))
            if not np.all(np.isfinite(g)):
                raise NumericalFailureError("non-finite gradient")
            if mask is not None:
                g[~mask] = 0
            gp = tangent_space_project(x, g, cfg.r) \
                if cfg.use_tangent_projection else g
            x = project_omega_hat(x + cfg.mu * gp, s, cfg.r, cfg.rank_mode)
            if mask is not None:
                x[~mask] = 0
        else:
            x, _ = _adaptive_step(y, ens, x, rel * y_norm, s, cfg, mask,
                                  tangent_on)

    return RecoveryReport(best_x, iters, float(min(trace)), termination,
                          residual_trace=trace, error_trace=err_trace)


def dt(y, ens, cfg: SdtConfig, **kwargs) -> RecoveryReport:
    """De-mixing thresholding: SDT with the sparsity constraint inactive."""
    return sdt(y, ens, replace(cfg, s=ens.n, rank_mode="plain-rank",
                               support_restriction=None), **kwargs)


def standard_tomography(y, ens_single_block, cfg: SdtConfig, **kwargs) -> RecoveryReport:
    """Conventional low-rank tomography: SDT restricted to n = s = 1."""
    if ens_single_block.n != 1:
        raise ValueError("standard tomography expects a single-block ensemble")
    return sdt(y, ens_single_block, replace(cfg, s=1, support_restriction=None),
               **kwargs)


def iht_sparse_vector(y, matrix, s: int, budget: int = 200,
                      gamma_break: float = 1e-8) -> np.ndarray:
    """Normalized IHT for s-sparse real vector recovery from y = matrix @ x.

    Adaptive step width mu = ||g_S||^2 / ||matrix g_S||^2 with S the current
    support (or the top-s gradient entries at start); returns the best
    iterate by residual.
    """
    y = np.asarray(y, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[1]
    y_norm = np.linalg.norm(y)
    if y_norm == 0:
        return np.zeros(n)

    x = np.zeros(n)
    best_x, best_res = x.copy(), np.inf
    for _ in range(budget):
        r = y - matrix @ x
        res = np.linalg.norm(r)
        if res < best_res:
            best_res, best_x = res, x.copy()
        if res / y_norm <= gamma_break:
            break
        g = matrix.T @ r
        live = np.nonzero(x)[0]
        if live.size == 0:
            live = np.argsort(-np.abs(g), kind="stable")[:s]
        gs = np.zeros(n)
        gs[live] = g[live]
        den = np.linalg.norm(matrix @ gs) ** 2
        if den <= STEP_DENOM_TOL:
            break
        mu = np.linalg.norm(gs) ** 2 / den
        x = hard_threshold_vector(x + mu * g, s)
    return best_x


def iht_low_rank(y, ens_single_block, r: int, rank_mode: str = "psd",
                 budget: int = 150, x0=None) -> np.ndarray:
    """Rank-r matrix recovery: the SDT machinery with n = s = 1."""
    cfg = SdtConfig(s=1, r=r, max_iters=budget, rank_mode=rank_mode)
    x0_blocks = None if x0 is None else np.asarray(x0)[None, :, :]
    report = sdt(y, ens_single_block, cfg, x0=x0_blocks)
    return report.estimate[0]


def als_bt(y, ens, cfg: AlsConfig, rng) -> RecoveryReport:
    """Alternating least squares for blind tomography.

    Alternates an s-sparse IHT solve for xi (design-matrix columns A_k(rho))
    with a rank-r IHT solve for rho (operator rho -> sum_k xi_k A_k(rho)),
    restarting from a fresh Haar-random rank-r state every reinit_period
    iterations without convergence.  The reported state is trace-normalized,
    with the scale moved into xi.
    """
    y = np.asarray(y, dtype=float)
    n, d = ens.n, ens.d
    y_norm = np.linalg.norm(y)
    rho = random_rank_r_state(d, cfg.r, rng)
    if y_norm == 0:
        return RecoveryReport((rho, np.zeros(n)), 1, 0.0, "converged",
                              residual_trace=[0.0])

    xi = np.zeros(n)
    best = (xi, rho, np.inf)
    trace = []
    reinits = 0
    termination = "iteration-cap"
    iters = cfg.max_iters

    for it in range(1, cfg.max_iters + 1):
        design = np.stack([meas.apply_block(ens, k, rho) for k in range(n)],
                          axis=1)
        xi = iht_sparse_vector(y, design, cfg.s, budget=cfg.xi_inner_iters)

        if np.any(xi):
            # fresh argmin each alternation (no warm start): warm-starting
            # locks the iteration into the previous rho's basin.  signed-psd
            # keeps the bilinear sign ambiguity (xi, rho) ~ (-xi, -rho)
            # resolvable; the sign is folded back into xi at read-out.
            mixed = np.einsum("k,kmij->mij", xi, ens.observables)[None]
            mixed_ens = meas.MeasurementEnsemble("mixed", mixed)
            rho = iht_low_rank(y, mixed_ens, cfg.r, rank_mode="signed-psd",
                               budget=cfg.rho_inner_iters)

        rel = np.linalg.norm(y - meas.apply(ens, xi[:, None, None] * rho)) / y_norm
        trace.append(rel)
        if rel < best[2]:
            best = (xi.copy(), rho.copy(), rel)
        if rel <= cfg.gamma_break:
            termination = "converged"
            iters = it
            break
        if it % cfg.reinit_period == 0 and reinits < cfg.max_reinits:
            rho = random_rank_r_state(d, cfg.r, rng)
            reinits += 1

    xi, rho, rel = best
    t = float(np.real(np.trace(rho)))
    if abs(t) > 1e-12:
        rho_hat = project_to_state(rho / t)
        xi_hat = xi * t
    else:
        rho_hat = rho
        xi_hat = xi
    return RecoveryReport((rho_hat, xi_hat), iters, rel, termination,
                          reinits=reinits, residual_trace=trace)
