"""Numerical H-beta quadratic-stability certificates for reset control loops.

The certificate is numerical evidence, not a proof: strict positive
realness is checked on a dense logarithmic frequency grid together with a
Hurwitz test on the base-linear closed loop and the partial-reset condition.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionError, DomainError, SingularityError, UnsupportedTopologyError
from .lti import _checked_solve

__all__ = [
    "HBetaCertificate", "closed_loop_A", "hbeta_response", "check_certificate",
    "search_hbeta", "default_grid", "partial_reset_ok", "STRICT_TOL",
]

STRICT_TOL = 1e-9


def default_grid(lo=1e-2, hi=1e6, per_decade=400):
    """Log-spaced grid with ``per_decade`` points per decade over [lo, hi] rad/s."""
    if not 0 < lo < hi:
        raise DomainError("need 0 < lo < hi")
    n = int(round(np.log10(hi / lo) * per_decade)) + 1
    return np.geomspace(lo, hi, n)


@dataclass(eq=False)
class HBetaCertificate:
    """Candidate (beta, P_rho) and what the grid check found.

    ``valid`` is true only when the grid margin is positive, the base-linear
    closed loop is Hurwitz and the partial-reset condition holds.
    ``skipped`` lists grid frequencies where the resolvent was singular.
    """

    beta: np.ndarray
    P_rho: np.ndarray
    min_real_margin: float
    freq_grid: np.ndarray
    hurwitz_ok: bool
    partial_ok: bool
    skipped: list = field(default_factory=list)

    @property
    def valid(self):
        return bool(self.min_real_margin > 0 and self.hurwitz_ok and self.partial_ok)

    def summary(self):
        """Structured-text rendering (one ``key: value`` per line)."""
        lines = [
            f"valid: {str(self.valid).lower()}",
            f"min_real_margin: {self.min_real_margin:.12g}",
            f"hurwitz_ok: {str(self.hurwitz_ok).lower()}",
            f"partial_ok: {str(self.partial_ok).lower()}",
            "beta: " + " ".join(f"{b:.12g}" for b in self.beta),
            "P_rho: " + "; ".join(" ".join(f"{v:.12g}" for v in row) for row in self.P_rho),
            f"grid: {len(self.freq_grid)} points over "
            f"[{self.freq_grid[0]:.6g}, {self.freq_grid[-1]:.6g}] rad/s",
            f"skipped: {len(self.skipped)}",
            "note: numerical evidence from a frequency grid, not a proof",
        ]
        return "\n".join(lines)


def closed_loop_A(plant, rc):
    """Closed-loop A matrix, plant states first then controller states.

    ``[[A_p, B_p C_r], [-B_r C_p, A_r]]`` for strictly proper loops; a
    feedthrough on one side is folded in, both at once is rejected.
    """
    ctrl = rc.base
    if plant.ninputs != 1 or plant.noutputs != 1:
        raise DimensionError("plant must be SISO")
    Dp, Dr = plant.D[0, 0], ctrl.D[0, 0]
    if Dp != 0 and Dr != 0:
        raise UnsupportedTopologyError("plant and controller both have feedthrough")
    Ap, Bp, Cp = plant.A, plant.B, plant.C
    Ar, Br, Cr = ctrl.A, ctrl.B, ctrl.C
    return np.block([[Ap - Dr * Bp @ Cp, Bp @ Cr],
                     [-Br @ Cp, Ar - Dp * Br @ Cr]])


def _split(plant, rc):
    """Closed-loop A with resetting controller states moved last, plus sizes.

    Returns ``(A, y_row, n_p, n_nr, n_r)`` where ``y_row`` maps the permuted
    state to the plant output.
    """
    idx_r = rc.reset_indices
    if len(idx_r) == 0:
        raise DomainError("controller has no resetting states")
    idx_nr = np.setdiff1d(np.arange(rc.nstates), idx_r)
    n_p = plant.nstates
    order = np.concatenate([np.arange(n_p), n_p + idx_nr, n_p + idx_r])
    A = closed_loop_A(plant, rc)[np.ix_(order, order)]
    y_row = np.concatenate([plant.C[0], plant.D[0, 0] * rc.base.C[0]])[order]
    return A, y_row, n_p, len(idx_nr), len(idx_r)


def _output_map(y_row, beta, P_rho, n_p, n_nr, n_r):
    # [beta C_p, 0, P_rho]; y_row is zero on controller states unless the
    # plant has feedthrough, in which case beta weights the true output
    M = np.outer(beta, y_row)
    M[:, n_p + n_nr:] += P_rho
    return M


def _check_pair(beta, P_rho, n_r):
    beta = np.atleast_1d(np.asarray(beta, dtype=float)).ravel()
    P_rho = np.atleast_2d(np.asarray(P_rho, dtype=float))
    if beta.shape != (n_r,):
        raise DimensionError(f"beta must have length {n_r}, got {beta.shape}")
    if P_rho.shape != (n_r, n_r):
        raise DimensionError(f"P_rho must be {n_r}x{n_r}, got {P_rho.shape}")
    return beta, P_rho


def hbeta_response(plant, rc, beta, P_rho, omega):
    """``H_beta(j omega)``: an ``n_r x n_r`` complex matrix."""
    if not omega >= 0:
        raise DomainError(f"frequency must be nonnegative, got {omega}")
    A, y_row, n_p, n_nr, n_r = _split(plant, rc)
    beta, P_rho = _check_pair(beta, P_rho, n_r)
    n = A.shape[0]
    rhs = np.zeros((n, n_r), dtype=complex)
    rhs[n - n_r:] = np.eye(n_r)
    X = _checked_solve(1j * omega * np.eye(n) - A, rhs, f"(j{omega:g}I - A_cl)")
    return _output_map(y_row, beta, P_rho, n_p, n_nr, n_r) @ X


class _Evaluator:
    """Grid evaluation of H_beta with the resolvent columns cached."""

    def __init__(self, plant, rc, grid):
        self.A, self.y_row, self.n_p, self.n_nr, self.n_r = _split(plant, rc)
        self.grid = np.asarray(grid, dtype=float)
        n, n_r = self.A.shape[0], self.n_r
        rhs = np.zeros((n, n_r), dtype=complex)
        rhs[n - n_r:] = np.eye(n_r)
        cols, keep, self.skipped = [], [], []
        for om in self.grid:
            try:
                cols.append(_checked_solve(1j * om * np.eye(n) - self.A, rhs, "resolvent"))
                keep.append(om)
            except SingularityError:
                self.skipped.append(float(om))
        self.kept = np.array(keep)
        self.X = np.array(cols) if cols else np.zeros((0, n, n_r), dtype=complex)

    def margins(self, beta, P_rho):
        """Smallest eigenvalue of the Hermitian part at each kept frequency."""
        M = _output_map(self.y_row, beta, P_rho, self.n_p, self.n_nr, self.n_r)
        H = np.einsum("ij,wjk->wik", M, self.X)
        herm = 0.5 * (H + np.conj(np.swapaxes(H, 1, 2)))
        return np.linalg.eigvalsh(herm)[:, 0]


def _hurwitz(A):
    return bool(np.all(np.linalg.eigvals(A).real < -STRICT_TOL))


def partial_reset_ok(A_rho_r, P_rho):
    """Partial-reset condition ``A_rho_r P_rho A_rho_r - P_rho <= 0`` (tolerance 1e-9)."""
    Ar = np.atleast_2d(np.asarray(A_rho_r, dtype=float))
    P = np.atleast_2d(np.asarray(P_rho, dtype=float))
    if Ar.shape != P.shape or Ar.shape[0] != Ar.shape[1]:
        raise DimensionError("A_rho_r and P_rho must be square and of equal size")
    return bool(np.max(np.linalg.eigvalsh(Ar @ P @ Ar - P)) <= STRICT_TOL)


def _partial(rc, P_rho):
    return partial_reset_ok(np.diag(rc.reset_diag[rc.reset_indices]), P_rho)


def check_certificate(plant, rc, beta, P_rho, grid):
    """Evaluate a candidate ``(beta, P_rho)`` on ``grid`` (rad/s, sorted)."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a nonempty 1-D sequence")
    if np.any(np.diff(grid) < 0) or grid[0] < 0:
        raise DomainError("grid must be sorted and nonnegative")
    ev = _Evaluator(plant, rc, grid)
    beta, P_rho = _check_pair(beta, P_rho, ev.n_r)
    if not np.allclose(P_rho, P_rho.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(P_rho)))):
        raise DomainError("P_rho must be symmetric")
    P_rho = 0.5 * (P_rho + P_rho.T)
    if np.min(np.linalg.eigvalsh(P_rho)) <= 0:
        raise DomainError("P_rho must be positive definite")
    m = ev.margins(beta, P_rho)
    margin = float(np.min(m)) if m.size else -np.inf
    return HBetaCertificate(beta, P_rho, margin, grid, _hurwitz(ev.A),
                            _partial(rc, P_rho), ev.skipped)


def _signed_log(p):
    # [-6, 6] -> [-1e6, 1e6], smooth through zero
    p = np.clip(p, -6.0, 6.0)
    return np.sign(p) * (10.0 ** np.abs(p) - 1.0)


def _unpack(theta, n_r):
    beta = _signed_log(theta[:n_r])
    L = np.zeros((n_r, n_r))
    L[np.tril_indices(n_r)] = theta[n_r:]
    P = L @ L.T + 1e-9 * np.eye(n_r)
    return beta, P / np.trace(P)


def search_hbeta(plant, rc, grid=None, restarts=8, seed=0, search_per_decade=40):
    """Search ``beta`` and ``P_rho = L L^T`` maximizing the grid margin.

    Derivative-free (Nelder-Mead from several starts) on a coarser grid,
    then the best candidate is checked on ``grid``.  The margin scales
    linearly with ``(beta, P_rho)``, so ``P_rho`` is normalized to unit
    trace.  During the search each frequency's margin is weighted by
    ``1 + (omega/omega_n)^2`` (``omega_n`` the closed-loop spectral radius)
    so the vanishing high-frequency tail does not flatten the objective;
    the weight is positive, so the sign of the margin is unaffected.

    Returns the best :class:`HBetaCertificate`; check ``.valid``.  A
    non-Hurwitz closed loop returns immediately without searching.  Not
    finding a certificate does not prove instability.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    A, _, _, _, n_r = _split(plant, rc)
    beta0, P0 = np.zeros(n_r), np.eye(n_r) / n_r
    if not _hurwitz(A):
        return check_certificate(plant, rc, beta0, P0, grid)

    lo, hi = max(grid[0], 1e-12), grid[-1]
    coarse = default_grid(lo, hi, search_per_decade) if hi > lo else grid
    ev = _Evaluator(plant, rc, coarse)
    omega_n = max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
    weight = 1.0 + (ev.kept / omega_n) ** 2

    def objective(theta):
        beta, P = _unpack(theta, n_r)
        m = ev.margins(beta, P)
        return -float(np.min(m * weight)) if m.size else np.inf

    rng = np.random.default_rng(seed)
    n_l = n_r * (n_r + 1) // 2
    eye_l = np.eye(n_r)[np.tril_indices(n_r)]
    starts = [np.concatenate([np.zeros(n_r), eye_l])]
    for _ in range(restarts - 1):
        starts.append(np.concatenate([rng.uniform(-6, 6, n_r),
                                      eye_l + 0.5 * rng.standard_normal(n_l)]))
    best = None
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-14, "maxiter": 2000 * len(x0)})
        if best is None or res.fun < best.fun:
            best = res
    beta, P = _unpack(best.x, n_r)
    return check_certificate(plant, rc, beta, P, grid)
