"""Sinusoidal-input describing functions of reset controllers.

Two analytic routes (zero-crossing and reset-band triggers) and a
time-domain oracle that simulates the element under a sinusoidal error and
extracts the first harmonic of its output.
"""

import math
import warnings

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, OracleUnsettledError
from .lti import _checked_solve, mat_exp

__all__ = ["theta_rho", "sidf", "sidf_band", "df_oracle", "BandRatioWarning"]


class BandRatioWarning(UserWarning):
    """delta/E close to one: the band element may limit-cycle."""


BAND_RATIO_WARN = 0.9


def theta_rho(rc, omega):
    """Reset correction matrix of the zero-crossing describing function.

    ``(2/pi) (I + Psi) (I + A_rho Psi)^-1 (I - A_rho) ((A/omega)^2 + I)^-1``
    with ``Psi = exp(pi A / omega)``.
    """
    A = rc.base.A
    n = A.shape[0]
    ident = np.eye(n)
    psi = mat_exp(np.pi * A / omega)
    jump = _checked_solve(ident + rc.A_rho @ psi, ident - rc.A_rho,
                          "(I + A_rho exp(pi A/omega))")
    Aw = A / omega
    shaping = _checked_solve((Aw @ Aw + ident).T, ident, "((A/omega)^2 + I)").T
    return (2.0 / np.pi) * (ident + psi) @ jump @ shaping


def _resolvent_b(rc, omega):
    n = rc.nstates
    return _checked_solve(1j * omega * np.eye(n) - rc.base.A,
                          np.eye(n, dtype=complex), f"(j{omega:g}I - A)")


def sidf(rc, omega):
    """Describing function of ``rc`` with the zero-crossing reset.

    ``C (j omega I - A)^-1 (I + j Theta) B + D``; a complex scalar.
    """
    if not omega > 0:
        raise DomainError(f"frequency must be positive, got {omega}")
    base = rc.base
    if not rc.nstates:
        return complex(base.D[0, 0])
    R = _resolvent_b(rc, omega)
    theta = theta_rho(rc, omega)
    n = rc.nstates
    G = base.C @ R @ (np.eye(n) + 1j * theta) @ base.B + base.D
    return complex(G[0, 0])


def sidf_band(rc, omega, amplitude, delta):
    """Describing function of ``rc`` with a reset band of half-width ``delta``.

    For ``e = E sin(omega t)`` the element resets when ``e`` enters the band,
    i.e. at phase ``phi = pi - asin(delta/E)`` and half a period later.
    The result depends on ``E`` and ``delta`` only through ``delta/E``, and
    ``delta = 0`` reproduces :func:`sidf` exactly.

    Warns with :class:`BandRatioWarning` when ``delta/E > 0.9``.
    """
    if not omega > 0:
        raise DomainError(f"frequency must be positive, got {omega}")
    if not amplitude > 0:
        raise DomainError(f"amplitude must be positive, got {amplitude}")
    if not 0 <= delta < amplitude:
        raise DomainError(
            f"need 0 <= delta < E (got delta={delta}, E={amplitude}); "
            "the element never resets once the band covers the input")
    ratio = delta / amplitude
    if ratio > BAND_RATIO_WARN:
        warnings.warn(f"delta/E = {ratio:.3f} > {BAND_RATIO_WARN}: limit cycling possible",
                      BandRatioWarning, stacklevel=2)
    base = rc.base
    if not rc.nstates:
        return complex(base.D[0, 0])
    n = rc.nstates
    # phi = pi - asin(ratio), written so that ratio = 0 gives sin = 0, cos = -1 exactly
    sin_phi = ratio
    cos_phi = -math.sqrt(1.0 - ratio * ratio)
    rot = complex(cos_phi, -sin_phi)  # exp(-j phi)
    theta_s = theta_rho(rc, omega) @ (cos_phi * np.eye(n) + sin_phi * base.A / omega)
    R = _resolvent_b(rc, omega)
    G = base.C @ R @ (np.eye(n) + rot * 1j * theta_s) @ base.B + base.D
    return complex(G[0, 0])


def _crossing(e, lo, hi, level):
    f = lambda t: e(t) - level  # noqa: E731
    flo, fhi = f(lo), f(hi)
    if fhi == 0.0:
        return hi
    if flo == 0.0:
        return lo
    if flo * fhi > 0:
        return hi
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def df_oracle(rc, omega, amplitude, delta=0.0, periods=20, discard=15,
              samples_per_period=1000, settle_tol=0.01):
    """First-harmonic gain of ``rc`` measured by time-domain simulation.

    The element is driven open loop by ``e = E sin(omega t)`` from rest.
    Flow between samples is integrated exactly (the sinusoid is generated by
    an augmented linear system), reset instants are located by root finding
    between samples, and the fundamental Fourier coefficient of ``u`` over
    the last ``periods - discard`` periods is integrated exactly segment by
    segment, then divided by that of ``e``.

    Raises
    ------
    OracleUnsettledError
        If the last two periods of ``u`` differ by more than ``settle_tol``
        in relative RMS.
    """
    if not omega > 0 or not amplitude > 0:
        raise DomainError("omega and amplitude must be positive")
    if not 0 <= delta < amplitude:
        raise DomainError("need 0 <= delta < E")
    if samples_per_period < 1000:
        raise DomainError("the oracle needs at least 1000 samples per period")
    if not 0 < discard < periods - 1:
        raise DomainError("need 0 < discard < periods - 1")

    A, B = rc.base.A, rc.base.B[:, 0]
    C, D = rc.base.C[0], rc.base.D[0, 0]
    rho = rc.reset_diag
    n = rc.nstates
    E = float(amplitude)
    band = delta > 0

    # z = [x, E sin(wt), E cos(wt)]; u = c . z
    m = n + 2
    aug = np.zeros((m, m))
    aug[:n, :n] = A
    aug[:n, n] = B
    aug[n, n + 1] = omega
    aug[n + 1, n] = -omega
    c = np.concatenate([C, [D, 0.0]])
    # Van Loan block: expm([[aug - jwI, I], [0, 0]] tau) holds
    # exp((aug - jw) tau) and its integral over [0, tau]
    van_loan = np.zeros((2 * m, 2 * m), dtype=complex)
    van_loan[:m, :m] = aug - 1j * omega * np.eye(m)
    van_loan[:m, m:] = np.eye(m)

    def flow(tau):
        F = mat_exp(van_loan * tau)
        return (F[:m, :m] * np.exp(1j * omega * tau)).real, c @ F[:m, m:]

    N = int(samples_per_period)
    h = 2 * np.pi / omega / N
    total = periods * N
    # grid t_k = (k - 1/2) h for k >= 1, so zero crossings of the sinusoid
    # never coincide with a sample and each sample has one unambiguous value
    t_grid = np.concatenate([[0.0], (np.arange(1, total + 1) - 0.5) * h])
    phi_h, int_h = flow(h)
    t_win0 = t_grid[discard * N]
    e_of_t = lambda t: E * math.sin(omega * t)  # noqa: E731

    def on_sinusoid(v, t):
        v[n], v[n + 1] = E * math.sin(omega * t), E * math.cos(omega * t)
        return v

    z = np.zeros(m)
    z[n + 1] = E
    u_grid = np.empty(total + 1)
    u_grid[0] = 0.0
    coeff = 0.0j
    e_prev = 0.0
    for k in range(1, total + 1):
        t0, t1 = t_grid[k - 1], t_grid[k]
        if k == 1:
            phi, integ = flow(t1 - t0)
        else:
            phi, integ = phi_h, int_h
        z_new = on_sinusoid(phi @ z, t1)
        e_new = z_new[n]
        fire, level = False, 0.0
        if band:
            if e_prev > delta and e_new <= delta:
                fire, level = True, delta
            elif e_prev < -delta and e_new >= -delta:
                fire, level = True, -delta
        elif e_prev != 0.0 and e_prev * e_new <= 0.0:
            fire = True
        if fire:
            ts = _crossing(e_of_t, t0, t1, level)
            phi_a, int_a = flow(ts - t0)
            phi_b, int_b = flow(t1 - ts)
            zs = on_sinusoid(phi_a @ z, ts)
            if t0 >= t_win0:
                coeff += np.exp(-1j * omega * t0) * (int_a @ z)
            zs[:n] = rho * zs[:n]
            if t0 >= t_win0:
                coeff += np.exp(-1j * omega * ts) * (int_b @ zs)
            z_new = on_sinusoid(phi_b @ zs, t1)
        elif t0 >= t_win0:
            coeff += np.exp(-1j * omega * t0) * (integ @ z)
        z = z_new
        e_prev = z[n]
        u_grid[k] = c @ z

    last, prev = u_grid[-N:], u_grid[-2 * N:-N]
    scale = np.sqrt(np.mean(last**2))
    if scale > 0 and np.sqrt(np.mean((last - prev) ** 2)) > settle_tol * scale:
        raise OracleUnsettledError(
            f"oracle not periodic at omega={omega:g} after {periods} periods")

    window = t_grid[-1] - t_win0
    coeff *= 2.0 / window
    # the input's coefficient is -jE
    return complex(1j * coeff / E)
