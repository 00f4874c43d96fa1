"""Reset-band tuning: pick delta so that references below a chosen
frequency never reach the band, and check the choice by simulation.
"""

from dataclasses import dataclass

import numpy as np

from .elements import with_band
from .errors import DomainError, GuaranteeVoidError, InvalidContextError
from .lti import freq_response
from .simulation import (NO_NOISE, ReferenceSignal, SimConfig, reset_count_in_window,
                         sigma_point, simulate)
from .stability import closed_loop_A

__all__ = [
    "DeltaTuningSpec", "NoResetVerdict", "bls_sensitivity", "tune_delta",
    "verify_no_reset", "error_from_disturbance", "delta_sweep",
]


@dataclass(frozen=True)
class DeltaTuningSpec:
    """Inputs of the band tuning rule.

    ``omega_s`` (rad/s) is the edge of the intended linear range, ``Q`` the
    sensor quantization level, ``k >= 1`` a safety factor and
    ``noise_margin`` an extra error allowance in output units.
    """

    omega_s: float
    reference: ReferenceSignal
    Q: float = 0.0
    k: float = 1.0
    noise_margin: float = 0.0

    def __post_init__(self):
        if not self.omega_s > 0:
            raise DomainError(f"omega_s must be positive, got {self.omega_s}")
        if not self.k >= 1:
            raise DomainError(f"safety factor must be >= 1, got {self.k}")
        if not self.Q >= 0:
            raise DomainError(f"Q must be nonnegative, got {self.Q}")
        if not self.noise_margin >= 0:
            raise DomainError(f"noise_margin must be nonnegative, got {self.noise_margin}")


def _require_stable(plant, rc):
    eig = np.linalg.eigvals(closed_loop_A(plant, rc))
    if np.any(eig.real >= 0):
        raise InvalidContextError(
            "base-linear closed loop is unstable; its sensitivity is meaningless")


def _loop_gain(plant, rc, omega):
    # product of the factors: better conditioned than the series realization
    return complex(freq_response(rc.base, omega) * freq_response(plant, omega))


def bls_sensitivity(plant, rc, omega):
    """``|1 / (1 + L(j omega))|`` of the loop with resets disabled."""
    if not omega > 0:
        raise DomainError(f"frequency must be positive, got {omega}")
    _require_stable(plant, rc)
    return abs(1.0 / (1.0 + _loop_gain(plant, rc, omega)))


def error_from_disturbance(plant, rc, d_amplitude, omega):
    """Error amplitude caused by an input disturbance: ``|P S| d``."""
    if not d_amplitude >= 0:
        raise DomainError(f"disturbance amplitude must be nonnegative, got {d_amplitude}")
    if not omega > 0:
        raise DomainError(f"frequency must be positive, got {omega}")
    _require_stable(plant, rc)
    L = _loop_gain(plant, rc, omega)
    return abs(freq_response(plant, omega) / (1.0 + L)) * d_amplitude


def tune_delta(plant, rc, spec, force=False):
    """Band half-width ``k (sum_i |S(w_i)| A_i + Q/2 + noise_margin)``.

    Each reference component contributes its own base-linear error
    amplitude; summing them bounds the multi-sine error.  A component at or
    above ``spec.omega_s`` voids the no-reset guarantee and raises
    :class:`GuaranteeVoidError` unless ``force`` is set.
    """
    _require_stable(plant, rc)
    bad = [w for w in spec.reference.frequencies if w >= spec.omega_s]
    if bad and not force:
        raise GuaranteeVoidError(
            f"reference component at {bad[0]:g} rad/s is not below omega_s={spec.omega_s:g}")
    raw = sum(bls_sensitivity(plant, rc, w) * a
              for a, w in zip(spec.reference.amplitudes, spec.reference.frequencies)
              if a > 0)
    return spec.k * (raw + 0.5 * spec.Q + spec.noise_margin)


@dataclass(frozen=True)
class NoResetVerdict:
    """Outcome of :func:`verify_no_reset`.

    On failure ``omega`` is the first offending probe frequency (``None``
    for the full reference), ``max_error`` its steady-state ``max|e|`` and
    ``resets`` its steady-state reset count.
    """

    ok: bool
    omega: float = None
    max_error: float = 0.0
    resets: int = 0


def _probes(ref):
    """Reference, each component alone, and 5 sines up to the fastest component."""
    live = [c for c in ref.components if c[0] > 0]
    if not live:
        return []
    out = [(None, ref)]
    if len(live) > 1:
        out += [(c[1], ReferenceSignal([c])) for c in live]
    amp, top = max(live, key=lambda c: c[0])[0], max(c[1] for c in live)
    out += [(w, ReferenceSignal.sine(amp, w)) for w in np.geomspace(top / 10, top, 5)]
    return out


def verify_no_reset(plant, rc, q, spec, delta, cfg=SimConfig(), noise=NO_NOISE):
    """Simulate the band controller and confirm no steady-state resets.

    Probes: the full reference, each component alone, and five log-spaced
    single sines over a decade up to the fastest component, at the largest
    component's amplitude.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    banded = with_band(rc, delta)
    for omega, ref in _probes(spec.reference):
        tr = simulate(plant, banded, q, ref, noise, cfg)
        n = reset_count_in_window(tr, tr.t_ss, tr.t[-1])
        if n:
            return NoResetVerdict(False, omega, tr.steady_max_error(), n)
    return NoResetVerdict(True)


def delta_sweep(plant, rc, q, noise, cfg, omega, R, deltas):
    """Pseudo-sensitivity ``max|e|/R`` at one frequency for each band half-width.

    ``delta = 0`` uses the zero-crossing condition.
    """
    deltas = np.asarray(deltas, dtype=float)
    if np.any(deltas < 0) or np.any(np.diff(deltas) <= 0):
        raise DomainError("deltas must be nonnegative and strictly increasing")
    out = np.empty(len(deltas))
    for i, d in enumerate(deltas):
        value, _, _ = sigma_point(plant, with_band(rc, float(d)), q, noise, cfg, omega, R)
        out[i] = value
    return out
