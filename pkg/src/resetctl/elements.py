"""Reset controller data model and constructors for the standard elements.

A reset controller is a linear base system whose states are multiplied by a
diagonal reset matrix whenever the reset condition on the error fires.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, DomainError
from .lti import StateSpace, series

__all__ = [
    "ResetCondition", "ResetController", "CgLpPidParams", "ZERO_CROSSING",
    "make_clegg", "make_fore", "make_sore", "make_cglp", "make_cglp_pid",
    "base_linear", "with_band", "TABLE1_PARAMS", "TABLE3_PARAMS",
]


@dataclass(frozen=True)
class ResetCondition:
    """Reset trigger: ``"zero_crossing"`` or ``"band"`` with half-width ``delta``."""

    kind: str = "zero_crossing"
    delta: float = 0.0

    def __post_init__(self):
        if self.kind == "zero_crossing":
            if self.delta != 0.0:
                raise DomainError("zero-crossing condition carries no band")
        elif self.kind == "band":
            if not self.delta > 0:
                raise DomainError(f"band condition needs delta > 0, got {self.delta}")
        else:
            raise DomainError(f"unknown reset condition {self.kind!r}")

    @property
    def is_band(self):
        return self.kind == "band"


ZERO_CROSSING = ResetCondition()


def _check_gamma(gamma):
    if not -1.0 <= gamma <= 1.0:
        raise DomainError(f"reset value must lie in [-1, 1], got {gamma}")


@dataclass(frozen=True, eq=False)
class ResetController:
    """Base-linear SISO system plus diagonal reset matrix and trigger."""

    base: StateSpace
    A_rho: np.ndarray
    condition: ResetCondition = ZERO_CROSSING

    def __post_init__(self):
        A_rho = np.atleast_2d(np.array(self.A_rho, dtype=float))
        n = self.base.nstates
        if A_rho.shape != (n, n):
            raise DimensionError(f"A_rho must be {n}x{n}, got {A_rho.shape}")
        if np.any(A_rho != np.diag(np.diag(A_rho))):
            raise DomainError("A_rho must be diagonal")
        d = np.diag(A_rho)
        if np.any(d < -1) or np.any(d > 1):
            raise DomainError("A_rho entries must lie in [-1, 1]")
        if self.base.ninputs != 1 or self.base.noutputs != 1:
            raise DimensionError("reset controllers are SISO")
        A_rho.setflags(write=False)
        object.__setattr__(self, "A_rho", A_rho)

    @property
    def nstates(self):
        return self.base.nstates

    @property
    def reset_diag(self):
        return np.diag(self.A_rho).copy()

    @property
    def reset_indices(self):
        """Indices of states whose reset entry differs from 1."""
        return np.flatnonzero(np.diag(self.A_rho) != 1.0)


@dataclass(frozen=True)
class CgLpPidParams:
    """Parameters of ``K (1 + wi/s) (s/wd + 1)/(s/wt + 1) * CgLp``.

    Frequencies in rad/s.  ``gamma`` is the reset value of the CgLp FORE.
    """

    K: float
    omega_c: float
    omega_i: float
    omega_d: float
    omega_t: float
    omega_ra: float
    omega_r: float
    omega_f: float
    gamma: float

    def __post_init__(self):
        freqs = {k: getattr(self, k) for k in (
            "omega_c", "omega_i", "omega_d", "omega_t", "omega_ra", "omega_r", "omega_f")}
        for k, v in freqs.items():
            if not v > 0:
                raise DomainError(f"{k} must be positive, got {v}")
        if not (self.omega_i < self.omega_d < self.omega_c < self.omega_t < self.omega_f):
            raise DomainError("need omega_i < omega_d < omega_c < omega_t < omega_f")
        if not self.omega_ra <= self.omega_r < self.omega_f:
            raise DomainError("need omega_ra <= omega_r < omega_f")
        _check_gamma(self.gamma)


# mass stage controller of the simulation study (m = 1 kg)
TABLE1_PARAMS = CgLpPidParams(
    K=6.0954e5, omega_c=942.0, omega_i=94.0, omega_d=530.0, omega_t=1.68e3,
    omega_ra=160.0, omega_r=172.0, omega_f=9.42e3, gamma=0.5)

# controller of the precision stage experiment
TABLE3_PARAMS = CgLpPidParams(
    K=16.41, omega_c=942.5, omega_i=94.25, omega_d=529.2, omega_t=1679.0,
    omega_ra=697.6, omega_r=812.1, omega_f=9420.0, gamma=0.0)


def make_clegg(gamma=0.0):
    """Clegg integrator (generalized when ``gamma != 0``)."""
    _check_gamma(gamma)
    return ResetController(StateSpace([[0.0]], [[1.0]], [[1.0]], [[0.0]]), [[gamma]])


def make_fore(omega_r, gamma=0.0):
    """First-order reset element: a resetting low-pass at ``omega_r`` rad/s."""
    if not omega_r > 0:
        raise DomainError(f"omega_r must be positive, got {omega_r}")
    _check_gamma(gamma)
    base = StateSpace([[-omega_r]], [[omega_r]], [[1.0]], [[0.0]])
    return ResetController(base, [[gamma]])


def make_sore(omega_r, beta_r, gamma=0.0):
    """Second-order reset element with damping ``beta_r``; both states reset."""
    if not omega_r > 0:
        raise DomainError(f"omega_r must be positive, got {omega_r}")
    if not beta_r >= 0:
        raise DomainError(f"beta_r must be nonnegative, got {beta_r}")
    _check_gamma(gamma)
    A = [[0.0, 1.0], [-omega_r**2, -2.0 * beta_r * omega_r]]
    base = StateSpace(A, [[0.0], [omega_r**2]], [[1.0, 0.0]], [[0.0]])
    return ResetController(base, gamma * np.eye(2))


def make_cglp(omega_ra, omega_r, omega_f, gamma):
    """First-order CgLp: GFORE at ``omega_ra`` followed by a lead (``omega_r``, ``omega_f``).

    State 0 is the FORE state (resets to ``gamma`` times itself); state 1 is
    the lead filter state and never resets.
    """
    if not 0 < omega_ra <= omega_r < omega_f:
        raise DomainError("need 0 < omega_ra <= omega_r < omega_f")
    _check_gamma(gamma)
    A = [[-omega_ra, 0.0], [omega_f, -omega_f]]
    B = [[omega_ra], [0.0]]
    C = [[omega_f / omega_r, 1.0 - omega_f / omega_r]]
    return ResetController(StateSpace(A, B, C, [[0.0]]), np.diag([gamma, 1.0]))


# index of the resetting FORE state inside make_cglp_pid's state vector:
# CgLp (FORE, lead) -> PI (1 state) -> lead (1 state)
CGLP_PID_RESET_INDEX = 0


def make_cglp_pid(p):
    """CgLp-PID as a single reset controller.

    The base system is the cascade CgLp -> PI -> lead, so the resetting FORE
    is driven by the error itself and resets at the error's zero crossings.
    State order: ``[CgLp FORE, CgLp lead, PI integrator, lead]``; only the
    FORE state (index 0) resets.
    """
    if not isinstance(p, CgLpPidParams):
        p = CgLpPidParams(**p)
    cglp = make_cglp(p.omega_ra, p.omega_r, p.omega_f, p.gamma)
    # gains sit in B so the cascade's A matrix stays well scaled
    pi = StateSpace([[0.0]], [[p.K * p.omega_i]], [[1.0]], [[p.K]])
    ratio = p.omega_t / p.omega_d
    lead = StateSpace([[-p.omega_t]], [[ratio * (p.omega_d - p.omega_t)]],
                      [[1.0]], [[ratio]])
    base = series(series(cglp.base, pi), lead)
    diag = np.ones(base.nstates)
    diag[CGLP_PID_RESET_INDEX] = p.gamma
    return ResetController(base, np.diag(diag))


def base_linear(rc):
    """The controller with resets disabled, as a plain state-space model."""
    return rc.base


def with_band(rc, delta):
    """Copy of ``rc`` resetting on entry into the band ``|e| = delta``.

    ``delta == 0`` restores the zero-crossing condition.
    """
    if not delta >= 0:
        raise DomainError(f"band half-width must be nonnegative, got {delta}")
    cond = ResetCondition("band", float(delta)) if delta > 0 else ZERO_CROSSING
    return replace(rc, condition=cond)


def linearized(rc):
    """Copy of ``rc`` with ``A_rho = I`` (resets become identity maps)."""
    return replace(rc, A_rho=np.eye(rc.nstates))
