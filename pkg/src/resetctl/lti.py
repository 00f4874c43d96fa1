"""Small dense LTI machinery: state-space models, frequency response,
series composition, matrix exponential and discretization.

All systems handled here have at most a handful of states, so everything is
dense numpy.  Models are immutable once constructed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DiscretizationError, DomainError, SingularityError

__all__ = [
    "StateSpace", "DiscreteStateSpace", "mat_exp", "freq_response",
    "dfreq_response", "series", "c2d_tustin", "c2d_zoh", "tustin_parts",
]

# condition-number guard shared by every solve in the package
COND_LIMIT = 1e12


def _as_matrix(M, name, rows=None, cols=None):
    M = np.array(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(-1, 1) if cols == 1 else M.reshape(1, -1)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    if rows is not None and M.shape[0] != rows:
        raise DimensionError(f"{name} must have {rows} rows, got {M.shape[0]}")
    if cols is not None and M.shape[1] != cols:
        raise DimensionError(f"{name} must have {cols} columns, got {M.shape[1]}")
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{name} has non-finite entries")
    M.setflags(write=False)
    return M


def _equilibrated_cond(M):
    """Condition number of ``M`` after row then column max-scaling."""
    rows = np.max(np.abs(M), axis=1)
    if np.any(rows == 0):
        return np.inf
    S = M / rows[:, None]
    cols = np.max(np.abs(S), axis=0)
    if np.any(cols == 0):
        return np.inf
    return np.linalg.cond(S / cols[None, :])


def _checked_solve(M, rhs, what):
    """Solve M X = rhs, refusing singular or badly conditioned M.

    The conditioning test is scale-free (rows and columns equilibrated
    first), so systems with large gains inside A are not misreported.
    """
    if M.shape[0] == 0:
        return np.zeros_like(rhs)
    try:
        cond = _equilibrated_cond(M)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularityError(f"{what} is singular (cond={cond:.3g})")
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"{what} is singular") from exc


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Continuous-time LTI system ``dx/dt = A x + B u``, ``y = C x + D u``.

    A zero-state system (pure gain) is allowed; pass ``A=np.zeros((0, 0))``
    or use :meth:`gain`.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim == 0:
            A = A.reshape(1, 1)
        n = A.shape[0]
        A = _as_matrix(A, "A", rows=n, cols=n) if n else np.zeros((0, 0))
        D = _as_matrix(self.D, "D")
        m, p = D.shape[1], D.shape[0]
        if n:
            B = _as_matrix(self.B, "B", rows=n, cols=m)
            C = _as_matrix(self.C, "C", rows=p, cols=n)
        else:
            B, C = np.zeros((0, m)), np.zeros((p, 0))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @classmethod
    def gain(cls, k):
        return cls(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[k]])

    @property
    def nstates(self):
        return self.A.shape[0]

    @property
    def ninputs(self):
        return self.D.shape[1]

    @property
    def noutputs(self):
        return self.D.shape[0]

    def poles(self):
        return np.linalg.eigvals(self.A) if self.nstates else np.zeros(0)

    def __repr__(self):
        return (f"StateSpace(nstates={self.nstates}, ninputs={self.ninputs}, "
                f"noutputs={self.noutputs})")


@dataclass(frozen=True, eq=False)
class DiscreteStateSpace:
    """Discrete-time LTI system with sample period ``T`` (s)."""

    Ad: np.ndarray
    Bd: np.ndarray
    Cd: np.ndarray
    Dd: np.ndarray
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"sample period must be positive, got {self.T}")
        for name in ("Ad", "Bd", "Cd", "Dd"):
            M = np.array(getattr(self, name), dtype=float)
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @property
    def nstates(self):
        return self.Ad.shape[0]

    def step_response(self, u):
        """Simulate from zero state for the input sequence ``u`` (SISO)."""
        x = np.zeros(self.nstates)
        out = np.empty(len(u))
        for k, uk in enumerate(u):
            out[k] = (self.Cd @ x)[0] + self.Dd[0, 0] * uk
            x = self.Ad @ x + self.Bd[:, 0] * uk
        return out


# Pade(13) numerator coefficients; the denominator uses alternating signs.
_PADE13 = (64764752532480000., 32382376266240000., 7771770303897600.,
           1187353796428800., 129060195264000., 10559470521600.,
           670442572800., 33522128640., 1323241920., 40840800., 960960.,
           16380., 182., 1.)


def mat_exp(M):
    """Matrix exponential by scaling and squaring with a Pade(13) approximant.

    The matrix is scaled by ``2**-s`` until its 1-norm is at most 0.5, the
    approximant is evaluated, and the result squared ``s`` times.

    Parameters
    ----------
    M : array_like, shape (n, n)
        Real or complex square matrix with finite entries.

    Returns
    -------
    ndarray, shape (n, n)
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"mat_exp needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError("mat_exp input has non-finite entries")
    n = M.shape[0]
    dtype = np.result_type(M.dtype, float)
    if n == 0:
        return np.zeros((0, 0), dtype=dtype)
    M = M.astype(dtype)
    norm = np.linalg.norm(M, 1)
    if norm == 0:
        return np.eye(n, dtype=dtype)
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
        M = M / 2.0**s
    b = _PADE13
    ident = np.eye(n, dtype=dtype)
    M2 = M @ M
    M4 = M2 @ M2
    M6 = M2 @ M4
    U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
             + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * ident)
    V = (M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
         + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * ident)
    F = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        F = F @ F
    return F


def freq_response(sys, omega):
    """Evaluate ``C (j omega I - A)^-1 B + D``.

    Returns a complex scalar for SISO systems, else a complex matrix.
    Raises :class:`SingularityError` when ``j omega`` hits an eigenvalue of A.
    """
    if not omega > 0:
        raise DomainError(f"frequency must be positive, got {omega}")
    n = sys.nstates
    if n:
        X = _checked_solve(1j * omega * np.eye(n) - sys.A, sys.B.astype(complex),
                           f"(j{omega:g}I - A)")
        G = sys.C @ X + sys.D
    else:
        G = sys.D.astype(complex)
    if G.shape == (1, 1):
        return complex(G[0, 0])
    return G


def dfreq_response(dsys, omega):
    """Frequency response of a discrete system at ``z = exp(j omega T)``."""
    z = np.exp(1j * omega * dsys.T)
    n = dsys.nstates
    if n:
        X = _checked_solve(z * np.eye(n) - dsys.Ad, dsys.Bd.astype(complex), "(zI - Ad)")
        G = dsys.Cd @ X + dsys.Dd
    else:
        G = dsys.Dd.astype(complex)
    return complex(G[0, 0]) if G.shape == (1, 1) else G


def series(first, second):
    """Cascade ``second(first(u))``.

    The composite state vector is the states of ``first`` followed by the
    states of ``second``.  Reset-state indices elsewhere rely on this order.
    """
    if first.noutputs != second.ninputs:
        raise DimensionError(
            f"cannot cascade: first has {first.noutputs} outputs, "
            f"second has {second.ninputs} inputs")
    n1, n2 = first.nstates, second.nstates
    A = np.block([[first.A, np.zeros((n1, n2))],
                  [second.B @ first.C, second.A]])
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return StateSpace(A, B, C, D)


def tustin_parts(sys, T):
    """Trapezoidal-rule stepping matrices ``(Ad, G)``.

    With ``x_k`` the state estimate at sample k, the trapezoidal rule reads
    ``x_{k+1} = Ad x_k + G (e_k + e_{k+1})``.  Carrying ``w_k = x_k - G e_k``
    makes the recursion causal: ``x_k = w_k + G e_k`` and
    ``w_{k+1} = Ad x_k + G e_k``.  The simulator resets ``x_k`` directly.
    """
    if not T > 0:
        raise DomainError(f"sample period must be positive, got {T}")
    n = sys.nstates
    ident = np.eye(n)
    half = 0.5 * T * sys.A
    try:
        Ad = _checked_solve(ident - half, ident + half, "(I - T/2 A)")
        G = _checked_solve(ident - half, 0.5 * T * sys.B, "(I - T/2 A)")
    except SingularityError as exc:
        raise DiscretizationError(str(exc)) from exc
    return Ad, G


def c2d_tustin(sys, T):
    """Bilinear (Tustin) discretization.

    The returned realization uses the causal state ``w_k`` of
    :func:`tustin_parts`; its input-output map is the bilinear transform
    ``s = (2/T)(z - 1)/(z + 1)``.
    """
    Ad, G = tustin_parts(sys, T)
    n = sys.nstates
    Bd = (Ad + np.eye(n)) @ G
    Dd = sys.D + sys.C @ G
    return DiscreteStateSpace(Ad, Bd, sys.C.copy(), Dd, T)


def c2d_zoh(sys, T):
    """Zero-order-hold discretization via the augmented matrix exponential."""
    if not T > 0:
        raise DomainError(f"sample period must be positive, got {T}")
    n, m = sys.nstates, sys.ninputs
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = sys.A * T
    aug[:n, n:] = sys.B * T
    E = mat_exp(aug)
    return DiscreteStateSpace(E[:n, :n], E[:n, n:], sys.C.copy(), sys.D.copy(), T)
