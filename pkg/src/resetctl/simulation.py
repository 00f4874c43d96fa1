"""Sampled closed-loop simulation of a reset control system with a
quantizing sensor, and the pseudo-sensitivity sweep built on it.

Loop per controller sample ``k``::

    y_q[k] = quantize(y[k] + n[k])
    e[k]   = r[k] - y_q[k]
    reset decision on (e[k-1], e[k]); on trigger x_r <- A_rho x_r
    u[k]   = controller output (trapezoidal discretization)
    plant advanced over one period under held u[k] (exact ZOH)
"""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DivergenceError, DomainError
from .lti import c2d_zoh, tustin_parts

log = logging.getLogger(__name__)

__all__ = [
    "Quantizer", "ReferenceSignal", "NoiseSpec", "SimConfig", "SimulationTrace",
    "SigmaCurve", "quantize", "simulate", "sigma_sensitivity", "sigma_point",
    "reset_count_in_window", "steady_resets_per_period", "NO_QUANTIZER", "NO_NOISE",
]


@dataclass(frozen=True)
class Quantizer:
    """Sensor quantizer.  ``mode`` is ``"rounding"``, ``"truncation"`` or ``"none"``."""

    mode: str = "none"
    Q: float = 0.0

    def __post_init__(self):
        if self.mode not in ("rounding", "truncation", "none"):
            raise DomainError(f"unknown quantizer mode {self.mode!r}")
        if self.mode != "none" and not (self.Q > 0 and math.isfinite(self.Q)):
            raise DomainError(f"quantization level must be positive, got {self.Q}")

    @classmethod
    def from_range(cls, range_, bits, mode="rounding"):
        """Quantizer with level ``Q = range / 2**bits``."""
        if not range_ > 0:
            raise DomainError(f"range must be positive, got {range_}")
        if int(bits) != bits or bits < 1:
            raise DomainError(f"bits must be an integer >= 1, got {bits}")
        return cls(mode, range_ / 2.0 ** int(bits))

    @property
    def level(self):
        return self.Q if self.mode != "none" else 0.0


NO_QUANTIZER = Quantizer()


def quantize(v, q):
    """Quantize a scalar or array.

    Rounding is ``Q * round(v / Q)`` with ties away from zero; truncation is
    ``Q * floor(v / Q)``.
    """
    if q.mode == "none":
        return v
    r = np.asarray(v, dtype=float) / q.Q
    if q.mode == "rounding":
        out = q.Q * np.copysign(np.floor(np.abs(r) + 0.5), r)
    else:
        out = q.Q * np.floor(r)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ReferenceSignal:
    """Sum of sines ``sum_i A_i sin(w_i t + phase_i)``.

    ``components`` is a sequence of ``(amplitude, omega, phase)`` triples,
    amplitude in output units and omega in rad/s.
    """

    components: tuple

    def __post_init__(self):
        comps = tuple(tuple(float(x) for x in c) if len(c) == 3 else
                      (float(c[0]), float(c[1]), 0.0) for c in self.components)
        if not comps:
            raise DomainError("reference needs at least one component")
        for a, w, _ in comps:
            if a < 0:
                raise DomainError(f"amplitude must be nonnegative, got {a}")
            if not w > 0:
                raise DomainError(f"frequency must be positive, got {w}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def sine(cls, amplitude, omega, phase=0.0):
        return cls(((amplitude, omega, phase),))

    @property
    def amplitudes(self):
        return np.array([c[0] for c in self.components])

    @property
    def frequencies(self):
        return np.array([c[1] for c in self.components])

    @property
    def slowest_period(self):
        return 2 * np.pi / self.frequencies.min()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, w, ph in self.components:
            out += a * np.sin(w * t + ph)
        return out


@dataclass(frozen=True)
class NoiseSpec:
    """Seeded output noise; ``kind`` is ``"none"`` or ``"uniform"`` (white, +-amplitude)."""

    kind: str = "none"
    amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "uniform"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if not self.amplitude >= 0:
            raise DomainError(f"noise amplitude must be nonnegative, got {self.amplitude}")

    def samples(self, count):
        if self.kind == "none" or self.amplitude == 0:
            return np.zeros(count)
        rng = np.random.default_rng(self.seed)
        return rng.uniform(-self.amplitude, self.amplitude, count)


NO_NOISE = NoiseSpec()


@dataclass(frozen=True)
class SimConfig:
    """Timing of a simulation run.

    Give either ``duration`` (s) or ``periods`` (of the slowest reference
    component).  ``transient_discard`` is the leading fraction of the run
    treated as transient.
    """

    fs: float = 10_000.0
    substeps: int = 10
    duration: float = None
    periods: float = None
    transient_discard: float = 0.6

    def __post_init__(self):
        if not self.fs > 0:
            raise DomainError(f"sample rate must be positive, got {self.fs}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise DomainError(f"substeps must be an integer >= 1, got {self.substeps}")
        if not 0 <= self.transient_discard < 1:
            raise DomainError("transient_discard must lie in [0, 1)")
        if self.duration is not None and not self.duration > 0:
            raise DomainError("duration must be positive")
        if self.periods is not None and not self.periods > 0:
            raise DomainError("periods must be positive")

    @property
    def T(self):
        return 1.0 / self.fs

    def run_length(self, ref):
        if self.duration is not None:
            return self.duration
        if self.periods is not None:
            return self.periods * ref.slowest_period
        return max(20 * ref.slowest_period, 2.0)


@dataclass(eq=False)
class SimulationTrace:
    """Per-sample signals of a run plus the reset instants."""

    t: np.ndarray
    r: np.ndarray
    e: np.ndarray
    y: np.ndarray
    y_q: np.ndarray
    u: np.ndarray
    reset_times: np.ndarray
    t_ss: float = 0.0

    @property
    def reset_count(self):
        return len(self.reset_times)

    @property
    def reset_flags(self):
        flags = np.zeros(len(self.t), dtype=int)
        idx = np.searchsorted(self.t, self.reset_times)
        flags[idx] = 1
        return flags

    @property
    def true_error(self):
        """``r - y``: the tracking error before sensor quantization."""
        return self.r - self.y

    def steady(self, name="e"):
        """Signal ``name`` restricted to ``t >= t_ss``."""
        return getattr(self, name)[self.t >= self.t_ss]

    def steady_max_error(self):
        return float(np.max(np.abs(self.steady("e"))))

    def to_csv(self, path):
        """Write ``t,r,e,y,y_q,u,reset`` rows with 12 significant digits."""
        flags = self.reset_flags
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "r", "e", "y", "y_q", "u", "reset"])
            for i in range(len(self.t)):
                w.writerow([f"{self.t[i]:.12g}", f"{self.r[i]:.12g}", f"{self.e[i]:.12g}",
                            f"{self.y[i]:.12g}", f"{self.y_q[i]:.12g}", f"{self.u[i]:.12g}",
                            flags[i]])


def _plant_step(plant, T, substeps):
    """ZOH map over one controller period, composed from ``substeps`` sub-steps."""
    sub = c2d_zoh(plant, T / substeps)
    Ad, Bd = np.eye(plant.nstates), np.zeros((plant.nstates, 1))
    for _ in range(substeps):
        Ad, Bd = sub.Ad @ Ad, sub.Ad @ Bd + sub.Bd
    return Ad, Bd[:, 0]


_QUANT_CODE = {"none": 0, "rounding": 1, "truncation": 2}


@numba.njit(cache=True)
def _loop(r, nz, Apd, Bpd, Cp, Dp, Ad, G, Cr, Dr, rho, qmode, Q, band, delta,
          xp, w, shift_w):
    nsamp = r.shape[0]
    e_out = np.empty(nsamp)
    y_out = np.empty(nsamp)
    yq_out = np.empty(nsamp)
    u_out = np.empty(nsamp)
    flags = np.zeros(nsamp, dtype=np.int8)
    u_prev = 0.0
    e_prev = 0.0
    for k in range(nsamp):
        y = Cp @ xp + Dp * u_prev
        yq = y + nz[k]
        if qmode == 1:
            v = yq / Q
            yq = Q * math.copysign(math.floor(abs(v) + 0.5), v)
        elif qmode == 2:
            yq = Q * math.floor(yq / Q)
        e = r[k] - yq
        if k == 0 and shift_w:
            w = w - G * e
        x = w + G * e
        if k > 0:
            if band:
                fire = (e_prev > delta and e <= delta) or (e_prev < -delta and e >= -delta)
            else:
                fire = e_prev != 0.0 and e_prev * e <= 0.0
            if fire:
                x = rho * x
                flags[k] = 1
        u = Cr @ x + Dr * e
        e_out[k], y_out[k], yq_out[k], u_out[k] = e, y, yq, u
        if not math.isfinite(u):
            return e_out, y_out, yq_out, u_out, flags, k
        w = Ad @ x + G * e
        xp = Apd @ xp + Bpd * u
        e_prev, u_prev = e, u
    return e_out, y_out, yq_out, u_out, flags, -1


def simulate(plant, rc, q=NO_QUANTIZER, ref=None, noise=NO_NOISE, cfg=SimConfig(),
             x0_plant=None, x0_ctrl=None):
    """Run the sampled reset control loop.

    Parameters
    ----------
    plant : StateSpace
        SISO plant.  A plant feedthrough acts on the input held over the
        previous sample.
    rc : ResetController
    q : Quantizer
    ref : ReferenceSignal or None
        ``None`` means zero reference.
    noise : NoiseSpec
    cfg : SimConfig
    x0_plant, x0_ctrl : array_like, optional
        Initial states (default zero).

    Returns
    -------
    SimulationTrace

    Raises
    ------
    DivergenceError
        When the control signal stops being finite.
    """
    T = cfg.T
    if ref is None:
        duration = cfg.duration if cfg.duration is not None else 1.0
    else:
        duration = cfg.run_length(ref)
    nsamp = int(round(duration * cfg.fs)) + 1
    t = np.arange(nsamp) * T
    r = ref(t) if ref is not None else np.zeros(nsamp)
    nz = noise.samples(nsamp)

    Apd, Bpd = _plant_step(plant, T, int(cfg.substeps))
    Ad, G = tustin_parts(rc.base, T)
    xp = np.zeros(plant.nstates) if x0_plant is None else np.array(x0_plant, dtype=float)
    # the kernel carries w = x - G e; an initial x is shifted once e[0] is known
    w = np.zeros(rc.nstates) if x0_ctrl is None else np.array(x0_ctrl, dtype=float)
    if xp.shape != (plant.nstates,) or w.shape != (rc.nstates,):
        raise DomainError("initial state has the wrong length")

    e, y, yq, u, flags, bad = _loop(
        np.ascontiguousarray(r, dtype=float), np.ascontiguousarray(nz, dtype=float),
        np.ascontiguousarray(Apd), np.ascontiguousarray(Bpd),
        np.ascontiguousarray(plant.C[0]), float(plant.D[0, 0]),
        np.ascontiguousarray(Ad), np.ascontiguousarray(G[:, 0]),
        np.ascontiguousarray(rc.base.C[0]), float(rc.base.D[0, 0]),
        rc.reset_diag, _QUANT_CODE[q.mode], float(q.level),
        rc.condition.is_band, float(rc.condition.delta),
        xp, w, x0_ctrl is not None)
    if bad >= 0:
        raise DivergenceError(f"simulation diverged at t={t[bad]:.6g} s", t[bad])
    return SimulationTrace(t, r, e, y, yq, u, t[flags.astype(bool)],
                           t_ss=cfg.transient_discard * t[-1])


def reset_count_in_window(trace, t0, t1):
    """Number of resets with ``t0 <= t <= t1``."""
    if not t0 < t1:
        raise DomainError(f"need t0 < t1, got [{t0}, {t1}]")
    if t0 < trace.t[0] or t1 > trace.t[-1]:
        raise DomainError(f"window [{t0}, {t1}] outside trace [{trace.t[0]}, {trace.t[-1]}]")
    rt = trace.reset_times
    return int(np.count_nonzero((rt >= t0) & (rt <= t1)))


def steady_resets_per_period(trace, omega):
    """Mean number of resets per reference period after ``t_ss``."""
    span = trace.t[-1] - trace.t_ss
    return reset_count_in_window(trace, trace.t_ss, trace.t[-1]) / (span * omega / (2 * np.pi))


@dataclass(eq=False)
class SigmaCurve:
    """Pseudo-sensitivity ``max|e| / R`` over a frequency grid.

    ``diverged`` flags grid points whose run blew up; their value is NaN.
    """

    omega: np.ndarray
    value: np.ndarray
    diverged: np.ndarray = field(default=None)
    resets_per_period: np.ndarray = field(default=None)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega", "value"])
            for om, v in zip(self.omega, self.value):
                w.writerow([f"{om:.12g}", f"{v:.12g}"])


def _period_peaks(trace, omega, count):
    """max|e| over each of the last ``count`` reference periods."""
    per = 2 * np.pi / omega
    t_end = trace.t[-1]
    out = []
    for i in range(count, 0, -1):
        sel = (trace.t > t_end - i * per) & (trace.t <= t_end - (i - 1) * per)
        out.append(np.max(np.abs(trace.e[sel])))
    return out


def sigma_point(plant, rc, q, noise, cfg, omega, R, periodic_tol=0.02, max_extension=3.0):
    """One point of the pseudo-sensitivity curve: ``(value, resets_per_period, trace)``.

    The run lasts ``max(20 periods, 2 s)`` unless ``cfg`` fixes the length;
    if the last two periods' peaks disagree by more than ``periodic_tol``
    the run is lengthened, up to ``max_extension`` times.
    """
    ref = ReferenceSignal.sine(R, omega)
    base = cfg.run_length(ref)
    trace = None
    for factor in (1.0, 2.0, max_extension):
        if factor > max_extension:
            break
        run_cfg = SimConfig(cfg.fs, cfg.substeps, duration=base * factor,
                            transient_discard=cfg.transient_discard)
        trace = simulate(plant, rc, q, ref, noise, run_cfg)
        a, b = _period_peaks(trace, omega, 2)
        if abs(a - b) <= periodic_tol * max(a, b):
            break
    value = trace.steady_max_error() / R
    return value, steady_resets_per_period(trace, omega), trace


def _sigma_job(args):
    plant, rc, q, noise, cfg, omega, R = args
    try:
        value, rpp, _ = sigma_point(plant, rc, q, noise, cfg, omega, R)
        return value, rpp, False
    except DivergenceError as exc:
        log.warning("omega=%g diverged at t=%g s", omega, exc.time)
        return math.nan, math.nan, True


def sigma_sensitivity(plant, rc, q, noise, cfg, omega_grid, R, n_jobs=1):
    """Pseudo-sensitivity ``S_sigma(w) = max_{t >= t_ss} |e(t)| / R``.

    Each grid frequency is simulated with the single-sine reference
    ``R sin(w t)``.  Divergent points are flagged rather than raised.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    if np.any(omega_grid <= 0) or np.any(np.diff(omega_grid) <= 0):
        raise DomainError("omega grid must be positive and strictly increasing")
    if not R > 0:
        raise DomainError(f"reference amplitude must be positive, got {R}")
    jobs = [(plant, rc, q, noise, cfg, float(om), R) for om in omega_grid]
    if n_jobs == 1:
        results = [_sigma_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_sigma_job, jobs))
    value = np.array([r[0] for r in results])
    rpp = np.array([r[1] for r in results])
    div = np.array([r[2] for r in results])
    return SigmaCurve(omega_grid, value, div, rpp)
