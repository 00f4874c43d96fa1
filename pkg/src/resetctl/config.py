"""JSON experiment configuration: parsing, validation and normalization.

Units: lengths in meters, frequencies in rad/s.  Any frequency field
``name`` may instead be given as ``name_hz`` (cycles per second); the
sample rate is always ``sim.fs_hz``.  Every problem is reported with the
dotted path of the offending field, and :func:`parse_config` collects all
of them before failing, so ``validate`` and ``run`` share one code path.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .describing import BAND_RATIO_WARN
from .elements import (TABLE1_PARAMS, TABLE3_PARAMS, CgLpPidParams, make_cglp, make_cglp_pid,
                       make_clegg, make_fore, with_band)
from .errors import ConfigError, ResetCtlError
from .lti import StateSpace
from .simulation import NoiseSpec, Quantizer, ReferenceSignal, SimConfig
from .stability import closed_loop_A

__all__ = ["ExperimentConfig", "ConfigReport", "parse_config", "load_config",
           "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = ("time-response", "s-sigma", "df-bode", "tune-delta",
                    "stability-check", "delta-sweep")
_PRESETS = {"table1": TABLE1_PARAMS, "table3": TABLE3_PARAMS}
_TWO_PI = 2.0 * math.pi


@dataclass
class ConfigReport:
    """Problems found in a configuration, each as ``(field_path, message)``."""

    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.errors

    def lines(self):
        out = [f"error: {p}: {m}" for p, m in self.errors]
        out += [f"warning: {p}: {m}" for p, m in self.warnings]
        return out or ["ok"]


@dataclass(eq=False)
class ExperimentConfig:
    """A validated configuration with library objects built."""

    raw: dict
    plant: StateSpace
    controller: object
    delta: float
    quantizer: Quantizer
    reference: ReferenceSignal
    noise: NoiseSpec
    sim: SimConfig
    experiment: dict
    report: ConfigReport


class _Invalid(Exception):
    """Internal: the current field is unusable; its error is already recorded."""


class _Parser:
    def __init__(self):
        self.report = ConfigReport()

    def error(self, path, msg):
        self.report.errors.append((path, msg))
        raise _Invalid

    def warn(self, path, msg):
        self.report.warnings.append((path, msg))

    def section(self, fn, *args, default=None):
        """Run a sub-parser, turning its failure into ``default``."""
        try:
            return fn(*args)
        except _Invalid:
            return default
        except ResetCtlError as exc:
            self.report.errors.append((fn.__name__, str(exc)))
            return default

    # primitive accessors

    def obj(self, d, key, path, required=False):
        if key not in d:
            if required:
                self.error(f"{path}.{key}".lstrip("."), "required field missing")
            return {}
        v = d[key]
        if not isinstance(v, dict):
            self.error(f"{path}.{key}".lstrip("."), "must be an object")
        return v

    def num(self, d, key, path, default=None, required=False):
        p = f"{path}.{key}".lstrip(".")
        if key not in d:
            if required:
                self.error(p, "required field missing")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.error(p, "must be a finite number")
        return float(v)

    def freq(self, d, key, path, default=None, required=False):
        """Frequency in rad/s from ``key`` or ``key_hz``."""
        hz = key + "_hz"
        if key in d and hz in d:
            self.error(f"{path}.{key}".lstrip("."), f"give either {key} or {hz}, not both")
        if hz in d:
            return _TWO_PI * self.num(d, hz, path)
        return self.num(d, key, path, default, required)

    def choice(self, d, key, path, options, default):
        p = f"{path}.{key}".lstrip(".")
        v = d.get(key, default)
        if v not in options:
            self.error(p, f"must be one of {', '.join(options)}; got {v!r}")
        return v

    def matrix(self, d, key, path):
        p = f"{path}.{key}".lstrip(".")
        if key not in d:
            self.error(p, "required field missing")
        try:
            M = np.array(d[key], dtype=float)
        except (TypeError, ValueError):
            self.error(p, "must be a numeric matrix")
        if not np.all(np.isfinite(M)):
            self.error(p, "entries must be finite")
        return M

    def grid(self, d, key, path, spacing="log", required=True):
        """Sorted positive grid from a list or ``{start, stop, num}``."""
        p = f"{path}.{key}".lstrip(".")
        if key not in d and key + "_hz" not in d:
            if required:
                self.error(p, "required field missing")
            return None
        scale = _TWO_PI if key + "_hz" in d else 1.0
        v = d.get(key, d.get(key + "_hz"))
        if isinstance(v, dict):
            start = self.num(v, "start", p, required=True)
            stop = self.num(v, "stop", p, required=True)
            n = self.num(v, "num", p, required=True)
            if n != int(n) or n < 1:
                self.error(f"{p}.num", "must be a positive integer")
            kind = self.choice(v, "spacing", p, ("log", "linear"), spacing)
            if kind == "log":
                if not 0 < start <= stop:
                    self.error(p, "log grid needs 0 < start <= stop")
                g = np.geomspace(start, stop, int(n))
            else:
                g = np.linspace(start, stop, int(n))
        elif isinstance(v, list) and v:
            if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
                self.error(p, "entries must be numbers")
            g = np.array(v, dtype=float)
        else:
            self.error(p, "must be a nonempty list or {start, stop, num}")
        g = g * scale
        if not np.all(np.isfinite(g)) or np.any(np.diff(g) <= 0):
            self.error(p, "must be strictly increasing")
        return g

    # sections

    def plant(self, d):
        kind = self.choice(d, "kind", "plant", ("mass", "second_order", "custom_ss"), None)
        if kind == "mass":
            m = self.num(d, "mass", "plant", required=True)
            if not m > 0:
                self.error("plant.mass", "must be positive")
            return StateSpace([[0, 1], [0, 0]], [[0], [1 / m]], [[1, 0]], [[0]])
        if kind == "second_order":
            g = self.num(d, "gain", "plant", required=True)
            a1 = self.num(d, "a1", "plant", required=True)
            a0 = self.num(d, "a0", "plant", required=True)
            return StateSpace([[0, 1], [-a0, -a1]], [[0], [g]], [[1, 0]], [[0]])
        mats = [self.matrix(d, k, "plant") for k in ("A", "B", "C", "D")]
        try:
            sys_ = StateSpace(*mats)
        except ResetCtlError as exc:
            self.error("plant", str(exc))
        if sys_.ninputs != 1 or sys_.noutputs != 1:
            self.error("plant", "plant must be single-input single-output")
        return sys_

    def controller(self, d):
        kind = self.choice(d, "kind", "controller",
                           ("cglp_pid", "cglp", "clegg", "fore"), "cglp_pid")
        path = "controller"
        delta = self.num(d, "delta", path, 0.0)
        if delta < 0:
            self.error("controller.delta", "must be nonnegative")
        try:
            if kind == "cglp_pid":
                params = {}
                if "preset" in d:
                    preset = self.choice(d, "preset", path, tuple(_PRESETS), None)
                    p0 = _PRESETS[preset]
                    params = {k: getattr(p0, k) for k in p0.__dataclass_fields__}
                elif "params" not in d:
                    self.error(path, "give a preset or params")
                given = self.obj(d, "params", path)
                pp = "controller.params"
                for k in CgLpPidParams.__dataclass_fields__:
                    if k in ("K", "gamma"):
                        v = self.num(given, k, pp)
                    else:
                        v = self.freq(given, k, pp)
                    if v is not None:
                        params[k] = v
                unknown = set(given) - set(CgLpPidParams.__dataclass_fields__) - {
                    k + "_hz" for k in CgLpPidParams.__dataclass_fields__}
                if unknown:
                    self.error(pp, f"unknown fields: {', '.join(sorted(unknown))}")
                missing = set(CgLpPidParams.__dataclass_fields__) - set(params)
                if missing:
                    self.error(pp, f"missing fields: {', '.join(sorted(missing))}")
                rc = make_cglp_pid(CgLpPidParams(**params))
            elif kind == "cglp":
                rc = make_cglp(self.freq(d, "omega_ra", path, required=True),
                               self.freq(d, "omega_r", path, required=True),
                               self.freq(d, "omega_f", path, required=True),
                               self.num(d, "gamma", path, required=True))
            elif kind == "clegg":
                rc = make_clegg(self.num(d, "gamma", path, 0.0))
            else:
                rc = make_fore(self.freq(d, "omega_r", path, required=True),
                               self.num(d, "gamma", path, 0.0))
        except ResetCtlError as exc:
            self.error("controller", str(exc))
        return with_band(rc, delta), delta

    def quantizer(self, d):
        mode = self.choice(d, "mode", "quantizer", ("none", "rounding", "truncation"), "none")
        if mode == "none":
            return Quantizer()
        if "Q" in d:
            if "range" in d or "bits" in d:
                self.error("quantizer", "give either Q or (range, bits), not both")
            Q = self.num(d, "Q", "quantizer")
            if not Q > 0:
                self.error("quantizer.Q", "must be positive")
            return Quantizer(mode, Q)
        rng = self.num(d, "range", "quantizer", required=True)
        bits = self.num(d, "bits", "quantizer", required=True)
        if not rng > 0:
            self.error("quantizer.range", "must be positive")
        if bits != int(bits) or bits < 1:
            self.error("quantizer.bits", "must be an integer >= 1")
        return Quantizer.from_range(rng, int(bits), mode)

    def reference(self, d):
        comps = d.get("components")
        if not isinstance(comps, list) or not comps:
            self.error("reference.components", "must be a nonempty list")
        out = []
        for i, c in enumerate(comps):
            p = f"reference.components[{i}]"
            if not isinstance(c, dict):
                self.error(p, "must be an object")
            a = self.num(c, "amplitude", p, required=True)
            w = self.freq(c, "omega", p, required=True)
            ph = self.num(c, "phase", p, 0.0)
            if a < 0:
                self.error(f"{p}.amplitude", "must be nonnegative")
            if not w > 0:
                self.error(f"{p}.omega", "must be positive")
            out.append((a, w, ph))
        return ReferenceSignal(out)

    def noise(self, d, seed):
        kind = self.choice(d, "kind", "noise", ("none", "uniform"), "none")
        amp = self.num(d, "amplitude", "noise", 0.0)
        if amp < 0:
            self.error("noise.amplitude", "must be nonnegative")
        s = d.get("seed", 0) if seed is None else seed
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            self.error("noise.seed", "must be a nonnegative integer")
        return NoiseSpec(kind, amp, s)

    def sim(self, d):
        fs = self.num(d, "fs_hz", "sim", 10_000.0)
        sub = self.num(d, "substeps", "sim", 10)
        if not fs > 0:
            self.error("sim.fs_hz", "must be positive")
        if sub != int(sub) or sub < 1:
            self.error("sim.substeps", "must be an integer >= 1")
        dur = self.num(d, "duration", "sim")
        per = self.num(d, "periods", "sim")
        if dur is not None and per is not None:
            self.error("sim", "give either duration or periods, not both")
        if dur is not None and not dur > 0:
            self.error("sim.duration", "must be positive")
        if per is not None and not per > 0:
            self.error("sim.periods", "must be positive")
        td = self.num(d, "transient_discard", "sim", 0.6)
        if not 0 <= td < 1:
            self.error("sim.transient_discard", "must lie in [0, 1)")
        return SimConfig(fs, int(sub), dur, per, td)

    def experiment(self, d):
        kind = self.choice(d, "kind", "experiment", EXPERIMENT_KINDS, None)
        p = "experiment"
        out = {"kind": kind}
        if kind == "s-sigma":
            out["omega_grid"] = self.grid(d, "omega_grid", p)
            out["R"] = self._positive(d, "R", p)
            out["include_ideal"] = self._flag(d, "include_ideal", p)
            out["n_jobs"] = self._count(d, "n_jobs", p, 1)
        elif kind == "df-bode":
            out["omega_grid"] = self.grid(d, "omega_grid", p)
            out["amplitude"] = self._positive(d, "amplitude", p, 1.0)
            out["oracle"] = self._flag(d, "oracle", p)
        elif kind == "tune-delta":
            out["omega_s"] = self.freq(d, "omega_s", p, required=True)
            if not out["omega_s"] > 0:
                self.error("experiment.omega_s", "must be positive")
            out["k"] = self.num(d, "k", p, 1.0)
            if not out["k"] >= 1:
                self.error("experiment.k", "safety factor must be >= 1")
            out["noise_margin"] = self.num(d, "noise_margin", p, 0.0)
            if out["noise_margin"] < 0:
                self.error("experiment.noise_margin", "must be nonnegative")
            out["verify"] = self._flag(d, "verify", p)
            out["force"] = self._flag(d, "force", p)
        elif kind == "stability-check":
            g = self.obj(d, "grid", p)
            lo = self.freq(g, "start", "experiment.grid", 1e-2)
            hi = self.freq(g, "stop", "experiment.grid", 1e6)
            per = self._count(g, "per_decade", "experiment.grid", 400)
            if not 0 < lo < hi:
                self.error("experiment.grid", "need 0 < start < stop")
            out["grid"] = (lo, hi, per)
        elif kind == "delta-sweep":
            out["omega"] = self.freq(d, "omega", p, required=True)
            if not out["omega"] > 0:
                self.error("experiment.omega", "must be positive")
            out["R"] = self._positive(d, "R", p)
            out["deltas"] = self.grid(d, "deltas", p, spacing="linear")
            if out["deltas"][0] < 0:
                self.error("experiment.deltas", "must be nonnegative")
        return out

    def _positive(self, d, key, path, default=None):
        v = self.num(d, key, path, default, required=default is None)
        if not v > 0:
            self.error(f"{path}.{key}", "must be positive")
        return v

    def _flag(self, d, key, path):
        v = d.get(key, False)
        if not isinstance(v, bool):
            self.error(f"{path}.{key}", "must be true or false")
        return v

    def _count(self, d, key, path, default):
        v = d.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            self.error(f"{path}.{key}", "must be a positive integer")
        return v


def _band_warning(parser, delta, amplitude, path):
    if delta > 0 and amplitude > 0 and delta / amplitude > BAND_RATIO_WARN:
        parser.warn(path, f"delta/E = {delta / amplitude:.3g} > {BAND_RATIO_WARN}: "
                          "limit cycling possible")


def parse_config(raw, seed=None):
    """Build an :class:`ExperimentConfig` from a decoded JSON object.

    Returns ``(config, report)``; ``config`` is ``None`` when the report
    holds errors.  ``seed`` overrides ``noise.seed``.
    """
    ps = _Parser()
    if not isinstance(raw, dict):
        ps.report.errors.append(("", "top level must be a JSON object"))
        return None, ps.report
    known = {"plant", "controller", "quantizer", "reference", "noise", "sim", "experiment"}
    for k in sorted(set(raw) - known):
        ps.report.errors.append((k, "unknown section"))

    def sec(name, required=False):
        try:
            return ps.obj(raw, name, "", required)
        except _Invalid:
            return None

    d_plant, d_ctrl, d_exp = sec("plant", True), sec("controller", True), sec("experiment", True)
    d_q, d_ref, d_noise, d_sim = sec("quantizer"), sec("reference"), sec("noise"), sec("sim")

    plant = ps.section(ps.plant, d_plant) if d_plant is not None else None
    ctrl = ps.section(ps.controller, d_ctrl, default=(None, 0.0)) if d_ctrl is not None \
        else (None, 0.0)
    rc, delta = ctrl
    q = ps.section(ps.quantizer, d_q) if d_q is not None else None
    ref = ps.section(ps.reference, d_ref) if d_ref else None
    noise = ps.section(ps.noise, d_noise if d_noise is not None else {}, seed)
    sim = ps.section(ps.sim, d_sim if d_sim is not None else {})
    exp = ps.section(ps.experiment, d_exp) if d_exp is not None else None

    if exp is not None:
        kind = exp["kind"]
        if kind in ("time-response", "tune-delta") and not d_ref:
            ps.report.errors.append(("reference", f"{kind} needs a reference"))
        if kind == "df-bode" and delta > 0 and delta >= exp["amplitude"]:
            ps.report.errors.append(("experiment.amplitude",
                                     "band describing function needs amplitude > delta"))
        if kind == "tune-delta" and ref is not None and not exp["force"]:
            over = [w for w in ref.frequencies if w >= exp["omega_s"]]
            if over:
                ps.report.errors.append((
                    "experiment.omega_s",
                    f"reference component at {over[0]:g} rad/s is not below omega_s; "
                    "the no-reset guarantee is void (set force to override)"))
        if kind == "stability-check" and rc is not None and len(rc.reset_indices) == 0:
            ps.report.errors.append(("controller", "no resetting states to certify"))
        if kind == "tune-delta" and plant is not None and rc is not None:
            try:
                eig = np.linalg.eigvals(closed_loop_A(plant, rc))
                if np.any(eig.real >= 0):
                    ps.report.errors.append(("controller",
                                             "base-linear closed loop is unstable"))
            except ResetCtlError as exc:
                ps.report.errors.append(("plant", str(exc)))
        if rc is not None and plant is not None and kind != "df-bode":
            if plant.D[0, 0] != 0 and rc.base.D[0, 0] != 0:
                ps.report.errors.append(("plant", "plant and controller both have feedthrough"))
        # warnings: band close to the signal amplitude
        if delta > 0:
            if ref is not None:
                _band_warning(ps, delta, float(np.max(ref.amplitudes)), "controller.delta")
            if kind in ("s-sigma", "delta-sweep"):
                _band_warning(ps, delta, exp["R"], "controller.delta")
            if kind == "df-bode" and delta < exp["amplitude"]:
                _band_warning(ps, delta, exp["amplitude"], "controller.delta")

    if ps.report.errors:
        return None, ps.report
    cfg = ExperimentConfig(raw, plant, rc, delta, q if q is not None else Quantizer(),
                           ref, noise, sim, exp, ps.report)
    return cfg, ps.report


def load_config(path, seed=None):
    """Read and parse a JSON config file.  Raises :class:`ConfigError` on any error."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    cfg, report = parse_config(raw, seed)
    if cfg is None:
        path_, msg = report.errors[0]
        raise ConfigError(f"{path_}: {msg}" if path_ else msg)
    return cfg
