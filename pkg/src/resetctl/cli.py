"""``resetctl`` command-line front end.

Exit statuses: 0 success, 1 runtime failure, 2 configuration error,
3 simulation divergence, 4 no stability certificate under ``--require-stable``.
Failures print one ``resetctl: error code=N kind=... message=...`` line on stderr.
"""

import argparse
import csv
import json
import os
import sys
import time

from . import __version__
from .config import parse_config
from .describing import df_oracle, sidf, sidf_band
from .errors import ConfigError, DivergenceError, ResetCtlError
from .simulation import NO_QUANTIZER, sigma_sensitivity, simulate
from .stability import default_grid, search_hbeta
from .tuning import DeltaTuningSpec, bls_sensitivity, delta_sweep, tune_delta, verify_no_reset

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_DIVERGED, EXIT_UNSTABLE = 0, 1, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code, self.kind = code, kind


def _fail(code, kind, message):
    one_line = " ".join(str(message).split())
    print(f"resetctl: error code={code} kind={kind} message={json.dumps(one_line)}",
          file=sys.stderr)
    return code


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise _Exit(EXIT_CONFIG, "config", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise _Exit(EXIT_CONFIG, "config",
                    f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def _load(path, seed=None):
    raw = _read_json(path)
    cfg, report = parse_config(raw, seed)
    for p, m in report.warnings:
        print(f"resetctl: warning field={p} message={json.dumps(m)}", file=sys.stderr)
    if cfg is None:
        p, m = report.errors[0]
        extra = f" (+{len(report.errors) - 1} more)" if len(report.errors) > 1 else ""
        raise _Exit(EXIT_CONFIG, "config", f"{p}: {m}{extra}")
    return cfg


def _fmt(v):
    return f"{v:.12g}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _tuning_spec(cfg):
    e = cfg.experiment
    return DeltaTuningSpec(e["omega_s"], cfg.reference, cfg.quantizer.level,
                           e["k"], e["noise_margin"])


def _tune(cfg):
    """Tuned delta plus the per-component breakdown, as a JSON-ready dict."""
    spec = _tuning_spec(cfg)
    e = cfg.experiment
    delta = tune_delta(cfg.plant, cfg.controller, spec, force=e["force"])
    comps = [{"amplitude": a, "omega": w,
              "S_bls": bls_sensitivity(cfg.plant, cfg.controller, w)}
             for a, w in zip(spec.reference.amplitudes, spec.reference.frequencies)]
    out = {"delta": delta, "omega_s": spec.omega_s, "k": spec.k, "Q": spec.Q,
           "noise_margin": spec.noise_margin, "components": comps}
    if e["verify"]:
        v = verify_no_reset(cfg.plant, cfg.controller, cfg.quantizer, spec, delta,
                            cfg.sim, cfg.noise)
        out["verify"] = {"ok": v.ok, "omega": v.omega, "max_error": v.max_error,
                         "resets": v.resets}
    return out


def _certificate(cfg):
    lo, hi, per = cfg.experiment.get("grid", (1e-2, 1e6, 400))
    return search_hbeta(cfg.plant, cfg.controller, default_grid(lo, hi, per),
                        seed=cfg.noise.seed)


def _run_experiment(cfg, out):
    """Dispatch on the experiment kind; returns the list of files written."""
    e = cfg.experiment
    kind = e["kind"]
    files = []
    if kind == "time-response":
        trace = simulate(cfg.plant, cfg.controller, cfg.quantizer, cfg.reference,
                         cfg.noise, cfg.sim)
        trace.to_csv(os.path.join(out, "trace.csv"))
        files.append("trace.csv")
    elif kind == "s-sigma":
        runs = [("s_sigma.csv", cfg.quantizer)]
        if e["include_ideal"]:
            runs.append(("s_sigma_ideal.csv", NO_QUANTIZER))
        for name, q in runs:
            curve = sigma_sensitivity(cfg.plant, cfg.controller, q, cfg.noise, cfg.sim,
                                      e["omega_grid"], e["R"], n_jobs=e["n_jobs"])
            curve.to_csv(os.path.join(out, name))
            files.append(name)
    elif kind == "df-bode":
        rc, E = cfg.controller, e["amplitude"]
        if cfg.delta > 0:
            rows = [(w, g.real, g.imag) for w in e["omega_grid"]
                    for g in [sidf_band(rc, w, E, cfg.delta)]]
        else:
            rows = [(w, g.real, g.imag) for w in e["omega_grid"] for g in [sidf(rc, w)]]
        _write_rows(os.path.join(out, "df_bode.csv"), ["omega", "re", "im"], rows)
        files.append("df_bode.csv")
        if e["oracle"]:
            rows = [(w, g.real, g.imag) for w in e["omega_grid"]
                    for g in [df_oracle(rc, w, E, cfg.delta)]]
            _write_rows(os.path.join(out, "df_oracle.csv"), ["omega", "re", "im"], rows)
            files.append("df_oracle.csv")
    elif kind == "tune-delta":
        with open(os.path.join(out, "tune_delta.json"), "w") as fh:
            json.dump(_tune(cfg), fh, indent=2, sort_keys=True)
            fh.write("\n")
        files.append("tune_delta.json")
    elif kind == "stability-check":
        cert = _certificate(cfg)
        with open(os.path.join(out, "certificate.txt"), "w") as fh:
            fh.write(cert.summary() + "\n")
        files.append("certificate.txt")
    elif kind == "delta-sweep":
        vals = delta_sweep(cfg.plant, cfg.controller, cfg.quantizer, cfg.noise, cfg.sim,
                           e["omega"], e["R"], e["deltas"])
        _write_rows(os.path.join(out, "delta_sweep.csv"), ["delta", "S_sigma"],
                    zip(e["deltas"], vals))
        files.append("delta_sweep.csv")
    return files


def cmd_run(args):
    t0 = time.perf_counter()
    cfg = _load(args.config, args.seed)
    if args.require_stable:
        cert = _certificate(cfg)
        if not cert.valid:
            raise _Exit(EXIT_UNSTABLE, "stability",
                        f"no H-beta certificate found (min_real_margin="
                        f"{cert.min_real_margin:.6g}, hurwitz_ok={cert.hurwitz_ok})")
    os.makedirs(args.out, exist_ok=True)
    try:
        files = _run_experiment(cfg, args.out)
    except DivergenceError as exc:
        raise _Exit(EXIT_DIVERGED, "divergence", f"{exc} (t={exc.time:.6g} s)") from exc
    raw = dict(cfg.raw)
    if args.seed is not None:
        raw["noise"] = dict(raw.get("noise", {}), seed=args.seed)
    manifest = {
        "tool": "resetctl",
        "version": __version__,
        "config": raw,
        "seed": cfg.noise.seed,
        "experiment": cfg.experiment["kind"],
        "outputs": files,
        "wall_time_s": time.perf_counter() - t0,
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {', '.join(files + ['manifest.json'])} to {args.out}")
    return EXIT_OK


def cmd_validate(args):
    raw = _read_json(args.config)
    _, report = parse_config(raw)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_CONFIG


def cmd_tune_delta(args):
    cfg = _load(args.config)
    if cfg.experiment["kind"] != "tune-delta":
        raise _Exit(EXIT_CONFIG, "config", "experiment.kind: must be tune-delta")
    res = _tune(cfg)
    print(f"delta: {_fmt(res['delta'])}")
    for c in res["components"]:
        print(f"component: amplitude={_fmt(c['amplitude'])} omega={_fmt(c['omega'])} "
              f"S_bls={_fmt(c['S_bls'])}")
    if "verify" in res:
        v = res["verify"]
        print(f"verify: ok={str(v['ok']).lower()}"
              + ("" if v["ok"] else
                  f" omega={'reference' if v['omega'] is None else _fmt(v['omega'])}"
                  f" resets={v['resets']} max_error={_fmt(v['max_error'])}"))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="resetctl",
        description="Reset control simulation and analysis under sensor quantization.")
    ap.add_argument("--version", action="version", version=f"resetctl {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured experiment")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the noise seed")
    p.add_argument("--require-stable", action="store_true",
                   help="exit 4 unless an H-beta certificate is found first")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("tune-delta", help="print the tuned reset band")
    p.add_argument("config")
    p.set_defaults(func=cmd_tune_delta)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and args.seed < 0:
        return _fail(EXIT_CONFIG, "config", "--seed must be nonnegative")
    try:
        return args.func(args)
    except _Exit as exc:
        return _fail(exc.code, exc.kind, str(exc))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, "divergence", str(exc))
    except ResetCtlError as exc:
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
