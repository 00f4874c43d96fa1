import copy
import json
import os
import subprocess
import sys

import pytest

from resetctl import Quantizer
from resetctl.cli import main
from resetctl.config import load_config, parse_config
from resetctl.errors import ConfigError

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")

BASE = {
    "plant": {"kind": "mass", "mass": 1.0},
    "controller": {"kind": "cglp_pid", "preset": "table1"},
    "quantizer": {"mode": "rounding", "range": 0.005, "bits": 9},
    "reference": {"components": [{"amplitude": 0.005, "omega": 50.0}]},
    "noise": {"kind": "uniform", "amplitude": 1e-6, "seed": 3},
    "sim": {"fs_hz": 10000, "substeps": 10, "duration": 0.2},
    "experiment": {"kind": "time-response"},
}


def cfg(**sections):
    raw = copy.deepcopy(BASE)
    for k, v in sections.items():
        if v is None:
            raw.pop(k, None)
        else:
            raw[k] = v
    return raw


def write(tmp_path, raw, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestParse:
    def test_base_ok(self):
        c, rep = parse_config(cfg())
        assert rep.ok and rep.lines() == ["ok"]
        assert c.quantizer == Quantizer("rounding", 0.005 / 512)
        assert c.controller.nstates == 4
        assert c.sim.fs == 10000

    def test_hz_keys(self):
        c, _ = parse_config(cfg(reference={"components": [{"amplitude": 1e-3, "omega_hz": 6.4}]}))
        assert c.reference.frequencies[0] == pytest.approx(2 * 3.141592653589793 * 6.4)

    def test_example_configs_valid(self):
        names = sorted(os.listdir(CONFIGS))
        assert names
        for n in names:
            c = load_config(os.path.join(CONFIGS, n))
            assert c.report.ok, n

    @pytest.mark.parametrize("raw,path", [
        (cfg(reference={"components": []}), "reference.components"),
        (cfg(reference=None), "reference"),
        (cfg(controller={"kind": "fore", "omega_r": -5.0}), "controller"),
        (cfg(quantizer={"mode": "rounding", "range": 0.005, "bits": 0}), "quantizer.bits"),
        (cfg(quantizer={"mode": "rounding", "Q": 1e-5, "bits": 9}), "quantizer"),
        (cfg(sim={"fs_hz": -1}), "sim.fs_hz"),
        (cfg(noise={"kind": "uniform", "seed": -2}), "noise.seed"),
        (cfg(experiment={"kind": "bogus"}), "experiment.kind"),
        (cfg(experiment={"kind": "s-sigma", "omega_grid": [3, 2], "R": 1}), "experiment.omega_grid"),
        (cfg(plant={"kind": "custom_ss", "A": [[0]], "B": [[1, 1]], "C": [[1]], "D": [[0, 0]]}),
         "plant"),
        (dict(cfg(), extra={}), "extra"),
    ])
    def test_errors_have_paths(self, raw, path):
        c, rep = parse_config(raw)
        assert c is None
        assert any(p == path for p, _ in rep.errors), rep.errors
        assert all(line.startswith("error: ") for line in rep.lines())

    def test_tune_delta_guarantee(self):
        raw = cfg(experiment={"kind": "tune-delta", "omega_s": 40.0})
        _, rep = parse_config(raw)
        assert rep.errors[0][0] == "experiment.omega_s"
        raw["experiment"]["force"] = True
        assert parse_config(raw)[1].ok

    def test_band_warning(self):
        raw = cfg(controller={"kind": "cglp_pid", "preset": "table1", "delta": 0.006})
        c, rep = parse_config(raw)
        assert c is not None
        assert rep.warnings and "limit cycling" in rep.warnings[0][1]

    def test_seed_override(self):
        c, _ = parse_config(cfg(), seed=11)
        assert c.noise.seed == 11

    def test_load_config_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, cfg(sim={"substeps": 0})))


class TestCli:
    def test_validate(self, tmp_path, capsys):
        code, out, _ = run(["validate", write(tmp_path, cfg())], capsys)
        assert code == 0 and out.strip() == "ok"
        code, out, _ = run(["validate", write(tmp_path, cfg(reference={"components": []}))],
                           capsys)
        assert code == 2 and out.startswith("error: reference.components")

    def test_bad_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        code, _, err = run(["validate", str(p)], capsys)
        assert code == 2 and "code=2 kind=config" in err

    def test_run_time_response(self, tmp_path, capsys):
        out = tmp_path / "out"
        code, _, _ = run(["run", write(tmp_path, cfg()), "--out", str(out)], capsys)
        assert code == 0
        lines = (out / "trace.csv").read_text().splitlines()
        assert lines[0] == "t,r,e,y,y_q,u,reset"
        assert len(lines) == 2002
        m = json.loads((out / "manifest.json").read_text())
        assert m["version"] == "0.1.0" and m["seed"] == 3
        assert m["config"] == cfg() and m["outputs"] == ["trace.csv"]
        assert m["wall_time_s"] >= 0

    def test_config_error_writes_nothing(self, tmp_path, capsys):
        out = tmp_path / "out"
        raw = cfg(controller={"kind": "fore", "omega_r": -5.0})
        code, _, err = run(["run", write(tmp_path, raw), "--out", str(out)], capsys)
        assert code == 2
        assert not out.exists()
        assert err.startswith("resetctl: error code=2 kind=config message=")
        assert len(err.strip().splitlines()) == 1

    def test_seed_reproducible(self, tmp_path, capsys):
        path = write(tmp_path, cfg())
        for d in ("a", "b"):
            assert run(["run", path, "--out", str(tmp_path / d), "--seed", "5"], capsys)[0] == 0
        a = (tmp_path / "a" / "trace.csv").read_bytes()
        assert a == (tmp_path / "b" / "trace.csv").read_bytes()
        assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 5
        run(["run", path, "--out", str(tmp_path / "c"), "--seed", "6"], capsys)
        assert a != (tmp_path / "c" / "trace.csv").read_bytes()

    def test_manifest_rerun(self, tmp_path, capsys):
        run(["run", write(tmp_path, cfg()), "--out", str(tmp_path / "a"), "--seed", "9"], capsys)
        echoed = json.loads((tmp_path / "a" / "manifest.json").read_text())["config"]
        run(["run", write(tmp_path, echoed, "e.json"), "--out", str(tmp_path / "b")], capsys)
        assert ((tmp_path / "a" / "trace.csv").read_bytes()
                == (tmp_path / "b" / "trace.csv").read_bytes())

    def test_divergence(self, tmp_path, capsys):
        raw = cfg(plant={"kind": "custom_ss", "A": [[50.0]], "B": [[1.0]], "C": [[1.0]],
                         "D": [[0.0]]},
                  controller={"kind": "clegg", "gamma": 1.0}, quantizer={"mode": "none"},
                  sim={"fs_hz": 1000, "duration": 100.0})
        code, _, err = run(["run", write(tmp_path, raw), "--out", str(tmp_path / "o")], capsys)
        assert code == 3 and "kind=divergence" in err

    def test_require_stable(self, tmp_path, capsys):
        raw = cfg(plant={"kind": "custom_ss", "A": [[0.0]], "B": [[1.0]], "C": [[1.0]],
                         "D": [[0.0]]},
                  controller={"kind": "clegg"}, experiment={"kind": "stability-check"})
        out = tmp_path / "o"
        code, _, err = run(["run", write(tmp_path, raw), "--out", str(out), "--require-stable"],
                           capsys)
        assert code == 4 and "kind=stability" in err
        assert not out.exists()
        code, _, _ = run(["run", write(tmp_path, raw), "--out", str(out)], capsys)
        assert code == 0
        assert (out / "certificate.txt").read_text().startswith("valid: false")

    def test_df_bode(self, tmp_path, capsys):
        raw = cfg(controller={"kind": "fore", "omega_r": 100.0, "delta": 0.25},
                  experiment={"kind": "df-bode", "amplitude": 1.0, "oracle": True,
                              "omega_grid": {"start": 10, "stop": 1000, "num": 3}})
        out = tmp_path / "o"
        assert run(["run", write(tmp_path, raw), "--out", str(out)], capsys)[0] == 0
        rows = (out / "df_bode.csv").read_text().splitlines()
        assert rows[0] == "omega,re,im" and len(rows) == 4
        assert (out / "df_oracle.csv").exists()

    def test_s_sigma_and_sweep(self, tmp_path, capsys):
        raw = cfg(experiment={"kind": "s-sigma", "omega_grid": [50.0, 100.0], "R": 0.005,
                              "include_ideal": True})
        out = tmp_path / "o"
        assert run(["run", write(tmp_path, raw), "--out", str(out)], capsys)[0] == 0
        assert (out / "s_sigma.csv").read_text().startswith("omega,value\n")
        assert (out / "s_sigma_ideal.csv").exists()
        raw = cfg(experiment={"kind": "delta-sweep", "omega": 50.0, "R": 0.005,
                              "deltas": [1e-5, 2e-5]})
        out = tmp_path / "p"
        assert run(["run", write(tmp_path, raw), "--out", str(out)], capsys)[0] == 0
        rows = (out / "delta_sweep.csv").read_text().splitlines()
        assert rows[0] == "delta,S_sigma" and len(rows) == 3

    def test_tune_delta_command(self, tmp_path, capsys):
        raw = cfg(reference={"components": [{"amplitude": 0.005, "omega_hz": 6.4}]},
                  experiment={"kind": "tune-delta", "omega_s": 50.0})
        code, out, _ = run(["tune-delta", write(tmp_path, raw)], capsys)
        assert code == 0
        assert out.splitlines()[0] == "delta: 1.01097043652e-05"
        code, _, err = run(["tune-delta", write(tmp_path, cfg())], capsys)
        assert code == 2

    def test_round_trip_examples(self, tmp_path, capsys):
        # validate passing implies run never exits 2
        for name in ("table1_stability.json", "table3_df_bode.json"):
            path = os.path.join(CONFIGS, name)
            assert run(["validate", path], capsys)[0] == 0
            assert run(["run", path, "--out", str(tmp_path / name)], capsys)[0] != 2

    def test_console_script(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "resetctl.cli", "validate",
                               write(tmp_path, cfg())], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.strip() == "ok"


_PERTURB = {
    ("sim", "fs_hz"): [-1, 0, 2000, 5000, "x"],
    ("sim", "substeps"): [0, 1, 2.5, 4],
    ("quantizer", "bits"): [0, 4, 12, 3.5],
    ("controller", "delta"): [-1e-6, 0.0, 2e-5, 0.0049, 0.01],
    ("noise", "amplitude"): [-1.0, 0.0, 1e-5],
    ("plant", "mass"): [-1.0, 0.0, 0.5, 2.0],
}


@pytest.mark.parametrize("seed", range(12))
def test_validate_implies_no_config_exit(seed, tmp_path, capsys):
    import random
    rnd = random.Random(seed)
    raw = cfg(sim={"fs_hz": 10000, "duration": 0.05})
    for (sec, key), values in _PERTURB.items():
        if rnd.random() < 0.5:
            raw[sec][key] = rnd.choice(values)
    path = write(tmp_path, raw)
    ok = run(["validate", path], capsys)[0] == 0
    code = run(["run", path, "--out", str(tmp_path / "o")], capsys)[0]
    if ok:
        assert code != 2
    else:
        assert code == 2
