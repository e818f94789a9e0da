import csv
import hashlib
import json
import warnings

import numpy as np
import pytest
import yaml
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from squeezesim import __version__
from squeezesim.cli import (ScenarioError, Table, dumps_stable, emit_config, emit_plotdata, main,
                            parse_config, run_scenario, validate_config)
from squeezesim.errors import PreconditionError, ValidationError

from test_acceptance import CONFIGS

RING = {
    "scenario": "ring-spectrum",
    "params": {
        "scheme": "SPDC-degenerate", "length": 1e-4,
        "resonances": {"SH": {"omega": 2.4e15, "gamma": 1e9}, "F": {"omega": 1.2e15, "gamma": 1e9}},
        "pump_power": {"SH": 1e-3},
    },
}


def write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_defaults_filled_in():
    cfg = validate_config(RING)
    assert cfg.output_dir == "out" and cfg.seed == 0
    p = cfg.params
    assert p["lam"] == 5.0 and p["branch"] == 0 and p["points"] == 2048
    assert p["resonances"]["F"]["gamma_ph"] == 0.0 and p["resonances"]["F"]["sigma"] is None


def test_sigma_out_of_range_names_the_cause():
    data = json.loads(json.dumps(RING))
    data["params"]["resonances"]["SH"] = {"omega": 2.4e15, "sigma": 1.2}
    with pytest.raises(ValidationError) as exc:
        validate_config(data)
    assert any("gamma_from_sigma" in m and "1.2" in m for m in exc.value.problems)


def test_all_problems_reported_at_once():
    data = json.loads(json.dumps(RING))
    data["bogus"] = 1
    data["params"]["length"] = -1
    del data["params"]["scheme"]
    with pytest.raises(ValidationError) as exc:
        validate_config(data)
    text = "\n".join(exc.value.problems)
    assert "config.bogus: unknown key" in text
    assert "params.scheme: missing required key" in text
    assert "params.length: -1 is out of range" in text


def test_unknown_scenario_and_bad_types():
    with pytest.raises(ValidationError):
        validate_config({"scenario": "laser"})
    with pytest.raises(ValidationError):
        validate_config([1, 2])
    with pytest.raises(ValidationError) as exc:
        validate_config({"scenario": "mps-demo", "params": {"n_bins": 2.5, "gamma": "fast"}})
    assert len(exc.value.problems) == 2


def test_semantic_checks_run_at_validation():
    # a drive band that is not a pump of the scheme
    data = json.loads(json.dumps(RING))
    data["params"]["pump_power"] = {"F": 1e-3}
    with pytest.raises(ValidationError, match="not a pump band"):
        validate_config(data)
    # a pump window too narrow for the pulse
    with pytest.raises(ValidationError):
        validate_config({"scenario": "waveguide-jsa", "params": {"phi": 0.5, "half_window": 0.5}})


def test_adhoc_span_must_resolve_the_steps():
    with pytest.raises(ValidationError, match="t_span"):
        validate_config({"scenario": "gaussian-adhoc", "params": {"t_span": 5e-324, "steps": 2}})


def test_yaml_exponent_floats(tmp_path):
    p = tmp_path / "r.yaml"
    p.write_text("scenario: ring-spectrum\nparams:\n  scheme: SPDC-degenerate\n  length: 1e-4\n"
                 "  resonances:\n    SH: {omega: 2.4e15, gamma: 1e9}\n    F: {omega: 1.2e15, gamma: 1e9}\n"
                 "  pump_power: {SH: 1e-3}\n")
    assert parse_config(p).params["length"] == 1e-4


def test_parse_errors(tmp_path):
    with pytest.raises(ValidationError, match="no such config"):
        parse_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: [unclosed\n")
    with pytest.raises(ValidationError, match="not valid"):
        parse_config(bad)


@pytest.mark.parametrize("kind", sorted(CONFIGS))
def test_emit_config_round_trip(kind):
    cfg = validate_config({"scenario": kind, "seed": 3, "params": CONFIGS[kind]})
    again = validate_config(yaml.safe_load(emit_config(cfg)))
    assert again == cfg
    assert emit_config(again) == emit_config(cfg)


def test_emit_plotdata(tmp_path):
    f = emit_plotdata(Table(("a", "b")), tmp_path / "empty.csv")
    assert f.read_bytes() == b"a,b\n"
    f = emit_plotdata({"columns": ["x"], "rows": [[0.1], [1 / 3]]}, tmp_path / "t.json")
    data = json.loads(f.read_text())
    assert data["rows"][1][0] == 1 / 3
    assert "0.33333333333333331" in f.read_text()
    f = emit_plotdata(Table(("x",), [[np.pi]]), tmp_path / "pi.txt", fmt="csv")
    assert float(read_csv(f)[1][0]) == np.pi
    with pytest.raises(PreconditionError):
        emit_plotdata(Table(("x",)), tmp_path / "t.xml")


def test_dumps_stable_sorted_and_exact():
    s = dumps_stable({"b": 0.1, "a": [1, 2.5], "c": {"z": None, "y": True}})
    assert s.index('"a"') < s.index('"b"') < s.index('"c"')
    assert json.loads(s) == {"a": [1, 2.5], "b": 0.1, "c": {"z": None, "y": True}}
    assert s.endswith("\n")


def test_jsa_csv_is_row_major(tmp_path):
    cfg = validate_config({"scenario": "waveguide-jsa", "params": CONFIGS["waveguide-jsa"]})
    run_scenario(cfg, tmp_path)
    rows = read_csv(tmp_path / "jsa.csv")
    assert rows[0] == ["omega1", "omega2", "re", "im"]
    body = np.array(rows[1:], dtype=float)
    n = cfg.params["points"]
    assert body.shape == (n * n, 4)
    w1, w2 = body[:, 0].reshape(n, n), body[:, 1].reshape(n, n)
    assert np.all(w1 == w1[:, :1]) and np.all(w2 == w2[:1, :])
    assert np.all(np.diff(w1[:, 0]) > 0) and np.all(np.diff(w2[0]) > 0)


def test_sweep_csv(tmp_path):
    cfg = validate_config({"scenario": "waveguide-sweep", "params": CONFIGS["waveguide-sweep"]})
    run_scenario(cfg, tmp_path)
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0] == ["phi", "n_magnus1", "n_magnus3", "n_full", "K_magnus3", "K_full"]
    assert [float(r[0]) for r in rows[1:]] == [0.5, 1.0]


def test_ring_spectrum_csv_and_manifest(tmp_path):
    cfg = validate_config({"scenario": "ring-spectrum", "params": CONFIGS["ring-spectrum"]})
    man = run_scenario(cfg, tmp_path)
    rows = read_csv(tmp_path / "spectrum.csv")
    assert rows[0] == ["omega", "S_min", "S_max", "S_at_phi"]
    assert len(rows) == 1 + cfg.params["omega_points"]
    body = np.array(rows[1:], dtype=float)
    assert np.all(body[:, 1] <= body[:, 3] + 1e-12) and np.all(body[:, 3] <= body[:, 2] + 1e-12)
    assert {f["name"] for f in man["files"]} == {"spectrum.csv", "summary.json"}
    for f in man["files"]:
        assert f["sha256"] == hashlib.sha256((tmp_path / f["name"]).read_bytes()).hexdigest()
    assert man["config"] == cfg.to_dict() and man["version"] == __version__
    assert json.loads((tmp_path / "manifest.json").read_text()) == json.loads(dumps_stable(man))


def test_mps_demo_without_coupling_stays_vacuum(tmp_path):
    cfg = validate_config({"scenario": "mps-demo", "params": {"gamma": 0.0, "n_bins": 20}})
    run_scenario(cfg, tmp_path)
    trace = json.loads((tmp_path / "trace.json").read_text())
    cols = trace["columns"]
    for row in trace["rows"]:
        rec = dict(zip(cols, row))
        assert rec["n_resonator"] == 0 and rec["n_bin"] == 0 and rec["bond"] == 1
    occ = np.array(read_csv(tmp_path / "occupations.csv")[1:], dtype=float)
    assert np.all(occ[:, 2] == 0)


def test_main_exit_codes(tmp_path, capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__

    good = write(tmp_path, {"scenario": "gaussian-adhoc", "params": {"modes": 2, "steps": 20}})
    assert main(["validate", str(good)]) == 0
    shown = yaml.safe_load(capsys.readouterr().out)
    assert shown["params"]["harmonics"] == 3

    out = tmp_path / "run"
    assert main(["run", str(good), "--out", str(out), "--seed", "5"]) == 0
    printed = capsys.readouterr().out
    assert "state.json" in printed and (out / "manifest.json").is_file()
    assert json.loads((out / "manifest.json").read_text())["config"]["seed"] == 5

    data = json.loads(json.dumps(RING))
    data["params"]["resonances"]["SH"] = {"omega": 2.4e15, "sigma": 1.2}
    data["bogus"] = 1
    assert main(["validate", str(write(tmp_path, data, "bad.yaml"))]) == 2
    err = capsys.readouterr().err
    assert "gamma_from_sigma" in err and "unknown key" in err
    assert main(["run", str(good), "--jobs", "0"]) == 2


def test_main_solver_failure(tmp_path, capsys):
    # far above threshold the steady state is unstable
    data = json.loads(json.dumps(RING))
    data["params"].update({"lam": 1e6, "length": 1e-4, "points": 256, "pump_power": {"SH": 10.0}})
    path = write(tmp_path, data)
    assert main(["validate", str(path)]) == 0
    capsys.readouterr()
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 3
    assert "solver failure" in capsys.readouterr().err


def _run_or_solver_failure(data, tmp_path):
    """Configs that validate must not trip a downstream precondition."""
    try:
        cfg = validate_config(data)
    except ValidationError:
        return
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            run_scenario(cfg, tmp_path)
    except ScenarioError as exc:
        assert not isinstance(exc.__cause__, PreconditionError), str(exc)


finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(gamma=st.floats(0, 2, **finite), dt=st.floats(0.01, 0.3, **finite), n_bins=st.integers(1, 25),
       cutoff=st.integers(2, 6), D_max=st.integers(1, 6), amplitude=st.floats(-3, 3, **finite),
       kerr=st.floats(-1, 1, **finite), initial=st.integers(0, 2), delta=st.floats(-2, 2, **finite))
def test_fuzz_mps_demo(tmp_path, gamma, dt, n_bins, cutoff, D_max, amplitude, kerr, initial, delta):
    _run_or_solver_failure({"scenario": "mps-demo", "params": {
        "gamma": gamma, "dt": dt, "n_bins": n_bins, "cutoff": cutoff, "D_max": D_max, "delta": delta,
        "drive": {"amplitude": amplitude}, "kerr": kerr, "initial_photons": initial}}, tmp_path)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(modes=st.integers(1, 4), steps=st.integers(1, 40), t_span=st.floats(0, 3, **finite),
       amplitude=st.floats(0, 3, **finite), harmonics=st.integers(1, 4), seed=st.integers(0, 2**32))
def test_fuzz_gaussian_adhoc(tmp_path, modes, steps, t_span, amplitude, harmonics, seed):
    _run_or_solver_failure({"scenario": "gaussian-adhoc", "seed": seed, "params": {
        "modes": modes, "steps": steps, "t_span": t_span, "amplitude": amplitude, "harmonics": harmonics}},
        tmp_path)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(phi=st.floats(0.01, 2, **finite), ratio=st.floats(3, 20, **finite), tau=st.floats(0.5, 3, **finite),
       half_window=st.floats(10, 24, **finite), half=st.integers(1, 12),
       t_span=st.sampled_from([1.0, 4.0, 10.0]), dt=st.sampled_from([0.1, 0.5]))
def test_fuzz_waveguide_jsa(tmp_path, phi, ratio, tau, half_window, half, t_span, dt):
    _run_or_solver_failure({"scenario": "waveguide-jsa", "params": {
        "phi": phi, "length": ratio * tau, "tau": tau, "half_window": half_window, "points": 2 * half + 1,
        "t_span": t_span, "dt": dt}}, tmp_path)
