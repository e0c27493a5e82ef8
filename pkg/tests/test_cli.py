import importlib.resources
import json

import jsonschema
import numpy as np
import pytest

from stochom.cli import execute, main, resolve_config
from stochom.errors import ConfigError
from stochom.util import derive_seed


def load_schema(name):
    path = importlib.resources.files("stochom") / "schemas" / name
    return json.loads(path.read_text())


def validate(obj, schema_name):
    jsonschema.validate(obj, load_schema(schema_name))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# --- configuration validation ----------------------------------------------

def test_resolve_rejects_bad_fields():
    base = {"workflow": "homogenize", "medium": "smooth-trig"}
    with pytest.raises(ConfigError) as err:
        resolve_config({**base, "bogus": 1})
    assert err.value.field == "bogus"
    with pytest.raises(ConfigError) as err:
        resolve_config({**base, "numerics": {"R": 0}})
    assert err.value.field == "numerics.R"
    with pytest.raises(ConfigError) as err:
        resolve_config({**base, "numerics": {"windmills": 3}})
    assert err.value.field == "numerics.windmills"
    with pytest.raises(ConfigError) as err:
        resolve_config({**base, "workflow": "converge", "numerics": {}})
    assert err.value.field == "numerics.epsilons"
    with pytest.raises(ConfigError) as err:
        resolve_config({**base, "route": "direct"})
    assert err.value.field == "route"
    with pytest.raises(ConfigError) as err:
        resolve_config({**base, "medium": "no-such-fixture"})
    assert err.value.field == "medium"
    with pytest.raises(ConfigError) as err:
        resolve_config({**base, "diffeo": {"d": 3, "eta_max": 0.0}})
    assert err.value.field == "diffeo"
    with pytest.raises(ConfigError) as err:
        resolve_config({"workflow": "maxwell", "medium": "debye-laminate",
                        "numerics": {"p_list": [[0.0, 1.0]]}})
    assert err.value.field == "numerics.p_list"


def test_malformed_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["homogenize", "--config", str(bad)]) == 2
    report = json.loads(capsys.readouterr().err)
    assert report["error"] == "ConfigError"
    assert report["field"] == "config"


def test_nonelliptic_medium_surfaced(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"medium": "indefinite-test",
                               "output": str(tmp_path / "out")}))
    assert main(["inspect", "--config", str(cfg)]) == 1
    report = json.loads(capsys.readouterr().err)
    assert report["error"] == "NonElliptic"
    assert report["eigenvalue"] < 0
    assert len(report["y"]) == 2


# --- inspect ----------------------------------------------------------------

def test_inspect_identity_deformation(tmp_path):
    files, _ = execute({
        "workflow": "inspect",
        "medium": {"fixture": "smooth-trig", "params": {"d": 2}},
        "numerics": {"R": 4, "N": 2},
        "output": str(tmp_path),
    })
    payload = read_json(files[0])
    validate(payload, "inspect_output.schema.json")
    validate(payload["config"], "run_config.schema.json")
    deform = payload["results"]["deformation"]
    assert np.allclose(deform["mean_gradient"], np.eye(2))
    assert deform["c_phi"] == pytest.approx(1.0)
    assert deform["min_det_gradient"] == pytest.approx(1.0)
    assert deform["null_lagrangian"]["residual"] == pytest.approx(0.0, abs=1e-14)
    assert payload["results"]["medium"]["ellipticity_sampled_min"] > 0


def test_inspect_random_deformation_null_lagrangian(tmp_path):
    files, _ = execute({
        "workflow": "inspect",
        "medium": {"fixture": "smooth-trig", "params": {"d": 2}},
        "diffeo": {"d": 2, "eta_max": 0.1},
        "numerics": {"R": 64, "N": 4, "seed": 1},
        "output": str(tmp_path),
    })
    deform = read_json(files[0])["results"]["deformation"]
    check = deform["null_lagrangian"]
    assert check["residual"] <= 3.0 * check["combined_stderr"] + 1e-12
    assert deform["min_det_gradient"] > 0


# --- homogenize -------------------------------------------------------------

def test_homogenize_constant_medium(tmp_path, capsys):
    matrix = [[2.0, 0.3], [0.3, 1.5]]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "medium": {"fixture": "constant", "params": {"d": 2, "m": 1,
                                                     "matrix": matrix}},
        "diffeo": {"d": 2, "eta_max": 0.1},
        "numerics": {"R": 2, "N": 2, "h": 0.125},
        "output": str(tmp_path / "out"),
    }))
    assert main(["homogenize", "--config", str(cfg), "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert "top-level seed: 7" in out
    payload = read_json(tmp_path / "out" / "homogenize.json")
    validate(payload, "homogenize_output.schema.json")
    validate(payload["tensor"], "homogenized_tensor.schema.json")
    validate(payload["config"], "run_config.schema.json")
    assert payload["config"]["numerics"]["seed"] == 7
    assert payload["tensor"]["meta"]["seeds"] == [derive_seed(7, 0), derive_seed(7, 1)]
    values = np.array([complex(re, im) for re, im in payload["tensor"]["values"]])
    assert np.allclose(values.reshape(2, 2), matrix, atol=1e-8)
    csv_rows = (tmp_path / "out" / "homogenize.csv").read_text().strip().split("\n")
    assert len(csv_rows) == 2


# --- converge ---------------------------------------------------------------

def test_converge_laminate_csv_decreasing(tmp_path):
    files, _ = execute({
        "workflow": "converge",
        "medium": {"fixture": "laminate1d", "params": {"width": 0.125}},
        "numerics": {"h": 1.0 / 256.0, "R": 1, "N": 1, "seed": 0,
                     "epsilons": [0.25, 0.125, 0.0625], "resolution": 16},
        "output": str(tmp_path),
    })
    payload = read_json(files[0])
    validate(payload, "converge_output.schema.json")
    validate(payload["config"], "run_config.schema.json")
    csv_lines = (tmp_path / "converge.csv").read_text().strip().split("\n")
    header = csv_lines[0].split(",")
    col = header.index("l2_error")
    l2 = [float(r.split(",")[col]) for r in csv_lines[1:]]
    assert len(l2) == 3
    assert all(a > b for a, b in zip(l2, l2[1:]))


# --- maxwell ----------------------------------------------------------------

def maxwell_config(outdir, **extra):
    data = {
        "workflow": "maxwell",
        "medium": "debye-laminate",
        "diffeo": {"d": 3, "eta_max": 0.1},
        "numerics": {"N": 1, "R": 2, "h": 0.125, "seed": 3,
                     "p_list": [0.5, [1.0, 1.0]]},
        "output": str(outdir),
    }
    data.update(extra)
    return data


def test_maxwell_outputs_validate(tmp_path):
    files, _ = execute(maxwell_config(tmp_path))
    payload = read_json(tmp_path / "maxwell.json")
    validate(payload, "maxwell_output.schema.json")
    validate(payload["config"], "run_config.schema.json")
    assert payload["config"]["medium"]["kernels"][0]["family"] == "debye"
    per_p = read_json(tmp_path / "constitutive_000.json")
    validate(per_p, "constitutive.schema.json")
    assert per_p["meta"]["config"]["workflow"] == "maxwell"
    assert per_p["p"] == [0.5, 0.0]
    assert len(files) == 4  # summary json, two per-p files, csv
    csv_lines = (tmp_path / "maxwell.csv").read_text().strip().split("\n")
    assert len(csv_lines) == 3


def test_rerun_byte_identical(tmp_path):
    out = tmp_path / "run"
    names = ("maxwell.json", "constitutive_000.json", "constitutive_001.json",
             "maxwell.csv")
    execute(maxwell_config(out))
    first = {name: (out / name).read_bytes() for name in names}
    # rerun of the same config overwrites with identical bytes, regardless of
    # the thread count
    execute(maxwell_config(out, threads=2))
    for name in names:
        assert (out / name).read_bytes() == first[name]
