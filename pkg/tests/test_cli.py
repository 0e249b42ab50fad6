import json

import numpy as np
import pytest

from braidline.cli import (
    CHECKS,
    DEFAULT_CONFIG,
    ConfigError,
    config_hash,
    load_config,
    main,
)


def run(args):
    return main(args)


def test_print_defaults(capsys):
    assert run(["--print-defaults"]) == 0
    out = capsys.readouterr().out
    assert json.loads(out) == DEFAULT_CONFIG


def test_no_command_is_usage_error(capsys):
    assert run([]) == 2


def test_config_defaults_and_merge(tmp_path):
    cfg = load_config(None)
    assert cfg == DEFAULT_CONFIG
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"ctx": {"q": 0.8}, "mass": 2.0}))
    cfg = load_config(str(path))
    assert cfg["ctx"]["q"] == 0.8
    assert cfg["mass"] == 2.0
    assert cfg["lattice"] == DEFAULT_CONFIG["lattice"]


def test_config_hash_is_stable(tmp_path):
    a = load_config(None)
    b = load_config(None)
    assert config_hash(a) == config_hash(b)


def test_bad_q_exits_2_with_field(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"ctx": {"q": -1.0}}))
    code = run(["basis", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"
    assert err["field"] == "ctx.q"


def test_unknown_field_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"turbo": True}))
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_invalid_json_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_validation_fields(tmp_path):
    cases = [
        ({"lattice": {"x0": -1.0}}, "lattice.x0"),
        ({"lattice": {"j_min": 5, "j_max": 1}}, "lattice.j_min"),
        ({"mass": 0.0}, "mass"),
        ({"potential": {"shape": "cubic"}}, "potential.shape"),
        ({"potential": {"epsilon": -0.1}}, "potential.epsilon"),
        ({"eps_sweep": []}, "eps_sweep"),
        ({"born_order": -1}, "born_order"),
        ({"family": "S5"}, "family"),
        ({"dyson": {"tol": 0.0}}, "dyson.tol"),
        ({"dyson": {"n_modes": 1}}, "dyson.n_modes"),
    ]
    for override, field in cases:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(override))
        with pytest.raises(ConfigError) as exc:
            load_config(str(path))
        assert exc.value.field == field


def test_cmd_basis_outputs(tmp_path):
    out = tmp_path / "bout"
    assert run(["basis", "--out", str(out)]) == 0
    report = json.loads((out / "basis_report.json").read_text())
    assert report["modes"] == 50
    assert report["gram_defect"] <= 1e-12
    assert report["completeness_defect"] <= 1e-12
    assert (out / "basis.csv").exists()
    spectrum = (out / "spectrum.csv").read_text().splitlines()
    assert spectrum[0] == "mode,energy,momentum,parity"
    assert len(spectrum) == 51


def test_cmd_basis_qexp_report(tmp_path):
    out = tmp_path / "bq"
    assert run(["basis", "--qexp", "--out", str(out)]) == 0
    report = json.loads((out / "basis_report.json").read_text())
    assert "qexp" in report
    assert report["qexp"]["n_modes"] >= 1


def test_cmd_propagate_outputs(tmp_path):
    out = tmp_path / "pout"
    assert run(["propagate", "--out", str(out)]) == 0
    checks = (out / "propagator_checks.csv").read_text().splitlines()
    assert checks[0] == "variant,schrodinger_residual,boundary_defect"
    assert len(checks) == 9  # eight variants
    for line in checks[1:]:
        _, residual, boundary = line.split(",")
        assert float(residual) <= 1e-10
        assert float(boundary) <= 1e-12
    assert (out / "kernel_K1prime.csv").exists()


def test_cmd_scatter_zero_potential_identity(tmp_path):
    cfgp = tmp_path / "cfg.json"
    cfgp.write_text(json.dumps({"potential": {"shape": "none"},
                                "eps_sweep": [0.05]}))
    out = tmp_path / "sout"
    assert run(["scatter", "--config", str(cfgp), "--out", str(out)]) == 0
    rows = (out / "smatrix_S2minus_eps0.05.csv").read_text().splitlines()[1:]
    for row in rows:
        i, j, re, im = row.split(",")
        expect = 1.0 if i == j else 0.0
        assert float(re) == expect
        assert float(im) == 0.0


def test_cmd_scatter_trend_monotone(tmp_path):
    out = tmp_path / "strend"
    assert run(["scatter", "--out", str(out)]) == 0
    lines = (out / "unitarity_trend.csv").read_text().splitlines()[1:]
    defects = [float(line.split(",")[1]) for line in lines]
    rowdevs = [float(line.split(",")[2]) for line in lines]
    for earlier, later in zip(defects, defects[1:]):
        assert later <= earlier * 1.2
    for defect, rowdev in zip(defects, rowdevs):
        assert rowdev <= defect


def test_cmd_dyson_outputs(tmp_path):
    out = tmp_path / "dout"
    assert run(["dyson", "--out", str(out)]) == 0
    report = json.loads((out / "dyson_report.json").read_text())
    assert report["unitarity_drift"] <= 1e-8
    assert report["smatrix_unitarity_defect"] <= 1e-6
    assert (out / "evolution.csv").exists()


def test_cmd_verify_all_pass_and_deterministic(tmp_path, capsys):
    out = tmp_path / "vout"
    assert run(["verify", "--out", str(out)]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    assert report["all_pass"]
    names = [c["check"] for c in report["checks"]]
    assert names == sorted(CHECKS)
    printed = capsys.readouterr().out
    for name in names:
        assert name in printed
    out2 = tmp_path / "vout2"
    assert run(["verify", "--out", str(out2)]) == 0
    a = (out / "verify_report.json").read_bytes()
    b = (out2 / "verify_report.json").read_bytes()
    assert a == b


def test_cmd_verify_only_filter(tmp_path):
    out = tmp_path / "vonly"
    assert run(["verify", "--only", "boundary", "--out", str(out)]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    assert [c["check"] for c in report["checks"]] == ["boundary"]


def test_cmd_verify_unknown_only(tmp_path, capsys):
    code = run(["verify", "--only", "nonsense", "--out", str(tmp_path / "x")])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["field"] == "only"


def test_cmd_verify_negative_control_in_report(tmp_path):
    out = tmp_path / "vneg"
    assert run(["verify", "--only", "unitarity_negative_control",
                "--out", str(out)]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    check = report["checks"][0]
    assert check["sense"] == "min"
    assert check["value"] >= check["tolerance"]


def test_scatter_outputs_byte_identical(tmp_path):
    cfgp = tmp_path / "cfg.json"
    cfgp.write_text(json.dumps({"eps_sweep": [0.05]}))
    outs = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        assert run(["scatter", "--config", str(cfgp), "--out", str(out)]) == 0
        outs.append((out / "smatrix_S2minus_eps0.05.csv").read_bytes())
    assert outs[0] == outs[1]
