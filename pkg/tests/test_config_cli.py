import copy
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from regime_futures.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from regime_futures.config import load_config, parse_config
from regime_futures.errors import ConfigInvalid
from regime_futures.io import read_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def raw(name):
    return yaml.safe_load((CONFIGS / name).read_text(encoding="utf-8"))


def write_cfg(tmp_path, data, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def small_gbm(paths=3, **sim):
    data = raw("gbm_two_regime.yaml")
    data["numerics"]["dt"] = 0.01
    data["simulation"].update(paths=paths, **sim)
    return data


@pytest.mark.parametrize("name", ["gbm_two_regime.yaml", "xou_two_regime.yaml", "ce_curves.yaml"])
def test_shipped_configs_parse_and_round_trip(name):
    cfg = load_config(CONFIGS / name)
    again = parse_config(yaml.safe_load(cfg.dump()))
    assert again.to_dict() == cfg.to_dict()
    assert again.digest() == cfg.digest()


def test_table_values_loaded():
    cfg = load_config(CONFIGS / "gbm_two_regime.yaml")
    np.testing.assert_array_equal(cfg.q, [[-2.0, 2.0], [4.0, -4.0]])
    np.testing.assert_array_equal(cfg.qt, cfg.q)
    assert cfg.maturities == (0.6, 0.8) and cfg.horizon == 0.6 and cfg.gamma == 1.0
    assert cfg.switches == ((0.2, 1), (0.4, 2))
    fig = load_config(CONFIGS / "ce_curves.yaml")
    assert fig.gammas == (0.5, 2.0)


def test_matrix_and_flat_generators_agree():
    flat = raw("gbm_two_regime.yaml")
    mat = copy.deepcopy(flat)
    mat["measures"] = {"Q": [[-2, 2], [4, -4]]}
    assert parse_config(flat).digest() == parse_config(mat).digest()


@pytest.mark.parametrize("section,key,value,field", [
    ("model", "sigma_1", -0.2, "model"),
    ("model", "colour", 1, "model.colour"),
    ("portfolio", "Ttilde", 0.9, "portfolio.Ttilde"),
    ("portfolio", "gamma", 0, "portfolio.gamma"),
    ("numerics", "methods", ["trees"], "numerics.methods"),
    ("simulation", "i0", 3, "simulation.i0"),
    ("simulation", "switches", [[0.3, 2]], "simulation"),
    ("measures", "q12", -1, "measures"),
    ("output", "layout", "wide", "output.layout"),
])
def test_invalid_fields_are_named(section, key, value, field):
    data = raw("gbm_two_regime.yaml")
    data[section][key] = value
    with pytest.raises(ConfigInvalid) as info:
        parse_config(data)
    assert info.value.field == field


def test_unknown_section_and_unreadable_file(tmp_path):
    data = raw("gbm_two_regime.yaml")
    data["extras"] = {}
    with pytest.raises(ConfigInvalid):
        parse_config(data)
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.yaml")


def test_cli_exit_codes(tmp_path):
    bad = raw("gbm_two_regime.yaml")
    bad["model"]["sigma_2"] = 0.0
    assert main(["phi", "--config", write_cfg(tmp_path, bad), "--out", str(tmp_path / "a")]) \
        == EXIT_CONFIG
    degenerate = raw("gbm_two_regime.yaml")
    degenerate["model"]["mu_2"] = -0.225
    path = write_cfg(tmp_path, degenerate, "degenerate.yaml")
    assert main(["strategy", "--config", path, "--out", str(tmp_path / "b")]) == EXIT_NUMERIC
    assert main(["price", "--config", path, "--out", str(tmp_path / "c")]) == EXIT_OK
    assert main(["phi", "--config", path, "--out", str(tmp_path / "d"), "--seed", "-1"]) \
        == EXIT_CONFIG


def test_price_gbm_curves(tmp_path):
    assert main(["price", "--config", str(CONFIGS / "gbm_two_regime.yaml"), "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "gbm_curve_T2.csv")
    assert header == ["t", "regime", "g", "F"]
    last = data[data[:, 0] == 0.8]
    np.testing.assert_array_equal(last[:, 2], [1.0, 1.0])
    first = data[data[:, 0] == 0.0]
    np.testing.assert_allclose(first[:, 2], [0.9506857198120904, 1.0206188704582009], rtol=1e-13)
    manifest = json.loads((tmp_path / "manifest_price.json").read_text())
    assert manifest["config_sha256"] == load_config(CONFIGS / "gbm_two_regime.yaml").digest()
    assert sorted(manifest["outputs"]) == ["gbm_curve_T1.csv", "gbm_curve_T2.csv"]


def test_price_xou_surfaces(tmp_path):
    data = raw("xou_two_regime.yaml")
    data["numerics"].update(n_x=256, n_t=100)
    assert main(["price", "--config", write_cfg(tmp_path, data), "--out", str(tmp_path)]) == 0
    header, surf = read_csv(tmp_path / "surface_fst_T1.csv")
    assert header == ["t", "x", "regime", "F", "dF_dx"]
    term = surf[surf[:, 0] == 0.6]
    np.testing.assert_allclose(term[:, 3], np.exp(term[:, 1]), rtol=1e-15)
    lines = (tmp_path / "method_comparison.csv").read_text().splitlines()
    assert lines[0] == "maturity,method_a,method_b,max_rel_diff_central" and len(lines) == 3
    assert all(float(row.split(",")[-1]) < 1e-2 for row in lines[1:])


def test_ce_output(tmp_path):
    assert main(["ce", "--config", str(CONFIGS / "ce_curves.yaml"), "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "ce.csv")
    assert header == ["horizon", "regime", "gamma", "certainty_equivalent"]
    np.testing.assert_array_equal(data[data[:, 0] == 0.0][:, 3], [1.0] * 4)
    sel = (data[:, 0] == 1.0) & (data[:, 1] == 1) & (data[:, 2] == 0.5)
    assert data[sel, 3][0] == pytest.approx(1.0311133702511546, rel=1e-13)


def test_phi_and_strategy_outputs(tmp_path):
    cfg = str(CONFIGS / "gbm_two_regime.yaml")
    assert main(["phi", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, phi = read_csv(tmp_path / "phi.csv")
    assert header == ["t", "regime", "phi"] and np.all(phi[:, 2] <= 0)
    assert main(["strategy", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, pos = read_csv(tmp_path / "positions.csv")
    assert header == ["t", "regime", "x", "pi_1", "pi_2", "det_gamma"]
    before = pos[:, 0] < 0.6  # pi_2 vanishes at the horizon
    assert np.all(pos[:, 3] > 0) and np.all(pos[before, 4] < 0)


def test_csv_uses_full_precision(tmp_path):
    assert main(["phi", "--config", str(CONFIGS / "gbm_two_regime.yaml"), "--out", str(tmp_path)]) == 0
    row = (tmp_path / "phi.csv").read_text().splitlines()[1].split(",")
    assert row[1] == "1"
    assert float(row[2]) == float("%.17g" % float(row[2]))
    assert len(row[2].lstrip("-").replace(".", "").replace("e", "").lstrip("0")) >= 15


def test_simulate_outputs_and_manifest(tmp_path):
    path = write_cfg(tmp_path, small_gbm())
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "o"), "--seed", "7"]) == 0
    files = sorted((tmp_path / "o" / "paths").iterdir())
    assert [f.name for f in files] == ["path_000000.csv", "path_000001.csv", "path_000002.csv"]
    header, data = read_csv(files[0])
    assert header == ["t", "regime", "spot", "F_1", "F_2", "pi_1", "pi_2", "wealth",
                      "abs_det_gamma"]
    assert data[0, 7] == 1.0 and np.all(data[:, 8] > 0)
    manifest = json.loads((tmp_path / "o" / "manifest_simulate.json").read_text())
    assert manifest["seed"] == 7 and manifest["summary"]["paths"] == 3
    assert {"numpy", "scipy", "python", "regime_futures"} <= set(manifest["versions"])


def test_simulate_byte_identical_runs_and_threads(tmp_path):
    data = small_gbm(paths=300)
    data["simulation"].pop("switches")
    path = write_cfg(tmp_path, data)
    outs = []
    for name, workers in (("a", "1"), ("b", "1"), ("c", "3")):
        out = tmp_path / name
        assert main(["simulate", "--config", path, "--out", str(out), "--workers", workers,
                     "--layout", "long"]) == 0
        outs.append((out / "paths.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_long_layout_has_path_column(tmp_path):
    path = write_cfg(tmp_path, small_gbm(paths=2))
    assert main(["simulate", "--config", path, "--out", str(tmp_path), "--layout", "long"]) == 0
    header, data = read_csv(tmp_path / "paths.csv")
    assert header[0] == "path" and set(data[:, 0]) == {0.0, 1.0}
