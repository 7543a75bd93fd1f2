import json
import math
import subprocess
import sys

import numpy as np
import pytest

from hsmc import build_spectrum, compose, expected_purity_exact
from hsmc.cli import main

C1_YAML = """
gas:
  levels: [[0, 2], [1, 2]]
container:
  levels: [[0, 4], [1, 4]]
constraint:
  kind: microcanonical
  gas_weights: [0.5, 0.5]
  container_weights: [0.5, 0.5]
run:
  seed: 7
  n_samples: 400
"""

LUBKIN_YAML = """
gas:
  levels: [[0, 2]]
container:
  levels: [[0, 2]]
constraint:
  kind: microcanonical
  gas_weights: [1.0]
  container_weights: [1.0]
run:
  seed: 11
  n_samples: 1000
"""

GEOMETRIC_YAML = """
gas:
  levels: [[0, 1], [1, 1], [2, 1]]
container:
  levels: [[0, 1], [1, 2], [2, 4], [3, 8], [4, 16], [5, 32], [6, 64], [7, 128], [8, 256]]
constraint:
  kind: canonical
  weights: [[8, 1.0]]
run:
  seed: 3
  n_samples: 200
"""

CANONICAL_EVOLVE_YAML = """
gas:
  levels: [[0, 1], [1, 3]]
container:
  levels: [[0, 2], [1, 2]]
constraint:
  kind: canonical
  gas_weights: [0.5, 0.5]
  container_weights: [0.5, 0.5]
run:
  seed: 19
  coupling: 0.5
  t_max: 50
  n_times: 51
"""

MOMENTS_YAML = """
moments:
  R: 1.0
  d: 4
  u_l: 0
  u_m: 2
run:
  seed: 13
  n_samples: 20000
"""


def write_config(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv_table(path):
    """Parse a CSV artifact into (column names, float matrix)."""
    rows = []
    names = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if names is None:
                names = line.split(",")
            else:
                rows.append([float(c) for c in line.split(",")])
    return names, np.array(rows)


def read_summary(path):
    """summary.csv rows keyed by measure name."""
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("measure,"):
                continue
            name, mean, std_error, n, seed = line.split(",")
            out[name] = (float(mean), float(std_error), int(n), int(seed))
    return out


# ------------------------------------------------------------------ predict

def test_predict_lubkin_config(tmp_path):
    cfg = write_config(tmp_path, LUBKIN_YAML)
    out = tmp_path / "out"
    assert main(["predict", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "report.json").read_text())
    pred = report["predictions"]
    assert pred["lubkin_average"] == pytest.approx(0.8)
    assert pred["expected_purity_exact"] == pytest.approx(0.8)
    # the 2-dim gas at full weight: maximally mixed has purity 1/2
    assert pred["min_purity"] == pytest.approx(0.5)
    assert pred["max_entropy"] == pytest.approx(math.log(2))


def test_predict_matches_library_call(tmp_path):
    cfg = write_config(tmp_path, C1_YAML)
    out = tmp_path / "out"
    assert main(["predict", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "report.json").read_text())
    comp = compose(build_spectrum([(0, 2), (1, 2)]), build_spectrum([(0, 4), (1, 4)]))
    want = expected_purity_exact(comp, [0.5, 0.5], [0.5, 0.5])
    assert report["predictions"]["expected_purity_exact"] == want


def test_predict_geometric_container_temperature(tmp_path):
    cfg = write_config(tmp_path, GEOMETRIC_YAML)
    out = tmp_path / "out"
    assert main(["predict", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "report.json").read_text())
    dominant = report["predictions"]["dominant"]
    assert abs(dominant["kT"] - 1 / math.log(2)) < 1e-6
    assert dominant["fit_residual"] < 1e-10
    np.testing.assert_allclose(dominant["marginal_gas"], [4 / 7, 2 / 7, 1 / 7],
                               atol=1e-12)
    # canonical constraints fix no per-level gas weights up front
    assert report["predictions"]["min_purity"] is None


def test_run_header_in_every_artifact(tmp_path):
    cfg = write_config(tmp_path, LUBKIN_YAML)
    out = tmp_path / "out"
    main(["predict", "--config", cfg, "--out", str(out), "--quiet"])
    run = json.loads((out / "run.json").read_text())
    assert set(run) == {"version", "command", "config_hash", "config"}
    assert run["command"] == "predict"
    assert len(run["config_hash"]) == 64
    assert run["config"]["run"]["seed"] == 11


# ------------------------------------------------------------------- sample

def test_sample_deterministic_bytes(tmp_path):
    cfg = write_config(tmp_path, LUBKIN_YAML)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["sample", "--config", cfg, "--n", "1", "--out", str(out_a),
                 "--quiet"]) == 0
    assert main(["sample", "--config", cfg, "--n", "1", "--out", str(out_b),
                 "--quiet"]) == 0
    assert (out_a / "samples.csv").read_bytes() == (out_b / "samples.csv").read_bytes()


def test_sample_seed_override_changes_draws(tmp_path):
    cfg = write_config(tmp_path, LUBKIN_YAML)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    main(["sample", "--config", cfg, "--n", "5", "--out", str(out_a), "--quiet"])
    main(["sample", "--config", cfg, "--n", "5", "--seed", "999",
          "--out", str(out_b), "--quiet"])
    _, table_a = read_csv_table(out_a / "samples.csv")
    _, table_b = read_csv_table(out_b / "samples.csv")
    assert not np.array_equal(table_a[:, 1], table_b[:, 1])


def test_sample_lubkin_mean(tmp_path):
    cfg = write_config(tmp_path, LUBKIN_YAML)
    out = tmp_path / "out"
    assert main(["sample", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    summary = read_summary(out / "summary.csv")
    mean, std_error, n, seed = summary["purity"]
    assert abs(mean - 0.8) < 4 * std_error
    assert n == 1000 and seed == 11


def test_sample_agrees_with_predict(tmp_path):
    cfg = write_config(tmp_path, C1_YAML)
    out_p, out_s = tmp_path / "p", tmp_path / "s"
    main(["predict", "--config", cfg, "--out", str(out_p), "--quiet"])
    main(["sample", "--config", cfg, "--out", str(out_s), "--quiet"])
    exact = json.loads((out_p / "report.json").read_text())[
        "predictions"]["expected_purity_exact"]
    mean, std_error, _, _ = read_summary(out_s / "summary.csv")["purity"]
    assert abs(mean - exact) < 4 * std_error


def test_sample_csv_layout(tmp_path):
    cfg = write_config(tmp_path, LUBKIN_YAML)
    out = tmp_path / "out"
    main(["sample", "--config", cfg, "--n", "3", "--out", str(out), "--quiet"])
    lines = (out / "samples.csv").read_text().splitlines()
    assert lines[0] == "# hsmc samples v1"
    assert lines[1].startswith("# config_hash=")
    assert lines[2] == "sample,purity,entropy"
    assert len(lines) == 6


# ------------------------------------------------------------------- evolve

def test_evolve_free_single_subspace_is_flat(tmp_path):
    yaml_text = """
gas:
  levels: [[0, 2], [1, 2]]
container:
  levels: [[0, 4], [1, 4]]
constraint:
  kind: microcanonical
  weights: [[0, 0, 1.0]]
run:
  seed: 5
  coupling: 0.0
  t_max: 10
  n_times: 21
  initial: sample
"""
    cfg = write_config(tmp_path, yaml_text)
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    names, table = read_csv_table(out / "trajectory.csv")
    for column in ("purity", "entropy", "energy", "v_eff"):
        series = table[:, names.index(column)]
        assert np.max(np.abs(series - series[0])) < 1e-12
    report = json.loads((out / "conservation.json").read_text())
    assert report["conservation"]["pass"] is True


def test_evolve_microcanonical_conservation(tmp_path):
    yaml_text = C1_YAML + "  coupling: 0.4\n  t_max: 50\n  n_times: 41\n"
    cfg = write_config(tmp_path, yaml_text)
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "conservation.json").read_text())["conservation"]
    assert report["pass"] is True
    assert report["drifts"]["subspace_weights"] < 1e-10
    assert report["commutator_norms"]["gas"] < 1e-12
    assert report["commutator_norms"]["container"] < 1e-12


def test_evolve_canonical_conservation_and_motion(tmp_path):
    cfg = write_config(tmp_path, CANONICAL_EVOLVE_YAML)
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "conservation.json").read_text())["conservation"]
    assert report["pass"] is True
    assert report["drifts"]["shell_weights"] < 1e-10
    assert report["commutator_norms"]["total"] < 1e-12
    names, table = read_csv_table(out / "trajectory.csv")
    gas_col = table[:, names.index("wA_0")]
    assert np.max(np.abs(gas_col - gas_col[0])) > 1e-3


def test_evolve_tight_tolerance_exits_3(tmp_path, capsys):
    yaml_text = CANONICAL_EVOLVE_YAML + "  conservation_tolerance: 1e-18\n"
    cfg = write_config(tmp_path, yaml_text)
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out), "--quiet"]) == 3
    assert "validation" in capsys.readouterr().err
    # artifacts are still written so the failure can be inspected
    report = json.loads((out / "conservation.json").read_text())["conservation"]
    assert report["pass"] is False
    assert report["breaches"]


def test_evolve_rerun_identical_bytes(tmp_path):
    cfg = write_config(tmp_path, CANONICAL_EVOLVE_YAML)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    main(["evolve", "--config", cfg, "--out", str(out_a), "--quiet"])
    main(["evolve", "--config", cfg, "--out", str(out_b), "--quiet"])
    # results carry no trace of where they were written
    assert (out_a / "trajectory.csv").read_bytes() == (out_b / "trajectory.csv").read_bytes()
    # the JSON report echoes the resolved config (including output.dir), so
    # byte identity holds for reruns into the same location
    first = (out_a / "conservation.json").read_bytes()
    main(["evolve", "--config", cfg, "--out", str(out_a), "--quiet"])
    assert (out_a / "conservation.json").read_bytes() == first


def test_evolve_dump_states_round_trip(tmp_path):
    yaml_text = CANONICAL_EVOLVE_YAML.replace("n_times: 51", "n_times: 3")
    yaml_text += "  dump_states: true\n"
    cfg = write_config(tmp_path, yaml_text)
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    from hsmc import read_amplitudes_csv
    comp = compose(build_spectrum([(0, 1), (1, 3)]), build_spectrum([(0, 2), (1, 2)]))
    state = read_amplitudes_csv(str(out / "states" / "state_00000.csv"), comp)
    names, table = read_csv_table(out / "trajectory.csv")
    assert state.purity() == pytest.approx(table[0][names.index("purity")])


# ------------------------------------------------------------------ moments

def test_moments_command(tmp_path):
    cfg = write_config(tmp_path, MOMENTS_YAML)
    out = tmp_path / "out"
    assert main(["moments", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "moments.json").read_text())["moment"]
    assert report["exact"] == pytest.approx(0.25)
    assert abs(report["mc_mean"] - report["exact"]) < 5 * report["mc_std_error"]
    assert abs(report["z_score"]) < 5


def test_moments_odd_exponent_zero(tmp_path):
    yaml_text = MOMENTS_YAML.replace("u_m: 2", "u_m: 1")
    cfg = write_config(tmp_path, yaml_text)
    out = tmp_path / "out"
    assert main(["moments", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "moments.json").read_text())["moment"]
    assert report["exact"] == 0.0
    assert abs(report["mc_mean"]) < 5 * report["mc_std_error"]


# ------------------------------------------------------------- config errors

@pytest.mark.parametrize("mangle, hint", [
    (lambda t: t.replace("  seed: 11\n", ""), "seed"),
    (lambda t: t.replace("gas_weights: [1.0]", "gas_weights: [0.9]"), "sum"),
    (lambda t: t.replace("kind: microcanonical", "kind: grand"), "kind"),
    (lambda t: t.replace("constraint:\n", "ignored:\n"), "constraint"),
    (lambda t: t.replace("gas:\n", "fog:\n"), "gas"),
])
def test_config_errors_exit_2(tmp_path, capsys, mangle, hint):
    cfg = write_config(tmp_path, mangle(LUBKIN_YAML))
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--quiet"]) == 2
    assert hint in capsys.readouterr().err


def test_unknown_subspace_weight_exits_2(tmp_path, capsys):
    yaml_text = """
gas:
  levels: [[0, 2]]
container:
  levels: [[0, 2]]
constraint:
  kind: microcanonical
  weights: [[3, 0, 1.0]]
run:
  seed: 1
"""
    cfg = write_config(tmp_path, yaml_text)
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--quiet"]) == 2
    assert "inconsistent" in capsys.readouterr().err


def test_both_weight_styles_rejected(tmp_path, capsys):
    yaml_text = LUBKIN_YAML.replace(
        "  container_weights: [1.0]\n",
        "  container_weights: [1.0]\n  weights: [[0, 0, 1.0]]\n")
    cfg = write_config(tmp_path, yaml_text)
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--quiet"]) == 2
    assert "not both" in capsys.readouterr().err


def test_moments_missing_section_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "run:\n  seed: 1\n")
    assert main(["moments", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--quiet"]) == 2
    assert "moments" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["predict", "--config", str(tmp_path / "absent.yaml"),
                 "--out", str(tmp_path / "o"), "--quiet"]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_product_initial_needs_product_constraint(tmp_path, capsys):
    yaml_text = """
gas:
  levels: [[0, 2], [1, 2]]
container:
  levels: [[0, 4], [1, 4]]
constraint:
  kind: microcanonical
  weights: [[0, 0, 0.5], [1, 1, 0.5]]
run:
  seed: 5
  coupling: 0.2
  n_times: 11
  t_max: 5
"""
    cfg = write_config(tmp_path, yaml_text)
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--quiet"]) == 2
    assert "initial" in capsys.readouterr().err


def test_quiet_flag_suppresses_stdout(tmp_path, capsys):
    cfg = write_config(tmp_path, LUBKIN_YAML)
    main(["predict", "--config", cfg, "--out", str(tmp_path / "o"), "--quiet"])
    assert capsys.readouterr().out == ""
    main(["predict", "--config", cfg, "--out", str(tmp_path / "o2")])
    assert "min_purity" in capsys.readouterr().out


def test_module_entry_point_smoke(tmp_path):
    cfg = write_config(tmp_path, MOMENTS_YAML.replace("n_samples: 20000",
                                                      "n_samples: 500"))
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "hsmc.cli", "moments", "--config", cfg,
         "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "exact=0.25" in proc.stdout
    assert (out / "moments.json").exists()
