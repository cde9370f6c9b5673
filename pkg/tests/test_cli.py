import csv
import json
import os

import pytest

from fedseca.bench import cli
from fedseca.bench.config import ConfigError, parse_config_text

MINIMAL = """\
seeds: [0]
task: {n_train: 400, n_test: 200}
federation: {rounds: 4, n_byzantine: 2}
defense: FedSECA
attack: IPM
"""


def write(tmp_path, text, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_minimal_run_writes_rows_and_summary(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["run", "--config", write(tmp_path, MINIMAL), "--out", str(out)])
    assert code == 0
    rows = read_csv(out / "rounds_seed0.csv")
    assert rows[0][:3] == ["round", "accuracy", "macro_f1"]
    assert "rho_10" in rows[0]
    assert len(rows) == 1 + 4
    summary = json.loads((out / "summary.json").read_text())
    assert list(summary) == sorted(summary)
    assert summary["seeds"] == [0]


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    for d in ("a", "b"):
        assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a/rounds_seed0.csv").read_bytes() == (tmp_path / "b/rounds_seed0.csv").read_bytes()
    assert (tmp_path / "a/summary.json").read_bytes() == (tmp_path / "b/summary.json").read_bytes()


def test_seed_override_is_recorded(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--config", write(tmp_path, MINIMAL), "--out", str(out), "--seed", "7"]) == 0
    assert os.path.exists(out / "rounds_seed7.csv")
    assert json.loads((out / "summary.json").read_text())["seeds"] == [7]


def test_unknown_defense_names_field(tmp_path, capsys):
    code = cli.main(["run", "--config", write(tmp_path, MINIMAL.replace("FedSECA", "foo"))])
    assert code == 1
    err = capsys.readouterr().err
    assert "defense" in err and "foo" in err and "line 4" in err


def test_unknown_key_is_rejected_with_line(tmp_path, capsys):
    text = MINIMAL.replace("rounds: 4", "rounds: 4, roundz: 3")
    assert cli.main(["run", "--config", write(tmp_path, text)]) == 1
    assert "federation.roundz (line 3)" in capsys.readouterr().err


def test_missing_file_and_bad_yaml(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "nope.yaml")]) == 1
    assert cli.main(["run", "--config", write(tmp_path, "task: [1, 2\n")]) == 1
    assert cli.main(["run"]) == 1


def test_invalid_values_are_config_errors():
    with pytest.raises(ConfigError, match="n_byzantine"):
        parse_config_text("federation: {n_clients: 3, n_byzantine: 3}\n")
    with pytest.raises(ConfigError, match="epsilon"):
        parse_config_text("attack: {kind: Scaling, params: {epsilon: 0}}\n")
    with pytest.raises(ConfigError, match="defense.params"):
        parse_config_text("defense: {kind: Krum, params: {neighbours: 3}}\n")


def test_aggregation_abort_is_runtime_failure(tmp_path, capsys):
    text = MINIMAL.replace("defense: FedSECA", "defense: FedAvg").replace("attack: IPM",
                                                                      "attack: {kind: Scaling, params: {epsilon: 1.0e308}}")
    assert cli.main(["run", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2
    assert "round 1" in capsys.readouterr().out


MATRIX = MINIMAL + """\
matrix:
  defenses: [FedAvg, {kind: FedSECA, label: FedSECA-raw, params: {use_vrs: false}}]
  attacks: [None, Scaling]
"""


def test_matrix_shape_and_parallel_determinism(tmp_path):
    cfg = write(tmp_path, MATRIX)
    assert cli.main(["matrix", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert cli.main(["matrix", "--config", cfg, "--out", str(tmp_path / "p"), "--jobs", "2"]) == 0
    long = read_csv(tmp_path / "s/results.csv")
    assert len(long) == 1 + 1 + 4
    wide = read_csv(tmp_path / "s/matrix.csv")
    assert wide[0] == ["defense", "None", "Scaling"]
    assert [r[0] for r in wide[1:]] == ["FedAvg", "FedSECA-raw"]
    for name in ("results.csv", "matrix.csv"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_matrix_failed_cell_gets_sentinel(tmp_path):
    text = MINIMAL + "matrix:\n  defenses: [FedAvg]\n  attacks: [{kind: Scaling, params: {epsilon: 1.0e308}}]\n"
    assert cli.main(["matrix", "--config", write(tmp_path, text), "--out", str(tmp_path / "m")]) == 0
    rows = read_csv(tmp_path / "m/results.csv")
    bad = [r for r in rows if r[1] == "Scaling"][0]
    assert bad[5] == "FAILED" and bad[7].startswith("error")


def test_sweep_rows(tmp_path):
    text = MINIMAL.replace("n_byzantine: 2", "n_byzantine: 2, n_clients: 8") + \
        "sweep: {byzantine: [1, 2, 3], defenses: [FedSECA], attack: Fang}\n"
    assert cli.main(["sweep-byz", "--config", write(tmp_path, text), "--out", str(tmp_path / "w")]) == 0
    wide = read_csv(tmp_path / "w/sweep_wide.csv")
    assert [r[0] for r in wide[1:]] == ["1", "2", "3"]


def test_bench_reports_pair_counter(tmp_path):
    text = MINIMAL + "bench: {k_values: [4, 8], dim: 50, repeats: 2, defenses: [FedAvg, FedSECA]}\n"
    assert cli.main(["bench", "--config", write(tmp_path, text), "--out", str(tmp_path / "b")]) == 0
    rows = read_csv(tmp_path / "b/bench.csv")
    seca = [r for r in rows if r[0] == "FedSECA"]
    assert [int(r[6]) for r in seca] == [16, 64]


def test_diag_scaling_one_and_ipm(tmp_path):
    text = MINIMAL.replace("attack: IPM", "attack: {kind: Scaling, params: {epsilon: 1.0}, jitter: false}")
    assert cli.main(["diag", "--config", write(tmp_path, text), "--out", str(tmp_path / "d")]) == 0
    rows = read_csv(tmp_path / "d/diag.csv")
    assert rows[0] == ["subject", "CS", "PCr", "KTau", "omega", "L2H", "L2B"]
    byz = [r for r in rows if r[0].startswith("byzantine")]
    assert len(byz) == 2
    for r in byz:
        assert all(abs(float(v) - 1) <= 1e-9 for v in r[1:5])
    assert cli.main(["diag", "--config", write(tmp_path, MINIMAL), "--out", str(tmp_path / "i")]) == 0
    for r in read_csv(tmp_path / "i/diag.csv")[1:3]:
        assert abs(float(r[1]) + 1) <= 1e-9 and float(r[4]) == -1.0


def test_diag_alie_lowers_concordance(tmp_path):
    text = MINIMAL.replace("attack: IPM", "attack: ALIE")
    assert cli.main(["diag", "--config", write(tmp_path, text), "--out", str(tmp_path / "d")]) == 0
    byz = [r for r in read_csv(tmp_path / "d/diag.csv") if r[0].startswith("byzantine")]
    for r in byz:
        assert float(r[4]) < 1
        assert 0.1 < float(r[6]) / float(r[5]) < 10


def test_oracle_check_exit_code(tmp_path, capsys, monkeypatch):
    from fedseca.bench import oracles
    monkeypatch.setattr(oracles, "SUITES", {"cw_trimmed_mean": oracles.suite_trimmed_mean})
    assert cli.main(["oracle-check", "--out", str(tmp_path)]) == 0
    assert "PASS cw_trimmed_mean  200/200" in capsys.readouterr().out
    broken = lambda seed=0: oracles.SuiteResult("broken", 200, 199, 1.0, "instance 3")
    monkeypatch.setattr(oracles, "SUITES", {"broken": broken})
    assert cli.main(["oracle-check"]) == 2


def test_jobs_must_be_positive(tmp_path):
    assert cli.main(["run", "--config", write(tmp_path, MINIMAL), "--jobs", "0"]) == 1
