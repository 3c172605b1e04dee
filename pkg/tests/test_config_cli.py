import json

import numpy as np
import pytest

from wgdro import cli, model
from wgdro.config import REFERENCE_GAMMAS, ConfigError, config_from_dict, parse_config
from wgdro.experiment import run_experiment


def write_config(tmp_path, csv_path, **extra):
    cfg = {"dataset": str(csv_path), "seeds": [42], "t_outer": 3, "t_rob": 2,
           "environments": ["natural"], "output_dir": str(tmp_path / "out")}
    cfg.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_defaults():
    cfg = config_from_dict({"dataset": "a.csv", "seeds": [42]})
    assert cfg.methods == ["erm", "dro", "gdro", "ours"]
    assert (cfg.eta_theta, cfg.eta_q, cfg.eta_z, cfg.t_outer, cfg.t_rob) == (0.1, 0.1, 0.05, 200, 100)
    assert cfg.gammas == [1e-4]


@pytest.mark.parametrize("raw, key", [
    ({"dataset": "a", "eta_theta": -1}, "eta_theta"),
    ({"dataset": "a", "methods": ["sgd"]}, "methods[0]"),
    ({"dataset": "a", "bogus": 1}, "bogus"),
    ({"seeds": [1]}, "dataset"),
    ({"dataset": "a", "environments": [2.0]}, "environments[0]"),
])
def test_validation_names_key(raw, key):
    with pytest.raises(ConfigError, match=key.replace("[", r"\[").replace("]", r"\]")):
        config_from_dict(raw)


def test_gamma_roundtrip(tmp_path):
    cfg = config_from_dict({"dataset": "/x.csv", "gammas": list(REFERENCE_GAMMAS)})
    p = tmp_path / "c.json"
    p.write_text(cfg.dumps())
    again = parse_config(p)
    assert again.gammas == list(REFERENCE_GAMMAS)
    assert again.to_dict() == cfg.to_dict()


def test_relative_dataset_path(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"dataset": "data/a.csv"}))
    assert parse_config(tmp_path / "c.json").dataset == str(tmp_path / "data" / "a.csv")


def test_single_row_results(tmp_path, synthetic_csv):
    cfg = parse_config(write_config(tmp_path, synthetic_csv, methods=["erm"]))
    result = run_experiment(cfg)
    lines = (tmp_path / "out" / "results.csv").read_text().splitlines()
    assert len(lines) == 2 and len(result.rows) == 1
    assert lines[0].startswith("method,seed,gamma,environment,average_acc,worst_acc,range_acc,acc_g0")


def test_rerun_byte_identical(tmp_path, synthetic_csv):
    cfg = parse_config(write_config(tmp_path, synthetic_csv, methods=["gdro", "ours"], gammas=[1.0, 0.01]))
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    for name in ("results.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    hist = sorted(p.name for p in (tmp_path / "a" / "history").iterdir())
    assert hist == ["gdro_seed42_gammanone.csv", "ours_seed42_gamma0.01.csv", "ours_seed42_gamma1.csv"]


def test_summary_std_over_seeds(tmp_path, synthetic_csv):
    cfg = parse_config(write_config(tmp_path, synthetic_csv, methods=["erm"], seeds=[1, 2, 3]))
    result = run_experiment(cfg)
    (s,) = result.summary
    vals = [r["worst_acc"] for r in result.rows]
    assert s["n_seeds"] == 3
    assert s["worst_acc_std"] == pytest.approx(np.std(vals, ddof=1))


def test_cli_train_and_evaluate(tmp_path, synthetic_csv, capsys):
    cfg = write_config(tmp_path, synthetic_csv)
    assert cli.main(["train", "--config", str(cfg), "--method", "ours", "--gamma", "0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "ours" and out["gamma"] == 0.5
    params = cli.load_params(out["params"])
    assert params.d_in == 6 and params.is_finite()
    assert cli.main(["evaluate", "--config", str(cfg), "--params", out["params"]]) == 0
    assert "natural" in json.loads(capsys.readouterr().out)


def test_params_roundtrip(tmp_path):
    p = model.init_params(0, 3, linear=True, loss_kind="score")
    cli.save_params(tmp_path / "p.npz", p)
    q = cli.load_params(tmp_path / "p.npz")
    np.testing.assert_array_equal(q.flatten(), p.flatten())
    assert q.loss_kind == "score"


def test_cli_output_dir_env(tmp_path, synthetic_csv, monkeypatch, capsys):
    monkeypatch.setenv("WGDRO_OUTPUT_DIR", str(tmp_path / "envout"))
    cfg = write_config(tmp_path, synthetic_csv, methods=["erm"])
    assert cli.main(["sweep", "--config", str(cfg)]) == 0
    assert (tmp_path / "envout" / "results.csv").is_file()


def test_cli_envs(tmp_path, synthetic_csv, capsys):
    cfg = write_config(tmp_path, synthetic_csv, environments=["natural", 0.9])
    assert cli.main(["envs", "--config", str(cfg), "--dump"]) == 0
    out = tmp_path / "out"
    lines = (out / "envs_seed42.csv").read_text().splitlines()
    assert lines[0] == "split,education,standardized,above_threshold,count,fraction"
    assert (out / "train_seed42.csv").is_file()


def test_cli_errors(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"dataset": "a.csv", "eta_theta": -1}))
    assert cli.main(["sweep", "--config", str(p)]) == 2
    assert "eta_theta" in capsys.readouterr().err
    p.write_text(json.dumps({"dataset": "missing.csv"}))
    assert cli.main(["sweep", "--config", str(p)]) == 2


def test_cli_verify_quick(capsys):
    code = cli.main(["verify", "--quick"])
    lines = capsys.readouterr().out.strip().splitlines()
    assert code == 0
    assert all(line.startswith("PASS ") for line in lines)


def test_cli_dataset_override(tmp_path, synthetic_csv):
    cfg = write_config(tmp_path, tmp_path / "missing.csv", methods=["erm"])
    assert cli.main(["sweep", "--config", str(cfg), "--dataset", str(synthetic_csv)]) == 0


def test_shipped_configs_parse():
    from pathlib import Path
    root = Path(__file__).resolve().parent.parent / "configs"
    for name in ("reduced.json", "full.json"):
        cfg = parse_config(root / name)
        assert cfg.dataset.endswith("adult.csv")
