import json

import numpy as np

from app.cli import main
from app.core.errors import ConfigError, StageError, exit_code_for
from app.data.datagen import load_csv


def test_gen_blobs_writes_csv(tmp_path):
    spec = tmp_path / "blobs.json"
    spec.write_text(json.dumps({"n_classes": 3, "dim": 4, "samples_per_class": 5, "seed": 1}), encoding="utf-8")
    out = tmp_path / "data" / "blobs.csv"
    assert main(["gen-blobs", "--spec", str(spec), "--out", str(out)]) == 0
    data = load_csv(out)
    assert data.n_samples == 15 and data.n_classes == 3


def test_gen_blobs_bad_spec_exits_with_config_code(tmp_path):
    spec = tmp_path / "blobs.json"
    spec.write_text(json.dumps({"n_classes": 0, "dim": 4, "samples_per_class": 5}), encoding="utf-8")
    assert main(["gen-blobs", "--spec", str(spec), "--out", str(tmp_path / "x.csv")]) == 2


def test_run_and_report(desk_config, tmp_path, capsys):
    config = tmp_path / "desk.json"
    config.write_text(json.dumps(desk_config), encoding="utf-8")
    out = tmp_path / "run"
    code = main(["run", "--config", str(config), "--out", str(out), "--stage-through", "aalr", "--seed", "3"])
    assert code == 0
    capsys.readouterr()
    assert main(["report", "--in", str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["status"] == "completed"
    assert report["config"]["seed"] == 3
    assert report["config"]["stage_through"] == "aalr"
    assert report["baselines"] is not None and report["qka"] is None


def test_exit_codes(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["report", "--in", str(tmp_path)]) == 3

    csv_path = tmp_path / "one_class.csv"
    csv_path.write_text("f0,f1,label\n" + "".join(f"{i},{i * i},a\n" for i in range(6)), encoding="utf-8")
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"data_csv": str(csv_path), "d_pca": 1, "d_out": 1,
                                  "splits": {"train_per_class": 3, "val_per_class": 1, "test_per_class": 1}}),
                      encoding="utf-8")
    assert main(["run", "--config", str(config), "--out", str(tmp_path / "run")]) == 2


def test_unusable_output_dir_exits_with_data_code(desk_config, tmp_path):
    config = tmp_path / "desk.json"
    config.write_text(json.dumps(desk_config), encoding="utf-8")
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("", encoding="utf-8")
    assert main(["run", "--config", str(config), "--out", str(blocker / "run"), "--stage-through", "slr"]) == 3


def test_foreign_errors_map_to_exit_codes():
    assert exit_code_for(OSError("disk full")) == 3
    assert exit_code_for(np.linalg.LinAlgError("singular")) == 4
    assert exit_code_for(ValueError("bad input")) == 4
    assert StageError("qsvc[0]", np.linalg.LinAlgError("singular")).exit_code == 4
    assert StageError("artifacts", PermissionError("denied")).exit_code == 3
    assert StageError("data", ConfigError("bad")).exit_code == 2
