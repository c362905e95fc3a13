import json

import mock
import numpy as np
import pytest

import main
from core.errors import NumericalError
from services import artifact_store

SMALL = ["--n", "60", "--d", "10", "--seed", "0"]
SMALL_TRAIN = SMALL + ["-C", "2", "--epochs", "2", "--batch-size", "30"]


@pytest.fixture
def dataset_dir(tmp_path):
    out = tmp_path / "data"
    assert main.main(["generate", *SMALL, "--out", str(out)]) == 0
    return out


def test_generate_writes_csv_and_meta(dataset_dir):
    assert (dataset_dir / "X.csv").is_file()
    meta = json.loads((dataset_dir / "meta.json").read_text())
    assert meta["true_groups"] == [[0, 1, 2, 3, 4], [5, 6, 7, 8, 9]]


def test_generate_is_reproducible(dataset_dir, tmp_path):
    again = tmp_path / "again"
    assert main.main(["generate", *SMALL, "--out", str(again)]) == 0
    assert (again / "X.csv").read_text() == (dataset_dir / "X.csv").read_text()


def test_choose_c_prints_the_choice(dataset_dir, tmp_path, capsys):
    out = tmp_path / "curve"
    code = main.main(["choose-c", "--data", str(dataset_dir / "X.csv"), "--c-max", "4", "--out", str(out)])
    assert code == 0
    assert "C=" in capsys.readouterr().out
    assert (out / artifact_store.CURVE_FILE).is_file()


def test_train_select_eval_pipeline(dataset_dir, tmp_path):
    run = tmp_path / "run"
    data_csv = str(dataset_dir / "X.csv")
    assert main.main(["train", "--data", data_csv, "-C", "2", "--epochs", "2",
                      "--batch-size", "30", "--out", str(run)]) == 0
    assert (run / artifact_store.CHECKPOINT_FILE).is_file()
    assert len(artifact_store.read_history(run / artifact_store.HISTORY_FILE)) == 2

    assert main.main(["select", "--checkpoint", str(run), "--min-features", "3"]) == 0
    selection = artifact_store.load_selection(run / artifact_store.SELECTION_FILE)
    assert len(selection.selected) >= 3

    assert main.main(["eval", "--data", data_csv, "--selection", str(run / artifact_store.SELECTION_FILE),
                      "--seeds", "2"]) == 0
    metrics = artifact_store.read_json(run / artifact_store.METRICS_FILE)
    assert metrics["n_selected"] == len(selection.selected)


def test_ls_baseline(dataset_dir, tmp_path):
    out = tmp_path / "ls"
    code = main.main(["ls-baseline", "--data", str(dataset_dir / "X.csv"), "--n-select", "4", "--out", str(out)])
    assert code == 0
    assert len(artifact_store.load_selection(out / artifact_store.SELECTION_FILE).selected) == 4


def test_gradcheck_exit_codes(capsys):
    assert main.main(["gradcheck"]) == 0
    assert "PASS" in capsys.readouterr().out

    from core import autodiff
    real_pdf = autodiff._normal_pdf

    def doubled(x):
        return 2.0 * real_pdf(x)

    with mock.patch("core.autodiff._normal_pdf", side_effect=doubled):
        assert main.main(["gradcheck"]) == 1


def test_usage_errors_exit_with_two():
    assert main.main(["frobnicate"]) == 2
    assert main.main(["choose-c", *SMALL, "--c-max", "2"]) == 2
    assert main.main(["train", *SMALL, "-C", "many"]) == 2


def test_missing_data_file_is_a_failure(tmp_path):
    assert main.main(["train", "--data", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "run")]) == 1


def test_aborted_training_keeps_its_checkpoint(tmp_path):
    run = tmp_path / "run"
    with mock.patch("core.optim.backward", side_effect=NumericalError("loss is nan")):
        assert main.main(["train", *SMALL_TRAIN, "--out", str(run)]) == 1
    assert artifact_store.read_json(run / artifact_store.CHECKPOINT_FILE)["aborted"] is True


def test_sweep_writes_a_summary(tmp_path):
    out = tmp_path / "sweep"
    assert main.main(["sweep", *SMALL_TRAIN, "--lambda2-sweep", "0.5:1:2", "--out", str(out)]) == 0
    rows = (out / artifact_store.SUMMARY_FILE).read_text().splitlines()
    assert len(rows) == 3
    assert np.isfinite(float(rows[1].split(",")[rows[0].split(",").index("mean_best_loss")]))


@pytest.fixture
def trained_run(dataset_dir, tmp_path):
    run = tmp_path / "auto-run"
    assert main.main(["train", "--data", str(dataset_dir / "X.csv"), "-C", "2", "--epochs", "2",
                      "--batch-size", "30", "--lambda2", "auto", "--out", str(run)]) == 0
    return run


def test_auto_lambda2_is_stored_as_a_number(trained_run):
    config = artifact_store.read_json(trained_run / artifact_store.CHECKPOINT_FILE)["config"]
    assert isinstance(config["lambda2"], float)
    assert config["lambda2"] >= 0.0


def test_budget_flags_conflicting_with_max_features(trained_run, capsys):
    for flag in (["--groups", "1"], ["--min-features", "3"]):
        code = main.main(["select", "--checkpoint", str(trained_run), *flag, "--max-features", "5"])
        assert code == 2
        assert "not allowed with argument" in capsys.readouterr().err
    assert not (trained_run / artifact_store.SELECTION_FILE).exists()


def test_preset_supplies_the_feature_budget(trained_run):
    assert main.main(["select", "--checkpoint", str(trained_run), "--preset", "moons-rho-0.95"]) == 0
    selection = artifact_store.load_selection(trained_run / artifact_store.SELECTION_FILE)
    assert selection.rule == "min_features=10"
    assert len(selection.selected) == 10


def test_select_without_any_budget_fails(trained_run):
    assert main.main(["select", "--checkpoint", str(trained_run)]) == 1
