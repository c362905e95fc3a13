import json

import pytest
from pydantic import ValidationError

from config import settings
from config.run_config import RunConfig, SweepRange
from core.errors import InvalidArgumentError
from core.preset_manager import HyperparamPreset, PresetManager


# ------------------------------------------------------------------
#   RunConfig
# ------------------------------------------------------------------

def test_defaults_follow_settings():
    config = RunConfig()
    assert config.C == settings.DEFAULT_GROUPS
    assert config.lambda2 == settings.DEFAULT_LAMBDA2
    assert config.K == 7
    assert config.t == 2
    assert config.effective_beta == pytest.approx(1.0)
    assert RunConfig(lambda1=4.0).effective_beta == pytest.approx(0.25)
    assert RunConfig(lambda1=0.0).effective_beta == 1.0
    assert RunConfig(beta=3.0).effective_beta == 3.0


def test_invalid_values_are_rejected():
    for bad in ({"C": 1}, {"lambda2": -0.1}, {"batch_size": 5}, {"start_t": 0.001},
                {"p_main": 0.05, "C": 4}, {"unknown": 1}, {"c_max": 2}):
        with pytest.raises(ValidationError):
            RunConfig(**bad)


def test_auto_groups_need_resolution():
    config = RunConfig(C="auto")
    with pytest.raises(InvalidArgumentError):
        _ = config.groups
    assert RunConfig(C=5).groups == 5


def test_lambda2_accepts_auto():
    assert RunConfig(lambda2="auto").lambda2 == "auto"
    assert RunConfig().merged({"lambda2": "auto"}).merged({"lambda2": 2.5}).lambda2 == 2.5
    for bad in ("many", float("nan"), float("inf")):
        with pytest.raises(ValidationError):
            RunConfig(lambda2=bad)


def test_merged_ignores_none_and_revalidates():
    config = RunConfig().merged({"lambda2": 3.0, "epochs": None})
    assert config.lambda2 == 3.0
    assert config.epochs == settings.DEFAULT_EPOCHS
    with pytest.raises(ValidationError):
        config.merged({"epochs": 0})


def test_json_file_layers_on_a_base(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"lambda1": 2.0, "lambda2_sweep": "1:2:3"}))
    config = RunConfig.from_json_file(path, base=RunConfig(C=6))
    assert (config.C, config.lambda1) == (6, 2.0)
    assert config.lambda2_sweep.values() == [1.0, 1.5, 2.0]

    path.write_text("[1, 2]")
    with pytest.raises(InvalidArgumentError):
        RunConfig.from_json_file(path)


def test_output_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv(settings.OUTPUT_ROOT_ENV, str(tmp_path))
    assert RunConfig().output_root() == tmp_path
    assert RunConfig(out_dir="elsewhere").output_root().name == "elsewhere"


def test_sweep_range():
    sweep = SweepRange.parse("5:9:40")
    assert len(sweep.values()) == 40
    assert sweep.values()[0] == 5.0 and sweep.values()[-1] == 9.0
    assert str(sweep) == "5:9:40"
    assert SweepRange.parse("2:2:1").values() == [2.0]
    for bad in ("5:9", "a:b:c"):
        with pytest.raises(InvalidArgumentError):
            SweepRange.parse(bad)
    with pytest.raises(ValidationError):
        SweepRange(lo=3.0, hi=1.0, steps=4)


# ------------------------------------------------------------------
#   Presets
# ------------------------------------------------------------------

@pytest.fixture(scope="module")
def presets():
    return PresetManager.default()


def test_default_presets_cover_every_family(presets):
    assert len(presets.list_presets_for("two_moons_noise")) == 10
    assert len(presets.list_presets_for("TWO_MOONS_RHO")) == 9
    assert "HeartDisease" in presets.list_presets_for("real_fixed")
    assert "ALLAML-adaptive" in presets.list_presets_for("real_adaptive")
    assert presets.list_presets_for("") == presets.list_presets()


def test_two_moons_default_preset(presets):
    preset = presets.get_preset("moons-rho-0.95")
    assert (preset.C, preset.lambda1, preset.lambda2) == (12, 1.0, 6.2)
    assert preset.sweep == "5:9:40"
    config = RunConfig().merged(preset.to_overrides())
    assert config.rho == 0.95
    assert config.lambda2 == 6.2


def test_heart_disease_preset(presets):
    preset = presets.get_preset("HeartDisease")
    assert (preset.C, preset.lambda2, preset.epochs, preset.n_features) == (6, 1.87, 1000, 10)
    assert preset.lambda2_range == (1.5, 1.95, 45)


def test_unknown_preset(presets):
    with pytest.raises(InvalidArgumentError):
        presets.get_preset("nope")


def test_preset_validation():
    with pytest.raises(InvalidArgumentError):
        HyperparamPreset(name="x", family="images")
    with pytest.raises(InvalidArgumentError):
        HyperparamPreset(name="x", family="real_fixed", lambda2_range=(2.0, 1.0, 4))


def test_presets_save_and_reload(tmp_path, presets):
    path = tmp_path / "presets.json"
    presets.save_to_json(path)
    reloaded = PresetManager()
    reloaded.load_from_json(path)
    assert reloaded.list_presets() == presets.list_presets()
    assert reloaded.get_preset("Yale") == presets.get_preset("Yale")


def test_legacy_list_format(tmp_path):
    path = tmp_path / "presets.json"
    path.write_text(json.dumps([{"name": "tiny", "family": "real_fixed", "C": 3}]))
    pm = PresetManager()
    pm.load_from_json(path)
    assert pm.get_preset("tiny").C == 3

    path.write_text(json.dumps("nope"))
    with pytest.raises(InvalidArgumentError):
        pm.load_from_json(path)
