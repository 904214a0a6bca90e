import json

import pytest

from pairlab.config import ExperimentConfig, apply_overrides, config_from_dict, load_config


def test_defaults_are_the_reference_run():
    cfg = ExperimentConfig()
    assert cfg.geometry.grid_side == 32
    assert cfg.geometry.angle_count == 60
    assert cfg.geometry.detector_count == 47
    assert cfg.data.noise_fraction == 0.1
    assert cfg.data.train_count == 2000
    assert cfg.lsi.max_iterations == 10


def test_round_trip_lossless(tmp_path):
    cfg = apply_overrides(ExperimentConfig(), ["train.learning_rate=0.0017", "masks.fraction=0.3"])
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    loaded = load_config(path)
    assert loaded == cfg
    assert loaded.to_dict() == cfg.to_dict()
    assert loaded.hash() == cfg.hash()


def test_overrides_dotted_paths():
    cfg = apply_overrides(ExperimentConfig(), ["train.epochs=3", "sweep.fractions=[0,0.5]"])
    assert cfg.train.epochs == 3
    assert cfg.sweep.fractions == (0, 0.5)


def test_override_unknown_path_rejected():
    with pytest.raises(ValueError, match="unknown config path"):
        apply_overrides(ExperimentConfig(), ["nope.key=1"])
    with pytest.raises(ValueError, match="key=value"):
        apply_overrides(ExperimentConfig(), ["trailing"])


def test_unknown_file_key_rejected():
    with pytest.raises(ValueError, match="unknown config key"):
        config_from_dict({"geometri": {}})


def test_hash_changes_with_content():
    a = ExperimentConfig()
    b = apply_overrides(a, ["data.seed=999"])
    assert a.hash() != b.hash()


def test_string_override_values_parse_as_strings():
    cfg = apply_overrides(ExperimentConfig(), ["sweep.mask_kind=block-columns"])
    assert cfg.sweep.mask_kind == "block-columns"


def test_json_document_shape():
    doc = json.loads(ExperimentConfig().to_json())
    assert set(doc) == {
        "geometry", "data", "masks", "model", "train", "lsi", "mlsi",
        "sweep", "tikhonov", "certify", "output_dir",
    }
