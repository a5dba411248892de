import numpy as np
import pandas as pd
import pytest

from malafide import load
from malafide.artifacts import write_json
from malafide.detector import save_model
from malafide.dsp import dirac_filter, save_filter


def test_artifact_path(tmp_path):
    path = load.artifact_path(tmp_path, "filter", scorer_id="cm-a", attack_id="SA1", length=257)
    assert path == tmp_path / "filters" / "cm-a" / "SA1" / "L257.json"
    assert load.artifact_path(tmp_path, "cm_report", name="x") == tmp_path / "eval" / "x.cm.json"
    with pytest.raises(ValueError, match="Unknown artifact"):
        load.artifact_path(tmp_path, "nope")
    with pytest.raises(ValueError, match="needs field"):
        load.artifact_path(tmp_path, "filter", scorer_id="cm-a")


def test_missing_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load.load_manifest(tmp_path)
    with pytest.raises(FileNotFoundError):
        load.load_model(tmp_path, "cm-a")
    with pytest.raises(FileNotFoundError):
        load.load_filter(tmp_path, "cm-a", "SA1", 65)


def test_manifest_columns_checked(tmp_path):
    path = load.artifact_path(tmp_path, "manifest")
    path.parent.mkdir(parents=True)
    pd.DataFrame({"utterance_id": ["a"]}).to_csv(path, index=False)
    with pytest.raises(ValueError, match="lacks columns"):
        load.load_manifest(tmp_path)


def test_model_and_filters(tmp_path, small_model, rng):
    save_model(load.artifact_path(tmp_path, "model", scorer_id="small"), small_model)
    x = rng.normal(size=256)
    np.testing.assert_array_equal(load.load_model(tmp_path, "small").logits([x]), small_model.logits([x]))

    for attack in ("SA1", "SA2"):
        for length in (65, 129):
            path = load.artifact_path(tmp_path, "filter", scorer_id="small", attack_id=attack, length=length)
            save_filter(path, dirac_filter(length, attack_id=attack, scorer_id="small"))
    filters = load.load_filter_set(tmp_path, "small", ["SA1", "SA2"], 129)
    assert {a: f.length for a, f in filters.items()} == {"SA1": 129, "SA2": 129}

    write_json(
        load.artifact_path(tmp_path, "selection", scorer_id="small", attack_id="SA1"),
        {"selected_length": 65},
    )
    assert load.load_selected_filter(tmp_path, "small", "SA1").length == 65


def test_load_report(tmp_path):
    write_json(load.artifact_path(tmp_path, "cm_report", name="base"), {"value": 0.1})
    assert load.load_report(tmp_path, "cm_report", name="base") == {"value": 0.1}
    with pytest.raises(ValueError, match="not a JSON report"):
        load.load_report(tmp_path, "epochs", scorer_id="a", attack_id="SA1", length=65)
