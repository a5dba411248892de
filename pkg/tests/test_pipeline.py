import pandas as pd
import pytest

from malafide import load
from malafide.artifacts import read_json
from malafide.cli import run
from malafide.evaluation import NO_FILTER

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """One pipeline run with the shipped defaults: full corpus, both variants, every length."""
    run_dir = tmp_path_factory.mktemp("pipeline") / "run"
    with pytest.MonkeyPatch.context() as mp:
        for name in ("MALAFIDE_RUN_DIR", "MALAFIDE_SEED", "MALAFIDE_LOG_LEVEL"):
            mp.delenv(name, raising=False)
        code = run(["pipeline", "--run-dir", str(run_dir), "--seed", "0"])
    return run_dir, code


@pytest.fixture(scope="module")
def summary(default_run):
    run_dir, _ = default_run
    return read_json(run_dir / "tables" / "summary.json")


def test_pipeline_succeeds(default_run):
    _, code = default_run
    assert code == 0


def test_pipeline_layout(default_run):
    run_dir, _ = default_run
    resolved = (run_dir / "resolved_config.yaml").read_text()
    assert "- 65\n- 129\n- 257\n- 513\n- 1025" in resolved

    for scorer_id in ("cm-a", "cm-b"):
        assert load.artifact_path(run_dir, "model", scorer_id=scorer_id).exists()
        for attack in ("SA1", "SA2", "SA3", "SA4"):
            assert load.load_filter(run_dir, scorer_id, attack, 257).is_projected
            assert load.load_selected_filter(run_dir, scorer_id, attack).length in (65, 129, 257, 513, 1025)

    wide = pd.read_csv(load.artifact_path(run_dir, "transfer"))
    assert wide["filter_length"].tolist() == [NO_FILTER, "65", "129", "257", "513", "1025"]
    assert {"cm-a→cm-a", "cm-a→cm-b", "cm-b→cm-a", "cm-b→cm-b"} <= set(wide.columns)
    assert wide.drop(columns="filter_length").notna().all().all()

    sasv = pd.read_csv(load.artifact_path(run_dir, "sasv_matrix"))
    assert list(sasv.columns) == ["eval_scorer", NO_FILTER, "cm-a", "cm-b"]

    artifacts = pd.read_csv(load.artifact_path(run_dir, "artifacts"))
    assert len(artifacts) == 8


def test_trained_cms_reach_target_eer(default_run):
    run_dir, _ = default_run
    for scorer_id in ("cm-a", "cm-b"):
        record = read_json(load.artifact_path(run_dir, "training", scorer_id=scorer_id))
        assert not record["undertrained"]
        assert record["heldout_eer"] < 0.05


def test_white_box_attack_degrades_eer(summary):
    assert summary["scorer_id"] == "cm-a"
    assert summary["baseline_eer"] < 0.05
    assert summary["attacked_eer"] > summary["baseline_eer"]
    assert summary["white_box_degrades"] is True


def test_filters_are_universal(summary):
    assert summary["part2_success_rate"] > summary["dirac_part2_success_rate"]
    assert summary["universal"] is True


def test_filters_transfer_to_other_variant(summary):
    assert summary["transfer_scorer_id"] == "cm-b"
    assert summary["transfer_attacked_eer"] >= summary["transfer_baseline_eer"]
    assert summary["transfers"] is True


def test_sasv_eer_rises(summary):
    assert summary["asv_sv_eer"] < 0.15
    assert summary["sasv_degrades"] is True


def test_filters_attenuate_artifact_band(summary):
    assert summary["mean_attenuation_db"] > 0.0
    assert summary["artifact_attenuated"] is True
