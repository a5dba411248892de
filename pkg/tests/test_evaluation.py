import numpy as np
import pandas as pd
import pytest

from malafide.detector import ToyCmModel
from malafide.dsp import MalafideFilter, dirac_filter
from malafide.errors import ValidationError
from malafide.evaluation import (
    NO_FILTER,
    CmEvaluation,
    EvalConfig,
    artifact_attenuation_db,
    artifact_table,
    cm_score_table,
    evaluate_cm,
    evaluate_sasv,
    sasv_matrix,
    subsample_spoof_trials,
    transfer_matrix,
    trend_summary,
)

NOTCH_4K = np.array([0.5, 0.0, 1.0, 0.0, 0.5])


def perturbing_filter(attack_id, scorer_id="small"):
    coefficients = np.zeros(65)
    coefficients[32] = 1.0
    coefficients[33] = 0.4
    return MalafideFilter(coefficients, attack_id, scorer_id)


def cm_eval(scorer_id, eer, success=0.0, dirac=0.0):
    per_attack = pd.DataFrame({"attack_id": ["SA1"], "success_rate": [success], "dirac_success_rate": [dirac]})
    return CmEvaluation(scorer_id, pd.DataFrame(), eer, 0.0, per_attack)


def test_cm_score_table_filters_only_matching_spoofs(small_model, small_corpus):
    plain = cm_score_table(small_model, small_corpus)
    assert list(plain.columns) == ["trial_id", "label", "attack_id", "score"]
    assert len(plain) == len(small_corpus.rows("part2"))

    attacked = cm_score_table(small_model, small_corpus, {"SA1": perturbing_filter("SA1")})
    untouched = attacked["attack_id"] != "SA1"
    np.testing.assert_array_equal(attacked.loc[untouched, "score"], plain.loc[untouched, "score"])
    assert not np.array_equal(attacked.loc[~untouched, "score"], plain.loc[~untouched, "score"])


def test_cm_score_table_rejects_bad_filters(small_model, small_corpus):
    with pytest.raises(ValidationError, match="Unknown attack"):
        cm_score_table(small_model, small_corpus, {"SA7": dirac_filter(65)})
    with pytest.raises(ValidationError, match="sample-rate mismatch"):
        cm_score_table(small_model, small_corpus, {"SA1": dirac_filter(65, sample_rate=8000)})
    with pytest.raises(ValidationError):
        cm_score_table(small_model, small_corpus, partition="nowhere")


def test_dirac_filters_leave_eer_unchanged(small_model, small_corpus):
    baseline = evaluate_cm(small_model, small_corpus)
    dirac = evaluate_cm(small_model, small_corpus, {"SA1": dirac_filter(65), "SA2": dirac_filter(257)})
    assert dirac.eer == baseline.eer
    pd.testing.assert_series_equal(dirac.scores["score"], baseline.scores["score"])
    assert dirac.per_attack["filter_length"].tolist() == [65, 257]
    assert baseline.per_attack["filter_length"].tolist() == [0, 0]
    assert baseline.per_attack["distortion_db"].isna().all()
    np.testing.assert_array_equal(dirac.per_attack["success_rate"], dirac.per_attack["dirac_success_rate"])


def test_cm_report(small_model, small_corpus):
    report = evaluate_cm(small_model, small_corpus).to_dict()
    assert report["metric"] == "cm_eer"
    assert report["n_trials"] == {"bonafide": 2, "spoof": 4}
    assert {r["attack_id"] for r in report["per_attack"]} == {"SA1", "SA2"}


def test_subsample_spoof_trials():
    trials = pd.DataFrame({"label": ["target", "spoof", "spoof", "nontarget", "spoof", "spoof"]})
    half = subsample_spoof_trials(trials, 0.5, seed=1)
    assert (half["label"] == "spoof").sum() == 2
    assert (half["label"] != "spoof").sum() == 2
    pd.testing.assert_frame_equal(half, subsample_spoof_trials(trials, 0.5, seed=1))
    assert (subsample_spoof_trials(trials, 0.0)["label"] == "spoof").sum() == 0
    assert len(subsample_spoof_trials(trials, 1.0)) == 6
    with pytest.raises(ValidationError):
        subsample_spoof_trials(trials, 1.5)


def test_evaluate_sasv(small_model, small_corpus):
    result = evaluate_sasv(small_model, small_corpus)
    assert result.counts == {"target": 2, "nontarget": 2, "spoof": 4}
    assert {"cm_score", "asv_score", "fused_score"} <= set(result.trials.columns)
    assert 0.0 <= result.sasv_eer <= 1.0
    assert result.to_dict()["metric"] == "sasv_eer"

    no_spoofs = evaluate_sasv(small_model, small_corpus, config=EvalConfig(spoof_fraction=0.0))
    assert no_spoofs.counts["spoof"] == 0
    assert no_spoofs.breakdown["spf_eer"] is None
    assert no_spoofs.sasv_eer == no_spoofs.breakdown["sv_eer"]


def test_eval_config_validation():
    with pytest.raises(ValidationError):
        EvalConfig(spoof_fraction=2.0)
    with pytest.raises(ValidationError, match="catalog"):
        EvalConfig(sasv_length=100)
    with pytest.raises(ValidationError):
        EvalConfig(fusion_weights=(1.0, -1.0))
    with pytest.raises(ValidationError):
        EvalConfig(enrollment_per_speaker=0)


def test_transfer_matrix_layout(small_model, small_arch, small_corpus):
    other = ToyCmModel.initialize(small_arch, seed=4, scorer_id="other")
    scorers = {"small": small_model, "other": other}
    filter_sets = {("small", 65): {"SA1": dirac_filter(65), "SA2": dirac_filter(65)}}
    wide, long = transfer_matrix(small_corpus, scorers, filter_sets, [65, 129])

    assert list(wide.columns) == ["filter_length", "small→small", "other→small", "small→other", "other→other"]
    assert wide["filter_length"].tolist() == [NO_FILTER, "65", "129"]
    table = wide.set_index("filter_length")
    assert table.loc["65", "small→small"] == table.loc[NO_FILTER, "small→small"]
    assert table.loc["65", "small→other"] == table.loc[NO_FILTER, "small→other"]
    assert np.isnan(table.loc["65", "other→small"])
    assert table[["small→small", "other→other"]].loc["129"].isna().all()

    assert set(long["attack_id"]) == {"pooled", "SA1", "SA2"}
    assert set(long["filter_length"]) == {0, 65}


def test_sasv_matrix_layout(small_model, small_corpus):
    filters = {"small": {"SA1": dirac_filter(257), "SA2": dirac_filter(257)}}
    wide, long = sasv_matrix(small_corpus, {"small": small_model}, filters)
    assert list(wide.columns) == ["eval_scorer", NO_FILTER, "small"]
    assert wide.loc[0, NO_FILTER] == wide.loc[0, "small"]
    assert long["filter_length"].tolist() == [0, 257]


def test_artifact_attenuation():
    assert artifact_attenuation_db(dirac_filter(65), 4500.0, n_fft=512) == pytest.approx(0.0, abs=1e-9)
    notch = MalafideFilter(NOTCH_4K, "SA1", "small")
    assert artifact_attenuation_db(notch, 4000.0, n_fft=64) > 20.0


def test_artifact_table(small_corpus):
    filters = {"SA2": perturbing_filter("SA2"), "SA1": perturbing_filter("SA1")}
    table = artifact_table(small_corpus, filters, n_fft=512)
    assert table["attack_id"].tolist() == ["SA1", "SA2"]
    assert table["artifact_frequency_hz"].tolist() == [4500.0, 6500.0]
    assert (table["filter_length"] == 65).all()


def test_trend_summary_verdicts():
    artifacts = pd.DataFrame({"scorer_id": ["cm-a", "cm-a", "cm-a"], "attenuation_db": [5.0, 4.0, 1.0]})
    sasv_long = pd.DataFrame(
        {
            "eval_scorer": ["cm-a", "cm-a"],
            "filter_source": [NO_FILTER, "cm-a"],
            "sasv_eer": [0.05, 0.3],
            "asv_sv_eer": [0.1, 0.1],
        }
    )
    summary = trend_summary(
        cm_eval("cm-a", 0.02),
        cm_eval("cm-a", 0.3, success=0.8, dirac=0.1),
        cm_eval("cm-b", 0.03),
        cm_eval("cm-b", 0.2),
        sasv_long,
        artifacts,
    )
    assert summary["white_box_degrades"] is True
    assert summary["eer_factor"] == pytest.approx(15.0)
    assert summary["universal"] is True
    assert summary["transfers"] is True
    assert summary["sasv_degrades"] is True
    assert summary["artifact_attenuated"] is True
    assert summary["mean_attenuation_db"] == pytest.approx(10.0 / 3)


def test_trend_summary_without_optional_inputs():
    summary = trend_summary(cm_eval("cm-a", 0.0), cm_eval("cm-a", 0.0))
    assert summary["eer_factor"] is None
    assert summary["white_box_degrades"] is False
    assert summary["universal"] is False
    assert summary["transfers"] is None
    assert summary["sasv_degrades"] is None
    assert summary["artifact_attenuated"] is None
