from dataclasses import replace

import numpy as np
import pytest

from malafide.detector import (
    VARIANTS,
    CmArchitecture,
    DifferentiableScorer,
    ToyCmModel,
    TrainConfig,
    TrainingResult,
    cm_scores,
    input_gradient,
    load_model,
    save_model,
    score_logits,
    train_cm,
)
from malafide.dsp import Waveform
from malafide.errors import UndertrainedError, ValidationError
from malafide.metrics import compute_eer

EPS = 1e-6


def central_difference(f, x, idx):
    bumped = x.copy()
    bumped[idx] += EPS
    up = f(bumped)
    bumped[idx] -= 2 * EPS
    down = f(bumped)
    return (up - down) / (2 * EPS)


def score_of(model, x):
    lb_ls = model.logits([x])[0]
    return lb_ls[1] - lb_ls[0]


def test_model_satisfies_protocol(small_model):
    assert isinstance(small_model, DifferentiableScorer)
    assert small_model.expected_input_length == 256


def test_architecture_validation():
    with pytest.raises(ValidationError):
        CmArchitecture(conv1_channels=0)
    with pytest.raises(ValidationError):
        CmArchitecture(input_length=64)
    assert VARIANTS["a"].conv1_kernel == 64
    assert VARIANTS["b"].conv1_kernel == 48


def test_score_logits(small_model, rng):
    ls, lb = score_logits(small_model, Waveform(rng.normal(size=256)))
    assert np.isfinite(ls) and np.isfinite(lb)


def test_rejects_bad_inputs(small_model):
    with pytest.raises(ValidationError, match="sample-rate mismatch"):
        score_logits(small_model, Waveform(np.zeros(256), sample_rate=8000))
    with pytest.raises(ValidationError):
        small_model.logits([np.array([0.0, np.inf])])
    with pytest.raises(ValidationError):
        small_model.logits([np.array([])])


@pytest.mark.parametrize("length", [256, 200, 300])
def test_input_gradient_matches_finite_differences(small_model, rng, length):
    x = rng.normal(scale=0.3, size=length)
    grad = input_gradient(small_model, Waveform(x))
    assert grad.shape == (length,)
    coords = rng.choice(length, size=32, replace=False)
    fd = np.array([central_difference(lambda v: score_of(small_model, v), x, i) for i in coords])
    np.testing.assert_allclose(grad[coords], fd, rtol=1e-5, atol=1e-7)


def test_cropped_samples_have_zero_gradient(small_model, rng):
    x = rng.normal(scale=0.3, size=300)
    grad = input_gradient(small_model, Waveform(x))
    start = (300 - 256) // 2
    assert np.all(grad[:start] == 0.0)
    assert np.all(grad[start + 256 :] == 0.0)


def test_batched_matches_single(small_model, rng):
    signals = [rng.normal(scale=0.3, size=256) for _ in range(5)]
    batched, grads = small_model.score_and_gradient(signals)
    for s, score, g in zip(signals, batched, grads):
        assert score == pytest.approx(score_of(small_model, s), abs=1e-12)
        np.testing.assert_allclose(g, input_gradient(small_model, Waveform(s)), atol=1e-12)


def test_zero_model(small_arch, rng):
    model = ToyCmModel.zeros(small_arch)
    x = Waveform(rng.normal(size=256))
    assert score_logits(model, x) == (0.0, 0.0)
    np.testing.assert_array_equal(input_gradient(model, x), np.zeros(256))


def test_scoring_is_deterministic_and_frozen(small_model, rng):
    x = rng.normal(size=256)
    first = small_model.logits([x])
    small_model.score_and_gradient([x])
    np.testing.assert_array_equal(small_model.logits([x]), first)
    with pytest.raises(ValueError):
        small_model.params["w1"][0, 0] = 1.0


def test_parameter_gradients_match_finite_differences(small_model, rng):
    signals = [rng.normal(scale=0.3, size=256) for _ in range(4)]
    labels = np.array([1, 0, 1, 0])
    _, grads = small_model.loss_and_grads(signals, labels)
    for name, idx in [("w3", (1, 2)), ("b3", (0,)), ("w2", (0, 1, 2)), ("b1", (1,)), ("w1", (0, 3))]:
        base = small_model.params[name].copy()

        def loss_at(value):
            shifted = base.copy()
            shifted[idx] = value
            return small_model.with_params(**{name: shifted}).loss_and_grads(signals, labels)[0]

        fd = (loss_at(base[idx] + EPS) - loss_at(base[idx] - EPS)) / (2 * EPS)
        assert grads[name][idx] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_model_json_round_trip(tmp_path, small_model, rng):
    path = save_model(tmp_path / "m.json", small_model)
    back = load_model(path)
    x = rng.normal(size=256)
    np.testing.assert_array_equal(back.logits([x]), small_model.logits([x]))
    assert back.scorer_id == "small"


def test_cm_scores_are_logit_differences(small_model, rng):
    signals = [rng.normal(size=256) for _ in range(3)]
    logits = small_model.logits(signals)
    np.testing.assert_array_equal(cm_scores(small_model, signals), logits[:, 1] - logits[:, 0])


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(variant="z")
    with pytest.raises(ValidationError):
        TrainConfig(epochs=5, max_epochs=2)


def test_undertrained_result(small_model):
    result = TrainingResult(small_model, heldout_eer=0.2, threshold=0.05)
    assert result.undertrained
    with pytest.raises(UndertrainedError, match="0.2000") as excinfo:
        result.raise_if_undertrained()
    assert excinfo.value.achieved_eer == 0.2
    assert not TrainingResult(small_model, 0.01, 0.05).undertrained


def test_training_is_deterministic(small_corpus):
    bona = small_corpus.waveforms("cm-train", "bonafide")
    spoof = small_corpus.waveforms("cm-train", "spoof")
    config = TrainConfig(epochs=1, max_epochs=1, batch_size=4, variant="b", seed=5)
    first = train_cm(bona, spoof, config)
    second = train_cm(bona, spoof, config)
    for name, value in first.model.params.items():
        np.testing.assert_array_equal(value, second.model.params[name])
    assert len(first.history) == 1
    assert first.model.scorer_id == "cm-b-s5"
    assert 0.0 <= first.heldout_eer <= 1.0


def test_front_end_keeps_the_artifact_band():
    arch = CmArchitecture()
    model = ToyCmModel.zeros(arch)
    t = np.arange(arch.input_length) / arch.sample_rate
    low = np.sin(2 * np.pi * 500.0 * t)
    high = np.sin(2 * np.pi * 6000.0 * t)
    mid = slice(200, -200)
    out_low, out_high = model.front_end([0.1 * low, 0.003 * high])
    assert np.sqrt(np.mean(out_low[mid] ** 2)) < 1e-2 * arch.input_gain
    assert np.sqrt(np.mean(out_high[mid] ** 2)) == pytest.approx(arch.input_gain, rel=0.05)


def test_front_end_can_be_disabled(small_arch, rng):
    x = rng.normal(scale=0.3, size=256)
    plain = replace(small_arch, normalize_rms=False, highpass_hz=0.0)
    assert plain.highpass_coefficients() is None
    np.testing.assert_allclose(ToyCmModel.zeros(plain).front_end([x])[0], plain.input_gain * x)
    scaled = ToyCmModel.zeros(small_arch).front_end([x, 5.0 * x])
    np.testing.assert_allclose(scaled[1], scaled[0], rtol=1e-9, atol=1e-12)


def test_front_end_validation():
    with pytest.raises(ValidationError, match="highpass_taps"):
        CmArchitecture(highpass_taps=128)
    with pytest.raises(ValidationError, match="highpass_hz"):
        CmArchitecture(highpass_hz=8000.0)
    assert CmArchitecture(highpass_hz=0.0, highpass_taps=2).highpass_coefficients() is None


@pytest.mark.slow
@pytest.mark.parametrize("variant", ["a", "b"])
def test_default_training_reaches_target_eer(default_corpus, variant):
    result = train_cm(
        default_corpus.waveforms("cm-train", "bonafide"),
        default_corpus.waveforms("cm-train", "spoof"),
        TrainConfig(variant=variant),
        dev_bona=default_corpus.waveforms("cm-dev", "bonafide"),
        dev_spoof=default_corpus.waveforms("cm-dev", "spoof"),
    )
    assert not result.undertrained
    assert result.heldout_eer < 0.05
    scores_bona = cm_scores(result.model, [w.samples for w in default_corpus.waveforms("part2", "bonafide")])
    scores_spoof = cm_scores(result.model, [w.samples for w in default_corpus.waveforms("part2", "spoof")])
    assert compute_eer(scores_bona, scores_spoof)[0] < 0.05
