import numpy as np
import pytest

from malafide.attack import (
    AttackConfig,
    adam_step,
    filter_gradient,
    he_init_filter,
    objective,
    optimize_filter,
    project_dirac,
    select_filter,
    sweep_lengths,
    tune_learning_rate,
)
from malafide.dsp import FILTER_LENGTHS, MalafideFilter, Waveform, dirac_filter
from malafide.errors import NumericalError, ValidationError
from malafide.optim import AdamState

from conftest import LinearScorer


class NanScorer(LinearScorer):
    def score_and_gradient(self, signals):
        scores, gradients = super().score_and_gradient(signals)
        gradients[0][0] = np.nan
        return scores, gradients


@pytest.mark.parametrize("length", FILTER_LENGTHS)
def test_he_init_bounds(length):
    filter = he_init_filter(length, seed=length)
    c = filter.center_index
    assert filter.coefficients[c] == 1.0
    others = np.delete(filter.coefficients, c)
    bound = np.sqrt(3.0 / length)
    assert np.all(np.abs(others) <= bound)


def test_he_init_mean_is_centred():
    length = 4097
    others = np.delete(he_init_filter(length, seed=0).coefficients, length // 2)
    # each tap ~ U(+-sqrt(3/L)) has standard deviation 1/sqrt(L)
    sigma_of_mean = 1.0 / np.sqrt(length) / np.sqrt(others.size)
    assert abs(others.mean()) <= 3 * sigma_of_mean
    assert others.std() == pytest.approx(1.0 / np.sqrt(length), rel=0.05)


def test_he_init_rejects_bad_lengths():
    with pytest.raises(ValidationError):
        he_init_filter(64)
    with pytest.raises(ValidationError):
        he_init_filter(101)
    assert he_init_filter(9, catalog_only=False).length == 9


def test_he_init_is_seeded():
    a, b = he_init_filter(257, seed=1), he_init_filter(257, seed=1)
    np.testing.assert_array_equal(a.coefficients, b.coefficients)
    assert not np.array_equal(a.coefficients, he_init_filter(257, seed=2).coefficients)


def test_project_dirac_only_touches_centre(rng):
    filter = MalafideFilter(rng.normal(size=9))
    projected = project_dirac(filter)
    assert projected.coefficients[4] == 1.0
    np.testing.assert_array_equal(np.delete(projected.coefficients, 4), np.delete(filter.coefficients, 4))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_filter_gradient_matches_finite_differences(small_model, seed):
    rng = np.random.default_rng(seed)
    batch = [Waveform(rng.normal(scale=0.3, size=256)) for _ in range(3)]
    coefficients = rng.normal(scale=0.2, size=9)
    coefficients[4] = 1.0
    filter = MalafideFilter(coefficients)
    grad = filter_gradient(small_model, filter, batch)
    eps = 1e-6
    for j in range(9):
        up, down = coefficients.copy(), coefficients.copy()
        up[j] += eps
        down[j] -= eps
        fd = (objective(small_model, MalafideFilter(up), batch) - objective(small_model, MalafideFilter(down), batch)) / (
            2 * eps
        )
        assert grad[j] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_filter_gradient_matches_finite_differences_on_long_filter(small_model, make_waveforms):
    batch = make_waveforms(2)
    filter = he_init_filter(33, seed=7, catalog_only=False)
    coefficients = filter.coefficients.copy()
    grad = filter_gradient(small_model, filter, batch)
    eps = 1e-6
    for j in range(33):
        up, down = coefficients.copy(), coefficients.copy()
        up[j] += eps
        down[j] -= eps
        fd = (objective(small_model, MalafideFilter(up), batch) - objective(small_model, MalafideFilter(down), batch)) / (
            2 * eps
        )
        assert grad[j] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_filter_gradient_is_lagged_correlation(linear_scorer, make_waveforms):
    batch = make_waveforms(2)
    filter = he_init_filter(9, seed=0, catalog_only=False)
    grad = filter_gradient(linear_scorer, filter, batch)
    w = linear_scorer.weights
    expected = np.zeros(9)
    for s in batch:
        for k in range(-4, 5):
            for t in range(256):
                if 0 <= t - k < 256:
                    expected[k + 4] += w[t] * s.samples[t - k]
    np.testing.assert_allclose(grad, expected, rtol=0, atol=1e-10)


def test_filter_gradient_of_impulse_reads_out_upstream_gradient(linear_scorer):
    t0 = 100
    samples = np.zeros(256)
    samples[t0] = 1.0
    grad = filter_gradient(linear_scorer, dirac_filter(9), [Waveform(samples)])
    np.testing.assert_array_equal(grad, linear_scorer.weights[t0 - 4 : t0 + 5])


def test_objective_rejects_empty_batch(linear_scorer):
    with pytest.raises(ValidationError):
        objective(linear_scorer, dirac_filter(9), [])


def test_adam_step_zero_gradient_keeps_filter(rng):
    coefficients = rng.normal(size=9)
    coefficients[4] = 1.0
    filter = MalafideFilter(coefficients)
    config = AttackConfig(filter_length=9, weight_decay=0.0)
    stepped, state = adam_step(filter, np.zeros(9), AdamState.zeros(9), config)
    np.testing.assert_array_equal(stepped.coefficients, filter.coefficients)
    assert state.step_count == 1


def test_adam_step_pins_centre(rng):
    filter = he_init_filter(9, catalog_only=False)
    config = AttackConfig(filter_length=9, learning_rate=0.1)
    stepped, _ = adam_step(filter, rng.normal(size=9), AdamState.zeros(9), config)
    assert stepped.coefficients[4] == 1.0
    assert not np.array_equal(stepped.coefficients, filter.coefficients)


def test_adam_step_ascends(rng):
    filter = dirac_filter(9)
    gradient = rng.normal(size=9)
    stepped, _ = adam_step(filter, gradient, AdamState.zeros(9), AttackConfig(filter_length=9, weight_decay=0.0))
    moved = np.delete(stepped.coefficients - filter.coefficients, 4)
    assert np.all(np.sign(moved) == np.sign(np.delete(gradient, 4)))


def test_weight_decay_shrinks_taps_monotonically():
    coefficients = np.full(9, 0.5)
    coefficients[4] = 1.0
    filter = MalafideFilter(coefficients)
    config = AttackConfig(filter_length=9, learning_rate=1e-3, weight_decay=1e-2)
    state = AdamState.zeros(9)
    previous = np.abs(np.delete(filter.coefficients, 4))
    for _ in range(20):
        filter, state = adam_step(filter, np.zeros(9), state, config)
        current = np.abs(np.delete(filter.coefficients, 4))
        assert np.all(current < previous)
        assert filter.coefficients[4] == 1.0
        previous = current


def test_adam_step_rejects_non_finite_gradient():
    gradient = np.zeros(9)
    gradient[2] = np.inf
    with pytest.raises(NumericalError, match="batch 3"):
        adam_step(dirac_filter(9), gradient, AdamState.zeros(9), AttackConfig(filter_length=9), "epoch 1 batch 3")


def test_attack_config_validation():
    with pytest.raises(ValidationError):
        AttackConfig(filter_length=8)
    with pytest.raises(ValidationError):
        AttackConfig(epochs=0)
    with pytest.raises(ValidationError):
        AttackConfig(batch_size=0)
    assert AttackConfig().with_length(65).filter_length == 65


def test_dirac_centre_holds_after_every_batch(linear_scorer, make_waveforms):
    spoofs = make_waveforms(10)
    calls = []

    def check(epoch, batch_index, filter):
        assert filter.coefficients[filter.center_index] == 1.0
        calls.append((epoch, batch_index))

    config = AttackConfig(filter_length=65, epochs=3, batch_size=4, learning_rate=1e-2)
    optimize_filter(linear_scorer, spoofs, config, "SA1", on_batch=check)
    assert calls == [(e, b) for e in (1, 2, 3) for b in (0, 1, 2)]


def test_optimize_filter_improves_objective(linear_scorer, make_waveforms):
    spoofs = make_waveforms(6)
    config = AttackConfig(filter_length=9, epochs=10, batch_size=6, learning_rate=0.1, weight_decay=0.0)
    filter, report = optimize_filter(linear_scorer, spoofs, config, "SA1")
    assert filter.attack_id == "SA1"
    assert filter.scorer_id == "linear"
    assert filter.is_projected
    assert len(report.mean_objective) == len(report.success_rate) == 10
    assert np.all(np.diff(report.mean_objective) > 0)
    assert report.mean_objective[-1] >= report.dirac_mean_objective
    assert report.final_filter is filter
    assert 0.0 <= report.initial_success_rate <= 1.0
    frame = report.to_frame()
    assert list(frame.columns) == ["epoch", "mean_objective", "part1_success_rate"]
    assert "duration_s" not in report.to_dict()


def test_optimize_filter_is_deterministic(linear_scorer, make_waveforms):
    spoofs = make_waveforms(7)
    config = AttackConfig(filter_length=65, epochs=2, batch_size=3, rng_seed=11)
    first, report1 = optimize_filter(linear_scorer, spoofs, config)
    second, report2 = optimize_filter(linear_scorer, spoofs, config)
    np.testing.assert_array_equal(first.coefficients, second.coefficients)
    assert report1.to_dict() == report2.to_dict()


def test_optimize_filter_on_attack_dataset(small_model, small_corpus):
    dataset = small_corpus.attack_dataset("SA2")
    config = AttackConfig(filter_length=9, epochs=1, batch_size=14)
    filter, report = optimize_filter(small_model, dataset, config)
    assert filter.attack_id == "SA2"
    assert report.attack_id == "SA2"
    assert filter.scorer_id == "small"


def test_optimize_filter_rejects_empty_part1(linear_scorer):
    with pytest.raises(ValidationError):
        optimize_filter(linear_scorer, [], AttackConfig(filter_length=9))


def test_optimize_filter_reports_non_finite_gradient(make_waveforms):
    scorer = NanScorer(np.ones(256))
    with pytest.raises(NumericalError, match="epoch 1 batch 0"):
        optimize_filter(scorer, make_waveforms(3), AttackConfig(filter_length=9, epochs=1))


def test_select_filter():
    short, long = dirac_filter(65), dirac_filter(257)
    assert select_filter([(long, 0.8), (short, 0.6)]) is long
    assert select_filter([(long, 0.7), (short, 0.7)]) is short
    with pytest.raises(ValidationError):
        select_filter([])


def test_sweep_lengths(linear_scorer, make_waveforms):
    spoofs = make_waveforms(4)
    sweep = sweep_lengths(linear_scorer, spoofs, AttackConfig(epochs=1, batch_size=4), [65, 129], "SA3")
    assert set(sweep.filters) == {65, 129}
    rates = {L: r.final_success_rate for L, r in sweep.reports.items()}
    assert sweep.selected is select_filter([(sweep.filters[L], rates[L]) for L in (65, 129)])
    record = sweep.selection_record()
    assert record["selected_length"] == sweep.selected.length
    assert set(record["part1_success_rate"]) == {"65", "129"}
    with pytest.raises(ValidationError, match="catalog"):
        sweep_lengths(linear_scorer, spoofs, AttackConfig(epochs=1), [100])


def test_tune_learning_rate(linear_scorer, make_waveforms):
    spoofs = make_waveforms(4)
    best, rates = tune_learning_rate(linear_scorer, spoofs, AttackConfig(filter_length=65, epochs=1, batch_size=4))
    assert set(rates) == {1e-2, 1e-3, 1e-4}
    assert best in rates
    assert rates[best] == max(rates.values())
    for lr in (1e-2, 1e-3, 1e-4):
        if rates[lr] == rates[best]:
            assert lr == best
            break
