import numpy as np
import pytest

from malafide.corpus import SpoofAttackSpec, build_protocol
from malafide.detector import CmArchitecture, ToyCmModel
from malafide.dsp import DEFAULT_SAMPLE_RATE, Waveform


class LinearScorer:
    """Scorer whose score is w . x, so its input gradient is w."""

    def __init__(self, weights, sample_rate=DEFAULT_SAMPLE_RATE, scorer_id="linear"):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.sample_rate = sample_rate
        self.scorer_id = scorer_id
        self.expected_input_length = self.weights.size

    def _score(self, s):
        s = np.asarray(s, dtype=np.float64)
        n = min(s.size, self.weights.size)
        return float(self.weights[:n] @ s[:n])

    def logits(self, signals):
        return np.array([[0.0, self._score(s)] for s in signals]).reshape(-1, 2)

    def score_and_gradient(self, signals):
        scores = np.array([self._score(s) for s in signals])
        gradients = []
        for s in signals:
            g = np.zeros(np.asarray(s).size)
            n = min(g.size, self.weights.size)
            g[:n] = self.weights[:n]
            gradients.append(g)
        return scores, gradients


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_arch():
    return CmArchitecture(
        conv1_channels=2,
        conv1_kernel=8,
        conv1_stride=2,
        pool=2,
        conv2_channels=3,
        conv2_kernel=4,
        conv2_stride=2,
        input_length=256,
        highpass_hz=3000.0,
        highpass_taps=9,
    )


@pytest.fixture
def small_model(small_arch):
    return ToyCmModel.initialize(small_arch, seed=3, scorer_id="small")


@pytest.fixture
def linear_scorer():
    weights = np.random.default_rng(99).normal(size=256)
    return LinearScorer(weights)


@pytest.fixture
def make_waveforms(rng):
    def _make(n, length=256, scale=0.3):
        return [Waveform(rng.normal(scale=scale, size=length)) for _ in range(n)]

    return _make


@pytest.fixture(scope="session")
def small_corpus():
    return build_protocol(
        n_speakers=2,
        n_utts_per_class=4,
        attacks=[SpoofAttackSpec("SA1", 4500.0), SpoofAttackSpec("SA2", 6500.0)],
        seed=0,
        n_bonafide=8,
        n_cm_spoofs_per_attack=4,
        duration_s=0.5,
    )


@pytest.fixture(scope="session")
def default_corpus():
    return build_protocol()
