"""
Differentiable countermeasure (CM) contract and two desk-scale convolutional CMs.

A CM maps an utterance to two logits, index 0 = spoof and index 1 = bona fide.
The scalar CM score used everywhere downstream is logit_bonafide - logit_spoof,
so higher scores support the bona fide class.
"""

import logging
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
import scipy.signal
from numpy.lib.stride_tricks import sliding_window_view

from malafide.artifacts import read_json, write_json
from malafide.dsp import (
    DEFAULT_SAMPLE_RATE,
    JSON_FLOAT_DIGITS,
    Waveform,
    convolve_same_array,
    correlate_same_array,
)
from malafide.errors import UndertrainedError, ValidationError
from malafide.metrics import compute_eer
from malafide.optim import Adam

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")
SCORE_CHUNK = 64
# keeps silent inputs finite under RMS normalisation
RMS_FLOOR = 1e-12


@lru_cache(maxsize=16)
def _highpass(numtaps: int, cutoff_hz: float, sample_rate: int) -> np.ndarray:
    taps = scipy.signal.firwin(numtaps, cutoff_hz, pass_zero=False, fs=sample_rate)
    taps.flags.writeable = False
    return taps


@runtime_checkable
class DifferentiableScorer(Protocol):
    """
    Any CM the Malafide optimiser can attack.

    Implementations score a batch of 1-D sample arrays and return, for each
    one, the gradient of the scalar score with respect to every input sample.
    Parameters are frozen: neither method may change the scorer.
    """

    scorer_id: str
    sample_rate: int
    expected_input_length: int

    def logits(self, signals: Sequence[np.ndarray]) -> np.ndarray:
        """(B, 2) array of [logit_spoof, logit_bonafide]."""
        ...

    def score_and_gradient(
        self, signals: Sequence[np.ndarray]
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        """Scores (B,) and one gradient per signal, each the length of its signal."""
        ...


@dataclass(frozen=True)
class CmArchitecture:
    """
    Layer shapes of a ToyCmModel.

    Front end: each utterance is scaled to unit RMS (`normalize_rms`), passed
    through a fixed linear-phase high-pass FIR (`highpass_hz`, `highpass_taps`;
    0 Hz disables it) and multiplied by `input_gain`. Then
    conv1 (1 -> conv1_channels) -> ReLU -> maxpool(pool) -> conv2 (-> conv2_channels)
    -> ReLU -> global average pool -> linear (-> 2 logits).
    """

    conv1_channels: int = 8
    conv1_kernel: int = 64
    conv1_stride: int = 8
    pool: int = 4
    conv2_channels: int = 16
    conv2_kernel: int = 32
    conv2_stride: int = 4
    input_length: int = 16000
    input_gain: float = 40.0
    normalize_rms: bool = True
    highpass_hz: float = 3800.0
    highpass_taps: int = 129
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        for name in (
            "conv1_channels",
            "conv1_kernel",
            "conv1_stride",
            "pool",
            "conv2_channels",
            "conv2_kernel",
            "conv2_stride",
        ):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.conv3_steps < 1:
            raise ValidationError(
                f"input_length {self.input_length} too short for the layer shapes"
            )
        if not 0.0 <= self.highpass_hz < self.sample_rate / 2:
            raise ValidationError(
                f"highpass_hz must lie in [0, {self.sample_rate / 2}), got {self.highpass_hz}"
            )
        if self.highpass_hz > 0 and (self.highpass_taps < 3 or self.highpass_taps % 2 == 0):
            raise ValidationError(f"highpass_taps must be odd and >= 3, got {self.highpass_taps}")

    def highpass_coefficients(self) -> np.ndarray | None:
        """Taps of the fixed front-end high-pass, or None when it is disabled."""
        if self.highpass_hz == 0:
            return None
        return _highpass(self.highpass_taps, float(self.highpass_hz), self.sample_rate)

    @property
    def conv1_steps(self) -> int:
        return max((self.input_length - self.conv1_kernel) // self.conv1_stride + 1, 0)

    @property
    def pool_steps(self) -> int:
        return self.conv1_steps // self.pool

    @property
    def conv3_steps(self) -> int:
        return max((self.pool_steps - self.conv2_kernel) // self.conv2_stride + 1, 0)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "w1": (self.conv1_channels, self.conv1_kernel),
            "b1": (self.conv1_channels,),
            "w2": (self.conv2_channels, self.conv1_channels, self.conv2_kernel),
            "b2": (self.conv2_channels,),
            "w3": (2, self.conv2_channels),
            "b3": (2,),
        }


VARIANTS = {
    "a": CmArchitecture(),
    "b": CmArchitecture(conv1_kernel=48, conv2_kernel=24),
}


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ToyCmModel:
    """
    Small 1-D convolutional CM with an exact backward pass.

    Args:
        architecture (CmArchitecture): Layer shapes.
        params (dict[str, np.ndarray]): Weights keyed by PARAM_NAMES.
        scorer_id (str): Identifier carried into filters optimised against this model.
        rng_seed (int): Seed used at initialisation.
    """

    architecture: CmArchitecture
    params: dict[str, np.ndarray]
    scorer_id: str = "cm"
    rng_seed: int = 0

    def __post_init__(self):
        shapes = self.architecture.param_shapes()
        params = {}
        for name in PARAM_NAMES:
            if name not in self.params:
                raise ValidationError(f"missing parameter {name}")
            value = _readonly(self.params[name])
            if value.shape != shapes[name]:
                raise ValidationError(
                    f"parameter {name} has shape {value.shape}, expected {shapes[name]}"
                )
            params[name] = value
        object.__setattr__(self, "params", params)

    @classmethod
    def initialize(
        cls, architecture: CmArchitecture, seed: int = 0, scorer_id: str = "cm"
    ) -> "ToyCmModel":
        """He-normal weights, zero biases."""
        rng = np.random.default_rng(seed)
        arch = architecture
        fan_in = {
            "w1": arch.conv1_kernel,
            "w2": arch.conv1_channels * arch.conv2_kernel,
            "w3": arch.conv2_channels,
        }
        params = {}
        for name, shape in arch.param_shapes().items():
            if name.startswith("w"):
                params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in[name]), size=shape)
            else:
                params[name] = np.zeros(shape)
        return cls(arch, params, scorer_id=scorer_id, rng_seed=seed)

    @classmethod
    def zeros(cls, architecture: CmArchitecture, scorer_id: str = "zero") -> "ToyCmModel":
        params = {name: np.zeros(shape) for name, shape in architecture.param_shapes().items()}
        return cls(architecture, params, scorer_id=scorer_id)

    def with_params(self, **updates: np.ndarray) -> "ToyCmModel":
        params = dict(self.params)
        params.update(updates)
        return ToyCmModel(self.architecture, params, self.scorer_id, self.rng_seed)

    @property
    def sample_rate(self) -> int:
        return self.architecture.sample_rate

    @property
    def expected_input_length(self) -> int:
        return self.architecture.input_length

    def fit_length(self, samples: np.ndarray) -> np.ndarray:
        """Zero-pad at the end or centre-crop to `expected_input_length`."""
        n_in = self.expected_input_length
        n = samples.size
        if n == n_in:
            return samples
        if n < n_in:
            return np.concatenate([samples, np.zeros(n_in - n)])
        start = (n - n_in) // 2
        return samples[start : start + n_in]

    def unfit_gradient(self, grad: np.ndarray, n: int) -> np.ndarray:
        """Map a gradient on the fitted input back onto an input of length n."""
        n_in = self.expected_input_length
        if n <= n_in:
            return grad[:n].copy()
        out = np.zeros(n)
        start = (n - n_in) // 2
        out[start : start + n_in] = grad
        return out

    def _stack(self, signals: Sequence[np.ndarray]) -> np.ndarray:
        rows = []
        for s in signals:
            s = np.asarray(s, dtype=np.float64).reshape(-1)
            if s.size == 0:
                raise ValidationError("cannot score an empty signal")
            if not np.all(np.isfinite(s)):
                raise ValidationError("cannot score a non-finite signal")
            rows.append(self.fit_length(s))
        return np.stack(rows)

    def _front_end(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        arch = self.architecture
        cache = {}
        if arch.normalize_rms:
            scale = 1.0 / np.sqrt(np.mean(x**2, axis=1, keepdims=True) + RMS_FLOOR)
            x = x * scale
            cache.update(rms_scale=scale, normalized=x)
        taps = arch.highpass_coefficients()
        if taps is not None:
            x = np.stack([convolve_same_array(row, taps) for row in x])
        return arch.input_gain * x, cache

    def _front_end_backward(self, dxg: np.ndarray, cache: dict) -> np.ndarray:
        arch = self.architecture
        dx = arch.input_gain * dxg
        taps = arch.highpass_coefficients()
        if taps is not None:
            dx = np.stack([correlate_same_array(row, taps) for row in dx])
        if arch.normalize_rms:
            # y = s x with s = (mean(x^2) + floor)^-1/2  =>  dx = s (dy - y <y, dy> / n)
            y = cache["normalized"]
            dx = cache["rms_scale"] * (dx - y * np.sum(y * dx, axis=1, keepdims=True) / y.shape[1])
        return dx

    def front_end(self, signals: Sequence[np.ndarray]) -> np.ndarray:
        """The conditioned (B, input_length) array conv1 sees."""
        return self._front_end(self._stack(signals))[0]

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        arch = self.architecture
        p = self.params
        n_batch = x.shape[0]
        xg, front = self._front_end(x)

        win1 = np.ascontiguousarray(
            sliding_window_view(xg, arch.conv1_kernel, axis=1)[:, :: arch.conv1_stride, :]
        )
        z1 = win1 @ p["w1"].T + p["b1"]
        r1 = np.maximum(z1, 0.0)

        t2 = arch.pool_steps
        pooled_in = r1[:, : t2 * arch.pool, :].reshape(n_batch, t2, arch.pool, arch.conv1_channels)
        pool_arg = np.argmax(pooled_in, axis=2)
        pooled = np.take_along_axis(pooled_in, pool_arg[:, :, None, :], axis=2)[:, :, 0, :]

        win2 = np.ascontiguousarray(
            sliding_window_view(pooled, arch.conv2_kernel, axis=1)[:, :: arch.conv2_stride, :, :]
        )
        z2 = np.tensordot(win2, p["w2"], axes=([2, 3], [1, 2])) + p["b2"]
        r2 = np.maximum(z2, 0.0)
        h = r2.mean(axis=1)
        logits = h @ p["w3"].T + p["b3"]

        cache = dict(front=front, win1=win1, z1=z1, pool_arg=pool_arg, win2=win2, z2=z2, h=h)
        return logits, cache

    def _backward(
        self, dlogits: np.ndarray, cache: dict, n_samples: int, need_input: bool = True
    ) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
        arch = self.architecture
        p = self.params
        n_batch = dlogits.shape[0]
        grads = {}

        h = cache["h"]
        grads["w3"] = dlogits.T @ h
        grads["b3"] = dlogits.sum(axis=0)
        dh = dlogits @ p["w3"]

        z2 = cache["z2"]
        t3 = z2.shape[1]
        dz2 = np.broadcast_to(dh[:, None, :] / t3, z2.shape) * (z2 > 0)
        win2 = cache["win2"]
        grads["w2"] = np.tensordot(dz2, win2, axes=([0, 1], [0, 1]))
        grads["b2"] = dz2.sum(axis=(0, 1))

        dwin2 = np.tensordot(dz2, p["w2"], axes=([2], [0]))
        t2 = arch.pool_steps
        dpooled = np.zeros((n_batch, t2, arch.conv1_channels))
        steps3 = arch.conv2_stride * np.arange(t3)
        for k in range(arch.conv2_kernel):
            dpooled[:, k + steps3, :] += dwin2[:, :, :, k]

        z1 = cache["z1"]
        t1 = z1.shape[1]
        dpool_in = np.zeros((n_batch, t2, arch.pool, arch.conv1_channels))
        np.put_along_axis(dpool_in, cache["pool_arg"][:, :, None, :], dpooled[:, :, None, :], axis=2)
        dr1 = np.zeros_like(z1)
        dr1[:, : t2 * arch.pool, :] = dpool_in.reshape(n_batch, t2 * arch.pool, arch.conv1_channels)
        dz1 = dr1 * (z1 > 0)

        win1 = cache["win1"]
        grads["w1"] = np.tensordot(dz1, win1, axes=([0, 1], [0, 1]))
        grads["b1"] = dz1.sum(axis=(0, 1))

        if not need_input:
            return grads, None

        dwin1 = dz1 @ p["w1"]
        dx = np.zeros((n_batch, n_samples))
        steps1 = arch.conv1_stride * np.arange(t1)
        for k in range(arch.conv1_kernel):
            dx[:, k + steps1] += dwin1[:, :, k]
        return grads, self._front_end_backward(dx, cache["front"])

    def logits(self, signals: Sequence[np.ndarray]) -> np.ndarray:
        out = []
        for start in range(0, len(signals), SCORE_CHUNK):
            x = self._stack(signals[start : start + SCORE_CHUNK])
            out.append(self._forward(x)[0])
        if not out:
            return np.zeros((0, 2))
        return np.concatenate(out, axis=0)

    def score_and_gradient(
        self, signals: Sequence[np.ndarray]
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        scores, gradients = [], []
        for start in range(0, len(signals), SCORE_CHUNK):
            chunk = signals[start : start + SCORE_CHUNK]
            x = self._stack(chunk)
            logits, cache = self._forward(x)
            dlogits = np.tile([-1.0, 1.0], (x.shape[0], 1))
            _, dx = self._backward(dlogits, cache, x.shape[1])
            scores.append(logits[:, 1] - logits[:, 0])
            for s, g in zip(chunk, dx):
                gradients.append(self.unfit_gradient(g, np.asarray(s).size))
        return np.concatenate(scores) if scores else np.zeros(0), gradients

    def loss_and_grads(
        self, signals: Sequence[np.ndarray], labels: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]:
        """
        Mean softmax cross-entropy and its parameter gradients.

        Args:
            signals (Sequence[np.ndarray]): Batch of utterances.
            labels (np.ndarray): 1 for bona fide, 0 for spoof.

        Returns:
            tuple[float, dict[str, np.ndarray]]: Loss and gradients keyed by PARAM_NAMES.
        """
        x = self._stack(signals)
        logits, cache = self._forward(x)
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        labels = np.asarray(labels, dtype=int)
        n_batch = x.shape[0]
        loss = -float(log_probs[np.arange(n_batch), labels].mean())
        dlogits = np.exp(log_probs)
        dlogits[np.arange(n_batch), labels] -= 1.0
        dlogits /= n_batch
        grads, _ = self._backward(dlogits, cache, x.shape[1], need_input=False)
        return loss, grads


def cm_scores(scorer: DifferentiableScorer, signals: Sequence[np.ndarray]) -> np.ndarray:
    """Scalar CM scores (logit_bonafide - logit_spoof) for a batch."""
    logits = scorer.logits(signals)
    return logits[:, 1] - logits[:, 0]


def _check_signal(scorer: DifferentiableScorer, signal: Waveform) -> None:
    if signal.sample_rate != scorer.sample_rate:
        raise ValidationError(
            f"sample-rate mismatch: signal at {signal.sample_rate} Hz, "
            f"scorer {scorer.scorer_id} expects {scorer.sample_rate} Hz"
        )
    if not np.all(np.isfinite(signal.samples)):
        raise ValidationError("non-finite input rejected")


def score_logits(scorer: DifferentiableScorer, signal: Waveform) -> tuple[float, float]:
    """
    Score one utterance.

    Args:
        scorer (DifferentiableScorer): Countermeasure.
        signal (Waveform): Utterance at the scorer's sample rate.

    Returns:
        tuple[float, float]: (logit_spoof, logit_bonafide).
    """
    _check_signal(scorer, signal)
    logits = scorer.logits([signal.samples])[0]
    return float(logits[0]), float(logits[1])


def input_gradient(scorer: DifferentiableScorer, signal: Waveform) -> np.ndarray:
    """
    Gradient of (logit_bonafide - logit_spoof) with respect to every input sample.

    Args:
        scorer (DifferentiableScorer): Countermeasure.
        signal (Waveform): Utterance at the scorer's sample rate.

    Returns:
        np.ndarray: Gradient with the same length as the signal.
    """
    _check_signal(scorer, signal)
    _, gradients = scorer.score_and_gradient([signal.samples])
    return gradients[0]


@dataclass(frozen=True)
class TrainConfig:
    """
    Countermeasure training schedule.

    Args:
        epochs (int): Minimum number of epochs.
        max_epochs (int): Training continues past `epochs` while the held-out EER is above threshold, up to this many.
        batch_size (int): Utterances per Adam step.
        learning_rate (float): Adam step size.
        weight_decay (float): L2 coefficient.
        seed (int): Seeds initialisation, hold-out split and batch order.
        eer_threshold (float): Held-out EER the model must beat.
        holdout_fraction (float): Fraction held out when no dev set is given.
        variant (str): Key of VARIANTS.
    """

    epochs: int = 10
    max_epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 5e-3
    weight_decay: float = 0.0
    seed: int = 0
    eer_threshold: float = 0.05
    holdout_fraction: float = 0.2
    variant: str = "a"

    def __post_init__(self):
        if self.epochs < 1 or self.max_epochs < self.epochs:
            raise ValidationError("need 1 <= epochs <= max_epochs")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValidationError("holdout_fraction must be in (0, 1)")
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown CM variant {self.variant!r}; choose from {sorted(VARIANTS)}")


@dataclass
class TrainingResult:
    model: ToyCmModel
    heldout_eer: float
    threshold: float
    history: list[dict] = field(default_factory=list)

    @property
    def undertrained(self) -> bool:
        return not self.heldout_eer < self.threshold

    def raise_if_undertrained(self) -> "TrainingResult":
        if self.undertrained:
            raise UndertrainedError(self.heldout_eer, self.threshold)
        return self

    def to_dict(self) -> dict:
        return {
            "scorer_id": self.model.scorer_id,
            "heldout_eer": self.heldout_eer,
            "eer_threshold": self.threshold,
            "undertrained": self.undertrained,
            "history": self.history,
        }


def _holdout_split(n: int, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    order = rng.permutation(n)
    n_dev = max(1, int(round(n * fraction)))
    if n_dev >= n:
        raise ValidationError("not enough utterances to hold out a dev split")
    return np.sort(order[n_dev:]), np.sort(order[:n_dev])


def heldout_eer(model: DifferentiableScorer, bona: Sequence[Waveform], spoof: Sequence[Waveform]) -> float:
    eer, _ = compute_eer(
        cm_scores(model, [w.samples for w in bona]),
        cm_scores(model, [w.samples for w in spoof]),
    )
    return eer


def train_cm(
    bona: Sequence[Waveform],
    spoof: Sequence[Waveform],
    config: TrainConfig = TrainConfig(),
    dev_bona: Sequence[Waveform] | None = None,
    dev_spoof: Sequence[Waveform] | None = None,
    scorer_id: str | None = None,
) -> TrainingResult:
    """
    Train a ToyCmModel with softmax cross-entropy and Adam.

    Args:
        bona (Sequence[Waveform]): Bona fide training utterances.
        spoof (Sequence[Waveform]): Spoofed training utterances.
        config (TrainConfig, optional): Schedule. Defaults to TrainConfig().
        dev_bona (Sequence[Waveform], optional): Held-out bona fide utterances. Defaults to a split of `bona`.
        dev_spoof (Sequence[Waveform], optional): Held-out spoofed utterances. Defaults to a split of `spoof`.
        scorer_id (str, optional): Defaults to f"cm-{variant}-s{seed}".

    Returns:
        TrainingResult: Model, held-out EER and per-epoch history. Check `undertrained`.
    """
    if len(bona) == 0 or len(spoof) == 0:
        raise ValidationError("train_cm needs both bona fide and spoofed utterances")

    rng = np.random.default_rng(config.seed)
    init_seed, split_seed, shuffle_seed = rng.integers(0, 2**31 - 1, size=3)

    if (dev_bona is None) != (dev_spoof is None):
        raise ValidationError("pass both dev_bona and dev_spoof, or neither")
    if dev_bona is None:
        split_rng = np.random.default_rng(split_seed)
        tr_b, dv_b = _holdout_split(len(bona), config.holdout_fraction, split_rng)
        tr_s, dv_s = _holdout_split(len(spoof), config.holdout_fraction, split_rng)
        dev_bona = [bona[i] for i in dv_b]
        dev_spoof = [spoof[i] for i in dv_s]
        bona = [bona[i] for i in tr_b]
        spoof = [spoof[i] for i in tr_s]

    arch = VARIANTS[config.variant]
    scorer_id = scorer_id or f"cm-{config.variant}-s{config.seed}"
    model = ToyCmModel.initialize(arch, seed=int(init_seed), scorer_id=scorer_id)

    signals = [w.samples for w in bona] + [w.samples for w in spoof]
    labels = np.concatenate([np.ones(len(bona), dtype=int), np.zeros(len(spoof), dtype=int)])
    optimizer = Adam(config.learning_rate, weight_decay=config.weight_decay)
    shuffle_rng = np.random.default_rng(shuffle_seed)

    history = []
    eer = 1.0
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(signals))
        losses = []
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = model.loss_and_grads([signals[i] for i in idx], labels[idx])
            params = [model.params[name] for name in PARAM_NAMES]
            updated = optimizer.step(params, [grads[name] for name in PARAM_NAMES])
            model = model.with_params(**dict(zip(PARAM_NAMES, updated)))
            losses.append(loss)

        eer = heldout_eer(model, dev_bona, dev_spoof)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)), "heldout_eer": eer})
        logger.info(
            "%s epoch %d: loss %.4f held-out EER %.4f", scorer_id, epoch, np.mean(losses), eer
        )
        if epoch >= config.epochs and eer < config.eer_threshold:
            break

    result = TrainingResult(model, eer, config.eer_threshold, history)
    if result.undertrained:
        logger.warning("%s undertrained: held-out EER %.4f", scorer_id, eer)
    return result


def model_to_dict(model: ToyCmModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "scorer_id": model.scorer_id,
        "rng_seed": model.rng_seed,
        "architecture": asdict(model.architecture),
        "weights": {name: [float(v) for v in model.params[name].reshape(-1)] for name in PARAM_NAMES},
    }


def model_from_dict(payload: dict) -> ToyCmModel:
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported model format_version: {version}")
    arch = CmArchitecture(**payload["architecture"])
    shapes = arch.param_shapes()
    params = {
        name: np.asarray(payload["weights"][name], dtype=np.float64).reshape(shapes[name])
        for name in PARAM_NAMES
    }
    return ToyCmModel(arch, params, scorer_id=payload["scorer_id"], rng_seed=payload.get("rng_seed", 0))


def save_model(path: Path, model: ToyCmModel) -> Path:
    return write_json(path, model_to_dict(model), float_digits=JSON_FLOAT_DIGITS)


def load_model(path: Path) -> ToyCmModel:
    return model_from_dict(read_json(path))
