"""Waveforms, non-causal FIR filters, convolution, spectral analysis and WAV I/O."""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import scipy.fft
import scipy.io.wavfile
import scipy.signal

from malafide.artifacts import read_json, write_json
from malafide.errors import ValidationError, WavFormatError

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE = 16000
FILTER_LENGTHS = (65, 129, 257, 513, 1025, 2049, 4097)
FILTER_FORMAT_VERSION = 1
JSON_FLOAT_DIGITS = 17
PCM_SCALE = 32768.0


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite (found NaN or Inf)")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Waveform:
    """
    Mono audio signal.

    Args:
        samples (array-like): Real amplitudes, nominally in [-1, 1]. Copied and made read-only.
        sample_rate (int): Sampling rate in Hz.
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples, "samples"))
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValidationError(
                f"sample_rate must be a positive integer, got {self.sample_rate}"
            )
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(samples, self.sample_rate)


@dataclass(frozen=True)
class MalafideFilter:
    """
    Odd-length, non-causal FIR filter targeting one spoofing attack.

    Tap `k` of the impulse response, for k in [-c, c], is stored at
    `coefficients[k + c]` with c = (L - 1) // 2.

    Args:
        coefficients (array-like): Filter taps, length L (odd).
        attack_id (str): Spoofing attack the filter targets.
        scorer_id (str): Countermeasure the filter was optimised against.
        sample_rate (int): Sampling rate in Hz.
    """

    coefficients: np.ndarray
    attack_id: str = "-"
    scorer_id: str = "-"
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        coefficients = _frozen_array(self.coefficients, "coefficients")
        if coefficients.size % 2 == 0:
            raise ValidationError(
                f"filter length must be odd, got {coefficients.size}"
            )
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def length(self) -> int:
        return self.coefficients.size

    @property
    def center_index(self) -> int:
        return (self.coefficients.size - 1) // 2

    @property
    def is_projected(self) -> bool:
        return self.coefficients[self.center_index] == 1.0

    def with_coefficients(self, coefficients: np.ndarray) -> "MalafideFilter":
        return MalafideFilter(
            coefficients,
            attack_id=self.attack_id,
            scorer_id=self.scorer_id,
            sample_rate=self.sample_rate,
        )


@dataclass(frozen=True)
class FrequencyResponse:
    frequencies_hz: np.ndarray
    magnitude_db: np.ndarray
    n_fft: int
    sample_rate: int = field(default=DEFAULT_SAMPLE_RATE)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"freq_hz": self.frequencies_hz, "magnitude_db": self.magnitude_db}
        )

    def at_frequency(self, freq_hz: float) -> float:
        """Response (dB) of the bin nearest to `freq_hz`."""
        idx = int(np.argmin(np.abs(self.frequencies_hz - freq_hz)))
        return float(self.magnitude_db[idx])


def check_filter_length(length: int, catalog_only: bool = True) -> int:
    """
    Validate a filter length.

    Args:
        length (int): Number of taps.
        catalog_only (bool, optional): Also require membership of FILTER_LENGTHS. Defaults to True.

    Returns:
        int: The length.

    Raises:
        ValidationError: If the length is even, non-positive or (optionally) outside the catalog.
    """
    if int(length) != length or length < 1 or length % 2 == 0:
        raise ValidationError(
            f"filter length must be odd and in catalog {FILTER_LENGTHS}, got {length}"
        )
    if catalog_only and length not in FILTER_LENGTHS:
        raise ValidationError(
            f"filter length must be odd and in catalog {FILTER_LENGTHS}, got {length}"
        )
    return int(length)


def dirac_filter(
    length: int,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    attack_id: str = "-",
    scorer_id: str = "-",
) -> MalafideFilter:
    """Convolutive identity: centre tap 1, every other tap 0."""
    check_filter_length(length, catalog_only=False)
    coefficients = np.zeros(length)
    coefficients[(length - 1) // 2] = 1.0
    return MalafideFilter(coefficients, attack_id, scorer_id, sample_rate)


def convolve_same_array(samples: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
    """
    Zero-padded "same" convolution of raw arrays.

    out[t] = sum_k coefficients[k + c] * samples[t - k] for k in [-c, c].
    """
    return scipy.signal.convolve(samples, coefficients, mode="same", method="direct")


def correlate_same_array(samples: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
    """Adjoint of `convolve_same_array`: convolution with the time-reversed filter."""
    return scipy.signal.convolve(
        samples, coefficients[::-1], mode="same", method="direct"
    )


def convolve_same(signal: Waveform, filter: MalafideFilter) -> Waveform:
    """
    Apply a Malafide filter to a waveform, preserving its length.

    Args:
        signal (Waveform): Input utterance.
        filter (MalafideFilter): Non-causal filter; taps reach past and future samples.

    Returns:
        Waveform: Filtered utterance with the same length and sample rate.

    Raises:
        ValidationError: If the sample rates differ.
    """
    if signal.sample_rate != filter.sample_rate:
        raise ValidationError(
            f"sample-rate mismatch: signal at {signal.sample_rate} Hz, "
            f"filter at {filter.sample_rate} Hz"
        )
    return signal.with_samples(convolve_same_array(signal.samples, filter.coefficients))


def correlate_same(signal_samples: np.ndarray, filter: MalafideFilter) -> np.ndarray:
    return correlate_same_array(np.asarray(signal_samples, dtype=np.float64), filter.coefficients)


def frequency_response(filter: MalafideFilter, n_fft: int = 8192) -> FrequencyResponse:
    """
    Normalised magnitude response of a filter.

    Args:
        filter (MalafideFilter): Filter to analyse.
        n_fft (int, optional): FFT size, a power of two no smaller than the filter length. Defaults to 8192.

    Returns:
        FrequencyResponse: Bins from 0 to sample_rate / 2 in Hz, magnitudes in dB with peak at 0 dB.

    Raises:
        ValidationError: If n_fft is not a power of two or is shorter than the filter.
    """
    if n_fft < filter.length:
        raise ValidationError(f"n_fft ({n_fft}) must be >= filter length ({filter.length})")
    if n_fft <= 0 or n_fft & (n_fft - 1):
        raise ValidationError(f"n_fft must be a power of two, got {n_fft}")

    magnitude = np.abs(scipy.fft.rfft(filter.coefficients, n=n_fft))
    with np.errstate(divide="ignore"):
        magnitude_db = 20.0 * np.log10(magnitude)
    magnitude_db = magnitude_db - np.max(magnitude_db)
    frequencies = scipy.fft.rfftfreq(n_fft, d=1.0 / filter.sample_rate)
    return FrequencyResponse(frequencies, magnitude_db, n_fft, filter.sample_rate)


def impulse_response_table(filter: MalafideFilter) -> pd.DataFrame:
    c = filter.center_index
    return pd.DataFrame(
        {"tap": np.arange(-c, c + 1), "coefficient": filter.coefficients}
    )


def filter_distortion_db(filter: MalafideFilter, signals: Sequence[Waveform]) -> float:
    """
    Mean signal-to-distortion ratio of filtered utterances.

    Args:
        filter (MalafideFilter): Filter to apply.
        signals (Sequence[Waveform]): Unfiltered utterances.

    Returns:
        float: Mean of 10*log10(sum x^2 / sum (x - x*m)^2) in dB; inf when the filter leaves every utterance unchanged.
    """
    if len(signals) == 0:
        raise ValidationError("signals must be non-empty")
    ratios = []
    for signal in signals:
        residual = signal.samples - convolve_same(signal, filter).samples
        err = np.sum(residual**2)
        ratios.append(np.inf if err == 0 else 10.0 * np.log10(np.sum(signal.samples**2) / err))
    return float(np.mean(ratios))


def read_wav(path: Path) -> Waveform:
    """
    Read a 16-bit PCM mono WAV file.

    Args:
        path (Path): File to read.

    Returns:
        Waveform: Samples scaled to [-1, 1).

    Raises:
        FileNotFoundError: If the file does not exist.
        WavFormatError: If the header is malformed or the file is not 16-bit PCM mono.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File {path} does not exist.")
    try:
        sample_rate, data = scipy.io.wavfile.read(path)
    except (ValueError, struct.error, EOFError) as exc:
        raise WavFormatError(f"malformed RIFF/WAVE header in {path}: {exc}") from exc

    if data.ndim != 1:
        raise WavFormatError(f"unsupported channel count: {data.shape[1]} in {path}")
    if np.issubdtype(data.dtype, np.floating):
        raise WavFormatError(f"unsupported sample format: IEEE float ({data.dtype}) in {path}")
    if data.dtype != np.int16:
        raise WavFormatError(f"unsupported bit depth: {data.dtype} in {path}, expected 16-bit PCM")
    if data.size == 0:
        raise WavFormatError(f"no samples in data chunk of {path}")

    return Waveform(data.astype(np.float64) / PCM_SCALE, int(sample_rate))


def write_wav(path: Path, waveform: Waveform) -> Path:
    """
    Write a waveform as 16-bit PCM mono, clipping to [-1, 1] first.

    Args:
        path (Path): Destination file. Parent directories are created.
        waveform (Waveform): Audio to write.

    Returns:
        Path: The destination path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clipped = np.clip(waveform.samples, -1.0, 1.0)
    pcm = np.clip(np.round(clipped * PCM_SCALE), -PCM_SCALE, PCM_SCALE - 1).astype(np.int16)
    tmp = path.with_name(f".{path.name}.tmp")
    scipy.io.wavfile.write(tmp, waveform.sample_rate, pcm)
    tmp.replace(path)
    return path


def filter_to_dict(filter: MalafideFilter) -> dict:
    return {
        "format_version": FILTER_FORMAT_VERSION,
        "length": filter.length,
        "sample_rate": filter.sample_rate,
        "attack_id": filter.attack_id,
        "scorer_id": filter.scorer_id,
        "coefficients": [float(x) for x in filter.coefficients],
    }


def filter_from_dict(payload: dict) -> MalafideFilter:
    version = payload.get("format_version")
    if version != FILTER_FORMAT_VERSION:
        raise ValidationError(f"unsupported filter format_version: {version}")
    coefficients = payload["coefficients"]
    if len(coefficients) != payload["length"]:
        raise ValidationError(
            f"filter length field ({payload['length']}) does not match "
            f"{len(coefficients)} coefficients"
        )
    filter = MalafideFilter(
        coefficients,
        attack_id=payload["attack_id"],
        scorer_id=payload["scorer_id"],
        sample_rate=int(payload["sample_rate"]),
    )
    if not filter.is_projected:
        raise ValidationError("stored filter violates the Dirac centre (centre tap != 1)")
    return filter


def save_filter(path: Path, filter: MalafideFilter) -> Path:
    if not filter.is_projected:
        raise ValidationError("only projected filters (centre tap == 1) can be saved")
    return write_json(path, filter_to_dict(filter), float_digits=JSON_FLOAT_DIGITS)


def load_filter(path: Path) -> MalafideFilter:
    return filter_from_dict(read_json(path))
