"""
Toy automatic speaker verification (ASV) and SASV trial lists.

An utterance embedding is the time-averaged 40-band log-magnitude mel
spectrum, mean-removed across bands; the ASV score is the cosine similarity
between a test embedding and the mean enrollment embedding.
"""

from functools import lru_cache
from typing import Sequence

import librosa
import numpy as np
import pandas as pd
import scipy.signal

from malafide.corpus import Corpus
from malafide.dsp import Waveform
from malafide.errors import ValidationError

N_MELS = 40
N_FFT = 512
HOP = 256
LOG_FLOOR = 1e-10


@lru_cache(maxsize=8)
def _mel_basis(sample_rate: int) -> np.ndarray:
    return librosa.filters.mel(
        sr=sample_rate, n_fft=N_FFT, n_mels=N_MELS, fmin=0.0, fmax=sample_rate / 2.0
    )


def asv_embedding(waveform: Waveform) -> np.ndarray:
    _, _, spec = scipy.signal.stft(
        waveform.samples,
        fs=waveform.sample_rate,
        nperseg=N_FFT,
        noverlap=N_FFT - HOP,
        boundary=None,
        padded=True,
    )
    mel = _mel_basis(waveform.sample_rate) @ np.abs(spec)
    embedding = np.log(mel + LOG_FLOOR).mean(axis=1)
    return embedding - embedding.mean()


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        return 0.0
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def speaker_model(enrollment: Sequence[Waveform]) -> np.ndarray:
    """Mean enrollment embedding of one speaker."""
    if len(enrollment) == 0:
        raise ValidationError("toy_asv_score needs at least one enrollment utterance")
    return np.mean([asv_embedding(w) for w in enrollment], axis=0)


def score_against_model(model: np.ndarray, test: Waveform) -> float:
    return _cosine(model, asv_embedding(test))


def toy_asv_score(enrollment: Sequence[Waveform], test: Waveform) -> float:
    """
    Cosine similarity between a test utterance and a speaker's enrollment.

    Args:
        enrollment (Sequence[Waveform]): Enrollment utterances of the claimed speaker.
        test (Waveform): Test utterance.

    Returns:
        float: Score in [-1, 1]; higher supports the claimed identity.
    """
    return score_against_model(speaker_model(enrollment), test)


def build_sasv_trials(corpus: Corpus, partition: str = "part2") -> pd.DataFrame:
    """
    SASV trial list over one partition.

    Every bona fide utterance gives a target trial (its own speaker claimed)
    and a non-target trial (the utterance claims the next speaker in order).
    Every spoof gives a spoof trial claiming its own speaker.

    Returns:
        pd.DataFrame: Columns trial_id, utterance_id, claimed_speaker, label, attack_id.
    """
    speaker_ids = [s.speaker_id for s in corpus.speakers]
    next_speaker = {spk: speaker_ids[(i + 1) % len(speaker_ids)] for i, spk in enumerate(speaker_ids)}
    trials = []
    for row in corpus.rows(partition, "bonafide").itertuples(index=False):
        trials.append((row.utterance_id, row.speaker_id, "target", "-"))
        trials.append((row.utterance_id, next_speaker[row.speaker_id], "nontarget", "-"))
    for row in corpus.rows(partition, "spoof").itertuples(index=False):
        trials.append((row.utterance_id, row.speaker_id, "spoof", row.attack_id))
    df = pd.DataFrame(trials, columns=["utterance_id", "claimed_speaker", "label", "attack_id"])
    df.insert(0, "trial_id", [f"T{i:05d}" for i in range(len(df))])
    return df
