"""
Synthetic bona fide / spoofed corpus with simulated speakers and parameterised attacks.

Bona fide speech is a harmonic source at the speaker's f0 shaped by
second-order resonators. A spoofing attack adds an amplitude-modulated tone
at an attack-specific frequency. The protocol mirrors the usual defender /
attacker realms: CM training and development data on one side, Part 1 and
Part 2 per attack on the other.
"""

import logging
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import scipy.signal

from malafide.artifacts import write_csv, write_json
from malafide.dsp import DEFAULT_SAMPLE_RATE, Waveform, write_wav
from malafide.errors import ValidationError
from malafide.split import AttackBalancedSplit

logger = logging.getLogger(__name__)

N_HARMONICS = 10
TARGET_RMS = 0.1
NOISE_DB = -30.0
RESONATOR_BANDWIDTH_HZ = 120.0
MANIFEST_COLUMNS = ["utterance_id", "speaker_id", "label", "attack_id", "partition", "wav_path"]
PARTITIONS = ("cm-train", "cm-dev", "part1", "part2")


@dataclass(frozen=True)
class SpoofAttackSpec:
    """
    A synthetic spoofing attack: an additive AM tone relative to speech RMS.

    Args:
        attack_id (str): e.g. "SA1".
        artifact_frequency_hz (float): Carrier frequency of the artefact tone.
        artifact_amplitude (float): Tone amplitude relative to the utterance RMS.
        modulation_hz (float): AM rate. Defaults to 4 Hz.
        modulation_depth (float): AM depth. Defaults to 0.5.
    """

    attack_id: str
    artifact_frequency_hz: float
    artifact_amplitude: float = 0.05
    modulation_hz: float = 4.0
    modulation_depth: float = 0.5

    def validate(self, sample_rate: int = DEFAULT_SAMPLE_RATE) -> "SpoofAttackSpec":
        if not 0 < self.artifact_frequency_hz < sample_rate / 2:
            raise ValidationError(
                f"{self.attack_id}: artifact frequency {self.artifact_frequency_hz} Hz "
                f"must lie in (0, {sample_rate / 2}) Hz"
            )
        if self.artifact_amplitude < 0:
            raise ValidationError(f"{self.attack_id}: artifact amplitude must be >= 0")
        return self


@dataclass(frozen=True)
class SpeakerSpec:
    """
    A simulated speaker.

    Args:
        speaker_id (str): Unique identifier.
        fundamental_frequency_hz (float): f0 in [80, 300] Hz.
        resonances_hz (tuple[float, ...]): 2-3 formant-like resonance frequencies.
        rng_seed (int): Per-speaker seed.
    """

    speaker_id: str
    fundamental_frequency_hz: float
    resonances_hz: tuple[float, ...]
    rng_seed: int = 0

    def validate(self, sample_rate: int = DEFAULT_SAMPLE_RATE) -> "SpeakerSpec":
        if not 80.0 <= self.fundamental_frequency_hz <= 300.0:
            raise ValidationError(f"{self.speaker_id}: f0 must lie in [80, 300] Hz")
        if not 2 <= len(self.resonances_hz) <= 3:
            raise ValidationError(f"{self.speaker_id}: need 2-3 resonance frequencies")
        if any(not 0 < r < sample_rate / 2 for r in self.resonances_hz):
            raise ValidationError(f"{self.speaker_id}: resonances must be below Nyquist")
        return self


DEFAULT_ATTACKS = (
    SpoofAttackSpec("SA1", 4500.0),
    SpoofAttackSpec("SA2", 5500.0),
    SpoofAttackSpec("SA3", 6500.0),
    SpoofAttackSpec("SA4", 7500.0),
)


def utterance_seed(master_seed: int, utterance_id: str) -> int:
    """Seed for one utterance, derived from the master seed and the utterance id only."""
    entropy = [int(master_seed), zlib.crc32(utterance_id.encode("utf-8"))]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def default_speakers(n_speakers: int, seed: int = 0) -> list[SpeakerSpec]:
    """Speakers with f0 spread over [80, 300] Hz and three resonances below 3.5 kHz."""
    if n_speakers < 2:
        raise ValidationError("need at least 2 speakers")
    rng = np.random.default_rng([int(seed), 7919])
    f0s = np.linspace(85.0, 290.0, n_speakers)
    rng.shuffle(f0s)
    speakers = []
    for i, f0 in enumerate(f0s):
        resonances = (
            float(rng.uniform(350.0, 900.0)),
            float(rng.uniform(1000.0, 2300.0)),
            float(rng.uniform(2400.0, 3400.0)),
        )
        speakers.append(
            SpeakerSpec(f"spk{i:02d}", float(f0), resonances, utterance_seed(seed, f"spk{i:02d}"))
        )
    return speakers


def _resonator(samples: np.ndarray, freq_hz: float, sample_rate: int) -> np.ndarray:
    r = np.exp(-np.pi * RESONATOR_BANDWIDTH_HZ / sample_rate)
    theta = 2.0 * np.pi * freq_hz / sample_rate
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    b = [1.0 - r]
    return scipy.signal.lfilter(b, a, samples)


def generate_bonafide(
    speaker: SpeakerSpec,
    duration_s: float = 1.0,
    seed: int = 0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    jitter: float = 0.02,
) -> Waveform:
    """
    Synthesise one bona fide utterance.

    Args:
        speaker (SpeakerSpec): Voice to simulate.
        duration_s (float, optional): Length in seconds, at least 0.5. Defaults to 1.0.
        seed (int, optional): Utterance seed. Defaults to 0.
        sample_rate (int, optional): Defaults to 16000.
        jitter (float, optional): Relative per-utterance variation of f0 and resonances. Defaults to 0.02.

    Returns:
        Waveform: Utterance normalised to RMS 0.1.
    """
    if duration_s < 0.5:
        raise ValidationError(f"duration must be >= 0.5 s, got {duration_s}")
    speaker.validate(sample_rate)

    rng = np.random.default_rng([speaker.rng_seed, int(seed)])
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate

    f0 = speaker.fundamental_frequency_hz * (1.0 + rng.uniform(-jitter, jitter))
    phases = rng.uniform(0.0, 2.0 * np.pi, N_HARMONICS)
    source = np.zeros(n)
    for k in range(1, N_HARMONICS + 1):
        if k * f0 < sample_rate / 2:
            source += np.sin(2.0 * np.pi * k * f0 * t + phases[k - 1]) / k

    voiced = source
    for freq in speaker.resonances_hz:
        voiced = _resonator(voiced, freq * (1.0 + rng.uniform(-jitter, jitter)), sample_rate)
    voiced = voiced / np.sqrt(np.mean(voiced**2))

    noise = rng.standard_normal(n) * 10.0 ** (NOISE_DB / 20.0)
    samples = voiced + noise
    samples = samples * TARGET_RMS / np.sqrt(np.mean(samples**2))
    return Waveform(samples, sample_rate)


def generate_spoof(bona: Waveform, attack: SpoofAttackSpec, seed: int = 0) -> Waveform:
    """
    Add an attack's AM-tone artefact to an utterance.

    Args:
        bona (Waveform): Carrier utterance.
        attack (SpoofAttackSpec): Artefact parameters.
        seed (int, optional): Seeds the carrier phase. Defaults to 0.

    Returns:
        Waveform: bona + amplitude * RMS(bona) * (1 + depth * sin(2 pi fm t)) * sin(2 pi f t + phase).
    """
    attack.validate(bona.sample_rate)
    if attack.artifact_amplitude == 0:
        return bona
    rng = np.random.default_rng(int(seed))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(len(bona)) / bona.sample_rate
    envelope = 1.0 + attack.modulation_depth * np.sin(2.0 * np.pi * attack.modulation_hz * t)
    tone = envelope * np.sin(2.0 * np.pi * attack.artifact_frequency_hz * t + phase)
    return bona.with_samples(bona.samples + attack.artifact_amplitude * bona.rms() * tone)


@dataclass
class AttackDataset:
    """
    Attacker-side data for one spoofing attack.

    Args:
        attack_id (str): Attack identifier.
        part1 (list[Waveform]): Spoofs used to optimise filters.
        part2 (list[Waveform]): Unseen spoofs used to test universality.
        part1_ids (list[str]): Utterance ids of part1.
        part2_ids (list[str]): Utterance ids of part2.
        bona_pools (dict[str, dict[str, list[Waveform]]]): Attacker-side bona fide audio keyed by part, then speaker.
        manifest (pd.DataFrame): Manifest rows of this attack's spoofs.
    """

    attack_id: str
    part1: list[Waveform]
    part2: list[Waveform]
    part1_ids: list[str]
    part2_ids: list[str]
    bona_pools: dict[str, dict[str, list[Waveform]]] = field(default_factory=dict)
    manifest: pd.DataFrame | None = None

    def __post_init__(self):
        if len(self.part1) != len(self.part2):
            raise ValidationError(
                f"{self.attack_id}: part1 ({len(self.part1)}) and part2 ({len(self.part2)}) differ in size"
            )
        if set(self.part1_ids) & set(self.part2_ids):
            raise ValidationError(f"{self.attack_id}: part1 and part2 share utterance ids")


@dataclass
class Corpus:
    """
    A generated protocol: manifest plus audio, and the specs it was built from.
    """

    manifest: pd.DataFrame
    audio: dict[str, Waveform]
    speakers: list[SpeakerSpec]
    attacks: list[SpoofAttackSpec]
    seed: int = 0
    duration_s: float = 1.0
    jitter: float = 0.02
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def rows(self, partition: str | None = None, label: str | None = None, attack_id: str | None = None) -> pd.DataFrame:
        mask = np.ones(len(self.manifest), dtype=bool)
        if partition is not None:
            mask &= (self.manifest["partition"] == partition).to_numpy()
        if label is not None:
            mask &= (self.manifest["label"] == label).to_numpy()
        if attack_id is not None:
            mask &= (self.manifest["attack_id"] == attack_id).to_numpy()
        return self.manifest.loc[mask]

    def waveforms(self, partition: str | None = None, label: str | None = None, attack_id: str | None = None) -> list[Waveform]:
        return [self.audio[uid] for uid in self.rows(partition, label, attack_id)["utterance_id"]]

    def speaker(self, speaker_id: str) -> SpeakerSpec:
        for speaker in self.speakers:
            if speaker.speaker_id == speaker_id:
                return speaker
        raise KeyError(f"Unknown speaker {speaker_id}.")

    def attack(self, attack_id: str) -> SpoofAttackSpec:
        for attack in self.attacks:
            if attack.attack_id == attack_id:
                return attack
        raise ValidationError(f"Unknown attack {attack_id}; corpus has {[a.attack_id for a in self.attacks]}")

    def attack_dataset(self, attack_id: str) -> AttackDataset:
        self.attack(attack_id)
        parts = {}
        for part in ("part1", "part2"):
            parts[part] = self.rows(part, "spoof", attack_id)["utterance_id"].tolist()
        spoof_rows = self.rows(label="spoof", attack_id=attack_id)
        bona_pools = {}
        for part in ("part1", "part2"):
            rows = self.rows(part, "bonafide")
            bona_pools[part] = {
                spk: [self.audio[uid] for uid in grp["utterance_id"]]
                for spk, grp in rows.groupby("speaker_id", sort=True)
            }
        return AttackDataset(
            attack_id=attack_id,
            part1=[self.audio[uid] for uid in parts["part1"]],
            part2=[self.audio[uid] for uid in parts["part2"]],
            part1_ids=parts["part1"],
            part2_ids=parts["part2"],
            bona_pools=bona_pools,
            manifest=spoof_rows[spoof_rows["partition"].isin(["part1", "part2"])].reset_index(drop=True),
        )

    def enrollment(self, speaker_id: str, n: int = 3) -> list[Waveform]:
        return enrollment_utterances(
            self.speaker(speaker_id), n, self.seed, self.duration_s, self.sample_rate, self.jitter
        )


def enrollment_utterances(
    speaker: SpeakerSpec,
    n: int = 3,
    seed: int = 0,
    duration_s: float = 1.0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    jitter: float = 0.02,
) -> list[Waveform]:
    """Enrollment audio for the toy ASV; deterministic and outside the manifest."""
    if n < 1:
        raise ValidationError("need at least one enrollment utterance")
    return [
        generate_bonafide(
            speaker,
            duration_s,
            utterance_seed(seed, f"enroll_{speaker.speaker_id}_{k}"),
            sample_rate,
            jitter,
        )
        for k in range(n)
    ]


def _dev_splits(cm_dev_fraction: float) -> int:
    if not 0.0 < cm_dev_fraction <= 0.5:
        raise ValidationError("cm_dev_fraction must lie in (0, 0.5]")
    return max(2, int(round(1.0 / cm_dev_fraction)))


def build_protocol(
    n_speakers: int = 10,
    n_utts_per_class: int = 40,
    attacks: Sequence[SpoofAttackSpec] | None = None,
    seed: int = 0,
    *,
    n_bonafide: int = 200,
    n_cm_spoofs_per_attack: int = 40,
    duration_s: float = 1.0,
    cm_dev_fraction: float = 0.25,
    jitter: float = 0.02,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> Corpus:
    """
    Generate the full protocol.

    Bona fide utterances are split half defender (cm-train / cm-dev) and half
    attacker (part1 / part2). Each attack gets `n_cm_spoofs_per_attack`
    defender spoofs and `n_utts_per_class` attacker spoofs, the latter dealt
    evenly into part1 and part2.

    Args:
        n_speakers (int, optional): Simulated speakers. Defaults to 10.
        n_utts_per_class (int, optional): Attacker-side spoofs per attack; must be even. Defaults to 40.
        attacks (Sequence[SpoofAttackSpec], optional): Defaults to DEFAULT_ATTACKS.
        seed (int, optional): Master seed. Defaults to 0.
        n_bonafide (int, optional): Bona fide utterances; must be a multiple of 4. Defaults to 200.
        n_cm_spoofs_per_attack (int, optional): Defender-side spoofs per attack. Defaults to 40.
        duration_s (float, optional): Utterance length. Defaults to 1.0.
        cm_dev_fraction (float, optional): Share of defender data kept for CM development. Defaults to 0.25.
        jitter (float, optional): Per-utterance voice variation. Defaults to 0.02.
        sample_rate (int, optional): Defaults to 16000.

    Returns:
        Corpus: Manifest and audio.

    Raises:
        ValidationError: If n_utts_per_class is odd, n_bonafide is not a multiple of 4, or attack ids repeat.
    """
    attacks = list(DEFAULT_ATTACKS if attacks is None else attacks)
    if n_utts_per_class < 2 or n_utts_per_class % 2:
        raise ValidationError(
            f"n_utts_per_class must be even so Part 1 and Part 2 are equal, got {n_utts_per_class}"
        )
    if n_bonafide < 4 or n_bonafide % 4:
        raise ValidationError(f"n_bonafide must be a positive multiple of 4, got {n_bonafide}")
    if n_cm_spoofs_per_attack < 2:
        raise ValidationError("n_cm_spoofs_per_attack must be >= 2")
    ids = [a.attack_id for a in attacks]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"attack ids must be unique, got {ids}")
    if not attacks:
        raise ValidationError("need at least one attack")
    for attack in attacks:
        attack.validate(sample_rate)

    speakers = default_speakers(n_speakers, seed)
    n_dev_splits = _dev_splits(cm_dev_fraction)
    rows = []
    audio = {}

    def bonafide(speaker: SpeakerSpec, uid: str) -> Waveform:
        return generate_bonafide(speaker, duration_s, utterance_seed(seed, uid), sample_rate, jitter)

    def add_block(block: list[dict], group_types: list[str], partitions: tuple[str, str], n_splits: int):
        folds = AttackBalancedSplit(n_splits).fold_assignments(
            [r["utterance_id"] for r in block], group_types
        )
        for row, fold in zip(block, folds):
            row["partition"] = partitions[0] if fold == 0 else partitions[1]
            rows.append(row)

    half = n_bonafide // 2
    for realm, offset, partitions, n_splits in (
        ("defender", 0, ("cm-dev", "cm-train"), n_dev_splits),
        ("attacker", half, ("part1", "part2"), 2),
    ):
        block = []
        for i in range(offset, offset + half):
            speaker = speakers[i % n_speakers]
            uid = f"bona_{i:04d}"
            audio[uid] = bonafide(speaker, uid)
            block.append(dict(utterance_id=uid, speaker_id=speaker.speaker_id, label="bonafide", attack_id="-"))
        add_block(block, [r["speaker_id"] for r in block], partitions, n_splits)
        logger.info("generated %d %s bona fide utterances", len(block), realm)

    for realm, tag, count, partitions, n_splits in (
        ("defender", "cm_", n_cm_spoofs_per_attack, ("cm-dev", "cm-train"), n_dev_splits),
        ("attacker", "", n_utts_per_class, ("part1", "part2"), 2),
    ):
        block = []
        for attack in attacks:
            for i in range(count):
                speaker = speakers[i % n_speakers]
                uid = f"{attack.attack_id}_{tag}{i:04d}"
                carrier = bonafide(speaker, f"{uid}_carrier")
                audio[uid] = generate_spoof(carrier, attack, utterance_seed(seed, uid))
                block.append(
                    dict(utterance_id=uid, speaker_id=speaker.speaker_id, label="spoof", attack_id=attack.attack_id)
                )
        add_block(block, [r["attack_id"] for r in block], partitions, n_splits)
        logger.info("generated %d %s spoofed utterances", len(block), realm)

    manifest = pd.DataFrame(rows)
    manifest["wav_path"] = "wav/" + manifest["utterance_id"] + ".wav"
    manifest = manifest[MANIFEST_COLUMNS]
    return Corpus(manifest, audio, speakers, attacks, seed, duration_s, jitter, sample_rate)


@dataclass(frozen=True)
class CorpusConfig:
    """Protocol size and voice settings; see `build_protocol`."""

    n_speakers: int = 10
    n_utts_per_class: int = 40
    n_bonafide: int = 200
    n_cm_spoofs_per_attack: int = 40
    duration_s: float = 1.0
    cm_dev_fraction: float = 0.25
    jitter: float = 0.02
    attacks: tuple[dict, ...] = tuple(
        dict(attack_id=a.attack_id, artifact_frequency_hz=a.artifact_frequency_hz, artifact_amplitude=a.artifact_amplitude)
        for a in DEFAULT_ATTACKS
    )

    def __post_init__(self):
        self.attack_specs()

    def attack_specs(self) -> list[SpoofAttackSpec]:
        try:
            return [SpoofAttackSpec(**a) for a in self.attacks]
        except TypeError as e:
            raise ValidationError(f"malformed attack entry: {e}") from e

    def build(self, seed: int = 0, sample_rate: int = DEFAULT_SAMPLE_RATE) -> Corpus:
        return build_protocol(
            self.n_speakers,
            self.n_utts_per_class,
            self.attack_specs(),
            seed,
            n_bonafide=self.n_bonafide,
            n_cm_spoofs_per_attack=self.n_cm_spoofs_per_attack,
            duration_s=self.duration_s,
            cm_dev_fraction=self.cm_dev_fraction,
            jitter=self.jitter,
            sample_rate=sample_rate,
        )


def corpus_metadata(corpus: Corpus) -> dict:
    return {
        "seed": corpus.seed,
        "duration_s": corpus.duration_s,
        "jitter": corpus.jitter,
        "sample_rate": corpus.sample_rate,
        "speakers": [asdict(s) for s in corpus.speakers],
        "attacks": [asdict(a) for a in corpus.attacks],
    }


def corpus_from_metadata(meta: dict, manifest: pd.DataFrame, audio: dict[str, Waveform]) -> Corpus:
    speakers = [
        SpeakerSpec(s["speaker_id"], s["fundamental_frequency_hz"], tuple(s["resonances_hz"]), s["rng_seed"])
        for s in meta["speakers"]
    ]
    attacks = [SpoofAttackSpec(**a) for a in meta["attacks"]]
    return Corpus(
        manifest,
        audio,
        speakers,
        attacks,
        meta["seed"],
        meta["duration_s"],
        meta["jitter"],
        meta["sample_rate"],
    )


def write_corpus(corpus: Corpus, out_dir: Path) -> Path:
    """
    Write `manifest.csv`, `corpus.json` and one WAV per utterance under `out_dir`.

    Returns:
        Path: The manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for uid, rel_path in zip(corpus.manifest["utterance_id"], corpus.manifest["wav_path"]):
        write_wav(out_dir / rel_path, corpus.audio[uid])
    write_json(out_dir / "corpus.json", corpus_metadata(corpus))
    manifest_path = write_csv(out_dir / "manifest.csv", corpus.manifest)
    logger.info("wrote %d utterances to %s", len(corpus.manifest), out_dir)
    return manifest_path
