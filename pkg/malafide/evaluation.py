"""
CM and SASV evaluation of Malafide filters on the attacker's Part 2 data.

Filters are keyed by attack: the filter optimised for attack a is applied to
the spoofs of attack a only; bona fide audio is never filtered.
"""

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from malafide.asv import build_sasv_trials, score_against_model, speaker_model
from malafide.corpus import Corpus
from malafide.detector import DifferentiableScorer, cm_scores
from malafide.dsp import (
    FILTER_LENGTHS,
    MalafideFilter,
    Waveform,
    convolve_same,
    dirac_filter,
    filter_distortion_db,
    frequency_response,
)
from malafide.errors import ValidationError
from malafide.metrics import (
    compute_eer,
    compute_sasv_breakdown,
    fuse_scores,
    success_rate,
)

logger = logging.getLogger(__name__)

NO_FILTER = "no filter"


@dataclass(frozen=True)
class EvalConfig:
    """
    Evaluation settings.

    Args:
        partition (str): Manifest partition scored. Defaults to "part2".
        sasv_length (int): Filter length used for SASV tables. Defaults to 257.
        spoof_fraction (float): Share of spoofed SASV trials kept, in [0, 1]. Defaults to 1.0.
        fusion_weights (tuple[float, float]): (CM, ASV) fusion weights. Defaults to (1.0, 1.0).
        n_fft (int): FFT size for filter responses. Defaults to 8192.
        enrollment_per_speaker (int): Enrollment utterances per speaker model. Defaults to 3.
    """

    partition: str = "part2"
    sasv_length: int = 257
    spoof_fraction: float = 1.0
    fusion_weights: tuple[float, float] = (1.0, 1.0)
    n_fft: int = 8192
    enrollment_per_speaker: int = 3

    def __post_init__(self):
        if not 0.0 <= self.spoof_fraction <= 1.0:
            raise ValidationError(f"spoof_fraction must lie in [0, 1], got {self.spoof_fraction}")
        if self.sasv_length not in FILTER_LENGTHS:
            raise ValidationError(
                f"filter length must be odd and in catalog {FILTER_LENGTHS}, got {self.sasv_length}"
            )
        if len(self.fusion_weights) != 2 or min(self.fusion_weights) < 0:
            raise ValidationError("fusion_weights must be two non-negative numbers")
        if self.enrollment_per_speaker < 1:
            raise ValidationError("enrollment_per_speaker must be >= 1")


def _check_filters(corpus: Corpus, filters: Mapping[str, MalafideFilter] | None) -> dict:
    filters = dict(filters or {})
    for attack_id, filter in filters.items():
        corpus.attack(attack_id)
        if filter.sample_rate != corpus.sample_rate:
            raise ValidationError(
                f"sample-rate mismatch: filter for {attack_id} at {filter.sample_rate} Hz, "
                f"corpus at {corpus.sample_rate} Hz"
            )
    return filters


def _maybe_filter(waveform: Waveform, attack_id: str, filters: Mapping[str, MalafideFilter]) -> Waveform:
    filter = filters.get(attack_id)
    return waveform if filter is None else convolve_same(waveform, filter)


def cm_score_table(
    scorer: DifferentiableScorer,
    corpus: Corpus,
    filters: Mapping[str, MalafideFilter] | None = None,
    partition: str = "part2",
) -> pd.DataFrame:
    """
    Score every utterance of a partition, filtering spoofs of attacks that have a filter.

    Returns:
        pd.DataFrame: Columns trial_id, label, attack_id, score.
    """
    filters = _check_filters(corpus, filters)
    rows = corpus.rows(partition).reset_index(drop=True)
    if rows.empty:
        raise ValidationError(f"partition {partition!r} is empty")
    signals = [
        _maybe_filter(corpus.audio[uid], attack_id, filters).samples
        for uid, attack_id in zip(rows["utterance_id"], rows["attack_id"])
    ]
    return pd.DataFrame(
        {
            "trial_id": rows["utterance_id"],
            "label": rows["label"],
            "attack_id": rows["attack_id"],
            "score": cm_scores(scorer, signals),
        }
    )


@dataclass
class CmEvaluation:
    scorer_id: str
    scores: pd.DataFrame
    eer: float
    threshold: float
    per_attack: pd.DataFrame

    def to_dict(self) -> dict:
        return {
            "scorer_id": self.scorer_id,
            "metric": "cm_eer",
            "value": self.eer,
            "threshold": self.threshold,
            "n_trials": {
                label: int((self.scores["label"] == label).sum()) for label in ("bonafide", "spoof")
            },
            "per_attack": self.per_attack.to_dict(orient="records"),
        }


def evaluate_cm(
    scorer: DifferentiableScorer,
    corpus: Corpus,
    filters: Mapping[str, MalafideFilter] | None = None,
    partition: str = "part2",
) -> CmEvaluation:
    """
    CM EER of bona fide vs (filtered) spoofed utterances, pooled and per attack.

    Args:
        scorer (DifferentiableScorer): Countermeasure under evaluation.
        corpus (Corpus): Corpus holding the partition.
        filters (Mapping[str, MalafideFilter], optional): Filter per attack id. Unfiltered when omitted.
        partition (str, optional): Defaults to "part2".

    Returns:
        CmEvaluation: Scores, pooled EER and a per-attack table with EER,
            success rate, Dirac-baseline success rate and distortion.
    """
    filters = _check_filters(corpus, filters)
    scores = cm_score_table(scorer, corpus, filters, partition)
    bona = scores.loc[scores["label"] == "bonafide", "score"]
    spoof = scores.loc[scores["label"] == "spoof", "score"]
    if bona.empty or spoof.empty:
        raise ValidationError(f"partition {partition!r} needs both bona fide and spoofed utterances")
    eer, threshold = compute_eer(bona, spoof)

    identity = dirac_filter(FILTER_LENGTHS[0], corpus.sample_rate)
    per_attack = []
    for attack_id in sorted(scores.loc[scores["label"] == "spoof", "attack_id"].unique()):
        spoofs = corpus.waveforms(partition, "spoof", attack_id)
        filter = filters.get(attack_id)
        attack_eer, _ = compute_eer(bona, scores.loc[scores["attack_id"] == attack_id, "score"])
        per_attack.append(
            {
                "attack_id": attack_id,
                "filter_length": filter.length if filter is not None else 0,
                "eer": attack_eer,
                "success_rate": success_rate(scorer, filter if filter is not None else identity, spoofs),
                "dirac_success_rate": success_rate(scorer, identity, spoofs),
                "distortion_db": filter_distortion_db(filter, spoofs) if filter is not None else None,
            }
        )
    logger.info(
        "%s on %s: CM EER %.4f over %d bona fide / %d spoofed (%d filtered attacks)",
        scorer.scorer_id,
        partition,
        eer,
        len(bona),
        len(spoof),
        len(filters),
    )
    return CmEvaluation(scorer.scorer_id, scores, eer, threshold, pd.DataFrame(per_attack))


@dataclass
class SasvEvaluation:
    scorer_id: str
    trials: pd.DataFrame
    breakdown: dict
    asv_sv_eer: float
    spoof_fraction: float
    counts: dict = field(default_factory=dict)

    @property
    def sasv_eer(self) -> float:
        return self.breakdown["sasv_eer"]

    def to_dict(self) -> dict:
        return {
            "scorer_id": self.scorer_id,
            "metric": "sasv_eer",
            "value": self.sasv_eer,
            "threshold": None,
            "n_trials": self.counts,
            "sv_eer": self.breakdown["sv_eer"],
            "spf_eer": self.breakdown["spf_eer"],
            "asv_sv_eer": self.asv_sv_eer,
            "spoof_fraction": self.spoof_fraction,
        }


def subsample_spoof_trials(trials: pd.DataFrame, fraction: float, seed: int = 0) -> pd.DataFrame:
    """Keep round(fraction * n) spoof trials, chosen with a seeded generator, in their original order."""
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"spoof_fraction must lie in [0, 1], got {fraction}")
    spoof_idx = np.flatnonzero((trials["label"] == "spoof").to_numpy())
    n_keep = int(round(fraction * spoof_idx.size))
    keep = np.sort(np.random.default_rng(seed).choice(spoof_idx, size=n_keep, replace=False))
    mask = (trials["label"] != "spoof").to_numpy()
    mask[keep] = True
    return trials.loc[mask].reset_index(drop=True)


def evaluate_sasv(
    scorer: DifferentiableScorer,
    corpus: Corpus,
    filters: Mapping[str, MalafideFilter] | None = None,
    config: EvalConfig = EvalConfig(),
) -> SasvEvaluation:
    """
    SASV evaluation: the CM and the toy ASV are fused at score level.

    Each trial is scored by the CM (on the possibly filtered test utterance)
    and by the toy ASV against the claimed speaker's enrollment; the fused
    scores give the SV-, SPF- and SASV-EER.

    Args:
        scorer (DifferentiableScorer): Countermeasure.
        corpus (Corpus): Corpus holding the partition.
        filters (Mapping[str, MalafideFilter], optional): Filter per attack id.
        config (EvalConfig, optional): Partition, spoof fraction and fusion weights.

    Returns:
        SasvEvaluation: Per-trial scores and the EER breakdown.
    """
    filters = _check_filters(corpus, filters)
    trials = build_sasv_trials(corpus, config.partition)
    trials = subsample_spoof_trials(trials, config.spoof_fraction, corpus.seed)
    if not (trials["label"] == "target").any():
        raise ValidationError(f"partition {config.partition!r} yields no target trials")

    tests = [
        _maybe_filter(corpus.audio[uid], attack_id, filters)
        for uid, attack_id in zip(trials["utterance_id"], trials["attack_id"])
    ]
    models = {
        spk: speaker_model(corpus.enrollment(spk, config.enrollment_per_speaker))
        for spk in sorted(trials["claimed_speaker"].unique())
    }
    trials = trials.assign(
        cm_score=cm_scores(scorer, [w.samples for w in tests]),
        asv_score=[
            score_against_model(models[spk], w) for spk, w in zip(trials["claimed_speaker"], tests)
        ],
    )
    trials["fused_score"] = fuse_scores(trials["cm_score"], trials["asv_score"], config.fusion_weights)

    def pick(label: str, column: str) -> np.ndarray:
        return trials.loc[trials["label"] == label, column].to_numpy()

    breakdown = compute_sasv_breakdown(
        pick("target", "fused_score"), pick("nontarget", "fused_score"), pick("spoof", "fused_score")
    )
    asv_sv_eer, _ = compute_eer(pick("target", "asv_score"), pick("nontarget", "asv_score"))
    counts = {label: int((trials["label"] == label).sum()) for label in ("target", "nontarget", "spoof")}
    logger.info(
        "%s SASV on %s: SASV-EER %.4f, SV-EER %.4f, SPF-EER %s, toy ASV EER %.4f, trials %s",
        scorer.scorer_id,
        config.partition,
        breakdown["sasv_eer"],
        breakdown["sv_eer"],
        breakdown["spf_eer"],
        asv_sv_eer,
        counts,
    )
    return SasvEvaluation(scorer.scorer_id, trials, breakdown, asv_sv_eer, config.spoof_fraction, counts)


def transfer_matrix(
    corpus: Corpus,
    scorers: Mapping[str, DifferentiableScorer],
    filter_sets: Mapping[tuple[str, int], Mapping[str, MalafideFilter]],
    lengths: Sequence[int],
    partition: str = "part2",
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    White-box and black-box CM EERs for every (training scorer, evaluation scorer) pair.

    Args:
        corpus (Corpus): Corpus holding the partition.
        scorers (Mapping[str, DifferentiableScorer]): Scorers by id.
        filter_sets (Mapping[tuple[str, int], Mapping[str, MalafideFilter]]): Filters per attack,
            keyed by (id of the scorer they were optimised on, filter length).
        lengths (Sequence[int]): Row order.
        partition (str, optional): Defaults to "part2".

    Returns:
        tuple[pd.DataFrame, pd.DataFrame]: Wide table (rows "no filter" and each length,
            columns "<train>→<eval>") and the long per-attack table behind it.
    """
    ids = list(scorers)
    wide = {}
    long_rows = []
    for eval_id in ids:
        baseline = evaluate_cm(scorers[eval_id], corpus, None, partition)
        for train_id in ids:
            column = f"{train_id}→{eval_id}"
            wide.setdefault(column, {})[NO_FILTER] = baseline.eer
            long_rows.extend(_long_rows(baseline, train_id, eval_id, 0))
            for length in lengths:
                filters = filter_sets.get((train_id, length))
                if filters is None:
                    wide[column][str(length)] = np.nan
                    continue
                result = evaluate_cm(scorers[eval_id], corpus, filters, partition)
                wide[column][str(length)] = result.eer
                long_rows.extend(_long_rows(result, train_id, eval_id, length))
    table = pd.DataFrame(wide).reindex([NO_FILTER] + [str(L) for L in lengths])
    table.index.name = "filter_length"
    return table.reset_index(), pd.DataFrame(long_rows)


def _long_rows(result: CmEvaluation, train_id: str, eval_id: str, length: int) -> list[dict]:
    rows = [
        {
            "train_scorer": train_id,
            "eval_scorer": eval_id,
            "filter_length": length,
            "attack_id": "pooled",
            "eer": result.eer,
            "success_rate": np.nan,
        }
    ]
    for record in result.per_attack.to_dict(orient="records"):
        rows.append(
            {
                "train_scorer": train_id,
                "eval_scorer": eval_id,
                "filter_length": length,
                "attack_id": record["attack_id"],
                "eer": record["eer"],
                "success_rate": record["success_rate"],
            }
        )
    return rows


def sasv_matrix(
    corpus: Corpus,
    scorers: Mapping[str, DifferentiableScorer],
    filter_sets: Mapping[str, Mapping[str, MalafideFilter]],
    config: EvalConfig = EvalConfig(),
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    SASV-EER with each CM fused with the toy ASV, without filtering and under
    filters optimised on each scorer.

    Args:
        filter_sets (Mapping[str, Mapping[str, MalafideFilter]]): Filters per attack keyed by training scorer id.

    Returns:
        tuple[pd.DataFrame, pd.DataFrame]: Wide table (rows = evaluation CM, columns
            "no filter" and each training CM) and the long breakdown table.
    """
    wide_rows = []
    long_rows = []
    for eval_id, scorer in scorers.items():
        row = {"eval_scorer": eval_id}
        for source, filters in [(NO_FILTER, None), *filter_sets.items()]:
            result = evaluate_sasv(scorer, corpus, filters, config)
            row[source] = result.sasv_eer
            long_rows.append(
                {
                    "eval_scorer": eval_id,
                    "filter_source": source,
                    "filter_length": 0 if filters is None else config.sasv_length,
                    "sasv_eer": result.sasv_eer,
                    "sv_eer": result.breakdown["sv_eer"],
                    "spf_eer": result.breakdown["spf_eer"],
                    "asv_sv_eer": result.asv_sv_eer,
                }
            )
        wide_rows.append(row)
    return pd.DataFrame(wide_rows), pd.DataFrame(long_rows)


def artifact_attenuation_db(filter: MalafideFilter, artifact_frequency_hz: float, n_fft: int = 8192) -> float:
    """
    Attenuation at an attack's artifact frequency relative to the median response bin.

    Returns:
        float: median(response dB) - response dB at the artifact bin; positive means attenuated.
    """
    response = frequency_response(filter, n_fft)
    finite = response.magnitude_db[np.isfinite(response.magnitude_db)]
    return float(np.median(finite) - response.at_frequency(artifact_frequency_hz))


def artifact_table(corpus: Corpus, filters: Mapping[str, MalafideFilter], n_fft: int = 8192) -> pd.DataFrame:
    rows = []
    for attack_id, filter in sorted(filters.items()):
        attack = corpus.attack(attack_id)
        rows.append(
            {
                "attack_id": attack_id,
                "scorer_id": filter.scorer_id,
                "filter_length": filter.length,
                "artifact_frequency_hz": attack.artifact_frequency_hz,
                "attenuation_db": artifact_attenuation_db(filter, attack.artifact_frequency_hz, n_fft),
            }
        )
    return pd.DataFrame(rows)


def trend_summary(
    baseline: CmEvaluation,
    white_box: CmEvaluation,
    transfer_baseline: CmEvaluation | None = None,
    black_box: CmEvaluation | None = None,
    sasv_long: pd.DataFrame | None = None,
    artifacts: pd.DataFrame | None = None,
    eer_factor: float = 4.0,
    baseline_ceiling: float = 0.05,
    asv_ceiling: float = 0.15,
    attenuation_floor_db: float = 3.0,
) -> dict:
    """
    Qualitative attack trends of one run.

    `baseline` / `white_box` are the same scorer without and with filters
    optimised on it; `transfer_baseline` / `black_box` are a second scorer
    without and with those same filters. Checks whose inputs are missing are
    reported as None.

    Returns:
        dict: Measured values plus a boolean verdict per trend.
    """
    factor = white_box.eer / baseline.eer if baseline.eer > 0 else None
    success = float(white_box.per_attack["success_rate"].mean())
    dirac = float(white_box.per_attack["dirac_success_rate"].mean())
    summary = {
        "scorer_id": baseline.scorer_id,
        "baseline_eer": baseline.eer,
        "attacked_eer": white_box.eer,
        "eer_factor": factor,
        "white_box_degrades": bool(
            baseline.eer < baseline_ceiling
            and white_box.eer > baseline.eer
            and white_box.eer >= eer_factor * baseline.eer
        ),
        "part2_success_rate": success,
        "dirac_part2_success_rate": dirac,
        "universal": success > dirac,
        "transfer_scorer_id": None,
        "transfer_baseline_eer": None,
        "transfer_attacked_eer": None,
        "transfers": None,
        "sasv_baseline": None,
        "sasv_attacked": None,
        "asv_sv_eer": None,
        "sasv_degrades": None,
        "mean_attenuation_db": None,
        "artifact_attenuated": None,
    }
    if transfer_baseline is not None and black_box is not None:
        summary.update(
            transfer_scorer_id=transfer_baseline.scorer_id,
            transfer_baseline_eer=transfer_baseline.eer,
            transfer_attacked_eer=black_box.eer,
            transfers=black_box.eer >= transfer_baseline.eer,
        )
    if sasv_long is not None and not sasv_long.empty:
        own = sasv_long.loc[sasv_long["eval_scorer"] == baseline.scorer_id].set_index("filter_source")
        if NO_FILTER in own.index and baseline.scorer_id in own.index:
            summary.update(
                sasv_baseline=float(own.loc[NO_FILTER, "sasv_eer"]),
                sasv_attacked=float(own.loc[baseline.scorer_id, "sasv_eer"]),
                asv_sv_eer=float(own.loc[NO_FILTER, "asv_sv_eer"]),
            )
            summary["sasv_degrades"] = bool(
                summary["sasv_attacked"] > summary["sasv_baseline"] and summary["asv_sv_eer"] < asv_ceiling
            )
    if artifacts is not None and not artifacts.empty:
        own = artifacts.loc[artifacts["scorer_id"] == baseline.scorer_id, "attenuation_db"]
        if not own.empty:
            summary["mean_attenuation_db"] = float(own.mean())
            summary["artifact_attenuated"] = bool((own >= attenuation_floor_db).mean() > 0.5)
    return summary
