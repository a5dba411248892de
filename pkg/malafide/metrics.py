import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
import scipy.special
from sklearn.metrics import roc_curve

from malafide.dsp import MalafideFilter, Waveform, convolve_same
from malafide.errors import DegenerateScoresWarning, ValidationError

logger = logging.getLogger(__name__)

SCORE_LABELS = ("bonafide", "spoof", "target", "nontarget")


def normalize_scores(logit_spoof, logit_bonafide):
    """
    Softmax probability of the bona fide class.

    Args:
        logit_spoof (float | np.ndarray): Spoof-class logit(s).
        logit_bonafide (float | np.ndarray): Bona fide-class logit(s).

    Returns:
        float | np.ndarray: exp(lb) / (exp(lb) + exp(ls)), evaluated after subtracting the larger logit.
    """
    logits = np.stack(np.broadcast_arrays(logit_spoof, logit_bonafide), axis=-1).astype(np.float64)
    prob = scipy.special.softmax(logits, axis=-1)[..., 1]
    return float(prob) if prob.ndim == 0 else prob


def success_rate(scorer, filter: MalafideFilter, spoofs: Sequence[Waveform]) -> float:
    """
    Fraction of spoofed utterances the CM calls bona fide after filtering.

    Args:
        scorer (DifferentiableScorer): Countermeasure.
        filter (MalafideFilter): Filter applied to every utterance.
        spoofs (Sequence[Waveform]): Spoofed utterances.

    Returns:
        float: Share of utterances with normalised filtered score strictly above 0.5.
    """
    if len(spoofs) == 0:
        raise ValidationError("success_rate needs at least one spoofed utterance")
    filtered = [convolve_same(s, filter).samples for s in spoofs]
    logits = scorer.logits(filtered)
    probs = normalize_scores(logits[:, 0], logits[:, 1])
    return float(np.count_nonzero(probs > 0.5)) / len(spoofs)


def _as_scores(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    return arr


def compute_eer(positive_scores, negative_scores) -> tuple[float, float]:
    """
    Equal error rate between a positive and a negative score class.

    FAR(t) is the share of negatives scoring >= t and FRR(t) the share of
    positives scoring < t. The EER is read where FAR - FRR changes sign,
    interpolating linearly between the two neighbouring operating points.

    Args:
        positive_scores (array-like): Scores of the positive class (bona fide, target).
        negative_scores (array-like): Scores of the negative class.

    Returns:
        tuple[float, float]: (EER in [0, 1], threshold at the crossing).
    """
    pos = _as_scores(positive_scores, "positive_scores")
    neg = _as_scores(negative_scores, "negative_scores")

    labels = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
    scores = np.concatenate([pos, neg])
    far, tpr, thresholds = roc_curve(labels, scores, pos_label=1, drop_intermediate=False)
    frr = 1.0 - tpr
    diff = far - frr

    i = int(np.argmax(diff >= 0))
    if diff[i] == 0 or i == 0:
        return float(far[i]), float(thresholds[i])

    w = -diff[i - 1] / (diff[i] - diff[i - 1])
    eer = far[i - 1] + w * (far[i] - far[i - 1])
    t_prev = thresholds[i - 1] if np.isfinite(thresholds[i - 1]) else thresholds[i]
    threshold = t_prev + w * (thresholds[i] - t_prev)
    return float(eer), float(threshold)


def _min_max(scores: np.ndarray, name: str) -> np.ndarray:
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        warnings.warn(
            f"{name} scores are constant over the trial set; contributing 0.5",
            DegenerateScoresWarning,
            stacklevel=3,
        )
        return np.full(scores.shape, 0.5)
    return (scores - lo) / (hi - lo)


def fuse_scores(cm_scores, asv_scores, weights: tuple[float, float] = (1.0, 1.0)) -> np.ndarray:
    """
    Score-level CM + ASV fusion.

    Each system is min-max normalised to [0, 1] over the full trial set and the
    two are summed with the given weights.

    Args:
        cm_scores (array-like): CM scores, one per trial.
        asv_scores (array-like): ASV scores aligned with `cm_scores`.
        weights (tuple[float, float], optional): (CM weight, ASV weight). Defaults to (1.0, 1.0).

    Returns:
        np.ndarray: Fused scores.
    """
    cm = _as_scores(cm_scores, "cm_scores")
    asv = _as_scores(asv_scores, "asv_scores")
    if cm.size != asv.size:
        raise ValidationError(f"length mismatch: {cm.size} CM scores vs {asv.size} ASV scores")
    if min(weights) < 0:
        raise ValidationError("fusion weights must be non-negative")
    return weights[0] * _min_max(cm, "CM") + weights[1] * _min_max(asv, "ASV")


def compute_sasv_eer(target_fused, nontarget_fused, spoof_fused) -> float:
    """
    SASV-EER: targets are positives, non-targets and spoofs together are negatives.
    """
    target = _as_scores(target_fused, "target scores")
    negatives = np.concatenate(
        [np.asarray(nontarget_fused, dtype=np.float64).reshape(-1), np.asarray(spoof_fused, dtype=np.float64).reshape(-1)]
    )
    if negatives.size == 0:
        raise ValidationError("SASV-EER needs non-target or spoofed trials")
    eer, _ = compute_eer(target, negatives)
    return eer


def compute_sasv_breakdown(target, nontarget, spoof) -> dict[str, float | None]:
    """SV-EER (target vs non-target), SPF-EER (target vs spoof) and SASV-EER."""
    target = _as_scores(target, "target scores")
    nontarget = np.asarray(nontarget, dtype=np.float64).reshape(-1)
    spoof = np.asarray(spoof, dtype=np.float64).reshape(-1)
    return {
        "sv_eer": compute_eer(target, nontarget)[0] if nontarget.size else None,
        "spf_eer": compute_eer(target, spoof)[0] if spoof.size else None,
        "sasv_eer": compute_sasv_eer(target, nontarget, spoof),
    }


@dataclass
class TrialScores:
    """
    Labelled score collections.

    CM evaluation uses `bona_scores` / `spoof_scores`; SASV evaluation uses
    `target_scores`, `nontarget_scores` and `spoof_trial_scores`. Higher is
    more bona fide / more target.
    """

    bona_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    spoof_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    target_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nontarget_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    spoof_trial_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def cm_eer(self) -> tuple[float, float]:
        return compute_eer(self.bona_scores, self.spoof_scores)

    def sasv_eer(self) -> float:
        return compute_sasv_eer(self.target_scores, self.nontarget_scores, self.spoof_trial_scores)

    def counts(self) -> dict[str, int]:
        return {
            "bonafide": int(np.size(self.bona_scores)),
            "spoof": int(np.size(self.spoof_scores)),
            "target": int(np.size(self.target_scores)),
            "nontarget": int(np.size(self.nontarget_scores)),
            "spoof_trial": int(np.size(self.spoof_trial_scores)),
        }

    @classmethod
    def from_frame(cls, df: pd.DataFrame, kind: str = "cm") -> "TrialScores":
        """
        Build from a score-file table (trial_id, label, attack_id, score).

        Args:
            df (pd.DataFrame): Score table.
            kind (str, optional): "cm" reads bonafide/spoof rows, "sasv" reads target/nontarget/spoof. Defaults to "cm".
        """
        unknown = set(df["label"]) - set(SCORE_LABELS)
        if unknown:
            raise ValidationError(f"unknown score labels {sorted(unknown)}")

        def pick(label: str) -> np.ndarray:
            return df.loc[df["label"] == label, "score"].to_numpy(dtype=np.float64)

        if kind == "cm":
            return cls(bona_scores=pick("bonafide"), spoof_scores=pick("spoof"))
        if kind == "sasv":
            return cls(
                target_scores=pick("target"),
                nontarget_scores=pick("nontarget"),
                spoof_trial_scores=pick("spoof"),
            )
        raise ValidationError(f"unknown score table kind {kind!r}")


def eer_report(metric: str, eer: float, threshold: float | None, counts: dict[str, int]) -> dict:
    return {"metric": metric, "value": eer, "threshold": threshold, "n_trials": counts}
