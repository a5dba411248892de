"""
Malafide filter optimisation.

A filter m for attack a is optimised to maximise sum_i CM(s_i * m) over the
attack's Part 1 spoofs, starting from a He-initialised filter whose centre
tap is 1 and re-pinning that tap after every batch update.
"""

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from malafide.corpus import AttackDataset
from malafide.detector import DifferentiableScorer, cm_scores
from malafide.dsp import (
    DEFAULT_SAMPLE_RATE,
    MalafideFilter,
    Waveform,
    check_filter_length,
    convolve_same_array,
    dirac_filter,
    filter_to_dict,
)
from malafide.errors import NumericalError, ValidationError
from malafide.metrics import success_rate
from malafide.optim import AdamState, adam_update

logger = logging.getLogger(__name__)

LEARNING_RATE_GRID = (1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class AttackConfig:
    """
    Filter optimisation settings.

    Args:
        filter_length (int): Number of taps L, odd and >= 3.
        epochs (int): Passes over Part 1. Defaults to 15.
        batch_size (int): Utterances per update. Defaults to 14.
        learning_rate (float): Adam step size. Defaults to 1e-3.
        weight_decay (float): L2 coefficient applied to every tap before projection. Defaults to 1e-4.
        adam_beta1 (float): Defaults to 0.9.
        adam_beta2 (float): Defaults to 0.999.
        adam_epsilon (float): Defaults to 1e-8.
        rng_seed (int): Seeds initialisation and batch order. Defaults to 0.
    """

    filter_length: int = 257
    epochs: int = 15
    batch_size: int = 14
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        if self.filter_length < 3 or self.filter_length % 2 == 0:
            raise ValidationError(f"filter_length must be odd and >= 3, got {self.filter_length}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ValidationError(f"weight_decay must be >= 0, got {self.weight_decay}")

    def with_length(self, length: int) -> "AttackConfig":
        return replace(self, filter_length=length)


def he_init_filter(
    length: int,
    seed: int = 0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    attack_id: str = "-",
    scorer_id: str = "-",
    catalog_only: bool = True,
) -> MalafideFilter:
    """
    He-uniform initialisation with the centre tap pinned to 1.

    Args:
        length (int): Filter length L.
        seed (int, optional): Generator seed. Defaults to 0.
        sample_rate (int, optional): Defaults to 16000.
        attack_id (str, optional): Defaults to "-".
        scorer_id (str, optional): Defaults to "-".
        catalog_only (bool, optional): Reject lengths outside FILTER_LENGTHS. Defaults to True.

    Returns:
        MalafideFilter: Taps drawn i.i.d. from U(-sqrt(3/L), sqrt(3/L)), centre set to 1.
    """
    length = check_filter_length(length, catalog_only=catalog_only)
    bound = np.sqrt(3.0 / length)
    coefficients = np.random.default_rng(seed).uniform(-bound, bound, size=length)
    coefficients[(length - 1) // 2] = 1.0
    return MalafideFilter(coefficients, attack_id, scorer_id, sample_rate)


def project_dirac(filter: MalafideFilter) -> MalafideFilter:
    """Reset the centre tap to exactly 1, leaving every other tap unchanged."""
    coefficients = filter.coefficients.copy()
    coefficients[filter.center_index] = 1.0
    return filter.with_coefficients(coefficients)


def _check_batch(batch: Sequence[Waveform], filter: MalafideFilter) -> None:
    if len(batch) == 0:
        raise ValidationError("batch must hold at least one spoofed utterance")
    for signal in batch:
        if signal.sample_rate != filter.sample_rate:
            raise ValidationError(
                f"sample-rate mismatch: signal at {signal.sample_rate} Hz, "
                f"filter at {filter.sample_rate} Hz"
            )


def _lag_correlation(upstream: np.ndarray, signal: np.ndarray, half_width: int) -> np.ndarray:
    """out[k + c] = sum_t upstream[t] * signal[t - k] for k in [-c, c], zero outside the signal."""
    padded = np.pad(signal, half_width)
    return np.correlate(padded, upstream, mode="valid")[::-1]


def objective(scorer: DifferentiableScorer, filter: MalafideFilter, batch: Sequence[Waveform]) -> float:
    """
    Sum of CM scores of the filtered batch.

    Args:
        scorer (DifferentiableScorer): Frozen countermeasure.
        filter (MalafideFilter): Filter applied to every utterance.
        batch (Sequence[Waveform]): Spoofed utterances of one attack.

    Returns:
        float: sum_i CM(s_i * m).
    """
    _check_batch(batch, filter)
    filtered = [convolve_same_array(s.samples, filter.coefficients) for s in batch]
    return float(np.sum(cm_scores(scorer, filtered)))


def objective_and_gradient(
    scorer: DifferentiableScorer, filter: MalafideFilter, batch: Sequence[Waveform]
) -> tuple[float, np.ndarray]:
    _check_batch(batch, filter)
    filtered = [convolve_same_array(s.samples, filter.coefficients) for s in batch]
    scores, upstream = scorer.score_and_gradient(filtered)
    gradient = np.zeros(filter.length)
    for signal, g in zip(batch, upstream):
        gradient += _lag_correlation(g, signal.samples, filter.center_index)
    return float(np.sum(scores)), gradient


def filter_gradient(
    scorer: DifferentiableScorer, filter: MalafideFilter, batch: Sequence[Waveform]
) -> np.ndarray:
    """
    Gradient of `objective` with respect to every filter tap.

    Entry k + c is sum_i sum_t g_i[t] * s_i[t - k], where g_i is the CM input
    gradient at the filtered utterance s_i * m. Utterances are reduced in
    batch order.

    Returns:
        np.ndarray: Length-L gradient.
    """
    return objective_and_gradient(scorer, filter, batch)[1]


def adam_step(
    filter: MalafideFilter,
    gradient: np.ndarray,
    state: AdamState,
    config: AttackConfig,
    context: str = "",
) -> tuple[MalafideFilter, AdamState]:
    """
    One Adam ascent step on the objective, followed by the Dirac projection.

    Ascent is run as descent on the negated gradient, with weight decay added
    as an L2 term on every tap.

    Args:
        filter (MalafideFilter): Current filter.
        gradient (np.ndarray): Objective gradient (ascent direction).
        state (AdamState): Moments before the step.
        config (AttackConfig): Step size, decay and Adam constants.
        context (str, optional): Batch description used in error messages. Defaults to "".

    Returns:
        tuple[MalafideFilter, AdamState]: Projected filter and advanced state.

    Raises:
        NumericalError: If the gradient is not finite.
    """
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.shape != (filter.length,):
        raise ValidationError(f"gradient has shape {gradient.shape}, expected ({filter.length},)")
    if not np.all(np.isfinite(gradient)):
        raise NumericalError(f"non-finite filter gradient{' at ' + context if context else ''}")
    coefficients, state = adam_update(
        filter.coefficients,
        -gradient,
        state,
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
        config.weight_decay,
    )
    return project_dirac(filter.with_coefficients(coefficients)), state


@dataclass
class OptimizationReport:
    """
    Per-epoch record of one filter optimisation.

    `mean_objective[e]` is the mean filtered CM score over the Part 1 batches
    of epoch e + 1, taken before each update; `success_rate[e]` is the Part 1
    success rate of the filter at the end of that epoch. `initial_success_rate`
    is measured on the He-initialised filter before the first update.
    """

    attack_id: str
    scorer_id: str
    config: AttackConfig
    dirac_mean_objective: float
    dirac_success_rate: float
    initial_success_rate: float = 0.0
    mean_objective: list[float] = field(default_factory=list)
    success_rate: list[float] = field(default_factory=list)
    final_filter: MalafideFilter | None = None
    duration_s: float = 0.0

    @property
    def final_success_rate(self) -> float:
        return self.success_rate[-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epoch": np.arange(1, len(self.mean_objective) + 1),
                "mean_objective": self.mean_objective,
                "part1_success_rate": self.success_rate,
            }
        )

    def to_dict(self) -> dict:
        return {
            "attack_id": self.attack_id,
            "scorer_id": self.scorer_id,
            "config": asdict(self.config),
            "dirac_mean_objective": self.dirac_mean_objective,
            "dirac_success_rate": self.dirac_success_rate,
            "initial_success_rate": self.initial_success_rate,
            "mean_objective": self.mean_objective,
            "part1_success_rate": self.success_rate,
            "final_filter": filter_to_dict(self.final_filter) if self.final_filter is not None else None,
        }


def optimize_filter(
    scorer: DifferentiableScorer,
    part1_spoofs: AttackDataset | Sequence[Waveform],
    config: AttackConfig = AttackConfig(),
    attack_id: str | None = None,
    on_batch: Callable[[int, int, MalafideFilter], None] | None = None,
    catalog_only: bool = False,
) -> tuple[MalafideFilter, OptimizationReport]:
    """
    Optimise a Malafide filter against a frozen CM on one attack's Part 1 spoofs.

    Args:
        scorer (DifferentiableScorer): Frozen countermeasure.
        part1_spoofs (AttackDataset | Sequence[Waveform]): Part 1 spoofs of a single attack.
        config (AttackConfig, optional): Defaults to AttackConfig().
        attack_id (str, optional): Taken from the AttackDataset when omitted. Defaults to "-".
        on_batch (Callable, optional): Called with (epoch, batch_index, filter) after every update.
        catalog_only (bool, optional): Require a catalog filter length. Defaults to False.

    Returns:
        tuple[MalafideFilter, OptimizationReport]: Final-epoch filter and its report.

    Raises:
        ValidationError: If there are no spoofs.
        NumericalError: If the objective or gradient becomes non-finite.
    """
    if isinstance(part1_spoofs, AttackDataset):
        attack_id = attack_id or part1_spoofs.attack_id
        spoofs = list(part1_spoofs.part1)
    else:
        spoofs = list(part1_spoofs)
    attack_id = attack_id or "-"
    if not spoofs:
        raise ValidationError("optimize_filter needs at least one Part 1 spoofed utterance")

    started = time.perf_counter()
    rng = np.random.default_rng(config.rng_seed)
    init_seed = int(rng.integers(0, 2**31 - 1))
    sample_rate = spoofs[0].sample_rate

    dirac = dirac_filter(config.filter_length, sample_rate, attack_id, scorer.scorer_id)
    report = OptimizationReport(
        attack_id=attack_id,
        scorer_id=scorer.scorer_id,
        config=config,
        dirac_mean_objective=objective(scorer, dirac, spoofs) / len(spoofs),
        dirac_success_rate=success_rate(scorer, dirac, spoofs),
    )

    filter = he_init_filter(
        config.filter_length, init_seed, sample_rate, attack_id, scorer.scorer_id, catalog_only
    )
    report.initial_success_rate = success_rate(scorer, filter, spoofs)
    state = AdamState.zeros(config.filter_length)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(spoofs))
        total = 0.0
        for batch_index, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [spoofs[i] for i in order[start : start + config.batch_size]]
            context = f"epoch {epoch} batch {batch_index} ({attack_id}, L={config.filter_length})"
            value, gradient = objective_and_gradient(scorer, filter, batch)
            if not np.isfinite(value):
                raise NumericalError(f"non-finite objective at {context}")
            filter, state = adam_step(filter, gradient, state, config, context)
            if not filter.is_projected:
                raise NumericalError(f"Dirac centre lost at {context}")
            if on_batch is not None:
                on_batch(epoch, batch_index, filter)
            total += value
            logger.debug("%s: objective %.4f", context, value)

        report.mean_objective.append(total / len(spoofs))
        report.success_rate.append(success_rate(scorer, filter, spoofs))
        logger.info(
            "%s vs %s L=%d epoch %d: mean objective %.4f, Part 1 success rate %.3f",
            attack_id,
            scorer.scorer_id,
            config.filter_length,
            epoch,
            report.mean_objective[-1],
            report.success_rate[-1],
        )

    report.final_filter = filter
    report.duration_s = time.perf_counter() - started
    logger.info(
        "%s vs %s L=%d optimised in %.1f s (Dirac baseline success rate %.3f)",
        attack_id,
        scorer.scorer_id,
        config.filter_length,
        report.duration_s,
        report.dirac_success_rate,
    )
    return filter, report


def select_filter(candidates: Sequence[tuple[MalafideFilter, float]]) -> MalafideFilter:
    """
    Pick the filter with the highest Part 1 success rate; ties go to the shorter filter.

    Args:
        candidates (Sequence[tuple[MalafideFilter, float]]): (filter, success rate) per trained length.

    Returns:
        MalafideFilter: The selected filter.
    """
    if len(candidates) == 0:
        raise ValidationError("select_filter needs at least one candidate")
    return min(candidates, key=lambda c: (-c[1], c[0].length))[0]


@dataclass
class LengthSweep:
    attack_id: str
    scorer_id: str
    filters: dict[int, MalafideFilter]
    reports: dict[int, OptimizationReport]
    selected: MalafideFilter

    def selection_record(self) -> dict:
        return {
            "attack_id": self.attack_id,
            "scorer_id": self.scorer_id,
            "part1_success_rate": {str(L): r.final_success_rate for L, r in self.reports.items()},
            "dirac_success_rate": next(iter(self.reports.values())).dirac_success_rate,
            "selected_length": self.selected.length,
        }


def sweep_lengths(
    scorer: DifferentiableScorer,
    part1_spoofs: AttackDataset | Sequence[Waveform],
    base_config: AttackConfig,
    lengths: Sequence[int],
    attack_id: str | None = None,
) -> LengthSweep:
    """Optimise one filter per length and select among them by Part 1 success rate."""
    if len(lengths) == 0:
        raise ValidationError("need at least one filter length")
    filters, reports = {}, {}
    for length in lengths:
        check_filter_length(length)
        filters[length], reports[length] = optimize_filter(
            scorer, part1_spoofs, base_config.with_length(length), attack_id, catalog_only=True
        )
    selected = select_filter([(filters[L], reports[L].final_success_rate) for L in lengths])
    first = reports[lengths[0]]
    logger.info("%s vs %s: selected L=%d", first.attack_id, first.scorer_id, selected.length)
    return LengthSweep(first.attack_id, first.scorer_id, filters, reports, selected)


def tune_learning_rate(
    scorer: DifferentiableScorer,
    part1_spoofs: AttackDataset | Sequence[Waveform],
    base_config: AttackConfig,
    grid: Sequence[float] = LEARNING_RATE_GRID,
    attack_id: str | None = None,
) -> tuple[float, dict[float, float]]:
    """
    Grid-search the learning rate by final Part 1 success rate.

    Returns:
        tuple[float, dict[float, float]]: Best learning rate (first in grid order on ties) and the rate per grid value.
    """
    if len(grid) == 0:
        raise ValidationError("learning-rate grid is empty")
    rates = {}
    for lr in grid:
        _, report = optimize_filter(scorer, part1_spoofs, replace(base_config, learning_rate=lr), attack_id)
        rates[lr] = report.final_success_rate
    best = max(grid, key=lambda lr: rates[lr])
    logger.info("learning-rate grid %s -> %s", rates, best)
    return best, rates
