"""
Command-line driver.

    malafide gen-corpus | train-cm | optimize-filter | apply-filter |
             evaluate | analyze-filter | transfer-matrix | pipeline

Every command works inside a run directory, writes `resolved_config.yaml`
and a `<command>.log` there, and exits 0 on success, 1 on invalid input and
2 on runtime or numerical failure.
"""

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import pandas as pd
from dotenv import load_dotenv

from malafide import load
from malafide.artifacts import write_csv, write_json
from malafide.attack import sweep_lengths, tune_learning_rate
from malafide.config import RunConfig, dump_run_config, load_run_config
from malafide.corpus import write_corpus
from malafide.detector import VARIANTS, ToyCmModel, load_model, save_model, train_cm
from malafide.dsp import (
    FILTER_LENGTHS,
    MalafideFilter,
    check_filter_length,
    convolve_same,
    frequency_response,
    impulse_response_table,
    load_filter,
    read_wav,
    save_filter,
    write_wav,
)
from malafide.errors import NumericalError, UndertrainedError, ValidationError
from malafide.evaluation import (
    artifact_table,
    evaluate_cm,
    evaluate_sasv,
    sasv_matrix,
    transfer_matrix,
    trend_summary,
)
from malafide.log import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def scorer_id_for(variant: str) -> str:
    return f"cm-{variant}"


def parse_lengths(text: str) -> tuple[int, ...]:
    try:
        lengths = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"filter length must be odd and in catalog {FILTER_LENGTHS}, got {text!r}")
    if not lengths:
        raise ValidationError("--lengths is empty")
    return tuple(check_filter_length(L) for L in lengths)


def resolve_scorer(run_dir: Path, value: str) -> ToyCmModel:
    """A scorer given either as a model JSON path or as a scorer id inside the run directory."""
    path = Path(value)
    if path.suffix == ".json" and path.exists():
        return load_model(path)
    return load.load_model(run_dir, value)


def _scorer_ids(config: RunConfig, args) -> list[str]:
    if getattr(args, "scorer", None):
        return [args.scorer]
    if getattr(args, "variant", None):
        return [scorer_id_for(args.variant)]
    return [scorer_id_for(v) for v in config.variants]


def cmd_gen_corpus(config: RunConfig, args) -> None:
    corpus = config.corpus.build(config.seed, config.sample_rate)
    manifest_path = write_corpus(corpus, config.run_dir / "corpus")
    logger.info("manifest written to %s", manifest_path)


def cmd_train_cm(config: RunConfig, args) -> None:
    corpus = load.load_corpus(config.run_dir)
    variants = [args.variant] if args.variant else list(config.variants)
    undertrained = []
    for variant in variants:
        scorer_id = scorer_id_for(variant)
        result = train_cm(
            corpus.waveforms("cm-train", "bonafide"),
            corpus.waveforms("cm-train", "spoof"),
            config.train_config(variant),
            dev_bona=corpus.waveforms("cm-dev", "bonafide"),
            dev_spoof=corpus.waveforms("cm-dev", "spoof"),
            scorer_id=scorer_id,
        )
        save_model(load.artifact_path(config.run_dir, "model", scorer_id=scorer_id), result.model)
        write_json(load.artifact_path(config.run_dir, "training", scorer_id=scorer_id), result.to_dict())
        logger.info("%s: held-out EER %.4f", scorer_id, result.heldout_eer)
        if result.undertrained:
            undertrained.append(result)
    for result in undertrained:
        result.raise_if_undertrained()


def _write_sweep(run_dir: Path, sweep) -> None:
    for length, filter in sweep.filters.items():
        fields = dict(scorer_id=sweep.scorer_id, attack_id=sweep.attack_id, length=length)
        save_filter(load.artifact_path(run_dir, "filter", **fields), filter)
        write_json(load.artifact_path(run_dir, "optimization", **fields), sweep.reports[length].to_dict())
        write_csv(load.artifact_path(run_dir, "epochs", **fields), sweep.reports[length].to_frame())
    write_json(
        load.artifact_path(run_dir, "selection", scorer_id=sweep.scorer_id, attack_id=sweep.attack_id),
        sweep.selection_record(),
    )


def cmd_optimize_filter(config: RunConfig, args) -> None:
    lengths = parse_lengths(args.lengths) if args.lengths else config.lengths
    corpus = load.load_corpus(config.run_dir)
    attack_ids = [args.attack] if args.attack else [a.attack_id for a in corpus.attacks]
    for scorer_id in _scorer_ids(config, args):
        scorer = resolve_scorer(config.run_dir, scorer_id)
        for attack_id in attack_ids:
            dataset = corpus.attack_dataset(attack_id)
            base = config.attack
            if args.tune_lr:
                best, rates = tune_learning_rate(scorer, dataset, base)
                write_json(
                    load.artifact_path(
                        config.run_dir, "lr_search", scorer_id=scorer.scorer_id, attack_id=attack_id
                    ),
                    {"grid": [{"learning_rate": lr, "part1_success_rate": r} for lr, r in rates.items()], "selected": best},
                )
                base = dataclasses.replace(base, learning_rate=best)
            _write_sweep(config.run_dir, sweep_lengths(scorer, dataset, base, lengths))


def cmd_apply_filter(config: RunConfig, args) -> None:
    filter = load_filter(Path(args.filter))
    waveform = read_wav(Path(args.input))
    out = write_wav(Path(args.output), convolve_same(waveform, filter))
    logger.info("filtered %s with L=%d filter -> %s", args.input, filter.length, out)


def _filters_for(config: RunConfig, args, attack_ids: list[str]) -> tuple[str, dict[str, MalafideFilter]]:
    if args.filter:
        filters = {}
        for path in args.filter:
            filter = load_filter(Path(path))
            filters[filter.attack_id] = filter
        return "custom", filters
    if args.filters_from:
        if args.length:
            length = check_filter_length(args.length)
            filters = load.load_filter_set(config.run_dir, args.filters_from, attack_ids, length)
            return f"{args.filters_from}_L{length}", filters
        filters = {a: load.load_selected_filter(config.run_dir, args.filters_from, a) for a in attack_ids}
        return f"{args.filters_from}_selected", filters
    return "nofilter", {}


def cmd_evaluate(config: RunConfig, args) -> None:
    corpus = load.load_corpus(config.run_dir)
    eval_config = config.eval
    if args.spoof_fraction is not None:
        eval_config = dataclasses.replace(eval_config, spoof_fraction=args.spoof_fraction)
    attack_ids = [a.attack_id for a in corpus.attacks]
    for scorer_id in _scorer_ids(config, args):
        scorer = resolve_scorer(config.run_dir, scorer_id)
        source, filters = _filters_for(config, args, attack_ids)
        name = args.name or f"{scorer.scorer_id}.{source}"
        result = evaluate_cm(scorer, corpus, filters, eval_config.partition)
        write_json(load.artifact_path(config.run_dir, "cm_report", name=name), result.to_dict())
        write_csv(load.artifact_path(config.run_dir, "cm_scores", name=name), result.scores)
        if args.sasv:
            sasv = evaluate_sasv(scorer, corpus, filters, eval_config)
            write_json(load.artifact_path(config.run_dir, "sasv_report", name=name), sasv.to_dict())
            write_csv(load.artifact_path(config.run_dir, "sasv_scores", name=name), sasv.trials)


def cmd_analyze_filter(config: RunConfig, args) -> None:
    filter = load_filter(Path(args.filter))
    response = frequency_response(filter, args.nfft)
    out_dir = Path(args.out_dir) if args.out_dir else config.run_dir / "analysis" / Path(args.filter).stem
    write_csv(out_dir / "impulse_response.csv", impulse_response_table(filter))
    write_csv(out_dir / "frequency_response.csv", response.to_frame())
    logger.info("wrote impulse and frequency responses to %s", out_dir)


def cmd_transfer_matrix(config: RunConfig, args) -> None:
    run_dir = config.run_dir
    lengths = parse_lengths(args.lengths) if args.lengths else config.lengths
    corpus = load.load_corpus(run_dir)
    attack_ids = [a.attack_id for a in corpus.attacks]
    scorers = {scorer_id_for(v): load.load_model(run_dir, scorer_id_for(v)) for v in config.variants}

    filter_sets = {
        (train_id, length): load.load_filter_set(run_dir, train_id, attack_ids, length)
        for train_id in scorers
        for length in lengths
    }
    table, long_table = transfer_matrix(corpus, scorers, filter_sets, lengths, config.eval.partition)
    write_csv(load.artifact_path(run_dir, "transfer"), table)
    write_csv(load.artifact_path(run_dir, "transfer_long"), long_table)

    selected = {
        train_id: {a: load.load_selected_filter(run_dir, train_id, a) for a in attack_ids} for train_id in scorers
    }
    artifacts = artifact_table_for(corpus, selected, config.eval.n_fft)
    write_csv(load.artifact_path(run_dir, "artifacts"), artifacts)

    sasv_long = None
    if not args.no_sasv:
        sasv_filters = {
            train_id: load.load_filter_set(run_dir, train_id, attack_ids, config.eval.sasv_length)
            for train_id in scorers
        }
        sasv_table, sasv_long = sasv_matrix(corpus, scorers, sasv_filters, config.eval)
        write_csv(load.artifact_path(run_dir, "sasv_matrix"), sasv_table)
        write_csv(load.artifact_path(run_dir, "sasv_long"), sasv_long)

    ids = list(scorers)
    primary = ids[0]
    baseline = evaluate_cm(scorers[primary], corpus, None, config.eval.partition)
    white_box = evaluate_cm(scorers[primary], corpus, selected[primary], config.eval.partition)
    transfer_baseline = black_box = None
    if len(ids) > 1:
        transfer_baseline = evaluate_cm(scorers[ids[1]], corpus, None, config.eval.partition)
        black_box = evaluate_cm(scorers[ids[1]], corpus, selected[primary], config.eval.partition)
    summary = trend_summary(baseline, white_box, transfer_baseline, black_box, sasv_long, artifacts)
    write_json(run_dir / "tables" / "summary.json", summary)
    logger.info("trend summary: %s", summary)


def artifact_table_for(corpus, selected: dict[str, dict[str, MalafideFilter]], n_fft: int) -> pd.DataFrame:
    tables = [artifact_table(corpus, filters, n_fft) for filters in selected.values()]
    return pd.concat(tables, ignore_index=True)


def cmd_pipeline(config: RunConfig, args) -> None:
    lengths = tuple(sorted(set(config.lengths) | {config.eval.sasv_length}))
    config = dataclasses.replace(config, lengths=lengths)
    dump_run_config(config, config.run_dir / load.FILENAMES["resolved_config"])
    none = argparse.Namespace(
        variant=None,
        scorer=None,
        attack=None,
        lengths=None,
        tune_lr=args.tune_lr,
        no_sasv=False,
    )
    cmd_gen_corpus(config, none)
    cmd_train_cm(config, none)
    cmd_optimize_filter(config, none)
    cmd_transfer_matrix(config, none)


COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "train-cm": cmd_train_cm,
    "optimize-filter": cmd_optimize_filter,
    "apply-filter": cmd_apply_filter,
    "evaluate": cmd_evaluate,
    "analyze-filter": cmd_analyze_filter,
    "transfer-matrix": cmd_transfer_matrix,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run-config file")
    common.add_argument("--run-dir", help="Run directory (overrides config and MALAFIDE_RUN_DIR)")
    common.add_argument("--seed", type=int, help="Master seed (overrides config and MALAFIDE_SEED)")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="Config override, e.g. attack.epochs=5"
    )
    common.add_argument("--log-level", help="Logging level (overrides MALAFIDE_LOG_LEVEL)")

    parser = argparse.ArgumentParser(prog="malafide", description="Malafide adversarial filter toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-corpus", parents=[common], help="Generate the synthetic corpus")

    p = sub.add_parser("train-cm", parents=[common], help="Train the toy countermeasure(s)")
    p.add_argument("--variant", choices=sorted(VARIANTS), help="Train one variant only")

    p = sub.add_parser("optimize-filter", parents=[common], help="Optimise Malafide filters")
    p.add_argument("--scorer", help="Scorer id in the run directory or a model JSON path")
    p.add_argument("--variant", help="Attack the CM of this variant")
    p.add_argument("--attack", help="Attack id (default: every attack)")
    p.add_argument("--lengths", help="Comma-separated filter lengths")
    p.add_argument("--tune-lr", action="store_true", help="Grid-search the learning rate first")

    p = sub.add_parser("apply-filter", parents=[common], help="Filter one WAV file")
    p.add_argument("--filter", required=True, help="Filter JSON")
    p.add_argument("--input", required=True, help="Input WAV")
    p.add_argument("--output", required=True, help="Output WAV")

    p = sub.add_parser("evaluate", parents=[common], help="CM (and SASV) evaluation on Part 2")
    p.add_argument("--scorer", help="Scorer id in the run directory or a model JSON path")
    p.add_argument("--variant", help="Evaluate the CM of this variant")
    p.add_argument("--filter", action="append", help="Filter JSON (repeatable, one per attack)")
    p.add_argument("--filters-from", help="Use the run's filters optimised on this scorer id")
    p.add_argument("--length", type=int, help="Filter length for --filters-from (default: selected)")
    p.add_argument("--sasv", action="store_true", help="Also compute the fused SASV-EER")
    p.add_argument("--spoof-fraction", type=float, help="Share of spoofed SASV trials kept")
    p.add_argument("--name", help="Report name under eval/")

    p = sub.add_parser("analyze-filter", parents=[common], help="Impulse and magnitude responses")
    p.add_argument("--filter", required=True, help="Filter JSON")
    p.add_argument("--nfft", type=int, default=8192, help="FFT size")
    p.add_argument("--out-dir", help="Output directory (default: <run-dir>/analysis/<filter name>)")

    p = sub.add_parser("transfer-matrix", parents=[common], help="White/black-box and SASV tables")
    p.add_argument("--lengths", help="Comma-separated filter lengths")
    p.add_argument("--no-sasv", action="store_true", help="Skip the SASV table")

    p = sub.add_parser("pipeline", parents=[common], help="Run every stage end to end")
    p.add_argument("--tune-lr", action="store_true", help="Grid-search the learning rate per attack")
    return parser


def _overrides(args) -> list[str]:
    overrides = list(args.set)
    if args.run_dir:
        overrides.append(f"run_dir={args.run_dir}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.log_level:
        overrides.append(f"log_level={args.log_level}")
    return overrides


def run(argv: list[str] | None = None) -> int:
    """
    Parse arguments, run one command and map its outcome to an exit code.

    Returns:
        int: 0 on success, 1 on invalid input, 2 on runtime or numerical failure.
    """
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or os.environ.get("MALAFIDE_LOG_LEVEL", "INFO"))
    try:
        config = load_run_config(args.config, _overrides(args))
        config.run_dir.mkdir(parents=True, exist_ok=True)
        setup_logging(config.log_level, config.run_dir / f"{args.command}.log")
        if args.command != "pipeline":
            dump_run_config(config, config.run_dir / load.FILENAMES["resolved_config"])
        COMMANDS[args.command](config, args)
    except (ValidationError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_VALIDATION
    except (NumericalError, UndertrainedError, OSError) as e:
        logger.error("%s", e)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
