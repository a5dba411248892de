from pathlib import Path

import pandas as pd

from malafide.artifacts import read_json
from malafide.corpus import MANIFEST_COLUMNS, Corpus, corpus_from_metadata
from malafide.detector import ToyCmModel, load_model as _load_model
from malafide.dsp import MalafideFilter, load_filter as _load_filter, read_wav

FILENAMES = {
    "manifest": "corpus/manifest.csv",
    "corpus": "corpus/corpus.json",
    "model": "models/{scorer_id}.json",
    "training": "models/{scorer_id}.training.json",
    "filter": "filters/{scorer_id}/{attack_id}/L{length}.json",
    "optimization": "filters/{scorer_id}/{attack_id}/L{length}.report.json",
    "epochs": "filters/{scorer_id}/{attack_id}/L{length}.epochs.csv",
    "selection": "filters/{scorer_id}/{attack_id}/selection.json",
    "lr_search": "filters/{scorer_id}/{attack_id}/lr_search.json",
    "cm_report": "eval/{name}.cm.json",
    "cm_scores": "eval/{name}.cm_scores.csv",
    "sasv_report": "eval/{name}.sasv.json",
    "sasv_scores": "eval/{name}.sasv_scores.csv",
    "transfer": "tables/transfer_matrix.csv",
    "transfer_long": "tables/transfer_long.csv",
    "sasv_matrix": "tables/sasv_matrix.csv",
    "sasv_long": "tables/sasv_long.csv",
    "artifacts": "tables/artifact_attenuation.csv",
    "resolved_config": "resolved_config.yaml",
}


def artifact_path(run_dir: Path, artifact: str, **fields) -> Path:
    """
    Path of one run-directory artifact.

    Args:
        run_dir (Path): Root of the run.
        artifact (str): Key of FILENAMES.
        **fields: Values for the placeholders of the file name (scorer_id, attack_id, length, name).

    Returns:
        Path: run_dir / filename.

    Raises:
        ValueError: If the artifact is unknown or a placeholder is missing.
    """
    try:
        template = FILENAMES[artifact]
    except KeyError:
        raise ValueError(f"Unknown artifact {artifact}.")
    try:
        return Path(run_dir) / template.format(**fields)
    except KeyError as e:
        raise ValueError(f"Artifact {artifact} needs field {e.args[0]}.")


def _existing(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"File {path} does not exist.")
    return path


def load_manifest(run_dir: Path) -> pd.DataFrame:
    """
    Load the corpus manifest of a run.

    Args:
        run_dir (Path): Root of the run.

    Returns:
        pd.DataFrame: One row per utterance.

    Raises:
        FileNotFoundError: If the manifest does not exist.
        ValueError: If columns are missing.
    """
    df = pd.read_csv(_existing(artifact_path(run_dir, "manifest")), dtype=str)
    missing = set(MANIFEST_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f"Manifest lacks columns {sorted(missing)}.")
    return df[MANIFEST_COLUMNS]


def load_corpus(run_dir: Path) -> Corpus:
    """
    Load manifest, metadata and audio written by `write_corpus`.

    Raises:
        FileNotFoundError: If the manifest, metadata or a WAV file does not exist.
    """
    manifest = load_manifest(run_dir)
    meta = read_json(artifact_path(run_dir, "corpus"))
    corpus_dir = artifact_path(run_dir, "manifest").parent
    audio = {
        uid: read_wav(_existing(corpus_dir / rel))
        for uid, rel in zip(manifest["utterance_id"], manifest["wav_path"])
    }
    return corpus_from_metadata(meta, manifest, audio)


def load_model(run_dir: Path, scorer_id: str) -> ToyCmModel:
    return _load_model(_existing(artifact_path(run_dir, "model", scorer_id=scorer_id)))


def load_filter(run_dir: Path, scorer_id: str, attack_id: str, length: int) -> MalafideFilter:
    """
    Load one optimised filter.

    Raises:
        FileNotFoundError: If the filter file does not exist.
    """
    path = artifact_path(run_dir, "filter", scorer_id=scorer_id, attack_id=attack_id, length=length)
    return _load_filter(_existing(path))


def load_filter_set(run_dir: Path, scorer_id: str, attack_ids: list[str], length: int) -> dict[str, MalafideFilter]:
    return {a: load_filter(run_dir, scorer_id, a, length) for a in attack_ids}


def load_selected_filter(run_dir: Path, scorer_id: str, attack_id: str) -> MalafideFilter:
    """Load the filter named by an attack's selection record."""
    selection = load_report(run_dir, "selection", scorer_id=scorer_id, attack_id=attack_id)
    return load_filter(run_dir, scorer_id, attack_id, selection["selected_length"])


def load_report(run_dir: Path, artifact: str, **fields) -> dict:
    """
    Load a JSON report of a run.

    Raises:
        ValueError: If the artifact is not a JSON report.
        FileNotFoundError: If the file does not exist.
    """
    path = artifact_path(run_dir, artifact, **fields)
    if path.suffix != ".json":
        raise ValueError(f"Artifact {artifact} is not a JSON report.")
    return read_json(_existing(path))
