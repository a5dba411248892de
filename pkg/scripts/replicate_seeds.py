import logging
import os
from pathlib import Path

import pandas as pd

from malafide.artifacts import read_json, write_csv
from malafide.cli import run
from malafide.log import setup_logging

RUN_ROOT = Path(os.environ.get("MALAFIDE_RUN_DIR", "runs")) / "replicates"
CONFIG = os.environ.get("MALAFIDE_CONFIG")
SEEDS = [int(s) for s in os.environ.get("MALAFIDE_SEEDS", "0,1,2").split(",")]
VERDICTS = ["white_box_degrades", "universal", "transfers", "sasv_degrades", "artifact_attenuated"]
OUTPUT_FILENAME = "replicates.csv"

logger = logging.getLogger("replicate_seeds")


class SeedReplicator:
    def __init__(self, run_root: Path, seeds: list[int], config: str | None = None):
        self.run_root = Path(run_root)
        self.seeds = seeds
        self.config = config

    def run_dir(self, seed: int) -> Path:
        return self.run_root / f"seed{seed}"

    def run_seed(self, seed: int) -> int:
        argv = ["pipeline", "--run-dir", str(self.run_dir(seed)), "--seed", str(seed)]
        if self.config:
            argv += ["--config", self.config]
        return run(argv)

    def collect(self) -> pd.DataFrame:
        rows = []
        for seed in self.seeds:
            summary = read_json(self.run_dir(seed) / "tables" / "summary.json")
            rows.append({"seed": seed, **summary})
        return pd.DataFrame(rows)

    @staticmethod
    def majority(df: pd.DataFrame) -> pd.DataFrame:
        """One row per trend: how many seeds show it and whether a majority does."""
        rows = []
        for verdict in VERDICTS:
            values = df[verdict].dropna().astype(bool)
            rows.append(
                {
                    "trend": verdict,
                    "n_seeds": len(values),
                    "n_holding": int(values.sum()),
                    "majority": bool(len(values) and values.sum() * 2 > len(values)),
                }
            )
        return pd.DataFrame(rows)


def main():
    setup_logging(os.environ.get("MALAFIDE_LOG_LEVEL", "INFO"))
    replicator = SeedReplicator(RUN_ROOT, SEEDS, CONFIG)
    for seed in SEEDS:
        code = replicator.run_seed(seed)
        if code != 0:
            raise SystemExit(f"pipeline failed for seed {seed} with exit code {code}")
    per_seed = replicator.collect()
    write_csv(RUN_ROOT / OUTPUT_FILENAME, per_seed)
    verdicts = replicator.majority(per_seed)
    write_csv(RUN_ROOT / "majority.csv", verdicts)
    logger.info("trend verdicts over seeds %s:\n%s", SEEDS, verdicts.to_string(index=False))


if __name__ == "__main__":
    main()
