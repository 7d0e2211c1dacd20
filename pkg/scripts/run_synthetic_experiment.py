#!/usr/bin/env python3
"""End-to-end synthetic experiment: generate -> train -> eval -> predict.

Writes everything under an output directory (default ./experiment-out) and
prints the validation pixel-error statistics at the end. All stages go
through the same CLI entry points, so the artifacts match what the
command-line tool produces.
"""

import argparse
import json
import sys
from pathlib import Path

from waterline.cli import main as cli


def run(argv):
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="experiment-out", help="output directory")
    parser.add_argument("--samples", type=int, default=8000, help="scenes to generate")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-epochs", type=int, default=200)
    parser.add_argument("--noisy", action="store_true", help="add sensor noise to the recording")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    gen_config = {
        "n_samples": args.samples,
        "queries_per_sample": [1, 3],
        "distance_range_m": [5.0, 1000.0],
        "seed": args.seed,
    }
    if args.noisy:
        gen_config.update(
            {
                "bearing_noise_deg": 0.5,
                "pitch_noise_deg": 0.3,
                "roll_noise_deg": 0.3,
                "distance_noise_rel": 0.02,
            }
        )
    (out / "gen.json").write_text(json.dumps(gen_config, indent=2))
    (out / "train.json").write_text(
        json.dumps({"max_epochs": args.max_epochs, "seed": args.seed}, indent=2)
    )

    dataset = out / "dataset.jsonl"
    run(["gen", "--config", str(out / "gen.json"), "--out", str(dataset), "--verify"]
        if not args.noisy
        else ["gen", "--config", str(out / "gen.json"), "--out", str(dataset)])
    run(
        [
            "train",
            "--dataset",
            str(dataset),
            "--config",
            str(out / "train.json"),
            "--out",
            str(out / "train"),
        ]
    )
    run(
        [
            "eval",
            "--dataset",
            str(dataset),
            "--checkpoint",
            str(out / "train" / "checkpoint.json"),
            "--out",
            str(out / "eval"),
        ]
    )
    run(
        [
            "predict",
            "--dataset",
            str(dataset),
            "--checkpoint",
            str(out / "train" / "checkpoint.json"),
            "--out",
            str(out / "predictions.jsonl"),
        ]
    )
    print(f"artifacts in {out}/")


if __name__ == "__main__":
    main()
