"""Command-line pipeline: generate data, train, evaluate, calibrate, predict.

Every run writes a manifest JSON next to its outputs recording the command,
input paths, seeds, and artifact paths, so any artifact can be regenerated.

Exit codes: 0 success, 2 configuration/usage error, 3 malformed data file,
4 numeric failure, 1 unexpected error. Set WATERLINE_LOG=DEBUG|INFO|... to
control log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import GenConfig, generate, load_dataset, save_dataset, split, visible_examples
from .errors import (
    CheckpointError,
    ConfigError,
    DatasetParseError,
    DatasetSchemaError,
    NumericError,
)
from .features import build_decoder_query, build_features, waterline_target
from .geometry import CameraModel, project
from .metrics import (
    GtBox,
    QueryPrediction,
    calibrate_bias,
    error_stats,
    pixel_error,
    write_curve_csv,
)
from .network import forward, load_checkpoint, save_checkpoint
from .training import TrainConfig, train

logger = logging.getLogger(__name__)

# Train fraction mirroring a 4285/904 style split.
DEFAULT_VAL_RATIO = 4285 / 5189

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

PREDICTIONS_SCHEMA = 1


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_manifest(path: Path, command: str, inputs: dict, seeds: dict, artifacts: dict,
                    started_at: str) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "inputs": inputs,
        "seeds": seeds,
        "artifacts": artifacts,
        "started_at": started_at,
        "finished_at": _utcnow(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def _load_camera(path: str | None) -> CameraModel:
    if path is None:
        logger.info("no camera config given; using the built-in default")
        return CameraModel.default()
    return CameraModel.load(path)


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"{what} not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} is not valid JSON: {exc}") from exc


def cmd_gen(args) -> int:
    started = _utcnow()
    camera = _load_camera(args.camera)
    config = GenConfig.load(args.config)
    if args.seed is not None:
        config = GenConfig.from_dict({**_as_dict(config), "seed": args.seed})
    records = generate(camera, config)
    out = Path(args.out)
    save_dataset(records, out)

    n_visible = sum(1 for r in records for lb in r.labels if lb.visible)
    n_invisible = sum(1 for r in records for lb in r.labels if not lb.visible)
    print(f"samples: {len(records)}")
    print(f"visible queries: {n_visible}")
    print(f"invisible queries: {n_invisible}")

    if args.verify:
        if config.noise_free:
            worst = _verify_fidelity(camera, records)
            print(f"verify: max |label - projection| = {worst:.3e} (normalized), OK")
        else:
            logger.warning("--verify skipped: config has non-zero noise, identity does not hold")
            print("verify: skipped (noisy config)")

    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "gen",
        inputs={"camera": args.camera, "config": args.config},
        seeds={"generator": config.seed},
        artifacts={"dataset": str(out)},
        started_at=started,
    )
    return EXIT_OK


def _as_dict(config) -> dict:
    # dataclasses.asdict would deep-convert tuples to lists; keep values as-is.
    return {name: getattr(config, name) for name in config.__dataclass_fields__}


def _verify_fidelity(camera: CameraModel, records) -> float:
    """Largest normalized gap between stored labels and fresh projections."""
    worst = 0.0
    for record in records:
        for query, label in zip(record.queries, record.labels):
            if not label.visible:
                continue
            pixel = project(camera, record.imu, query)
            if pixel is None:
                raise NumericError(f"sample {record.sample_id}: visible label but no projection")
            target = waterline_target(label)
            gap = max(
                abs(target[0] - pixel.u / camera.image_w),
                abs(target[1] - pixel.v / camera.image_h),
            )
            worst = max(worst, gap)
            if gap > 1e-9:
                raise NumericError(
                    f"sample {record.sample_id}: label/projection gap {gap:.3e} exceeds 1e-9"
                )
    return worst


def cmd_train(args) -> int:
    started = _utcnow()
    raw = _load_json(args.config, "training config") if args.config else {}
    val_ratio = raw.pop("val_ratio", DEFAULT_VAL_RATIO)
    if not 0.0 < val_ratio < 1.0:
        raise ConfigError(f"val_ratio must lie in (0, 1), got {val_ratio}")
    if args.seed is not None:
        raw["seed"] = args.seed
    config = TrainConfig.from_dict(raw)

    records = load_dataset(args.dataset)
    if len(records) < 2:
        raise ConfigError("dataset has fewer than 2 samples; cannot split")
    parts = split(records, val_ratio, seed=config.seed)
    train_xy = visible_examples(parts.train)
    val_xy = visible_examples(parts.val)
    if train_xy[0].shape[0] == 0 or val_xy[0].shape[0] == 0:
        raise ConfigError("dataset contains no visible queries in train or val split")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    params, history = train(train_xy, val_xy, config)

    checkpoint = out_dir / "checkpoint.json"
    save_checkpoint(params, checkpoint)
    history.to_csv(out_dir / "history.csv")
    history.write_summary_json(out_dir / "history.json")
    print(f"epochs run: {len(history.epochs)}")
    print(f"best epoch: {history.best_epoch}")
    print(f"best val loss: {history.best_val_loss:.6g}")
    print(f"stop reason: {history.stop_reason}")

    _write_manifest(
        out_dir / "manifest.json",
        "train",
        inputs={"dataset": args.dataset, "config": args.config},
        seeds={"train": config.seed},
        artifacts={
            "checkpoint": str(checkpoint),
            "history_csv": str(out_dir / "history.csv"),
            "history_json": str(out_dir / "history.json"),
        },
        started_at=started,
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    started = _utcnow()
    camera = _load_camera(args.camera)
    records = load_dataset(args.dataset)
    params = load_checkpoint(args.checkpoint)

    rows = []  # (sample_id, query_index, error_px)
    feats = []
    targets = []
    for record in records:
        for qi, (query, label) in enumerate(zip(record.queries, record.labels)):
            if label.visible:
                feats.append(build_features(query, record.imu))
                targets.append(waterline_target(label))
                rows.append([record.sample_id, qi])
    if not feats:
        raise ConfigError("no visible queries to evaluate")

    pred, _ = forward(params, np.stack(feats), training=False)
    errors = [
        pixel_error(p, t, camera.image_w, camera.image_h) for p, t in zip(pred, targets)
    ]
    stats = error_stats(errors)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "error_stats.json", "w", encoding="utf-8") as f:
        json.dump(stats.to_dict(), f, indent=2)
        f.write("\n")
    with open(out_dir / "errors.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["sample_id", "query_index", "error_px"])
        for (sample_id, qi), err in zip(rows, errors):
            writer.writerow([sample_id, qi, repr(err)])

    print(f"n: {stats.n}")
    print(f"median_px: {stats.median_px:.4f}")
    print(f"mean_px: {stats.mean_px:.4f}")
    print(f"p90_px: {stats.p90_px:.4f}")

    _write_manifest(
        out_dir / "manifest.json",
        "eval",
        inputs={"dataset": args.dataset, "checkpoint": args.checkpoint, "camera": args.camera},
        seeds={},
        artifacts={
            "error_stats": str(out_dir / "error_stats.json"),
            "errors_csv": str(out_dir / "errors.csv"),
        },
        started_at=started,
    )
    return EXIT_OK


def load_predictions(path) -> tuple[list[QueryPrediction], list[GtBox]]:
    """Read the per-query predictions JSONL used for calibration.

    Line schema: {"schema": 1, "sample_id": str, "query_index": int,
    "logit": number, "box": {c_x, c_y, w, h}, "gt_visible": bool,
    "gt_box": {c_x, c_y, w, h} | null}.
    """
    preds: list[QueryPrediction] = []
    gts: list[GtBox] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(str(exc), line=line_no) from exc
            if not isinstance(data, dict):
                raise DatasetSchemaError("prediction line must be an object", line=line_no)
            if data.get("schema") != PREDICTIONS_SCHEMA:
                raise DatasetSchemaError(
                    f"unsupported schema version {data.get('schema')!r}", line=line_no
                )
            for key in ("logit", "box", "gt_visible"):
                if key not in data:
                    raise DatasetSchemaError(f"missing key {key!r}", line=line_no)
            box = data["box"]
            try:
                pred_box = (
                    float(box["c_x"]),
                    float(box["c_y"]),
                    float(box["w"]),
                    float(box["h"]),
                )
            except (TypeError, KeyError) as exc:
                raise DatasetSchemaError(f"bad 'box' object: {exc!r}", line=line_no) from exc
            preds.append(QueryPrediction(objectness_logit=float(data["logit"]), box=pred_box))
            if data["gt_visible"]:
                gt_box = data.get("gt_box")
                if not isinstance(gt_box, dict):
                    raise DatasetSchemaError(
                        "visible ground truth requires a 'gt_box' object", line=line_no
                    )
                try:
                    gts.append(
                        GtBox(
                            visible=True,
                            c_x=float(gt_box["c_x"]),
                            c_y=float(gt_box["c_y"]),
                            w=float(gt_box["w"]),
                            h=float(gt_box["h"]),
                        )
                    )
                except (TypeError, KeyError) as exc:
                    raise DatasetSchemaError(f"bad 'gt_box' object: {exc!r}", line=line_no) from exc
            else:
                gts.append(GtBox(visible=False))
    return preds, gts


def cmd_calibrate(args) -> int:
    started = _utcnow()
    preds, gts = load_predictions(args.dataset)
    lo, hi = args.range
    best_bias, curve = calibrate_bias(
        preds, gts, lo=lo, hi=hi, step=args.step, threshold=args.threshold
    )
    best_report = dict(curve)[best_bias]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "best_bias": best_bias,
        "threshold": args.threshold,
        "grid": {"lo": lo, "hi": hi, "step": args.step},
    }
    payload.update(best_report.to_dict())
    with open(out_dir / "best_bias.json", "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    write_curve_csv(curve, out_dir / "curve.csv")

    print(f"grid points: {len(curve)}")
    print(f"best bias: {best_bias}")
    print(f"overall at best bias: {best_report.overall:.4f}")

    _write_manifest(
        out_dir / "manifest.json",
        "calibrate",
        inputs={"predictions": args.dataset},
        seeds={},
        artifacts={
            "best_bias": str(out_dir / "best_bias.json"),
            "curve": str(out_dir / "curve.csv"),
        },
        started_at=started,
    )
    return EXIT_OK


def cmd_predict(args) -> int:
    started = _utcnow()
    records = load_dataset(args.dataset)
    params = load_checkpoint(args.checkpoint)
    out = Path(args.out)

    n_rows = 0
    with open(out, "w", encoding="utf-8") as f:
        for record in records:
            if not record.queries:
                continue
            feats = np.stack([build_features(q, record.imu) for q in record.queries])
            pred, _ = forward(params, feats, training=False)
            for qi, query in enumerate(record.queries):
                point = (float(pred[qi, 0]), float(pred[qi, 1]))
                decoder_query = build_decoder_query(query, point)
                row = {
                    "schema": PREDICTIONS_SCHEMA,
                    "sample_id": record.sample_id,
                    "query_index": qi,
                    "prediction": {"c_x": point[0], "c_y_plus_half_h": point[1]},
                    "decoder_query": [float(v) for v in decoder_query],
                }
                if args.emit_features:
                    row["features"] = [float(v) for v in feats[qi]]
                f.write(json.dumps(row, separators=(",", ":")))
                f.write("\n")
                n_rows += 1
    print(f"queries predicted: {n_rows}")

    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "predict",
        inputs={"dataset": args.dataset, "checkpoint": args.checkpoint},
        seeds={},
        artifacts={"predictions": str(out)},
        started_at=started,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="waterline",
        description="Learned world-to-image projection of buoy waterline points.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--camera", help="camera JSON (default: built-in 960x540 camera)")
    p.add_argument("--config", required=True, help="generator config JSON")
    p.add_argument("--out", required=True, help="output dataset JSONL")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--verify", action="store_true",
                   help="re-check labels against the projection (noise-free configs)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the waterline predictor")
    p.add_argument("--dataset", required=True, help="dataset JSONL")
    p.add_argument("--config", help="training config JSON (defaults shown in README)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="pixel-error statistics of a checkpoint")
    p.add_argument("--dataset", required=True, help="dataset JSONL")
    p.add_argument("--checkpoint", required=True, help="checkpoint JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--camera", help="camera JSON fixing the image dimensions")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calibrate", help="grid-sweep the objectness logit bias")
    p.add_argument("--dataset", required=True, help="predictions JSONL (see README)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--range", nargs=2, type=float, default=(-3.0, 3.0),
                   metavar=("LO", "HI"), help="bias sweep range (default -3 3)")
    p.add_argument("--step", type=float, default=0.25, help="sweep step (default 0.25)")
    p.add_argument("--threshold", type=float, default=0.90,
                   help="visibility threshold on sigmoid(logit + bias) (default 0.90)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="run the predictor on every chart query")
    p.add_argument("--dataset", required=True, help="dataset JSONL")
    p.add_argument("--checkpoint", required=True, help="checkpoint JSON")
    p.add_argument("--out", required=True, help="output predictions JSONL")
    p.add_argument("--emit-features", action="store_true",
                   help="include the six input features in each output row")
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("WATERLINE_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetParseError, DatasetSchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
