"""Dataset schema, synthetic scene generation, and train/val splitting.

On-disk format is JSON Lines, one sample per line:

    {"schema": 1,
     "sample_id": "000042",
     "imu": {"pitch_deg": ..., "roll_deg": ..., "heading_deg": ...},
     "queries": [{"distance_m": ..., "bearing_deg": ...}, ...],
     "labels":  [{"visible": true, "c_x": ..., "c_y": ..., "w": ..., "h": ...},
                 {"visible": false}, ...]}

`queries` and `labels` are aligned; an empty `queries` list marks a buoy-free
frame. Box fields are normalized to [0, 1] and are omitted when a label is
not visible. Headings are wrapped into [-180, 180] on ingestion.

The generator draws vessel attitude and chart queries at random, projects
each query's waterline point through the pinhole camera, and anchors a
distance-scaled box at the projected point. Measurement noise perturbs the
*recorded* query/IMU values, never the label: the annotation is ground truth,
the sensors are what lie.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DatasetParseError, DatasetSchemaError, GenerationError
from .features import ChartQuery, ImuSample, build_features, waterline_target, wrap_angle_deg
from .geometry import CameraModel, in_frame, project
from .metrics import GtBox

SCHEMA_VERSION = 1

# Box-size clamp: apparent height is limited to [MIN_BOX_PX, image_h / 2].
MIN_BOX_PX = 2.0


@dataclass(frozen=True)
class SampleRecord:
    """One frame: vessel attitude plus aligned chart queries and labels."""

    sample_id: str
    imu: ImuSample
    queries: tuple
    labels: tuple

    def __post_init__(self):
        if len(self.queries) != len(self.labels):
            raise DatasetSchemaError(
                f"sample {self.sample_id}: {len(self.queries)} queries vs "
                f"{len(self.labels)} labels"
            )

    @property
    def buoy_free(self) -> bool:
        return len(self.queries) == 0


@dataclass(frozen=True)
class GenConfig:
    """Knobs of the synthetic scene generator. Angles in degrees, ranges
    inclusive. distance_noise_rel is a fraction of the true distance; the
    other noise fields are absolute standard deviations."""

    n_samples: int
    queries_per_sample: tuple = (1, 3)
    distance_range_m: tuple = (5.0, 1000.0)
    bearing_range_deg: tuple | None = None  # None: +/- (half horizontal FOV + 5 deg)
    pitch_range_deg: tuple = (-10.0, 10.0)
    roll_range_deg: tuple = (-10.0, 10.0)
    heading_range_deg: tuple = (-180.0, 180.0)
    box_height_coeff: float = 900.0  # apparent height ~ coeff / distance, in px
    box_aspect: float = 0.6  # width = aspect * height, in px
    distance_noise_rel: float = 0.0
    bearing_noise_deg: float = 0.0
    pitch_noise_deg: float = 0.0
    roll_noise_deg: float = 0.0
    heading_noise_deg: float = 0.0
    label_noise_px: float = 0.0
    visibility_dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be >= 1, got {self.n_samples}")
        qlo, qhi = self.queries_per_sample
        if qlo < 0 or qhi < qlo:
            raise ConfigError(f"bad queries_per_sample range {self.queries_per_sample}")
        dlo, dhi = self.distance_range_m
        if not (0 < dlo <= dhi):
            raise ConfigError(f"bad distance range {self.distance_range_m}")
        for name in ("bearing_range_deg", "pitch_range_deg", "roll_range_deg", "heading_range_deg"):
            rng = getattr(self, name)
            if rng is not None and rng[0] > rng[1]:
                raise ConfigError(f"bad {name} {rng}")
        if self.box_height_coeff <= 0 or self.box_aspect <= 0:
            raise ConfigError("box-size law constants must be positive")
        for name in (
            "distance_noise_rel",
            "bearing_noise_deg",
            "pitch_noise_deg",
            "roll_noise_deg",
            "heading_noise_deg",
            "label_noise_px",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0.0 <= self.visibility_dropout <= 1.0:
            raise ConfigError(f"visibility_dropout must lie in [0, 1], got {self.visibility_dropout}")

    @property
    def noise_free(self) -> bool:
        return (
            self.distance_noise_rel == 0
            and self.bearing_noise_deg == 0
            and self.pitch_noise_deg == 0
            and self.roll_noise_deg == 0
            and self.heading_noise_deg == 0
            and self.label_noise_px == 0
        )

    @classmethod
    def from_dict(cls, data: dict) -> "GenConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown generator config keys: {sorted(unknown)}")
        data = dict(data)
        for key in (
            "queries_per_sample",
            "distance_range_m",
            "bearing_range_deg",
            "pitch_range_deg",
            "roll_range_deg",
            "heading_range_deg",
        ):
            if key in data and data[key] is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "GenConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as exc:
            raise ConfigError(f"generator config not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"generator config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    val: tuple
    ratio: float
    seed: int


def default_bearing_range(camera: CameraModel) -> tuple[float, float]:
    """+/- (half the horizontal field of view + 5 deg) of slack."""
    half_fov = math.degrees(math.atan((camera.image_w / 2) / camera.focal_px))
    return (-(half_fov + 5.0), half_fov + 5.0)


def generate(camera: CameraModel, config: GenConfig) -> list[SampleRecord]:
    """Produce synthetic samples whose labels are exact pinhole projections.

    A query is visible when its waterline point projects in front of the
    camera, lands inside the frame, and the anchored box fits entirely within
    the frame. Per-sample RNG streams are derived from (seed, sample_index),
    so output is deterministic and independent of iteration parallelism.
    """
    bearing_range = config.bearing_range_deg or default_bearing_range(camera)
    records = []
    visible_total = 0
    for i in range(config.n_samples):
        rng = np.random.default_rng((config.seed, i))
        pitch = rng.uniform(*config.pitch_range_deg)
        roll = rng.uniform(*config.roll_range_deg)
        heading = rng.uniform(*config.heading_range_deg)
        true_imu = ImuSample(
            pitch_deg=pitch, roll_deg=roll, heading_deg=wrap_angle_deg(heading)
        )
        qlo, qhi = config.queries_per_sample
        n_queries = int(rng.integers(qlo, qhi + 1))

        queries = []
        labels = []
        for _ in range(n_queries):
            d = rng.uniform(*config.distance_range_m)
            bearing = rng.uniform(*bearing_range)
            true_query = ChartQuery(distance_m=d, bearing_deg=wrap_angle_deg(bearing))

            pixel = project(camera, true_imu, true_query)
            visible = pixel is not None and in_frame(camera, pixel)

            h_px = min(max(config.box_height_coeff / d, MIN_BOX_PX), camera.image_h / 2)
            w_px = config.box_aspect * h_px
            w_norm = w_px / camera.image_w
            h_norm = h_px / camera.image_h

            # Label noise jitters the annotated waterline point, in pixels.
            du = rng.normal(0.0, config.label_noise_px)
            dv = rng.normal(0.0, config.label_noise_px)
            drop = rng.random() < config.visibility_dropout

            if visible:
                # Visibility is decided on the true projection: the anchored
                # box must fit entirely inside the frame.
                c_x = pixel.u / camera.image_w
                c_y = pixel.v / camera.image_h - h_norm / 2
                fits = (
                    c_x - w_norm / 2 >= 0
                    and c_x + w_norm / 2 <= 1
                    and c_y - h_norm / 2 >= 0
                    and c_y + h_norm / 2 <= 1
                )
                visible = fits and not drop

            if visible and config.label_noise_px > 0:
                # Jitter the annotation, clamped so the box stays in frame.
                u = min(max(pixel.u + du, w_px / 2), camera.image_w - w_px / 2)
                v = min(max(pixel.v + dv, h_px), float(camera.image_h))
                c_x = u / camera.image_w
                c_y = v / camera.image_h - h_norm / 2

            if visible:
                labels.append(GtBox(visible=True, c_x=c_x, c_y=c_y, w=w_norm, h=h_norm))
                visible_total += 1
            else:
                labels.append(GtBox(visible=False))

            # Recorded measurements carry the sensor noise; the label does not.
            rec_d = max(d * (1.0 + rng.normal(0.0, config.distance_noise_rel)), 1e-3)
            rec_bearing = wrap_angle_deg(
                true_query.bearing_deg + rng.normal(0.0, config.bearing_noise_deg)
            )
            queries.append(ChartQuery(distance_m=rec_d, bearing_deg=rec_bearing))

        rec_imu = ImuSample(
            pitch_deg=float(np.clip(pitch + rng.normal(0.0, config.pitch_noise_deg), -90, 90)),
            roll_deg=float(np.clip(roll + rng.normal(0.0, config.roll_noise_deg), -90, 90)),
            heading_deg=wrap_angle_deg(
                true_imu.heading_deg + rng.normal(0.0, config.heading_noise_deg)
            ),
        )
        records.append(
            SampleRecord(
                sample_id=f"{i:06d}",
                imu=rec_imu,
                queries=tuple(queries),
                labels=tuple(labels),
            )
        )
    if visible_total == 0:
        raise GenerationError(
            "generation produced zero visible queries; widen the ranges or "
            "check the camera configuration"
        )
    return records


def visible_examples(records) -> tuple[np.ndarray, np.ndarray]:
    """Extract (features, waterline targets) for every visible query."""
    xs = []
    ys = []
    for record in records:
        for query, label in zip(record.queries, record.labels):
            if label.visible:
                xs.append(build_features(query, record.imu))
                ys.append(waterline_target(label))
    if not xs:
        return np.zeros((0, 6)), np.zeros((0, 2))
    return np.stack(xs), np.asarray(ys, dtype=np.float64)


def split(records, ratio: float, seed: int) -> DatasetSplit:
    """Deterministic shuffled split by sample, stratified so buoy-free frames
    land in both halves proportionally when possible."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    records = list(records)
    n = len(records)
    if n < 2:
        raise ValueError("need at least 2 records to split")
    n_train = min(max(int(round(ratio * n)), 1), n - 1)

    strata = [
        [i for i, r in enumerate(records) if r.buoy_free],
        [i for i, r in enumerate(records) if not r.buoy_free],
    ]
    strata = [s for s in strata if s]

    # Largest-remainder allocation of the train quota across strata.
    quotas = [n_train * len(s) / n for s in strata]
    takes = [int(math.floor(q)) for q in quotas]
    remainders = sorted(
        range(len(strata)), key=lambda j: (-(quotas[j] - takes[j]), j)
    )
    shortfall = n_train - sum(takes)
    for j in remainders[:shortfall]:
        takes[j] += 1
    for j in range(len(strata)):  # clamp against rounding overshoot
        takes[j] = min(takes[j], len(strata[j]))
    deficit = n_train - sum(takes)
    for j in range(len(strata)):
        if deficit <= 0:
            break
        room = len(strata[j]) - takes[j]
        grab = min(room, deficit)
        takes[j] += grab
        deficit -= grab

    train_idx = set()
    for j, stratum in enumerate(strata):
        order = np.random.default_rng((seed, j)).permutation(len(stratum))
        train_idx.update(stratum[k] for k in order[: takes[j]])

    train = tuple(records[i] for i in range(n) if i in train_idx)
    val = tuple(records[i] for i in range(n) if i not in train_idx)
    return DatasetSplit(train=train, val=val, ratio=ratio, seed=seed)


def save_dataset(records, path) -> None:
    """Write records as JSONL; float fields keep full 64-bit precision."""
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(_record_to_dict(record), separators=(",", ":")))
            f.write("\n")


def load_dataset(path) -> list[SampleRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(str(exc), line=line_no) from exc
            records.append(_record_from_dict(data, line_no))
    return records


def _record_to_dict(record: SampleRecord) -> dict:
    labels = []
    for label in record.labels:
        if label.visible:
            labels.append(
                {"visible": True, "c_x": label.c_x, "c_y": label.c_y, "w": label.w, "h": label.h}
            )
        else:
            labels.append({"visible": False})
    return {
        "schema": SCHEMA_VERSION,
        "sample_id": record.sample_id,
        "imu": {
            "pitch_deg": record.imu.pitch_deg,
            "roll_deg": record.imu.roll_deg,
            "heading_deg": record.imu.heading_deg,
        },
        "queries": [
            {"distance_m": q.distance_m, "bearing_deg": q.bearing_deg} for q in record.queries
        ],
        "labels": labels,
    }


def _require(data: dict, key: str, line_no: int):
    if key not in data:
        raise DatasetSchemaError(f"missing key {key!r}", line=line_no)
    return data[key]


def _number(value, key: str, line_no: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DatasetSchemaError(f"{key!r} must be a number, got {value!r}", line=line_no)
    return float(value)


def _record_from_dict(data: dict, line_no: int) -> SampleRecord:
    if not isinstance(data, dict):
        raise DatasetSchemaError("record must be a JSON object", line=line_no)
    schema = _require(data, "schema", line_no)
    if schema != SCHEMA_VERSION:
        raise DatasetSchemaError(f"unsupported schema version {schema!r}", line=line_no)
    sample_id = _require(data, "sample_id", line_no)
    if not isinstance(sample_id, str):
        raise DatasetSchemaError("'sample_id' must be a string", line=line_no)

    imu_data = _require(data, "imu", line_no)
    if not isinstance(imu_data, dict):
        raise DatasetSchemaError("'imu' must be an object", line=line_no)
    imu = ImuSample(
        pitch_deg=_number(_require(imu_data, "pitch_deg", line_no), "pitch_deg", line_no),
        roll_deg=_number(_require(imu_data, "roll_deg", line_no), "roll_deg", line_no),
        heading_deg=wrap_angle_deg(
            _number(_require(imu_data, "heading_deg", line_no), "heading_deg", line_no)
        ),
    )

    queries_data = _require(data, "queries", line_no)
    labels_data = _require(data, "labels", line_no)
    if not isinstance(queries_data, list) or not isinstance(labels_data, list):
        raise DatasetSchemaError("'queries' and 'labels' must be arrays", line=line_no)
    if len(queries_data) != len(labels_data):
        raise DatasetSchemaError(
            f"{len(queries_data)} queries vs {len(labels_data)} labels", line=line_no
        )

    queries = []
    for q in queries_data:
        if not isinstance(q, dict):
            raise DatasetSchemaError("query entries must be objects", line=line_no)
        queries.append(
            ChartQuery(
                distance_m=_number(_require(q, "distance_m", line_no), "distance_m", line_no),
                bearing_deg=_number(_require(q, "bearing_deg", line_no), "bearing_deg", line_no),
            )
        )

    labels = []
    for entry in labels_data:
        if not isinstance(entry, dict):
            raise DatasetSchemaError("label entries must be objects", line=line_no)
        visible = _require(entry, "visible", line_no)
        if not isinstance(visible, bool):
            raise DatasetSchemaError("'visible' must be a boolean", line=line_no)
        if visible:
            labels.append(
                GtBox(
                    visible=True,
                    c_x=_number(_require(entry, "c_x", line_no), "c_x", line_no),
                    c_y=_number(_require(entry, "c_y", line_no), "c_y", line_no),
                    w=_number(_require(entry, "w", line_no), "w", line_no),
                    h=_number(_require(entry, "h", line_no), "h", line_no),
                )
            )
        else:
            labels.append(GtBox(visible=False))

    try:
        imu.validate()
        for query in queries:
            query.validate()
        for label in labels:
            label.validate()
        return SampleRecord(
            sample_id=sample_id, imu=imu, queries=tuple(queries), labels=tuple(labels)
        )
    except DatasetSchemaError:
        raise
    except ValueError as exc:
        raise DatasetSchemaError(str(exc), line=line_no) from exc
