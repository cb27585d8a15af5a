"""Topographical feature extraction and dataset normalization.

Every data point maps to 8 features, in this fixed order:

    0 priority        functional-class rank of the link (0..5)
    1 light_start     1.0 if a traffic light sits at the link start
    2 light_end       1.0 if a traffic light sits at the link end
    3 neighbor_count  distinct links reachable directly before/after
    4 lanes           lane count
    5 speed_limit     m/s
    6 link_length     m
    7 pat             percentage of already traveled link, [0, 100]

Feature vectors are plain float64 arrays of length 8. Normalization is
per-component z-scoring with statistics fitted on the training split
only; columns that are constant in training keep std 1 so they pass
through centered but unscaled.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError
from .linkmap import LinkMap
from .trips import DataPoint, Trip

FEATURE_NAMES = ("priority", "light_start", "light_end", "neighbor_count",
                 "lanes", "speed_limit", "link_length", "pat")
N_FEATURES = len(FEATURE_NAMES)
PAT_INDEX = 7


def pat(position_on_link: float, link_length: float) -> float:
    """Percentage of the link already traveled: position * 100 / length."""
    if link_length <= 0:
        raise ValidationError(f"link_length {link_length} must be > 0")
    if not 0.0 <= position_on_link <= link_length:
        raise ValidationError(
            f"position {position_on_link} outside [0, {link_length}]")
    return position_on_link * 100.0 / link_length


def featurize_point(lmap: LinkMap, p: DataPoint) -> np.ndarray:
    """Raw (unnormalized) 8-feature vector for one data point."""
    ln = lmap.link(p.link_id)
    return np.array([
        ln.priority,
        float(ln.light_at_start),
        float(ln.light_at_end),
        lmap.neighbor_count(p.link_id),
        ln.lanes,
        ln.speed_limit,
        ln.length,
        pat(p.position_on_link, ln.length),
    ], dtype=np.float64)


@dataclass
class FeaturizedTrip:
    trip_id: int
    features: np.ndarray  # (n_points, 8)
    speeds: np.ndarray    # (n_points,) m/s labels

    def __len__(self):
        return len(self.speeds)


def featurize_trip(lmap: LinkMap, trip: Trip) -> FeaturizedTrip:
    idx, table = lmap.attribute_table()
    rows = np.empty((len(trip.points), N_FEATURES))
    speeds = np.empty(len(trip.points))
    for i, p in enumerate(trip.points):
        try:
            rows[i, :7] = table[idx[p.link_id]]
        except KeyError:
            raise ValidationError(f"trip {trip.trip_id}: unknown link "
                                  f"{p.link_id}") from None
        rows[i, PAT_INDEX] = pat(p.position_on_link, rows[i, 6])
        speeds[i] = p.speed
    return FeaturizedTrip(trip_id=trip.trip_id, features=rows, speeds=speeds)


@dataclass
class NormStats:
    mean: np.ndarray      # (8,)
    std: np.ndarray       # (8,), 1.0 where constant
    constant: np.ndarray  # (8,) bool

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(mean=np.asarray(d["mean"], dtype=np.float64),
                   std=np.asarray(d["std"], dtype=np.float64),
                   constant=np.asarray(d["constant"], dtype=bool))


def fit_norm(train_features: np.ndarray) -> NormStats:
    """Per-component mean and population std over an (n, 8) array of raw
    training feature vectors. Must only ever see the training split."""
    x = np.atleast_2d(np.asarray(train_features, dtype=np.float64))
    if x.size == 0:
        raise ValidationError("cannot fit normalization on an empty set")
    if x.shape[1] != N_FEATURES:
        raise ValidationError(f"expected {N_FEATURES} columns, got {x.shape[1]}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    std = np.where(constant, 1.0, std)
    return NormStats(mean=mean, std=std, constant=constant)


def apply_norm(v: np.ndarray, stats: NormStats) -> np.ndarray:
    """Z-score a feature vector or an (n, 8) block: (v - mean) / std."""
    return (np.asarray(v, dtype=np.float64) - stats.mean) / stats.std


def invert_norm(v: np.ndarray, stats: NormStats) -> np.ndarray:
    return np.asarray(v, dtype=np.float64) * stats.std + stats.mean


FEATURE_FILE_HEADER = ("trip_id", "sequence_index") + FEATURE_NAMES + ("speed_mps",)


def save_features(ftrips: list[FeaturizedTrip], stats: NormStats, path) -> None:
    """Write a featurized dataset: a '#stats' JSON line carrying the
    normalization statistics, then one CSV record per point. Feature
    columns are expected to be already normalized with those stats."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("#stats " + json.dumps(stats.to_dict()) + "\n")
        fh.write(",".join(FEATURE_FILE_HEADER) + "\n")
        for ft in ftrips:
            for i in range(len(ft)):
                cells = [str(ft.trip_id), str(i)]
                cells += [repr(x) for x in ft.features[i]]
                cells.append(repr(float(ft.speeds[i])))
                fh.write(",".join(cells) + "\n")


def load_features(path) -> tuple[list[FeaturizedTrip], NormStats]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#stats "):
            raise ParseError(f"{path}:1: expected '#stats' header line")
        try:
            stats = NormStats.from_dict(json.loads(first[len("#stats "):]))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ParseError(f"{path}:1: bad stats header ({exc})") from None
        header = fh.readline().strip()
        if header != ",".join(FEATURE_FILE_HEADER):
            raise ParseError(f"{path}:2: unexpected column header")
        by_trip: dict[int, list] = {}
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(FEATURE_FILE_HEADER):
                raise ParseError(f"{path}:{lineno}: expected "
                                 f"{len(FEATURE_FILE_HEADER)} columns")
            try:
                tid = int(cells[0])
                seq = int(cells[1])
                vals = [float(c) for c in cells[2:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad value ({exc})") from None
            by_trip.setdefault(tid, []).append((seq, vals))
    out = []
    for tid in sorted(by_trip):
        rows = by_trip[tid]
        if [seq for seq, _ in rows] != list(range(len(rows))):
            raise ValidationError(f"{path}: trip {tid} has gaps in sequence_index")
        arr = np.array([vals for _, vals in rows])
        out.append(FeaturizedTrip(trip_id=tid, features=arr[:, :N_FEATURES],
                                  speeds=arr[:, N_FEATURES]))
    return out, stats
