"""Triplet sample construction from featurized trips.

Each training sample joins a target data point with two context points
from the same trip; the model predicts the target's recorded speed from
topography alone. Three association schemes are supported:

    pa   "past":          contexts are points t-2 and t-1
    pf   "past & future": contexts are points t-1 and t+1
    pup  "punctual past": contexts are points t-far and t-near
                          (default offsets far=10, near=5 timesteps)

The target's PAT component is always masked so the model gets no
localization of the prediction point itself; context points keep their
true PAT. Boundary points that lack the required context never become
targets (no padding). On raw features the mask sentinel is 0; on
normalized features it is the z-score of raw 0 for the PAT column.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError
from .features import FEATURE_NAMES, N_FEATURES, PAT_INDEX, FeaturizedTrip, NormStats

import json

SCHEMES = ("pa", "pf", "pup")
DEFAULT_PUP_OFFSETS = (5, 10)


@dataclass
class SchemeConfig:
    scheme: str
    pup_offsets: tuple[int, int] = DEFAULT_PUP_OFFSETS  # (near, far)

    def validate(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        near, far = self.pup_offsets
        if not (0 < near < far):
            raise ValidationError(
                f"pup offsets must satisfy 0 < near < far, got ({near}, {far})")


@dataclass
class AssociatedSample:
    context_a: np.ndarray  # (8,)
    context_b: np.ndarray  # (8,)
    target: np.ndarray     # (8,), PAT masked
    label: float           # target's true speed, m/s
    provenance: tuple      # (trip_id, target sequence index, scheme tag)


def mask_target_pat(v: np.ndarray, masked_pat: float = 0.0) -> np.ndarray:
    """Copy of the vector with the PAT component replaced by the mask
    sentinel. Idempotent for a fixed sentinel."""
    out = np.array(v, dtype=np.float64)
    out[PAT_INDEX] = masked_pat
    return out


def masked_pat_sentinel(stats: NormStats) -> float:
    """Mask value to use on normalized features: the z-score of raw 0."""
    return float((0.0 - stats.mean[PAT_INDEX]) / stats.std[PAT_INDEX])


def _triplets(trip: FeaturizedTrip, index_triples, scheme: str,
              masked_pat: float) -> list[AssociatedSample]:
    out = []
    for a, b, t in index_triples:
        out.append(AssociatedSample(
            context_a=trip.features[a].copy(),
            context_b=trip.features[b].copy(),
            target=mask_target_pat(trip.features[t], masked_pat),
            label=float(trip.speeds[t]),
            provenance=(trip.trip_id, t, scheme),
        ))
    return out


def build_pa(trip: FeaturizedTrip, masked_pat: float = 0.0) -> list[AssociatedSample]:
    """Target t with the two immediately previous points (t-2, t-1),
    for every t in [2, N-1]. Yields exactly N-2 samples."""
    n = len(trip)
    if n < 3:
        raise ValidationError(f"trip {trip.trip_id} has {n} point(s); "
                              "need >= 3 for the past scheme")
    return _triplets(trip, ((t - 2, t - 1, t) for t in range(2, n)),
                     "pa", masked_pat)


def build_pf(trip: FeaturizedTrip, masked_pat: float = 0.0) -> list[AssociatedSample]:
    """Target t between its immediate past and future points (t-1, t+1),
    for every t in [1, N-2]. Yields exactly N-2 samples."""
    n = len(trip)
    if n < 3:
        raise ValidationError(f"trip {trip.trip_id} has {n} point(s); "
                              "need >= 3 for the past-and-future scheme")
    return _triplets(trip, ((t - 1, t + 1, t) for t in range(1, n - 1)),
                     "pf", masked_pat)


def build_pup(trip: FeaturizedTrip, offsets: tuple[int, int] = DEFAULT_PUP_OFFSETS,
              masked_pat: float = 0.0) -> list[AssociatedSample]:
    """Target t with punctual past contexts (t-far, t-near), for every
    t in [far, N-1]. Yields max(0, N-far) samples; trips with no
    reachable target produce an empty list."""
    near, far = offsets
    if not (0 < near < far):
        raise ValidationError(
            f"pup offsets must satisfy 0 < near < far, got ({near}, {far})")
    n = len(trip)
    if n < 3:
        raise ValidationError(f"trip {trip.trip_id} has {n} point(s); "
                              "need >= 3 to associate")
    return _triplets(trip, ((t - far, t - near, t) for t in range(far, n)),
                     "pup", masked_pat)


def build_samples(trip: FeaturizedTrip, cfg: SchemeConfig,
                  masked_pat: float = 0.0) -> list[AssociatedSample]:
    cfg.validate()
    if cfg.scheme == "pa":
        return build_pa(trip, masked_pat)
    if cfg.scheme == "pf":
        return build_pf(trip, masked_pat)
    return build_pup(trip, cfg.pup_offsets, masked_pat)


def samples_to_arrays(samples: list[AssociatedSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into model inputs: X (n, 3, 8) with streams ordered
    (context_a, context_b, target), and labels y (n,)."""
    n = len(samples)
    x = np.empty((n, 3, N_FEATURES))
    y = np.empty(n)
    for i, s in enumerate(samples):
        x[i, 0] = s.context_a
        x[i, 1] = s.context_b
        x[i, 2] = s.target
        y[i] = s.label
    return x, y


def pointwise_arrays(ftrips: list[FeaturizedTrip]) -> tuple[np.ndarray, np.ndarray]:
    """Inputs for the pointwise baseline: every point is a sample on its
    own, PAT retained (a lone point needs its own localization)."""
    if not ftrips:
        return np.empty((0, N_FEATURES)), np.empty(0)
    x = np.concatenate([ft.features for ft in ftrips], axis=0)
    y = np.concatenate([ft.speeds for ft in ftrips])
    return x, y


_SAMPLE_HEADER = (
    ("trip_id", "target_index", "scheme")
    + tuple(f"a_{f}" for f in FEATURE_NAMES)
    + tuple(f"b_{f}" for f in FEATURE_NAMES)
    + tuple(f"t_{f}" for f in FEATURE_NAMES)
    + ("label",)
)


def save_samples(samples: list[AssociatedSample], path, meta: dict = None) -> None:
    """Write associated samples as CSV with a '#meta' JSON first line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("#meta " + json.dumps(meta or {}, sort_keys=True) + "\n")
        fh.write(",".join(_SAMPLE_HEADER) + "\n")
        for s in samples:
            cells = [str(s.provenance[0]), str(s.provenance[1]), s.provenance[2]]
            for vec in (s.context_a, s.context_b, s.target):
                cells += [repr(v) for v in vec]
            cells.append(repr(s.label))
            fh.write(",".join(cells) + "\n")


def load_samples(path) -> tuple[list[AssociatedSample], dict]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#meta "):
            raise ParseError(f"{path}:1: expected '#meta' header line")
        meta = json.loads(first[len("#meta "):])
        header = fh.readline().strip()
        if header != ",".join(_SAMPLE_HEADER):
            raise ParseError(f"{path}:2: unexpected column header")
        out = []
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(_SAMPLE_HEADER):
                raise ParseError(f"{path}:{lineno}: expected "
                                 f"{len(_SAMPLE_HEADER)} columns")
            try:
                tid, tidx = int(cells[0]), int(cells[1])
                scheme = cells[2]
                vals = np.array([float(c) for c in cells[3:]])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad value ({exc})") from None
            out.append(AssociatedSample(
                context_a=vals[0:8], context_b=vals[8:16], target=vals[16:24],
                label=float(vals[24]), provenance=(tid, tidx, scheme)))
    return out, meta
