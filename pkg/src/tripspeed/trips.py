"""Trip ingestion and the seeded trip simulator.

A trip is an ordered sequence of data points, each a GPS registration:
the link the vehicle is on, how far along that link it is, and the
recorded speed. Real trips load from CSV; the simulator stands in for a
fleet-collection backend so experiments run without proprietary data.

Simulator model (all constants documented here and in the README):

* The vehicle walks the successor graph from a random start link and
  keeps appending links until the sampled target point count is covered.
* Per link it cruises at min(speed_limit, 6.0 + 3.5*priority +
  1.2*(lanes-1)) m/s, so cruise speed is a genuine function of the
  topographical features.
* It accelerates at 1.5 m/s^2 and brakes at 2.0 m/s^2. Speed over
  distance is the exact piecewise envelope v(s)^2 = min(cruise^2,
  v_a^2 + 2*1.5*(s-a), v_b^2 + 2*2.0*(b-s)) anchored at link
  boundaries, computed in closed form (no time stepping).
* It must stop (v=0) at the trip start, at the trip end, and at each
  link boundary carrying a traffic light, each light independently with
  probability light_stop_prob.
* Sampling is distance-stepped: one point every step_m meters of
  travel, plus one point at every stop position. Time never appears.
* Gaussian speed noise of noise_sigma is added last and the result is
  clipped at 0. With zero noise, speed never exceeds the link limit.

Each trip draws from an independent random stream derived from
(seed, trip index), so the output is reproducible and insensitive to
how trips might be distributed over workers.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError
from .linkmap import Link, LinkMap

log = logging.getLogger(__name__)

TRIP_FIELDS = ("trip_id", "sequence_index", "link_id", "position_m", "speed_mps")

ACCEL_MPS2 = 1.5
BRAKE_MPS2 = 2.0
CAP_BASE_MPS = 6.0
CAP_PER_PRIORITY = 3.5
CAP_PER_EXTRA_LANE = 1.2


@dataclass(frozen=True)
class DataPoint:
    link_id: int
    position_on_link: float  # meters from link start
    speed: float             # m/s, ground-truth label


@dataclass
class Trip:
    trip_id: int
    points: list[DataPoint]

    def __len__(self):
        return len(self.points)


@dataclass
class SimConfig:
    n_trips: int
    mean_trip_len: int          # target points per trip (Poisson mean)
    seed: int
    noise_sigma: float = 0.0    # m/s
    step_m: float = 10.0        # GPS distance step
    light_stop_prob: float = 0.5
    id_base: int = 0            # first trip_id, for region-disjoint sets

    def validate(self):
        if self.n_trips < 1:
            raise ValidationError("n_trips must be >= 1")
        if self.mean_trip_len < 3:
            raise ValidationError("mean_trip_len must be >= 3")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if self.step_m <= 0:
            raise ValidationError("step_m must be > 0")
        if not 0.0 <= self.light_stop_prob <= 1.0:
            raise ValidationError("light_stop_prob must be in [0, 1]")


@dataclass
class DatasetSplit:
    train: list[Trip]
    val: list[Trip]
    test: list[Trip]
    warnings: list[str] = field(default_factory=list)


def cruise_speed(link: Link) -> float:
    """Steady-state speed the simulator drives on a link, m/s."""
    cap = CAP_BASE_MPS + CAP_PER_PRIORITY * link.priority \
        + CAP_PER_EXTRA_LANE * (link.lanes - 1)
    return min(link.speed_limit, cap)


def _speed_envelope(path: list[Link], stop_mask: np.ndarray,
                    positions: np.ndarray) -> np.ndarray:
    """Exact kinematic speed at each travel position along a link path.

    stop_mask flags, per interior boundary (len(path)-1 entries), whether
    the vehicle stops there; trip start and end are always stops.
    """
    lengths = np.array([ln.length for ln in path])
    cum_end = np.cumsum(lengths)
    cruise2 = np.array([cruise_speed(ln) ** 2 for ln in path])

    # anchor j sits at the start of link j (j=0 trip start) and anchor
    # len(path) at the trip end; anchored max speed^2 at each
    anchors = np.concatenate(([0.0], cum_end))
    a2 = np.empty(len(path) + 1)
    a2[0] = 0.0
    a2[-1] = 0.0
    if len(path) > 1:
        boundary = np.minimum(cruise2[:-1], cruise2[1:])
        boundary[stop_mask] = 0.0
        a2[1:-1] = boundary

    # tightest profile reachable under the acceleration limit, then under
    # the braking limit; each is a running min over a linear ramp
    ramp = 2.0 * ACCEL_MPS2 * anchors
    a2 = np.minimum.accumulate(a2 - ramp) + ramp
    ramp = 2.0 * BRAKE_MPS2 * anchors
    a2 = (np.minimum.accumulate((a2 + ramp)[::-1])[::-1]) - ramp

    idx = np.minimum(np.searchsorted(cum_end, positions, side="left"),
                     len(path) - 1)
    v2 = np.minimum(cruise2[idx],
                    np.minimum(a2[idx] + 2.0 * ACCEL_MPS2 * (positions - anchors[idx]),
                               a2[idx + 1] + 2.0 * BRAKE_MPS2 * (anchors[idx + 1] - positions)))
    return np.sqrt(np.maximum(v2, 0.0))


def _simulate_one(lmap: LinkMap, cfg: SimConfig, trip_index: int,
                  link_ids: list[int]) -> Trip:
    rng = np.random.default_rng((cfg.seed & 0xFFFFFFFFFFFFFFFF, trip_index))
    target_points = max(3, int(rng.poisson(cfg.mean_trip_len)))

    path = [lmap.links[link_ids[int(rng.integers(0, len(link_ids)))]]]
    total = path[0].length
    while int(total // cfg.step_m) + 1 < target_points:
        succ = path[-1].successors
        if not succ:
            break  # dead end: trip stops here
        path.append(lmap.links[succ[int(rng.integers(0, len(succ)))]])
        total += path[-1].length

    # one stop decision per interior boundary that carries a light
    stop_mask = np.zeros(max(len(path) - 1, 0), dtype=bool)
    for i in range(len(path) - 1):
        if path[i].light_at_end or path[i + 1].light_at_start:
            stop_mask[i] = rng.random() < cfg.light_stop_prob

    lengths = np.array([ln.length for ln in path])
    cum_end = np.cumsum(lengths)
    cum_start = np.concatenate(([0.0], cum_end[:-1]))
    total = cum_end[-1]

    grid = np.arange(int(total // cfg.step_m) + 1) * cfg.step_m
    stops = np.concatenate((cum_end[:-1][stop_mask], [total]))
    # keep the exact stop positions; drop grid points that collide
    keep = np.min(np.abs(grid[:, None] - stops[None, :]), axis=1) > 1e-9
    positions = np.sort(np.concatenate((grid[keep], stops)))

    if len(positions) < 3:
        raise ValidationError(
            f"trip {cfg.id_base + trip_index}: path ended after "
            f"{len(positions)} points (< 3); map too small or disconnected")

    speeds = _speed_envelope(path, stop_mask, positions)
    if cfg.noise_sigma > 0:
        speeds = np.maximum(speeds + rng.normal(0.0, cfg.noise_sigma,
                                                len(speeds)), 0.0)

    idx = np.minimum(np.searchsorted(cum_end, positions, side="left"),
                     len(path) - 1)
    points = []
    for k in range(len(positions)):
        i = int(idx[k])
        pos = min(positions[k] - cum_start[i], path[i].length)
        points.append(DataPoint(link_id=path[i].id,
                                position_on_link=float(max(pos, 0.0)),
                                speed=float(speeds[k])))
    return Trip(trip_id=cfg.id_base + trip_index, points=points)


def simulate_trips(lmap: LinkMap, cfg: SimConfig) -> list[Trip]:
    """Generate cfg.n_trips seeded trips over the map. Deterministic:
    the same (map, config) always yields bitwise-identical trips."""
    cfg.validate()
    if not lmap.links:
        raise ValidationError("map has no links")
    link_ids = sorted(lmap.links)
    return [_simulate_one(lmap, cfg, i, link_ids) for i in range(cfg.n_trips)]


def save_trips(trips: list[Trip], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIP_FIELDS)
        for trip in trips:
            for seq, p in enumerate(trip.points):
                w.writerow((trip.trip_id, seq, p.link_id,
                            repr(p.position_on_link), repr(p.speed)))


def load_trips(path, lmap: LinkMap) -> list[Trip]:
    """Load trips, validating every point against the map: link ids must
    exist, positions must lie on the link, consecutive points must stay
    on the same link or move to a successor, and position may not go
    backwards within a link traversal. Trips shorter than 3 points are
    dropped (no association scheme can use them)."""
    rows_by_trip: dict[int, list] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or \
                [f.strip() for f in reader.fieldnames] != list(TRIP_FIELDS):
            raise ParseError(f"{path}: expected header {','.join(TRIP_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                tid = int(row["trip_id"])
                seq = int(row["sequence_index"])
                lid = int(row["link_id"])
                pos = float(row["position_m"])
                spd = float(row["speed_mps"])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad value ({exc})") from None
            rows_by_trip.setdefault(tid, []).append((lineno, seq, lid, pos, spd))

    trips = []
    n_dropped = 0
    for tid in sorted(rows_by_trip):
        rows = rows_by_trip[tid]
        points = []
        prev = None
        prev_seq = None
        for lineno, seq, lid, pos, spd in rows:
            if prev_seq is not None and seq <= prev_seq:
                raise ValidationError(
                    f"{path}:{lineno}: trip {tid} sequence_index not increasing")
            prev_seq = seq
            if lid not in lmap:
                raise ValidationError(
                    f"{path}:{lineno}: trip {tid} references unknown link {lid}")
            link = lmap.links[lid]
            if not 0.0 <= pos <= link.length:
                raise ValidationError(
                    f"{path}:{lineno}: position {pos} outside link {lid} "
                    f"of length {link.length}")
            if spd < 0:
                raise ValidationError(f"{path}:{lineno}: negative speed {spd}")
            if prev is not None:
                if prev.link_id == lid:
                    if pos < prev.position_on_link:
                        raise ValidationError(
                            f"{path}:{lineno}: position goes backwards on link {lid}")
                elif lid not in lmap.links[prev.link_id].successors:
                    raise ValidationError(
                        f"{path}:{lineno}: jump from link {prev.link_id} to "
                        f"non-adjacent link {lid}")
            prev = DataPoint(link_id=lid, position_on_link=pos, speed=spd)
            points.append(prev)
        if len(points) < 3:
            n_dropped += 1
            continue
        trips.append(Trip(trip_id=tid, points=points))
    if n_dropped:
        log.info("dropped %d trip(s) shorter than 3 points", n_dropped)
    return trips


def split_by_region(train: list[Trip], val: list[Trip],
                    test: list[Trip]) -> DatasetSplit:
    """Assemble a train/val/test split from per-region trip sets,
    verifying the sets share no trip ids. Test trips keep their point
    order untouched (evaluation needs the real sequence)."""
    ids = {"train": {t.trip_id for t in train},
           "val": {t.trip_id for t in val},
           "test": {t.trip_id for t in test}}
    names = list(ids)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            shared = ids[a] & ids[b]
            if shared:
                raise ValidationError(
                    f"trip ids shared between {a} and {b}: {sorted(shared)}")
    warnings = [f"empty {name} set" for name in names if not ids[name]]
    return DatasetSplit(train=train, val=val, test=test, warnings=warnings)
