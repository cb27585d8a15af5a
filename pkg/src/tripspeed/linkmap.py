"""Road network as a map of links.

A link is a continuous road section between breaks in continuity
(intersections, signals). Each link carries the topographical attributes
used as model features: priority (functional-class rank, 0 minor to 5
highway), traffic lights at either end, lane count, speed limit, and
length. Adjacency is directed (successors / predecessors) and must be
symmetric: b in successors(a) iff a in predecessors(b).

File format (one JSON object per line, optional first meta line):

    {"region_tag": "nanterre"}
    {"id": 0, "priority": 2, "light_start": false, "light_end": true,
     "lanes": 2, "speed_limit_kmh": 50.0, "length_m": 80.0,
     "successors": [1], "predecessors": []}

Speed limits are km/h on disk and converted to m/s at load; everything
downstream works in meters and seconds.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError

KMH_TO_MPS = 1.0 / 3.6

MAP_FIELDS = (
    "id", "priority", "light_start", "light_end", "lanes",
    "speed_limit_kmh", "length_m", "successors", "predecessors",
)


@dataclass(frozen=True)
class Link:
    """One road section. speed_limit and length are m/s and meters."""

    id: int
    priority: int
    light_at_start: bool
    light_at_end: bool
    lanes: int
    speed_limit: float
    length: float
    successors: tuple[int, ...]
    predecessors: tuple[int, ...]


@dataclass(frozen=True)
class Violation:
    link_id: int
    rule: str
    message: str

    def __str__(self):
        return f"link {self.link_id}: [{self.rule}] {self.message}"


@dataclass
class LinkMap:
    """Immutable-after-construction collection of links keyed by id."""

    links: dict[int, Link]
    region_tag: str = ""

    def __post_init__(self):
        self._id_index = None
        self._attr_table = None

    def __len__(self):
        return len(self.links)

    def __contains__(self, link_id):
        return link_id in self.links

    def link(self, link_id: int) -> Link:
        try:
            return self.links[link_id]
        except KeyError:
            raise ValidationError(f"unknown link id {link_id}") from None

    def neighbor_count(self, link_id: int) -> int:
        """Number of distinct links reachable directly before or after
        this one (undirected union of predecessors and successors,
        excluding the link itself)."""
        ln = self.link(link_id)
        return len((set(ln.successors) | set(ln.predecessors)) - {link_id})

    def validate(self) -> list[Violation]:
        """Check every structural invariant; one Violation per breach."""
        out = []
        for lid, ln in self.links.items():
            if ln.length <= 0:
                out.append(Violation(lid, "range", f"length {ln.length} must be > 0"))
            if ln.lanes < 1:
                out.append(Violation(lid, "range", f"lanes {ln.lanes} must be >= 1"))
            if ln.speed_limit <= 0:
                out.append(Violation(lid, "range",
                                     f"speed_limit {ln.speed_limit} must be > 0"))
            if ln.priority < 0:
                out.append(Violation(lid, "range",
                                     f"priority {ln.priority} must be >= 0"))
            for kind, ids in (("successors", ln.successors),
                              ("predecessors", ln.predecessors)):
                if len(set(ids)) != len(ids):
                    out.append(Violation(lid, "duplicate",
                                         f"duplicate ids in {kind}: {list(ids)}"))
                if lid in ids:
                    out.append(Violation(lid, "self_loop",
                                         f"link appears in its own {kind}"))
                for other in ids:
                    if other not in self.links:
                        out.append(Violation(lid, "dangling",
                                             f"{kind} id {other} is not defined"))
            # directed adjacency must be symmetric
            for succ in ln.successors:
                other = self.links.get(succ)
                if other is not None and lid not in other.predecessors:
                    out.append(Violation(lid, "asymmetry",
                                         f"{succ} in successors but {lid} not in "
                                         f"predecessors({succ})"))
            for pred in ln.predecessors:
                other = self.links.get(pred)
                if other is not None and lid not in other.successors:
                    out.append(Violation(lid, "asymmetry",
                                         f"{pred} in predecessors but {lid} not in "
                                         f"successors({pred})"))
        return out

    def attribute_table(self) -> tuple[dict[int, int], np.ndarray]:
        """Rows of per-link raw feature columns (priority, light_start,
        light_end, neighbor_count, lanes, speed_limit, length), keyed by
        a link-id -> row index. Cached; the map must not change afterwards."""
        if self._id_index is None:
            ids = sorted(self.links)
            idx = {lid: i for i, lid in enumerate(ids)}
            tab = np.empty((len(ids), 7), dtype=np.float64)
            for lid, i in idx.items():
                ln = self.links[lid]
                tab[i] = (ln.priority, float(ln.light_at_start),
                          float(ln.light_at_end), self.neighbor_count(lid),
                          ln.lanes, ln.speed_limit, ln.length)
            self._id_index = idx
            self._attr_table = tab
        return self._id_index, self._attr_table


def _parse_record(rec: dict, lineno: int, path) -> Link:
    missing = [f for f in MAP_FIELDS if f not in rec]
    if missing:
        raise ParseError(f"{path}:{lineno}: missing fields {missing}")
    try:
        return Link(
            id=int(rec["id"]),
            priority=int(rec["priority"]),
            light_at_start=bool(rec["light_start"]),
            light_at_end=bool(rec["light_end"]),
            lanes=int(rec["lanes"]),
            speed_limit=float(rec["speed_limit_kmh"]) * KMH_TO_MPS,
            length=float(rec["length_m"]),
            successors=tuple(int(s) for s in rec["successors"]),
            predecessors=tuple(int(p) for p in rec["predecessors"]),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}:{lineno}: bad field value ({exc})") from None


def load_linkmap(path) -> LinkMap:
    """Load and validate a link-map file; raise on any parse error or
    invariant violation (collecting all violations into one message)."""
    links = {}
    region_tag = ""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if "id" not in rec and "region_tag" in rec:
                region_tag = str(rec["region_tag"])
                continue
            ln = _parse_record(rec, lineno, path)
            if ln.id in links:
                raise ValidationError(f"{path}:{lineno}: duplicate link id {ln.id}")
            links[ln.id] = ln
    lmap = LinkMap(links=links, region_tag=region_tag)
    violations = lmap.validate()
    if violations:
        detail = "; ".join(str(v) for v in violations)
        raise ValidationError(f"{path}: {len(violations)} violation(s): {detail}")
    return lmap


def save_linkmap(lmap: LinkMap, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if lmap.region_tag:
            fh.write(json.dumps({"region_tag": lmap.region_tag}) + "\n")
        for lid in sorted(lmap.links):
            ln = lmap.links[lid]
            fh.write(json.dumps({
                "id": ln.id,
                "priority": ln.priority,
                "light_start": ln.light_at_start,
                "light_end": ln.light_at_end,
                "lanes": ln.lanes,
                "speed_limit_kmh": ln.speed_limit / KMH_TO_MPS,
                "length_m": ln.length,
                "successors": list(ln.successors),
                "predecessors": list(ln.predecessors),
            }) + "\n")


# Limits paired with the priority rank a road of that class would carry.
_LIMIT_KMH_BY_PRIORITY = (30.0, 50.0, 50.0, 70.0, 90.0, 110.0)


def generate_linkmap(n_links: int, seed: int, region_tag: str = "",
                     light_prob: float = 0.35) -> LinkMap:
    """Synthesize a demo road network (stands in for a real map export).

    Links are arranged on a ring so every link has at least one successor
    (random walks never dead-end), with extra random edges for varied
    neighbor counts. Attributes are drawn so that priority, lanes, and
    speed limit correlate the way real functional classes do. Where a
    link ends at a signal, its successors usually carry light_start, so
    the two light flags stay physically consistent.
    """
    if n_links < 3:
        raise ValueError("n_links must be >= 3")
    rng = np.random.default_rng(seed)
    priorities = rng.integers(0, 6, size=n_links)
    lanes = 1 + np.minimum(rng.poisson(0.35 * priorities), 3)
    limits = np.array([_LIMIT_KMH_BY_PRIORITY[p] for p in priorities])
    lengths = rng.uniform(40.0, 160.0, size=n_links)
    light_end = rng.random(n_links) < light_prob

    succs = [set() for _ in range(n_links)]
    preds = [set() for _ in range(n_links)]
    for i in range(n_links):
        targets = {(i + 1) % n_links}
        for _ in range(int(rng.integers(0, 3))):
            t = int(rng.integers(0, n_links))
            if t != i:
                targets.add(t)
        for t in targets:
            succs[i].add(t)
            preds[t].add(i)

    light_start = np.zeros(n_links, dtype=bool)
    for i in range(n_links):
        if light_end[i]:
            for t in succs[i]:
                if rng.random() < 0.8:
                    light_start[t] = True

    links = {}
    for i in range(n_links):
        links[i] = Link(
            id=i,
            priority=int(priorities[i]),
            light_at_start=bool(light_start[i]),
            light_at_end=bool(light_end[i]),
            lanes=int(lanes[i]),
            speed_limit=float(limits[i]) * KMH_TO_MPS,
            length=float(lengths[i]),
            successors=tuple(sorted(succs[i])),
            predecessors=tuple(sorted(preds[i])),
        )
    lmap = LinkMap(links=links, region_tag=region_tag)
    assert not lmap.validate()
    return lmap
