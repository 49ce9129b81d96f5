"""Network scenarios: geometry, connectivity, and noisy range measurement.

A scenario is an immutable snapshot of the field: its bounds, the
communication radius R, and the node list. Unknown nodes occupy ids
0..n_unknown-1 and anchors are appended after them, so swapping the anchor
set (as the placement optimizer does) never renumbers the unknowns and the
per-pair measurement noise streams stay aligned across candidate anchor
sets (common random numbers).

Connectivity is a hard disk: an edge exists iff the true distance is at
most R (boundary inclusive). The Gaussian falloff exp(-d^2 / 2R^2) is used
only as a potential weight inside belief propagation, never for building
the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._seeds import TAG_PLACE, TAG_RANGES, TAG_SCENARIO, stream

__all__ = [
    "NodeRecord", "FieldScenario", "MeasurementModel", "RangeGraph",
    "build_scenario", "with_anchors", "place_anchors_preset", "neighbors",
    "measure_ranges", "connectivity_prob", "save_scenario", "load_scenario",
]


@dataclass(frozen=True)
class NodeRecord:
    id: int
    true_pos: tuple[float, float]
    is_anchor: bool = False


@dataclass(frozen=True)
class FieldScenario:
    """Immutable field geometry plus the ordered node list."""

    width: float
    height: float
    radius_r: float
    nodes: tuple[NodeRecord, ...]
    rng_seed: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("field dimensions must be positive")
        if self.radius_r <= 0:
            raise ValueError("communication radius must be positive")
        ids = [n.id for n in self.nodes]
        if ids != list(range(len(self.nodes))):
            raise ValueError("node ids must be unique and dense 0..N-1 in list order")
        for n in self.nodes:
            x, y = n.true_pos
            if not (0.0 <= x <= self.width and 0.0 <= y <= self.height):
                raise ValueError(f"node {n.id} position {n.true_pos} outside field bounds")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([n.true_pos for n in self.nodes], dtype=np.float64).reshape(-1, 2)

    @cached_property
    def anchor_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.is_anchor)

    @cached_property
    def unknown_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if not n.is_anchor)

    def node(self, t: int) -> NodeRecord:
        if not 0 <= t < len(self.nodes):
            raise KeyError(f"unknown node id {t}")
        return self.nodes[t]


@dataclass(frozen=True)
class MeasurementModel:
    """Gaussian ranging noise: measured d = true distance + N(0, sigma^2)."""

    noise_sigma: float = 1.0
    min_distance_floor: float = 0.1

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.min_distance_floor <= 0:
            raise ValueError("min_distance_floor must be positive")


@dataclass(frozen=True)
class RangeGraph:
    """Symmetrized measured distances, one entry per unordered connected pair."""

    edges: dict

    @cached_property
    def adjacency(self) -> dict:
        adj: dict[int, list[int]] = {}
        for (lo, hi) in self.edges:
            adj.setdefault(lo, []).append(hi)
            adj.setdefault(hi, []).append(lo)
        return {t: tuple(sorted(us)) for t, us in adj.items()}

    def neighbors_of(self, t: int) -> tuple[int, ...]:
        return self.adjacency.get(t, ())

    def distance(self, t: int, u: int) -> float:
        return self.edges[(t, u) if t < u else (u, t)]

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def build_scenario(width: float, height: float, radius: float, n_unknown: int,
                   anchor_positions, seed: int) -> FieldScenario:
    """Scenario with seeded uniform unknown positions plus the given anchors.

    Unknown placement depends only on (n_unknown, seed), so the same base
    field can be re-dressed with different anchor sets.
    """
    if width <= 0 or height <= 0 or radius <= 0:
        raise ValueError("width, height and radius must be positive")
    if n_unknown < 0:
        raise ValueError("n_unknown must be >= 0")
    anchor_positions = [(float(x), float(y)) for x, y in anchor_positions]
    for i, (x, y) in enumerate(anchor_positions):
        if not (0.0 <= x <= width and 0.0 <= y <= height):
            raise ValueError(f"anchor {i} at ({x}, {y}) outside field bounds")
    rng = stream(seed, TAG_SCENARIO)
    unknown_pos = rng.uniform((0.0, 0.0), (width, height), size=(n_unknown, 2))
    nodes = [NodeRecord(i, (float(p[0]), float(p[1]))) for i, p in enumerate(unknown_pos)]
    nodes += [NodeRecord(n_unknown + i, pos, is_anchor=True)
              for i, pos in enumerate(anchor_positions)]
    return FieldScenario(width, height, radius, tuple(nodes), rng_seed=int(seed))


def with_anchors(base: FieldScenario, anchor_positions) -> FieldScenario:
    """Copy of ``base`` with its anchor tail replaced by the given positions."""
    unknowns = [n for n in base.nodes if not n.is_anchor]
    nodes = [NodeRecord(i, n.true_pos) for i, n in enumerate(unknowns)]
    for i, (x, y) in enumerate(anchor_positions):
        x, y = float(x), float(y)
        if not (0.0 <= x <= base.width and 0.0 <= y <= base.height):
            raise ValueError(f"anchor {i} at ({x}, {y}) outside field bounds")
        nodes.append(NodeRecord(len(unknowns) + i, (x, y), is_anchor=True))
    return FieldScenario(base.width, base.height, base.radius_r, tuple(nodes),
                         rng_seed=base.rng_seed)


def place_anchors_preset(mode: str, k: int, width: float, height: float,
                         seed: int = 0) -> list[tuple[float, float]]:
    """k anchor positions: equally spaced around the perimeter, or uniform random.

    Edge mode walks the perimeter counter-clockwise from the origin corner in
    equal arc-length steps.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if mode == "random" or mode == "rand":
        rng = stream(seed, TAG_PLACE)
        pts = rng.uniform((0.0, 0.0), (width, height), size=(k, 2))
        return [(float(x), float(y)) for x, y in pts]
    if mode != "edge":
        raise ValueError(f"unknown placement mode {mode!r}")
    width, height = float(width), float(height)
    perimeter = 2.0 * (width + height)
    points = []
    for i in range(k):
        s = perimeter * i / k
        if s <= width:
            points.append((s, 0.0))
        elif s <= width + height:
            points.append((width, s - width))
        elif s <= 2.0 * width + height:
            points.append((width - (s - width - height), height))
        else:
            points.append((0.0, height - (s - 2.0 * width - height)))
    return points


def neighbors(scenario: FieldScenario, t: int) -> set:
    """Ids within communication radius of node t (boundary inclusive)."""
    scenario.node(t)
    pos = scenario.positions
    d = np.linalg.norm(pos - pos[t], axis=1)
    return {int(u) for u in np.nonzero(d <= scenario.radius_r)[0] if u != t}


def measure_ranges(scenario: FieldScenario, model: MeasurementModel,
                   seed: int) -> RangeGraph:
    """Noisy symmetrized ranges for every connected pair.

    Both directed measurements are drawn and averaged, then floored at the
    model's minimum distance. The noise for a pair depends only on
    (seed, lo, hi), never on which other edges exist.
    """
    pos = scenario.positions
    n = scenario.n_nodes
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    edges = {}
    floor = model.min_distance_floor
    for lo in range(n):
        for hi in range(lo + 1, n):
            true_d = dist[lo, hi]
            if true_d > scenario.radius_r:
                continue
            if model.noise_sigma > 0:
                v = stream(seed, TAG_RANGES, lo, hi).normal(0.0, model.noise_sigma, 2)
                measured = true_d + 0.5 * (v[0] + v[1])
            else:
                measured = true_d
            edges[(lo, hi)] = max(measured, floor)
    return RangeGraph(edges)


def connectivity_prob(p, q, radius: float) -> float:
    """exp(-||p-q||^2 / 2R^2): the link potential between two positions."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    dx = p[0] - q[0]
    dy = p[1] - q[1]
    return math.exp(-(dx * dx + dy * dy) / (2.0 * radius * radius))


def save_scenario(path, scenario: FieldScenario, noise_sigma: float = 1.0) -> None:
    """Write the scenario as `key = value` text; floats keep full precision."""
    lines = [
        "# wsnloc scenario",
        f"width = {scenario.width!r}",
        f"height = {scenario.height!r}",
        f"radius = {scenario.radius_r!r}",
        f"noise_sigma = {float(noise_sigma)!r}",
        f"seed = {scenario.rng_seed}",
    ]
    for n in scenario.nodes:
        lines.append(f"node = {n.id},{n.true_pos[0]!r},{n.true_pos[1]!r},{int(n.is_anchor)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_scenario(path):
    """Read a scenario file; returns (FieldScenario, noise_sigma)."""
    keys = {}
    nodes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "node":
                fields = value.split(",")
                if len(fields) != 4:
                    raise ValueError(f"{path}: line {lineno}: node needs id,x,y,anchor_flag")
                nodes.append(NodeRecord(int(fields[0]), (float(fields[1]), float(fields[2])),
                                        is_anchor=bool(int(fields[3]))))
            else:
                if key in keys:
                    raise ValueError(f"{path}: line {lineno}: duplicate key {key!r}")
                keys[key] = value
    try:
        scenario = FieldScenario(
            width=float(keys["width"]), height=float(keys["height"]),
            radius_r=float(keys["radius"]), nodes=tuple(nodes),
            rng_seed=int(keys["seed"]))
        noise_sigma = float(keys["noise_sigma"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc.args[0]!r}") from None
    return scenario, noise_sigma
