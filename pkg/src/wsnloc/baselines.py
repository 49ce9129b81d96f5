"""Hop-count (DV-Hop style) baseline localizer.

Each anchor floods the network; every node rebroadcasts each anchor's
packet once and all its neighbors receive it. Minimal hop counts calibrate
a per-anchor average hop distance (true inter-anchor distance over hop
count), and every unknown scales its hop counts by its nearest anchor's
calibration before a linearized least-squares position solve.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .energy import STEP_TABLE, MessageTrace
from .field import FieldScenario, RangeGraph
from .nbp import LocalizationResult

__all__ = ["HopTable", "hop_flood", "multilaterate", "dvhop_localize"]


@dataclass
class HopTable:
    hops: dict            # (node id, anchor id) -> minimal hop count
    avg_hop_dist: dict    # anchor id -> meters per hop
    unreachable: tuple    # nodes no anchor flood reached


def hop_flood(scenario: FieldScenario, ranges: RangeGraph):
    """BFS flood from every anchor; returns (HopTable, MessageTrace)."""
    anchors = scenario.anchor_ids
    if len(anchors) < 2:
        raise ValueError("hop calibration needs at least 2 anchors")
    adj = ranges.neighbors_of
    trace = MessageTrace(range(scenario.n_nodes))
    recv_steps = STEP_TABLE["dvhop_flood_receive"]
    hops = {}
    for a in anchors:
        dist = {a: 0}
        queue = deque([a])
        while queue:
            v = queue.popleft()
            for u in adj(v):
                if u not in dist:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        for v, h in dist.items():
            hops[(v, a)] = h
            trace.add(v, 0, sent=1)  # one rebroadcast of this anchor's packet
            for u in adj(v):
                trace.add(u, 0, received=1, steps=recv_steps)
    pos = scenario.positions
    avg_hop_dist = {}
    for a in anchors:
        total_d = total_h = 0.0
        for b in anchors:
            if b != a and (b, a) in hops:
                total_d += float(np.linalg.norm(pos[a] - pos[b]))
                total_h += hops[(b, a)]
        if total_h > 0:
            avg_hop_dist[a] = total_d / total_h
    reached = {v for (v, _a) in hops}
    unreachable = tuple(t for t in range(scenario.n_nodes) if t not in reached)
    return HopTable(hops, avg_hop_dist, unreachable), trace


def multilaterate(anchor_positions, distances) -> np.ndarray:
    """Linearized least-squares position from >= 3 non-collinear anchors.

    Subtracting the last range equation from the others cancels the
    quadratic unknowns, leaving a 2-unknown linear system.
    """
    pts = np.asarray(anchor_positions, dtype=np.float64)
    d = np.asarray(distances, dtype=np.float64)
    if pts.shape[0] < 3:
        raise ValueError("multilateration needs at least 3 anchors")
    xk, yk = pts[-1]
    a_mat = 2.0 * (pts[:-1] - pts[-1])
    b_vec = (d[-1] ** 2 - d[:-1] ** 2
             + pts[:-1, 0] ** 2 + pts[:-1, 1] ** 2 - xk ** 2 - yk ** 2)
    if np.linalg.matrix_rank(a_mat, tol=1e-9 * max(1.0, np.abs(a_mat).max())) < 2:
        raise np.linalg.LinAlgError("anchors are collinear; position is not identifiable")
    solution, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)
    return solution


def dvhop_localize(scenario: FieldScenario, ranges: RangeGraph) -> LocalizationResult:
    """Hop-count localization of every unknown node.

    Unknowns that cannot see 3 usable anchors (or whose anchors are
    collinear) are flagged and placed at the field center so the network
    mean stays defined.
    """
    if len(scenario.anchor_ids) < 3:
        raise ValueError("hop-count localization needs at least 3 anchors")
    table, trace = hop_flood(scenario, ranges)
    pos = scenario.positions
    center = np.array([scenario.width / 2.0, scenario.height / 2.0])
    mlat_steps = STEP_TABLE["dvhop_multilateration"]
    estimates = {a: pos[a].copy() for a in scenario.anchor_ids}
    flagged = []
    for v in scenario.unknown_ids:
        known = [(a, table.hops[(v, a)]) for a in scenario.anchor_ids
                 if (v, a) in table.hops]
        if len(known) < 3:
            flagged.append(v)
            estimates[v] = center.copy()
            continue
        nearest = min(known, key=lambda ah: (ah[1], ah[0]))[0]
        per_hop = table.avg_hop_dist.get(nearest)
        if per_hop is None:
            flagged.append(v)
            estimates[v] = center.copy()
            continue
        # Farthest anchors first: the last equation is the linearization
        # pivot, and the nearest anchor carries the smallest hop-model error.
        known = sorted(known, key=lambda ah: (-ah[1], ah[0]))
        anchor_pts = [tuple(pos[a]) for a, _h in known]
        dists = [h * per_hop for _a, h in known]
        try:
            estimates[v] = multilaterate(anchor_pts, dists)
        except np.linalg.LinAlgError:
            flagged.append(v)
            estimates[v] = center.copy()
            continue
        trace.add(v, 0, steps=mlat_steps)
    per_node_error = {t: float(np.linalg.norm(estimates[t] - pos[t]))
                      for t in range(scenario.n_nodes)}
    history = []
    if scenario.unknown_ids:
        history = [float(np.mean([per_node_error[t] for t in scenario.unknown_ids]))]
    return LocalizationResult(estimates, per_node_error, 1, trace,
                              disconnected=tuple(flagged), mean_error_history=history)
