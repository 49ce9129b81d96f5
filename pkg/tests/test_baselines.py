import heapq
import math

import numpy as np
import pytest

from wsnloc.baselines import dvhop_localize, hop_flood, multilaterate
from wsnloc.field import (FieldScenario, MeasurementModel, NodeRecord,
                          build_scenario, measure_ranges, place_anchors_preset)
from wsnloc.nbp import mean_error


def line_scenario():
    """Anchors at x=0 and x=20, unknown at x=10; R=15 links only neighbors."""
    return FieldScenario(40, 40, 15, (
        NodeRecord(0, (10.0, 0.0)),
        NodeRecord(1, (0.0, 0.0), True),
        NodeRecord(2, (20.0, 0.0), True)))


def dijkstra_hops(adj, start, n):
    """Independent unit-weight shortest path oracle."""
    dist = {start: 0}
    heap = [(0, start)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist.get(v, math.inf):
            continue
        for u in adj(v):
            if d + 1 < dist.get(u, math.inf):
                dist[u] = d + 1
                heapq.heappush(heap, (d + 1, u))
    return dist


class TestHopFlood:
    def test_collinear_hand_trace(self):
        s = line_scenario()
        rg = measure_ranges(s, MeasurementModel(noise_sigma=0.0), 0)
        table, _trace = hop_flood(s, rg)
        assert table.hops[(0, 1)] == 1 and table.hops[(0, 2)] == 1
        assert table.hops[(2, 1)] == 2  # anchors reach each other through the middle
        # classic correction: true distance 20 over 2 hops
        assert table.avg_hop_dist[1] == pytest.approx(10.0)
        assert table.avg_hop_dist[2] == pytest.approx(10.0)

    def test_anchor_to_itself_zero(self):
        s = line_scenario()
        rg = measure_ranges(s, MeasurementModel(noise_sigma=0.0), 0)
        table, _ = hop_flood(s, rg)
        assert table.hops[(1, 1)] == 0
        assert table.hops[(2, 2)] == 0

    def test_disconnected_component_flagged(self):
        s = FieldScenario(100, 100, 10, (
            NodeRecord(0, (0.0, 0.0), True),
            NodeRecord(1, (8.0, 0.0), True),
            NodeRecord(2, (90.0, 90.0)),  # unreachable island
        ))
        rg = measure_ranges(s, MeasurementModel(noise_sigma=0.0), 0)
        table, _ = hop_flood(s, rg)
        assert table.unreachable == (2,)
        assert (2, 0) not in table.hops

    def test_bfs_matches_dijkstra(self):
        s = build_scenario(100, 100, 20, 40,
                           place_anchors_preset("edge", 4, 100, 100), seed=17)
        rg = measure_ranges(s, MeasurementModel(), seed=17)
        table, _ = hop_flood(s, rg)
        for a in s.anchor_ids:
            want = dijkstra_hops(rg.neighbors_of, a, s.n_nodes)
            got = {v: h for (v, aa), h in table.hops.items() if aa == a}
            assert got == want

    def test_flood_message_count(self):
        # each reachable node rebroadcasts once per anchor flood
        s = build_scenario(100, 100, 20, 30,
                           place_anchors_preset("edge", 5, 100, 100), seed=4)
        rg = measure_ranges(s, MeasurementModel(), seed=4)
        table, trace = hop_flood(s, rg)
        reach = {a: sum(1 for (v, aa) in table.hops if aa == a)
                 for a in s.anchor_ids}
        assert trace.total_sent() == sum(reach.values())
        # every send is heard by each of the sender's neighbors
        expected_recv = sum(len(rg.neighbors_of(v))
                            for (v, _a) in table.hops)
        assert trace.total_received() == expected_recv

    def test_needs_two_anchors(self):
        s = FieldScenario(10, 10, 5, (NodeRecord(0, (0.0, 0.0), True),
                                      NodeRecord(1, (3.0, 0.0))))
        rg = measure_ranges(s, MeasurementModel(noise_sigma=0.0), 0)
        with pytest.raises(ValueError):
            hop_flood(s, rg)


class TestMultilaterate:
    def test_exact_recovery(self):
        anchors = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]
        truth = np.array([3.0, 4.0])
        dists = [float(np.linalg.norm(truth - a)) for a in anchors]
        got = multilaterate(anchors, dists)
        assert np.linalg.norm(got - truth) < 1e-6

    def test_centroid_of_equilateral(self):
        anchors = [(0.0, 0.0), (10.0, 0.0), (5.0, 5.0 * math.sqrt(3))]
        centroid = np.mean(np.asarray(anchors), axis=0)
        d = [float(np.linalg.norm(centroid - a)) for a in anchors]
        got = multilaterate(anchors, d)
        assert np.linalg.norm(got - centroid) < 1e-9

    def test_collinear_rejected(self):
        with pytest.raises(np.linalg.LinAlgError):
            multilaterate([(0.0, 0.0), (5.0, 0.0), (10.0, 0.0)], [1.0, 2.0, 3.0])

    def test_too_few_anchors(self):
        with pytest.raises(ValueError):
            multilaterate([(0.0, 0.0), (5.0, 0.0)], [1.0, 2.0])


class TestDvhopLocalize:
    def test_line_with_offline_anchor(self):
        # third anchor breaks collinearity; equal per-hop estimates put the
        # middle node at the circumcenter (10, 11/6) of the anchor triangle
        s = FieldScenario(40, 40, 15, (
            NodeRecord(0, (10.0, 0.0)),
            NodeRecord(1, (0.0, 0.0), True),
            NodeRecord(2, (20.0, 0.0), True),
            NodeRecord(3, (10.0, 12.0), True)))
        rg = measure_ranges(s, MeasurementModel(noise_sigma=0.0), 0)
        res = dvhop_localize(s, rg)
        assert np.linalg.norm(res.estimates[0] - [10.0, 11.0 / 6.0]) < 1e-6
        assert res.per_node_error[0] < 2.0

    def test_symmetric_center(self):
        # unknown one hop from three symmetric anchors lands at the center
        r = 10.0
        anchors = [(50.0 + r * math.cos(a), 50.0 + r * math.sin(a))
                   for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
        nodes = [NodeRecord(0, (50.0, 50.0))]
        nodes += [NodeRecord(i + 1, p, True) for i, p in enumerate(anchors)]
        s = FieldScenario(100, 100, 15, tuple(nodes))
        rg = measure_ranges(s, MeasurementModel(noise_sigma=0.0), 0)
        res = dvhop_localize(s, rg)
        assert np.linalg.norm(res.estimates[0] - [50.0, 50.0]) < 1e-6

    def test_starved_node_flagged_at_center(self):
        # island node cannot see any anchors: flagged, placed at field center
        s = FieldScenario(100, 100, 12, (
            NodeRecord(0, (5.0, 5.0)),
            NodeRecord(1, (90.0, 90.0)),
            NodeRecord(2, (0.0, 0.0), True),
            NodeRecord(3, (10.0, 0.0), True),
            NodeRecord(4, (0.0, 10.0), True)))
        rg = measure_ranges(s, MeasurementModel(noise_sigma=0.0), 0)
        res = dvhop_localize(s, rg)
        assert 1 in res.disconnected
        assert np.allclose(res.estimates[1], [50.0, 50.0])
        assert 0 not in res.disconnected

    def test_needs_three_anchors(self):
        s = line_scenario()
        rg = measure_ranges(s, MeasurementModel(noise_sigma=0.0), 0)
        with pytest.raises(ValueError):
            dvhop_localize(s, rg)

    def test_mean_error_defined(self):
        s = build_scenario(100, 100, 20, 30,
                           place_anchors_preset("edge", 5, 100, 100), seed=8)
        rg = measure_ranges(s, MeasurementModel(), seed=8)
        res = dvhop_localize(s, rg)
        assert mean_error(res, s) > 0
        assert len(res.per_node_error) == s.n_nodes
