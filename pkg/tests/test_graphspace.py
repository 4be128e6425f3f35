"""Metric and measure primitives on weighted graph domains.

Distance oracles are recomputed in-test with a dense Floyd-Warshall pass so
the Dijkstra-based library code is checked against an independent algorithm.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from uniformizer.graphspace import (
    DomainFormatError,
    GraphSpace,
    band_of_distance,
    bands,
    boundary_distance,
    dump_domain,
    from_payload,
    load_domain,
    metric_ball,
    path_distance,
    shortest_route,
)


def cycle_space() -> GraphSpace:
    """4-cycle a-b-c-d with lengths 1, 2, 3, 4 and a single boundary vertex."""
    return GraphSpace(
        ids=["a", "b", "c", "d"],
        measures=[0.0, 1.0, 2.0, 0.5],
        boundary_flags=[True, False, False, False],
        edges=[("a", "b", 1.0), ("b", "c", 2.0), ("c", "d", 3.0), ("d", "a", 4.0)],
    )


def floyd_warshall(n: int, edges: list[tuple[int, int, float]]) -> np.ndarray:
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v, w in edges:
        dist[u, v] = min(dist[u, v], w)
        dist[v, u] = min(dist[v, u], w)
    for k in range(n):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    return dist


def random_connected(seed: int, n: int = 14) -> tuple[GraphSpace, list[tuple[int, int, float]]]:
    """Random spanning tree plus extra chords, lengths in [0.5, 2)."""
    rng = np.random.default_rng(seed)
    edges: list[tuple[int, int, float]] = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.append((u, v, float(rng.uniform(0.5, 2.0))))
    for _ in range(n):
        u, v = rng.integers(0, n, size=2)
        if u != v and not any({int(u), int(v)} == {a, b} for a, b, _ in edges):
            edges.append((int(u), int(v), float(rng.uniform(0.5, 2.0))))
    ids = [f"n{i}" for i in range(n)]
    space = GraphSpace(
        ids=ids,
        measures=[0.0] + [1.0] * (n - 1),
        boundary_flags=[True] + [False] * (n - 1),
        edges=[(ids[u], ids[v], w) for u, v, w in edges],
    )
    return space, edges


# ---------------------------------------------------------------------------
# distances


def test_cycle_distances_match_floyd_warshall():
    space = cycle_space()
    oracle = floyd_warshall(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (3, 0, 4.0)])
    for i, x in enumerate(space.ids):
        for j, y in enumerate(space.ids):
            assert path_distance(space, x, y) == pytest.approx(oracle[i, j], abs=1e-14)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_graph_distances_match_floyd_warshall(seed):
    space, edges = random_connected(seed)
    oracle = floyd_warshall(space.n_vertices, edges)
    for i in range(space.n_vertices):
        np.testing.assert_allclose(space.distances_from(i), oracle[i], atol=1e-12)


def test_multi_source_distances_are_pointwise_minima():
    space, edges = random_connected(3)
    oracle = floyd_warshall(space.n_vertices, edges)
    sources = [0, 5, 9]
    got = space.multi_source_distances(sources)
    np.testing.assert_allclose(got, oracle[sources].min(axis=0), atol=1e-12)


def test_distance_limit_truncates():
    space = cycle_space()
    d = space.distances_from(0, limit=1.5)
    assert d[1] == pytest.approx(1.0)
    assert not np.isfinite(d[2])


def test_shortest_route_reports_cost_and_consistent_path():
    space = cycle_space()
    cost, vpath, epath = shortest_route(space, [0], [2])
    assert cost == pytest.approx(3.0)
    assert vpath[0] == 0 and vpath[-1] == 2
    assert sum(space.edge_length[e] for e in epath) == pytest.approx(cost)
    # per-edge weights override lengths: make the long way round cheap
    w = np.array([10.0, 10.0, 1.0, 1.0])
    cost_w, vpath_w, _ = shortest_route(space, [0], [2], edge_weights=w)
    assert cost_w == pytest.approx(2.0)
    assert vpath_w == [0, 3, 2]


def test_shortest_route_unreachable_target_raises():
    space = cycle_space()
    with pytest.raises(ValueError):
        shortest_route(space, [0], [])


# ---------------------------------------------------------------------------
# boundary distance and bands


def test_boundary_distance_on_strip_rows(strip_small):
    space = strip_small.space
    # the boundary is the bottom row, so d equals the height coordinate
    for vid, xy in space.coords.items():
        assert boundary_distance(space, vid) == pytest.approx(xy[1], abs=1e-12)


def test_band_of_distance_half_open_convention():
    assert band_of_distance(0.3) == 0
    assert band_of_distance(1.0) == 0
    assert band_of_distance(1.5) == 1
    assert band_of_distance(2.0) == 1
    assert band_of_distance(2.0000001) == 2
    assert band_of_distance(4.0) == 2
    assert band_of_distance(100.0) == 7


def test_bands_partition_and_measures(strip_small):
    space = strip_small.space
    dec = bands(space)
    d = space.boundary_distance_array()
    interior = space.interior_mask
    assert dec.n_max == band_of_distance(float(d.max()))
    # band indices agree with the scalar helper on every interior vertex
    for i in np.flatnonzero(interior):
        assert dec.band_index[i] == band_of_distance(float(d[i]))
    # band measures add up to the total (boundary carries measure zero)
    assert sum(dec.band_measure.values()) == pytest.approx(space.total_measure())
    for n, m in dec.band_measure.items():
        sel = interior & (dec.band_index == n)
        assert m == pytest.approx(float(space.measure[sel].sum()))


def test_metric_ball_is_open_and_monotone():
    space = cycle_space()
    assert set(metric_ball(space, "a", 0.5)) == {"a"}
    # open convention: the vertex at distance exactly r stays outside
    assert set(metric_ball(space, "a", 1.0)) == {"a"}
    assert set(metric_ball(space, "a", 1.5)) == {"a", "b"}
    assert set(metric_ball(space, "a", 3.5)) == {"a", "b", "c"}
    assert set(metric_ball(space, "a", 4.5)) == {"a", "b", "c", "d"}


# ---------------------------------------------------------------------------
# construction and serialization


def test_empty_boundary_rejected():
    with pytest.raises(DomainFormatError, match="boundary"):
        GraphSpace(["x", "y"], [1.0, 1.0], [False, False], [("x", "y", 1.0)])


def test_boundary_measure_must_vanish():
    with pytest.raises(DomainFormatError):
        GraphSpace(["x", "y"], [1.0, 1.0], [True, False], [("x", "y", 1.0)])


def test_disconnected_graph_rejected():
    with pytest.raises(DomainFormatError, match="connect"):
        GraphSpace(
            ["x", "y", "z", "w"],
            [0.0, 1.0, 0.0, 1.0],
            [True, False, True, False],
            [("x", "y", 1.0), ("z", "w", 1.0)],
        )


def test_nonpositive_edge_length_rejected():
    with pytest.raises(DomainFormatError):
        GraphSpace(["x", "y"], [0.0, 1.0], [True, False], [("x", "y", -1.0)])


def test_edge_to_unknown_vertex_rejected():
    with pytest.raises(DomainFormatError, match="ghost"):
        GraphSpace(["x", "y"], [0.0, 1.0], [True, False], [("x", "ghost", 1.0)])


def test_duplicate_vertex_id_rejected():
    with pytest.raises(DomainFormatError, match="duplicate"):
        GraphSpace(
            ["x", "x", "y"], [0.0, 0.0, 1.0], [True, True, False],
            [("x", "y", 1.0)],
        )


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda p: p.pop("vertices"), "vertices"),
        (lambda p: p["vertices"][0].pop("measure"), "measure"),
        (lambda p: p["edges"][0].pop("length"), "length"),
        (lambda p: p["vertices"][0].update(boundary=1), "boolean"),
        (lambda p: p["edges"].append({"u": "a", "v": "nope", "length": 1.0}), "nope"),
    ],
)
def test_payload_diagnostics_name_the_offender(mutate, fragment):
    payload = cycle_space().to_payload()
    mutate(payload)
    with pytest.raises(DomainFormatError, match=fragment):
        from_payload(payload)


def test_json_round_trip(tmp_path):
    space = cycle_space()
    path = tmp_path / "cycle.json"
    dump_domain(space, str(path))
    back = load_domain(str(path))
    assert back.ids == space.ids
    np.testing.assert_array_equal(back.measure, space.measure)
    np.testing.assert_array_equal(back.boundary_mask, space.boundary_mask)
    np.testing.assert_array_equal(back.edge_length, space.edge_length)
    # a second dump is byte-identical (canonical serialization)
    path2 = tmp_path / "cycle2.json"
    dump_domain(back, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_payload_survives_json_text_round_trip(strip_small):
    space = strip_small.space
    text = json.dumps(space.to_payload())
    back = from_payload(json.loads(text))
    assert back.n_vertices == space.n_vertices
    assert back.n_edges == space.n_edges
    assert math.isclose(back.total_measure(), space.total_measure())
