"""Finite weighted graphs with a marked boundary, treated as metric measure spaces.

A domain is a connected graph whose edges carry positive lengths and whose
vertices carry a measure that vanishes exactly on a nonempty set of boundary
vertices.  Path distance (sum of edge lengths along a path) makes it a length
space; the vertex measure makes it a measure space.  Everything downstream
(dampened metrics, energies, capacities) is built on three primitives defined
here: point-to-point distance, distance to the boundary, and metric balls.

Distance to the boundary induces the dyadic band decomposition used to grade
the far field: band 0 is ``{d <= 1}`` and band ``n >= 1`` is
``{2^(n-1) < d <= 2^n}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph


class DomainFormatError(ValueError):
    """Malformed domain data: violates the schema or a structural invariant."""


_DIST_CACHE_MAX = 32


@dataclass
class BandDecomposition:
    """Dyadic grading of a space by distance to the boundary.

    band_index[i] is the band of vertex i (boundary vertices sit in band 0,
    their distance being zero).  band_measure maps band -> total vertex
    measure in it; bands with no vertices are absent.
    """

    band_index: np.ndarray
    band_measure: dict[int, float]
    n_max: int

    def measure(self, n: int) -> float:
        return self.band_measure.get(n, 0.0)


def band_of_distance(d: float) -> int:
    """Band index of a boundary distance: 0 for d <= 1, else ceil(log2 d).

    A small downward shift before the ceiling keeps values that are powers of
    two (up to float drift) in the lower band, matching the half-open
    convention (2^(n-1), 2^n].
    """
    if d <= 1.0:
        return 0
    return max(1, math.ceil(math.log2(d) - 1e-12))


class GraphSpace:
    """Immutable weighted graph domain.

    Vertices and edges keep their construction order throughout; all arrays
    are aligned with that order, which is what makes serialized output
    byte-stable.  ``infinity_id`` marks the single added point used by
    dampened (transformed) spaces; it is exempt from the measure-positivity
    rule but from nothing else.
    """

    def __init__(
        self,
        ids: Sequence[str],
        measures: Sequence[float],
        boundary_flags: Sequence[bool],
        edges: Sequence[tuple[str, str, float]],
        coords: dict[str, tuple[float, ...]] | None = None,
        infinity_id: str | None = None,
    ):
        self.ids: list[str] = list(ids)
        self.index: dict[str, int] = {vid: i for i, vid in enumerate(self.ids)}
        if len(self.index) != len(self.ids):
            seen: set[str] = set()
            for k, vid in enumerate(self.ids):
                if vid in seen:
                    raise DomainFormatError(f"vertices[{k}]: duplicate id {vid!r}")
                seen.add(vid)
        n = len(self.ids)
        if n == 0:
            raise DomainFormatError("vertices: empty vertex list")
        self.measure = np.asarray(measures, dtype=float)
        self.boundary_mask = np.asarray(boundary_flags, dtype=bool)
        if self.measure.shape != (n,) or self.boundary_mask.shape != (n,):
            raise DomainFormatError("vertices: measure/boundary arrays misaligned")
        self.infinity_id = infinity_id
        self.infinity_index = self.index[infinity_id] if infinity_id is not None else -1

        eu = np.empty(len(edges), dtype=np.int64)
        ev = np.empty(len(edges), dtype=np.int64)
        el = np.empty(len(edges), dtype=float)
        pair_seen: set[tuple[int, int]] = set()
        for k, (u, v, length) in enumerate(edges):
            iu = self.index.get(u)
            iv = self.index.get(v)
            if iu is None or iv is None:
                raise DomainFormatError(f"edges[{k}]: unknown endpoint {u!r} or {v!r}")
            if iu == iv:
                raise DomainFormatError(f"edges[{k}]: self loop at {u!r}")
            key = (min(iu, iv), max(iu, iv))
            if key in pair_seen:
                raise DomainFormatError(f"edges[{k}]: duplicate edge {u!r}-{v!r}")
            pair_seen.add(key)
            if not (length > 0.0 and math.isfinite(length)):
                raise DomainFormatError(f"edges[{k}]: length must be positive and finite")
            eu[k], ev[k], el[k] = iu, iv, length
        self.edge_u = eu
        self.edge_v = ev
        self.edge_length = el
        self._finish_init(coords)

    @classmethod
    def from_arrays(
        cls,
        ids: Sequence[str],
        measures: np.ndarray,
        boundary_flags: np.ndarray,
        edge_u: np.ndarray,
        edge_v: np.ndarray,
        edge_length: np.ndarray,
        coords: dict[str, tuple[float, ...]] | None = None,
        infinity_id: str | None = None,
    ) -> "GraphSpace":
        """Array fast path for graphs derived from an already-validated one.

        Endpoint indices must refer to `ids`; pair uniqueness is trusted, the
        cheap vector checks (positive finite lengths, no self loops) still run.
        """
        obj = cls.__new__(cls)
        obj.ids = list(ids)
        obj.index = {vid: i for i, vid in enumerate(obj.ids)}
        if len(obj.index) != len(obj.ids):
            raise DomainFormatError("vertices: duplicate ids")
        if not obj.ids:
            raise DomainFormatError("vertices: empty vertex list")
        obj.measure = np.ascontiguousarray(measures, dtype=float)
        obj.boundary_mask = np.ascontiguousarray(boundary_flags, dtype=bool)
        if obj.measure.shape != (len(obj.ids),) or obj.boundary_mask.shape != (len(obj.ids),):
            raise DomainFormatError("vertices: measure/boundary arrays misaligned")
        obj.infinity_id = infinity_id
        obj.infinity_index = obj.index[infinity_id] if infinity_id is not None else -1
        obj.edge_u = np.ascontiguousarray(edge_u, dtype=np.int64)
        obj.edge_v = np.ascontiguousarray(edge_v, dtype=np.int64)
        obj.edge_length = np.ascontiguousarray(edge_length, dtype=float)
        if (obj.edge_u == obj.edge_v).any():
            raise DomainFormatError("edges: self loop")
        if not (np.isfinite(obj.edge_length).all() and (obj.edge_length > 0).all()):
            raise DomainFormatError("edges: lengths must be positive and finite")
        obj._finish_init(coords)
        return obj

    def _finish_init(self, coords: dict[str, tuple[float, ...]] | None) -> None:
        self._validate_measures()
        self.coords = coords
        self._adjacency = None
        self._adj_indptr = None
        self._adj_nbr = None
        self._adj_edge = None
        self._dist_cache = {}
        self._boundary_distance = None
        self._bands = None
        self._check_connected()

    # -- construction checks ------------------------------------------------

    def _validate_measures(self) -> None:
        if not self.boundary_mask.any():
            raise DomainFormatError("vertices: boundary set is empty")
        bad_value = ~np.isfinite(self.measure) | (self.measure < 0)
        bad_boundary = self.boundary_mask & (self.measure != 0.0)
        bad_interior = ~self.boundary_mask & (self.measure == 0.0)
        if self.infinity_index >= 0:
            bad_interior[self.infinity_index] = False
        for mask, msg in (
            (bad_value, "measure must be finite and >= 0"),
            (bad_boundary, "boundary vertex must have zero measure"),
            (bad_interior, "interior vertex must have positive measure"),
        ):
            if mask.any():
                i = int(np.nonzero(mask)[0][0])
                raise DomainFormatError(f"vertices[{i}] ({self.ids[i]!r}): {msg}")
        if not (~self.boundary_mask).any():
            raise DomainFormatError("vertices: no interior vertices")
        if self.infinity_index >= 0 and self.boundary_mask[self.infinity_index]:
            raise DomainFormatError("infinity vertex cannot be a boundary vertex")

    def _check_connected(self) -> None:
        ncomp, _ = csgraph.connected_components(self.adjacency(), directed=False)
        if ncomp != 1:
            raise DomainFormatError(f"graph is disconnected ({ncomp} components)")

    # -- basic accessors ----------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_length)

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def boundary_indices(self) -> np.ndarray:
        return np.nonzero(self.boundary_mask)[0]

    def total_measure(self) -> float:
        return float(self.measure.sum())

    def adjacency(self) -> sp.csr_matrix:
        if self._adjacency is None:
            n = self.n_vertices
            rows = np.concatenate([self.edge_u, self.edge_v])
            cols = np.concatenate([self.edge_v, self.edge_u])
            vals = np.concatenate([self.edge_length, self.edge_length])
            self._adjacency = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        return self._adjacency

    def _adjacency_lists(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR-style incidence: for vertex i, neighbors/edge ids in slice indptr[i]:indptr[i+1]."""
        if self._adj_indptr is None:
            n = self.n_vertices
            ks = np.arange(self.n_edges, dtype=np.int64)
            rows = np.concatenate([self.edge_u, self.edge_v])
            nbrs = np.concatenate([self.edge_v, self.edge_u])
            eids = np.concatenate([ks, ks])
            order = np.argsort(rows, kind="stable")
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
            self._adj_indptr = indptr
            self._adj_nbr = nbrs[order]
            self._adj_edge = eids[order]
        return self._adj_indptr, self._adj_nbr, self._adj_edge

    # -- metric primitives --------------------------------------------------

    def distances_from(self, source: str | int, limit: float | None = None) -> np.ndarray:
        """Single-source path distances to every vertex (inf when unreached/over limit)."""
        idx = source if isinstance(source, (int, np.integer)) else self.index[source]
        key = (int(idx), limit)
        hit = self._dist_cache.get(key)
        if hit is not None:
            return hit
        dist = csgraph.dijkstra(
            self.adjacency(),
            directed=False,
            indices=int(idx),
            limit=np.inf if limit is None else float(limit),
        )
        if len(self._dist_cache) >= _DIST_CACHE_MAX:
            self._dist_cache.pop(next(iter(self._dist_cache)))
        self._dist_cache[key] = dist
        return dist

    def multi_source_distances(self, sources: Iterable[int], limit: float | None = None) -> np.ndarray:
        """Distance to the nearest of several source vertices, for every vertex."""
        idx = np.asarray(sorted(int(s) for s in sources), dtype=np.int64)
        if idx.size == 0:
            raise ValueError("multi_source_distances: empty source set")
        return csgraph.dijkstra(
            self.adjacency(),
            directed=False,
            indices=idx,
            min_only=True,
            limit=np.inf if limit is None else float(limit),
        )

    def boundary_distance_array(self) -> np.ndarray:
        if self._boundary_distance is None:
            self._boundary_distance = self.multi_source_distances(self.boundary_indices())
        return self._boundary_distance

    def bands(self) -> BandDecomposition:
        if self._bands is None:
            d = self.boundary_distance_array()
            if not np.isfinite(d).all():
                raise DomainFormatError("bands: some vertex cannot reach the boundary")
            idx = np.zeros(self.n_vertices, dtype=np.int64)
            far = d > 1.0
            if far.any():
                idx[far] = np.maximum(
                    1, np.ceil(np.log2(d[far]) - 1e-12).astype(np.int64)
                )
            totals = np.bincount(idx, weights=self.measure)
            meas = {int(b): float(totals[b]) for b in range(len(totals)) if totals[b] > 0 or (idx == b).any()}
            self._bands = BandDecomposition(
                band_index=idx, band_measure=meas, n_max=int(idx.max())
            )
        return self._bands

    def ball_indices(self, center: str | int, r: float) -> np.ndarray:
        """Open metric ball: indices of vertices with distance < r from center."""
        dist = self.distances_from(center, limit=r * 1.0000001 if np.isfinite(r) else None)
        return np.nonzero(dist < r)[0]

    # -- serialization ------------------------------------------------------

    def to_payload(self) -> dict:
        """Plain-dict form matching the on-disk schema (construction order kept)."""
        verts = []
        for i, vid in enumerate(self.ids):
            if i == self.infinity_index:
                continue
            entry: dict = {
                "id": vid,
                "measure": float(self.measure[i]),
                "boundary": bool(self.boundary_mask[i]),
            }
            if self.coords is not None and vid in self.coords:
                entry["coords"] = [float(c) for c in self.coords[vid]]
            verts.append(entry)
        edges = []
        inf_edges = []
        for k in range(self.n_edges):
            iu, iv = int(self.edge_u[k]), int(self.edge_v[k])
            rec = {
                "u": self.ids[iu],
                "v": self.ids[iv],
                "length": float(self.edge_length[k]),
            }
            if self.infinity_index in (iu, iv):
                other = iv if iu == self.infinity_index else iu
                inf_edges.append({"v": self.ids[other], "length": float(self.edge_length[k])})
            else:
                edges.append(rec)
        payload: dict = {"vertices": verts, "edges": edges}
        if self.infinity_index >= 0:
            payload["infinity"] = {"id": self.infinity_id, "edges": inf_edges}
        return payload


# -- spec-facing operation wrappers ----------------------------------------


def path_distance(space: GraphSpace, x: str, y: str) -> float:
    """Length of the shortest edge path between two vertices."""
    if x not in space.index or y not in space.index:
        raise KeyError(f"unknown vertex {x!r} or {y!r}")
    return float(space.distances_from(x)[space.index[y]])


def boundary_distance(space: GraphSpace, x: str) -> float:
    """Shortest path distance from x to the boundary vertex set."""
    return float(space.boundary_distance_array()[space.index[x]])


def bands(space: GraphSpace) -> BandDecomposition:
    return space.bands()


def metric_ball(space: GraphSpace, center: str, r: float) -> list[str]:
    """Ids of vertices at distance < r from center (open ball)."""
    return [space.ids[i] for i in space.ball_indices(center, r)]


# -- deterministic route extraction -----------------------------------------


def shortest_route(
    space: GraphSpace,
    sources: Sequence[int],
    targets: Sequence[int],
    edge_weights: np.ndarray | None = None,
) -> tuple[float, list[int], list[int]]:
    """Cheapest path from a source set to a target set under per-edge weights.

    Weights default to edge lengths and may be zero (Dijkstra still applies).
    Ties are broken toward smaller vertex ids at every heap pop and every
    equal-cost relaxation, so the returned route is deterministic.

    Returns (cost, vertex index path, edge index path); raises ValueError when
    no target is reachable.
    """
    w = space.edge_length if edge_weights is None else np.asarray(edge_weights, dtype=float)
    if (w < 0).any():
        raise ValueError("shortest_route: negative edge weights")
    indptr, nbr, eid = space._adjacency_lists()
    n = space.n_vertices
    dist = np.full(n, np.inf)
    pred_v = np.full(n, -1, dtype=np.int64)
    pred_e = np.full(n, -1, dtype=np.int64)
    target_set = set(int(t) for t in targets)
    if not target_set:
        raise ValueError("shortest_route: empty target set")
    heap: list[tuple[float, str, int]] = []
    for s in sorted(set(int(s) for s in sources)):
        dist[s] = 0.0
        heappush(heap, (0.0, space.ids[s], s))
    done = np.zeros(n, dtype=bool)
    reached = -1
    while heap:
        d, _, u = heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u in target_set:
            reached = u
            break
        for j in range(indptr[u], indptr[u + 1]):
            v = int(nbr[j])
            if done[v]:
                continue
            nd = d + w[eid[j]]
            if nd < dist[v] or (
                nd == dist[v] and pred_v[v] >= 0 and space.ids[u] < space.ids[pred_v[v]]
            ):
                dist[v] = nd
                pred_v[v] = u
                pred_e[v] = eid[j]
                heappush(heap, (nd, space.ids[v], v))
    if reached < 0:
        raise ValueError("shortest_route: targets unreachable from sources")
    vpath = [reached]
    epath: list[int] = []
    cur = reached
    while pred_v[cur] >= 0:
        epath.append(int(pred_e[cur]))
        cur = int(pred_v[cur])
        vpath.append(cur)
    vpath.reverse()
    epath.reverse()
    return float(dist[reached]), vpath, epath


# -- JSON domain files -------------------------------------------------------


def _require(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise DomainFormatError(f"{where}: {msg}")


def from_payload(payload: dict) -> GraphSpace:
    """Build a space from the plain-dict schema, with entry-level diagnostics."""
    _require(isinstance(payload, dict), "domain", "top level must be an object")
    _require("vertices" in payload, "domain", "missing 'vertices'")
    _require("edges" in payload, "domain", "missing 'edges'")
    vlist = payload["vertices"]
    elist = payload["edges"]
    _require(isinstance(vlist, list), "vertices", "must be a list")
    _require(isinstance(elist, list), "edges", "must be a list")
    ids: list[str] = []
    measures: list[float] = []
    flags: list[bool] = []
    coords: dict[str, tuple[float, ...]] = {}
    for k, entry in enumerate(vlist):
        where = f"vertices[{k}]"
        _require(isinstance(entry, dict), where, "must be an object")
        _require("id" in entry, where, "missing 'id'")
        _require("measure" in entry, where, "missing 'measure'")
        _require("boundary" in entry, where, "missing 'boundary'")
        vid = entry["id"]
        _require(isinstance(vid, str) and vid != "", where, "'id' must be a nonempty string")
        _require(isinstance(entry["measure"], (int, float)), where, "'measure' must be a number")
        _require(isinstance(entry["boundary"], bool), where, "'boundary' must be a boolean")
        ids.append(vid)
        measures.append(float(entry["measure"]))
        flags.append(bool(entry["boundary"]))
        if "coords" in entry:
            c = entry["coords"]
            _require(
                isinstance(c, list) and all(isinstance(x, (int, float)) for x in c),
                where,
                "'coords' must be a list of numbers",
            )
            coords[vid] = tuple(float(x) for x in c)
    edges: list[tuple[str, str, float]] = []
    for k, entry in enumerate(elist):
        where = f"edges[{k}]"
        _require(isinstance(entry, dict), where, "must be an object")
        for key in ("u", "v", "length"):
            _require(key in entry, where, f"missing '{key}'")
        _require(isinstance(entry["length"], (int, float)), where, "'length' must be a number")
        edges.append((entry["u"], entry["v"], float(entry["length"])))
    infinity_id = None
    if "infinity" in payload:
        inf = payload["infinity"]
        _require(isinstance(inf, dict), "infinity", "must be an object")
        _require("id" in inf and isinstance(inf["id"], str), "infinity", "missing string 'id'")
        _require("edges" in inf and isinstance(inf["edges"], list), "infinity", "missing 'edges' list")
        infinity_id = inf["id"]
        _require(infinity_id not in set(ids), "infinity", f"id {infinity_id!r} collides with a vertex")
        ids.append(infinity_id)
        measures.append(0.0)
        flags.append(False)
        for k, entry in enumerate(inf["edges"]):
            where = f"infinity.edges[{k}]"
            _require(isinstance(entry, dict), where, "must be an object")
            _require("v" in entry and "length" in entry, where, "needs 'v' and 'length'")
            edges.append((infinity_id, entry["v"], float(entry["length"])))
    return GraphSpace(
        ids, measures, flags, edges, coords=coords or None, infinity_id=infinity_id
    )


def load_domain(path: str) -> GraphSpace:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DomainFormatError(f"{path}: invalid JSON ({exc})") from exc
    return from_payload(payload)


def dump_domain(space: GraphSpace, path: str) -> None:
    from .util import atomic_write_text, canonical_json

    atomic_write_text(path, canonical_json(space.to_payload()))
