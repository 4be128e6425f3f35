"""Dampened (bounded) realizations of unbounded graph domains.

Scaling each edge length by the dampening weight of its representative
boundary distance, and each vertex measure by that weight to the power p,
turns a domain with an unbounded far field into one of finite diameter:

* edge length:   ``l_phi(e) = l(e) * phi(dbar_e)``, with the representative
  ``dbar_e`` the midpoint of the endpoint boundary distances,
* vertex measure: ``mu_phi(v) = mu(v) * phi(d(v))^p``,
* edge mass:      ``m_phi(e) = m(e) * phi(dbar_e)^p``.

Using the same representative ``dbar_e`` for the metric and the mass makes the
gradient chain rule and the p-energy identity exact to rounding, not just
comparable: ``g_phi(e) * phi(dbar_e) = g(e)`` and
``sum m_phi g_phi^p = sum m g^p`` term by term.

The far end is then compactified by one extra vertex joined to every vertex of
the outermost distance band, the joining edge carrying the integral of phi
over the remaining distance range -- the length a radial ray to infinity would
have in the dampened metric.

This module also hosts codimension-theta boundary measures: a weight on
boundary vertices calibrated so that a boundary ball of radius r carries about
``mu(ball)/r^theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np

from .dampening import Dampening, edge_weight, tail_integral_many
from .graphspace import DomainFormatError, GraphSpace


class TransformError(ValueError):
    """Transform preconditions violated (unbounded boundary, re-attachment, ...)."""


DEFAULT_BOUNDARY_DIAMETER_BOUND = 64.0
INFINITY_ID = "infinity"


@dataclass
class TransformedSpace:
    """A domain together with its dampened metric/measure realization.

    ``graph`` carries the dampened lengths and measures (plus the infinity
    vertex once attached) and is a full GraphSpace, so every metric primitive
    works on it directly.  Base vertices keep their indices in ``graph``;
    the infinity vertex, when present, is the last one.

    ``edge_masses`` aligns with ``graph``'s edge order: base-derived edges
    first (mass ``m(e) * phi(dbar_e)^p``), then edges incident to infinity
    (length-share mass computed in the dampened graph, as they have no base
    counterpart).
    """

    base: GraphSpace
    phi: Dampening
    p: float
    graph: GraphSpace
    edge_rep_dist: np.ndarray
    edge_masses: np.ndarray
    infinity_attached: bool = False

    @property
    def infinity_id(self) -> str | None:
        return self.graph.infinity_id

    def n_base_edges(self) -> int:
        return self.base.n_edges

    def distance_to_infinity(self) -> np.ndarray:
        """Dampened distance from every vertex to the infinity vertex."""
        if not self.infinity_attached:
            raise TransformError("infinity not attached")
        return self.graph.distances_from(self.graph.infinity_index)


def _approx_boundary_diameter(space: GraphSpace) -> float:
    """Double-sweep lower bound on the boundary set diameter (guard only)."""
    bidx = space.boundary_indices()
    d0 = space.distances_from(int(bidx[0]))
    far = int(bidx[np.argmax(d0[bidx])])
    d1 = space.distances_from(far)
    return float(np.max(d1[bidx]))


def transform(
    space: GraphSpace,
    phi: Dampening,
    p: float,
    max_boundary_diameter: float = DEFAULT_BOUNDARY_DIAMETER_BOUND,
) -> TransformedSpace:
    """Dampened realization of a domain (without the point at infinity)."""
    if p < 1:
        raise TransformError("transform: p must be >= 1")
    if space.infinity_id is not None:
        raise TransformError("transform: space already carries an infinity vertex")
    diam = _approx_boundary_diameter(space)
    if diam > max_boundary_diameter:
        raise TransformError(
            f"transform: boundary diameter ~{diam:g} exceeds bound {max_boundary_diameter:g}; "
            "only bounded boundaries are supported"
        )
    from .energy import edge_mass

    d = space.boundary_distance_array()
    rep = 0.5 * (d[space.edge_u] + d[space.edge_v])
    w_edge = edge_weight(phi, rep)
    w_vertex = edge_weight(phi, d)
    lengths_phi = space.edge_length * w_edge
    measures_phi = space.measure * w_vertex**p
    masses_phi = edge_mass(space) * w_edge**p

    graph = GraphSpace.from_arrays(
        list(space.ids),
        measures_phi,
        space.boundary_mask,
        space.edge_u,
        space.edge_v,
        lengths_phi,
        coords=space.coords,
        infinity_id=None,
    )
    return TransformedSpace(
        base=space,
        phi=phi,
        p=float(p),
        graph=graph,
        edge_rep_dist=rep,
        edge_masses=masses_phi,
        infinity_attached=False,
    )


def attach_infinity(ts: TransformedSpace, infinity_id: str = INFINITY_ID) -> TransformedSpace:
    """Add the point at infinity, joined to the outermost distance band.

    Each outer-band vertex v gets an edge of length ``integral of phi over
    (d(v), infinity)`` -- the dampened length of the remaining radial ray.
    Returns a new TransformedSpace; the input is left untouched.
    """
    if ts.infinity_attached:
        raise TransformError("attach_infinity: already attached")
    if infinity_id in ts.base.index:
        raise TransformError(f"attach_infinity: id {infinity_id!r} collides with a vertex")
    space = ts.base
    bands = space.bands()
    outer = np.nonzero((bands.band_index == bands.n_max) & space.interior_mask)[0]
    if outer.size == 0:
        raise TransformError("attach_infinity: outermost band has no interior vertices")
    d = space.boundary_distance_array()
    tail = tail_integral_many(ts.phi, d[outer])

    ids = list(space.ids) + [infinity_id]
    inf_index = len(space.ids)
    measures = np.append(ts.graph.measure, 0.0)
    flags = np.append(space.boundary_mask, False)
    edge_u = np.concatenate([space.edge_u, np.full(outer.size, inf_index, dtype=np.int64)])
    edge_v = np.concatenate([space.edge_v, outer.astype(np.int64)])
    edge_length = np.concatenate([ts.graph.edge_length, tail])
    graph = GraphSpace.from_arrays(
        ids, measures, flags, edge_u, edge_v, edge_length,
        coords=space.coords, infinity_id=infinity_id,
    )

    # length-share masses for the new edges, computed in the dampened graph
    # (they have no base counterpart); S sums all incident dampened lengths
    S = np.zeros(graph.n_vertices)
    np.add.at(S, graph.edge_u, graph.edge_length)
    np.add.at(S, graph.edge_v, graph.edge_length)
    inf_masses = tail * graph.measure[outer] / S[outer]
    return TransformedSpace(
        base=space,
        phi=ts.phi,
        p=ts.p,
        graph=graph,
        edge_rep_dist=ts.edge_rep_dist,
        edge_masses=np.concatenate([ts.edge_masses, inf_masses]),
        infinity_attached=True,
    )


# -- boundary measures -------------------------------------------------------


@dataclass
class BoundaryMeasure:
    """Codimension-theta weight on boundary vertices (positive everywhere)."""

    theta: float
    mesh_scale: float
    nu: dict[str, float]

    def total(self) -> float:
        return float(sum(self.nu.values()))

    def array(self, space: GraphSpace) -> np.ndarray:
        """Dense vector over the space's vertices (zero off the boundary)."""
        out = np.zeros(space.n_vertices)
        for vid, val in self.nu.items():
            out[space.index[vid]] = val
        return out

    def to_payload(self) -> dict:
        return {
            "theta": float(self.theta),
            "mesh_scale": float(self.mesh_scale),
            "nu": {k: float(v) for k, v in self.nu.items()},
        }

    @staticmethod
    def from_payload(payload: dict) -> "BoundaryMeasure":
        for key in ("theta", "mesh_scale", "nu"):
            if key not in payload:
                raise DomainFormatError(f"boundary measure: missing {key!r}")
        nu = {str(k): float(v) for k, v in payload["nu"].items()}
        if not nu or any(v <= 0 for v in nu.values()):
            raise DomainFormatError("boundary measure: weights must be positive")
        return BoundaryMeasure(
            theta=float(payload["theta"]),
            mesh_scale=float(payload["mesh_scale"]),
            nu=nu,
        )


def local_distances(
    space: GraphSpace, center: int, rmax: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact distances from one vertex to everything within rmax (inclusive).

    Small-neighborhood Dijkstra over adjacency lists; cheap when rmax covers a
    few mesh cells, which is the regime for boundary-ball sweeps.
    """
    indptr, nbr, eid = space._adjacency_lists()
    lengths = space.edge_length
    dist: dict[int, float] = {center: 0.0}
    done: set[int] = set()
    heap: list[tuple[float, int]] = [(0.0, center)]
    while heap:
        dcur, u = heappop(heap)
        if u in done:
            continue
        done.add(u)
        for j in range(indptr[u], indptr[u + 1]):
            v = int(nbr[j])
            if v in done:
                continue
            nd = dcur + lengths[eid[j]]
            if nd <= rmax and nd < dist.get(v, math.inf):
                dist[v] = nd
                heappush(heap, (nd, v))
    idx = np.fromiter(dist.keys(), dtype=np.int64, count=len(dist))
    vals = np.fromiter(dist.values(), dtype=float, count=len(dist))
    order = np.argsort(idx)
    return idx[order], vals[order]


def codimensional_measure(space: GraphSpace, theta: float, h: float) -> BoundaryMeasure:
    """Boundary weight from interior mass at the mesh scale.

    Raw weight at a boundary vertex is the interior measure within distance h
    (inclusive: the open ball at the exact mesh scale is empty) divided by
    h^theta; weights are then globally scaled so their total equals the
    measure of band 0.  On a straight grid boundary with theta = 1 this is an
    arc-length weight proportional to h.
    """
    if not (theta > 0 and h > 0):
        raise TransformError("codimensional_measure: theta and h must be positive")
    bidx = space.boundary_indices()
    raw = np.empty(len(bidx))
    interior = space.interior_mask
    for j, b in enumerate(bidx):
        idx, _ = local_distances(space, int(b), h * (1 + 1e-9))
        keep = idx[interior[idx]]
        raw[j] = space.measure[keep].sum() / h**theta
    total_raw = raw.sum()
    if total_raw <= 0:
        raise TransformError("codimensional_measure: no interior mass at mesh scale")
    band0 = space.bands().measure(0)
    scale = band0 / total_raw
    nu = {space.ids[int(b)]: float(raw[j] * scale) for j, b in enumerate(bidx)}
    if any(v <= 0 for v in nu.values()):
        raise TransformError("codimensional_measure: some boundary vertex has no interior neighbor at mesh scale")
    return BoundaryMeasure(theta=float(theta), mesh_scale=float(h), nu=nu)


@dataclass
class CodimReport:
    theta: float
    rows: list[dict]
    ratio_min: float
    ratio_max: float
    spread: float
    bound: float
    skipped: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "spread": self.spread,
            "bound": self.bound,
            "skipped": self.skipped,
            "pass": self.passed,
            "n_samples": len(self.rows),
        }


def verify_codimensionality(
    space: GraphSpace,
    nu: BoundaryMeasure,
    radii: list[float],
    centers: list[str] | None = None,
    spread_bound: float = 16.0,
    max_centers: int = 48,
) -> CodimReport:
    """Check nu(ball)*r^theta against interior mass mu(ball) across scales.

    ratio(center, r) = nu(B(c,r) on the boundary) * r^theta / mu(B(c,r) in the
    interior), balls inclusive of radius.  Passes when max/min ratio over the
    sampled centers and radii stays within spread_bound.
    """
    if centers is None:
        bids = [space.ids[int(b)] for b in space.boundary_indices()]
        if len(bids) > max_centers:
            pick = np.linspace(0, len(bids) - 1, max_centers).astype(int)
            centers = [bids[i] for i in pick]
        else:
            centers = bids
    radii = sorted(float(r) for r in radii)
    if not radii or radii[0] <= 0:
        raise TransformError("verify_codimensionality: radii must be positive")
    nu_vec = nu.array(space)
    interior = space.interior_mask
    boundary = space.boundary_mask
    rows: list[dict] = []
    skipped = 0
    rmax = radii[-1] * (1 + 1e-9)
    for cid in centers:
        c = space.index[cid]
        idx, dist = local_distances(space, c, rmax)
        for r in radii:
            inside = idx[dist <= r * (1 + 1e-9)]
            mass = float(space.measure[inside[interior[inside]]].sum())
            nu_mass = float(nu_vec[inside[boundary[inside]]].sum())
            if mass <= 0 or nu_mass <= 0:
                skipped += 1
                continue
            rows.append(
                {"center": cid, "r": r, "ratio": nu_mass * r**nu.theta / mass}
            )
    if not rows:
        raise TransformError("verify_codimensionality: all samples degenerate")
    ratios = np.array([row["ratio"] for row in rows])
    lo, hi = float(ratios.min()), float(ratios.max())
    spread = hi / lo
    return CodimReport(
        theta=nu.theta,
        rows=rows,
        ratio_min=lo,
        ratio_max=hi,
        spread=spread,
        bound=float(spread_bound),
        skipped=skipped,
        passed=bool(spread <= spread_bound),
    )
