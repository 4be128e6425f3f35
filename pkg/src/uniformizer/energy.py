"""Discrete first-order calculus on weighted graph spaces.

Edge upper gradients, length-share edge masses, p-energies, and the
inequality checkers built on them: Poincare, weighted-integrability (Hardy
type), Riesz potentials, Besov boundary norms, ball-average traces, and the
boundary oscillation (Adams type) estimate.

Edge masses split each vertex measure over its incident edges in proportion
to edge length, so the total edge mass equals the total vertex measure
exactly; a transformed space reports its own masses so that the chain rule
and the energy identity hold to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphspace import GraphSpace
from .transform import BoundaryMeasure, TransformedSpace, local_distances


class EnergyError(ValueError):
    pass


def _space_parts(obj) -> tuple[GraphSpace, np.ndarray]:
    """Return (graph, edge mass array) for a GraphSpace or TransformedSpace."""
    if isinstance(obj, TransformedSpace):
        return obj.graph, obj.edge_masses
    return obj, edge_mass(obj)


def field_array(space, u) -> np.ndarray:
    """Coerce a field given as dict (id -> value) or array to index order."""
    graph = space.graph if isinstance(space, TransformedSpace) else space
    if isinstance(u, dict):
        try:
            return np.array([float(u[i]) for i in graph.ids])
        except KeyError as missing:
            raise EnergyError(f"field missing vertex {missing.args[0]!r}") from None
    arr = np.asarray(u, dtype=float)
    if arr.shape != (graph.n_vertices,):
        raise EnergyError(
            f"field has shape {arr.shape}, expected ({graph.n_vertices},)"
        )
    return arr


def edge_mass(space) -> np.ndarray:
    """Length-share edge masses m(e) = l(e) (mu(x)/S(x) + mu(y)/S(y)).

    S(v) is the total length incident to v, so summing over edges returns the
    total vertex measure exactly (each vertex spreads its measure over its
    incident edges proportionally to length).  Transformed spaces carry their
    own mass vector.
    """
    if isinstance(space, TransformedSpace):
        return space.edge_masses
    cached = getattr(space, "_edge_mass_cache", None)
    if cached is not None:
        return cached
    nv = space.n_vertices
    eu, ev, ln = space.edge_u, space.edge_v, space.edge_length
    S = np.bincount(eu, weights=ln, minlength=nv) + np.bincount(
        ev, weights=ln, minlength=nv
    )
    share = np.where(S > 0, space.measure / np.where(S > 0, S, 1.0), 0.0)
    m = ln * (share[eu] + share[ev])
    space._edge_mass_cache = m
    return m


def upper_gradient(space, u) -> np.ndarray:
    """Per-edge difference quotient |u(x) - u(y)| / l(e)."""
    graph = space.graph if isinstance(space, TransformedSpace) else space
    vals = field_array(space, u)
    return np.abs(vals[graph.edge_u] - vals[graph.edge_v]) / graph.edge_length


def p_energy(space, u, p: float) -> float:
    """Sum of m(e) g(e)^p over edges; the discrete Dirichlet p-energy."""
    if p < 1:
        raise EnergyError(f"p={p:g} must be >= 1")
    graph, masses = _space_parts(space)
    g = upper_gradient(graph, field_array(space, u))
    return float(np.sum(masses * g**p))


def random_smooth_fields(
    space, count: int, seed: int, modes: int = 4, frequency: float = 1.0
) -> np.ndarray:
    """Deterministic smooth test fields from low-frequency cosine products.

    Vertices without coordinates (the added point at infinity) get value 0.
    Returns an array of shape (count, n_vertices).
    """
    graph = space.graph if isinstance(space, TransformedSpace) else space
    if graph.coords is None:
        raise EnergyError("space has no coordinates; cannot build smooth fields")
    xy = np.array([graph.coords.get(i, (0.0, 0.0)) for i in graph.ids])
    rng = np.random.default_rng(seed)
    out = np.zeros((count, graph.n_vertices))
    for k in range(count):
        amp = rng.normal(size=modes) / modes
        wx = rng.uniform(-frequency, frequency, size=modes)
        wy = rng.uniform(-frequency, frequency, size=modes)
        ph = rng.uniform(0, 2 * np.pi, size=(2, modes))
        for j in range(modes):
            out[k] += amp[j] * np.cos(wx[j] * xy[:, 0] + ph[0, j]) * np.cos(
                wy[j] * xy[:, 1] + ph[1, j]
            )
    return out


# ---------------------------------------------------------------------------
# Poincare inequality probe


@dataclass
class PoincareReport:
    p: float
    lam: float
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def C_P(self) -> float:
        ratios = [r["ratio"] for r in self.rows]
        return max(ratios) if ratios else 0.0

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "lambda": self.lam,
            "C_P": self.C_P,
            "n_probes": len(self.rows),
            "skipped": self.skipped,
        }


def poincare_check(
    space, p: float, centers: list, radii: list, fields, lam: float = 2.0
) -> PoincareReport:
    """Empirical constant for the ball Poincare inequality.

    For each (center, r, field): compare the mean oscillation of u over
    B(center, r) against r times the p-mean of the gradient over the
    inflated ball B(center, lam r).  Balls are open and weighted by the
    vertex measure; zero-measure balls are skipped and flagged.
    """
    if lam < 1:
        raise EnergyError(f"lambda={lam:g} must be >= 1")
    graph, masses = _space_parts(space)
    report = PoincareReport(p=p, lam=lam)
    fields = np.atleast_2d(np.asarray(fields, dtype=float))
    for center in centers:
        ci = graph.index[center] if isinstance(center, str) else int(center)
        d = graph.distances_from(ci)
        for r in radii:
            in_ball = d < r
            in_lam = d < lam * r
            mu_ball = float(graph.measure[in_ball].sum())
            mu_lam = float(graph.measure[in_lam].sum())
            if mu_ball <= 0 or mu_lam <= 0:
                report.skipped.append({"center": center, "r": r, "reason": "zero-mass ball"})
                continue
            emask = in_lam[graph.edge_u] & in_lam[graph.edge_v]
            for fi, vals in enumerate(fields):
                u_mean = float((vals[in_ball] * graph.measure[in_ball]).sum()) / mu_ball
                lhs = (
                    float((np.abs(vals[in_ball] - u_mean) * graph.measure[in_ball]).sum())
                    / mu_ball
                )
                g = np.abs(vals[graph.edge_u[emask]] - vals[graph.edge_v[emask]])
                g /= graph.edge_length[emask]
                grad_mean = float((masses[emask] * g**p).sum()) / mu_lam
                rhs = r * grad_mean ** (1.0 / p)
                ratio = 0.0 if lhs == 0 else (np.inf if rhs == 0 else lhs / rhs)
                report.rows.append(
                    {"center": center, "r": r, "field": fi, "lhs": lhs, "rhs": rhs, "ratio": ratio}
                )
    return report


# ---------------------------------------------------------------------------
# Weighted integrability (Hardy-type) ratio


def hardy_check(t: TransformedSpace, u) -> float:
    """Ratio of the weighted p-oscillation to the base-space p-energy.

    LHS integrates |u - c|^p against the transformed vertex measure over the
    base vertices, with c the transformed-measure mean of u; RHS is the base
    p-energy of u.  Both sides vanish for constants (ratio 0).
    """
    base = t.base
    nb = base.n_vertices
    vals = field_array(base, u)
    mu_phi = t.graph.measure[:nb]
    total = float(mu_phi.sum())
    if total <= 0:
        raise EnergyError("transformed measure vanishes on the base vertices")
    c = float((vals * mu_phi).sum()) / total
    lhs = float((np.abs(vals - c) ** t.p * mu_phi).sum())
    g = np.abs(vals[base.edge_u] - vals[base.edge_v]) / base.edge_length
    rhs = float((edge_mass(base) * g**t.p).sum())
    if rhs == 0:
        return 0.0
    return lhs / rhs


# ---------------------------------------------------------------------------
# Riesz potential


def riesz_potential(space: GraphSpace, u, domain: list) -> tuple[dict, list]:
    """Discrete Riesz potential I(x) over a vertex subset.

    I(x) = sum over y in the subset, y != x, of u(y) d(x,y) mu(y) divided by
    the subset measure of the open ball B(x, d(x,y)).  Terms whose ball has
    zero measure are skipped and flagged.  Returns ({id: value}, flags).
    """
    vals = field_array(space, u)
    if (vals < -1e-12).any():
        raise EnergyError("riesz potential requires a non-negative field")
    if not domain:
        raise EnergyError("riesz potential requires a non-empty vertex subset")
    idx = np.array([space.index[v] for v in domain])
    out = {}
    flags = []
    for xi in idx:
        d_all = space.distances_from(int(xi))
        d = d_all[idx]
        order = np.argsort(d, kind="stable")
        d_sorted = d[order]
        mu_sorted = space.measure[idx[order]]
        cum = np.concatenate([[0.0], np.cumsum(mu_sorted)])
        total = 0.0
        for j, yi in enumerate(idx):
            if yi == xi or vals[yi] == 0.0:
                continue
            dist = d[j]
            ball_mass = cum[np.searchsorted(d_sorted, dist, side="left")]
            if ball_mass <= 0:
                flags.append({"x": space.ids[int(xi)], "y": space.ids[int(yi)], "reason": "zero-mass ball"})
                continue
            total += vals[yi] * dist * space.measure[yi] / ball_mass
        out[space.ids[int(xi)]] = total
    return out, flags


# ---------------------------------------------------------------------------
# Besov boundary norm


def besov_norm(space: GraphSpace, nu: BoundaryMeasure, f, alpha: float, p: float) -> float:
    """Boundary smoothness norm from a weighted double sum of differences.

    norm^p = sum over ordered boundary pairs x != y of
    |f(y)-f(x)|^p / (d(x,y)^{alpha p} nu(B(x, d(x,y)))) nu(x) nu(y),
    with d the path metric of the ambient space and open balls.  Returns the
    p-th root (homogeneous of degree 1 in f).
    """
    if not (0 < alpha < 1):
        raise EnergyError(f"alpha={alpha:g} must lie in (0, 1)")
    if p < 1:
        raise EnergyError(f"p={p:g} must be >= 1")
    ids = [i for i in space.ids if i in nu.nu]
    if len(ids) < 2:
        return 0.0
    idx = np.array([space.index[v] for v in ids])
    w = np.array([nu.nu[v] for v in ids])
    if isinstance(f, dict):
        vals = np.array([float(f[v]) for v in ids])
    else:
        vals = field_array(space, f)[idx]
    from scipy.sparse.csgraph import dijkstra

    D = dijkstra(space.adjacency(), directed=False, indices=idx)[:, idx]
    total = 0.0
    for i in range(len(ids)):
        order = np.argsort(D[i], kind="stable")
        d_sorted = D[i][order]
        cum = np.concatenate([[0.0], np.cumsum(w[order])])
        pos = np.searchsorted(d_sorted, D[i], side="left")
        ball = cum[pos]
        for j in range(len(ids)):
            if j == i:
                continue
            dij = D[i][j]
            if not np.isfinite(dij) or dij <= 0 or ball[j] <= 0:
                continue
            total += abs(vals[j] - vals[i]) ** p / (dij ** (alpha * p) * ball[j]) * w[i] * w[j]
    return float(total ** (1.0 / p))


# ---------------------------------------------------------------------------
# Trace by shrinking ball averages


@dataclass
class TraceReport:
    ids: list
    values: np.ndarray
    oscillation: np.ndarray
    radii: list
    unresolved: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(zip(self.ids, self.values))

    def nu_weighted_error(self, nu: BoundaryMeasure, f) -> float:
        """nu-weighted mean of |Tu - f| over resolved boundary vertices."""
        num = 0.0
        den = 0.0
        fmap = f if isinstance(f, dict) else None
        for vid, val in zip(self.ids, self.values):
            if not np.isfinite(val) or vid not in nu.nu:
                continue
            target = fmap[vid] if fmap is not None else f(vid)
            num += nu.nu[vid] * abs(val - target)
            den += nu.nu[vid]
        if den == 0:
            raise EnergyError("no resolved boundary vertices carry weight")
        return num / den


def trace(space: GraphSpace, u, nu: BoundaryMeasure, radii: list) -> TraceReport:
    """Boundary values of u recovered as interior ball averages.

    Tu at a boundary vertex is the measure-weighted mean of u over the
    inclusive ball at the smallest radius; the per-vertex oscillation of the
    mean across the (decreasing) radius list is the convergence diagnostic.
    Radii must stay at or above four mesh widths; a vertex whose smallest
    ball contains no interior mass is flagged unresolved.
    """
    radii = list(radii)
    if len(radii) < 2 or any(b >= a for a, b in zip(radii, radii[1:])):
        raise EnergyError("radii must be a strictly decreasing list of length >= 2")
    if radii[-1] < 4 * nu.mesh_scale * (1 - 1e-9):
        raise EnergyError(
            f"smallest radius {radii[-1]:g} is below the resolution floor "
            f"4h = {4 * nu.mesh_scale:g}"
        )
    vals = field_array(space, u)
    ids = [i for i in space.ids if i in nu.nu]
    n = len(ids)
    out = np.full(n, np.nan)
    osc = np.full(n, np.nan)
    unresolved = []
    rmax = radii[0] * (1 + 1e-9)
    interior_mass = np.where(space.boundary_mask, 0.0, space.measure)
    for k, vid in enumerate(ids):
        vi = space.index[vid]
        idx, dist = local_distances(space, vi, rmax)
        mass = interior_mass[idx]
        means = []
        ok = True
        for r in radii:
            sel = dist <= r * (1 + 1e-9)
            m = float(mass[sel].sum())
            if m <= 0:
                ok = False
                break
            means.append(float((vals[idx[sel]] * mass[sel]).sum()) / m)
        if not ok:
            unresolved.append(vid)
            continue
        out[k] = means[-1]
        osc[k] = max(means) - min(means)
    return TraceReport(ids=ids, values=out, oscillation=osc, radii=radii, unresolved=unresolved)


# ---------------------------------------------------------------------------
# Boundary oscillation (Adams-type) estimate


def adams_exponent(theta: float, p: float, q_minus: float, p_tilde: float | None = None) -> float:
    """Boundary Lebesgue exponent q from the codimension relation.

    Solves theta = -Q^- q / p + Q^- + q / p_tilde for q.  The auxiliary
    exponent p_tilde defaults to max(1, p - 1/4) (a slightly better exponent
    is always available on these spaces; the exact value is configuration).
    Requires the resulting q to exceed p.
    """
    if p_tilde is None:
        p_tilde = max(1.0, p - 0.25)
    denom = q_minus / p - 1.0 / p_tilde
    if denom <= 0:
        raise EnergyError(
            f"exponent relation degenerate: Q^-/p - 1/p_tilde = {denom:g} <= 0"
        )
    q = (q_minus - theta) / denom
    if q <= p:
        raise EnergyError(
            f"derived q = {q:g} does not exceed p = {p:g}; "
            "choose a smaller p_tilde or check theta"
        )
    return q


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(weights[order])
    k = int(np.searchsorted(cw, 0.5 * cw[-1]))
    return float(values[order][min(k, len(values) - 1)])


@dataclass
class AdamsReport:
    q: float
    theta: float
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        ratios = [r["ratio"] for r in self.rows]
        return max(ratios) if ratios else 0.0

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "theta": self.theta,
            "max_ratio": self.max_ratio,
            "n_balls": len(self.rows),
            "skipped": self.skipped,
            "violations": self.violations,
        }


def adams_check(
    t: TransformedSpace, nu: BoundaryMeasure, u, q: float, theta: float, balls: list
) -> AdamsReport:
    """Boundary q-oscillation against interior gradient energy, per ball.

    For each (center id, radius) in the transformed metric: LHS is the
    nu-weighted q-norm of u minus its nu-median over the boundary part of
    the ball; RHS is r^{1 - theta/q} / mu_phi(B)^{1/p - 1/q} times the
    p-energy of u over edges inside the doubled ball, to the power 1/p.
    Balls are inclusive.  A ball with zero RHS but positive LHS is recorded
    as a violation.
    """
    graph = t.graph
    masses = t.edge_masses
    p = t.p
    vals = field_array(t, u)
    report = AdamsReport(q=q, theta=theta)
    nu_arr = np.zeros(graph.n_vertices)
    for vid, wv in nu.nu.items():
        nu_arr[graph.index[vid]] = wv
    for center, r in balls:
        ci = graph.index[center] if isinstance(center, str) else int(center)
        d = graph.distances_from(ci)
        in_ball = d <= r * (1 + 1e-9)
        bsel = in_ball & (nu_arr > 0)
        mu_ball = float(graph.measure[in_ball].sum())
        if not bsel.any():
            report.skipped.append({"center": center, "r": r, "reason": "no boundary mass in ball"})
            continue
        if mu_ball <= 0:
            report.skipped.append({"center": center, "r": r, "reason": "zero-measure ball"})
            continue
        w = nu_arr[bsel]
        uv = vals[bsel]
        c = _weighted_median(uv, w)
        lhs = float((w * np.abs(uv - c) ** q).sum()) ** (1.0 / q)
        in_2b = d <= 2 * r * (1 + 1e-9)
        emask = in_2b[graph.edge_u] & in_2b[graph.edge_v]
        g = np.abs(vals[graph.edge_u[emask]] - vals[graph.edge_v[emask]])
        g /= graph.edge_length[emask]
        energy = float((masses[emask] * g**p).sum())
        rhs = r ** (1.0 - theta / q) / mu_ball ** (1.0 / p - 1.0 / q) * energy ** (1.0 / p)
        if rhs == 0:
            if lhs > 0:
                report.violations.append({"center": center, "r": r, "lhs": lhs})
            ratio = 0.0
        else:
            ratio = lhs / rhs
        report.rows.append({"center": center, "r": r, "lhs": lhs, "rhs": rhs, "ratio": ratio})
    return report
