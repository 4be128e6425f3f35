"""Convex optimization engines for graph domains.

* ``solve_p_harmonic``: Dirichlet energy minimizer with pinned values, by
  Newton iterations with exact line search under a geometric regularization
  schedule (p = 2 reduces to one exact sparse linear solve).
* ``capacity``: condenser capacity as the energy of the equilibrium
  potential (pins 1 on E, 0 on F, restricted to U).
* ``modulus``: p-modulus of the E-F path family by cutting-plane constraint
  generation, each restricted program solved through its smooth Lagrangian
  dual.
* ``capacity_of_infinity``: shell condenser around the added point of a
  transformed space; the probe behind parabolicity classification.
* ``solve_dirichlet_unbounded``: transform, attach infinity, pin boundary
  data (optionally a value at infinity), solve, restrict back.

The regularized objective is sum_e m(e) (|du(e)|^2 + eps^2)^{p/2} / l(e)^p,
so regularization commutes exactly with the dampening transform: base and
transformed problems have identical objectives for every eps, not only in
the limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq, minimize
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .dampening import Dampening
from .energy import edge_mass
from .graphspace import GraphSpace, shortest_route
from .transform import TransformedSpace, attach_infinity, transform


class SolverError(ValueError):
    pass


@dataclass
class SolveOptions:
    tol: float = 1e-12
    max_iter: int = 500
    eps_schedule: list | None = None
    eps_factor: float = 0.1
    eps_floor_factor: float = 1e-10
    init: str = "harmonic"
    linear_residual: float = 1e-10


@dataclass
class DirichletProblem:
    space: object
    p: float
    boundary_data: dict
    options: SolveOptions = field(default_factory=SolveOptions)


@dataclass
class SolveResult:
    u: np.ndarray
    energy: float
    iterations: int
    residual: float
    flags: list


@dataclass
class Condenser:
    E: list
    F: list
    U: list | None = None


@dataclass
class CapacityResult:
    value: float
    potential: np.ndarray
    solve: SolveResult


@dataclass
class ModulusResult:
    value: float
    rho: np.ndarray
    paths_used: int
    flags: list


@dataclass
class UnboundedSolveResult:
    u: np.ndarray
    at_infinity_value: float
    transformed: TransformedSpace
    solve: SolveResult


def _parts(space) -> tuple[GraphSpace, np.ndarray]:
    if isinstance(space, TransformedSpace):
        return space.graph, space.edge_masses
    return space, edge_mass(space)


# ---------------------------------------------------------------------------
# regularized edge functionals


def _psi_sum(a, d, p, eps):
    if p == 2:
        return float(np.sum(a * (d * d + eps * eps)))
    return float(np.sum(a * (d * d + eps * eps) ** (p / 2)))


def _psi_prime(a, d, p, eps):
    if p == 2:
        return 2.0 * a * d
    return a * p * d * (d * d + eps * eps) ** ((p - 2) / 2)


def _psi_second(a, d, p, eps):
    if p == 2:
        return 2.0 * a
    s = d * d + eps * eps
    return a * p * s ** ((p - 4) / 2) * ((p - 1) * d * d + eps * eps)


def _linear_solve(H: sp.csr_matrix, b: np.ndarray, opts: SolveOptions, flags: list) -> np.ndarray:
    if H.shape[0] == 0:
        return np.zeros(0)
    x = spsolve(H, b)
    bn = float(np.linalg.norm(b))
    if bn > 0:
        res = float(np.linalg.norm(H @ x - b)) / bn
        if res > opts.linear_residual:
            x = x + spsolve(H, b - H @ x)
            res = float(np.linalg.norm(H @ x - b)) / bn
            if res > opts.linear_residual:
                flags.append(f"linear-residual {res:.2e}")
    return x


def _minimize(
    graph: GraphSpace,
    masses: np.ndarray,
    p: float,
    pins_idx: np.ndarray,
    pins_val: np.ndarray,
    opts: SolveOptions,
    vertex_mask: np.ndarray | None = None,
    isolated: str = "raise",
    isolated_fill: float = 0.0,
) -> SolveResult:
    """Minimize the regularized p-energy over the masked vertex set.

    Vertices outside the mask (and their edges) do not exist for the
    problem; their result entries are NaN.  Free components with no
    positive-conductance route to a pin are an error under
    isolated="raise", or held at isolated_fill (zero energy) otherwise.
    """
    if p <= 1:
        raise SolverError(f"p={p:g} must exceed 1 for the solver")
    nv = graph.n_vertices
    mask = np.ones(nv, dtype=bool) if vertex_mask is None else vertex_mask
    if pins_idx.size == 0:
        raise SolverError("no pinned vertices")
    if not mask[pins_idx].all():
        raise SolverError("pinned vertex outside the active vertex set")
    if not np.isfinite(pins_val).all():
        raise SolverError("pinned values must be finite")

    eu, ev, ln = graph.edge_u, graph.edge_v, graph.edge_length
    e_active = mask[eu] & mask[ev]
    a = np.where(e_active, masses / ln**p, 0.0)

    pinned = np.zeros(nv, dtype=bool)
    pinned[pins_idx] = True
    flags: list = []
    u = np.zeros(nv)
    u[pins_idx] = pins_val

    # free components over positive-conductance edges, and their pin adjacency
    free_mask = mask & ~pinned
    free_idx = np.nonzero(free_mask)[0]
    slot = np.full(nv, -1, dtype=np.int64)
    slot[free_idx] = np.arange(free_idx.size)
    pos = a > 0
    ffsel = pos & free_mask[eu] & free_mask[ev]
    nf_all = free_idx.size
    if nf_all:
        comp_graph = sp.csr_matrix(
            (np.ones(int(ffsel.sum())), (slot[eu[ffsel]], slot[ev[ffsel]])),
            shape=(nf_all, nf_all),
        )
        ncomp, labels = connected_components(comp_graph, directed=False)
        pin_adj = np.zeros(ncomp, dtype=bool)
        fpsel = pos & (
            (free_mask[eu] & pinned[ev]) | (pinned[eu] & free_mask[ev])
        )
        fside = np.where(free_mask[eu[fpsel]], eu[fpsel], ev[fpsel])
        pin_adj[labels[slot[fside]]] = True
        orphan = ~pin_adj[labels]
        if orphan.any():
            if isolated == "raise":
                vid = graph.ids[int(free_idx[np.nonzero(orphan)[0][0]])]
                raise SolverError(
                    f"free vertex {vid!r} has no positive-conductance route to a pin"
                )
            u[free_idx[orphan]] = isolated_fill
            flags.append("isolated-free-component")
            free_mask = free_mask.copy()
            free_mask[free_idx[orphan]] = False
            free_idx = np.nonzero(free_mask)[0]
            slot = np.full(nv, -1, dtype=np.int64)
            slot[free_idx] = np.arange(free_idx.size)
    nf = free_idx.size

    def true_energy(vals: np.ndarray) -> float:
        d = vals[eu] - vals[ev]
        return float(np.sum(a * np.abs(d) ** p))

    lo, hi = float(pins_val.min()), float(pins_val.max())
    rng = hi - lo
    if nf == 0 or rng == 0:
        if rng == 0:
            u[free_idx] = lo
        out = u.copy()
        out[~mask] = np.nan
        return SolveResult(u=out, energy=true_energy(u), iterations=0, residual=0.0, flags=flags)

    # assembly index plan (pattern fixed; data changes per iteration)
    su, sv = slot[eu], slot[ev]
    ff = pos & (su >= 0) & (sv >= 0)
    fx = pos & ((su >= 0) ^ (sv >= 0))
    sfx = np.where(su[fx] >= 0, su[fx], sv[fx])
    rows = np.concatenate([su[ff], sv[ff], su[ff], sv[ff], sfx])
    cols = np.concatenate([su[ff], sv[ff], sv[ff], su[ff], sfx])

    def newton_matrix(w: np.ndarray) -> sp.csr_matrix:
        wf = w[ff]
        data = np.concatenate([wf, wf, -wf, -wf, w[fx]])
        return sp.csr_matrix((data, (rows, cols)), shape=(nf, nf))

    # initial guess
    if opts.init == "flat" or p == 2:
        u[free_idx] = float(pins_val.mean())
    elif opts.init == "harmonic":
        w0 = 2.0 * a
        H = newton_matrix(w0)
        d0 = u[eu] - u[ev]
        grad = np.bincount(eu, weights=2 * a * d0, minlength=nv) - np.bincount(
            ev, weights=2 * a * d0, minlength=nv
        )
        u[free_idx] = _linear_solve(H, -grad[free_idx], opts, flags)
        # pins enter through grad since free entries start at zero
    else:
        raise SolverError(f"unknown init {opts.init!r}")

    if opts.eps_schedule is not None:
        schedule = [float(e) for e in opts.eps_schedule]
        if p != 2 and any(e <= 0 for e in schedule):
            raise SolverError("eps schedule must be positive for p != 2")
    elif p == 2:
        schedule = [0.0]
    else:
        n_steps = int(np.ceil(-np.log(opts.eps_floor_factor) / -np.log(opts.eps_factor)))
        schedule = [rng * opts.eps_factor**k for k in range(n_steps + 1)]

    iterations = 0
    residual = 0.0
    for eps in schedule:
        while True:
            if iterations >= opts.max_iter:
                flags.append("unconverged")
                break
            d = u[eu] - u[ev]
            F_old = _psi_sum(a, d, p, eps)
            gr = _psi_prime(a, d, p, eps)
            grad = np.bincount(eu, weights=gr, minlength=nv) - np.bincount(
                ev, weights=gr, minlength=nv
            )
            H = newton_matrix(_psi_second(a, d, p, eps))
            delta = _linear_solve(H, -grad[free_idx], opts, flags)
            dfull = np.zeros(nv)
            dfull[free_idx] = delta
            dd = dfull[eu] - dfull[ev]

            def slope(t):
                return float(np.sum(_psi_prime(a, d + t * dd, p, eps) * dd))

            if slope(0.0) >= 0.0:
                residual = 0.0
                break
            t_hi = 2.0
            while slope(t_hi) < 0.0 and t_hi < 1024.0:
                t_hi *= 2.0
            t = t_hi if slope(t_hi) < 0.0 else brentq(slope, 0.0, t_hi, xtol=1e-13)
            u[free_idx] += t * delta
            iterations += 1
            F_new = _psi_sum(a, u[eu] - u[ev], p, eps)
            if F_new > F_old + 1e-9 * (abs(F_old) + 1.0):
                raise SolverError(
                    f"energy increased during iteration ({F_old:g} -> {F_new:g})"
                )
            residual = (F_old - F_new) / max(abs(F_old), 1e-300)
            if residual < opts.tol:
                break
        if "unconverged" in flags:
            break

    # discrete maximum principle
    slack = 1e-7 * max(rng, 1.0)
    umin, umax = float(u[mask].min()), float(u[mask].max())
    if umin < lo - slack or umax > hi + slack:
        flags.append(f"max-principle-violation [{umin:g}, {umax:g}]")
    out = u.copy()
    out[~mask] = np.nan
    return SolveResult(
        u=out, energy=true_energy(u), iterations=iterations, residual=residual, flags=flags
    )


# ---------------------------------------------------------------------------
# public solves


def _pin_arrays(graph: GraphSpace, data: dict) -> tuple[np.ndarray, np.ndarray]:
    idx = np.empty(len(data), dtype=np.int64)
    val = np.empty(len(data))
    for k, (vid, v) in enumerate(data.items()):
        if vid not in graph.index:
            raise SolverError(f"pinned vertex {vid!r} is not in the space")
        idx[k] = graph.index[vid]
        val[k] = float(v)
    return idx, val


def solve_p_harmonic(problem: DirichletProblem) -> SolveResult:
    """Minimize the p-energy over fields agreeing with the pinned data.

    The pinned set must cover every boundary vertex (extra pins, including
    the infinity vertex, are allowed).  Raises when a free vertex has no
    positive-conductance route to a pin.
    """
    graph, masses = _parts(problem.space)
    data = problem.boundary_data
    if not data:
        raise SolverError("boundary data is empty")
    idx, val = _pin_arrays(graph, data)
    pinned = np.zeros(graph.n_vertices, dtype=bool)
    pinned[idx] = True
    uncovered = graph.boundary_mask & ~pinned
    if uncovered.any():
        vid = graph.ids[int(np.nonzero(uncovered)[0][0])]
        raise SolverError(f"boundary vertex {vid!r} is missing from boundary data")
    return _minimize(graph, masses, problem.p, idx, val, problem.options, isolated="raise")


def capacity(space, cond: Condenser, p: float, options: SolveOptions | None = None) -> CapacityResult:
    """Condenser capacity: energy of the potential with E at 1 and F at 0.

    The minimization runs over the subgraph induced by U (default: all
    vertices); edge masses come from the ambient space.  Free components of
    U with no conductive route to E or F sit at 0 and contribute nothing.
    """
    opts = options or SolveOptions()
    graph, masses = _parts(space)
    if not cond.E or not cond.F:
        raise SolverError("condenser plates must be non-empty")
    E = [v for v in cond.E]
    F = [v for v in cond.F]
    if set(E) & set(F):
        raise SolverError("condenser plates overlap")
    mask = None
    if cond.U is not None:
        mask = np.zeros(graph.n_vertices, dtype=bool)
        for vid in cond.U:
            if vid not in graph.index:
                raise SolverError(f"condenser vertex {vid!r} is not in the space")
            mask[graph.index[vid]] = True
        missing = [v for v in E + F if v not in graph.index or not mask[graph.index[v]]]
        if missing:
            raise SolverError(f"plate vertex {missing[0]!r} is outside U")
    data = {v: 1.0 for v in E}
    data.update({v: 0.0 for v in F})
    idx, val = _pin_arrays(graph, data)
    res = _minimize(
        graph, masses, p, idx, val, opts,
        vertex_mask=mask, isolated="constant", isolated_fill=0.0,
    )
    return CapacityResult(value=res.energy, potential=res.u, solve=res)


def modulus(
    space,
    cond: Condenser,
    p: float,
    tol: float = 1e-6,
    max_paths: int = 200,
) -> ModulusResult:
    """p-modulus of the family of E-F paths inside U by constraint generation.

    Maintains an active path set (seeded with the shortest E-F path by
    length), solves the restricted program through its Lagrangian dual, then
    adds the most rho-violated path found by Dijkstra under rho*length
    weights, until the shortest path carries rho-length >= 1 - tol.

    Edges with zero mass are free for the minimization: they carry
    rho = 1/length at zero cost, so any path using one is satisfied a
    priori and the generation never returns it.
    """
    if p <= 1:
        raise SolverError(f"p={p:g} must exceed 1 for modulus")
    graph, masses = _parts(space)
    if not cond.E or not cond.F:
        raise SolverError("condenser plates must be non-empty")
    if set(cond.E) & set(cond.F):
        raise SolverError("condenser plates overlap")
    nv, ne = graph.n_vertices, graph.n_edges
    in_U = np.ones(nv, dtype=bool)
    if cond.U is not None:
        in_U[:] = False
        for vid in cond.U:
            in_U[graph.index[vid]] = True
    E_idx = [graph.index[v] for v in cond.E]
    F_idx = [graph.index[v] for v in cond.F]
    if not all(in_U[i] for i in E_idx + F_idx):
        raise SolverError("condenser plates must lie inside U")

    eu, ev, ln = graph.edge_u, graph.edge_v, graph.edge_length
    e_in_U = in_U[eu] & in_U[ev]
    costed = e_in_U & (masses > 0)
    freebie = e_in_U & ~costed
    rho = np.zeros(ne)
    rho[freebie] = 1.0 / ln[freebie]
    flags: list = []

    w_first = np.where(costed, ln, np.inf)
    try:
        _, _, epath = shortest_route(graph, E_idx, F_idx, w_first)
    except ValueError:
        w_any = np.where(e_in_U, ln, np.inf)
        try:
            shortest_route(graph, E_idx, F_idx, w_any)
            flags.append("zero-cost-connection")
        except ValueError:
            flags.append("no-path")
        return ModulusResult(value=0.0, rho=rho, paths_used=0, flags=flags)

    epos = np.nonzero(costed)[0]
    pos_of = np.full(ne, -1, dtype=np.int64)
    pos_of[epos] = np.arange(epos.size)
    m_c = masses[epos]
    l_c = ln[epos]
    q = 1.0 / (p - 1.0)

    paths: list[tuple] = [tuple(sorted(pos_of[epath]))]
    lam = np.zeros(1)
    converged = False
    while True:
        A = sp.csr_matrix(
            (
                np.concatenate([l_c[list(pth)] for pth in paths]),
                (
                    np.concatenate([np.full(len(pth), i) for i, pth in enumerate(paths)]),
                    np.concatenate([np.array(pth, dtype=np.int64) for pth in paths]),
                ),
            ),
            shape=(len(paths), epos.size),
        )

        def neg_dual(lm):
            s = A.T @ lm
            r = (s / (p * m_c)) ** q
            val = lm.sum() - (p - 1.0) * float(np.sum(m_c * r**p))
            grad = 1.0 - A @ r
            return -val, -grad

        res = minimize(
            neg_dual,
            lam,
            jac=True,
            method="L-BFGS-B",
            bounds=[(0.0, None)] * len(paths),
            options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 2000, "maxfun": 4000},
        )
        lam = np.maximum(res.x, 0.0)
        r_c = ((A.T @ lam) / (p * m_c)) ** q
        rho[epos] = r_c

        w = np.full(ne, np.inf)
        w[costed] = rho[costed] * ln[costed]
        w[freebie] = 1.0
        cost, _, epath = shortest_route(graph, E_idx, F_idx, w)
        if cost >= 1.0 - tol:
            converged = True
            break
        if len(paths) >= max_paths:
            flags.append("path-budget")
            break
        new = tuple(sorted(pos_of[epath]))
        if new in paths:
            flags.append("stalled")
            break
        paths.append(new)
        lam = np.append(lam, 0.0)
    if not converged and "path-budget" not in flags and "stalled" not in flags:
        flags.append("unconverged")
    value = float(np.sum(m_c * r_c**p))
    return ModulusResult(value=value, rho=rho, paths_used=len(paths), flags=flags)


def capacity_of_infinity(
    t: TransformedSpace, p: float, r: float, R: float, options: SolveOptions | None = None
) -> float:
    """Capacity of the shell condenser around the infinity vertex.

    E is the closed ball of radius r around infinity (possibly just the
    point itself), F everything at distance >= R.  Requires 0 < r < R/4 and
    a non-empty F (degenerate shells are an error).
    """
    if not t.infinity_attached:
        raise SolverError("capacity_of_infinity: infinity not attached")
    if not (0 < r <= R / 4 * (1 + 1e-12)):
        raise SolverError(f"need 0 < r <= R/4, got r={r:g}, R={R:g}")
    d = t.distance_to_infinity()
    E_sel = d <= r * (1 + 1e-9)
    F_sel = d >= R
    if not F_sel.any():
        raise SolverError(f"degenerate shells: nothing at distance >= R={R:g}")
    if (E_sel & F_sel).any():
        raise SolverError("degenerate shells: E and F overlap")
    ids = t.graph.ids
    cond = Condenser(
        E=[ids[i] for i in np.nonzero(E_sel)[0]],
        F=[ids[i] for i in np.nonzero(F_sel)[0]],
    )
    return capacity(t, cond, p, options).value


def solve_dirichlet_unbounded(
    space: GraphSpace,
    phi: Dampening,
    p: float,
    f: dict,
    at_infinity: float | None = None,
    options: SolveOptions | None = None,
    max_boundary_diameter: float | None = None,
) -> UnboundedSolveResult:
    """Dirichlet solve on a truncated unbounded domain via its dampened form.

    Pipeline: transform, attach the point at infinity, pin the boundary data
    (and optionally a value at infinity), minimize, then restrict back to the
    original vertices.  By the exact energy identity the result also
    minimizes the untransformed truncation energy under the same pins.
    """
    kwargs = {}
    if max_boundary_diameter is not None:
        kwargs["max_boundary_diameter"] = max_boundary_diameter
    ts = attach_infinity(transform(space, phi, p, **kwargs))
    pins = {str(k): float(v) for k, v in f.items()}
    bset = {space.ids[i] for i in space.boundary_indices()}
    extra = set(pins) - bset
    if extra:
        raise SolverError(f"data vertex {sorted(extra)[0]!r} is not a boundary vertex")
    missing = bset - set(pins)
    if missing:
        raise SolverError(f"boundary vertex {sorted(missing)[0]!r} has no data value")
    if at_infinity is not None:
        pins[ts.infinity_id] = float(at_infinity)
    res = solve_p_harmonic(DirichletProblem(ts, p, pins, options or SolveOptions()))
    nb = space.n_vertices
    return UnboundedSolveResult(
        u=res.u[:nb],
        at_infinity_value=float(res.u[ts.graph.infinity_index]),
        transformed=ts,
        solve=res,
    )
