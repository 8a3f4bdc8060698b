"""Graph instances and exact separation for matching and stable-set runs.

Matching uses the degree rows plus the blossom (odd-set) inequalities
sum_{e in E[U]} x_e <= (|U|-1)/2 for odd U; stable set uses the clique
relaxation with one row per clique.  Separation is exact at desk scale:
odd sets by bounded enumeration over the fractional support's connected
components, cliques by a weighted branch-and-bound with a greedy-coloring
bound.  Brute-force optima back the shared 1%-of-optimum stopping rule.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import as_vector
from .lp_baseline import LinearProgram, solve_lp
from .oracle import (
    VIOLATION_TOL,
    Constraint,
    ConstraintForm,
    Inside,
    SeparationOracle,
    SeparationResult,
    Violated,
)

log = logging.getLogger(__name__)

_SUPPORT_TOL = 1e-9
_TABLE_LIMIT = 60_000  # max cached odd subsets before falling back to lazy enumeration
_MATCHING_BRUTE_CAP = 24
_CLIQUE_BRUTE_CAP = 30


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with 0-indexed nodes and a fixed edge order."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"loop edge ({u}, {v})")
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError(f"edge ({u}, {v}) out of range")
            if u > v:
                raise ValueError("edges must be stored as (min, max) pairs")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        for u, v in self.edges:
            adj[u, v] = adj[v, u] = True
        return adj

    def incident_edges(self) -> list[list[int]]:
        inc: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, (u, v) in enumerate(self.edges):
            inc[u].append(i)
            inc[v].append(i)
        return inc


def make_graph(n_nodes: int, edges) -> Graph:
    """Normalize an edge list (orientation, duplicates) into a Graph."""
    cleaned = sorted({(min(u, v), max(u, v)) for u, v in edges})
    return Graph(n_nodes, tuple(cleaned))


def parse_dimacs(text: str) -> Graph:
    """Parse DIMACS edge format: a 'p edge n m' header and 1-indexed 'e u v' lines."""
    n_nodes = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if parts[0] == "p":
            if len(parts) < 4 or parts[1] != "edge":
                raise ValueError(f"line {lineno}: malformed problem line {raw!r}")
            try:
                n_nodes = int(parts[2])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad node count") from exc
        elif parts[0] == "e":
            if n_nodes is None:
                raise ValueError(f"line {lineno}: edge before problem line")
            try:
                u, v = int(parts[1]), int(parts[2])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: malformed edge line {raw!r}") from exc
            if not (1 <= u <= n_nodes and 1 <= v <= n_nodes):
                raise ValueError(f"line {lineno}: edge ({u}, {v}) out of range")
            edges.append((u - 1, v - 1))
        else:
            raise ValueError(f"line {lineno}: unknown record {raw!r}")
    if n_nodes is None:
        raise ValueError("missing problem line")
    return make_graph(n_nodes, edges)


def to_dimacs(graph: Graph, comments=()) -> str:
    lines = [f"c {c}" for c in comments]
    lines.append(f"p edge {graph.n_nodes} {graph.n_edges}")
    lines.extend(f"e {u + 1} {v + 1}" for u, v in graph.edges)
    return "\n".join(lines) + "\n"


def generate_triangle_instance(n_nodes: int, n_triangles: int, seed: int) -> Graph:
    """Union of sampled triangles: n_triangles node triples, edges of each added."""
    if n_nodes < 3:
        raise ValueError("need at least 3 nodes")
    rng = np.random.default_rng(seed)
    edges = set()
    for _ in range(n_triangles):
        u, v, w = (int(x) for x in rng.choice(n_nodes, size=3, replace=False))
        edges.update({(u, v), (v, w), (u, w)})
    return make_graph(n_nodes, edges)


def random_gnp(n_nodes: int, p: float, seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    edges = [
        (u, v) for u in range(n_nodes) for v in range(u + 1, n_nodes) if rng.random() < p
    ]
    return make_graph(n_nodes, edges)


# -- odd-set (blossom) separation -----------------------------------------


@lru_cache(maxsize=8)
def _oddset_table(graph: Graph, max_set_size: int):
    """All odd node subsets of size 3..max_set_size among non-isolated nodes.

    Returns (subsets, incidence matrix over edges, right-hand sides, node
    membership matrix) in (size, lexicographic) order, or None when the
    subset count would be unreasonably large.
    """
    touched = sorted({u for e in graph.edges for u in e})
    count = 0
    for k in range(3, min(max_set_size, len(touched)) + 1, 2):
        count += _comb(len(touched), k)
        if count > _TABLE_LIMIT:
            return None
    subsets = []
    for k in range(3, min(max_set_size, len(touched)) + 1, 2):
        subsets.extend(itertools.combinations(touched, k))
    if not subsets:
        return None
    matrix = np.zeros((len(subsets), graph.n_edges))
    members = np.zeros((len(subsets), graph.n_nodes), dtype=bool)
    rhs = np.zeros(len(subsets))
    node_sets = [frozenset(s) for s in subsets]
    for row, (subset, nodes) in enumerate(zip(subsets, node_sets)):
        members[row, list(subset)] = True
        rhs[row] = (len(subset) - 1) / 2.0
        for j, (u, v) in enumerate(graph.edges):
            if u in nodes and v in nodes:
                matrix[row, j] = 1.0
    return subsets, matrix, rhs, members


def _comb(n: int, k: int) -> int:
    import math

    return math.comb(n, k) if n >= k else 0


def _support_components(graph: Graph, x: np.ndarray):
    """Connected components of the subgraph of edges with positive weight."""
    parent = list(range(graph.n_nodes))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    touched = set()
    for j, (u, v) in enumerate(graph.edges):
        if x[j] > _SUPPORT_TOL:
            touched.update((u, v))
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[max(ru, rv)] = min(ru, rv)
    comp = np.full(graph.n_nodes, -1)
    roots: dict[int, int] = {}
    for v in sorted(touched):
        root = find(v)
        comp[v] = roots.setdefault(root, len(roots))
    return comp, len(roots)


def best_violated_oddset(graph: Graph, x, max_set_size: int = 9):
    """Most violated odd-set inequality over the support's components.

    Returns (violation, node tuple) with the raw violation of the inequality
    as written; (0.0, None) when nothing exceeds zero.  Ties resolve to the
    first subset in (size, lexicographic) order.  The component restriction
    is lossless whenever the query satisfies the degree constraints.
    """
    x = as_vector(x)
    if x.shape[0] != graph.n_edges:
        raise ValueError("weight vector length must match the edge count")
    if max_set_size < 3:
        raise ValueError("odd sets start at size 3")
    comp, n_comp = _support_components(graph, x)
    if n_comp == 0:
        return 0.0, None

    table = _oddset_table(graph, max_set_size)
    if table is not None:
        subsets, matrix, rhs, members = table
        comp_lo = np.where(members, comp[None, :], np.inf).min(axis=1)
        comp_hi = np.where(members, comp[None, :], -np.inf).max(axis=1)
        ok = (comp_lo >= 0) & (comp_lo == comp_hi)
        if not ok.any():
            return 0.0, None
        viol = matrix @ x - rhs
        viol[~ok] = -np.inf
        idx = int(np.argmax(viol))
        if viol[idx] <= 0.0:
            return 0.0, None
        return float(viol[idx]), subsets[idx]

    # Lazy path for graphs too large to tabulate.
    edge_weight = {e: x[j] for j, e in enumerate(graph.edges) if x[j] > _SUPPORT_TOL}
    best_viol, best_set = 0.0, None
    groups: dict[int, list[int]] = {}
    for v in range(graph.n_nodes):
        if comp[v] >= 0:
            groups.setdefault(int(comp[v]), []).append(v)
    candidates = []
    for cid in sorted(groups):
        nodes = sorted(groups[cid])
        for k in range(3, min(max_set_size, len(nodes)) + 1, 2):
            candidates.extend(itertools.combinations(nodes, k))
    candidates.sort(key=lambda s: (len(s), s))
    for subset in candidates:
        nodes = set(subset)
        total = sum(
            w for (u, v), w in edge_weight.items() if u in nodes and v in nodes
        )
        viol = total - (len(subset) - 1) / 2.0
        if viol > best_viol:
            best_viol, best_set = viol, subset
    return best_viol, best_set


def oddset_constraint(graph: Graph, subset) -> Constraint:
    """Blossom row for the node subset, scaled to right-hand side 1."""
    scale = (len(subset) - 1) / 2.0
    nodes = set(subset)
    a = np.zeros(graph.n_edges)
    for j, (u, v) in enumerate(graph.edges):
        if u in nodes and v in nodes:
            a[j] = 1.0 / scale
    name = "oddset:" + "|".join(str(v) for v in sorted(subset))
    return Constraint(a, 1.0, ConstraintForm.POLAR, name)


def separate_oddset(graph: Graph, x, max_set_size: int = 9) -> SeparationResult:
    """Return the most violated blossom inequality, polar-normalized.

    Ranking and the violation threshold use the inequality as written; the
    returned row is rescaled to right-hand side 1, so its reported violation
    is the raw one divided by (|U| - 1) / 2.
    """
    x = as_vector(x)
    raw, subset = best_violated_oddset(graph, x, max_set_size)
    if subset is None or raw <= VIOLATION_TOL:
        return Inside()
    cons = oddset_constraint(graph, subset)
    return Violated(cons, cons.violation(x))


# -- clique separation ------------------------------------------------------


def max_weight_clique(graph: Graph, weights) -> tuple[float, tuple[int, ...]]:
    """Exact maximum-weight clique via branch and bound.

    Prunes with a greedy weighted-coloring bound; only nodes of positive
    weight matter, since dropping a nonpositive-weight node never decreases
    a clique's weight.  Deterministic for a fixed graph and weight vector.
    """
    weights = as_vector(weights)
    if weights.shape[0] != graph.n_nodes:
        raise ValueError("weight vector length must match the node count")
    adj = graph.adjacency()
    nodes = [v for v in range(graph.n_nodes) if weights[v] > _SUPPORT_TOL]
    nodes.sort(key=lambda v: (-weights[v], v))
    best_w = 0.0
    best_set: tuple[int, ...] = ()

    def color_bound(cands: list[int]) -> float:
        classes: list[tuple[float, list[int]]] = []
        bound = 0.0
        for v in cands:
            placed = False
            for i, (wmax, members) in enumerate(classes):
                if not any(adj[v, u] for u in members):
                    members.append(v)
                    if weights[v] > wmax:
                        bound += weights[v] - wmax
                        classes[i] = (weights[v], members)
                    placed = True
                    break
            if not placed:
                classes.append((weights[v], [v]))
                bound += weights[v]
        return bound

    def expand(current: list[int], current_w: float, cands: list[int]) -> None:
        nonlocal best_w, best_set
        if not cands:
            if current_w > best_w:
                best_w = current_w
                best_set = tuple(sorted(current))
            return
        if current_w + color_bound(cands) <= best_w + 1e-15:
            return
        for i, v in enumerate(cands):
            rest = cands[i + 1 :]
            if current_w + weights[v] + sum(weights[u] for u in rest) <= best_w + 1e-15:
                return
            current.append(v)
            expand(current, current_w + weights[v], [u for u in rest if adj[v, u]])
            current.pop()

    expand([], 0.0, nodes)
    return best_w, best_set


def clique_constraint(graph: Graph, clique) -> Constraint:
    a = np.zeros(graph.n_nodes)
    a[list(clique)] = 1.0
    name = "clique:" + "|".join(str(v) for v in sorted(clique))
    return Constraint(a, 1.0, ConstraintForm.POLAR, name)


def separate_clique(graph: Graph, x) -> SeparationResult:
    """Return the clique inequality of a maximum-weight clique, if violated."""
    x = as_vector(x)
    weight, clique = max_weight_clique(graph, x)
    if weight <= 1.0 + VIOLATION_TOL:
        return Inside()
    cons = clique_constraint(graph, clique)
    return Violated(cons, cons.violation(x))


def enumerate_maximal_cliques(graph: Graph) -> list[tuple[int, ...]]:
    """Bron-Kerbosch with pivoting; includes singletons for isolated nodes."""
    adj = [set() for _ in range(graph.n_nodes)]
    for u, v in graph.edges:
        adj[u].add(v)
        adj[v].add(u)
    out: list[tuple[int, ...]] = []

    def bk(r: set, p: set, x: set) -> None:
        if not p and not x:
            out.append(tuple(sorted(r)))
            return
        pivot = max(p | x, key=lambda v: (len(adj[v] & p), -v))
        for v in sorted(p - adj[pivot]):
            bk(r | {v}, p & adj[v], x & adj[v])
            p = p - {v}
            x = x | {v}

    bk(set(), set(range(graph.n_nodes)), set())
    return sorted(out, key=lambda c: (len(c), c))


# -- reference optima --------------------------------------------------------


def brute_force_matching_opt(graph: Graph) -> int:
    """Exact maximum-cardinality matching by memoized enumeration.

    Works per connected component on node bitmasks; the desk-scale cap
    applies to the number of non-isolated nodes.
    """
    touched = sorted({u for e in graph.edges for u in e})
    if len(touched) > _MATCHING_BRUTE_CAP:
        raise ValueError(
            f"instance too large for brute force ({len(touched)} matched nodes > "
            f"{_MATCHING_BRUTE_CAP})"
        )
    if graph.n_edges == 0:
        return 0
    comp, n_comp = _support_components(graph, np.ones(graph.n_edges))
    total = 0
    for cid in range(n_comp):
        nodes = [v for v in range(graph.n_nodes) if comp[v] == cid]
        index = {v: i for i, v in enumerate(nodes)}
        adj_mask = [0] * len(nodes)
        for u, v in graph.edges:
            if u in index and v in index:
                adj_mask[index[u]] |= 1 << index[v]
                adj_mask[index[v]] |= 1 << index[u]
        memo: dict[int, int] = {}

        def match(mask: int) -> int:
            if mask == 0:
                return 0
            cached = memo.get(mask)
            if cached is not None:
                return cached
            v = (mask & -mask).bit_length() - 1
            rest = mask & ~(1 << v)
            best = match(rest)  # leave v unmatched
            nb = adj_mask[v] & rest
            while nb:
                u = (nb & -nb).bit_length() - 1
                nb &= nb - 1
                best = max(best, 1 + match(rest & ~(1 << u)))
            memo[mask] = best
            return best

        total += match((1 << len(nodes)) - 1)
    return total


def clique_relaxation_opt(graph: Graph) -> float:
    """Optimal value of the clique relaxation via full clique enumeration."""
    if graph.n_nodes > _CLIQUE_BRUTE_CAP:
        raise ValueError(
            f"instance too large for brute force ({graph.n_nodes} nodes > "
            f"{_CLIQUE_BRUTE_CAP})"
        )
    rows = [clique_constraint(graph, c) for c in enumerate_maximal_cliques(graph)]
    lp = LinearProgram(
        objective=np.ones(graph.n_nodes),
        rows=rows,
        ub=np.ones(graph.n_nodes),
    )
    return solve_lp(lp).value


# -- oracles and instance presets -------------------------------------------


def degree_constraint(graph: Graph, node: int) -> Constraint:
    a = np.zeros(graph.n_edges)
    for j in graph.incident_edges()[node]:
        a[j] = 1.0
    return Constraint(a, 1.0, ConstraintForm.POLAR, f"degree:{node}")


def matching_initial_rows(graph: Graph, preset: str) -> list[Constraint]:
    """Initial constraints: variable upper bounds, plus degree rows for 'basic'."""
    rows = []
    for j in range(graph.n_edges):
        e = np.zeros(graph.n_edges)
        e[j] = 1.0
        rows.append(Constraint(e, 1.0, ConstraintForm.POLAR, f"ub:{j}"))
    if preset == "basic":
        inc = graph.incident_edges()
        for v in range(graph.n_nodes):
            if inc[v]:
                rows.append(degree_constraint(graph, v))
    elif preset != "upper_bound":
        raise ValueError(f"unknown constraint preset {preset!r}")
    return rows


def stableset_initial_rows(graph: Graph, preset: str) -> list[Constraint]:
    """Initial constraints: variable upper bounds, plus edge rows for 'basic'."""
    rows = []
    for v in range(graph.n_nodes):
        e = np.zeros(graph.n_nodes)
        e[v] = 1.0
        rows.append(Constraint(e, 1.0, ConstraintForm.POLAR, f"ub:{v}"))
    if preset == "basic":
        for u, v in graph.edges:
            a = np.zeros(graph.n_nodes)
            a[u] = a[v] = 1.0
            rows.append(Constraint(a, 1.0, ConstraintForm.POLAR, f"edge:{u}|{v}"))
    elif preset != "upper_bound":
        raise ValueError(f"unknown constraint preset {preset!r}")
    return rows


class MatchingOracle(SeparationOracle):
    """Separation for the matching polytope: degree rows and odd sets.

    Returns the row with the biggest absolute violation; degree rows win
    exact ties.  Logs a warning when the odd-set size cap was binding for a
    query declared inside.
    """

    def __init__(self, graph: Graph, max_set_size: int = 9):
        self.graph = graph
        self.max_set_size = max_set_size
        self.dimension = graph.n_edges
        self.radius_outer = float(np.sqrt(graph.n_edges))
        self.radius_inner = 1.0 / float(np.sqrt(graph.n_edges))
        self._incidence = graph.incident_edges()
        self._warned_cap = False

    def separate(self, x) -> SeparationResult:
        x = as_vector(x)
        if np.min(x) < -VIOLATION_TOL:
            raise ValueError("query outside the nonnegative orthant")
        inc = self._incidence
        best_deg, best_node = 0.0, None
        for v in range(self.graph.n_nodes):
            if not inc[v]:
                continue
            viol = float(sum(x[j] for j in inc[v])) - 1.0
            if viol > best_deg:
                best_deg, best_node = viol, v
        odd_viol, subset = best_violated_oddset(self.graph, x, self.max_set_size)
        if best_deg >= odd_viol and best_deg > VIOLATION_TOL:
            cons = degree_constraint(self.graph, best_node)
            return Violated(cons, cons.violation(x))
        if odd_viol > VIOLATION_TOL:
            cons = oddset_constraint(self.graph, subset)
            return Violated(cons, cons.violation(x))
        if not self._warned_cap:
            comp, n_comp = _support_components(self.graph, x)
            if n_comp and max(np.bincount(comp[comp >= 0])) > self.max_set_size:
                self._warned_cap = True
                log.warning(
                    "odd-set size cap %d was binding for an inside verdict; "
                    "larger violated odd sets may exist",
                    self.max_set_size,
                )
        return Inside()


class StableSetOracle(SeparationOracle):
    """Separation for the clique relaxation via exact max-weight clique."""

    def __init__(self, graph: Graph):
        self.graph = graph
        self.dimension = graph.n_nodes
        self.radius_outer = float(np.sqrt(graph.n_nodes))
        self.radius_inner = 1.0 / float(np.sqrt(graph.n_nodes))

    def separate(self, x) -> SeparationResult:
        x = as_vector(x)
        if np.min(x) < -VIOLATION_TOL:
            raise ValueError("query outside the nonnegative orthant")
        return separate_clique(self.graph, x)
