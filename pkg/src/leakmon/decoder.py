"""Defect-graph construction, edge-weight training and exact MWPM decoding.

Edge probabilities are estimated from leakage-free simulated data through
the independent-Bernoulli-XOR model: for nodes i, j with covariance C and
A_i = 1 - 2<d_i>, the shared-edge probability is
p = 1/2 - 1/2 sqrt(1 - 4C / (A_i A_j + 4C)), and each node's boundary edge
absorbs the residual single-defect rate.  Weights are w = ln((1-p)/p).

Matching is exact: defects are swept in time order with a dynamic program
over the set of still-open defects.  A pair whose path weight exceeds the
sum of the two boundary weights can never appear in an optimal matching,
which bounds the open set because every graph edge spans at most one
cycle.  A brute-force enumerator in `oracle` provides the independent
check.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numba.typed import Dict as NumbaDict
from numba.core import types as nbtypes

from .lattice import LOGICAL_X_SUPPORT, LOGICAL_Z_SUPPORT, Layout
from .sim import ANCILLA_ORDER, RunDataset


class FitError(RuntimeError):
    """The logical-fidelity decay could not be fitted."""


@dataclass
class DefectGraph:
    """Weighted syndrome graph for one check type over T+1 layers."""

    kind: str
    n_checks: int
    n_layers: int  # includes the final data-readout layer for Z
    edges: list[tuple[int, int, float, int]]  # (node_u, node_v, p, crossing)
    boundary: dict[int, tuple[float, int]]  # node -> (p, crossing)

    def node(self, check: int, layer: int) -> int:
        return check * self.n_layers + layer

    @property
    def n_nodes(self) -> int:
        return self.n_checks * self.n_layers

    def edge_weight(self, p: float) -> float:
        return math.log((1.0 - p) / p)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_checks": self.n_checks,
            "n_layers": self.n_layers,
            "edges": [[u, v, p, c] for u, v, p, c in self.edges],
            "boundary": {str(k): [p, c] for k, (p, c) in self.boundary.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DefectGraph":
        return cls(
            kind=d["kind"],
            n_checks=d["n_checks"],
            n_layers=d["n_layers"],
            edges=[(int(u), int(v), float(p), int(c)) for u, v, p, c in d["edges"]],
            boundary={int(k): (float(p), int(c)) for k, (p, c) in d["boundary"].items()},
        )


# ---------------------------------------------------------------------------
# Edge estimation
# ---------------------------------------------------------------------------

def _spitz_probability(mean_i, mean_j, mean_ij) -> float:
    """Shared-edge probability under the independent-Bernoulli-XOR model."""
    cov = mean_ij - mean_i * mean_j
    denom = (1.0 - 2.0 * mean_i) * (1.0 - 2.0 * mean_j) + 4.0 * cov
    if cov <= 0.0 or denom <= 0.0:
        return -1.0
    arg = 1.0 - 4.0 * cov / denom
    if arg <= 0.0:
        return 0.45
    return 0.5 - 0.5 * math.sqrt(arg)


def _adjacent_checks(layout: Layout, kind: str) -> list[tuple[int, int, str]]:
    """Pairs of same-type checks sharing a data qubit, with the shared qubit."""
    checks = [layout.checks[f"{kind}{i}"] for i in range(4)]
    out = []
    for i in range(4):
        for j in range(i + 1, 4):
            shared = sorted(set(checks[i].support) & set(checks[j].support))
            if shared:
                if len(shared) != 1:
                    raise ValueError("distance-3 layout: expected single shared qubit")
                out.append((i, j, shared[0]))
    return out


def _boundary_data(layout: Layout, kind: str) -> dict[int, list[str]]:
    """Data qubits appearing in exactly one check of this type, per check."""
    membership: dict[str, list[int]] = {}
    for i in range(4):
        for q in layout.checks[f"{kind}{i}"].support:
            membership.setdefault(q, []).append(i)
    out: dict[int, list[str]] = {i: [] for i in range(4)}
    for q, owners in membership.items():
        if len(owners) == 1:
            out[owners[0]].append(q)
    return out


def defect_layers(dataset: RunDataset, kind: str = "Z") -> np.ndarray:
    """(R, 4, T+1) defect array; for Z the last layer comes from the readout."""
    offset = 0 if kind == "X" else 4
    defects = dataset.defects()[:, offset: offset + 4, :]
    if kind == "X":
        return defects
    T = dataset.n_cycles
    e_last = dataset.declared[:, 4:, T - 1].astype(np.uint8)
    if T >= 2:
        e_last = e_last ^ dataset.declared[:, 4:, T - 2]
    d_final = dataset.zsnap[:, :, T - 1] ^ e_last
    return np.concatenate([defects, d_final[:, :, None]], axis=2)


def estimate_edge_probs(
    dataset: RunDataset,
    layout: Layout,
    kind: str = "Z",
    floor: float = 1e-4,
) -> DefectGraph:
    """Train a defect graph on a leakage-free dataset.

    Candidate edges are the schedule-induced ones: time-like, space-like
    through a shared data qubit, and the two space-time diagonals of each
    adjacent pair.  Estimates that come out non-positive are clipped to the
    floor.
    """
    d = defect_layers(dataset, kind).astype(np.float64)
    n_layers = d.shape[2]
    means = d.mean(axis=0)  # (4, T+1)

    logical = set(LOGICAL_Z_SUPPORT if kind == "Z" else LOGICAL_X_SUPPORT)
    adjacency = _adjacent_checks(layout, kind)
    graph = DefectGraph(kind=kind, n_checks=4, n_layers=n_layers,
                        edges=[], boundary={})
    clipped = 0

    def add_edge(a, ta, b, tb, crossing) -> None:
        nonlocal clipped
        mean_ij = float((d[:, a, ta] * d[:, b, tb]).mean())
        p = _spitz_probability(float(means[a, ta]), float(means[b, tb]), mean_ij)
        if p < 0.0:
            p = floor
            clipped += 1
        p = min(max(p, floor), 0.45)
        graph.edges.append((graph.node(a, ta), graph.node(b, tb), p, crossing))

    for a in range(4):
        for t in range(n_layers - 1):
            add_edge(a, t, a, t + 1, 0)
    for a, b, shared in adjacency:
        crossing = int(shared in logical)
        for t in range(n_layers):
            add_edge(a, t, b, t, crossing)
        for t in range(n_layers - 1):
            add_edge(a, t, b, t + 1, crossing)
            add_edge(b, t, a, t + 1, crossing)

    if clipped:
        warnings.warn(
            f"{clipped} edge correlation estimates were non-positive and "
            f"clipped to the floor {floor}", RuntimeWarning,
        )

    # boundary edges from the residual single-defect rates
    incident: dict[int, list[float]] = {}
    for u, v, p, _ in graph.edges:
        incident.setdefault(u, []).append(p)
        incident.setdefault(v, []).append(p)
    bdata = _boundary_data(layout, kind)
    for a in range(4):
        qs = bdata[a]
        crossings = {int(q in logical) for q in qs} if qs else {0}
        if len(crossings) != 1:
            raise ValueError("ambiguous boundary crossing parity")
        crossing = crossings.pop()
        for t in range(n_layers):
            node = graph.node(a, t)
            prod = 1.0
            for p in incident.get(node, []):
                prod *= 1.0 - 2.0 * p
            a_i = 1.0 - 2.0 * float(means[a, t])
            if qs and prod > 0.0:
                p_b = 0.5 * (1.0 - a_i / prod)
            else:
                p_b = floor
            p_b = min(max(p_b, floor), 0.45)
            graph.boundary[node] = (p_b, crossing)
    return graph


# ---------------------------------------------------------------------------
# Exact matching
# ---------------------------------------------------------------------------

@dataclass
class MatchingTables:
    """All-pairs shortest-path weights and logical-crossing parities."""

    dist: np.ndarray  # (N, N) float64
    par: np.ndarray  # (N, N) uint8
    dist_b: np.ndarray  # (N,)
    par_b: np.ndarray  # (N,)
    node_time: np.ndarray  # (N,) layer index of each node


def build_matching_tables(graph: DefectGraph) -> MatchingTables:
    n = graph.n_nodes
    adj: list[list[tuple[int, float, int]]] = [[] for _ in range(n + 1)]
    bnode = n  # virtual boundary vertex
    for u, v, p, c in graph.edges:
        w = graph.edge_weight(p)
        adj[u].append((v, w, c))
        adj[v].append((u, w, c))
    for u, (p, c) in graph.boundary.items():
        w = graph.edge_weight(p)
        adj[u].append((bnode, w, c))
        adj[bnode].append((u, w, c))

    dist = np.full((n, n + 1), np.inf)
    par = np.zeros((n, n + 1), dtype=np.uint8)
    for src in range(n):
        dd = np.full(n + 1, np.inf)
        pp = np.zeros(n + 1, dtype=np.uint8)
        dd[src] = 0.0
        heap = [(0.0, src)]
        while heap:
            du, u = heapq.heappop(heap)
            if du > dd[u] + 1e-12:
                continue
            for v, w, c in adj[u]:
                if du + w < dd[v] - 1e-12:
                    dd[v] = du + w
                    pp[v] = pp[u] ^ c
                    heapq.heappush(heap, (dd[v], v))
        dist[src] = dd
        par[src] = pp

    node_time = np.array([i % graph.n_layers for i in range(n)], dtype=np.int64)
    return MatchingTables(
        dist=dist[:, :n], par=par[:, :n],
        dist_b=dist[:, bnode].copy(), par_b=par[:, bnode].copy(),
        node_time=node_time,
    )


@njit(cache=True)
def _sweep_match(w, b, par, par_b, adj, last_partner):
    """Exact min-weight matching with boundary via a time-frontier DP.

    Nodes arrive in time order; each either pairs with a still-open
    admissible node or eventually closes to the boundary.  States are
    bitmasks over dynamically assigned slots of the open set.
    """
    k = w.shape[0]
    if k == 0:
        return 0.0, 0
    slot_of = np.full(k, -1, dtype=np.int64)
    slot_owner = np.full(64, -1, dtype=np.int64)

    costs = NumbaDict.empty(nbtypes.int64, nbtypes.float64)
    pars = NumbaDict.empty(nbtypes.int64, nbtypes.int64)
    costs[0] = 0.0
    pars[0] = 0

    for i in range(k):
        # assign a slot whose previous owner was already force-closed
        slot = -1
        for s in range(64):
            owner = slot_owner[s]
            if owner < 0 or last_partner[owner] < i:
                slot = s
                break
        if slot < 0:
            raise RuntimeError("matching frontier exceeded 64 open defects")
        slot_of[i] = slot
        slot_owner[slot] = i
        bit = np.int64(1) << slot

        new_costs = NumbaDict.empty(nbtypes.int64, nbtypes.float64)
        new_pars = NumbaDict.empty(nbtypes.int64, nbtypes.int64)
        for mask in costs:
            cost = costs[mask]
            parity = pars[mask]
            # open node i
            nm = mask | bit
            if nm not in new_costs or cost < new_costs[nm] - 1e-15:
                new_costs[nm] = cost
                new_pars[nm] = parity
            # or pair it with an open admissible node
            rem = mask
            while rem:
                low = rem & (-rem)
                s = 0
                t = low
                while t > 1:
                    t >>= 1
                    s += 1
                j = slot_owner[s]
                rem ^= low
                if j >= 0 and adj[j, i]:
                    nm2 = mask & ~low
                    c2 = cost + w[j, i]
                    p2 = parity ^ par[j, i]
                    if nm2 not in new_costs or c2 < new_costs[nm2] - 1e-15:
                        new_costs[nm2] = c2
                        new_pars[nm2] = p2
                    elif abs(c2 - new_costs[nm2]) <= 1e-15 and p2 == new_pars[nm2]:
                        pass
        costs, pars = new_costs, new_pars

        # force-close open nodes with no admissible partner left
        expired = np.int64(0)
        for s in range(64):
            owner = slot_owner[s]
            if owner >= 0 and last_partner[owner] <= i:
                expired |= np.int64(1) << s
        if expired:
            new_costs = NumbaDict.empty(nbtypes.int64, nbtypes.float64)
            new_pars = NumbaDict.empty(nbtypes.int64, nbtypes.int64)
            for mask in costs:
                cost = costs[mask]
                parity = pars[mask]
                close = mask & expired
                rem = close
                while rem:
                    low = rem & (-rem)
                    s = 0
                    t = low
                    while t > 1:
                        t >>= 1
                        s += 1
                    rem ^= low
                    owner = slot_owner[s]
                    cost += b[owner]
                    parity ^= par_b[owner]
                nm = mask & ~expired
                if nm not in new_costs or cost < new_costs[nm] - 1e-15:
                    new_costs[nm] = cost
                    new_pars[nm] = parity
            costs, pars = new_costs, new_pars

    best = np.inf
    best_par = 0
    for mask in costs:
        cost = costs[mask]
        parity = pars[mask]
        rem = mask
        while rem:
            low = rem & (-rem)
            s = 0
            t = low
            while t > 1:
                t >>= 1
                s += 1
            rem ^= low
            owner = slot_owner[s]
            cost += b[owner]
            parity ^= par_b[owner]
        if cost < best - 1e-15:
            best = cost
            best_par = parity
    return best, best_par


def _matching_inputs(tables: MatchingTables, nodes: np.ndarray):
    """Pairwise/boundary weight blocks for one defect multiset, time-sorted."""
    order = np.argsort(tables.node_time[nodes], kind="stable")
    nodes = nodes[order]
    w = tables.dist[np.ix_(nodes, nodes)]
    par = tables.par[np.ix_(nodes, nodes)]
    b = tables.dist_b[nodes]
    par_b = tables.par_b[nodes]
    adj = w < (b[:, None] + b[None, :]) - 1e-12
    np.fill_diagonal(adj, False)
    k = len(nodes)
    last_partner = np.full(k, -1, dtype=np.int64)
    for i in range(k):
        partners = np.nonzero(adj[i])[0]
        if len(partners):
            last_partner[i] = partners.max()
    return nodes, w, b, par, par_b, adj, last_partner


def match_defects(tables: MatchingTables, nodes: np.ndarray) -> tuple[float, int]:
    """Minimum matching weight and logical-crossing parity for a defect set."""
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        return 0.0, 0
    nodes, w, b, par, par_b, adj, last_partner = _matching_inputs(tables, nodes)
    cost, parity = _sweep_match(w, b, par.astype(np.int64), par_b.astype(np.int64),
                                adj, last_partner)
    return float(cost), int(parity)


def match_defects_pairs(
    tables: MatchingTables, nodes: np.ndarray
) -> tuple[float, int, list[tuple[int, int]]]:
    """Like `match_defects` but also reconstructs the matched pairs.

    Pure-python twin of the swept DP, with backpointers; pairs use the
    original node ids with -1 for the boundary.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        return 0.0, 0, []
    nodes, w, b, par, par_b, adj, last_partner = _matching_inputs(tables, nodes)
    k = len(nodes)

    states: dict[frozenset, tuple[float, int, tuple]] = {
        frozenset(): (0.0, 0, ())
    }
    for i in range(k):
        new_states: dict[frozenset, tuple[float, int, tuple]] = {}

        def push(key, cost, parity, actions):
            cur = new_states.get(key)
            if cur is None or cost < cur[0] - 1e-15:
                new_states[key] = (cost, parity, actions)

        for open_set, (cost, parity, actions) in states.items():
            push(open_set | {i}, cost, parity, actions)
            for j in open_set:
                if adj[j, i]:
                    push(open_set - {j}, cost + w[j, i], parity ^ int(par[j, i]),
                         actions + ((j, i),))
        states = new_states

        expired = {j for j in range(i + 1) if last_partner[j] <= i}
        if expired:
            new_states = {}
            for open_set, (cost, parity, actions) in states.items():
                close = open_set & expired
                for j in close:
                    cost += b[j]
                    parity ^= int(par_b[j])
                    actions = actions + ((j, -1),)
                key = frozenset(open_set - close)
                cur = new_states.get(key)
                if cur is None or cost < cur[0] - 1e-15:
                    new_states[key] = (cost, parity, actions)
            states = new_states

    best = (math.inf, 0, ())
    for open_set, (cost, parity, actions) in states.items():
        for j in open_set:
            cost += b[j]
            parity ^= int(par_b[j])
            actions = actions + ((j, -1),)
        if cost < best[0] - 1e-15:
            best = (cost, parity, actions)

    pairs = []
    for a, bb in best[2]:
        if bb == -1:
            pairs.append((int(nodes[a]), -1))
        else:
            u, v = int(nodes[a]), int(nodes[bb])
            pairs.append((min(u, v), max(u, v)))
    return float(best[0]), int(best[1]), pairs


@dataclass
class LogicalResult:
    declared: int
    pairs: list[tuple[int, int]] = field(default_factory=list)
    weight: float = 0.0


class TrainedDecoder:
    """The trained Z-type defect graph plus its matching tables per prefix."""

    def __init__(self, graph: DefectGraph):
        self.graph = graph
        self.tables = build_matching_tables(graph)
        self.n_cycles = graph.n_layers - 1

    def _prefix_nodes(self, defects: np.ndarray, d_final: np.ndarray, n: int) -> np.ndarray:
        """Defect node ids using cycles < n plus the virtual final layer at n."""
        nl = self.graph.n_layers
        ids = []
        for a in range(4):
            for t in np.nonzero(defects[a, :n])[0]:
                ids.append(a * nl + t)
            if d_final[a]:
                ids.append(a * nl + n)
        return np.asarray(ids, dtype=np.int64)

    def decode_arrays(
        self,
        z_defects: np.ndarray,  # (4, T) in-circuit Z defects of one run
        declared_z: np.ndarray,  # (4, T) declared Z outcomes of the run
        zsnap: np.ndarray,  # (4, T) virtual readout eigenbits per cycle
        logical_readout: np.ndarray,  # (T,) virtual logical readout per cycle
        prefix: int | None = None,
        want_pairs: bool = False,
    ) -> LogicalResult:
        T = z_defects.shape[1]
        n = T if prefix is None else prefix
        e_last = declared_z[:, n - 1].copy()
        if n >= 2:
            e_last ^= declared_z[:, n - 2]
        d_final = zsnap[:, n - 1] ^ e_last
        nodes = self._prefix_nodes(z_defects, d_final, n)
        if want_pairs:
            weight, parity, pairs = match_defects_pairs(self.tables, nodes)
        else:
            weight, parity = match_defects(self.tables, nodes)
            pairs = []
        declared = int(logical_readout[n - 1]) ^ parity
        return LogicalResult(declared=declared, pairs=pairs, weight=weight)


def decode_run(
    dataset: RunDataset, decoder: TrainedDecoder, run: int,
    prefix: int | None = None, want_pairs: bool = False,
) -> LogicalResult:
    defects = dataset.defects()[run, 4:, :]
    return decoder.decode_arrays(
        defects, dataset.declared[run, 4:, :], dataset.zsnap[run],
        dataset.logical[run], prefix=prefix, want_pairs=want_pairs,
    )


def decode_dataset(
    dataset: RunDataset,
    decoder: TrainedDecoder,
    prefixes: list[int] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-run declared logical bit at each prefix length.

    Returns (prefixes, declared) with declared of shape (R, len(prefixes));
    success against the prepared |0>_L is simply `declared == 0`.
    """
    T = dataset.n_cycles
    prefixes = list(range(1, T + 1)) if prefixes is None else list(prefixes)
    defects = dataset.defects()[:, 4:, :]
    declared = np.zeros((dataset.n_runs, len(prefixes)), dtype=np.uint8)
    for r in range(dataset.n_runs):
        for pi, n in enumerate(prefixes):
            res = decoder.decode_arrays(
                defects[r], dataset.declared[r, 4:, :], dataset.zsnap[r],
                dataset.logical[r], prefix=n,
            )
            declared[r, pi] = res.declared
    return np.asarray(prefixes), declared


# ---------------------------------------------------------------------------
# Logical error rate fit
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    eps: float
    n0: float
    eps_ci: tuple[float, float] | None = None


def _fidelity_model(n, eps, n0):
    return 0.5 * (1.0 + (1.0 - 2.0 * eps) ** (n - n0))


def fit_error_rate(cycles: np.ndarray, fidelity: np.ndarray) -> tuple[float, float]:
    """Least-squares fit of the logical-fidelity decay; returns (eps, n0)."""
    from scipy.optimize import curve_fit

    cycles = np.asarray(cycles, dtype=float)
    fidelity = np.asarray(fidelity, dtype=float)
    if len(cycles) < 3:
        raise FitError("need at least 3 fidelity points")
    if np.any(fidelity < 0.5 - 0.1) or np.any(fidelity > 1.0 + 1e-9):
        raise FitError(f"fidelity values outside [0.4, 1]: {fidelity}")

    f_end = float(np.clip(fidelity[-1], 0.5 + 1e-9, 1.0))
    eps0 = 0.5 * (1.0 - (2.0 * f_end - 1.0) ** (1.0 / cycles[-1]))
    eps0 = float(np.clip(eps0, 1e-6, 0.49))
    try:
        popt, _ = curve_fit(
            _fidelity_model, cycles, fidelity, p0=[eps0, 0.0],
            bounds=([0.0, -10.0], [0.5, 10.0]), maxfev=20000,
        )
    except Exception as exc:  # pragma: no cover - scipy failure modes vary
        raise FitError(f"fidelity fit failed: {exc}") from exc
    eps, n0 = float(popt[0]), float(popt[1])
    resid = fidelity - _fidelity_model(cycles, eps, n0)
    if float(np.sqrt(np.mean(resid**2))) > 0.1:
        raise FitError(
            f"fit residual too large (rms {float(np.sqrt(np.mean(resid**2))):.3f}); "
            "curve is not a fidelity decay"
        )
    return eps, n0


def fit_error_rate_bootstrap(
    cycles: np.ndarray,
    success: np.ndarray,
    n_boot: int = 100,
    seed: int = 0,
) -> FitResult:
    """Fit with a bootstrap-over-runs confidence interval on eps."""
    cycles = np.asarray(cycles, dtype=float)
    success = np.asarray(success, dtype=float)
    fidelity = success.mean(axis=0)
    eps, n0 = fit_error_rate(cycles, fidelity)
    rng = np.random.default_rng(seed)
    rs = []
    n_runs = success.shape[0]
    for _ in range(n_boot):
        idx = rng.integers(0, n_runs, size=n_runs)
        try:
            e, _ = fit_error_rate(cycles, success[idx].mean(axis=0))
            rs.append(e)
        except FitError:
            continue
    if len(rs) >= 10:
        lo, hi = np.percentile(rs, [2.5, 97.5])
        ci = (float(lo), float(hi))
    else:
        ci = None
    return FitResult(eps=eps, n0=n0, eps_ci=ci)
