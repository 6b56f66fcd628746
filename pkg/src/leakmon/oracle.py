"""Small exact engines used to verify the stochastic model.

Dense statevector simulation of qubit/qutrit registers (leaked-plaquette
algebra, gauge-measurement statistics), brute-force hidden-path posteriors,
exhaustive minimum-weight matching, and exact single-qubit channel twirls.
Everything here is test-side machinery; nothing is used by the production
simulation path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

DIM_CAP = 4096

# single-qubit operators
_I2 = np.eye(2, dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_PAULIS = {
    "I": _I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def itilde() -> np.ndarray:
    return np.diag([1.0, 1.0, -1.0]).astype(complex)


def ztilde(phi_stat: float) -> np.ndarray:
    return np.diag([1.0, -1.0, -np.exp(-1j * phi_stat)])


def xtilde(phi_stat: float) -> np.ndarray:
    m = np.zeros((3, 3), dtype=complex)
    m[0, 1] = m[1, 0] = 1.0
    m[2, 2] = -np.exp(-1j * phi_stat)
    return m


def htilde() -> np.ndarray:
    m = np.eye(3, dtype=complex)
    m[:2, :2] = _H
    return m


def cz_leaky(phi_stat: float) -> np.ndarray:
    """CZ between an ancilla qubit and a leakage-prone qutrit (L1 -> 0 limit).

    Block form |0><0|_A (x) Itilde + |1><1|_A (x) Ztilde, ordered (ancilla,
    qutrit); the restriction to the computational block is the ideal CZ.
    """
    op = np.zeros((6, 6), dtype=complex)
    op[:3, :3] = itilde()
    op[3:, 3:] = ztilde(phi_stat)
    return op


class MixedRegister:
    """Dense statevector over a list of 2- and 3-dimensional sites."""

    def __init__(self, dims: tuple[int, ...], state: np.ndarray | None = None):
        total = int(np.prod(dims))
        if total > DIM_CAP:
            raise ValueError(f"register dimension {total} exceeds cap {DIM_CAP}")
        self.dims = tuple(dims)
        if state is None:
            state = np.zeros(total, dtype=complex)
            state[0] = 1.0
        self.state = np.asarray(state, dtype=complex).reshape(self.dims)

    def copy(self) -> "MixedRegister":
        return MixedRegister(self.dims, self.state.copy())

    def set_basis_state(self, levels: tuple[int, ...]) -> None:
        self.state[...] = 0.0
        self.state[levels] = 1.0

    def apply_1(self, site: int, u: np.ndarray) -> None:
        self.state = np.moveaxis(
            np.tensordot(u, self.state, axes=([1], [site])), 0, site
        )

    def apply_2(self, site_a: int, site_b: int, u: np.ndarray) -> None:
        da, db = self.dims[site_a], self.dims[site_b]
        psi = np.moveaxis(self.state, (site_a, site_b), (0, 1))
        rest = psi.shape[2:]
        psi = psi.reshape(da * db, -1)
        psi = u.reshape(da * db, da * db) @ psi
        psi = psi.reshape((da, db) + rest)
        self.state = np.moveaxis(psi, (0, 1), (site_a, site_b))

    def norm(self) -> float:
        return float(np.linalg.norm(self.state))

    def measure_branches(self, site: int) -> list[tuple[int, float, "MixedRegister"]]:
        """All projective computational-basis branches of one site."""
        branches = []
        for level in range(self.dims[site]):
            proj = np.moveaxis(self.state, site, 0).copy()
            mask = np.zeros(self.dims[site], dtype=complex)
            mask[level] = 1.0
            proj = proj * mask[(slice(None),) + (None,) * (proj.ndim - 1)]
            proj = np.moveaxis(proj, 0, site)
            p = float(np.vdot(proj, proj).real)
            if p > 1e-15:
                out = MixedRegister(self.dims, proj / math.sqrt(p))
                branches.append((level, p, out))
        return branches


def _restrict(op: np.ndarray, dims: tuple[int, ...], qutrit_site: int,
              level: int | slice) -> np.ndarray:
    """Restrict a multi-site operator to a fixed level (or block) of the qutrit."""
    shape = dims + dims
    op = op.reshape(shape)
    n = len(dims)
    op = np.take(op, level if isinstance(level, int) else range(2), axis=qutrit_site)
    # careful with axis shifts when the ket index was consumed
    if isinstance(level, int):
        op = np.take(op, level, axis=qutrit_site + n - 1)
    else:
        op = np.take(op, range(2), axis=qutrit_site + n)
    return op


def anticommutation_checks(phi_stat: float) -> dict[str, float]:
    """Norms of the leaked-plaquette (anti)commutation identities.

    All three must vanish for every conditional phase: the computational
    restriction of {Ztilde, Xtilde}, the leaked restriction of
    [Ztilde, Xtilde], and the leaked-qutrit restriction of the weight-4
    check anticommutator (which reduces to the weight-3 identity).
    """
    zt, xt = ztilde(phi_stat), xtilde(phi_stat)
    anti = zt @ xt + xt @ zt
    comm = zt @ xt - xt @ zt
    norm_anti_c = float(np.linalg.norm(anti[:2, :2]))
    norm_comm_l = float(abs(comm[2, 2]))

    # weight-4 operators on (qutrit a, qubits b, c, d)
    def kron(*ops: np.ndarray) -> np.ndarray:
        out = ops[0]
        for o in ops[1:]:
            out = np.kron(out, o)
        return out

    z4 = kron(zt, _PAULIS["Z"], _PAULIS["Z"], _PAULIS["Z"])
    x4 = kron(xt, _PAULIS["X"], _PAULIS["X"], _PAULIS["X"])
    anti4 = z4 @ x4 + x4 @ z4
    dims = (3, 2, 2, 2)
    anti4_la = _restrict(anti4, dims, 0, 2)
    return {
        "anti_computational": norm_anti_c,
        "comm_leaked": norm_comm_l,
        "anti_weight4_leaked": float(np.linalg.norm(anti4_la)),
    }


def projector_residual(phi_stat: float) -> float:
    """Projectivity defect of the leaked-block back-action of an X-type check.

    The restriction of M_+- to the leaked block is defined up to a global
    phase, so projectivity is tested on the POVM element E = M^dag M;
    || E^2 - E || vanishes exactly at phi in {0, pi}, where the gauge
    checks become projective weight-3 parity measurements.
    """
    dims = (3, 2, 2, 2)
    it4 = np.kron(itilde(), np.eye(8, dtype=complex))
    xt = xtilde(phi_stat)
    x4 = np.kron(xt, _PAULIS["X"])
    x4 = np.kron(x4, _PAULIS["X"])
    x4 = np.kron(x4, _PAULIS["X"])
    worst = 0.0
    for sign in (+1.0, -1.0):
        m = (it4 + sign * x4) / 2.0
        m_la = _restrict(m, dims, 0, 2).reshape(8, 8)
        e = m_la.conj().T @ m_la
        worst = max(worst, float(np.linalg.norm(e @ e - e)))
    return worst


# ---------------------------------------------------------------------------
# Exact gauge-measurement statistics of a leaked bulk data qubit
# ---------------------------------------------------------------------------

@dataclass
class PlaquetteStats:
    """Exact outcome statistics of the interleaved gauge-check protocol."""

    marginal_p1: np.ndarray  # (n_cycles, 4) P(outcome = 1) for X1, X2, Z1, Z2
    supercheck_defect: dict[str, float]  # defect prob between last two cycles
    gauge_defect: np.ndarray  # (4,) outcome-change prob between last two cycles


def plaquette_outcome_distribution(
    phi_stat: float,
    n_cycles: int = 3,
    initial_bits: dict[str, int] | None = None,
) -> PlaquetteStats:
    """Enumerate the exact gauge-check statistics around a leaked bulk qubit.

    The register holds the leaked qutrit (pinned in |2>), its eight distinct
    neighbor data qubits with the Surface-17 supports, and one sequentially
    reused measurement ancilla.  Each cycle measures the two X-type gauge
    checks and then the two Z-type ones, mirroring the in-circuit ordering.
    """
    neighbors = ["D0", "D1", "D2", "D3", "D5", "D6", "D7", "D8"]
    site_of = {q: i + 1 for i, q in enumerate(neighbors)}  # site 0 = leaked qutrit
    anc = len(neighbors) + 1
    dims = (3,) + (2,) * len(neighbors) + (2,)

    # gauge supports of D4's checks with D4 removed
    gauges = [
        ("X1", "X", ("D0", "D1", "D3")),
        ("X2", "X", ("D5", "D7", "D8")),
        ("Z1", "Z", ("D1", "D2", "D5")),
        ("Z2", "Z", ("D3", "D6", "D7")),
    ]

    reg = MixedRegister(dims)
    levels = [2] + [0] * len(neighbors) + [0]
    if initial_bits:
        for q, b in initial_bits.items():
            levels[site_of[q]] = b
    reg.set_basis_state(tuple(levels))

    czl = cz_leaky(phi_stat)
    cz2 = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)

    def measure(reg: MixedRegister, kind: str, support: tuple[str, ...]):
        """One ancilla-based gauge measurement; returns outcome branches."""
        work = reg.copy()
        if kind == "X":
            work.apply_1(0, htilde())
            for q in support:
                work.apply_1(site_of[q], _H)
        work.apply_1(anc, _H)
        work.apply_2(anc, 0, czl)
        for q in support:
            work.apply_2(anc, site_of[q], cz2)
        work.apply_1(anc, _H)
        if kind == "X":
            work.apply_1(0, htilde())
            for q in support:
                work.apply_1(site_of[q], _H)
        out = []
        for level, p, collapsed in work.measure_branches(anc):
            if level == 1:  # reset the ancilla for reuse
                flip = np.zeros((2, 2), dtype=complex)
                flip[0, 1] = flip[1, 0] = 1.0
                collapsed.apply_1(anc, flip)
            out.append((level, p, collapsed))
        return out

    # breadth-first enumeration over all measurement branches
    branches: list[tuple[float, np.ndarray, MixedRegister]] = [
        (1.0, np.zeros((n_cycles, 4), dtype=np.uint8), reg)
    ]
    for cycle in range(n_cycles):
        for gi, (_, kind, support) in enumerate(gauges):
            new_branches = []
            for prob, outs, state in branches:
                for level, p, collapsed in measure(state, kind, support):
                    rec = outs.copy()
                    rec[cycle, gi] = level
                    new_branches.append((prob * p, rec, collapsed))
            branches = new_branches

    probs = np.array([b[0] for b in branches])
    outs = np.array([b[1] for b in branches])  # (n_branches, n_cycles, 4)
    assert abs(probs.sum() - 1.0) < 1e-9

    marginal_p1 = np.tensordot(probs, outs, axes=(0, 0))
    super_x = outs[:, :, 0] ^ outs[:, :, 1]
    super_z = outs[:, :, 2] ^ outs[:, :, 3]
    defect = {
        "X": float(probs @ (super_x[:, -1] ^ super_x[:, -2])),
        "Z": float(probs @ (super_z[:, -1] ^ super_z[:, -2])),
    }
    gauge_defect = np.tensordot(probs, outs[:, -1, :] ^ outs[:, -2, :], axes=(0, 0))
    return PlaquetteStats(
        marginal_p1=marginal_p1, supercheck_defect=defect, gauge_defect=gauge_defect
    )


# ---------------------------------------------------------------------------
# Brute-force HMM posterior
# ---------------------------------------------------------------------------

def hmm_brute_force(a_matrix: np.ndarray, likelihoods: np.ndarray) -> np.ndarray:
    """Exact posterior over the final hidden state by summing all paths.

    `a_matrix` is column-stochastic (new state indexes rows); `likelihoods`
    has shape (n_steps, n_states) and holds the emission likelihood of each
    step's observation under each state.  The chain starts in state 0 with
    certainty and takes one transition before the first observation.
    """
    likelihoods = np.asarray(likelihoods, dtype=float)
    n, n_states = likelihoods.shape
    if n > 16:
        raise ValueError("path enumeration capped at 16 steps")
    weights = np.zeros(n_states)
    for path in itertools.product(range(n_states), repeat=n):
        w = 1.0
        prev = 0
        for step, s in enumerate(path):
            w *= a_matrix[s, prev] * likelihoods[step, s]
            prev = s
        weights[path[-1]] += w
    total = weights.sum()
    if total <= 0.0:
        raise FloatingPointError("all hidden paths have zero likelihood")
    return weights / total


# ---------------------------------------------------------------------------
# Exhaustive minimum-weight matching (decoder oracle)
# ---------------------------------------------------------------------------

def brute_force_matching(
    pair_weights: np.ndarray, boundary_weights: np.ndarray
) -> tuple[float, list[tuple[int, int]]]:
    """Minimum-weight perfect matching with a duplicable boundary, by recursion.

    Every defect is either paired with another defect or matched to the
    boundary (index -1).  Exponential; intended for small oracle instances.
    """
    n = len(boundary_weights)

    def solve(remaining: tuple[int, ...]) -> tuple[float, list[tuple[int, int]]]:
        if not remaining:
            return 0.0, []
        first, rest = remaining[0], remaining[1:]
        best_w, best_m = solve(rest)
        best_w += boundary_weights[first]
        best_m = [(first, -1)] + best_m
        for k, j in enumerate(rest):
            sub = rest[:k] + rest[k + 1:]
            w, m = solve(sub)
            w += pair_weights[first, j]
            if w < best_w - 1e-12:
                best_w, best_m = w, [(first, j)] + m
        return best_w, best_m

    return solve(tuple(range(n)))


# ---------------------------------------------------------------------------
# Exact single-qubit channel twirls
# ---------------------------------------------------------------------------

def _ptm(kraus: list[np.ndarray]) -> np.ndarray:
    labels = "IXYZ"
    r = np.zeros((4, 4))
    for i, pi in enumerate(labels):
        for j, pj in enumerate(labels):
            acc = 0.0
            for k in kraus:
                acc += np.trace(_PAULIS[pi] @ k @ _PAULIS[pj] @ k.conj().T).real
            r[i, j] = acc / 2.0
    return r


def exact_damping_twirl(t_ns: float, t1_us: float, tphi_us: float) -> tuple[float, float, float]:
    """Pauli twirl of the exact amplitude+phase damping channel, from Kraus."""
    t = t_ns * 1e-3
    gamma = 1.0 - math.exp(-t / t1_us)
    k_amp = [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]
    p_deph = (1.0 - math.exp(-t / tphi_us)) / 2.0
    k_deph = [
        math.sqrt(1 - p_deph) * _PAULIS["I"],
        math.sqrt(p_deph) * _PAULIS["Z"],
    ]
    kraus = [d @ a for d in k_deph for a in k_amp]
    r = _ptm(kraus)
    rx, ry, rz = r[1, 1], r[2, 2], r[3, 3]
    px = (1 + rx - ry - rz) / 4.0
    py = (1 - rx + ry - rz) / 4.0
    pz = (1 - rx - ry + rz) / 4.0
    return float(px), float(py), float(pz)


def exact_rz_twirl(phi: float) -> tuple[float, float, float]:
    rz = np.array([[1, 0], [0, np.exp(1j * phi)]], dtype=complex)
    r = _ptm([rz])
    rx, ry, rzz = r[1, 1], r[2, 2], r[3, 3]
    return (
        float((1 + rx - ry - rzz) / 4.0),
        float((1 - rx + ry - rzz) / 4.0),
        float((1 - rx - ry + rzz) / 4.0),
    )


def twirl_compare(t_ns: float, t1_us: float, tphi_us: float) -> float:
    """Max deviation between the closed-form twirl and the exact-channel twirl."""
    from .errmodel import twirl_damping

    exact = exact_damping_twirl(t_ns, t1_us, tphi_us)
    closed = twirl_damping(t_ns, t1_us, tphi_us)
    return float(
        max(
            abs(exact[0] - closed.px),
            abs(exact[1] - closed.py),
            abs(exact[2] - closed.pz),
        )
    )
