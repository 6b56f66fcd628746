"""Stochastic trajectory engine for Surface-17 under leakage.

Pauli frames propagate through the scheduled circuit while each
leakage-prone qubit carries a classical state in {C, L2, L3}.  Leakage and
seepage fire on the fluxed side of each CZ, leaked ancillas read out as 2
(declared 1), and checks touching a leaked data qubit produce gauge
outcomes whose pairwise product preserves the weight-6 supercheck parity.
Runs are simulated in vectorized chunks, each with its own counter-based
RNG stream, so datasets are reproducible and independent of worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errmodel import (
    CoherenceParams,
    LeakageParams,
    sample_phase_table,
    twirl_damping,
)
from .lattice import (
    CzLayer,
    FrequencyRole,
    Layout,
    LOGICAL_Z_SUPPORT,
    build_surface17,
)
from .readout import IqModel, build_model

C, L2, L3 = 0, 1, 2

DEFAULT_CHUNK = 4096

# record-column order of the ancillas in every dataset array
ANCILLA_ORDER = ("X0", "X1", "X2", "X3", "Z0", "Z1", "Z2", "Z3")
TRACKED_ORDER = ("D3", "D4", "D5") + ANCILLA_ORDER


@dataclass
class RunDataset:
    """Column-oriented record of a batch of runs (one row per run)."""

    m_raw: np.ndarray  # (R, 8, T) uint8, outcomes in {0,1,2}
    declared: np.ndarray  # (R, 8, T) uint8, 2 declared as 1
    analog: np.ndarray  # (R, 8, T) float32 in-phase samples
    truth: np.ndarray  # (R, 11, T) uint8 leak states, TRACKED_ORDER
    final: np.ndarray  # (R, 9) uint8 final data readout (leaked reads 1)
    zsnap: np.ndarray  # (R, 4, T) uint8 virtual perfect Z-layer per cycle
    logical: np.ndarray  # (R, T) uint8 virtual logical-Z readout per cycle
    meta: dict = field(default_factory=dict)

    @property
    def n_runs(self) -> int:
        return self.m_raw.shape[0]

    @property
    def n_cycles(self) -> int:
        return self.m_raw.shape[2]

    def defects(self) -> np.ndarray:
        return compute_defects(self.declared)

    def save(self, path) -> None:
        np.savez_compressed(
            path,
            m_raw=self.m_raw,
            declared=self.declared,
            analog=self.analog,
            truth=self.truth,
            final=self.final,
            zsnap=self.zsnap,
            logical=self.logical,
            meta=np.frombuffer(json.dumps(self.meta).encode(), dtype=np.uint8),
        )

    @classmethod
    def load(cls, path) -> "RunDataset":
        with np.load(path) as z:
            meta = json.loads(bytes(z["meta"].tobytes()).decode())
            return cls(
                m_raw=z["m_raw"],
                declared=z["declared"],
                analog=z["analog"],
                truth=z["truth"],
                final=z["final"],
                zsnap=z["zsnap"],
                logical=z["logical"],
                meta=meta,
            )

    def to_csv(self, path) -> None:
        """Long-format export: run, cycle, qubit, m, declared, I, truth_state."""
        states = {0: "C", 1: "L2", 2: "L3"}
        with open(path, "w") as fh:
            fh.write("run,cycle,qubit,m,declared,I,truth_state\n")
            for r in range(self.n_runs):
                for n in range(self.n_cycles):
                    for a, name in enumerate(ANCILLA_ORDER):
                        t = states[int(self.truth[r, 3 + a, n])]
                        fh.write(
                            f"{r},{n},{name},{self.m_raw[r, a, n]},"
                            f"{self.declared[r, a, n]},{self.analog[r, a, n]:.4f},{t}\n"
                        )
                    for d, name in enumerate(("D3", "D4", "D5")):
                        t = states[int(self.truth[r, d, n])]
                        fh.write(f"{r},{n},{name},,,,{t}\n")


def compute_defects(declared: np.ndarray) -> np.ndarray:
    """d[n] = m[n] xor m[n-2] with virtual zeros before the first cycle.

    X-type checks (columns 0-3) start from a random projection, so their
    first two defects carry no information and are forced to zero.
    """
    d = declared.astype(np.uint8)
    out = np.zeros_like(d)
    out[..., 0] = d[..., 0]
    if d.shape[-1] > 1:
        out[..., 1] = d[..., 1]
    out[..., 2:] = d[..., 2:] ^ d[..., :-2]
    out[..., :4, :2] = 0
    return out


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _GateSpec:
    flux: int
    static: int
    pair: int  # index into the per-run phase table
    anc_is_flux: bool
    swap_to_static_ok: bool  # the static side may receive a hopping leak


class _ChunkState:
    """Mutable per-chunk simulation state."""

    def __init__(self, n_runs: int, n_qubits: int, rng: np.random.Generator):
        self.x = np.zeros((n_runs, n_qubits), dtype=bool)
        self.z = np.zeros((n_runs, n_qubits), dtype=bool)
        self.leak = np.zeros((n_runs, n_qubits), dtype=np.uint8)
        self.m_retained = np.zeros((n_runs, 8), dtype=bool)
        self.x_ref = rng.random((n_runs, 4)) < 0.5  # random first X projections
        self.frozen = np.zeros(n_qubits, dtype=bool)  # forced-leak columns
        self.rng = rng


class SimEngine:
    """Precompiled Surface-17 cycle; `run_chunk` simulates a batch of runs."""

    def __init__(
        self,
        layout: Layout,
        leakage: LeakageParams,
        coherence: CoherenceParams,
        iq_model: IqModel,
    ):
        self.layout = layout
        self.leakage = leakage
        self.coherence = coherence
        self.iq = iq_model
        self.qi = layout.qubit_index
        self.n_qubits = len(layout.qubits)
        self.data_idx = np.array([self.qi[f"D{i}"] for i in range(9)])
        self.anc_idx = np.array([self.qi[a] for a in ANCILLA_ORDER])
        self.tracked_idx = np.array([self.qi[q] for q in TRACKED_ORDER])
        self.roles = {q.name: r for q, r in layout.qubits}
        self.record_of = {int(self.anc_idx[rc]): rc for rc in range(8)}

        self._compile_cycle()
        self._relax2 = 1.0 - math.exp(-coherence.t_c * 1e-3 / (coherence.t1 / 2.0))
        self._relax3 = 1.0 - math.exp(-coherence.t_c * 1e-3 / (coherence.t1 / 3.0))

        # gauge groups: the same-type checks of each high-frequency data qubit
        self.gauge_groups = {}
        for q in ("D3", "D4", "D5"):
            for kind in ("X", "Z"):
                self.gauge_groups[(q, kind)] = layout.same_type_checks(q, kind)

        # (flux name, static name) -> CZ pair index, for gauge-noise lookups
        self.pair_of = {}
        for g in self._all_gates:
            self.pair_of[(self._names[g.flux], self._names[g.static])] = g.pair

    # -- compilation ---------------------------------------------------

    def _compile_cycle(self) -> None:
        lay, coh = self.layout, self.coherence
        self._names = [q.name for q, _ in lay.qubits]
        tphi_sweet = coh.tphi_sweetspot

        def damp_probs(t_ns: float, tphi: dict[int, float]) -> np.ndarray:
            probs = np.zeros((self.n_qubits, 3))
            for qidx, tp in tphi.items():
                ch = twirl_damping(t_ns, coh.t1, tp)
                probs[qidx] = (ch.px, ch.py, ch.pz)
            return probs

        def sweet_event(names: list[str], t_ns: float) -> np.ndarray:
            return damp_probs(t_ns, {self.qi[n]: tphi_sweet for n in names})

        x_ancs = [f"X{i}" for i in range(4)]
        z_ancs = [f"Z{i}" for i in range(4)]
        data = [f"D{i}" for i in range(9)]

        gate_layers: dict[str, list[list[_GateSpec]]] = {"X": [], "Z": []}
        raw_layers: dict[str, list[list]] = {"X": [], "Z": []}
        all_gates: list[_GateSpec] = []
        n_pairs = 0
        for slot in lay.schedule:
            if not isinstance(slot, CzLayer):
                continue
            kind = slot.gates[0].check[0]
            specs = []
            for g in slot.gates:
                spec = _GateSpec(
                    flux=self.qi[g.flux],
                    static=self.qi[g.static],
                    pair=n_pairs,
                    anc_is_flux=not g.flux.startswith("D"),
                    swap_to_static_ok=self.roles[g.static] is not FrequencyRole.LOW,
                )
                n_pairs += 1
                specs.append(spec)
                all_gates.append(spec)
            gate_layers[kind].append(specs)
            raw_layers[kind].append(list(slot.gates))
        self.gate_layers = gate_layers
        self.n_pairs = n_pairs
        self._all_gates = all_gates

        def parked_low(gates: list) -> set[str]:
            """Low data qubits fluxed to the parking point during this slot.

            A low-frequency qubit parks only while the ancilla of one of its
            checks is fluxed down to the low-frequency interaction point for
            a different partner.
            """
            parked: set[str] = set()
            for g in gates:
                if g.flux.startswith("D"):
                    continue  # a High data qubit fluxes to the Mid band only
                if self.roles[g.static] is not FrequencyRole.LOW:
                    continue
                for q in lay.checks[g.check].support:
                    if q != g.static and self.roles[q] is FrequencyRole.LOW:
                        parked.add(q)
            return parked

        def slot_damp(kind: str, specs: list[_GateSpec], gates: list,
                      t_ns: float) -> np.ndarray:
            """Dephasing-time selection during one CZ window."""
            active_anc = x_ancs if kind == "X" else z_ancs
            tphi: dict[int, float] = {}
            busy = set()
            for s in specs:
                busy.update((s.flux, s.static))
                flux_role = self.roles[self._names[s.flux]]
                tphi[s.flux] = coh.tphi_int[flux_role]
                tphi[s.static] = tphi_sweet
            parked = parked_low(gates)
            for name in data + active_anc:
                qidx = self.qi[name]
                if qidx in busy:
                    continue
                if name in parked:
                    tphi[qidx] = coh.tphi_park[FrequencyRole.LOW]
                elif name in active_anc:
                    tphi[qidx] = coh.tphi_park[FrequencyRole.MID]
                else:
                    tphi[qidx] = tphi_sweet
            return damp_probs(t_ns, tphi)

        # cycle program: ("damp", probs) | ("hswap", idx) | ("cz", specs)
        #              | ("measure", kind) | ("relax",)
        prog: list[tuple] = []
        xd = np.array([self.qi[n] for n in x_ancs + data])
        zo = np.array([self.qi[n] for n in z_ancs])
        prog.append(("damp", sweet_event(x_ancs + data, coh.t_single)))
        prog.append(("hswap", xd))
        for specs, gates in zip(gate_layers["X"], raw_layers["X"]):
            prog.append(("damp", slot_damp("X", specs, gates, coh.t_int / 2)))
            prog.append(("cz", specs))
            prog.append(("damp", slot_damp("X", specs, gates, coh.t_int / 2)))
            prog.append(("damp", sweet_event(x_ancs + data, coh.t_cor)))
        prog.append(("damp", sweet_event(x_ancs + data, coh.t_single)))
        prog.append(("hswap", xd))
        prog.append(("damp", sweet_event(x_ancs, coh.t_m / 2)))
        prog.append(("measure", "X"))
        prog.append(("damp", sweet_event(x_ancs, coh.t_m / 2)))

        prog.append(("damp", sweet_event(z_ancs, coh.t_single)))
        prog.append(("hswap", zo))
        for specs, gates in zip(gate_layers["Z"], raw_layers["Z"]):
            prog.append(("damp", slot_damp("Z", specs, gates, coh.t_int / 2)))
            prog.append(("cz", specs))
            prog.append(("damp", slot_damp("Z", specs, gates, coh.t_int / 2)))
            prog.append(("damp", sweet_event(z_ancs + data, coh.t_cor)))
        prog.append(("damp", sweet_event(z_ancs, coh.t_single)))
        prog.append(("hswap", zo))
        prog.append(("damp", sweet_event(z_ancs, coh.t_m / 2)))
        prog.append(("measure", "Z"))
        prog.append(("damp", sweet_event(z_ancs, coh.t_m / 2)))

        t_idle = coh.t_c - (2 * coh.t_single + 8 * (coh.t_int + coh.t_cor))
        if t_idle < 0:
            raise ValueError("cycle time t_c too short for the scheduled layers")
        prog.append(("damp", sweet_event(data, t_idle)))
        self.program = prog

        self.check_records = []
        for rc, name in enumerate(ANCILLA_ORDER):
            chk = lay.checks[name]
            high = [q for q in chk.support if q in ("D3", "D4", "D5")]
            self.check_records.append(
                {"rc": rc, "name": name, "kind": chk.kind,
                 "anc": self.qi[name], "high": high}
            )

        self.zcheck_support = [
            np.array([self.qi[q] for q in lay.checks[f"Z{i}"].support])
            for i in range(4)
        ]
        self.logical_support = np.array([self.qi[q] for q in LOGICAL_Z_SUPPORT])

    # -- chunk simulation ------------------------------------------------

    def run_chunk(
        self,
        n_runs: int,
        n_cycles: int,
        rng: np.random.Generator,
        inject_x: list[tuple[str, int]] | None = None,
        force_leak: list[tuple[str, int, int]] | None = None,
    ) -> RunDataset:
        R, nq = n_runs, self.n_qubits
        st = _ChunkState(R, nq, rng)
        phases = sample_phase_table(self.leakage, self.n_pairs, R, rng)
        nu_prob = self._gauge_nu_probs(phases)

        m_raw = np.zeros((R, 8, n_cycles), dtype=np.uint8)
        declared = np.zeros((R, 8, n_cycles), dtype=np.uint8)
        analog = np.zeros((R, 8, n_cycles), dtype=np.float32)
        truth = np.zeros((R, 11, n_cycles), dtype=np.uint8)
        zsnap = np.zeros((R, 4, n_cycles), dtype=np.uint8)
        logical = np.zeros((R, n_cycles), dtype=np.uint8)

        force = np.zeros((n_cycles + 1, nq), dtype=bool)
        for q, n0, n1 in force_leak or ():
            force[n0: n1 + 1, self.qi[q]] = True
        injections: dict[int, list[int]] = {}
        for q, n in inject_x or ():
            injections.setdefault(n, []).append(self.qi[q])

        mus = np.asarray(self.iq.means)

        for n in range(n_cycles):
            prev = force[n - 1] if n else np.zeros(nq, dtype=bool)
            for qidx in np.nonzero(force[n] & ~prev)[0]:
                st.leak[:, qidx] = L2
            for qidx in np.nonzero(prev & ~force[n])[0]:
                st.leak[:, qidx] = C
                self._return_to_computational(st, int(qidx), np.ones(R, dtype=bool))
            st.frozen = force[n]

            for qidx in injections.get(n, ()):
                st.x[:, qidx] ^= True

            for op in self.program:
                tag = op[0]
                if tag == "damp":
                    self._apply_damp(op[1], st)
                elif tag == "hswap":
                    cols = op[1]
                    tmp = st.x[:, cols].copy()
                    st.x[:, cols] = st.z[:, cols]
                    st.z[:, cols] = tmp
                elif tag == "cz":
                    self._apply_cz_layer(op[1], st, phases)
                else:
                    self._measure(op[1], n, st, nu_prob, m_raw, declared,
                                  analog, truth, mus)

            # data truth is observed at the end of the cycle's circuit; the
            # lump-sum relaxation below belongs to the next truth interval
            truth[:, 0, n] = st.leak[:, self.qi["D3"]]
            truth[:, 1, n] = st.leak[:, self.qi["D4"]]
            truth[:, 2, n] = st.leak[:, self.qi["D5"]]
            self._relax_step(st)
            bits = st.x[:, self.data_idx] | (st.leak[:, self.data_idx] > 0)
            for j, supp in enumerate(self.zcheck_support):
                par = np.zeros(R, dtype=bool)
                for qidx in supp:
                    par ^= bits[:, np.searchsorted(self.data_idx, qidx)]
                zsnap[:, j, n] = par
            lpar = np.zeros(R, dtype=bool)
            for qidx in self.logical_support:
                lpar ^= bits[:, np.searchsorted(self.data_idx, qidx)]
            logical[:, n] = lpar

        final = (st.x[:, self.data_idx] | (st.leak[:, self.data_idx] > 0)).astype(np.uint8)

        return RunDataset(
            m_raw=m_raw, declared=declared, analog=analog, truth=truth,
            final=final, zsnap=zsnap, logical=logical, meta={},
        )

    # -- helpers --------------------------------------------------------

    def _gauge_nu_probs(self, phases: np.ndarray) -> dict[tuple[str, str], np.ndarray]:
        """Per-run supercheck-extraction error for each gauge pair.

        Each gauge ancilla picks up an independent conditional-phase
        rotation from the leaked qubit; the error of the pair product
        combines both, reducing to sin^2(phi_stat)/2 for fixed phases.
        """
        out = {}
        for (q, kind), group in self.gauge_groups.items():
            if len(group) != 2:
                continue
            errs = []
            for cname in group:
                pair = self.pair_of[(q, cname)]  # leaked data qubit fluxes
                phi = phases[:, pair, 0]  # its ancilla partner sees phi_stat
                errs.append(np.sin(phi / 2.0) ** 2)
            e1, e2 = errs
            out[(q, kind)] = e1 * (1 - e2) + e2 * (1 - e1)
        return out

    def _return_to_computational(self, st: _ChunkState, qidx: int, sel: np.ndarray) -> None:
        """Frame bookkeeping for a qubit re-entering the computational space.

        Data qubits re-project with a random frame; ancillas relax into |1>,
        which seeds their retained measurement bit.
        """
        n_sel = int(sel.sum())
        if n_sel == 0:
            return
        rc = self.record_of.get(qidx)
        if rc is None:
            st.x[sel, qidx] = st.rng.random(n_sel) < 0.5
            st.z[sel, qidx] = st.rng.random(n_sel) < 0.5
        else:
            st.x[sel, qidx] = False
            st.z[sel, qidx] = False
            st.m_retained[sel, rc] = True

    def _apply_damp(self, probs: np.ndarray, st: _ChunkState) -> None:
        active = np.nonzero(probs.sum(axis=1) > 0)[0]
        if len(active) == 0:
            return
        p = probs[active]
        u = st.rng.random((st.x.shape[0], len(active)))
        xy = u < (p[:, 0] + p[:, 1])
        yz = (u >= p[:, 0]) & (u < p[:, 0] + p[:, 1] + p[:, 2])
        alive = st.leak[:, active] == C
        st.x[:, active] ^= xy & alive
        st.z[:, active] ^= yz & alive

    def _apply_cz_layer(self, specs, st: _ChunkState, phases: np.ndarray) -> None:
        lk = self.leakage
        R = st.x.shape[0]
        for s in specs:
            f, stat = s.flux, s.static
            lf_pre = st.leak[:, f] > 0
            ls_pre = st.leak[:, stat] > 0

            exchange = np.zeros(R, dtype=bool)
            if (lk.l1 > 0 or (lk.include_l3 and lk.l3 > 0)) and not st.frozen[f]:
                u = st.rng.random(R)
                go_leak = (st.leak[:, f] == C) & (u < lk.l1)
                go_seep = (st.leak[:, f] == L2) & (u < 2 * lk.l1)
                st.leak[go_leak, f] = L2
                if go_seep.any():
                    st.leak[go_seep, f] = C
                    self._return_to_computational(st, f, go_seep)
                exchange = go_leak | go_seep
                if lk.include_l3 and lk.l3 > 0:
                    u3 = st.rng.random(R)
                    up = (st.leak[:, f] == L2) & ~exchange & (u3 < lk.l3 / 2)
                    down = (st.leak[:, f] == L3) & (u3 < lk.l3 / 2)
                    st.leak[up, f] = L3
                    st.leak[down, f] = L2
                    exchange |= up | down

            one_leaked = (lf_pre ^ ls_pre) & ~exchange
            if one_leaked.any():
                if lk.lm > 0 and not (st.frozen[f] or st.frozen[stat]):
                    um = st.rng.random(R)
                    can_swap = np.where(lf_pre, s.swap_to_static_ok, True)
                    mob = one_leaked & can_swap & (um < lk.lm)
                    mob &= np.where(lf_pre, st.leak[:, f] == L2, st.leak[:, stat] == L2)
                    for src, dst in ((f, stat), (stat, f)):
                        sel = mob & (lf_pre if src == f else ls_pre)
                        if sel.any():
                            st.leak[sel, dst] = st.leak[sel, src]
                            st.leak[sel, src] = C
                            self._return_to_computational(st, src, sel)
                    one_leaked &= ~mob

                # conditional-phase kick on the computational partner of a
                # leaked ancilla; data-qubit leakage acts through the gauge
                # outcomes instead, so no additional kick is applied there.
                anc_leaked = one_leaked & (lf_pre if s.anc_is_flux else ls_pre)
                if anc_leaked.any():
                    partner = stat if s.anc_is_flux else f
                    phi = phases[:, s.pair, 0] if s.anc_is_flux else phases[:, s.pair, 1]
                    pz = np.sin(phi / 2.0) ** 2
                    st.z[:, partner] ^= anc_leaked & (st.rng.random(R) < pz)

            both_c = (st.leak[:, f] == C) & (st.leak[:, stat] == C) & ~exchange
            st.z[:, stat] ^= st.x[:, f] & both_c
            st.z[:, f] ^= st.x[:, stat] & both_c

    def _relax_step(self, st: _ChunkState) -> None:
        R = st.x.shape[0]
        for qidx in self.tracked_idx:
            qidx = int(qidx)
            if st.frozen[qidx]:
                continue
            u = st.rng.random(R)
            down3 = (st.leak[:, qidx] == L3) & (u < self._relax3)
            seep = (st.leak[:, qidx] == L2) & (u < self._relax2)
            st.leak[down3, qidx] = L2
            if seep.any():
                st.leak[seep, qidx] = C
                self._return_to_computational(st, qidx, seep)

    def _measure(self, kind, n, st: _ChunkState, nu_prob,
                 m_raw, declared, analog, truth, mus) -> None:
        R = st.x.shape[0]
        g_bits = {q: st.rng.random(R) < 0.5 for q in ("D3", "D4", "D5")}
        nu_bits = {}
        for q in ("D3", "D4", "D5"):
            if (q, kind) in nu_prob:
                nu_bits[q] = st.rng.random(R) < nu_prob[(q, kind)]

        for rec in self.check_records:
            if rec["kind"] != kind:
                continue
            rc, ai = rec["rc"], rec["anc"]
            e_ref = st.x_ref[:, rc] if kind == "X" else np.zeros(R, dtype=bool)
            out = st.m_retained[:, rc] ^ e_ref ^ st.x[:, ai]

            high = rec["high"]
            if high:
                members = np.stack([st.leak[:, self.qi[q]] > 0 for q in high])
                n_leaked = members.sum(axis=0)
                if (n_leaked > 0).any():
                    for mi, q in enumerate(high):
                        solo = members[mi] & (n_leaked == 1)
                        if not solo.any():
                            continue
                        group = self.gauge_groups[(q, kind)]
                        extra = g_bits[q].copy()
                        if len(group) == 2 and rec["name"] == group[1]:
                            extra ^= nu_bits[q]
                        out = np.where(solo, out ^ extra, out)
                    multi = n_leaked >= 2
                    if multi.any():
                        out = np.where(multi, st.rng.random(R) < 0.5, out)

            anc_leaked = st.leak[:, ai] > 0
            m_val = np.where(anc_leaked, 2, out.astype(np.uint8)).astype(np.uint8)
            m_raw[:, rc, n] = m_val
            declared[:, rc, n] = np.where(anc_leaked, 1, out).astype(np.uint8)
            st.m_retained[:, rc] = np.where(anc_leaked, st.m_retained[:, rc], out)
            st.x[:, ai] = False
            st.z[:, ai] = False
            analog[:, rc, n] = mus[m_val] + self.iq.sigma * st.rng.standard_normal(R)
            truth[:, 3 + rc, n] = st.leak[:, ai]


def _simulate_chunk(args) -> RunDataset:
    (layout, leakage, coherence, iq, n_runs, n_cycles, seed, chunk_index,
     inject_x, force_leak) = args
    engine = SimEngine(layout, leakage, coherence, iq)
    rng = np.random.Generator(np.random.Philox(key=[seed, chunk_index]))
    return engine.run_chunk(n_runs, n_cycles, rng, inject_x, force_leak)


def simulate(
    layout: Layout | None = None,
    leakage: LeakageParams | None = None,
    coherence: CoherenceParams | None = None,
    iq_model: IqModel | None = None,
    n_runs: int = 1000,
    n_cycles: int = 20,
    seed: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
    inject_x: list[tuple[str, int]] | None = None,
    force_leak: list[tuple[str, int, int]] | None = None,
) -> RunDataset:
    """Simulate a batch of independent runs and assemble one dataset.

    Chunks of `chunk_size` runs each own a Philox stream keyed by
    (seed, chunk index); outputs are bit-identical for any worker count.
    """
    layout = layout or build_surface17()
    leakage = leakage or LeakageParams()
    coherence = coherence or CoherenceParams()
    iq_model = iq_model or build_model(0.996, 0.884)

    sizes = []
    remaining = n_runs
    while remaining > 0:
        sizes.append(min(chunk_size, remaining))
        remaining -= chunk_size

    jobs = [
        (layout, leakage, coherence, iq_model, size, n_cycles, seed, ci,
         inject_x, force_leak)
        for ci, size in enumerate(sizes)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_simulate_chunk, jobs))
    else:
        chunks = [_simulate_chunk(j) for j in jobs]

    ds = RunDataset(
        m_raw=np.concatenate([c.m_raw for c in chunks]),
        declared=np.concatenate([c.declared for c in chunks]),
        analog=np.concatenate([c.analog for c in chunks]),
        truth=np.concatenate([c.truth for c in chunks]),
        final=np.concatenate([c.final for c in chunks]),
        zsnap=np.concatenate([c.zsnap for c in chunks]),
        logical=np.concatenate([c.logical for c in chunks]),
    )
    ds.meta = {
        "seed": seed,
        "n_runs": n_runs,
        "n_cycles": n_cycles,
        "chunk_size": chunk_size,
        "tracked": list(TRACKED_ORDER),
        "ancillas": list(ANCILLA_ORDER),
        "leakage": {
            "l1": leakage.l1, "lm": leakage.lm, "l3": leakage.l3,
            "include_l3": leakage.include_l3,
            "phase_mode": leakage.phase_mode.value,
            "phi_stat": leakage.phi_stat, "phi_flux": leakage.phi_flux,
        },
        "coherence": {
            "t1": coherence.t1, "tphi_sweetspot": coherence.tphi_sweetspot,
            "t_single": coherence.t_single, "t_int": coherence.t_int,
            "t_cor": coherence.t_cor, "t_m": coherence.t_m, "t_c": coherence.t_c,
        },
        "iq_model": {
            "mu0": iq_model.mu0, "mu1": iq_model.mu1,
            "mu2": iq_model.mu2, "sigma": iq_model.sigma,
        },
        "schema": 1,
    }
    return ds


def resample_analog(dataset: RunDataset, model: IqModel, seed: int = 1) -> np.ndarray:
    """Fresh analog samples for stored outcomes under a different IQ model."""
    rng = np.random.Generator(np.random.Philox(key=[seed, 2**32]))
    mus = np.asarray(model.means)
    return (mus[dataset.m_raw] + model.sigma
            * rng.standard_normal(dataset.m_raw.shape)).astype(np.float32)
