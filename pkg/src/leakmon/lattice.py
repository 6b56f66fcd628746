"""Surface-17 layout: qubit roles, parity checks, CZ schedule and neighbor sets.

Geometry convention (rotated distance-3 code, row-major data grid):

    D0 D1 D2        X-type checks: X0={D1,D2}  X1={D0,D1,D3,D4}
    D3 D4 D5                       X2={D4,D5,D7,D8}  X3={D6,D7}
    D6 D7 D8        Z-type checks: Z0={D0,D3}  Z1={D1,D2,D4,D5}
                                   Z2={D3,D4,D6,D7}  Z3={D5,D8}

The middle row D3, D4, D5 holds the high-frequency transmons; every other
data qubit is low-frequency and all ancillas sit at the intermediate
frequency.  D4 participates in four checks, D3/D5 in three.  Logical Z is
Z(D0)Z(D1)Z(D2) and logical X is X(D0)X(D3)X(D6); with D4 removed from the
code, X errors on D2 and D7 form an undetectable (dressed) logical X.

Within a cycle all X-type checks run and are measured before the Z-type
checks.  CZs are grouped into four conflict-free slots per half-cycle,
ordered NW, NE, SW, SE relative to each plaquette center.  The Z half is
pipelined into the X measurement window so the wall-clock cycle is t_c.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class QubitKind(Enum):
    DATA = "D"
    ANCILLA_X = "X"
    ANCILLA_Z = "Z"


class FrequencyRole(Enum):
    LOW = 0
    MID = 1
    HIGH = 2


@dataclass(frozen=True)
class QubitId:
    kind: QubitKind
    index: int

    @property
    def name(self) -> str:
        return f"{self.kind.value}{self.index}"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Check:
    """One stabilizer check: ancilla plus slot-ordered data support."""

    name: str
    kind: str  # "X" or "Z"
    ancilla: str
    slots: tuple[tuple[int, str], ...]  # (cz_slot, data qubit name)

    @property
    def support(self) -> tuple[str, ...]:
        return tuple(q for _, q in self.slots)

    @property
    def weight(self) -> int:
        return len(self.slots)


@dataclass(frozen=True)
class CzGate:
    flux: str
    static: str
    check: str
    slot: int


@dataclass(frozen=True)
class SingleQubitLayer:
    qubits: tuple[str, ...]
    duration_ns: float


@dataclass(frozen=True)
class CzLayer:
    gates: tuple[CzGate, ...]
    duration_ns: float  # t_int + t_cor


@dataclass(frozen=True)
class MeasureLayer:
    ancillas: tuple[str, ...]
    duration_ns: float


@dataclass(frozen=True)
class IdleGap:
    duration_ns: float


CycleSlot = SingleQubitLayer | CzLayer | MeasureLayer | IdleGap

# Data grid: name -> (row, col); plaquette centers on the half-integer grid.
_DATA_POS = {f"D{3 * r + c}": (r, c) for r in range(3) for c in range(3)}
_CHECK_CENTERS = {
    "X0": (-0.5, 1.5),
    "X1": (0.5, 0.5),
    "X2": (1.5, 1.5),
    "X3": (2.5, 0.5),
    "Z0": (0.5, -0.5),
    "Z1": (0.5, 1.5),
    "Z2": (1.5, 0.5),
    "Z3": (1.5, 2.5),
}
# Slot order NW, NE, SW, SE as (drow, dcol) from the plaquette center.
_SLOT_OFFSETS = ((-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5))

HIGH_DATA = ("D3", "D4", "D5")
LOGICAL_Z_SUPPORT = ("D0", "D1", "D2")
LOGICAL_X_SUPPORT = ("D0", "D3", "D6")


@dataclass
class Layout:
    qubits: list[tuple[QubitId, FrequencyRole]]
    checks: dict[str, Check]
    schedule: list[CycleSlot]
    flux_count: dict[str, int]
    timings: dict[str, float]
    qubit_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.qubit_index:
            self.qubit_index = {q.name: i for i, (q, _) in enumerate(self.qubits)}

    # -- basic lookups ------------------------------------------------

    def role(self, name: str) -> FrequencyRole:
        for q, r in self.qubits:
            if q.name == name:
                return r
        raise KeyError(name)

    def qubit_names(self, kind: QubitKind | None = None) -> list[str]:
        return [q.name for q, _ in self.qubits if kind is None or q.kind is kind]

    @property
    def data_qubits(self) -> list[str]:
        return self.qubit_names(QubitKind.DATA)

    @property
    def ancillas(self) -> list[str]:
        return [q.name for q, _ in self.qubits if q.kind is not QubitKind.DATA]

    @property
    def tracked_qubits(self) -> list[str]:
        """Leakage-prone qubits: high-frequency data plus all (mid) ancillas."""
        return [q.name for q, r in self.qubits if r is not FrequencyRole.LOW]

    def is_tracked(self, name: str) -> bool:
        return self.role(name) is not FrequencyRole.LOW

    def checks_of_kind(self, kind: str) -> list[Check]:
        return [c for c in self.checks.values() if c.kind == kind]

    def checks_containing(self, data_qubit: str, kind: str | None = None) -> list[Check]:
        return [
            c
            for c in self.checks.values()
            if data_qubit in c.support and (kind is None or c.kind == kind)
        ]

    def check_of_ancilla(self, ancilla: str) -> Check:
        for c in self.checks.values():
            if c.ancilla == ancilla:
                return c
        raise KeyError(ancilla)

    def is_bulk_ancilla(self, ancilla: str) -> bool:
        return self.check_of_ancilla(ancilla).weight == 4

    def cz_gates(self) -> list[CzGate]:
        gates: list[CzGate] = []
        for slot in self.schedule:
            if isinstance(slot, CzLayer):
                gates.extend(slot.gates)
        return gates

    # -- neighbor observables (HMM input sets) ------------------------

    def neighbor_observables(self, qubit: str) -> tuple[str, ...]:
        """Stabilizers whose defects witness leakage on `qubit`.

        Data qubits: every check containing them.  Ancillas: all
        opposite-type checks sharing at least one data qubit.  Untracked
        (low-frequency) qubits have no leakage to witness.
        """
        if not self.is_tracked(qubit):
            raise ValueError(f"{qubit} is low-frequency and not leakage-tracked")
        if qubit.startswith("D"):
            return tuple(sorted(c.name for c in self.checks_containing(qubit)))
        own = self.check_of_ancilla(qubit)
        other_kind = "Z" if own.kind == "X" else "X"
        names = [
            c.name
            for c in self.checks_of_kind(other_kind)
            if set(c.support) & set(own.support)
        ]
        return tuple(sorted(names))

    def same_type_checks(self, data_qubit: str, kind: str) -> tuple[str, ...]:
        """The gauge pair (or single boundary gauge) for a leaked data qubit."""
        return tuple(sorted(c.name for c in self.checks_containing(data_qubit, kind)))

    def shared_data(self, check_a: str, check_b: str) -> tuple[str, ...]:
        sa = set(self.checks[check_a].support)
        sb = set(self.checks[check_b].support)
        return tuple(sorted(sa & sb))

    # -- serialization -------------------------------------------------

    def describe(self) -> str:
        lines = ["# Surface-17 layout", "", "## Qubits (name, role)"]
        for q, r in self.qubits:
            lines.append(f"  {q.name:<4} {r.name:<5} flux_count={self.flux_count[q.name]}")
        lines.append("")
        lines.append("## Checks (name, ancilla, slot->data)")
        for c in self.checks.values():
            slots = "  ".join(f"s{s}:{q}" for s, q in c.slots)
            lines.append(f"  {c.name}  anc={c.ancilla}  {slots}")
        lines.append("")
        lines.append("## Schedule (one QEC cycle)")
        for slot in self.schedule:
            if isinstance(slot, SingleQubitLayer):
                lines.append(f"  1q layer   {slot.duration_ns:6.0f} ns  on {', '.join(slot.qubits)}")
            elif isinstance(slot, CzLayer):
                gz = "  ".join(f"{g.flux}->{g.static}[{g.check}]" for g in slot.gates)
                lines.append(f"  CZ layer   {slot.duration_ns:6.0f} ns  {gz}")
            elif isinstance(slot, MeasureLayer):
                lines.append(f"  measure    {slot.duration_ns:6.0f} ns  {', '.join(slot.ancillas)}")
            else:
                lines.append(f"  idle gap   {slot.duration_ns:6.0f} ns")
        return "\n".join(lines)


def _build_checks() -> dict[str, Check]:
    checks = {}
    for name, (cr, cc) in _CHECK_CENTERS.items():
        slots = []
        for slot, (dr, dc) in enumerate(_SLOT_OFFSETS):
            pos = (cr + dr, cc + dc)
            for dq, dp in _DATA_POS.items():
                if dp == pos:
                    slots.append((slot, dq))
        checks[name] = Check(
            name=name,
            kind=name[0],
            ancilla=name,  # ancilla carries the check's name
            slots=tuple(slots),
        )
    return checks


def build_surface17(
    t_single: float = 20.0,
    t_int: float = 30.0,
    t_cor: float = 10.0,
    t_m: float = 600.0,
    t_c: float = 800.0,
) -> Layout:
    """Construct the Surface-17 layout with its scheduled QEC cycle."""
    qubits: list[tuple[QubitId, FrequencyRole]] = []
    for i in range(9):
        role = FrequencyRole.HIGH if f"D{i}" in HIGH_DATA else FrequencyRole.LOW
        qubits.append((QubitId(QubitKind.DATA, i), role))
    for i in range(4):
        qubits.append((QubitId(QubitKind.ANCILLA_X, i), FrequencyRole.MID))
    for i in range(4):
        qubits.append((QubitId(QubitKind.ANCILLA_Z, i), FrequencyRole.MID))
    roles = {q.name: r for q, r in qubits}

    checks = _build_checks()

    def cz_layers(kind: str) -> list[CzLayer]:
        layers = []
        for slot in range(4):
            gates = []
            for c in checks.values():
                if c.kind != kind:
                    continue
                for s, dq in c.slots:
                    if s != slot:
                        continue
                    # the higher-frequency side of the pair is fluxed down
                    if roles[dq].value > roles[c.ancilla].value:
                        gates.append(CzGate(flux=dq, static=c.ancilla, check=c.name, slot=slot))
                    else:
                        gates.append(CzGate(flux=c.ancilla, static=dq, check=c.name, slot=slot))
            layers.append(CzLayer(gates=tuple(gates), duration_ns=t_int + t_cor))
        return layers

    x_ancs = tuple(f"X{i}" for i in range(4))
    z_ancs = tuple(f"Z{i}" for i in range(4))
    data = tuple(f"D{i}" for i in range(9))

    schedule: list[CycleSlot] = [
        SingleQubitLayer(qubits=x_ancs + data, duration_ns=t_single),
        *cz_layers("X"),
        SingleQubitLayer(qubits=x_ancs + data, duration_ns=t_single),
        MeasureLayer(ancillas=x_ancs, duration_ns=t_m),
        SingleQubitLayer(qubits=z_ancs, duration_ns=t_single),
        *cz_layers("Z"),
        SingleQubitLayer(qubits=z_ancs, duration_ns=t_single),
        MeasureLayer(ancillas=z_ancs, duration_ns=t_m),
        # data-qubit slack once the pipelined halves are accounted for
        IdleGap(duration_ns=t_c - (2 * t_single + 8 * (t_int + t_cor))),
    ]

    flux_count = {q.name: 0 for q, _ in qubits}
    for slot in schedule:
        if isinstance(slot, CzLayer):
            for g in slot.gates:
                flux_count[g.flux] += 1

    timings = {
        "t_single": t_single,
        "t_int": t_int,
        "t_cor": t_cor,
        "t_m": t_m,
        "t_c": t_c,
    }
    return Layout(
        qubits=qubits,
        checks=checks,
        schedule=schedule,
        flux_count=flux_count,
        timings=timings,
    )


def neighbor_observables(layout: Layout, qubit: str) -> tuple[str, ...]:
    return layout.neighbor_observables(qubit)
