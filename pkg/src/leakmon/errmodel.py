"""Error-model parameters and their per-operation stochastic channels.

Amplitude and phase damping are replaced by their Pauli twirl, leakage and
seepage by classical per-CZ transition probabilities, and conditional-phase
errors on partners of leaked qubits by stochastic Z flips.  All parameters
default to the targeted experimental values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .lattice import FrequencyRole, Layout


class PhaseMode(Enum):
    FIXED = "fixed"
    RANDOM_PER_PAIR_PER_RUN = "random_per_pair_per_run"
    CONSTRAINED_RANDOM = "constrained_random"


@dataclass(frozen=True)
class LeakageParams:
    """Leakage probabilities per CZ and the leakage conditional phases."""

    l1: float = 0.00125
    lm: float = 0.0
    l3: float = 0.0
    include_l3: bool = False
    phase_mode: PhaseMode = PhaseMode.RANDOM_PER_PAIR_PER_RUN
    phi_stat: float = math.pi  # used in FIXED mode
    phi_flux: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.l1 <= 0.25:
            raise ValueError(f"l1={self.l1} outside [0, 0.25]")
        if not 0.0 <= self.lm <= 1.0:
            raise ValueError(f"lm={self.lm} outside [0, 1]")
        if not 0.0 <= self.l3 <= 1.0:
            raise ValueError(f"l3={self.l3} outside [0, 1]")


@dataclass(frozen=True)
class CoherenceParams:
    """Relaxation/dephasing times (us) and operation durations (ns)."""

    t1: float = 30.0
    tphi_sweetspot: float = 60.0
    tphi_int: dict[FrequencyRole, float] = field(
        default_factory=lambda: {FrequencyRole.HIGH: 8.0, FrequencyRole.MID: 6.0}
    )
    tphi_park: dict[FrequencyRole, float] = field(
        default_factory=lambda: {FrequencyRole.MID: 8.0, FrequencyRole.LOW: 9.0}
    )
    t_single: float = 20.0
    t_int: float = 30.0
    t_cor: float = 10.0
    t_m: float = 600.0
    t_c: float = 800.0

    def __post_init__(self) -> None:
        for label, v in (("t1", self.t1), ("tphi_sweetspot", self.tphi_sweetspot)):
            if v <= 0:
                raise ValueError(f"{label} must be positive, got {v}")
        for d in (self.tphi_int, self.tphi_park):
            for role, v in d.items():
                if v <= 0:
                    raise ValueError(f"dephasing time for {role} must be positive")


@dataclass(frozen=True)
class TwirledPauliChannel:
    px: float
    py: float
    pz: float

    def __post_init__(self) -> None:
        if min(self.px, self.py, self.pz) < 0 or self.px + self.py + self.pz > 1 + 1e-12:
            raise ValueError(f"invalid Pauli channel {self}")


@dataclass(frozen=True)
class TransitionRates:
    """Per-QEC-cycle leakage/seepage probabilities for one qubit."""

    gamma_cl: float
    gamma_lc: float
    gamma_l2l3: float = 0.0
    gamma_l3l2: float = 0.0


def twirl_damping(t_ns: float, t1_us: float, tphi_us: float) -> TwirledPauliChannel:
    """Pauli twirl of amplitude damping (T1) composed with pure dephasing (Tphi).

    With gamma = 1 - exp(-t/T1) the twirled channel has
    px = py = gamma/4 and pz = (1 - gamma/2 - sqrt(1-gamma) exp(-t/Tphi)) / 2.
    """
    if t1_us <= 0 or tphi_us <= 0:
        raise ValueError("T1 and Tphi must be positive")
    if t_ns < 0:
        raise ValueError("duration must be non-negative")
    t_us = t_ns * 1e-3
    gamma = 1.0 - math.exp(-t_us / t1_us)
    a = math.sqrt(1.0 - gamma) * math.exp(-t_us / tphi_us)
    px = gamma / 4.0
    pz = max(0.0, (1.0 - gamma / 2.0 - a) / 2.0)
    return TwirledPauliChannel(px=px, py=px, pz=pz)


def phase_flip_prob(phi: float) -> float:
    """Z-flip probability of the twirled Rz(phi): sin^2(phi/2)."""
    return math.sin(phi / 2.0) ** 2


def transition_rates(layout: Layout, qubit: str, leakage: LeakageParams,
                     coherence: CoherenceParams) -> TransitionRates:
    """Leakage/seepage probabilities per QEC cycle for one tracked qubit.

    Gate contributions scale with the number of CZs in which the qubit is
    fluxed; seepage gains a relaxation term with the shortened |2> (|3>)
    lifetime T1/2 (T1/3).
    """
    if not layout.is_tracked(qubit):
        raise ValueError(f"{qubit} is not leakage-tracked")
    n_flux = layout.flux_count[qubit]
    t_c_us = coherence.t_c * 1e-3
    relax2 = 1.0 - math.exp(-t_c_us / (coherence.t1 / 2.0))
    gamma_cl = n_flux * leakage.l1
    gamma_lc = n_flux * (2.0 * leakage.l1) + relax2
    if leakage.include_l3:
        relax3 = 1.0 - math.exp(-t_c_us / (coherence.t1 / 3.0))
        g23 = n_flux * leakage.l3 / 2.0
        g32 = n_flux * leakage.l3 / 2.0 + relax3
    else:
        g23 = g32 = 0.0
    return TransitionRates(gamma_cl=gamma_cl, gamma_lc=gamma_lc,
                           gamma_l2l3=g23, gamma_l3l2=g32)


def sample_leakage_phases(
    params: LeakageParams, pair: tuple[str, str], rng: np.random.Generator
) -> tuple[float, float]:
    """Draw (phi_stat, phi_flux) for one ordered (flux, static) CZ pair.

    In the randomized modes the draw happens once per pair per run; callers
    cache the result for the duration of the run.
    """
    if params.phase_mode is PhaseMode.FIXED:
        return params.phi_stat, params.phi_flux
    if params.phase_mode is PhaseMode.CONSTRAINED_RANDOM:
        phi_flux = rng.uniform(0.0, 2.0 * math.pi)
        return math.pi - phi_flux, phi_flux
    phi_stat = rng.uniform(0.0, 2.0 * math.pi)
    phi_flux = rng.uniform(0.0, 2.0 * math.pi)
    return phi_stat, phi_flux


def sample_phase_table(
    params: LeakageParams, n_pairs: int, n_runs: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized per-run phase table, shape (n_runs, n_pairs, 2) = (stat, flux)."""
    if params.phase_mode is PhaseMode.FIXED:
        table = np.empty((n_runs, n_pairs, 2))
        table[..., 0] = params.phi_stat
        table[..., 1] = params.phi_flux
        return table
    if params.phase_mode is PhaseMode.CONSTRAINED_RANDOM:
        phi_flux = rng.uniform(0.0, 2.0 * math.pi, size=(n_runs, n_pairs))
        return np.stack([math.pi - phi_flux, phi_flux], axis=-1)
    return rng.uniform(0.0, 2.0 * math.pi, size=(n_runs, n_pairs, 2))
