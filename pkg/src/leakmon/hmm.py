"""Per-qubit two-state hidden Markov models for leakage detection.

Hidden states are {computational, leaked}.  Transitions come from the
per-cycle leakage/seepage rates; defect emissions are calibrated from
simulated data; ancilla models additionally consume the analog in-phase
readout of the tracked qubit itself.  Filtering is the standard normalized
forward recursion, with one transition before the first observation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errmodel import CoherenceParams, LeakageParams, PhaseMode, TransitionRates, transition_rates
from .lattice import Layout
from .readout import IqModel
from .sim import ANCILLA_ORDER, TRACKED_ORDER, RunDataset


class DegenerateLikelihoodError(FloatingPointError):
    """Every hidden state has zero likelihood for an observation."""


def build_transition(rates: TransitionRates) -> np.ndarray:
    """Column-stochastic 2x2 transition matrix over (C, L)."""
    cl, lc = rates.gamma_cl, rates.gamma_lc
    return np.array([[1.0 - cl, lc], [cl, 1.0 - lc]])


@dataclass
class HmmModel:
    qubit: str
    a_matrix: np.ndarray
    neighbors: tuple[str, ...]
    b_comp: np.ndarray  # P(d=1 | C) per neighbor
    b_leaked: np.ndarray  # P(d=1 | L) per neighbor
    use_analog: bool = False
    iq: IqModel | None = None
    paper_literal_emissions: bool = False
    leaked_calibrated: bool = True

    def to_dict(self) -> dict:
        return {
            "qubit": self.qubit,
            "a_matrix": self.a_matrix.tolist(),
            "neighbors": list(self.neighbors),
            "b_comp": self.b_comp.tolist(),
            "b_leaked": self.b_leaked.tolist(),
            "use_analog": self.use_analog,
            "iq": None if self.iq is None else {
                "mu0": self.iq.mu0, "mu1": self.iq.mu1,
                "mu2": self.iq.mu2, "sigma": self.iq.sigma,
            },
            "paper_literal_emissions": self.paper_literal_emissions,
            "leaked_calibrated": self.leaked_calibrated,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HmmModel":
        iq = d.get("iq")
        return cls(
            qubit=d["qubit"],
            a_matrix=np.asarray(d["a_matrix"]),
            neighbors=tuple(d["neighbors"]),
            b_comp=np.asarray(d["b_comp"]),
            b_leaked=np.asarray(d["b_leaked"]),
            use_analog=d["use_analog"],
            iq=None if iq is None else IqModel(**iq),
            paper_literal_emissions=d.get("paper_literal_emissions", False),
            leaked_calibrated=d.get("leaked_calibrated", True),
        )


def calibrate_emissions(
    dataset: RunDataset,
    layout: Layout,
    qubit: str,
    fallback_b_leaked_ancilla: float = 0.4,
) -> tuple[tuple[str, ...], np.ndarray, np.ndarray, bool]:
    """Defect emission tables for one tracked qubit.

    P(d=1 | C) is the plain average defect rate of each neighbor over all
    runs and cycles (leakage periods included).  P(d=1 | L) averages over
    the cycles in which the tracked qubit is leaked; without any leaked
    cycles in the data it falls back to 0.5 for data qubits (forced by the
    check anti-commutation) or to a configured value for ancillas.
    """
    neighbors = layout.neighbor_observables(qubit)
    defects = dataset.defects()
    tracked_pos = TRACKED_ORDER.index(qubit)
    leaked = dataset.truth[:, tracked_pos, :] > 0

    b_comp = np.empty(len(neighbors))
    b_leaked = np.empty(len(neighbors))
    have_leaked = bool(leaked.any())
    for i, name in enumerate(neighbors):
        rec = ANCILLA_ORDER.index(name)
        d = defects[:, rec, :]
        b_comp[i] = d.mean()
        if have_leaked:
            b_leaked[i] = d[leaked].mean()
        else:
            b_leaked[i] = 0.5 if qubit.startswith("D") else fallback_b_leaked_ancilla
    return neighbors, b_comp, b_leaked, have_leaked


def build_models(
    dataset: RunDataset,
    layout: Layout,
    use_analog: bool = True,
    paper_literal_emissions: bool = False,
    fallback_b_leaked_ancilla: float = 0.4,
) -> dict[str, HmmModel]:
    """Calibrate one HMM per tracked qubit from a simulated dataset."""
    meta = dataset.meta
    leakage = LeakageParams(
        l1=meta["leakage"]["l1"], lm=meta["leakage"]["lm"],
        l3=meta["leakage"]["l3"], include_l3=meta["leakage"]["include_l3"],
        phase_mode=PhaseMode(meta["leakage"]["phase_mode"]),
        phi_stat=meta["leakage"]["phi_stat"], phi_flux=meta["leakage"]["phi_flux"],
    )
    coherence = CoherenceParams(
        t1=meta["coherence"]["t1"],
        tphi_sweetspot=meta["coherence"]["tphi_sweetspot"],
        t_single=meta["coherence"]["t_single"], t_int=meta["coherence"]["t_int"],
        t_cor=meta["coherence"]["t_cor"], t_m=meta["coherence"]["t_m"],
        t_c=meta["coherence"]["t_c"],
    )
    iq = IqModel(**meta["iq_model"])

    models = {}
    for qubit in TRACKED_ORDER:
        rates = transition_rates(layout, qubit, leakage, coherence)
        neighbors, b_comp, b_leaked, calibrated = calibrate_emissions(
            dataset, layout, qubit, fallback_b_leaked_ancilla
        )
        is_anc = not qubit.startswith("D")
        models[qubit] = HmmModel(
            qubit=qubit,
            a_matrix=build_transition(rates),
            neighbors=neighbors,
            b_comp=b_comp,
            b_leaked=b_leaked,
            use_analog=use_analog and is_anc,
            iq=iq if is_anc else None,
            paper_literal_emissions=paper_literal_emissions,
            leaked_calibrated=calibrated,
        )
    return models


def _analog_likelihoods(model: HmmModel, analog: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """B(I | C) and B(I | L) for the tracked ancilla's in-phase samples."""
    iq = model.iq
    n0 = iq.pdf(0, analog)
    n1 = iq.pdf(1, analog)
    n2 = iq.pdf(2, analog)
    if model.paper_literal_emissions:
        b_c = n0 + n1
    else:
        b_c = (n0 + n1) / 2.0
    return b_c, n2


def forward_update(posterior: np.ndarray, likelihood: np.ndarray,
                   a_matrix: np.ndarray) -> np.ndarray:
    """One Bayes step: transition prior, emission reweighting, normalize."""
    prior = posterior @ a_matrix.T
    joint = prior * likelihood
    norm = joint.sum(axis=-1, keepdims=True)
    if np.any(norm <= 0.0):
        raise DegenerateLikelihoodError("zero likelihood under both hidden states")
    return joint / norm


def filter_sequence(model: HmmModel, defect_obs: np.ndarray,
                    analog_obs: np.ndarray | None = None) -> np.ndarray:
    """Posterior leakage trace for one run; defect_obs has shape (k, T)."""
    defect_obs = np.asarray(defect_obs, dtype=bool)
    _, T = defect_obs.shape
    lik = np.ones((T, 2))
    for i in range(defect_obs.shape[0]):
        d = defect_obs[i]
        lik[:, 0] *= np.where(d, model.b_comp[i], 1.0 - model.b_comp[i])
        lik[:, 1] *= np.where(d, model.b_leaked[i], 1.0 - model.b_leaked[i])
    if model.use_analog:
        if analog_obs is None:
            raise ValueError("model expects analog observations")
        b_c, b_l = _analog_likelihoods(model, analog_obs)
        lik[:, 0] *= b_c
        lik[:, 1] *= b_l
    post = np.array([1.0, 0.0])
    trace = np.empty(T)
    for n in range(T):
        post = forward_update(post, lik[n], model.a_matrix)
        trace[n] = post[1]
    return trace


def filter_dataset(
    dataset: RunDataset,
    models: dict[str, HmmModel],
    analog: np.ndarray | None = None,
) -> np.ndarray:
    """Leakage posterior traces for every tracked qubit, shape (R, 11, T).

    Filtering of distinct qubits and runs is independent; the recursion is
    vectorized across runs.  `analog` overrides the dataset's stored
    samples (used for discrimination-fidelity sweeps).
    """
    defects = dataset.defects()
    analog = dataset.analog if analog is None else analog
    R, _, T = defects.shape
    traces = np.empty((R, len(TRACKED_ORDER), T), dtype=np.float32)

    for qpos, qubit in enumerate(TRACKED_ORDER):
        model = models[qubit]
        lik_c = np.ones((R, T))
        lik_l = np.ones((R, T))
        for i, name in enumerate(model.neighbors):
            d = defects[:, ANCILLA_ORDER.index(name), :] > 0
            lik_c *= np.where(d, model.b_comp[i], 1.0 - model.b_comp[i])
            lik_l *= np.where(d, model.b_leaked[i], 1.0 - model.b_leaked[i])
        if model.use_analog:
            own = analog[:, ANCILLA_ORDER.index(qubit), :]
            b_c, b_l = _analog_likelihoods(model, own)
            lik_c *= b_c
            lik_l *= b_l

        a = model.a_matrix
        p_l = np.zeros(R)
        for n in range(T):
            prior_l = a[1, 0] * (1.0 - p_l) + a[1, 1] * p_l
            joint_c = (1.0 - prior_l) * lik_c[:, n]
            joint_l = prior_l * lik_l[:, n]
            norm = joint_c + joint_l
            if np.any(norm <= 0.0):
                raise DegenerateLikelihoodError(
                    f"zero likelihood for qubit {qubit} at cycle {n}"
                )
            p_l = joint_l / norm
            traces[:, qpos, n] = p_l
    return traces
