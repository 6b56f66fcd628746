"""Analog in-phase readout statistics for the three transmon states.

The dispersed single-shot response of each state |j> is a Gaussian N_j
along the in-phase axis; discrimination fidelity relates to the
signal-to-noise ratio SNR = |mu_i - mu_j| / 2 sigma through
F = 1 - erfc(SNR / sqrt(2)) / 2.  State posteriors assume equal priors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcinv


@dataclass(frozen=True)
class IqModel:
    mu0: float
    mu1: float
    mu2: float
    sigma: float

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def means(self) -> tuple[float, float, float]:
        return (self.mu0, self.mu1, self.mu2)

    def pdf(self, state: int, i_resp):
        mu = self.means[state]
        z = (np.asarray(i_resp, dtype=float) - mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))


def fidelity_from_snr(snr: float) -> float:
    if snr < 0:
        raise ValueError("snr must be non-negative")
    return 1.0 - 0.5 * erfc(snr / math.sqrt(2.0))


def snr_for_fidelity(f: float) -> float:
    if not 0.5 <= f < 1.0:
        raise ValueError(f"fidelity {f} outside [0.5, 1)")
    return math.sqrt(2.0) * float(erfcinv(2.0 * (1.0 - f)))


def build_model(f01: float, f12: float) -> IqModel:
    """Place unit-sigma Gaussians so pairwise fidelities match (f01, f12)."""
    mu1 = 2.0 * snr_for_fidelity(f01)
    mu2 = mu1 + 2.0 * snr_for_fidelity(f12)
    return IqModel(mu0=0.0, mu1=mu1, mu2=mu2, sigma=1.0)


def leak_probability(i_resp, model: IqModel):
    """Posterior probability of |2> given the in-phase response (equal priors)."""
    n0 = model.pdf(0, i_resp)
    n1 = model.pdf(1, i_resp)
    n2 = model.pdf(2, i_resp)
    return n2 / (n0 + n1 + n2)


def state_posteriors(i_resp, model: IqModel) -> np.ndarray:
    """All three posteriors P(j | I); axis 0 indexes the state."""
    dens = np.stack([model.pdf(j, i_resp) for j in range(3)])
    return dens / dens.sum(axis=0)


def sample_analog(m, model: IqModel, rng: np.random.Generator) -> np.ndarray:
    """Draw in-phase responses for outcomes m in {0, 1, 2} (vectorized)."""
    m = np.asarray(m)
    mus = np.asarray(model.means)[m]
    return mus + model.sigma * rng.standard_normal(size=m.shape)
