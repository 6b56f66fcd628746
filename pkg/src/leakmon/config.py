"""Run configuration: JSON document with validated keys and env overrides.

Every stage echoes the full configuration into its output header so any
file can be regenerated from itself.  The LEAKMON_SEED environment
variable overrides the configured seed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errmodel import CoherenceParams, LeakageParams, PhaseMode
from .lattice import FrequencyRole, Layout, build_surface17
from .readout import IqModel, build_model


class ConfigError(ValueError):
    pass


_DEFAULTS: dict = {
    "run": {"n_runs": 20000, "n_cycles": 20, "seed": 0,
            "chunk_size": 4096, "workers": 1},
    "leakage": {"l1": 0.00125, "lm": 0.0, "l3": 0.0, "include_l3": False,
                "phase_mode": "random_per_pair_per_run",
                "phi_stat": math.pi, "phi_flux": 0.0},
    "coherence": {"t1": 30.0, "tphi_sweetspot": 60.0,
                  "tphi_int_high": 8.0, "tphi_int_mid": 6.0,
                  "tphi_park_mid": 8.0, "tphi_park_low": 9.0,
                  "t_single": 20.0, "t_int": 30.0, "t_cor": 10.0,
                  "t_m": 600.0, "t_c": 800.0},
    "readout": {"f01": 0.996, "f12": 0.884},
    "hmm": {"use_analog": True, "paper_literal_emissions": False,
            "fallback_b_leaked_ancilla": 0.4},
    "decoder": {"prob_floor": 1e-4},
    "ga": {"population": 64, "generations": 100, "seed": 0,
           "th_min": 0.02, "th_max": 1.0, "min_survivors": 100},
    "analysis": {"event_k_below": 5, "event_k_above": 8, "threshold": 0.5},
}


@dataclass
class RunConfig:
    raw: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        merged = {}
        for section, defaults in _DEFAULTS.items():
            user = self.raw.get(section, {})
            unknown = set(user) - set(defaults)
            if unknown:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
            merged[section] = {**defaults, **user}
        unknown_sections = set(self.raw) - set(_DEFAULTS)
        if unknown_sections:
            raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")
        self.raw = merged

        env_seed = os.environ.get("LEAKMON_SEED")
        if env_seed is not None:
            self.raw["run"]["seed"] = int(env_seed)

        # validate by constructing the parameter objects
        self.leakage_params()
        self.coherence_params()
        self.iq_model()
        if self.raw["run"]["n_runs"] < 1 or self.raw["run"]["n_cycles"] < 1:
            raise ConfigError("n_runs and n_cycles must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        with open(path) as fh:
            return cls(raw=json.load(fh))

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))

    # -- constructed parameter objects ----------------------------------

    def layout(self) -> Layout:
        c = self.raw["coherence"]
        return build_surface17(t_single=c["t_single"], t_int=c["t_int"],
                               t_cor=c["t_cor"], t_m=c["t_m"], t_c=c["t_c"])

    def leakage_params(self) -> LeakageParams:
        s = self.raw["leakage"]
        try:
            mode = PhaseMode(s["phase_mode"])
        except ValueError as exc:
            raise ConfigError(f"invalid phase_mode {s['phase_mode']!r}") from exc
        try:
            return LeakageParams(l1=s["l1"], lm=s["lm"], l3=s["l3"],
                                 include_l3=s["include_l3"], phase_mode=mode,
                                 phi_stat=s["phi_stat"], phi_flux=s["phi_flux"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def coherence_params(self) -> CoherenceParams:
        s = self.raw["coherence"]
        try:
            return CoherenceParams(
                t1=s["t1"], tphi_sweetspot=s["tphi_sweetspot"],
                tphi_int={FrequencyRole.HIGH: s["tphi_int_high"],
                          FrequencyRole.MID: s["tphi_int_mid"]},
                tphi_park={FrequencyRole.MID: s["tphi_park_mid"],
                           FrequencyRole.LOW: s["tphi_park_low"]},
                t_single=s["t_single"], t_int=s["t_int"], t_cor=s["t_cor"],
                t_m=s["t_m"], t_c=s["t_c"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def iq_model(self) -> IqModel:
        s = self.raw["readout"]
        if not (0.5 <= s["f01"] < 1.0 and 0.5 <= s["f12"] < 1.0):
            raise ConfigError("readout fidelities must lie in [0.5, 1)")
        return build_model(s["f01"], s["f12"])

    def ga_config(self):
        from .analysis import GaConfig

        s = self.raw["ga"]
        try:
            return GaConfig(population=s["population"], generations=s["generations"],
                            seed=s["seed"], th_min=s["th_min"], th_max=s["th_max"],
                            min_survivors=s["min_survivors"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
