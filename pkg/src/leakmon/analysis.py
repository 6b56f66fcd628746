"""Detection metrics, event-aligned responses, post-selection and steady state.

Precision and recall follow the threshold-crossing definitions (strict >),
with the binary simulated leakage states standing in for the leakage
probability; the ideal predictor then has unit area under its
precision-recall curve, so optimality equals the HMM's AUC.  Post-selection
discards any run whose posterior exceeds a per-qubit threshold anywhere,
and the (discard fraction, logical error rate) trade-off is explored with
an NSGA-II evolutionary search over threshold vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decoder import FitError, fit_error_rate
from .errmodel import TransitionRates
from .sim import TRACKED_ORDER, RunDataset, compute_defects


# ---------------------------------------------------------------------------
# Precision / recall / optimality
# ---------------------------------------------------------------------------

def precision(traces: np.ndarray, truth: np.ndarray, threshold: float) -> float | None:
    """Fraction of above-threshold cycles that are truly leaked; None if none fire."""
    fire = np.asarray(traces) > threshold
    n_fire = fire.sum()
    if n_fire == 0:
        return None
    return float((np.asarray(truth, dtype=bool) & fire).sum() / n_fire)


def recall(traces: np.ndarray, truth: np.ndarray, threshold: float) -> float | None:
    """Fraction of truly leaked cycles detected; None without leaked cycles."""
    t = np.asarray(truth, dtype=bool)
    n_leaked = t.sum()
    if n_leaked == 0:
        return None
    fire = np.asarray(traces) > threshold
    return float((t & fire).sum() / n_leaked)


@dataclass
class PrCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    auc: float


def pr_curve(traces: np.ndarray, truth: np.ndarray) -> PrCurve | None:
    """Parametric precision-recall curve over all distinct score cutoffs.

    Returns None when the data contain no leaked cycles (the curve, and so
    the optimality, is undefined).
    """
    scores = np.asarray(traces, dtype=float).ravel()
    labels = np.asarray(truth, dtype=bool).ravel()
    n_pos = int(labels.sum())
    if n_pos == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    labels = labels[order]
    tp = np.cumsum(labels)
    k = np.arange(1, len(scores) + 1)
    # a threshold sweep can only stop between distinct score values
    distinct = np.nonzero(np.diff(scores) < 0)[0]
    idx = np.concatenate([distinct, [len(scores) - 1]])
    prec = tp[idx] / k[idx]
    rec = tp[idx] / n_pos
    thresholds = scores[idx]

    order_r = np.argsort(rec, kind="stable")
    rec_s, prec_s = rec[order_r], prec[order_r]
    rr = np.concatenate([[0.0], rec_s])
    pp = np.concatenate([[prec_s[0]], prec_s])
    auc = float(np.trapezoid(pp, rr))
    return PrCurve(thresholds=thresholds, precision=prec, recall=rec, auc=auc)


def optimality(curve: PrCurve | None, truth: np.ndarray) -> float | None:
    """AUC of the detector normalized by the ideal predictor's AUC.

    With binary ground-truth states the ideal predictor is exact, its AUC
    is 1, and the optimality reduces to the detector's own AUC.
    """
    if curve is None:
        return None
    t = np.asarray(truth)
    if not set(np.unique(t)).issubset({0, 1, True, False}):
        raise ValueError("optimality expects binary ground truth")
    return curve.auc


def random_guess_baseline(truth: np.ndarray) -> float:
    """PR-AUC of a constant classifier: the leaked fraction of all cycles."""
    return float(np.asarray(truth, dtype=bool).mean())


# ---------------------------------------------------------------------------
# Event selection and aligned averages
# ---------------------------------------------------------------------------

def select_events(
    trace: np.ndarray, th: float, k_below: int, k_above: int
) -> list[tuple[int, int]]:
    """(run, onset) pairs where the trace sits below th for >= k_below
    cycles and then above it for >= k_above cycles; onset indexes the first
    above-threshold cycle."""
    if k_below < 1 or k_above < 1:
        raise ValueError("window lengths must be >= 1")
    above = np.asarray(trace) > th
    R, T = above.shape
    below_run = np.zeros((R, T + 1), dtype=np.int32)
    for n in range(T):
        below_run[:, n + 1] = np.where(above[:, n], 0, below_run[:, n] + 1)
    above_run = np.zeros((R, T + 1), dtype=np.int32)
    for n in range(T - 1, -1, -1):
        above_run[:, n] = np.where(above[:, n], above_run[:, n + 1] + 1, 0)
    onset = above & (below_run[:, :T] >= k_below) & (above_run[:, :T] >= k_above)
    runs, times = np.nonzero(onset)
    return list(zip(runs.tolist(), times.tolist()))


def average_response(
    signal: np.ndarray,
    events: list[tuple[int, int]],
    pre: int = 5,
    post: int = 10,
    n_boot: int = 200,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Event-aligned mean of `signal` (R, T) with a bootstrap 95% CI.

    Returns (offsets, mean, lo, hi); offset 0 is the onset cycle.  Empty
    event lists yield empty arrays.
    """
    offsets = np.arange(-pre, post + 1)
    if not events:
        empty = np.array([])
        return offsets, empty, empty, empty
    T = signal.shape[1]
    windows = np.full((len(events), len(offsets)), np.nan)
    for i, (r, n) in enumerate(events):
        for j, off in enumerate(offsets):
            t = n + off
            if 0 <= t < T:
                windows[i, j] = signal[r, t]
    mean = np.nanmean(windows, axis=0)
    rng = np.random.default_rng(seed)
    boots = np.full((n_boot, len(offsets)), np.nan)
    for b in range(n_boot):
        idx = rng.integers(0, len(events), size=len(events))
        boots[b] = np.nanmean(windows[idx], axis=0)
    lo, hi = np.nanpercentile(boots, [2.5, 97.5], axis=0)
    return offsets, mean, lo, hi


def defect_rate_around_events(
    dataset: RunDataset,
    qubit: str,
    layout,
    th: float = 0.5,
    k_below: int = 5,
    k_above: int = 8,
    pre: int = 5,
    post: int = 10,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-neighbor defect probability aligned to the qubit's leakage onset."""
    from .sim import ANCILLA_ORDER

    qpos = TRACKED_ORDER.index(qubit)
    truth = (dataset.truth[:, qpos, :] > 0).astype(float)
    events = select_events(truth, th, k_below, k_above)
    defects = dataset.defects()
    out = {}
    for name in layout.neighbor_observables(qubit):
        rec = ANCILLA_ORDER.index(name)
        offsets, mean, _, _ = average_response(
            defects[:, rec, :].astype(float), events, pre, post, n_boot=50
        )
        out[name] = (offsets, mean)
    return out


# ---------------------------------------------------------------------------
# Crosstalk and the optimality budget
# ---------------------------------------------------------------------------

def crosstalk_matrix(
    dataset: RunDataset,
    traces: np.ndarray,
    th: float = 0.5,
    k_below: int = 5,
    k_above: int = 8,
) -> np.ndarray:
    """Mean posterior of every HMM one cycle after a given qubit leaks.

    Entry (q, q') is the average response of q's HMM one cycle after q'
    crosses into the leakage subspace (ground-truth onsets).
    """
    Q = len(TRACKED_ORDER)
    T = dataset.n_cycles
    out = np.full((Q, Q), np.nan)
    for src in range(Q):
        truth = (dataset.truth[:, src, :] > 0).astype(float)
        events = [(r, n) for r, n in select_events(truth, th, k_below, k_above)
                  if n + 1 < T]
        if not events:
            continue
        rows = np.array([r for r, _ in events])
        times = np.array([n + 1 for _, n in events])
        for dst in range(Q):
            out[dst, src] = float(traces[rows, dst, times].mean())
    return out


def optimality_budget(
    dataset: RunDataset, traces: np.ndarray
) -> dict[str, dict[str, float]]:
    """Data-qubit optimality under nested post-selection conditions.

    A: all runs.  B: runs containing any ancilla leakage discarded.
    C: additionally discards runs where any other data qubit leaked.
    """
    anc_leak = (dataset.truth[:, 3:, :] > 0).any(axis=(1, 2))
    out = {"A": {}, "B": {}, "C": {}}
    for qpos, qubit in enumerate(TRACKED_ORDER[:3]):
        truth_q = dataset.truth[:, qpos, :] > 0
        others = [p for p in range(3) if p != qpos]
        other_leak = (dataset.truth[:, others, :] > 0).any(axis=(1, 2))
        masks = {
            "A": np.ones(dataset.n_runs, dtype=bool),
            "B": ~anc_leak,
            "C": ~anc_leak & ~other_leak,
        }
        for cond, mask in masks.items():
            curve = pr_curve(traces[mask, qpos, :], truth_q[mask])
            out[cond][qubit] = optimality(curve, truth_q[mask])
    return out


# ---------------------------------------------------------------------------
# Pi-pulse post-processing
# ---------------------------------------------------------------------------

def pi_pulse_postprocess(dataset: RunDataset) -> RunDataset:
    """Emulate ancilla pi pulses applied every other cycle, in post-processing.

    Hardware pulses plus their post-hoc undoing cancel on computational
    ancillas; on a leaked ancilla the pulse acts trivially, so the undoing
    flips the declared outcome by the cumulative pulse parity.  An
    error-free leaked ancilla then shows a defect every cycle.
    """
    T = dataset.n_cycles
    cycles = np.arange(T)
    pulse_parity = ((cycles // 2) + 1) % 2  # pulses fire at cycles 0, 2, 4, ...
    leaked = dataset.truth[:, 3:, :] > 0  # ancilla rows, measurement-aligned
    declared = dataset.declared.copy()
    declared ^= (leaked & pulse_parity.astype(bool)[None, None, :]).astype(np.uint8)
    return RunDataset(
        m_raw=dataset.m_raw,
        declared=declared,
        analog=dataset.analog,
        truth=dataset.truth,
        final=dataset.final,
        zsnap=dataset.zsnap,
        logical=dataset.logical,
        meta={**dataset.meta, "pi_pulse_postprocessed": True},
    )


# ---------------------------------------------------------------------------
# Post-selection and the Pareto front
# ---------------------------------------------------------------------------

def postselect(
    traces: np.ndarray, thresholds: np.ndarray
) -> tuple[float, np.ndarray]:
    """Discard runs whose posterior reaches any qubit's threshold anywhere.

    Returns (discard fraction f, surviving-run mask).  The criterion uses
    >= as the selection comparison.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    flagged = (traces.max(axis=2) >= thresholds[None, :]).any(axis=1)
    return float(flagged.mean()), ~flagged


@dataclass
class ParetoPoint:
    thresholds: dict[str, float]
    f: float
    eps: float
    eps_ci: tuple[float, float] | None = None


@dataclass
class GaConfig:
    population: int = 64
    generations: int = 100
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_eta: float = 20.0
    mutation_prob: float | None = None  # default 1/n_genes
    seed: int = 0
    th_min: float = 0.02
    th_max: float = 1.0
    min_survivors: int = 100

    def __post_init__(self) -> None:
        if self.population < 4 or self.population % 2:
            raise ValueError("population must be an even number >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0.0 < self.th_min < self.th_max <= 1.0:
            raise ValueError("threshold bounds must satisfy 0 < min < max <= 1")


def _non_dominated_sort(objs: np.ndarray) -> list[np.ndarray]:
    n = len(objs)
    dominated_by = [[] for _ in range(n)]
    dom_count = np.zeros(n, dtype=int)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if (objs[i] <= objs[j]).all() and (objs[i] < objs[j]).any():
                dominated_by[i].append(j)
            elif (objs[j] <= objs[i]).all() and (objs[j] < objs[i]).any():
                dom_count[i] += 1
    fronts = []
    current = np.nonzero(dom_count == 0)[0]
    while len(current):
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                dom_count[j] -= 1
                if dom_count[j] == 0:
                    nxt.append(j)
        current = np.array(sorted(set(nxt)), dtype=int)
    return fronts


def _crowding_distance(objs: np.ndarray) -> np.ndarray:
    n, m = objs.shape
    dist = np.zeros(n)
    for k in range(m):
        order = np.argsort(objs[:, k], kind="stable")
        dist[order[0]] = dist[order[-1]] = np.inf
        span = objs[order[-1], k] - objs[order[0], k]
        if span <= 0 or n < 3:
            continue
        dist[order[1:-1]] += (objs[order[2:], k] - objs[order[:-2], k]) / span
    return dist


def _sbx_crossover(p1, p2, eta, lo, hi, rng):
    u = rng.random(p1.shape)
    beta = np.where(u <= 0.5, (2 * u) ** (1 / (eta + 1)),
                    (1 / (2 * (1 - u))) ** (1 / (eta + 1)))
    c1 = 0.5 * ((1 + beta) * p1 + (1 - beta) * p2)
    c2 = 0.5 * ((1 - beta) * p1 + (1 + beta) * p2)
    return np.clip(c1, lo, hi), np.clip(c2, lo, hi)


def _poly_mutation(x, eta, prob, lo, hi, rng):
    y = x.copy()
    hit = rng.random(x.shape) < prob
    u = rng.random(x.shape)
    delta = np.where(u < 0.5, (2 * u) ** (1 / (eta + 1)) - 1,
                     1 - (2 * (1 - u)) ** (1 / (eta + 1)))
    y[hit] = np.clip(x[hit] + delta[hit] * (hi - lo), lo, hi)
    return y


def pareto_front(
    max_posterior: np.ndarray,  # (R, Q) per-run max posterior per tracked qubit
    success: np.ndarray,  # (R, n_prefixes) decoder success against |0>_L
    prefixes: np.ndarray,
    config: GaConfig | None = None,
    qubit_names: tuple[str, ...] = TRACKED_ORDER,
    with_ci: bool = True,
) -> list[ParetoPoint]:
    """NSGA-II minimization of (discard fraction, logical error rate).

    Decoding results are supplied pre-computed per run; each candidate
    threshold vector only re-selects survivors and re-fits the decay.
    """
    cfg = config or GaConfig()
    rng = np.random.default_rng(cfg.seed)
    n_genes = max_posterior.shape[1]
    mut_prob = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / n_genes
    prefixes = np.asarray(prefixes, dtype=float)

    def evaluate(th: np.ndarray) -> tuple[float, float]:
        flagged = (max_posterior >= th[None, :]).any(axis=1)
        f = float(flagged.mean())
        survivors = ~flagged
        if survivors.sum() < cfg.min_survivors:
            return f, math.inf
        try:
            eps, _ = fit_error_rate(prefixes, success[survivors].mean(axis=0))
        except FitError:
            return f, math.inf
        return f, eps

    pop = rng.uniform(cfg.th_min, cfg.th_max, size=(cfg.population, n_genes))
    objs = np.array([evaluate(ind) for ind in pop])

    for _ in range(cfg.generations):
        fronts = _non_dominated_sort(objs)
        rank = np.empty(len(pop), dtype=int)
        for fi, fr in enumerate(fronts):
            rank[fr] = fi
        crowd = np.empty(len(pop))
        for fr in fronts:
            crowd[fr] = _crowding_distance(objs[fr])

        def tourney() -> int:
            i, j = rng.integers(0, len(pop), size=2)
            if rank[i] != rank[j]:
                return i if rank[i] < rank[j] else j
            return i if crowd[i] >= crowd[j] else j

        children = []
        while len(children) < cfg.population:
            p1, p2 = pop[tourney()], pop[tourney()]
            if rng.random() < cfg.crossover_prob:
                c1, c2 = _sbx_crossover(p1, p2, cfg.crossover_eta,
                                        cfg.th_min, cfg.th_max, rng)
            else:
                c1, c2 = p1.copy(), p2.copy()
            children.append(_poly_mutation(c1, cfg.mutation_eta, mut_prob,
                                           cfg.th_min, cfg.th_max, rng))
            children.append(_poly_mutation(c2, cfg.mutation_eta, mut_prob,
                                           cfg.th_min, cfg.th_max, rng))
        children = np.array(children[: cfg.population])
        child_objs = np.array([evaluate(ind) for ind in children])

        pool = np.vstack([pop, children])
        pool_objs = np.vstack([objs, child_objs])
        fronts = _non_dominated_sort(pool_objs)
        keep: list[int] = []
        for fr in fronts:
            if len(keep) + len(fr) <= cfg.population:
                keep.extend(fr.tolist())
            else:
                crowd = _crowding_distance(pool_objs[fr])
                order = np.argsort(-crowd, kind="stable")
                keep.extend(fr[order[: cfg.population - len(keep)]].tolist())
                break
        pop = pool[keep]
        objs = pool_objs[keep]

    finite = np.isfinite(objs[:, 1])
    pop, objs = pop[finite], objs[finite]
    if len(pop) == 0:
        return []
    fronts = _non_dominated_sort(objs)
    points = []
    seen = set()
    from .decoder import fit_error_rate_bootstrap

    for i in fronts[0]:
        key = (round(objs[i, 0], 6), round(objs[i, 1], 8))
        if key in seen:
            continue
        seen.add(key)
        ci = None
        if with_ci:
            flagged = (max_posterior >= pop[i][None, :]).any(axis=1)
            res = fit_error_rate_bootstrap(prefixes, success[~flagged], n_boot=60)
            ci = res.eps_ci
        points.append(
            ParetoPoint(
                thresholds={q: float(v) for q, v in zip(qubit_names, pop[i])},
                f=float(objs[i, 0]),
                eps=float(objs[i, 1]),
                eps_ci=ci,
            )
        )
    points.sort(key=lambda p: p.f)
    return points


# ---------------------------------------------------------------------------
# Steady state
# ---------------------------------------------------------------------------

@dataclass
class SteadyStateModel:
    rates: TransitionRates
    p_ss: dict[str, float] = field(default_factory=dict)

    def leak_evolution(self, n: np.ndarray | int) -> np.ndarray:
        return leak_evolution(self.rates, n)


def steady_state(rates: TransitionRates) -> SteadyStateModel:
    """Closed-form steady-state populations of the rate equations."""
    cl, lc = rates.gamma_cl, rates.gamma_lc
    g23, g32 = rates.gamma_l2l3, rates.gamma_l3l2
    if g23 == 0.0 and g32 == 0.0:
        tot = cl + lc
        if tot == 0.0:
            p = {"C": 1.0, "L": 0.0}
        else:
            p = {"C": lc / tot, "L": cl / tot}
        return SteadyStateModel(rates=rates, p_ss=p)
    denom = cl * g32 + lc * g32 + cl * g23
    if denom == 0.0:
        return SteadyStateModel(rates=rates, p_ss={"C": 1.0, "L2": 0.0, "L3": 0.0})
    p = {
        "C": lc * g32 / denom,
        "L2": cl * g32 / denom,
        "L3": cl * g23 / denom,
    }
    return SteadyStateModel(rates=rates, p_ss=p)


def leak_evolution(rates: TransitionRates, n: np.ndarray | int) -> np.ndarray:
    """Two-level relaxation of the leakage population towards steady state."""
    n = np.asarray(n, dtype=float)
    tot = rates.gamma_cl + rates.gamma_lc
    if tot == 0.0:
        return np.zeros_like(n)
    return rates.gamma_cl / tot * (1.0 - np.exp(-tot * n))


def evolve_populations(rates: TransitionRates, n_cycles: int) -> np.ndarray:
    """Discrete (C, L2, L3) population chain over n_cycles, from (1, 0, 0)."""
    a = np.array([
        [1 - rates.gamma_cl, rates.gamma_lc, 0.0],
        [rates.gamma_cl, 1 - rates.gamma_lc - rates.gamma_l2l3, rates.gamma_l3l2],
        [0.0, rates.gamma_l2l3, 1 - rates.gamma_l3l2],
    ])
    p = np.array([1.0, 0.0, 0.0])
    out = np.empty((n_cycles, 3))
    for i in range(n_cycles):
        p = a @ p
        out[i] = p
    return out


def effective_coupling(j1_mhz: float, alpha_mhz: float) -> float:
    """Two-excitation exchange strength mediated by the detuned middle level."""
    if alpha_mhz == 0:
        raise ValueError("anharmonicity must be non-zero")
    return 2.0 * math.sqrt(3.0) * j1_mhz**2 / abs(alpha_mhz)
