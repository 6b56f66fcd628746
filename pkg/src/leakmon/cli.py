"""Command-line pipeline: simulate, calibrate, detect, decode, analyze,
pareto, oracle and steady-state stages.

Every stage reads/writes self-describing files (configuration echoed into
headers) and is deterministic for a given seed.  Reports are written as
CSV/JSON tables with matplotlib figures rendered alongside unless
--no-figures is passed.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import click
import numpy as np

from . import analysis as an
from . import plots
from .config import RunConfig
from .decoder import (
    DefectGraph,
    TrainedDecoder,
    decode_dataset,
    estimate_edge_probs,
    fit_error_rate_bootstrap,
)
from .errmodel import LeakageParams, transition_rates
from .hmm import HmmModel, build_models, filter_dataset
from .readout import IqModel
from .sim import TRACKED_ORDER, RunDataset, simulate


def _load_config(path, seed, workers) -> RunConfig:
    cfg = RunConfig.from_file(path)
    if seed is not None:
        cfg.raw["run"]["seed"] = seed
    if workers is not None:
        cfg.raw["run"]["workers"] = workers
    return cfg


def _outdir(out) -> Path:
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


std_options = [
    click.option("--config", "config_path", type=click.Path(exists=True),
                 default=None, help="JSON run configuration."),
    click.option("--seed", type=int, default=None, help="Override the seed."),
    click.option("--workers", type=int, default=None, help="Simulation workers."),
    click.option("--out", default="out", show_default=True,
                 help="Output directory."),
]


def with_std_options(fn):
    for opt in reversed(std_options):
        fn = opt(fn)
    return fn


@click.group()
def main() -> None:
    """Surface-17 leakage simulation, detection and analysis pipeline."""


@main.command()
@with_std_options
@click.option("--csv", "export_csv", is_flag=True, help="Also export a CSV dataset.")
def simulate_cmd(config_path, seed, workers, out, export_csv) -> None:
    """Generate a dataset of stochastic Surface-17 runs."""
    cfg = _load_config(config_path, seed, workers)
    outdir = _outdir(out)
    run = cfg.raw["run"]
    ds = simulate(
        layout=cfg.layout(),
        leakage=cfg.leakage_params(),
        coherence=cfg.coherence_params(),
        iq_model=cfg.iq_model(),
        n_runs=run["n_runs"],
        n_cycles=run["n_cycles"],
        seed=run["seed"],
        chunk_size=run["chunk_size"],
        workers=run["workers"],
    )
    ds.meta["config"] = cfg.to_dict()
    ds.save(outdir / "dataset.npz")
    (outdir / "layout.txt").write_text(cfg.layout().describe() + "\n")
    if export_csv:
        ds.to_csv(outdir / "dataset.csv")
    click.echo(f"wrote {outdir / 'dataset.npz'} "
               f"({run['n_runs']} runs x {run['n_cycles']} cycles, seed {run['seed']})")


main.add_command(simulate_cmd, name="simulate")


@main.command()
@with_std_options
@click.option("--dataset", default=None, help="Dataset path (default OUT/dataset.npz).")
def calibrate(config_path, seed, workers, out, dataset) -> None:
    """Calibrate HMM models and train decoder weights (on auxiliary L1=0 data)."""
    cfg = _load_config(config_path, seed, workers)
    outdir = _outdir(out)
    ds = RunDataset.load(dataset or outdir / "dataset.npz")
    layout = cfg.layout()
    hmm_cfg = cfg.raw["hmm"]
    models = build_models(
        ds, layout,
        use_analog=hmm_cfg["use_analog"],
        paper_literal_emissions=hmm_cfg["paper_literal_emissions"],
        fallback_b_leaked_ancilla=hmm_cfg["fallback_b_leaked_ancilla"],
    )

    # decoder weights come from an identical error model without leakage
    run = cfg.raw["run"]
    train = simulate(
        layout=layout,
        leakage=LeakageParams(l1=0.0),
        coherence=cfg.coherence_params(),
        iq_model=cfg.iq_model(),
        n_runs=run["n_runs"],
        n_cycles=run["n_cycles"],
        seed=run["seed"] + 7_000_000,
        chunk_size=run["chunk_size"],
        workers=run["workers"],
    )
    graph = estimate_edge_probs(train, layout, "Z",
                                floor=cfg.raw["decoder"]["prob_floor"])
    decoder = TrainedDecoder(graph)
    prefixes, declared = decode_dataset(train, decoder)
    fit = fit_error_rate_bootstrap(prefixes, declared == 0, n_boot=60)

    payload = {
        "config": cfg.to_dict(),
        "models": {q: m.to_dict() for q, m in models.items()},
        "decoder_graph": graph.to_dict(),
        "eps_leakage_free": {"eps": fit.eps, "n0": fit.n0, "eps_ci": fit.eps_ci},
    }
    with open(outdir / "calibration.json", "w") as fh:
        json.dump(payload, fh)
    click.echo(f"wrote {outdir / 'calibration.json'} "
               f"(eps_L without leakage = {fit.eps:.4f})")


def _load_calibration(path):
    with open(path) as fh:
        payload = json.load(fh)
    models = {q: HmmModel.from_dict(d) for q, d in payload["models"].items()}
    graph = DefectGraph.from_dict(payload["decoder_graph"])
    return payload, models, graph


@main.command()
@with_std_options
@click.option("--dataset", default=None, help="Dataset path (default OUT/dataset.npz).")
@click.option("--calibration", default=None,
              help="Calibration path (default OUT/calibration.json).")
def detect(config_path, seed, workers, out, dataset, calibration) -> None:
    """Run the HMM filters over a dataset and store the posterior traces."""
    outdir = _outdir(out)
    ds = RunDataset.load(dataset or outdir / "dataset.npz")
    payload, models, _ = _load_calibration(calibration or outdir / "calibration.json")
    traces = filter_dataset(ds, models)
    np.savez_compressed(
        outdir / "traces.npz",
        traces=traces,
        meta=np.frombuffer(json.dumps(
            {"tracked": list(TRACKED_ORDER), "config": payload["config"]}
        ).encode(), dtype=np.uint8),
    )
    click.echo(f"wrote {outdir / 'traces.npz'}")


@main.command()
@with_std_options
@click.option("--dataset", default=None, help="Dataset path (default OUT/dataset.npz).")
@click.option("--calibration", default=None,
              help="Calibration path (default OUT/calibration.json).")
def decode(config_path, seed, workers, out, dataset, calibration) -> None:
    """Decode every run (all prefixes) and fit the logical error rate."""
    outdir = _outdir(out)
    ds = RunDataset.load(dataset or outdir / "dataset.npz")
    payload, _, graph = _load_calibration(calibration or outdir / "calibration.json")
    decoder = TrainedDecoder(graph)
    prefixes, declared = decode_dataset(ds, decoder)
    fit = fit_error_rate_bootstrap(prefixes, declared == 0, n_boot=100)
    np.savez_compressed(outdir / "decode.npz", prefixes=prefixes, declared=declared)
    with open(outdir / "epsilon.json", "w") as fh:
        json.dump({"eps": fit.eps, "n0": fit.n0, "eps_ci": fit.eps_ci,
                   "config": payload["config"]}, fh)
    click.echo(f"wrote {outdir / 'decode.npz'}; eps_L = {fit.eps:.4f} "
               f"CI {fit.eps_ci}")


@main.command()
@with_std_options
@click.option("--dataset", default=None)
@click.option("--traces", "traces_path", default=None)
@click.option("--calibration", default=None)
@click.option("--figures/--no-figures", default=True, show_default=True)
def analyze(config_path, seed, workers, out, dataset, traces_path,
            calibration, figures) -> None:
    """Emit the detection-metric tables (and figures) for a detected dataset."""
    cfg = _load_config(config_path, seed, workers)
    outdir = _outdir(out)
    ds = RunDataset.load(dataset or outdir / "dataset.npz")
    _, models, _ = _load_calibration(calibration or outdir / "calibration.json")
    with np.load(traces_path or outdir / "traces.npz") as z:
        traces = z["traces"]
    layout = cfg.layout()
    k_below = cfg.raw["analysis"]["event_k_below"]
    k_above = cfg.raw["analysis"]["event_k_above"]

    models_defect = {
        q: HmmModel(qubit=m.qubit, a_matrix=m.a_matrix, neighbors=m.neighbors,
                    b_comp=m.b_comp, b_leaked=m.b_leaked, use_analog=False)
        for q, m in models.items()
    }
    traces_defect = filter_dataset(ds, models_defect)

    # PR curves and optimality
    curves, curves_d = {}, {}
    with open(outdir / "optimality.csv", "w") as fh:
        fh.write("qubit,variant,optimality,baseline\n")
        for qpos, q in enumerate(TRACKED_ORDER):
            truth = ds.truth[:, qpos, :] > 0
            base = an.random_guess_baseline(truth)
            curves[q] = an.pr_curve(traces[:, qpos, :], truth)
            curves_d[q] = an.pr_curve(traces_defect[:, qpos, :], truth)
            for variant, c in (("full", curves[q]), ("defect_only", curves_d[q])):
                o = an.optimality(c, truth)
                fh.write(f"{q},{variant},{'' if o is None else f'{o:.5f}'},{base:.5f}\n")
    with open(outdir / "pr_curves.csv", "w") as fh:
        fh.write("qubit,variant,threshold,precision,recall\n")
        for q in TRACKED_ORDER:
            for variant, c in (("full", curves[q]), ("defect_only", curves_d[q])):
                if c is None:
                    continue
                for th, p, r in zip(c.thresholds, c.precision, c.recall):
                    fh.write(f"{q},{variant},{th:.5f},{p:.5f},{r:.5f}\n")

    # event-aligned responses
    responses = {}
    with open(outdir / "responses.csv", "w") as fh:
        fh.write("qubit,offset,mean,lo,hi\n")
        for qpos, q in enumerate(TRACKED_ORDER):
            truth = (ds.truth[:, qpos, :] > 0).astype(float)
            events = an.select_events(truth, 0.5, k_below, k_above)
            off, mean, lo, hi = an.average_response(traces[:, qpos, :], events)
            responses[q] = (off, mean, lo, hi)
            for j in range(len(mean)):
                fh.write(f"{q},{off[j]},{mean[j]:.5f},{lo[j]:.5f},{hi[j]:.5f}\n")

    with open(outdir / "defect_responses.csv", "w") as fh:
        fh.write("qubit,neighbor,offset,defect_rate\n")
        for q in TRACKED_ORDER:
            rates = an.defect_rate_around_events(ds, q, layout,
                                                 k_below=k_below, k_above=k_above)
            for nb, (off, mean) in rates.items():
                for j in range(len(mean)):
                    fh.write(f"{q},{nb},{off[j]},{mean[j]:.5f}\n")

    matrix = an.crosstalk_matrix(ds, traces, k_below=k_below, k_above=k_above)
    with open(outdir / "crosstalk.csv", "w") as fh:
        fh.write("responder," + ",".join(TRACKED_ORDER) + "\n")
        for i, q in enumerate(TRACKED_ORDER):
            fh.write(q + "," + ",".join(
                "" if np.isnan(v) else f"{v:.5f}" for v in matrix[i]) + "\n")

    budget = an.optimality_budget(ds, traces)
    with open(outdir / "budget.csv", "w") as fh:
        fh.write("condition,qubit,optimality\n")
        for cond, per_q in budget.items():
            for q, v in per_q.items():
                fh.write(f"{cond},{q},{v:.5f}\n")

    # steady state: empirical vs rate equations
    leakage, coherence = cfg.leakage_params(), cfg.coherence_params()
    cycles = np.arange(1, ds.n_cycles + 1)
    emp, anl = {}, {}
    with open(outdir / "steady_state.csv", "w") as fh:
        fh.write("qubit,cycle,empirical,analytic\n")
        for qpos, q in enumerate(TRACKED_ORDER):
            rates = transition_rates(layout, q, leakage, coherence)
            emp[q] = (ds.truth[:, qpos, :] > 0).mean(axis=0)
            anl[q] = an.leak_evolution(rates, cycles)
            for n in range(ds.n_cycles):
                fh.write(f"{q},{n},{emp[q][n]:.5f},{anl[q][n]:.5f}\n")

    # pi-pulse post-processing comparison
    ds_pi = an.pi_pulse_postprocess(ds)
    models_pi = build_models(ds_pi, layout, use_analog=cfg.raw["hmm"]["use_analog"])
    traces_pi = filter_dataset(ds_pi, models_pi)
    with open(outdir / "pi_pulse.csv", "w") as fh:
        fh.write("qubit,optimality_baseline,optimality_pi_pulse\n")
        for qpos, q in enumerate(TRACKED_ORDER[:3]):
            truth = ds.truth[:, qpos, :] > 0
            o0 = an.optimality(curves[q], truth)
            o1 = an.optimality(an.pr_curve(traces_pi[:, qpos, :], truth), truth)
            fh.write(f"{q},{o0:.5f},{o1:.5f}\n")

    if figures:
        data_curves = {q: curves[q] for q in TRACKED_ORDER[:3]}
        anc_curves = {q: curves[q] for q in TRACKED_ORDER[3:]}
        plots.save_pr_curves(outdir / "pr_data_qubits.png", data_curves)
        plots.save_pr_curves(outdir / "pr_ancillas.png", anc_curves)
        plots.save_responses(outdir / "responses.png",
                             {q: responses[q] for q in TRACKED_ORDER[:3]})
        plots.save_crosstalk(outdir / "crosstalk.png", matrix, list(TRACKED_ORDER))
        plots.save_steady_state(outdir / "steady_state.png", cycles,
                                {q: emp[q] for q in TRACKED_ORDER[:3]},
                                {q: anl[q] for q in TRACKED_ORDER[:3]})
    click.echo(f"wrote analysis tables to {outdir}")


@main.command()
@with_std_options
@click.option("--dataset", default=None)
@click.option("--traces", "traces_path", default=None)
@click.option("--decode", "decode_path", default=None)
@click.option("--figures/--no-figures", default=True, show_default=True)
def pareto(config_path, seed, workers, out, dataset, traces_path,
           decode_path, figures) -> None:
    """NSGA-II Pareto front over per-qubit post-selection thresholds."""
    cfg = _load_config(config_path, seed, workers)
    outdir = _outdir(out)
    ds = RunDataset.load(dataset or outdir / "dataset.npz")
    with np.load(traces_path or outdir / "traces.npz") as z:
        traces = z["traces"]
    with np.load(decode_path or outdir / "decode.npz") as z:
        prefixes, declared = z["prefixes"], z["declared"]
    success = declared == 0

    max_post = traces.max(axis=2)
    points = an.pareto_front(max_post, success, prefixes, cfg.ga_config())

    # ground-truth post-selection single point
    truth_flag = (ds.truth > 0).any(axis=(1, 2))
    f_truth = float(truth_flag.mean())
    fit_truth = fit_error_rate_bootstrap(prefixes, success[~truth_flag], n_boot=100)

    with open(outdir / "pareto.csv", "w") as fh:
        fh.write("f,eps,eps_lo,eps_hi," + ",".join(
            f"th_{q}" for q in TRACKED_ORDER) + "\n")
        for p in points:
            lo, hi = p.eps_ci if p.eps_ci else ("", "")
            ths = ",".join(f"{p.thresholds[q]:.4f}" for q in TRACKED_ORDER)
            fh.write(f"{p.f:.5f},{p.eps:.6f},{lo},{hi},{ths}\n")
    with open(outdir / "pareto_truth_reference.json", "w") as fh:
        json.dump({"f": f_truth, "eps": fit_truth.eps,
                   "eps_ci": fit_truth.eps_ci}, fh)

    if figures:
        plots.save_pareto(outdir / "pareto.png", points,
                          truth_point=(f_truth, fit_truth.eps))
    click.echo(f"wrote {outdir / 'pareto.csv'} ({len(points)} front points); "
               f"truth-based point f={f_truth:.3f}, eps={fit_truth.eps:.4f}")


@main.command(name="oracle")
@with_std_options
@click.option("--phi-points", default=5, show_default=True,
              help="Number of conditional-phase samples in [0, pi].")
@click.option("--figures/--no-figures", default=True, show_default=True)
def oracle_cmd(config_path, seed, workers, out, phi_points, figures) -> None:
    """Exact verification report: check algebra, gauge statistics, twirls."""
    from . import oracle as orc

    outdir = _outdir(out)
    rng = np.random.default_rng(0)
    lines = ["# exact-model verification report", ""]

    lines.append("## leaked-plaquette operator identities (20 random phases)")
    worst = {"anti_computational": 0.0, "comm_leaked": 0.0, "anti_weight4_leaked": 0.0}
    for phi in rng.uniform(0, 2 * math.pi, size=20):
        for k, v in orc.anticommutation_checks(float(phi)).items():
            worst[k] = max(worst[k], v)
    for k, v in worst.items():
        lines.append(f"  max |{k}| = {v:.3e}")
    lines.append(f"  projector residual at phi=0:  {orc.projector_residual(0.0):.3e}")
    lines.append(f"  projector residual at phi=pi: {orc.projector_residual(math.pi):.3e}")

    lines.append("")
    lines.append("## Pauli-twirl closed forms vs exact channels")
    dev = orc.twirl_compare(20.0, 30.0, 60.0)
    lines.append(f"  damping twirl deviation (t=20ns, T1=30us, Tphi=60us): {dev:.3e}")
    from .errmodel import phase_flip_prob

    worst_rz = 0.0
    for phi in rng.uniform(0, 2 * math.pi, size=10):
        pz = orc.exact_rz_twirl(float(phi))[2]
        worst_rz = max(worst_rz, abs(pz - phase_flip_prob(float(phi))))
    lines.append(f"  Rz twirl deviation over 10 random phases: {worst_rz:.3e}")

    lines.append("")
    lines.append("## supercheck defect probability vs conditional phase")
    phis = np.linspace(0, math.pi, phi_points)
    exact = {"X": [], "Z": []}
    for phi in phis:
        st = orc.plaquette_outcome_distribution(float(phi))
        exact["X"].append(st.supercheck_defect["X"])
        exact["Z"].append(st.supercheck_defect["Z"])
        lines.append(f"  phi={phi:.4f}  pd_X={st.supercheck_defect['X']:.5f}  "
                     f"pd_Z={st.supercheck_defect['Z']:.5f}  "
                     f"gauge marginals={np.round(st.marginal_p1[-1], 4).tolist()}")
    with open(outdir / "supercheck_pd.csv", "w") as fh:
        fh.write("phi,pd_exact_X,pd_exact_Z,pd_rule\n")
        for i, phi in enumerate(phis):
            rule = 2 * (math.sin(phi) ** 2 / 2) * (1 - math.sin(phi) ** 2 / 2)
            fh.write(f"{phi:.5f},{exact['X'][i]:.6f},{exact['Z'][i]:.6f},{rule:.6f}\n")

    (outdir / "oracle_report.txt").write_text("\n".join(lines) + "\n")
    if figures:
        plots.save_supercheck_pd(outdir / "supercheck_pd.png", phis,
                                 {k: np.array(v) for k, v in exact.items()})
    click.echo(f"wrote {outdir / 'oracle_report.txt'}")


@main.command(name="steady-state")
@with_std_options
@click.option("--n-cycles", default=50, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def steady_state_cmd(config_path, seed, workers, out, n_cycles, figures) -> None:
    """Analytic steady-state populations and approach curves per tracked qubit."""
    cfg = _load_config(config_path, seed, workers)
    outdir = _outdir(out)
    layout = cfg.layout()
    leakage, coherence = cfg.leakage_params(), cfg.coherence_params()
    cycles = np.arange(1, n_cycles + 1)
    anl = {}
    with open(outdir / "steady_state_analytic.csv", "w") as fh:
        fh.write("qubit,p_ss_L,p_ss_L2,p_ss_L3\n")
        for q in TRACKED_ORDER:
            rates = transition_rates(layout, q, leakage, coherence)
            model = an.steady_state(rates)
            anl[q] = an.leak_evolution(rates, cycles)
            if "L" in model.p_ss:
                fh.write(f"{q},{model.p_ss['L']:.6f},,\n")
            else:
                fh.write(f"{q},,{model.p_ss['L2']:.6f},{model.p_ss['L3']:.6f}\n")
    with open(outdir / "steady_state_curves.csv", "w") as fh:
        fh.write("qubit,cycle,p_leak\n")
        for q in TRACKED_ORDER:
            for n in range(n_cycles):
                fh.write(f"{q},{n + 1},{anl[q][n]:.6f}\n")
    if figures:
        plots.save_steady_state(
            outdir / "steady_state_analytic.png", cycles,
            {q: anl[q] for q in TRACKED_ORDER[:3]},
            {q: anl[q] for q in TRACKED_ORDER[:3]},
        )
    click.echo(f"wrote {outdir / 'steady_state_analytic.csv'}")


if __name__ == "__main__":
    main()
