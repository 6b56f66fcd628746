"""Matplotlib figure rendering for the analysis outputs.

Each helper writes one PNG next to the delimited tables produced by the
CLI.  Figures are plain and self-contained; styling stays close to
matplotlib defaults.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_steady_state(path: Path, cycles, empirical: dict, analytic: dict) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, (q, emp) in enumerate(empirical.items()):
        color = f"C{i}"
        ax.plot(cycles, emp, ".", ms=4, color=color, label=f"{q} simulated")
        ax.plot(cycles, analytic[q], "-", lw=1.2, color=color)
    ax.set_xlabel("QEC cycle")
    ax.set_ylabel("leakage population")
    ax.legend(fontsize=8)
    ax.set_title("Leakage population vs rate-equation prediction")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_pr_curves(path: Path, curves: dict, baselines: dict | None = None) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    for i, (label, curve) in enumerate(curves.items()):
        if curve is None:
            continue
        order = np.argsort(curve.recall)
        ax.plot(curve.recall[order], curve.precision[order],
                color=f"C{i}", lw=1.2, label=f"{label} (AUC {curve.auc:.2f})")
        if baselines and label in baselines:
            ax.axhline(baselines[label], color=f"C{i}", ls=":", lw=0.8)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_responses(path: Path, responses: dict, ylabel: str = "posterior") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, (label, (offsets, mean, lo, hi)) in enumerate(responses.items()):
        if len(mean) == 0:
            continue
        ax.plot(offsets, mean, "-o", ms=3, lw=1.2, color=f"C{i}", label=label)
        if len(lo):
            ax.fill_between(offsets, lo, hi, color=f"C{i}", alpha=0.2, lw=0)
    ax.axvline(0, color="k", ls="--", lw=0.8)
    ax.set_xlabel("cycles from leakage onset")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_crosstalk(path: Path, matrix: np.ndarray, labels: list[str]) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(matrix, vmin=0, vmax=1, cmap="viridis")
    ax.set_xticks(range(len(labels)), labels, rotation=90, fontsize=7)
    ax.set_yticks(range(len(labels)), labels, fontsize=7)
    ax.set_xlabel("leaked qubit")
    ax.set_ylabel("responding HMM")
    fig.colorbar(im, ax=ax, label="mean posterior 1 cycle after onset")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_pareto(path: Path, points, eps_ref: float | None = None,
                truth_point: tuple[float, float] | None = None) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    fs = [p.f for p in points]
    es = [p.eps for p in points]
    yerr = None
    if points and points[0].eps_ci is not None:
        lo = [p.eps - (p.eps_ci[0] if p.eps_ci else p.eps) for p in points]
        hi = [(p.eps_ci[1] if p.eps_ci else p.eps) - p.eps for p in points]
        yerr = [np.clip(lo, 0, None), np.clip(hi, 0, None)]
    ax.errorbar(fs, es, yerr=yerr, fmt="o-", ms=4, lw=1, capsize=2,
                label="HMM post-selection front")
    if truth_point is not None:
        ax.plot(*truth_point, "s", color="C3", label="ground-truth post-selection")
    if eps_ref is not None:
        ax.axhline(eps_ref, color="k", ls="--", lw=0.8, label="no leakage")
    ax.set_xlabel("discarded fraction f")
    ax.set_ylabel("logical error rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_supercheck_pd(path: Path, phis, exact: dict, stochastic: dict | None = None) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for kind, marker in (("X", "o"), ("Z", "s")):
        ax.plot(phis, exact[kind], marker + "-", label=f"{kind}-type supercheck (exact)")
        if stochastic:
            ax.plot(phis, stochastic[kind], marker, mfc="none",
                    label=f"{kind}-type (sampled)")
    ax.set_xlabel(r"$\phi_{stat}$ (rad)")
    ax.set_ylabel("supercheck defect probability")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
