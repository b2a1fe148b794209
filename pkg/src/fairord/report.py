"""File output for experiment results: delimited tables plus rendered figures.

Every writer is byte-deterministic for fixed inputs.  CSV cells use Python's
shortest-roundtrip float repr, JSON is sorted and indented, and PNG metadata
is pinned so re-running a command reproduces identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .pipeline import FrontierPoint, MixturePoint, frontier_rows  # noqa: E402
from .simulate import ConvergenceResult, SimulationResult  # noqa: E402

__all__ = [
    "write_csv", "write_json",
    "frontier_csv", "mixture_csv", "simulation_csv", "convergence_csv",
    "frontier_figure", "mixture_figure", "simulation_figure",
    "convergence_figure",
]

FRONTIER_COLUMNS = ("mu_lambda", "split", "cost", "violation", "scorer_gap",
                    "seed")
MIXTURE_COLUMNS = ("p", "cost", "violation")
SIMULATION_COLUMNS = ("scorer_violation", "fair_fraction", "multiplicity")
CONVERGENCE_COLUMNS = ("n", "mean_deviation", "quantile_deviation")

_PNG_METADATA = {"Software": "fairord"}
_SPLIT_STYLE = {"train": dict(color="#1b6ca8", marker="o"),
                "test": dict(color="#c2571a", marker="s")}


def write_csv(path, rows: list[dict], columns) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def frontier_csv(path, points: list[FrontierPoint]) -> Path:
    return write_csv(path, frontier_rows(points), FRONTIER_COLUMNS)


def mixture_csv(path, points: list[MixturePoint]) -> Path:
    rows = [{"p": pt.p, "cost": pt.cost, "violation": pt.violation}
            for pt in points]
    return write_csv(path, rows, MIXTURE_COLUMNS)


def simulation_csv(path, result: SimulationResult) -> Path:
    return write_csv(path, result.to_rows(), SIMULATION_COLUMNS)


def convergence_csv(path, result: ConvergenceResult) -> Path:
    return write_csv(path, result.to_rows(), CONVERGENCE_COLUMNS)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def frontier_figure(path, points: list[FrontierPoint],
                    notion_label: str = "violation") -> Path:
    """Cost against violation, one line per split, ordered by the knob."""
    fig, ax = plt.subplots(figsize=(5.0, 3.75), constrained_layout=True)
    rows = frontier_rows(points)
    for split in ("train", "test"):
        chosen = sorted((r for r in rows if r["split"] == split),
                        key=lambda r: r["mu_lambda"])
        if not chosen:
            continue
        ax.plot([r["violation"] for r in chosen],
                [r["cost"] for r in chosen],
                label=split, markersize=4, linewidth=1.2,
                **_SPLIT_STYLE[split])
    ax.set_xlabel(notion_label)
    ax.set_ylabel("cost")
    ax.set_title("cost vs fairness trade-off")
    ax.legend()
    return _save(fig, path)


def mixture_figure(path, points: list[MixturePoint],
                   notion_label: str = "violation") -> Path:
    """Path traced by mixing a trained model with the constant median."""
    fig, ax = plt.subplots(figsize=(5.0, 3.75), constrained_layout=True)
    ordered = sorted(points, key=lambda pt: pt.p)
    ax.plot([pt.violation for pt in ordered], [pt.cost for pt in ordered],
            color="#555555", linewidth=1.0, zorder=1)
    scatter = ax.scatter([pt.violation for pt in ordered],
                         [pt.cost for pt in ordered],
                         c=[pt.p for pt in ordered], cmap="viridis",
                         s=18, zorder=2)
    fig.colorbar(scatter, ax=ax, label="median weight p")
    ax.set_xlabel(notion_label)
    ax.set_ylabel("cost")
    ax.set_title("randomized median mixture")
    return _save(fig, path)


def simulation_figure(path, result: SimulationResult) -> Path:
    """Fair-threshold fraction against scorer violation per arrangement."""
    fig, ax = plt.subplots(figsize=(5.0, 3.75), constrained_layout=True)
    rows = result.to_rows()
    sizes = [10.0 + 3.0 * r["multiplicity"] for r in rows]
    ax.scatter([r["scorer_violation"] for r in rows],
               [r["fair_fraction"] for r in rows],
               s=sizes, alpha=0.6, color="#1b6ca8", edgecolors="none")
    ax.set_xlabel("scorer violation")
    ax.set_ylabel("fraction of fair threshold placements")
    title = f"n={result.n}, k={result.k}, {result.num_placements} placements"
    if result.spearman is not None:
        title += f", spearman={result.spearman:.3f}"
    ax.set_title(title)
    return _save(fig, path)


def convergence_figure(path, result: ConvergenceResult) -> Path:
    """Sampling deviation from the population violation as n grows."""
    fig, ax = plt.subplots(figsize=(5.0, 3.75), constrained_layout=True)
    rows = result.to_rows()
    ns = [r["n"] for r in rows]
    q = 1.0 - result.delta
    ax.plot(ns, [r["quantile_deviation"] for r in rows], marker="o",
            markersize=4, color="#c2571a", label=f"{q:g}-quantile")
    ax.plot(ns, [r["mean_deviation"] for r in rows], marker="s",
            markersize=4, color="#1b6ca8", label="mean")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("|sample viol - population viol|")
    ax.set_title(f"{result.repetitions} repetitions per size")
    ax.legend()
    return _save(fig, path)
