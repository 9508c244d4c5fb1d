"""CSV and PNG side outputs for the run, normalize and certify subcommands."""

from __future__ import annotations

import csv
from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rc("figure", figsize=(5, 3))
plt.rc("axes", linewidth=0.5)
plt.rc("font", size=9)


def write_csv(path: Path, rows: list, fields: list) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    return path


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def run_report(out_dir: Path, stem: str, result) -> list:
    """One CSV row per deposited message; the plot shows cumulative internal and external sends."""
    rows = [m.to_json() for m in result.trace]
    paths = [write_csv(out_dir / f"{stem}.trace.csv", rows,
                       ["step", "channel", "gen", "payload", "sender", "external"])]
    fig, ax = plt.subplots()
    for external, colour in ((False, "0.3"), (True, "tab:red")):
        steps = [m.step for m in result.trace if m.external == external]
        ax.step(steps, range(1, len(steps) + 1), where="post", color=colour,
                label="external" if external else "internal")
    ax.set_xlabel("step")
    ax.set_ylabel("messages sent")
    ax.set_title(f"{stem}: {result.outcome}")
    ax.legend(frameon=False)
    paths.append(_save(fig, out_dir / f"{stem}.trace.png"))
    return paths


def normalize_report(out_dir: Path, stem: str, result) -> list:
    """Emitted nodes and reduction events per layer of the cut-free prefix."""
    nodes = Counter(nid.count(".") for nid in result.derivation.nodes)
    events = Counter(e.address.count(".") for e in result.events)
    layers = sorted(set(nodes) | set(events))
    rows = [{"layer": k, "nodes": nodes.get(k, 0), "events": events.get(k, 0)} for k in layers]
    paths = [write_csv(out_dir / f"{stem}.layers.csv", rows, ["layer", "nodes", "events"])]
    fig, ax = plt.subplots()
    ax.bar([k - 0.2 for k in layers], [nodes.get(k, 0) for k in layers], width=0.4, color="0.4", label="nodes")
    ax.bar([k + 0.2 for k in layers], [events.get(k, 0) for k in layers], width=0.4, color="tab:blue",
           label="events")
    ax.set_xlabel("layer")
    ax.set_title(f"{stem}: {result.treat_events} treat events")
    ax.legend(frameon=False)
    paths.append(_save(fig, out_dir / f"{stem}.layers.png"))
    return paths


def certify_report(out_dir: Path, stem: str, summary: dict, timings: dict) -> list:
    """Stage verdicts with wall-clock time; the plot is a bar per stage, red when the stage failed."""
    rows = [{"stage": k, "verdict": summary.get(k), "seconds": f"{t:.6f}"} for k, t in timings.items()]
    paths = [write_csv(out_dir / f"{stem}.certify.csv", rows, ["stage", "verdict", "seconds"])]
    fig, ax = plt.subplots()
    colours = ["tab:red" if _failed(summary.get(k)) else "0.4" for k in timings]
    ax.barh(list(timings), list(timings.values()), color=colours)
    ax.invert_yaxis()
    ax.set_xlabel("seconds")
    ax.set_title(f"{stem}: {'certified' if summary.get('certified') else 'not certified'}")
    paths.append(_save(fig, out_dir / f"{stem}.certify.png"))
    return paths


def _failed(verdict) -> bool:
    text = str(verdict or "")
    return text.startswith(("Invalid", "Unguarded", "divergence"))
