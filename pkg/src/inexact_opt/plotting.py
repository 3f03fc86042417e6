"""Static SVG figures for run traces and sweeps."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .records import CSV_COLUMNS  # noqa: E402

SWEEP_HEADER = ("eps", "seed", "calls", "iterations", "gap")

# deterministic SVG output: fixed id salt, no timestamp
plt.rcParams["svg.hashsalt"] = "inexact-opt"
# keep labels as <text> so figures stay searchable and small
plt.rcParams["svg.fonttype"] = "none"
_SVG_META = {"Date": None, "Creator": None}


class PlotError(ValueError):
    pass


def read_csv(path) -> tuple:
    """``(kind, rows)`` with kind ``"run"`` or ``"sweep"``; rows are dicts of floats (None for blanks)."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            body = list(reader)
    except (OSError, StopIteration) as e:
        raise PlotError(f"{path}: unreadable CSV ({e})") from None
    if header == CSV_COLUMNS:
        kind = "run"
    elif header == SWEEP_HEADER:
        kind = "sweep"
    else:
        raise PlotError(f"{path}: unknown header {','.join(header)}")
    rows = []
    for i, line in enumerate(body, start=2):
        if len(line) != len(header):
            raise PlotError(f"{path}:{i}: expected {len(header)} fields, got {len(line)}")
        try:
            rows.append({h: (float(v) if v != "" else None) for h, v in zip(header, line)})
        except ValueError:
            raise PlotError(f"{path}:{i}: non-numeric field") from None
    return kind, rows


def _save(fig, path: Path):
    for ax in fig.axes:
        # records the axis scales in the SVG for structural checks
        ax.set_gid(f"axes_x{ax.get_xscale()}_y{ax.get_yscale()}")
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_runs(paths: Sequence, out: Path, labels: Optional[Sequence[str]] = None) -> Path:
    """Gap against iteration on log-log axes; several traces overlay (e.g. bias floors for several delta)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, p in enumerate(paths):
        _, rows = read_csv(p)
        k = np.array([r["k"] for r in rows])
        g = np.array([r["gap"] for r in rows])
        ok = (k > 0) & (g > 0)
        ax.plot(k[ok], g[ok], label=labels[i] if labels else Path(p).stem, gid=f"trace_{i}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("iteration k")
    ax.set_ylabel("f(x) - f*")
    ax.legend(fontsize=7)
    _save(fig, out)
    return out


def plot_sweep(path, out: Path, report: Optional[dict] = None) -> Path:
    """Median calls against ``1/eps`` with fitted and theoretical slopes."""
    _, rows = read_csv(path)
    if report is None:
        side = Path(path).with_suffix(".json")
        report = json.loads(side.read_text("utf-8")) if side.exists() else {}
    eps = sorted({r["eps"] for r in rows}, reverse=True)
    med = []
    for e in eps:
        c = [r["calls"] for r in rows if r["eps"] == e]
        med.append(None if any(v is None for v in c) else float(np.median(c)))
    x = np.array([1.0 / e for e, m in zip(eps, med) if m is not None])
    y = np.array([m for m in med if m is not None])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, "o", gid="points", label="median calls")
    note = []
    fit = report.get("fit")
    if fit and x.size:
        used = np.array([1.0 / e for e in report.get("fitted_points", eps)]) if report.get("fitted_points") else x
        xs = np.array([used.min(), used.max()])
        ax.plot(xs, np.exp(fit["intercept"]) * xs ** fit["slope"], "-", gid="fit_line",
                label=f"fit {fit['slope']:.2f}")
        note.append(f"fitted slope {fit['slope']:.3f}")
        theory = report.get("theory")
        if theory is not None:
            anchor = np.exp(fit["intercept"]) * xs[0] ** fit["slope"]
            ax.plot(xs, anchor * (xs / xs[0]) ** theory, "--", gid="theory_line", label=f"theory {theory:.2f}")
            note.append(f"theory slope {theory:.3f}")
    elif x.size >= 2:
        s = np.polyfit(np.log(x), np.log(y), 1)[0]
        note.append(f"fitted slope {s:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("1/eps")
    ax.set_ylabel("oracle calls")
    ax.set_title("; ".join(note) if note else "calls to target", fontsize=9)
    ax.legend(fontsize=7)
    _save(fig, out)
    return out


def plot_files(paths: Sequence, out_dir) -> List[Path]:
    """One figure per sweep CSV and one overlay for all run CSVs; returns written files."""
    out_dir = Path(out_dir)
    runs, sweeps = [], []
    for p in paths:
        kind, _ = read_csv(p)
        (runs if kind == "run" else sweeps).append(p)
    written = []
    if runs:
        written.append(plot_runs(runs, out_dir / "gap_vs_iteration.svg"))
    for p in sweeps:
        written.append(plot_sweep(p, out_dir / (Path(p).stem + "_calls_vs_eps.svg")))
    return written
