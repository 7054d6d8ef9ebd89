"""Post-hoc chart rendering from run/bench CSV files (headless Agg backend)."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _read_csv(path, required: tuple) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        missing = [c for c in required if c not in columns]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def score_chart(scores_csv, out_path) -> Path:
    """Score-versus-time step chart, one series per vehicle."""
    rows = _read_csv(scores_csv, ("time_ms", "vehicle", "score"))
    series: dict[str, tuple[list, list]] = {}
    for row in rows:
        xs, ys = series.setdefault(row["vehicle"], ([], []))
        xs.append(int(row["time_ms"]) / 3_600_000)
        ys.append(float(row["score"]))
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name in sorted(series):
        xs, ys = series[name]
        ax.step(xs, ys, where="post", label=name)
    ax.set_xlabel("time (h)")
    ax.set_ylabel("reputation score")
    ax.set_ylim(0, 100)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return Path(out_path)


def bench_chart(bench_csv, out_path) -> Path:
    """Measured and analytic verification time against ledger size (log x)."""
    rows = _read_csv(bench_csv, ("n", "measured_ms", "predicted_ms"))
    ns = [int(r["n"]) for r in rows]
    measured = [float(r["measured_ms"]) for r in rows]
    predicted = [float(r["predicted_ms"]) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(ns, measured, marker="o", label="measured")
    ax.plot(ns, predicted, marker="s", linestyle="--", label="analytic model")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("issued certificates n (m = 0.1n)")
    ax.set_ylabel("verification time (ms)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return Path(out_path)


def emit_plots(out_dir, scores_csv=None, bench_csv=None) -> list[Path]:
    """Render whichever charts the provided CSVs support."""
    if scores_csv is None and bench_csv is None:
        raise ValueError("nothing to plot: provide a scores or bench CSV")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    produced = []
    if scores_csv is not None:
        produced.append(score_chart(scores_csv, out / "scores.png"))
    if bench_csv is not None:
        produced.append(bench_chart(bench_csv, out / "bench.png"))
    return produced
