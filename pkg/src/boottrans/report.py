"""Run reports: plots and a structured summary from per-step metrics."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


class MissingMetrics(Exception):
    """The run directory holds no metrics records."""


def load_metrics(run_dir: str | Path) -> list[dict]:
    path = Path(run_dir) / "metrics.jsonl"
    if not path.exists():
        raise MissingMetrics(f"no metrics.jsonl under {run_dir}")
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not records:
        raise MissingMetrics(f"{path} is empty")
    return records


def summarize(records: list[dict]) -> dict:
    """Aggregate per-step metrics; averages are plain means over steps."""
    directions = sorted({d for r in records for d in r.get("reward_rate", {})})
    mean_rate = {}
    for direction in directions:
        values = [r["reward_rate"][direction] for r in records if direction in r.get("reward_rate", {})]
        mean_rate[direction] = sum(values) / len(values)
    objectives = [r["objective"] for r in records if r.get("objective") is not None]
    total_batch = [r.get("skip_count", 0) + r.get("contributing_items", 0) for r in records]
    skipped = [r.get("skip_count", 0) for r in records]
    return {
        "steps": len(records),
        "mean_reward_rate": mean_rate,
        "direction_average": sum(mean_rate.values()) / len(mean_rate) if mean_rate else 0.0,
        "mean_objective": sum(objectives) / len(objectives) if objectives else None,
        "total_skipped": sum(skipped),
        "skip_rate": sum(skipped) / sum(total_batch) if sum(total_batch) else 0.0,
        "final_pool_sizes": records[-1].get("pool_sizes", {}),
    }


def _plot_reward_rates(records: list[dict], path: Path) -> None:
    steps = [r["step"] for r in records]
    directions = sorted({d for r in records for d in r.get("reward_rate", {})})
    fig, ax = plt.subplots(figsize=(8, 5))
    for direction in directions:
        series = [r.get("reward_rate", {}).get(direction) for r in records]
        ax.plot(steps, series, marker="o", markersize=3, label=direction)
    ax.set_xlabel("step")
    ax.set_ylabel("reward rate")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Per-direction reward rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_pool_sizes(records: list[dict], path: Path) -> None:
    steps = [r["step"] for r in records]
    fig, ax = plt.subplots(figsize=(8, 5))
    for pool in ("seed", "explore"):
        ax.plot(steps, [r.get("pool_sizes", {}).get(pool, 0) for r in records], label=pool)
    ax.set_xlabel("step")
    ax.set_ylabel("entries")
    ax.set_title("Pool sizes")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_skip_rate(records: list[dict], path: Path) -> None:
    steps = [r["step"] for r in records]
    rates = []
    for r in records:
        total = r.get("skip_count", 0) + r.get("contributing_items", 0)
        rates.append(r.get("skip_count", 0) / total if total else 0.0)
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(steps, rates, color="firebrick")
    ax.set_xlabel("step")
    ax.set_ylabel("skipped fraction")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Zero-signal items skipped per step")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_direction_matrix(summary: dict, path: Path) -> None:
    mean_rate = summary["mean_reward_rate"]
    headers = list(mean_rate) + ["Avg"]
    values = [f"{v:.3f}" for v in mean_rate.values()] + [f"{summary['direction_average']:.3f}"]
    fig, ax = plt.subplots(figsize=(1.2 * max(4, len(headers)), 1.8))
    ax.axis("off")
    table = ax.table(cellText=[values], colLabels=headers, loc="center", cellLoc="center")
    table.scale(1, 1.6)
    ax.set_title("Mean reward rate by direction", pad=18)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def generate_report(run_dir: str | Path, out_dir: str | Path | None = None) -> dict:
    """Write the four plot files plus summary.json; returns the summary."""
    records = load_metrics(run_dir)
    out = Path(out_dir) if out_dir is not None else Path(run_dir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(records)
    _plot_reward_rates(records, out / "reward_rates.png")
    _plot_pool_sizes(records, out / "pool_sizes.png")
    _plot_skip_rate(records, out / "skip_rate.png")
    _plot_direction_matrix(summary, out / "direction_matrix.png")
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return summary
