"""Figures and CSV tables written next to a metrics report."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import MetricsReport  # noqa: E402


def write_tables(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "cd_frames.csv"]
    with open(paths[0], "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frame", "cd_cm"])
        for t, cd in zip(report.frames, report.cd_frames):
            w.writerow([t, f"{cd:.6f}"])
    for key, values in sorted(report.traces.items()):
        p = out_dir / f"trace_{key}.csv"
        with open(p, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step", key])
            w.writerows([i, f"{v:.9g}"] for i, v in enumerate(values))
        paths.append(p)
    return paths


def write_figures(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    if report.frames:
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.plot(report.frames, report.cd_frames, "o-")
        ax.axhline(report.cd, color="k", lw=0.8, ls="--", label="canonical")
        ax.set_xlabel("frame")
        ax.set_ylabel("CD (cm)")
        ax.legend()
        fig.tight_layout()
        paths.append(out_dir / "cd_frames.png")
        fig.savefig(paths[-1], dpi=100)
        plt.close(fig)
    traces = {k: v for k, v in sorted(report.traces.items()) if k.endswith("objective") and v}
    if traces:
        fig, axes = plt.subplots(len(traces), 1, figsize=(6, 2.5 * len(traces)), squeeze=False)
        for ax, (key, values) in zip(axes[:, 0], traces.items()):
            ax.semilogy(values) if min(values) > 0 else ax.plot(values)
            ax.set_ylabel(key.replace("_", " "))
        axes[-1, 0].set_xlabel("step")
        fig.tight_layout()
        paths.append(out_dir / "objectives.png")
        fig.savefig(paths[-1], dpi=100)
        plt.close(fig)
    return paths


def write_report_artifacts(report: MetricsReport, report_path: str | Path) -> list[Path]:
    """Save the report JSON plus its CSV tables and figures in the same directory."""
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report.save(report_path)
    return [report_path] + write_tables(report, report_path.parent) + write_figures(report, report_path.parent)
