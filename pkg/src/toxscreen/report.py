"""Report rendering: delimited data files plus matplotlib figures.

Every writer emits the tabular file first (the source of truth) and a
figure alongside it.  Figures carry fixed metadata so identical inputs
produce identical files.
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EvalReport, report_to_text

log = logging.getLogger(__name__)

_PNG_META = {"Software": "toxscreen"}


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def write_eval_report(outdir: str | Path, report: EvalReport,
                      checksum: str = "") -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    text = report_to_text(report)
    if checksum:
        text = f"# config-checksum {checksum}\n" + text
    report_path = outdir / "report.tsv"
    report_path.write_text(text)
    written.append(report_path)
    if report.correlation is not None and len(report.member_names) > 1:
        written.append(_correlation_figure(outdir, report))
    written.append(_summary_figure(outdir, report))
    return written


def _correlation_figure(outdir: Path, report: EvalReport) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4.2))
    matrix = np.array(report.correlation, dtype=float)
    im = ax.imshow(matrix, vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(len(report.member_names)))
    ax.set_yticks(range(len(report.member_names)))
    ax.set_xticklabels(report.member_names, rotation=45, ha="right",
                       fontsize=7)
    ax.set_yticklabels(report.member_names, fontsize=7)
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            if np.isfinite(matrix[i, j]):
                ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center",
                        va="center", fontsize=6)
    ax.set_title("Member prediction correlation")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    path = outdir / "correlation.png"
    _save(fig, path)
    return path


def _summary_figure(outdir: Path, report: EvalReport) -> Path:
    summary = report.summary()
    models = report.models()
    strategies = report.strategies()
    fig, ax = plt.subplots(figsize=(6.5, 3.8))
    width = 0.8 / max(len(strategies), 1)
    x = np.arange(len(models))
    for s, strategy in enumerate(strategies):
        values = [summary.get((m, strategy), (np.nan,))[0] for m in models]
        values = [v if v is not None else np.nan for v in values]
        ax.bar(x + s * width, values, width, label=strategy)
    ax.set_xticks(x + width * (len(strategies) - 1) / 2)
    ax.set_xticklabels(models, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("mean test AUC")
    ax.set_ylim(0.0, 1.0)
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = outdir / "summary.png"
    _save(fig, path)
    return path


def write_importance(outdir: str | Path, names: list[str],
                     gains: np.ndarray, checksum: str = "",
                     top: int = 25) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    order = np.argsort(-np.asarray(gains), kind="stable")
    lines = [f"# config-checksum {checksum}", "feature\tgain"]
    for i in order:
        lines.append(f"{names[i]}\t{gains[i]:.6f}")
    path = outdir / "importance.tsv"
    path.write_text("\n".join(lines) + "\n")
    head = order[:top][::-1]
    fig, ax = plt.subplots(figsize=(6, 0.25 * len(head) + 1.2))
    ax.barh(range(len(head)), [gains[i] for i in head])
    ax.set_yticks(range(len(head)))
    ax.set_yticklabels([names[i] for i in head], fontsize=6)
    ax.set_xlabel("normalized gain")
    fig.tight_layout()
    fig_path = outdir / "importance.png"
    _save(fig, fig_path)
    return [path, fig_path]


def _curve_tsv(path: Path, rows: list[dict], key: str,
               checksum: str) -> None:
    lines = [f"# config-checksum {checksum}"]
    if rows:
        header = list(rows[0].keys())
        lines.append("\t".join(header))
        for row in rows:
            cells = []
            for k in header:
                v = row[k]
                cells.append("NA" if v is None
                             else (f"{v:.6f}" if isinstance(v, float) else str(v)))
            lines.append("\t".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_reliability(outdir: str | Path, reliability_rows: list[dict],
                      complexity_rows: list[dict],
                      checksum: str = "") -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rel_path = outdir / "reliability.tsv"
    cplx_path = outdir / "complexity.tsv"
    _curve_tsv(rel_path, reliability_rows, "threshold", checksum)
    _curve_tsv(cplx_path, complexity_rows, "lo", checksum)
    fig, axes = plt.subplots(1, 2, figsize=(8.5, 3.4))
    taus = [r["threshold"] for r in reliability_rows if r["mean_auc"] is not None]
    aucs = [r["mean_auc"] for r in reliability_rows if r["mean_auc"] is not None]
    axes[0].plot(taus, aucs, marker="o")
    axes[0].set_xlabel("Jaccard kNN distance threshold")
    axes[0].set_ylabel("mean test AUC")
    mids = [(r["lo"] + r["hi"]) / 2 for r in complexity_rows
            if r["mean_auc"] is not None]
    caucs = [r["mean_auc"] for r in complexity_rows if r["mean_auc"] is not None]
    axes[1].plot(mids, caucs, marker="s")
    axes[1].set_xlabel("fingerprint popcount (bucket center)")
    axes[1].set_ylabel("mean test AUC")
    fig.tight_layout()
    fig_path = outdir / "reliability.png"
    _save(fig, fig_path)
    return [rel_path, cplx_path, fig_path]
