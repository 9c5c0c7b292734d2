"""Report rendering: table-shaped summaries, scatter data, matplotlib figures."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from . import stats  # noqa: E402
from .util import fmt_float, write_tsv  # noqa: E402

_PNG_METADATA = {"Software": "sociolect"}  # keeps renders byte-reproducible
_FIG_KW = dict(figsize=(4.2, 3.2), dpi=150)


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def scatter_figure(
    outdir: str | Path,
    name: str,
    points: Sequence[tuple[str, float, float]],
    xlabel: str,
    ylabel: str,
    title: str = "",
    render: bool = True,
    comment: str | None = None,
) -> None:
    """Write 2-column scatter data as TSV and, optionally, a PNG render."""
    outdir = Path(outdir)
    rows = sorted(points)
    write_tsv(outdir / f"{name}.tsv", ("community", "x", "y"), rows, comment=comment)
    if not render or not rows:
        return
    xs = [r[1] for r in rows]
    ys = [r[2] for r in rows]
    fig, ax = plt.subplots(**_FIG_KW)
    ax.scatter(xs, ys, s=12, alpha=0.7, edgecolors="none")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=9)
    _save(fig, outdir / f"{name}.png")


def bar_figure(
    outdir: str | Path,
    name: str,
    bars: Sequence[tuple[str, float]],
    ylabel: str,
    render: bool = True,
    comment: str | None = None,
) -> None:
    outdir = Path(outdir)
    rows = sorted(bars, key=lambda kv: (-kv[1], kv[0]))
    write_tsv(outdir / f"{name}.tsv", ("label", "value"), rows, comment=comment)
    if not render or not rows:
        return
    labels = [r[0] for r in rows]
    values = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.2, 0.5 * len(rows)), 3.2), dpi=150)
    ax.bar(range(len(rows)), values)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel(ylabel)
    _save(fig, outdir / f"{name}.png")


def regression_text(results: Mapping[str, "stats.RegressionResult"]) -> str:
    """Side-by-side OLS columns: estimates with standard errors and stars."""
    models = list(results)
    names: list[str] = []
    for res in results.values():
        for c in res.coefficients:
            if c.name not in names:
                names.append(c.name)
    width = max([len(n) for n in names + ["intercept", "Adjusted R2"]]) + 2
    col = 22

    def cell(c) -> str:
        return f"{c.estimate:.4f}{c.stars}"

    def secell(c) -> str:
        return f"({c.stderr:.4f})"

    lines = []
    lines.append(" " * width + "".join(f"({i + 1})".center(col) for i in range(len(models))))
    lines.append("-" * (width + col * len(models)))
    rows: list[tuple[str, list[str], list[str]]] = []
    rows.append(("intercept",
                 [cell(results[m].intercept) for m in models],
                 [secell(results[m].intercept) for m in models]))
    for name in names:
        vals, ses = [], []
        for m in models:
            match = [c for c in results[m].coefficients if c.name == name]
            vals.append(cell(match[0]) if match else "")
            ses.append(secell(match[0]) if match else "")
        rows.append((name, vals, ses))
    for name, vals, ses in rows:
        lines.append(name.ljust(width) + "".join(v.center(col) for v in vals))
        lines.append(" " * width + "".join(s.center(col) for s in ses))
    lines.append("-" * (width + col * len(models)))
    lines.append("Observations".ljust(width)
                 + "".join(str(results[m].n).center(col) for m in models))
    lines.append("R2".ljust(width)
                 + "".join(f"{results[m].r_squared:.3f}".center(col) for m in models))
    lines.append("Adjusted R2".ljust(width)
                 + "".join(f"{results[m].adj_r_squared:.3f}".center(col) for m in models))
    lines.append("Note: *p<0.05, **p<0.01, ***p<0.001")
    return "\n".join(lines) + "\n"


def regression_rows(results: Mapping[str, "stats.RegressionResult"]):
    rows = []
    for model, res in results.items():
        for c in (res.intercept, *res.coefficients):
            rows.append((model, c.name, fmt_float(c.estimate), fmt_float(c.stderr),
                         fmt_float(c.p_value), c.stars))
        rows.append((model, "r_squared", fmt_float(res.r_squared), "", "", ""))
        rows.append((model, "adj_r_squared", fmt_float(res.adj_r_squared), "", "", ""))
        rows.append((model, "n", str(res.n), "", "", ""))
    return rows
