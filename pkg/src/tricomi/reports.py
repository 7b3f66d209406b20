"""CSV, manifest and figure emission for the CLI report paths.

Float cells are written with repr (shortest round-tripping form), so a
fixed configuration and seed reproduce byte-identical files.  Figures
are rendered next to the delimited output.
"""

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["write_csv", "write_manifest", "line_figure", "scatter_figure",
           "trace_figure"]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_manifest(path, entries):
    """Flat key = value manifest, keys sorted for reproducibility."""
    with open(path, "w") as fh:
        for k in sorted(entries):
            fh.write(f"{k} = {_fmt(entries[k])}\n")
    return path


def line_figure(path, xs, series, xlabel, ylabel, title, logy=False):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, ys in series.items():
        ax.plot(xs, ys, marker=".", lw=1.0, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if len(series) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def scatter_figure(path, xs, ys, xlabel, ylabel, title, logy=True, hline=None):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(xs, ys, ".", ms=4)
    if logy:
        ax.set_yscale("log")
    if hline is not None:
        ax.axhline(hline, color="tab:red", lw=1.0, ls="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def trace_figure(path, traces, title):
    """Successive-difference norms of one or more iteration traces."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, trace in traces.items():
        ks = [r["iter"] for r in trace.rows]
        ds = [max(r["diff"], 1e-300) for r in trace.rows]
        ax.semilogy(ks, ds, marker="o", lw=1.0, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("successive difference norm")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
