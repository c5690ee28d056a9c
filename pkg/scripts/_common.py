"""Shared helpers for the experiment scripts: CSV output and optional plots."""

from __future__ import annotations

import argparse
import csv
from pathlib import Path


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default="results", help="output directory (default ./results)")
    p.add_argument("--plot", action="store_true", help="also write PNG figures (needs matplotlib)")
    p.add_argument("--quick", action="store_true", help="coarser sweeps for a fast smoke run")
    return p


def write_csv(out: str, name: str, header: list[str], rows) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    f = path / name
    with open(f, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])
    print(f"wrote {f}")
    return f


def semilogy(out: str, name: str, series: dict[str, tuple], xlabel: str, ylabel: str = "relative error") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    for label, (x, y) in series.items():
        ax.semilogy(x, y, "o-", label=label, ms=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    f = Path(out) / name
    fig.savefig(f, dpi=150)
    plt.close(fig)
    print(f"wrote {f}")
