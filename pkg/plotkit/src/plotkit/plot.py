"""Error-rate curve plotting and the plot_results command line tool."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .results import ResultsTable, load_results

__all__ = ["uncoded_bpsk_theory", "plot_ber", "main"]

Y_FLOOR = 1e-8

THEORY_CURVES = {"uncoded-bpsk": lambda x: _qfunc(np.sqrt(2.0 * 10.0 ** (x / 10.0)))}


def _qfunc(x):
    return 0.5 * np.vectorize(math.erfc)(x / math.sqrt(2.0))


def uncoded_bpsk_theory(ebn0_db):
    """Bit error rate of uncoded BPSK on AWGN at the given Eb/N0 in dB."""
    return THEORY_CURVES["uncoded-bpsk"](np.asarray(ebn0_db, dtype=np.float64))


def plot_ber(
    tables: list[ResultsTable],
    labels: list[str],
    output: str,
    overlay_theory: str | None = None,
) -> list[str]:
    """Write log-scale error-rate curves with interval error bars.

    Returns the written file paths: the requested image plus its PNG/SVG
    sibling, so both formats are always emitted.
    """
    if not tables or all(len(t) == 0 for t in tables):
        raise ValueError("nothing to plot: no data rows in the given tables")
    if len(labels) != len(tables):
        raise ValueError(f"{len(tables)} tables but {len(labels)} labels")

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    low = math.inf
    for table, label in zip(tables, labels):
        if len(table) == 0:
            continue
        for m, measure in enumerate(table.labels):
            est = table.estimates[:, m]
            marker = "o" if len(table) > 1 else "s"
            ax.errorbar(
                table.parameters, est, yerr=table.margins[:, m],
                marker=marker, markersize=3, linewidth=1.0, capsize=2,
                label=f"{label} {measure}",
            )
            positive = est[est > 0]
            if positive.size:
                low = min(low, positive.min())
    if overlay_theory is not None:
        if overlay_theory not in THEORY_CURVES:
            raise ValueError(f"unknown theory curve {overlay_theory!r}")
        lo = min(t.parameters.min() for t in tables if len(t))
        hi = max(t.parameters.max() for t in tables if len(t))
        xs = np.linspace(lo, hi, 400)
        ys = THEORY_CURVES[overlay_theory](xs)
        ax.plot(xs, ys, "k--", linewidth=1.0, label=f"theory {overlay_theory}")
        low = min(low, ys[ys > 0].min())

    ax.set_yscale("log")
    bottom = max(low / 3.0 if math.isfinite(low) else Y_FLOOR, Y_FLOOR)
    ax.set_ylim(bottom=bottom)
    ax.set_xlabel("channel parameter (dB)")
    ax.set_ylabel("error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()

    out = Path(output)
    sibling = out.with_suffix(".svg" if out.suffix.lower() == ".png" else ".png")
    written = []
    for target in (out, sibling):
        fig.savefig(target)
        written.append(str(target))
    plt.close(fig)
    return written


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot_results", description="plot error-rate curves from results files"
    )
    parser.add_argument("files", nargs="+", help="results files to plot")
    parser.add_argument("--labels", nargs="*", default=None,
                        help="one curve label per file (default: file stems)")
    parser.add_argument("--theory", choices=sorted(THEORY_CURVES), default=None,
                        help="overlay a theoretical reference curve")
    parser.add_argument("-o", dest="output", required=True, help="output image path")
    args = parser.parse_args(argv)

    labels = args.labels if args.labels else [Path(f).stem for f in args.files]
    if len(labels) != len(args.files):
        print(f"error: {len(args.files)} files but {len(labels)} labels", file=sys.stderr)
        return 1
    try:
        tables = [load_results(f) for f in args.files]
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        written = plot_ber(tables, labels, args.output, overlay_theory=args.theory)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
