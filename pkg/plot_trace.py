"""
Plot Trace
Renders objective values and prox-gradient norms from trace CSVs against cumulative basic operations
"""

import argparse
import logging
import sys
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from output_module import read_trace_csv  # noqa: E402

logger = logging.getLogger(__name__)

_OPS = ("n_c_eval", "n_jvp", "n_vjp", "n_prox_h", "n_prox_g")


def _series(rows, key: str) -> List[float]:
    return [float(r[key]) if r.get(key) not in (None, "") else float("nan") for r in rows]


def plot_traces(paths: List[str], out: str, labels: Optional[List[str]] = None) -> None:
    """
    Two log-scale panels, F and |G|, against cumulative basic operations.

    Args:
        paths: Trace CSVs written by the runner
        out: Image path
        labels: Legend entries, defaulting to the file names
    """
    fig, (ax_f, ax_g) = plt.subplots(1, 2, figsize=(10, 4))
    for i, path in enumerate(paths):
        rows = read_trace_csv(path)
        if not rows:
            logger.warning(f"PlotTrace: {path} has no rows")
            continue
        ops = [sum(int(r[k]) for k in _OPS) for r in rows]
        label = labels[i] if labels and i < len(labels) else path
        F = _series(rows, "F")
        F_min = min(F)
        ax_f.semilogy(ops, [f - F_min + 1e-16 for f in F], label=label)
        ax_g.semilogy(ops, _series(rows, "proxgrad_norm_surrogate"), label=label)
    ax_f.set_xlabel("basic operations")
    ax_f.set_ylabel("F - min F")
    ax_g.set_xlabel("basic operations")
    ax_g.set_ylabel("|G|")
    ax_g.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    logger.info(f"PlotTrace: Saved {out}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Plot trace CSVs.")
    parser.add_argument("csv", nargs="+", help="Trace CSV files.")
    parser.add_argument("--out", default="trace.png", help="Output image. Default: trace.png")
    parser.add_argument("--labels", nargs="*", default=None, help="Legend labels.")
    args = parser.parse_args(argv)
    logging.basicConfig(format="%(asctime)s - %(levelname)s - %(message)s", level=logging.INFO)
    plot_traces(args.csv, args.out, args.labels)
    return 0


if __name__ == "__main__":
    sys.exit(main())
