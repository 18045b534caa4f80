"""Matplotlib figures written next to the CSV reports (``--plot``)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0


def _figure(width=6.0):
    fig, ax = plt.subplots(figsize=(width, width * GOLDEN))
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _positive(values, floor=1e-300):
    return [max(v, floor) for v in values]


def plot_trace(trace, path, title="merit history"):
    """Merit per iteration (log scale) with accepted step sizes on a twin axis."""
    fig, ax = _figure()
    its = [0] + [r.index + 1 for r in trace.records]
    mus = [trace.initial_merit] + [r.merit_after for r in trace.records]
    ax.semilogy(its, _positive(mus), "o-", color="C0", label="merit")
    ax.set_xlabel("iteration")
    ax.set_ylabel("max residual")
    if trace.records:
        ax2 = ax.twinx()
        ax2.step([r.index + 1 for r in trace.records], [r.accepted_t for r in trace.records],
                 where="mid", color="C1", alpha=0.7)
        ax2.set_ylabel("accepted t", color="C1")
        ax2.set_ylim(0, 1.05)
    ax.set_title(f"{title} ({trace.status.value if trace.status else ''})")
    return _save(fig, path)


def plot_lift(report, path, tol_lift=None):
    fig, ax = _figure()
    ax.semilogy(report.t_grid, _positive(report.lift_errors, 1e-17), ".-")
    if tol_lift is not None:
        ax.axhline(tol_lift, color="k", ls="--", lw=0.8, label="tol_lift")
    ax.axvline(report.t_bar, color="C3", ls=":", label=f"t_bar = {report.t_bar:.3g}")
    ax.set_xlabel("t")
    ax.set_ylabel("||g(f(t a)) - t a||")
    ax.set_title(report.verdict.value)
    ax.legend(loc="best")
    return _save(fig, path)


def plot_alpha(estimate, path):
    fig, ax = _figure()
    ax.loglog(estimate.t_values, _positive(estimate.alpha_values), "s-")
    ax.set_xlabel("t")
    ax.set_ylabel("alpha(t)")
    ax.set_title(f"linearization modulus ({estimate.sample_count} points, radius {estimate.radius:g})")
    return _save(fig, path)


def plot_bench(rows, path):
    """Path length against the 2 M mu0 bound for every compliant run."""
    fig, ax = _figure()
    by_map = {}
    for row in rows:
        if row.bound is None:
            continue
        trace = row.report.trace
        xs, ys = by_map.setdefault(row.case.fmap.label + f" n={row.case.fmap.dimension}", ([], []))
        xs.append(2.0 * row.bound * trace.initial_merit)
        ys.append(trace.cumulative_path_length)
    for label, (xs, ys) in by_map.items():
        ax.loglog(xs, _positive(ys), ".", label=label)
    if by_map:
        lo = min(min(xs) for xs, _ in by_map.values())
        hi = max(max(xs) for xs, _ in by_map.values())
        ax.loglog([lo, hi], [lo, hi], "k--", lw=0.8)
        ax.legend(fontsize=6, loc="upper left")
    ax.set_xlabel("2 M mu0")
    ax.set_ylabel("path length")
    return _save(fig, path)
