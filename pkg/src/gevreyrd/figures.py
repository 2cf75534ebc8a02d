"""Figure rendering for sweep and bound-check results.

Files are written next to the delimited outputs; the CSV stays the
machine-readable contract, figures are for eyeballing convergence.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _axes_for(model: str, rows):
    n = np.array([r[0] for r in rows], dtype=float)
    e = np.array([r[1] for r in rows], dtype=float)
    if model == "semilog-sqrt-n":
        return np.sqrt(n), e, r"$\sqrt{n}$"
    if model == "loglog":
        return n, e, "n"
    return n, e, "n"


def render_sweep(result, path) -> None:
    model = result.metadata["config"]["rate_model"]
    rows = [(n, e) for n, e in result.rows if e > 0]
    x, e, xlabel = _axes_for(model, rows)

    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    if model == "loglog":
        ax.loglog(x, e, "o", color="tab:blue", label="measured")
    else:
        ax.semilogy(x, e, "o", color="tab:blue", label="measured")
    if result.fit is not None:
        fit = result.fit
        xs = np.linspace(x.min(), x.max(), 100)
        if model == "loglog":
            ys = np.exp(fit.intercept) * xs**fit.slope
            label = f"fit: $n^{{{fit.slope:.2f}}}$ ($r^2$={fit.r_squared:.3f})"
        else:
            ys = np.exp(fit.intercept + fit.slope * xs)
            label = f"fit: slope {fit.slope:.2f} ($r^2$={fit.r_squared:.3f})"
        ax.plot(xs, ys, "k--", lw=1, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("error")
    exp = result.metadata["config"]["experiment"]
    b = result.metadata["config"].get("problem", {}).get("b_variant", "")
    ax.set_title(f"{exp} {b}".strip())
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_checks(reports, path) -> None:
    ratios = [max(r.ratio, 1e-300) for r in reports]
    colors = ["tab:green" if r.passed else "tab:red" for r in reports]
    orders = [r.nu.order for r in reports]

    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.scatter(range(len(reports)), ratios, c=colors, s=14)
    ax.axhline(1.0, color="k", lw=1, ls="--", label="bound")
    ax.set_yscale("log")
    ax.set_xlabel("check index (grouped by |nu|)")
    ax.set_ylabel("measured / bound")
    ax.set_title(f"derivative-bound checks (max |nu| = {max(orders)})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
