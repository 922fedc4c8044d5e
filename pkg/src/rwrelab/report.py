"""Figure rendering for run outputs.

Figures are written next to the delimited result files: one per-observable
shift-series plot with a 3-standard-error band, an overlay figure for the
counterexample pair, and a site profile for the line-walk demo.  Rendering
is optional and never feeds back into results.
"""

from __future__ import annotations

import os
import re


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_")


def render_series_figures(records, outdir) -> list:
    """One PNG per observable: estimate vs shift time with 3-SE band."""
    plt = _plt()
    os.makedirs(outdir, exist_ok=True)
    by_obs = {}
    for rec in records:
        by_obs.setdefault(rec["observable"], []).append(rec)
    paths = []
    for name, recs in by_obs.items():
        recs = sorted(recs, key=lambda r: r["n"])
        ns = [r["n"] for r in recs]
        est = [r["estimate"] for r in recs]
        band = [3.0 * r["stderr"] for r in recs]
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        ax.fill_between(ns, [e - b for e, b in zip(est, band)],
                        [e + b for e, b in zip(est, band)],
                        alpha=0.25, linewidth=0, label="±3 SE")
        ax.plot(ns, est, marker="o", markersize=3, linewidth=1.2)
        ax.axhline(est[0], color="gray", linewidth=0.8, linestyle="--")
        ax.set_xlabel("shift n")
        ax.set_ylabel(name)
        ax.set_title(f"{name} under shifts")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = os.path.join(outdir, f"series_{_slug(name)}.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        paths.append(path)
    return paths


def render_counterexample_figure(records_i, records_ii, outdir) -> list:
    """Overlay the decaying and the stationary event series per radius."""
    plt = _plt()
    os.makedirs(outdir, exist_ok=True)
    paths = []

    def by_event(records):
        out = {}
        for r in records:
            if r["observable"].startswith("event_A("):
                out.setdefault(r["observable"], []).append(r)
        return out

    ev_i, ev_ii = by_event(records_i), by_event(records_ii)
    for name in sorted(ev_i):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        for label, recs in ((f"{name} (degree weight)", ev_i[name]),
                            (f"{name} (alpha weight)", ev_ii.get(name, []))):
            if not recs:
                continue
            recs = sorted(recs, key=lambda r: r["n"])
            ns = [r["n"] for r in recs]
            est = [r["estimate"] for r in recs]
            err = [3.0 * r["stderr"] for r in recs]
            ax.errorbar(ns, est, yerr=err, marker="o", markersize=3,
                        linewidth=1.2, capsize=2, label=label)
        ax.set_xlabel("shift n")
        ax.set_ylabel("probability")
        ax.set_title("top-of-cluster event under shifts")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = os.path.join(outdir, f"counterexample_{_slug(name)}.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        paths.append(path)
    return paths


def render_profile_figure(records, outdir, x_key, y_keys, title, fname) -> list:
    """Generic per-site profile plot used by the line-walk demo."""
    plt = _plt()
    os.makedirs(outdir, exist_ok=True)
    recs = sorted(records, key=lambda r: r[x_key])
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    xs = [r[x_key] for r in recs]
    for key in y_keys:
        ax.plot(xs, [r[key] for r in recs], linewidth=1.0, label=key)
    ax.set_xlabel(x_key)
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = os.path.join(outdir, fname)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]
