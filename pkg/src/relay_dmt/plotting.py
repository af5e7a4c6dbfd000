"""PNG figures written next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_curves", "plot_outage"]


def plot_curves(curves, path, title=None, xlabel="multiplexing gain r"):
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for c in curves:
        ax.plot(c.r, c.d, label=c.label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("diversity gain d(r)")
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_outage(records, path, fit=None, title=None):
    """Outage probability against SNR with Wilson bars and the fitted slope."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    shown = [r for r in records if not r.censored]
    if shown:
        x = np.array([r.snr_db for r in shown])
        p = np.array([r.p_hat for r in shown])
        err = np.array([[r.p_hat - r.ci_lo for r in shown], [r.ci_hi - r.p_hat for r in shown]])
        ax.errorbar(x, p, yerr=err, fmt="o-", capsize=3, label="estimate")
    cens = [r for r in records if r.censored]
    if cens:
        ax.plot([r.snr_db for r in cens], [r.ci_hi for r in cens], "v", color="gray",
                label="censored (upper bound)")
    if fit is not None:
        xs = np.array(fit.snr_window, dtype=float)
        ax.plot(xs, 10.0 ** -(fit.intercept + fit.slope * xs / 10.0), "--",
                label=f"fit d = {fit.slope:.2f} ± {fit.stderr:.2f}")
    ax.set_yscale("log")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("outage probability")
    ax.grid(True, which="both", alpha=0.3)
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
