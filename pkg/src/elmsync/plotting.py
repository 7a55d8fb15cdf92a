"""SVG error-probability curves (needs matplotlib)."""

from __future__ import annotations

from collections import defaultdict


def plot_result(result, path, title=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # svg output must not embed a creation date, so reruns stay byte-identical
    matplotlib.rcParams["svg.hashsalt"] = "elmsync"
    curves = defaultdict(list)
    for r in result.rows:
        label = r.method
        if r.tags:
            label += " (" + ", ".join(f"{k}={v}" for k, v in sorted(r.tags.items())) + ")"
        curves[label].append((r.snr_db, max(r.pe, 0.5 / r.trials)))

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, pts in curves.items():
        pts.sort()
        ax.semilogy([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("error probability")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
