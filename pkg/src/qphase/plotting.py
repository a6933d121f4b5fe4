"""Static figures rendered from the artifacts listed in a run manifest."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import load_field


class PlotError(RuntimeError):
    pass


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _read_csv(path):
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except (OSError, ValueError) as exc:
        raise PlotError(f"cannot read {path}: {exc}") from exc
    if data.size == 0 or data.dtype.names is None:
        raise PlotError(f"{path} holds no data rows")
    return np.atleast_1d(data)


def plot_moments(csv_path, out_path, hbar=None, mass=None, sigma0=None):
    """var_q(t) with the free minimum-uncertainty spreading law overlaid when parameters are given."""
    d = _read_csv(csv_path)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(d["t"], d["var_q"], "o", ms=3, label="solver")
    if None not in (hbar, mass, sigma0):
        t = np.linspace(d["t"].min(), d["t"].max(), 200)
        ax.plot(t, sigma0**2 + (hbar * t / (2 * mass * sigma0)) ** 2, "-", label="free packet law")
    ax.set_xlabel("t")
    ax.set_ylabel("var q")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_field(field_path, out_path):
    """Signed heatmap of W(p, q); colour limits are symmetric about zero."""
    W, _ = load_field(field_path)
    g = W.grid
    lim = float(np.abs(W.values).max()) or 1.0
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(W.values, origin="lower", aspect="auto", cmap="RdBu_r", vmin=-lim, vmax=lim,
                   extent=(g.q_min, g.q_max, g.p_min, g.p_max))
    fig.colorbar(im, ax=ax, label="W")
    ax.set_xlabel("q")
    ax.set_ylabel("p")
    ax.set_title(f"t = {W.time:.4g}")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path, (-lim, lim)


def plot_dispersion(csv_path, out_path):
    d = _read_csv(csv_path)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(d["k"], d["omega"], "o-")
    ax.set_xlabel("k")
    ax.set_ylabel("omega")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_closure(report_path, out_path):
    try:
        report = json.loads(Path(report_path).read_text())
    except (OSError, ValueError) as exc:
        raise PlotError(f"cannot read {report_path}: {exc}") from exc
    rows = report["rows"]
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    x = np.arange(len(rows))
    ax.bar(x - 0.2, [r["l2"] for r in rows], 0.4, label="discrepancy (l2)")
    ax.bar(x + 0.2, [r["target_l2"] for r in rows], 0.4, label="target (l2)")
    ax.set_xticks(x, [f"n={r['order']}" for r in rows])
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_manifest(manifest_path):
    """Render every plottable artifact; returns the image paths written."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, ValueError) as exc:
        raise PlotError(f"cannot read manifest {manifest_path}: {exc}") from exc
    root = manifest_path.parent
    summary = manifest.get("summary", {})
    images = []
    for entry in manifest["artifacts"]:
        src = root / entry["path"]
        if not src.exists():
            raise PlotError(f"artifact {src} listed in the manifest is missing")
        dst = src.with_suffix(".png")
        kind = entry["kind"]
        if kind == "moments":
            images.append(plot_moments(src, dst, summary.get("hbar"), summary.get("mass"), summary.get("sigma_q0")))
        elif kind == "wigner_field":
            images.append(plot_field(src, dst)[0])
        elif kind == "dispersion":
            images.append(plot_dispersion(src, dst))
        elif kind == "closure_report":
            images.append(plot_closure(src, dst))
    return images
