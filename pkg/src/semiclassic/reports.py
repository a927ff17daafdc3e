"""Delimited output and figure rendering for the experiment drivers.

Every table is CSV with a leading `# meta:` comment block (scenario hash,
solver settings, package versions) and every driver renders a matplotlib
figure next to its table. Output bytes are deterministic: floats are
written with repr (shortest round-trip) and figures carry no timestamps.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from . import __version__

FIG_DPI = 140


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows, meta: dict | None = None) -> Path:
    """Write rows with a sorted `# meta:` block and a header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = {"semiclassic_version": __version__, "numpy_version": np.__version__}
    if meta:
        base.update(meta)
    buf = io.StringIO()
    for key in sorted(base):
        buf.write(f"# meta: {key}={base[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    path.write_text(buf.getvalue())
    return path


def read_csv(path):
    """Read back a table written by write_csv: (meta, columns, rows)."""
    meta = {}
    lines = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# meta: "):
                key, _, value = line[len("# meta: "):].rstrip("\n").partition("=")
                meta[key] = value
            elif line.strip():
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    return meta, columns, [list(r) for r in reader]


def save_figure(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=FIG_DPI, metadata={"Date": None})
    return path


def compare_figure(xs, ref_abs, wkb_abs, diff, title):
    # Figure objects directly (no pyplot): keeps parallel drivers away from
    # pyplot's global figure registry
    fig = Figure(figsize=(7.0, 5.6))
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    ax1.plot(xs, ref_abs, label="|psi| reference", lw=1.4)
    ax1.plot(xs, wkb_abs, "--", label="|Psi| semiclassical", lw=1.2)
    ax1.set_ylabel("|field|")
    ax1.legend(loc="best", fontsize=8)
    ax1.set_title(title, fontsize=10)
    ax2.semilogy(xs, np.maximum(diff, 1e-18), color="crimson", lw=1.2)
    ax2.set_xlabel("x")
    ax2.set_ylabel("|psi - Psi|")
    fig.tight_layout()
    return fig


def sweep_figure(eps_values, sup_errors, title):
    eps_values = np.asarray(eps_values, dtype=float)
    sup_errors = np.asarray(sup_errors, dtype=float)
    fig = Figure(figsize=(5.6, 4.2))
    ax = fig.subplots()
    ax.loglog(eps_values, sup_errors, "o-", label="sup |psi - Psi|")
    guide = sup_errors[0] * eps_values / eps_values[0]
    ax.loglog(eps_values, guide, "k--", lw=0.9, label="O(eps) guide")
    ax.invert_xaxis()
    ax.set_xlabel("eps")
    ax.set_ylabel("sup error over K")
    ax.legend(fontsize=8)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    return fig


def caustic_map_figure(ts, xs, counts, min_j, title):
    fig = Figure(figsize=(9.2, 3.9))
    ax1, ax2 = fig.subplots(1, 2)
    extent = [ts[0], ts[-1], xs[0], xs[-1]]
    im1 = ax1.imshow(counts.T, origin="lower", aspect="auto", extent=extent,
                     cmap="viridis")
    ax1.set_xlabel("t")
    ax1.set_ylabel("x")
    ax1.set_title("branch count", fontsize=9)
    fig.colorbar(im1, ax=ax1, shrink=0.85)
    with np.errstate(divide="ignore"):
        logj = np.log10(np.maximum(min_j, 1e-16))
    im2 = ax2.imshow(logj.T, origin="lower", aspect="auto", extent=extent,
                     cmap="magma")
    ax2.set_xlabel("t")
    ax2.set_ylabel("x")
    ax2.set_title("log10 min J (caustics dark)", fontsize=9)
    fig.colorbar(im2, ax=ax2, shrink=0.85)
    fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    return fig


def maslov_audit_figure(ts, xs, matches, title):
    fig = Figure(figsize=(5.6, 4.2))
    ax = fig.subplots()
    ok = matches.astype(bool)
    ax.scatter(ts[ok], xs[ok], s=12, c="seagreen", label="match")
    if np.any(~ok):
        ax.scatter(ts[~ok], xs[~ok], s=18, c="crimson", marker="x",
                   label="mismatch")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.legend(fontsize=8)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    return fig


def wigner_figure(slices, windows, title):
    """slices: list of (eps, xi_grid, values); windows: (center, width) list."""
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.subplots()
    for eps, xi, vals in slices:
        ax.plot(xi, vals, lw=1.1, label=f"eps={eps:g}")
    for center, width in windows:
        ax.axvspan(center - width, center + width, color="gray", alpha=0.12)
        ax.axvline(center, color="gray", lw=0.7, ls=":")
    ax.set_xlabel("xi")
    ax.set_ylabel("W(x, xi)")
    ax.legend(fontsize=8)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    return fig
