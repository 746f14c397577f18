"""Figure rendering: accuracy curves, disturbance grids, encoder heatmaps,
and sensor-location maps.

All rendering is deterministic: the Agg backend, fixed styling, and no
timestamps in the output, so identical inputs give identical bytes.
"""

from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from . import schemas  # noqa: E402
from .schemas import SchemaError  # noqa: E402

KINDS = ("accuracy_curve", "disturbance_grid", "encoder_heatmap", "sensor_map")

# wing planform in mm: chord (x) by span (y)
CHORD_MM = 25.0
SPAN_MM = 50.0
DPI = 150


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {', '.join(KINDS)}")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def _mean_by_q(rows, provenance):
    by_q = {}
    for r in rows:
        if r["provenance"] == provenance:
            by_q.setdefault(r["q"], []).append(r["accuracy"])
    qs = sorted(by_q)
    mean = np.array([np.mean(by_q[q]) for q in qs])
    std = np.array([np.std(by_q[q]) for q in qs])
    return np.array(qs), mean, std


def _sigmoid(q, c1, c2, c3):
    return 0.5 + c1 / (1.0 + np.exp(-(q - c2) / c3))


def _plot_cell_curve(ax, rows, sigmoid=None, scatter_trials=True):
    """SSPOC curve with random baseline band and full-state diamonds."""
    qs, mean, _ = _mean_by_q(rows, "sspoc")
    if qs.size == 0:
        raise SchemaError("no rows with provenance 'sspoc'")
    sparse = qs[qs < qs.max()] if qs.size > 1 else qs
    if scatter_trials:
        pts = [(r["q"], r["accuracy"]) for r in rows
               if r["provenance"] == "sspoc" and r["q"] in sparse]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], ".",
                color="tab:red", alpha=0.35, ms=4, zorder=2)
    keep = np.isin(qs, sparse)
    ax.plot(qs[keep], mean[keep], "-", color="tab:red", lw=1.5,
            label="selected sensors", zorder=3)

    rq, rmean, rstd = _mean_by_q(rows, "random")
    keep = np.isin(rq, sparse)
    if keep.any():
        ax.fill_between(rq[keep], (rmean - rstd)[keep], (rmean + rstd)[keep],
                        color="0.7", alpha=0.5, lw=0, zorder=1)
        ax.plot(rq[keep], rmean[keep], "-", color="0.4", lw=1.0,
                label="random sensors", zorder=2)

    q_full = max(r["q"] for r in rows)
    for prov, color in (("raw_full", "tab:blue"), ("encoded_full", "tab:green")):
        accs = [r["accuracy"] for r in rows if r["provenance"] == prov]
        if accs:
            ax.plot([q_full], [np.mean(accs)], "D", color=color, ms=7,
                    label=prov.replace("_", " "), zorder=4)

    if sigmoid is not None:
        qq = np.geomspace(max(sparse.min(), 1), sparse.max(), 200)
        ax.plot(qq, _sigmoid(qq, sigmoid["c1"], sigmoid["c2"], sigmoid["c3"]),
                "--", color="k", lw=1.0, label="sigmoid fit", zorder=3)

    ax.set_xscale("log")
    ax.axhline(0.75, color="0.85", lw=0.8, zorder=0)
    ax.set_ylim(0.35, 1.02)


def _render_accuracy_curve(spec):
    rows = schemas.read_accuracy(spec.inputs[0])
    cells = sorted({r["cell"] for r in rows})
    cell = spec.style.get("cell", cells[0])
    rows = [r for r in rows if r["cell"] == cell]
    if not rows:
        raise SchemaError(f"no rows for cell {cell!r}")
    sigmoid = None
    if len(spec.inputs) > 1:
        fits = [f for f in schemas.read_sigmoids(spec.inputs[1])
                if f["cell"] == cell]
        sigmoid = fits[0] if fits else None

    fig, ax = plt.subplots(figsize=(5, 3.6))
    _plot_cell_curve(ax, rows, sigmoid=sigmoid)
    ax.set_xlabel("number of sensors q")
    ax.set_ylabel("validated accuracy")
    ax.set_title(f"disturbance cell {cell} rad/s", fontsize=10)
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(spec.output, dpi=DPI)
    plt.close(fig)


def _cell_key(cell):
    flap, _, rot = cell.partition(":")
    return float(flap), float(rot)


def _render_disturbance_grid(spec):
    rows = schemas.read_accuracy(spec.inputs[0])
    by_cell = {}
    for r in rows:
        by_cell.setdefault(r["cell"], []).append(r)
    flap_levels = sorted({_cell_key(c)[0] for c in by_cell})
    rot_levels = sorted({_cell_key(c)[1] for c in by_cell})

    fig, axes = plt.subplots(len(flap_levels), len(rot_levels),
                             figsize=(2.1 * len(rot_levels) + 1,
                                      1.9 * len(flap_levels) + 1),
                             squeeze=False, sharex=True, sharey=True)
    for i, flap in enumerate(flap_levels):
        for j, rot in enumerate(rot_levels):
            ax = axes[i][j]
            cell_rows = by_cell.get(f"{flap:g}:{rot:g}")
            if cell_rows is None:
                ax.set_axis_off()
                continue
            _plot_cell_curve(ax, cell_rows, scatter_trials=False)
            ax.tick_params(labelsize=7)
            if i == 0:
                ax.set_title(f"rotation {rot:g}", fontsize=8)
            if j == 0:
                ax.set_ylabel(f"flap {flap:g}", fontsize=8)
    fig.suptitle("accuracy vs q across disturbance levels (rad/s)", fontsize=10)
    fig.tight_layout()
    fig.savefig(spec.output, dpi=DPI)
    plt.close(fig)


def _render_encoder_heatmap(spec):
    (name_a, name_b), rows = schemas.read_encoder(spec.inputs[0])
    a_vals = sorted({r["a"] for r in rows})
    b_vals = sorted({r["b"] for r in rows})
    grid = np.full((len(a_vals), len(b_vals)), np.nan)
    for r in rows:
        grid[a_vals.index(r["a"]), b_vals.index(r["b"])] = \
            np.nan if r["q75"] is None else r["q75"]

    fig, ax = plt.subplots(figsize=(4.6, 3.8))
    masked = np.ma.masked_invalid(grid)
    cmap = plt.get_cmap("viridis_r").copy()
    cmap.set_bad("0.8")
    im = ax.imshow(masked, cmap=cmap, origin="lower", aspect="auto")
    ax.set_xticks(range(len(b_vals)), [f"{v:g}" for v in b_vals], fontsize=8)
    ax.set_yticks(range(len(a_vals)), [f"{v:g}" for v in a_vals], fontsize=8)
    ax.set_xlabel(name_b)
    ax.set_ylabel(name_a)
    for i in range(len(a_vals)):
        for j in range(len(b_vals)):
            text = "—" if np.isnan(grid[i, j]) else f"{grid[i, j]:.1f}"
            ax.text(j, i, text, ha="center", va="center", fontsize=8)
    fig.colorbar(im, ax=ax, label="sensors needed for 75% accuracy")
    fig.tight_layout()
    fig.savefig(spec.output, dpi=DPI)
    plt.close(fig)


def _render_sensor_map(spec):
    rows = schemas.read_heatmap(spec.inputs[0])
    groups = {}
    for r in rows:
        groups.setdefault((r["cell"], r["q"]), []).append(r)
    keys = sorted(groups)

    fig, axes = plt.subplots(1, len(keys), figsize=(2.4 * len(keys), 4.2),
                             squeeze=False)
    for ax, key in zip(axes[0], keys):
        ax.add_patch(plt.Rectangle((0, 0), CHORD_MM, SPAN_MM, fill=False,
                                   ec="k", lw=1.2))
        for r in groups[key]:
            ax.plot([r["x"]], [r["y"]], "o", color="tab:red", ms=6,
                    alpha=min(max(r["frequency"], 0.08), 1.0))
        ax.set_xlim(-2, CHORD_MM + 2)
        ax.set_ylim(-2, SPAN_MM + 2)
        ax.set_aspect("equal")
        ax.set_xticks([0, CHORD_MM])
        ax.set_yticks([0, SPAN_MM])
        ax.tick_params(labelsize=7)
        ax.set_title(f"{key[0]}  q={key[1]}", fontsize=8)
    axes[0][0].set_xlabel("chord (mm)", fontsize=8)
    axes[0][0].set_ylabel("span (mm)", fontsize=8)
    fig.suptitle("sensor selection frequency (opacity)", fontsize=10)
    fig.tight_layout()
    fig.savefig(spec.output, dpi=DPI)
    plt.close(fig)


_RENDERERS = {
    "accuracy_curve": _render_accuracy_curve,
    "disturbance_grid": _render_disturbance_grid,
    "encoder_heatmap": _render_encoder_heatmap,
    "sensor_map": _render_sensor_map,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path.  Parse errors are raised
    before any file is written."""
    _RENDERERS[spec.kind](spec)
    return spec.output
