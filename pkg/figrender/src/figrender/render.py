"""Figure construction from run-directory CSVs.

Each renderer parses its inputs, hashes every data series exactly as
plotted (rendering must not alter or reorder data; cosmetic curve
closure on polar plots duplicates the first point after hashing), and
draws with a deterministic layout on the Agg backend. Vector (SVG)
output by default.
"""

from __future__ import annotations

import csv
import glob
import hashlib
import math
import os
import re
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGURE_KINDS = (
    "gap_curve",
    "polar_grid",
    "joint_grid",
    "delta_grid",
    "concentration",
    "sphere_overlay",
    "grad_consistency",
)


class SchemaMismatch(ValueError):
    """CSV header does not carry a required column."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    output: str
    band: str = "stderr"  # "std" | "stderr"

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if self.band not in ("std", "stderr"):
            raise ValueError("band must be 'std' or 'stderr'")


@dataclass
class RenderResult:
    path: str
    data_digests: dict = field(default_factory=dict)


def digest_array(values: np.ndarray) -> str:
    arr = np.ascontiguousarray(np.asarray(values, dtype=float))
    return hashlib.sha256(arr.tobytes()).hexdigest()


def parse_columns(path: str) -> dict:
    """{column: float array} from a header-first CSV."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        return {name: np.array([]) for name in header}
    return {name: data[:, i] for i, name in enumerate(header)}


def require(cols: dict, names, path: str) -> None:
    for name in names:
        if name not in cols:
            raise SchemaMismatch(f"{path}: missing column {name!r}")


def _tag_of(path: str, prefix: str) -> str:
    m = re.match(rf"{prefix}_(.+)\.csv$", os.path.basename(path))
    return m.group(1) if m else os.path.basename(path)


def _band_cols(band: str):
    return ("symkl_std", "symkl_stderr") if band == "std" else ("symkl_stderr", "symkl_std")


def render(spec: FigureSpec) -> RenderResult:
    """Draw one figure; returns the output path and per-series digests."""
    result = RenderResult(path=spec.output)
    renderer = _RENDERERS[spec.kind]
    fig = renderer(spec, result)
    fig.savefig(spec.output)
    plt.close(fig)
    return result


def _render_gap_curve(spec: FigureSpec, result: RenderResult):
    (path,) = spec.inputs
    cols = parse_columns(path)
    require(cols, ["sigma_mis", "symkl_mean", "symkl_std", "symkl_stderr"], path)
    x = cols["sigma_mis"]
    y = cols["symkl_mean"]
    half = cols["symkl_std" if spec.band == "std" else "symkl_stderr"]
    for name in ("sigma_mis", "symkl_mean"):
        result.data_digests[name] = digest_array(cols[name])
    result.data_digests["band"] = digest_array(half)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, y, marker="o", color="tab:blue")
    ax.fill_between(x, y - half, y + half, alpha=0.25, color="tab:blue")
    ax.set_xticks(x)
    ax.set_xlabel("latent misalignment scale")
    ax.set_ylabel("symmetric KL of angle marginals")
    ax.set_title(f"marginal gap (band: {spec.band})")
    fig.tight_layout()
    return fig


def _grid_layout(n: int):
    ncols = min(4, max(1, n))
    nrows = math.ceil(n / ncols)
    return nrows, ncols


def _render_polar_grid(spec: FigureSpec, result: RenderResult):
    nrows, ncols = _grid_layout(len(spec.inputs))
    fig = plt.figure(figsize=(3.2 * ncols, 3.2 * nrows))
    for k, path in enumerate(spec.inputs):
        cols = parse_columns(path)
        require(cols, ["bin_center", "density_mod1", "density_mod2"], path)
        tag = _tag_of(path, "marginals")
        for name in ("bin_center", "density_mod1", "density_mod2"):
            result.data_digests[f"{tag}:{name}"] = digest_array(cols[name])
        ax = fig.add_subplot(nrows, ncols, k + 1, projection="polar")
        theta = cols["bin_center"]
        for series, color in (("density_mod1", "tab:blue"), ("density_mod2", "tab:orange")):
            r = cols[series]
            # Close the curve for display only (hashes above cover the data).
            ax.plot(
                np.append(theta, theta[:1]), np.append(r, r[:1]),
                color=color, linewidth=1.2,
            )
        ax.set_title(f"sigma_mis = {tag}", fontsize=9)
        ax.set_xticklabels([])
        ax.set_yticklabels([])
    fig.tight_layout()
    return fig


def _render_joint_grid(spec: FigureSpec, result: RenderResult):
    nrows, ncols = _grid_layout(len(spec.inputs))
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.0 * ncols, 2.8 * nrows), squeeze=False
    )
    for k, path in enumerate(spec.inputs):
        cols = parse_columns(path)
        require(cols, ["bin_a1", "bin_a2", "count"], path)
        tag = _tag_of(path, "joint")
        counts = cols["count"]
        result.data_digests[f"{tag}:count"] = digest_array(counts)
        n = int(round(math.sqrt(len(counts))))
        img = counts.reshape(n, n)
        ax = axes[k // ncols][k % ncols]
        ax.imshow(
            img.T, origin="lower", extent=(-math.pi, math.pi, -math.pi, math.pi),
            aspect="equal", cmap="viridis",
        )
        ax.set_title(f"sigma_mis = {tag}", fontsize=9)
        ax.set_xlabel("angle, modality 1")
        ax.set_ylabel("angle, modality 2")
    for k in range(len(spec.inputs), nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    return fig


def _render_delta_grid(spec: FigureSpec, result: RenderResult):
    nrows, ncols = _grid_layout(len(spec.inputs))
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.0 * ncols, 2.4 * nrows), squeeze=False
    )
    for k, path in enumerate(spec.inputs):
        cols = parse_columns(path)
        require(cols, ["bin_center", "density"], path)
        tag = _tag_of(path, "delta")
        for name in ("bin_center", "density"):
            result.data_digests[f"{tag}:{name}"] = digest_array(cols[name])
        ax = axes[k // ncols][k % ncols]
        ax.plot(cols["bin_center"], cols["density"], color="tab:green")
        ax.set_title(f"sigma_mis = {tag}", fontsize=9)
        ax.set_xlabel("wrapped angle shift")
        ax.set_ylabel("density")
    for k in range(len(spec.inputs), nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    return fig


def _render_concentration(spec: FigureSpec, result: RenderResult):
    (path,) = spec.inputs
    cols = parse_columns(path)
    require(
        cols,
        [
            "tau",
            "capmass_trained_mean", "capmass_trained_std",
            "capmass_gibbs_mean", "capmass_gibbs_std",
        ],
        path,
    )
    for name in ("tau", "capmass_trained_mean", "capmass_gibbs_mean"):
        result.data_digests[name] = digest_array(cols[name])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(
        cols["tau"], cols["capmass_trained_mean"], yerr=cols["capmass_trained_std"],
        marker="o", color="tab:orange", label="trained particles", capsize=3,
    )
    ax.errorbar(
        cols["tau"], cols["capmass_gibbs_mean"], yerr=cols["capmass_gibbs_std"],
        marker="s", color="tab:blue", label="Gibbs baseline", capsize=3,
    )
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("temperature")
    ax.set_ylabel("cap mass (radius 0.5)")
    ax.legend()
    fig.tight_layout()
    return fig


def _render_sphere_overlay(spec: FigureSpec, result: RenderResult):
    # Inputs arrive as (gibbs, trained) pairs per temperature tag.
    pairs: dict[str, dict] = {}
    for path in spec.inputs:
        base = os.path.basename(path)
        m = re.match(r"cloud_(.+)_(gibbs|trained)\.csv$", base)
        if not m:
            raise SchemaMismatch(f"{path}: not a cloud CSV")
        pairs.setdefault(m.group(1), {})[m.group(2)] = path
    tags = sorted(pairs, key=float, reverse=True)
    nrows, ncols = _grid_layout(len(tags))
    fig = plt.figure(figsize=(3.2 * ncols, 3.2 * nrows))
    for k, tag in enumerate(tags):
        ax = fig.add_subplot(nrows, ncols, k + 1, projection="3d")
        for kind, color, size in (("gibbs", "tab:blue", 2.0), ("trained", "tab:orange", 4.0)):
            if kind not in pairs[tag]:
                continue
            cols = parse_columns(pairs[tag][kind])
            require(cols, ["x", "y", "z"], pairs[tag][kind])
            for name in ("x", "y", "z"):
                result.data_digests[f"{tag}:{kind}:{name}"] = digest_array(cols[name])
            ax.scatter(
                cols["x"], cols["y"], cols["z"], s=size, color=color,
                alpha=0.5, label=kind, depthshade=False,
            )
        ax.set_title(f"tau = {tag}", fontsize=9)
        ax.set_axis_off()
        if k == 0:
            ax.legend(loc="upper left", fontsize=7)
    fig.tight_layout()
    return fig


def _render_grad_consistency(spec: FigureSpec, result: RenderResult):
    (path,) = spec.inputs
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    for name in (
        "regime", "N", "align_mean", "align_stderr", "align_std",
        "relerr_mean", "relerr_stderr", "relerr_std",
    ):
        if name not in header:
            raise SchemaMismatch(f"{path}: missing column {name!r}")
    idx = {name: header.index(name) for name in header}
    regimes = sorted({r[idx["regime"]] for r in rows})
    band_col = "align_std" if spec.band == "std" else "align_stderr"
    rel_band_col = "relerr_std" if spec.band == "std" else "relerr_stderr"
    fig, axes = plt.subplots(1, 2, figsize=(8.5, 3.4))
    colors = {"cosine": "tab:blue", "rbf": "tab:orange"}
    for regime in regimes:
        sub = [r for r in rows if r[idx["regime"]] == regime]
        n = np.array([float(r[idx["N"]]) for r in sub])
        align = np.array([float(r[idx["align_mean"]]) for r in sub])
        a_band = np.array([float(r[idx[band_col]]) for r in sub])
        relerr = np.array([float(r[idx["relerr_mean"]]) for r in sub])
        r_band = np.array([float(r[idx[rel_band_col]]) for r in sub])
        for name, arr in (("N", n), ("align_mean", align), ("relerr_mean", relerr)):
            result.data_digests[f"{regime}:{name}"] = digest_array(arr)
        color = colors.get(regime, None)
        axes[0].plot(n, align, marker="o", label=regime, color=color)
        axes[0].fill_between(n, align - a_band, align + a_band, alpha=0.25, color=color)
        axes[1].plot(n, relerr, marker="o", label=regime, color=color)
        axes[1].fill_between(n, relerr - r_band, relerr + r_band, alpha=0.25, color=color)
    for ax, ylabel in zip(axes, ("gradient alignment", "relative error")):
        ax.set_xscale("log", base=2)
        ax.set_xlabel("negatives per anchor")
        ax.set_ylabel(ylabel)
        ax.legend()
    fig.tight_layout()
    return fig


_RENDERERS = {
    "gap_curve": _render_gap_curve,
    "polar_grid": _render_polar_grid,
    "joint_grid": _render_joint_grid,
    "delta_grid": _render_delta_grid,
    "concentration": _render_concentration,
    "sphere_overlay": _render_sphere_overlay,
    "grad_consistency": _render_grad_consistency,
}


def _sorted_by_tag(paths, prefix):
    return tuple(sorted(paths, key=lambda p: float(_tag_of(p, prefix))))


def discover_specs(run_dir: str, out_dir: str, kinds, band: str = "stderr"):
    """Build FigureSpecs for whatever CSVs the run directory provides."""
    specs = []
    ext = ".svg"

    def maybe(kind, inputs):
        if inputs and all(os.path.exists(p) for p in inputs):
            specs.append(
                FigureSpec(
                    kind=kind, inputs=tuple(inputs),
                    output=os.path.join(out_dir, kind + ext), band=band,
                )
            )

    for kind in kinds:
        if kind == "gap_curve":
            maybe(kind, [os.path.join(run_dir, "gap_curve.csv")])
        elif kind == "polar_grid":
            maybe(kind, _sorted_by_tag(
                glob.glob(os.path.join(run_dir, "marginals_*.csv")), "marginals"
            ))
        elif kind == "joint_grid":
            maybe(kind, _sorted_by_tag(
                glob.glob(os.path.join(run_dir, "joint_*.csv")), "joint"
            ))
        elif kind == "delta_grid":
            maybe(kind, _sorted_by_tag(
                glob.glob(os.path.join(run_dir, "delta_*.csv")), "delta"
            ))
        elif kind == "concentration":
            maybe(kind, [os.path.join(run_dir, "concentration.csv")])
        elif kind == "sphere_overlay":
            maybe(kind, tuple(sorted(glob.glob(os.path.join(run_dir, "cloud_*.csv")))))
        elif kind == "grad_consistency":
            maybe(kind, [os.path.join(run_dir, "grad_consistency.csv")])
    return specs
