"""Figure rendering over run manifests and their CSV payloads.

Read-only over run directories: the manifest names the files, the CSVs
carry the series.  Output is vector (SVG/PDF) by default; every plotted
series is taken verbatim from the CSV so the final plotted values equal
the CSV tail values exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("fig2", "fig3", "eigenspectrum", "posterior")


class RenderError(RuntimeError):
    pass


class MissingColumnError(RenderError):
    def __init__(self, filename, column):
        self.column = column
        super().__init__(f"{filename}: required column {column!r} not present")


@dataclass
class FigureSpec:
    manifest: Path
    kind: str
    out: Path
    title: str | None = None
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        self.manifest = Path(self.manifest)
        self.out = Path(self.out)
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")


@dataclass
class Table:
    """One parsed CSV: named float columns (occupation labels stay strings)."""

    name: str
    columns: dict[str, np.ndarray]

    def need(self, column: str) -> np.ndarray:
        if column not in self.columns:
            raise MissingColumnError(self.name, column)
        return self.columns[column]

    def starting_with(self, prefix: str) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.columns.items() if k.startswith(prefix)}


def load_manifest(path: Path) -> dict:
    manifest = json.loads(Path(path).read_text())
    if "files" not in manifest:
        raise RenderError(f"{path}: not a run manifest (no files list)")
    return manifest


def _find_file(manifest: dict, manifest_path: Path, name: str) -> Path:
    for entry in manifest["files"]:
        if entry["name"] == name:
            if entry.get("status") != "written":
                raise RenderError(f"{name} is flagged {entry.get('status')!r} in the manifest")
            return Path(manifest_path).parent / name
    raise RenderError(f"manifest lists no file named {name!r}")


def load_table(path: Path) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if not rows:
        raise RenderError(f"{path.name}: empty time series")
    columns: dict[str, np.ndarray] = {}
    for i, name in enumerate(header):
        values = [row[i] for row in rows]
        try:
            columns[name] = np.array([float(v) for v in values])
        except ValueError:
            columns[name] = np.array(values, dtype=object)
    return Table(path.name, columns)


def render(spec: FigureSpec):
    """Render one figure; returns (output_path, matplotlib_figure)."""
    manifest = load_manifest(spec.manifest)
    fig = _RENDERERS[spec.kind](manifest, spec)
    if spec.title:
        fig.suptitle(spec.title)
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out)
    return spec.out, fig


def _render_fig2(manifest: dict, spec: FigureSpec):
    lines = load_table(_find_file(manifest, spec.manifest, "nonhermitian.csv"))
    t = lines.need("t")
    pops = {k: v for k, v in lines.starting_with("pop_").items()
            if not k.startswith("pop_sub_")}
    if not pops:
        raise MissingColumnError("nonhermitian.csv", "pop_*")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name, series in pops.items():
        ax.plot(t, series, lw=1.6, label=_occupation_label(name))

    try:
        dots = load_table(_find_file(manifest, spec.manifest, "ensemble.csv"))
        td = dots.need("t")
        for i, name in enumerate(pops):
            if name in dots.columns:
                ax.plot(td, dots.columns[name], "o", ms=3.5, alpha=0.75,
                        color=f"C{i}")
    except RenderError:
        pass  # lines-only run

    ax.set_xlabel(r"$Jt$")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def _render_fig3(manifest: dict, spec: FigureSpec):
    table = load_table(_find_file(manifest, spec.manifest, "trajectory.csv"))
    t = table.need("t")
    fluct = table.need("fluct_c")
    ldv = table.need("local_density_variance")
    nk = table.starting_with("n_k_m")
    if not nk:
        raise MissingColumnError("trajectory.csv", "n_k_m*")
    mode_index = sorted(nk, key=lambda name: int(name.removeprefix("n_k_m")))
    grid = np.stack([nk[name] for name in mode_index])
    m_values = [int(name.removeprefix("n_k_m")) for name in mode_index]

    fig, axes = plt.subplots(3, 1, figsize=(6.0, 7.5), sharex=True)
    axes[0].plot(t, fluct, lw=1.0)
    axes[0].set_ylabel(r"fluctuations in $\hat{c}$")
    axes[1].plot(t, ldv, lw=1.2)
    axes[1].set_ylabel("local density variance")
    mesh = axes[2].pcolormesh(
        t, np.array(m_values, dtype=float), grid, shading="nearest",
        cmap=spec.style.get("cmap", "inferno"),
    )
    m = np.array(m_values, dtype=float)
    sites = 2 * (len(m_values) // 2)
    axes[2].set_yticks(m)
    axes[2].set_yticklabels([_momentum_label(int(mi), sites) for mi in m])
    axes[2].set_ylabel(r"$k$")
    axes[2].set_xlabel(r"$Jt$")
    fig.colorbar(mesh, ax=axes[2], label=r"$\langle n_k \rangle$")
    fig.tight_layout()
    return fig


def _render_eigenspectrum(manifest: dict, spec: FigureSpec):
    table = load_table(_find_file(manifest, spec.manifest, "eigenspectrum.csv"))
    re = table.need("re")
    im = table.need("im")
    slow = table.need("slow").astype(bool)

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.scatter(re[~slow], im[~slow], marker="x", c="C3", label="fast")
    ax.scatter(re[slow], im[slow], marker="o", c="C0", label="slow")
    ax.set_xlabel(r"$\mathrm{Re}\,E / J$")
    ax.set_ylabel(r"$\mathrm{Im}\,E / J$")
    ax.set_yscale("symlog", linthresh=1e-2)
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def _render_posterior(manifest: dict, spec: FigureSpec):
    table = load_table(_find_file(manifest, spec.manifest, "posterior.csv"))
    t = table.need("t")
    probs = table.starting_with("p_sub_")
    if not probs:
        raise MissingColumnError("posterior.csv", "p_sub_*")
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for name, series in sorted(probs.items()):
        ax.plot(t, series, lw=1.4, label=name.replace("p_sub_", "subspace "))
    ax.set_xlabel(r"$Jt$")
    ax.set_ylabel("posterior probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def _occupation_label(column: str) -> str:
    occ = column.removeprefix("pop_").replace("_", ",")
    return rf"$|{occ}\rangle$"


def _momentum_label(m: int, sites: int) -> str:
    if m == 0:
        return "0"
    num = 2 * m
    if num == sites:
        return r"$\pi/a$"
    if abs(num) == sites // 2:
        return (r"$\pi/2a$" if m > 0 else r"$-\pi/2a$")
    return rf"${num}\pi/{sites}a$"


_RENDERERS = {
    "fig2": _render_fig2,
    "fig3": _render_fig3,
    "eigenspectrum": _render_eigenspectrum,
    "posterior": _render_posterior,
}
