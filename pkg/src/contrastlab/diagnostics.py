"""Angle-histogram diagnostics and the CSV/config plumbing of the runners.

Histograms bin (-pi, pi] with right-closed uniform bins (the +pi boundary
lands in the last bin). The histogram symmetric KL uses the unhalved sum
of both KL directions; the grid-level functional uses the halved form
(see functionals.sym_kl_half). Additive smoothing (pseudocount per bin)
keeps every KL finite. CSV floats are written with repr for lossless
round trips.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import BinMismatch, EmptyInput, LengthMismatch, NonPositiveDensity, ParseError


@dataclass(frozen=True)
class Histogram1D:
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray

    @property
    def nbins(self) -> int:
        return len(self.counts)

    @property
    def binwidth(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass(frozen=True)
class Histogram2D:
    edges: np.ndarray
    counts: np.ndarray  # (nbins, nbins), rows index the first angle


@dataclass(frozen=True)
class RunRecord:
    """Per-seed scalar metrics of one experiment worker."""

    experiment: str
    seed: int
    config_echo: dict
    metrics: tuple  # ((name, value), ...)

    def __post_init__(self):
        for name, value in self.metrics:
            if not np.isfinite(value):
                raise ValueError(f"metric {name!r} of seed {self.seed} is not finite")

    def value(self, name: str) -> float:
        for key, val in self.metrics:
            if key == name:
                return float(val)
        raise KeyError(name)


def _bin_indices(angles: np.ndarray, nbins: int) -> np.ndarray:
    """Right-closed bin index on (-pi, pi]: edge_i < a <= edge_{i+1}."""
    width = 2.0 * math.pi / nbins
    idx = np.ceil((np.asarray(angles, dtype=float) + math.pi) / width) - 1
    return np.clip(idx, 0, nbins - 1).astype(int)


def binned_marginal(angles, nbins: int, pseudocount: float = 1.0) -> Histogram1D:
    """Uniform-bin angle histogram; density renormalized after smoothing."""
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise EmptyInput("cannot bin an empty angle sample")
    if nbins < 2:
        raise ValueError("need at least two bins")
    if pseudocount < 0:
        raise ValueError("pseudocount must be >= 0")
    counts = np.bincount(_bin_indices(angles, nbins), minlength=nbins)
    width = 2.0 * math.pi / nbins
    smoothed = counts + pseudocount
    density = smoothed / (np.sum(smoothed) * width)
    edges = np.linspace(-math.pi, math.pi, nbins + 1)
    return Histogram1D(edges=edges, counts=counts, density=density)


def sym_kl_sum(p: Histogram1D, q: Histogram1D) -> float:
    """Unhalved symmetric KL between two smoothed angle histograms."""
    if p.nbins != q.nbins:
        raise BinMismatch(f"bin counts differ: {p.nbins} vs {q.nbins}")
    pm = p.density * p.binwidth
    qm = q.density * q.binwidth
    if np.any(pm <= 0) or np.any(qm <= 0):
        raise NonPositiveDensity("histogram KL needs strictly positive bins (use a pseudocount)")
    ratio = np.log(pm) - np.log(qm)
    return float(np.sum(pm * ratio) - np.sum(qm * ratio))


def joint_histogram(a1, a2, nbins: int) -> Histogram2D:
    """2-D count histogram of paired angles."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.shape != a2.shape:
        raise LengthMismatch("paired angle sequences differ in length")
    i = _bin_indices(a1, nbins)
    j = _bin_indices(a2, nbins)
    counts = np.zeros((nbins, nbins), dtype=int)
    np.add.at(counts, (i, j), 1)
    edges = np.linspace(-math.pi, math.pi, nbins + 1)
    return Histogram2D(edges=edges, counts=counts)


def angle_shift_density(a1, a2, nbins: int, pseudocount: float = 1.0) -> Histogram1D:
    """Histogram of the wrapped difference wrap(a2 - a1)."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.shape != a2.shape:
        raise LengthMismatch("paired angle sequences differ in length")
    delta = np.mod(a2 - a1 + math.pi, 2.0 * math.pi) - math.pi
    delta = np.where(delta <= -math.pi, delta + 2.0 * math.pi, delta)
    return binned_marginal(delta, nbins, pseudocount)


def diagonal_band_mass(hist: Histogram2D, band: int) -> float:
    """Fraction of joint mass with circular bin offset |i - j| <= band."""
    n = hist.counts.shape[0]
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    off = np.abs(i - j)
    off = np.minimum(off, n - off)
    total = hist.counts.sum()
    if total == 0:
        raise EmptyInput("joint histogram holds no samples")
    return float(hist.counts[off <= band].sum()) / float(total)


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    """Comma-separated with a header row; floats via repr (lossless reparse)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def read_csv(path):
    """(header, rows-of-strings) for a CSV written by write_csv."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def read_csv_columns(path):
    """Parse a numeric CSV into {column_name: float array}."""
    header, rows = read_csv(path)
    cols = np.array([[float(v) for v in row] for row in rows], dtype=float)
    if cols.size == 0:
        return {name: np.array([]) for name in header}
    return {name: cols[:, k] for k, name in enumerate(header)}


class Config:
    """Flat key = value map with typed accessors; '#' starts a comment."""

    def __init__(self, entries: dict[str, str]):
        self._entries = dict(entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def keys(self):
        return self._entries.keys()

    def _fetch(self, key: str, default):
        if key in self._entries:
            return self._entries[key]
        if default is None:
            raise ParseError(f"missing required config key {key!r}")
        return None

    def get_str(self, key: str, default: str | None = None) -> str:
        raw = self._fetch(key, default)
        return default if raw is None else raw

    def get_int(self, key: str, default: int | None = None) -> int:
        raw = self._fetch(key, default)
        return default if raw is None else int(raw)

    def get_float(self, key: str, default: float | None = None) -> float:
        raw = self._fetch(key, default)
        return default if raw is None else float(raw)

    def get_bool(self, key: str, default: bool | None = None) -> bool:
        raw = self._fetch(key, default)
        if raw is None:
            return default
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ParseError(f"config key {key!r} is not a boolean: {raw!r}")


def parse_config_lines(lines, source: str = "<config>") -> Config:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ParseError(f"{source}:{lineno}: empty key")
        entries[key] = value.strip()
    return Config(entries)


def read_config(path) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_lines(fh, source=str(path))
