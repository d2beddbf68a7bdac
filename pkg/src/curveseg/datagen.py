"""Seeded synthetic curve generators with ground truth.

``default_piecewise_spec`` builds a two-class benchmark of noisy piecewise
constant curves: class 1 is dispersed over three sub-classes, class 2 is
homogeneous, 50 curves of 200 points per sub-class, three regimes each.
The levels and changepoints below are constants of this package.

``generate_waveforms`` produces Breiman's waveform curves on t = 0..20.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curves import LabeledCurveSet, TimeGrid

__all__ = [
    "Segment",
    "SubclassSpec",
    "PiecewiseSpec",
    "WaveformSpec",
    "SimulatedData",
    "default_piecewise_spec",
    "generate_piecewise",
    "waveform_base",
    "generate_waveforms",
    "write_ground_truth_csv",
]


@dataclass(frozen=True)
class Segment:
    """Regime on grid indices ``start:end`` (0-based, end exclusive).

    ``coeffs`` are polynomial coefficients in normalized time, lowest order
    first; a 1-tuple is a constant level.
    """

    start: int
    end: int
    coeffs: tuple

    def values(self, t: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(t, np.asarray(self.coeffs, dtype=float))


@dataclass(frozen=True)
class SubclassSpec:
    label: int  # 0-based class
    segments: tuple
    n_curves: int = 50
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


@dataclass(frozen=True)
class PiecewiseSpec:
    subclasses: tuple
    m: int = 200
    grid: tuple | None = None  # defaults to 1..m
    jitter: int = 0  # max per-curve shift of each interior changepoint

    def __post_init__(self):
        for sub in self.subclasses:
            segs = sorted(sub.segments, key=lambda s: s.start)
            if segs[0].start != 0 or segs[-1].end != self.m:
                raise ValueError("segments must cover the whole grid")
            for a, b in zip(segs, segs[1:]):
                if a.end != b.start:
                    raise ValueError("segments must be contiguous and non-overlapping")

    def time_grid(self) -> TimeGrid:
        if self.grid is not None:
            return TimeGrid(self.grid)
        return TimeGrid(np.arange(1, self.m + 1, dtype=float))


# Sub-class templates: (changepoints, levels). Class 2 differs from the first
# class-1 sub-class only by slightly later transitions and a lower plateau, so
# the classes overlap for models that cannot place changepoints.
PIECEWISE_TEMPLATES = {
    "class1_sub1": ((60, 130), (0.0, 3.0, 1.0)),
    "class1_sub2": ((40, 110), (2.0, 0.0, 3.0)),
    "class1_sub3": ((90, 160), (1.0, 3.5, 0.5)),
    "class2": ((62, 132), (0.0, 2.8, 1.0)),
}
PIECEWISE_NOISE_SD = 1.0


def _segments(changepoints, levels, m):
    edges = (0, *changepoints, m)
    return tuple(Segment(a, b, (lv,)) for a, b, lv in zip(edges, edges[1:], levels))


def default_piecewise_spec(n_per_subclass: int = 50, m: int = 200,
                           noise_sd: float = PIECEWISE_NOISE_SD, jitter: int = 0) -> PiecewiseSpec:
    """Two classes; class 1 has three sub-classes, class 2 one."""
    scale = m / 200
    subs = []
    for name, (cps, levels) in PIECEWISE_TEMPLATES.items():
        label = 1 if name == "class2" else 0
        cps = tuple(int(round(c * scale)) for c in cps)
        subs.append(SubclassSpec(label, _segments(cps, levels, m), n_per_subclass, noise_sd))
    return PiecewiseSpec(tuple(subs), m=m, jitter=jitter)


@dataclass
class SimulatedData:
    """Generated curves plus ground truth.

    subclass : (n,) sub-class index within each curve's class
    changepoints : per curve, the grid indices where a new regime starts
    """

    curves: LabeledCurveSet
    subclass: np.ndarray
    changepoints: list = field(default_factory=list)

    def class_subclasses(self, g: int) -> np.ndarray:
        return self.subclass[self.curves.labels == g]


def generate_piecewise(spec: PiecewiseSpec, seed: int) -> SimulatedData:
    """Noisy piecewise-polynomial curves; pure function of ``(spec, seed)``."""
    rng = np.random.default_rng(seed)
    grid = spec.time_grid()
    t = grid.normalized()
    m = spec.m
    values, labels, subclass, cps = [], [], [], []
    counters: dict = {}
    for sub in spec.subclasses:
        s_idx = counters.get(sub.label, 0)
        counters[sub.label] = s_idx + 1
        segs = sorted(sub.segments, key=lambda s: s.start)
        for _ in range(sub.n_curves):
            bounds = [s.start for s in segs[1:]]
            if spec.jitter:
                shift = rng.integers(-spec.jitter, spec.jitter + 1, size=len(bounds))
                bounds = list(np.clip(np.add(bounds, shift), 1, m - 1))
            edges = [0, *bounds, m]
            mean = np.empty(m)
            for seg, a, b in zip(segs, edges, edges[1:]):
                mean[a:b] = seg.values(t[a:b])
            values.append(mean + sub.noise_sd * rng.standard_normal(m))
            labels.append(sub.label)
            subclass.append(s_idx)
            cps.append(tuple(int(b) for b in bounds))
    curves = LabeledCurveSet(grid, np.array(values), np.array(labels))
    return SimulatedData(curves, np.array(subclass), cps)


def waveform_base(h: int, t):
    """Breiman's triangular bases: f1 peaks at t=11, f2 at 15, f3 at 7."""
    shift = {1: 0.0, 2: 4.0, 3: -4.0}[h]
    t = np.asarray(t, dtype=float) - shift
    out = np.maximum(6.0 - np.abs(t - 11.0), 0.0)
    return float(out) if out.ndim == 0 else out


# (first base, second base) per original waveform class
WAVEFORM_PAIRS = {1: (1, 2), 2: (2, 3), 3: (1, 3)}


@dataclass(frozen=True)
class WaveformSpec:
    """Waveform benchmark settings.

    With ``merged=True`` original classes 1 and 2 form class 1 (split evenly,
    ``curves_per_class`` in total) and original class 3 is class 2.
    ``fixed_u`` replaces the uniform mixing draw, for degenerate checks.
    """

    curves_per_class: int = 500
    noise_sd: float = 1.0
    merged: bool = True
    fixed_u: float | None = None

    def time_grid(self) -> TimeGrid:
        return TimeGrid(np.arange(21, dtype=float))


def generate_waveforms(spec: WaveformSpec, seed: int) -> SimulatedData:
    rng = np.random.default_rng(seed)
    grid = spec.time_grid()
    t = grid.points
    if spec.merged:
        half = spec.curves_per_class // 2
        plan = [(1, 0, 0, half), (2, 0, 1, spec.curves_per_class - half),
                (3, 1, 0, spec.curves_per_class)]
    else:
        plan = [(h, h - 1, 0, spec.curves_per_class) for h in (1, 2, 3)]
    values, labels, subclass = [], [], []
    for orig, label, sub, count in plan:
        a, b = WAVEFORM_PAIRS[orig]
        fa, fb = waveform_base(a, t), waveform_base(b, t)
        if spec.fixed_u is None:
            u = rng.random(count)
        else:
            u = np.full(count, float(spec.fixed_u))
        noise = spec.noise_sd * rng.standard_normal((count, t.size))
        values.append(u[:, None] * fa + (1 - u[:, None]) * fb + noise)
        labels += [label] * count
        subclass += [sub] * count
    curves = LabeledCurveSet(grid, np.vstack(values), np.array(labels))
    return SimulatedData(curves, np.array(subclass), [()] * curves.n)


def write_ground_truth_csv(data: SimulatedData, path) -> None:
    """Sidecar with columns index, class, subclass, changepoints (1-based).

    Changepoints are the grid positions where a new regime starts, joined
    by ``;``.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "class", "subclass", "changepoints"])
        for i, (lab, sub, cp) in enumerate(zip(data.curves.labels, data.subclass, data.changepoints)):
            w.writerow([i + 1, int(lab) + 1, int(sub) + 1, ";".join(str(c + 1) for c in cp)])
