"""Synthetic benchmark families with ground-truth labels.

Every family is built from 2-D patterns whose anomalies are local: each
anomaly's coordinates are drawn from the normal points' own marginals and
paired so that the point lies at least three noise widths from the
pattern. A single attribute therefore carries no signal; only the joint
2-D view does.

Families:
    Synth-C    one 2-D pattern.
    Synth-C&S  five independent 2-D patterns plus uniform noise attributes.
    Synth-I    one 2-D pattern plus a cluster subspace in which one cluster
               holds all anomalies, including some that conform to the
               pattern ("accidental inliers").
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from admercs.data import AttributeMeta, Dataset, Kind, save_csv

MIN_DISTANCE_FACTOR = 3.0
MAX_REJECTIONS = 10_000
SWAPS_BEFORE_REDRAW = 25
CS_DIMS = tuple(range(10, 101, 10))
N_SUBSPACES = 5
INLIER_FRACTION = 0.2


class BenchError(RuntimeError):
    pass


class Family(str, enum.Enum):
    LINEAR_BAND = "linear_band"
    SINE_CURVE = "sine_curve"
    TWO_CLUSTERS = "two_clusters"
    RING = "ring"
    CHECKERBOARD = "checkerboard"


@dataclass(frozen=True)
class PatternSpec:
    """A 2-D pattern inside the unit square.

    ``noise`` is the pattern's width: Gaussian noise sd for curves and
    clusters, two thirds of the cell gap for checkerboards.
    """

    family: Family
    params: dict = field(hash=False)
    noise: float

    def to_dict(self) -> dict:
        return {"family": self.family.value, "params": self.params, "noise": self.noise}


@dataclass(frozen=True)
class BenchConfig:
    seed: int = 0
    n_instances: int = 1000
    contamination: float = 0.05
    dims: int = 10

    def __post_init__(self) -> None:
        if not 0.0 < self.contamination < 0.5:
            raise ValueError(f"contamination must be in (0, 0.5), got {self.contamination}")
        if self.n_instances < 20:
            raise ValueError("n_instances must be >= 20")

    @property
    def n_anomalies(self) -> int:
        return max(1, round(self.contamination * self.n_instances))


@dataclass
class Benchmark:
    dataset: Dataset
    meta: dict


def _catalog() -> list[PatternSpec]:
    lb, sc, tc, rg, cb = Family
    deg = math.pi / 180.0
    return [
        PatternSpec(lb, {"vertices": [[0.05, 0.1], [0.95, 0.9]]}, 0.02),
        PatternSpec(lb, {"vertices": [[0.05, 0.9], [0.95, 0.1]]}, 0.02),
        PatternSpec(lb, {"vertices": [[0.05, 0.1], [0.5, 0.9], [0.95, 0.1]]}, 0.02),
        PatternSpec(lb, {"vertices": [[0.05, 0.9], [0.5, 0.1], [0.95, 0.9]]}, 0.025),
        PatternSpec(lb, {"vertices": [[0.05, 0.2], [0.35, 0.8], [0.65, 0.2], [0.95, 0.8]]}, 0.015),
        PatternSpec(lb, {"vertices": [[0.05, 0.3], [0.95, 0.7]]}, 0.015),
        PatternSpec(sc, {"amplitude": 0.35, "frequency": 1.0, "phase": 0.0}, 0.02),
        PatternSpec(sc, {"amplitude": 0.35, "frequency": 1.5, "phase": 0.0}, 0.02),
        PatternSpec(sc, {"amplitude": 0.3, "frequency": 2.0, "phase": 0.5}, 0.015),
        PatternSpec(sc, {"amplitude": 0.4, "frequency": 0.5, "phase": 0.0}, 0.02),
        PatternSpec(sc, {"amplitude": 0.35, "frequency": 1.0, "phase": math.pi / 2}, 0.02),
        PatternSpec(sc, {"amplitude": 0.25, "frequency": 2.5, "phase": 0.0}, 0.012),
        PatternSpec(tc, {"centers": [[0.25, 0.75], [0.75, 0.25]]}, 0.05),
        PatternSpec(tc, {"centers": [[0.25, 0.25], [0.75, 0.75]]}, 0.05),
        PatternSpec(tc, {"centers": [[0.3, 0.7], [0.7, 0.3]]}, 0.04),
        PatternSpec(tc, {"centers": [[0.2, 0.6], [0.8, 0.4]]}, 0.04),
        PatternSpec(tc, {"centers": [[0.2, 0.3], [0.8, 0.7]]}, 0.04),
        PatternSpec(tc, {"centers": [[0.3, 0.2], [0.6, 0.8]]}, 0.035),
        PatternSpec(rg, {"axes": [0.4, 0.15], "angle": 45 * deg}, 0.015),
        PatternSpec(rg, {"axes": [0.4, 0.15], "angle": -45 * deg}, 0.015),
        PatternSpec(rg, {"axes": [0.42, 0.2], "angle": 45 * deg}, 0.015),
        PatternSpec(rg, {"axes": [0.38, 0.12], "angle": 30 * deg}, 0.012),
        PatternSpec(rg, {"axes": [0.4, 0.1], "angle": -60 * deg}, 0.012),
        PatternSpec(rg, {"axes": [0.38, 0.22], "angle": -45 * deg}, 0.015),
        PatternSpec(cb, {"cells": [0, 1]}, 0.02),
        PatternSpec(cb, {"cells": [1, 0]}, 0.02),
        PatternSpec(cb, {"cells": [1, 2, 0]}, 0.02),
        PatternSpec(cb, {"cells": [2, 0, 1]}, 0.02),
        PatternSpec(cb, {"cells": [1, 3, 0, 2]}, 0.015),
        PatternSpec(cb, {"cells": [2, 0, 3, 1]}, 0.015),
    ]


PATTERN_CATALOG: tuple[PatternSpec, ...] = tuple(_catalog())


# --------------------------------------------------------------- geometry
def _polyline(spec: PatternSpec, xs: np.ndarray) -> np.ndarray:
    if spec.family is Family.LINEAR_BAND:
        v = np.asarray(spec.params["vertices"])
        return np.interp(xs, v[:, 0], v[:, 1])
    p = spec.params
    return 0.5 + p["amplitude"] * np.sin(2 * math.pi * p["frequency"] * xs + p["phase"])


def _x_span(spec: PatternSpec) -> tuple[float, float]:
    if spec.family is Family.LINEAR_BAND:
        v = spec.params["vertices"]
        return v[0][0], v[-1][0]
    return 0.05, 0.95


def _ellipse(spec: PatternSpec, t: np.ndarray) -> np.ndarray:
    a, b = spec.params["axes"]
    th = spec.params["angle"]
    ca, sa = math.cos(th), math.sin(th)
    u, w = a * np.cos(t), b * np.sin(t)
    return np.column_stack([0.5 + ca * u - sa * w, 0.5 + sa * u + ca * w])


def _cells(spec: PatternSpec) -> np.ndarray:
    """Filled rectangles (x0, x1, y0, y1), shrunk by the gap on every side."""
    perm = spec.params["cells"]
    k = len(perm)
    gap = 1.5 * spec.noise
    return np.array([[i / k + gap, (i + 1) / k - gap, j / k + gap, (j + 1) / k - gap] for i, j in enumerate(perm)])


def _skeleton(spec: PatternSpec) -> np.ndarray:
    if spec.family in (Family.LINEAR_BAND, Family.SINE_CURVE):
        lo, hi = _x_span(spec)
        xs = np.linspace(lo, hi, 4001)
        return np.column_stack([xs, _polyline(spec, xs)])
    if spec.family is Family.RING:
        return _ellipse(spec, np.linspace(0, 2 * math.pi, 4001))
    return np.asarray(spec.params["centers"], dtype=np.float64)


def pattern_distance(spec: PatternSpec, pts: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the noise-free pattern."""
    pts = np.atleast_2d(pts)
    if spec.family is Family.CHECKERBOARD:
        c = _cells(spec)
        dx = np.maximum(np.maximum(c[None, :, 0] - pts[:, :1], pts[:, :1] - c[None, :, 1]), 0.0)
        dy = np.maximum(np.maximum(c[None, :, 2] - pts[:, 1:], pts[:, 1:] - c[None, :, 3]), 0.0)
        return np.sqrt(dx * dx + dy * dy).min(axis=1)
    d, _ = cKDTree(_skeleton(spec)).query(pts)
    return d


def sample_pattern(spec: PatternSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` pattern-conforming points, clipped to the unit square."""
    w = spec.noise
    if spec.family in (Family.LINEAR_BAND, Family.SINE_CURVE):
        lo, hi = _x_span(spec)
        xs = rng.uniform(lo, hi, n)
        pts = np.column_stack([xs, _polyline(spec, xs) + rng.normal(0.0, w, n)])
    elif spec.family is Family.RING:
        pts = _ellipse(spec, rng.uniform(0, 2 * math.pi, n)) + rng.normal(0.0, w, (n, 2))
    elif spec.family is Family.TWO_CLUSTERS:
        centers = np.asarray(spec.params["centers"])
        pick = rng.integers(0, len(centers), n)
        pts = centers[pick] + rng.normal(0.0, w, (n, 2))
    else:
        c = _cells(spec)
        pick = rng.integers(0, len(c), n)
        cell = c[pick]
        pts = np.column_stack([rng.uniform(cell[:, 0], cell[:, 1]), rng.uniform(cell[:, 2], cell[:, 3])])
    return np.clip(pts, 0.0, 1.0)


def sample_off_pattern(spec: PatternSpec, normals: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` points that follow the normals' marginals yet lie off the pattern.

    Each coordinate is a stratified draw from the normals' empirical
    quantiles, so the anomalies' marginals match the normals' at every
    quantile level. Pairs that land on the pattern are re-paired by swapping
    y values with other anomalies, which leaves both marginals untouched.
    """
    min_dist = MIN_DISTANCE_FACTOR * spec.noise

    def stratified(col: np.ndarray) -> np.ndarray:
        return np.quantile(col, (rng.permutation(k) + rng.uniform(size=k)) / k)

    pts = np.column_stack([stratified(normals[:, 0]), stratified(normals[:, 1])])
    ok = pattern_distance(spec, pts) >= min_dist
    stuck = np.zeros(k, dtype=np.int64)
    tries = 0
    while not ok.all():
        for i in np.nonzero(~ok)[0]:
            if tries >= MAX_REJECTIONS:
                raise BenchError(
                    f"could not place {k} anomalies off a {spec.family.value} pattern after "
                    f"{tries} draws; use a narrower pattern or smaller noise"
                )
            tries += 1
            if stuck[i] >= SWAPS_BEFORE_REDRAW:
                # no partner fits: fresh coordinates from the marginals
                trial = np.quantile(normals, rng.uniform(size=2), axis=0).diagonal()[None, :]
                if pattern_distance(spec, trial)[0] >= min_dist:
                    pts[i], ok[i] = trial[0], True
                continue
            j = int(rng.integers(k))
            trial = pts[[i, j]].copy()
            trial[:, 1] = trial[::-1, 1]
            d = pattern_distance(spec, trial) >= min_dist
            if d[0] and (d[1] or not ok[j]):
                pts[[i, j]] = trial
                ok[i], ok[j] = d
            else:
                stuck[i] += 1
    return pts


# --------------------------------------------------------------- families
def _numeric_attrs(names: list[str]) -> tuple[AttributeMeta, ...]:
    return tuple(AttributeMeta(name, Kind.NUMERIC, i) for i, name in enumerate(names))


def _shuffle(values: np.ndarray, labels: np.ndarray, rng: np.random.Generator, *extra: np.ndarray):
    order = rng.permutation(len(labels))
    return (values[order], labels[order], order) + tuple(e[order] for e in extra)


def gen_synth_c(cfg: BenchConfig, pattern: PatternSpec) -> Benchmark:
    """One 2-D pattern with local-outlier anomalies."""
    rng = np.random.default_rng(cfg.seed)
    k = cfg.n_anomalies
    normals = sample_pattern(pattern, cfg.n_instances - k, rng)
    anomalies = sample_off_pattern(pattern, normals, k, rng)
    values = np.vstack([normals, anomalies])
    labels = np.r_[np.zeros(len(normals), np.int8), np.ones(k, np.int8)]
    values, labels, _ = _shuffle(values, labels, rng)
    d = Dataset(_numeric_attrs(["x", "y"]), values, labels)
    meta = {"family": "synth-c", "seed": cfg.seed, "config": asdict(cfg), "pattern": pattern.to_dict()}
    return Benchmark(d, meta)


def gen_synth_cs(cfg: BenchConfig, patterns: list[PatternSpec] | None = None) -> Benchmark:
    """Five 2-D pattern subspaces plus ``dims - 10`` uniform noise attributes.

    Anomalies are spread round-robin over the subspaces; each one is off the
    pattern in exactly one subspace and conforms in the other four.
    """
    if cfg.dims < 2 * N_SUBSPACES:
        raise ValueError(f"dims must be >= {2 * N_SUBSPACES}, got {cfg.dims}")
    rng = np.random.default_rng(cfg.seed)
    if patterns is None:
        picks = rng.choice(len(PATTERN_CATALOG), N_SUBSPACES, replace=False)
        patterns = [PATTERN_CATALOG[i] for i in picks]
    n, k = cfg.n_instances, cfg.n_anomalies
    labels = np.r_[np.zeros(n - k, np.int8), np.ones(k, np.int8)]
    anomaly_subspace = np.full(n, -1)
    anomaly_subspace[n - k:] = np.arange(k) % N_SUBSPACES
    blocks = []
    for s, spec in enumerate(patterns):
        block = sample_pattern(spec, n, rng)
        off = np.nonzero(anomaly_subspace == s)[0]
        conforming = block[anomaly_subspace != s]
        block[off] = sample_off_pattern(spec, conforming, len(off), rng)
        blocks.append(block)
    noise = rng.uniform(0.0, 1.0, (n, cfg.dims - 2 * N_SUBSPACES))
    values = np.hstack(blocks + [noise])
    values, labels, _, anomaly_subspace = _shuffle(values, labels, rng, anomaly_subspace)
    names = [f"s{s}_{c}" for s in range(N_SUBSPACES) for c in "xy"]
    names += [f"u{j}" for j in range(cfg.dims - 2 * N_SUBSPACES)]
    meta = {
        "family": "synth-cs", "seed": cfg.seed, "config": asdict(cfg),
        "patterns": [p.to_dict() for p in patterns],
        "anomaly_subspace": anomaly_subspace.tolist(),
    }
    return Benchmark(Dataset(_numeric_attrs(names), values, labels), meta)


def _cluster_centers(k: int, rng: np.random.Generator) -> np.ndarray:
    """Latin-square layout: evenly spaced slots on each axis, randomly paired.

    Every pair of clusters is separated along both axes, so a single
    threshold can isolate any cluster.
    """
    slots = np.linspace(0.15, 0.85, k)
    return np.column_stack([rng.permutation(slots), rng.permutation(slots)])


def gen_synth_i(cfg: BenchConfig, pattern: PatternSpec, cluster_sd: float = 0.04) -> Benchmark:
    """A pattern subspace (x, y) and a cluster subspace (u, v).

    One of the 3-5 clusters holds exactly the anomalies: 80% of them break
    the pattern, the remaining 20% conform to it (accidental inliers).
    """
    rng = np.random.default_rng(cfg.seed)
    n, k = cfg.n_instances, cfg.n_anomalies
    n_clusters = int(rng.integers(3, 6))
    centers = _cluster_centers(n_clusters, rng)
    n_inliers = round(INLIER_FRACTION * k)
    n_outliers = k - n_inliers

    normal_xy = sample_pattern(pattern, n - k + n_inliers, rng)
    outlier_xy = sample_off_pattern(pattern, normal_xy, n_outliers, rng)
    xy = np.vstack([normal_xy, outlier_xy])
    # rows: normals, then accidental inliers, then outliers
    cluster = np.r_[rng.integers(1, n_clusters, n - k), np.zeros(k, dtype=np.int64)]
    # spread grows with sqrt(size) so every cluster has the same peak density;
    # otherwise the small anomalous cluster would stand out on its own
    sizes = np.bincount(cluster, minlength=n_clusters)
    sd = cluster_sd * np.sqrt(sizes / sizes[1:].mean())
    uv = np.clip(centers[cluster] + rng.normal(0.0, 1.0, (n, 2)) * sd[cluster, None], 0.0, 1.0)
    labels = np.r_[np.zeros(n - k, np.int8), np.ones(k, np.int8)]
    inlier = np.r_[np.zeros(n - k, bool), np.ones(n_inliers, bool), np.zeros(n_outliers, bool)]
    values = np.hstack([xy, uv])
    values, labels, _, inlier, cluster = _shuffle(values, labels, rng, inlier, cluster)
    meta = {
        "family": "synth-i", "seed": cfg.seed, "config": asdict(cfg), "pattern": pattern.to_dict(),
        "cluster_centers": centers.tolist(), "cluster_sd": sd.tolist(), "anomalous_cluster": 0,
        "accidental_inliers": np.nonzero(inlier)[0].tolist(),
    }
    return Benchmark(Dataset(_numeric_attrs(["x", "y", "u", "v"]), values, labels), meta)


def augment_hd(d: Dataset, factor: int = 4, seed: int = 0) -> Dataset:
    """Append ``factor * M`` i.i.d. uniform [0, 1] attributes."""
    if factor < 0:
        raise ValueError("factor must be >= 0")
    extra = factor * d.n_attributes
    if extra == 0:
        return d
    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.0, 1.0, (d.n_instances, extra))
    taken = set(d.names)
    names, j = [], 0
    while len(names) < extra:
        name = f"noise_{j}"
        if name not in taken:
            names.append(name)
        j += 1
    attrs = d.attributes + tuple(AttributeMeta(nm, Kind.NUMERIC, d.n_attributes + i) for i, nm in enumerate(names))
    return Dataset(attrs, np.hstack([d.values, noise]), d.labels, d.label_name)


def marginal_probe_scores(X: np.ndarray, bins: int = 10) -> np.ndarray:
    """Histogram-per-attribute outlier score: ``sum_j -log(density_j(x_j))``.

    Only sees one attribute at a time, so it is blind to anomalies that are
    typical in every marginal.
    """
    X = np.asarray(X, dtype=np.float64)
    score = np.zeros(X.shape[0])
    for col in X.T:
        lo, hi = col.min(), col.max()
        if hi == lo:
            continue
        counts, edges = np.histogram(col, bins=bins, range=(lo, hi))
        dens = counts / (col.size * (edges[1] - edges[0]))
        idx = np.clip(np.searchsorted(edges, col, side="right") - 1, 0, bins - 1)
        score -= np.log(dens[idx])
    return score


# ------------------------------------------------------------------ suites
SUITE_FAMILIES = ("synth-c", "synth-cs", "synth-i")


def generate(family: str, seed: int, index: int = 0, n_instances: int = 1000,
             contamination: float = 0.05, dims: int = 10) -> Benchmark:
    """One dataset of ``family``; ``index`` picks the catalog pattern."""
    cfg = BenchConfig(seed=seed, n_instances=n_instances, contamination=contamination, dims=dims)
    pattern = PATTERN_CATALOG[index % len(PATTERN_CATALOG)]
    if family == "synth-c":
        return gen_synth_c(cfg, pattern)
    if family == "synth-cs":
        return gen_synth_cs(cfg)
    if family == "synth-i":
        return gen_synth_i(cfg, pattern)
    raise ValueError(f"unknown family {family!r}; expected one of {SUITE_FAMILIES}")


def suite_members(family: str, count: int | None = None, base_seed: int = 1) -> list[dict]:
    """Generation arguments of every dataset in a suite.

    Synth-C and Synth-I cycle through the pattern catalog; Synth-C&S uses
    three datasets per dimensionality 10, 20, ..., 100.
    """
    if family == "synth-cs":
        per_dim = 3 if count is None else max(1, math.ceil(count / len(CS_DIMS)))
        members = [
            {"seed": base_seed + i, "dims": dims, "index": 0}
            for i, dims in enumerate(d for d in CS_DIMS for _ in range(per_dim))
        ]
        return members[:count] if count is not None else members
    if family not in SUITE_FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {SUITE_FAMILIES}")
    count = len(PATTERN_CATALOG) if count is None else count
    return [{"seed": base_seed + i, "dims": 2 if family == "synth-c" else 4, "index": i} for i in range(count)]


def write_benchmark(b: Benchmark, path: str | Path) -> Path:
    """CSV with a trailing ``label`` column plus a ``.meta.json`` sidecar."""
    path = Path(path)
    save_csv(b.dataset, path, label_name="label")
    meta_path = path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(b.meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def gen_suite(family: str, count: int | None = None, base_seed: int = 1, out_dir: str | Path = ".",
              n_instances: int = 1000, contamination: float = 0.05) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, m in enumerate(suite_members(family, count, base_seed)):
        b = generate(family, m["seed"], m["index"], n_instances, contamination, m["dims"])
        tag = f"_d{m['dims']:03d}" if family == "synth-cs" else ""
        paths.append(write_benchmark(b, out_dir / f"{family}{tag}_{i:03d}_s{m['seed']}.csv"))
    return paths
