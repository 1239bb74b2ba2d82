"""Entropy-based information-flow analysis of feature pipelines.

A feature matrix is flattened and paired with each element's position
(1..N), giving a two-dimensional point set. A 2-D histogram over
(value, position) estimates the distribution whose Shannon entropy, in bits,
is compared across pipeline stages.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .features import FeatureMatrix
from .pipelines import Pipeline
from .signal_io import DatasetManifest, balanced_subset

DEFAULT_BINS = 64


@dataclass(frozen=True, eq=False)
class EncodedFeature:
    values: np.ndarray
    labels: np.ndarray  # 1..N

    @property
    def n(self) -> int:
        return self.values.size


def encode_feature(feat) -> EncodedFeature:
    """Row-major flatten; element ``k`` gets spatial label ``k + 1``."""
    v = feat.values if isinstance(feat, FeatureMatrix) else np.asarray(feat, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("cannot encode an empty feature")
    return EncodedFeature(v, np.arange(1, v.size + 1))


@dataclass(frozen=True, eq=False)
class HistogramDistribution:
    counts: np.ndarray  # (B_value, B_spatial)
    value_range: tuple[float, float]

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def bins(self) -> tuple[int, int]:
        return self.counts.shape


def _bin_index(x: np.ndarray, lo: float, width: float, n_bins: int) -> np.ndarray:
    if width <= 0:
        return np.zeros(x.shape, dtype=np.int64)
    idx = np.floor((x - lo) / width * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def histogram2d(enc: EncodedFeature, b_value: int = DEFAULT_BINS, b_spatial: int = DEFAULT_BINS) -> HistogramDistribution:
    """Equal-width joint histogram of (value, spatial label).

    Value bins span ``[min, max]`` (a single bin when the feature is
    constant). Spatial bins span ``[0.5, N + 0.5]`` so every integer label
    owns a unit cell and ``N`` divisible by ``b_spatial`` fills bins evenly.
    Top edges are inclusive.
    """
    if b_value < 1 or b_spatial < 1:
        raise ValueError("bin counts must be >= 1")
    lo, hi = float(enc.values.min()), float(enc.values.max())
    vi = _bin_index(enc.values, lo, hi - lo, b_value)
    si = _bin_index(enc.labels.astype(np.float64), 0.5, float(enc.n), b_spatial)
    counts = np.bincount(vi * b_spatial + si, minlength=b_value * b_spatial)
    return HistogramDistribution(counts.reshape(b_value, b_spatial).astype(np.float64), (lo, hi))


def shannon_entropy(dist) -> float:
    """``-sum p log2 p`` in bits; zero-probability cells contribute nothing."""
    p = dist.probabilities if isinstance(dist, HistogramDistribution) else np.asarray(dist, dtype=np.float64)
    p = p.reshape(-1)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("entropy needs a normalized, nonnegative distribution")
    nz = p[p > 0]
    return float(max(0.0, -np.sum(nz * np.log2(nz))))


def feature_entropy(feat, b_value: int = DEFAULT_BINS, b_spatial: int = DEFAULT_BINS) -> float:
    return shannon_entropy(histogram2d(encode_feature(feat), b_value, b_spatial))


@dataclass
class EntropyReport:
    """Per-stage entropy statistics (bits) in pipeline order."""

    stages: list[str]
    mean: np.ndarray
    std: np.ndarray
    n: int

    def row(self, stage: str) -> tuple[float, float]:
        k = self.stages.index(stage)
        return float(self.mean[k]), float(self.std[k])


def stage_entropy_report(
    manifest: DatasetManifest,
    pipelines: Mapping[str, Pipeline],
    b_value: int = DEFAULT_BINS,
    b_spatial: int = DEFAULT_BINS,
    sample_limit: int = 1000,
    seed: int = 0,
) -> dict[str, EntropyReport]:
    """Mean and standard deviation of each stage's entropy over a class-balanced draw."""
    if len(manifest) == 0:
        raise ValueError("empty manifest")
    picked = balanced_subset(manifest.labels, sample_limit, seed)
    entropies: dict[str, list[list[float]]] = {name: [] for name in pipelines}
    tags: dict[str, list[str]] = {}
    for i in picked:
        audio = manifest.load(int(i))
        for name, pipe in pipelines.items():
            _, trace = pipe(audio)
            tags.setdefault(name, trace.tags)
            entropies[name].append([feature_entropy(f, b_value, b_spatial) for _, f in trace])
    reports = {}
    for name in pipelines:
        e = np.array(entropies[name])
        reports[name] = EntropyReport(tags[name], e.mean(axis=0), e.std(axis=0), e.shape[0])
    return reports


def write_report_csv(reports: Mapping[str, EntropyReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pipeline", "stage", "mean_bits", "std_bits", "n"])
        for name, rep in reports.items():
            for k, stage in enumerate(rep.stages):
                w.writerow([name, stage, f"{rep.mean[k]:.12g}", f"{rep.std[k]:.12g}", rep.n])
