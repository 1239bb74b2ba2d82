"""Feature matrices, stage traces and the framing rule they share."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def n_frames(total_samples: int, window: int, hop: int) -> int:
    """Number of complete frames: ``floor((T - W) / H) + 1``, or 0 if ``T < W``."""
    if total_samples < window:
        return 0
    return (total_samples - window) // hop + 1


def frame_starts(total_samples: int, window: int, hop: int) -> np.ndarray:
    return np.arange(n_frames(total_samples, window, hop)) * hop


def frame_rms(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Per-frame RMS of each row of ``x`` (channels x samples)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    starts = frame_starts(x.shape[1], window, hop)
    if starts.size == 0:
        return np.zeros((x.shape[0], 0))
    # cumulative sums make every window O(1)
    c = np.concatenate([np.zeros((x.shape[0], 1)), np.cumsum(x * x, axis=1)], axis=1)
    energy = c[:, starts + window] - c[:, starts]
    return np.sqrt(np.maximum(energy, 0.0) / window)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """A channels x frames feature tagged with the pipeline stage that made it."""

    values: np.ndarray
    frame_hop: int
    frame_window: int
    stage_tag: str
    sample_rate: int = 16000

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"feature values must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite values in stage {self.stage_tag!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def with_values(self, values, stage_tag: str | None = None) -> "FeatureMatrix":
        return FeatureMatrix(
            values,
            self.frame_hop,
            self.frame_window,
            self.stage_tag if stage_tag is None else stage_tag,
            self.sample_rate,
        )

    def metadata(self) -> dict:
        return {
            "stage_tag": self.stage_tag,
            "n_channels": self.n_channels,
            "n_frames": self.n_frames,
            "frame_window": self.frame_window,
            "frame_hop": self.frame_hop,
            "sample_rate": self.sample_rate,
        }

    def to_csv(self, path) -> None:
        """Rows are channels, columns are frames; a ``.json`` sidecar holds metadata."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in self.values:
                w.writerow([repr(float(v)) for v in row])
        with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        path = Path(path)
        with open(path.with_suffix(".json"), encoding="utf-8") as fh:
            meta = json.load(fh)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh)]
        values = np.array(rows, dtype=np.float64).reshape(meta["n_channels"], meta["n_frames"])
        return cls(values, meta["frame_hop"], meta["frame_window"], meta["stage_tag"], meta["sample_rate"])


@dataclass
class StageTrace:
    """Ordered ``(stage_tag, FeatureMatrix)`` snapshots from input to final feature."""

    stages: list[tuple[str, FeatureMatrix]] = field(default_factory=list)

    def add(self, feat: FeatureMatrix) -> None:
        if feat.stage_tag in self.tags:
            raise ValueError(f"duplicate stage tag {feat.stage_tag!r}")
        self.stages.append((feat.stage_tag, feat))

    @property
    def tags(self) -> list[str]:
        return [t for t, _ in self.stages]

    def __getitem__(self, tag: str) -> FeatureMatrix:
        for t, f in self.stages:
            if t == tag:
                return f
        raise KeyError(tag)

    def __iter__(self):
        return iter(self.stages)

    def __len__(self) -> int:
        return len(self.stages)
