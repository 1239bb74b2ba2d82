"""Frontend configuration objects and their JSON form.

A :class:`FrontendConfig` fully determines a PEAF variant. It round-trips
through JSON (``to_dict`` / ``from_dict``)::

    {
      "variant": "L_PEAF" | "N_PEAF" | "LEARN_PEAF",
      "filterbank": {"n_channels": 16, "f_min": 100.0, "f_max": 7000.0,
                     "q_factor": 4.0, "sample_rate": 16000,
                     "center_freqs": null | [Hz, ...]},
      "activation": {"kind": "absolute" | "clipped_exponential",
                     "gain": float, "clip": float},
      "iaf": {"threshold": float, "integration_gain": float},
      "frame_window": 160, "frame_hop": 160,
      "learnable": null | {
          "lowpass_cutoffs": [Hz, ...], "pooling": "iaf" | "gaussian",
          "gaussian_sigma": [samples, ...],
          "pcen": null | {"smoothing": [...], "alpha": [...], "delta": [...],
                          "root": [...], "floor": float},
          "trainable": ["center_freqs", "cutoffs", "sigma", "pcen"]}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .filterbank import FilterbankConfig


class Variant(str, Enum):
    L_PEAF = "L_PEAF"
    N_PEAF = "N_PEAF"
    LEARN_PEAF = "LEARN_PEAF"

    @classmethod
    def _missing_(cls, value):
        # also accept the CLI spelling, e.g. "l-peaf"
        if isinstance(value, str):
            return cls.__members__.get(value.upper().replace("-", "_"))
        return None


@dataclass(frozen=True)
class ActivationSpec:
    kind: str = "absolute"
    gain: float = 4.0
    clip: float = 10.0

    def __post_init__(self):
        if self.kind not in ("absolute", "clipped_exponential"):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "clipped_exponential" and (self.gain <= 0 or self.clip <= 0):
            raise ValueError("clipped_exponential needs gain > 0 and clip > 0")


@dataclass(frozen=True)
class IafSpec:
    threshold: float
    integration_gain: float = 1.0

    def __post_init__(self):
        if self.threshold <= 0 or self.integration_gain <= 0:
            raise ValueError("IAF threshold and integration_gain must be positive")


def _vec(v, n: int | None = None) -> tuple[float, ...]:
    t = tuple(float(x) for x in np.atleast_1d(v))
    if n is not None and len(t) == 1 and n > 1:
        t = t * n
    return t


@dataclass(frozen=True)
class PcenParams:
    """Per-channel PCEN parameters; ``floor`` (epsilon) is shared."""

    smoothing: tuple[float, ...]
    alpha: tuple[float, ...]
    delta: tuple[float, ...]
    root: tuple[float, ...]
    floor: float = 1e-6

    def __post_init__(self):
        for name in ("smoothing", "alpha", "delta", "root"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        n = {len(self.smoothing), len(self.alpha), len(self.delta), len(self.root)}
        if len(n) != 1:
            raise ValueError("PCEN parameter vectors must share one length")
        s, a, d, r = (np.array(x) for x in (self.smoothing, self.alpha, self.delta, self.root))
        if np.any(s <= 0) or np.any(s > 1):
            raise ValueError("PCEN smoothing must lie in (0, 1]")
        if np.any(a < 0):
            raise ValueError("PCEN alpha must be >= 0")
        if np.any(d <= 0):
            raise ValueError("PCEN delta must be > 0")
        if np.any(r <= 0) or np.any(r > 1):
            raise ValueError("PCEN root must lie in (0, 1]")
        if self.floor <= 0:
            raise ValueError("PCEN floor must be > 0")

    @property
    def n_channels(self) -> int:
        return len(self.smoothing)

    @classmethod
    def default(cls, n_channels: int) -> "PcenParams":
        return cls(
            smoothing=(0.04,) * n_channels,
            alpha=(0.96,) * n_channels,
            delta=(2.0,) * n_channels,
            root=(0.5,) * n_channels,
        )

    @classmethod
    def identity(cls, n_channels: int) -> "PcenParams":
        """alpha=0, root=1: output equals input."""
        return cls(
            smoothing=(0.04,) * n_channels,
            alpha=(0.0,) * n_channels,
            delta=(2.0,) * n_channels,
            root=(1.0,) * n_channels,
        )

    def arrays(self):
        return tuple(np.array(x) for x in (self.smoothing, self.alpha, self.delta, self.root))

    def to_dict(self) -> dict:
        return {
            "smoothing": list(self.smoothing),
            "alpha": list(self.alpha),
            "delta": list(self.delta),
            "root": list(self.root),
            "floor": self.floor,
        }


TRAINABLE_GROUPS = ("center_freqs", "cutoffs", "sigma", "pcen")


@dataclass(frozen=True)
class LearnableSpec:
    lowpass_cutoffs: tuple[float, ...]
    pooling: str = "gaussian"
    gaussian_sigma: tuple[float, ...] = (32.0,)
    pcen: PcenParams | None = None
    trainable: tuple[str, ...] = TRAINABLE_GROUPS

    def __post_init__(self):
        object.__setattr__(self, "lowpass_cutoffs", _vec(self.lowpass_cutoffs))
        object.__setattr__(
            self, "gaussian_sigma", _vec(self.gaussian_sigma, len(self.lowpass_cutoffs))
        )
        object.__setattr__(self, "trainable", tuple(self.trainable))
        if self.pooling not in ("iaf", "gaussian"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if any(c <= 0 for c in self.lowpass_cutoffs):
            raise ValueError("lowpass cutoffs must be positive")
        if any(s <= 0 for s in self.gaussian_sigma):
            raise ValueError("gaussian sigma must be positive")
        if len(self.gaussian_sigma) != len(self.lowpass_cutoffs):
            raise ValueError("gaussian_sigma and lowpass_cutoffs lengths differ")
        unknown = set(self.trainable) - set(TRAINABLE_GROUPS)
        if unknown:
            raise ValueError(f"unknown trainable groups {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "lowpass_cutoffs": list(self.lowpass_cutoffs),
            "pooling": self.pooling,
            "gaussian_sigma": list(self.gaussian_sigma),
            "pcen": None if self.pcen is None else self.pcen.to_dict(),
            "trainable": list(self.trainable),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LearnableSpec":
        d = dict(d)
        if d.get("pcen") is not None:
            d["pcen"] = PcenParams(**d["pcen"])
        return cls(**d)


@dataclass(frozen=True)
class FrontendConfig:
    variant: Variant
    filterbank: FilterbankConfig
    activation: ActivationSpec
    iaf: IafSpec
    frame_window: int = 160
    frame_hop: int = 160
    learnable: LearnableSpec | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.frame_window >= self.frame_hop >= 1:
            raise ValueError("need frame_window >= frame_hop >= 1")
        expected = {
            Variant.L_PEAF: "absolute",
            Variant.N_PEAF: "clipped_exponential",
            Variant.LEARN_PEAF: "absolute",
        }[self.variant]
        if self.activation.kind != expected:
            raise ValueError(f"{self.variant.value} requires a {expected} activation")
        if (self.learnable is not None) != (self.variant is Variant.LEARN_PEAF):
            raise ValueError("learnable spec must be present iff variant is LEARN_PEAF")
        if self.learnable is not None:
            n = self.filterbank.n_channels
            nyq = self.filterbank.sample_rate / 2
            if len(self.learnable.lowpass_cutoffs) != n:
                raise ValueError("one lowpass cutoff per channel required")
            if any(c > nyq for c in self.learnable.lowpass_cutoffs):
                raise ValueError(f"lowpass cutoffs must not exceed {nyq} Hz")
            if self.learnable.pcen is not None and self.learnable.pcen.n_channels != n:
                raise ValueError("one set of PCEN parameters per channel required")

    @property
    def sample_rate(self) -> int:
        return self.filterbank.sample_rate

    def replace(self, **changes) -> "FrontendConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "filterbank": self.filterbank.to_dict(),
            "activation": {
                "kind": self.activation.kind,
                "gain": self.activation.gain,
                "clip": self.activation.clip,
            },
            "iaf": {
                "threshold": self.iaf.threshold,
                "integration_gain": self.iaf.integration_gain,
            },
            "frame_window": self.frame_window,
            "frame_hop": self.frame_hop,
            "learnable": None if self.learnable is None else self.learnable.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrontendConfig":
        return cls(
            variant=Variant(d["variant"]),
            filterbank=FilterbankConfig.from_dict(d["filterbank"]),
            activation=ActivationSpec(**d["activation"]),
            iaf=IafSpec(**d["iaf"]),
            frame_window=int(d.get("frame_window", 160)),
            frame_hop=int(d.get("frame_hop", 160)),
            learnable=None
            if d.get("learnable") is None
            else LearnableSpec.from_dict(d["learnable"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "FrontendConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
