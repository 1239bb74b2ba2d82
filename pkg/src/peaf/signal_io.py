"""Audio loading, synthesis and dataset manifests.

Every pipeline in the package consumes 16 kHz mono PCM16 audio. Other formats
are rejected rather than resampled so that feature comparisons never hide
converter artifacts.
"""

from __future__ import annotations

import csv
import json
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

SAMPLE_RATE = 16000
PCM_SCALE = 32768.0

SIGNAL_KINDS = ("tone", "chirp", "noise_burst", "am_tone")

# Two classes of amplitude-modulated tones at speech-like levels: the
# envelope dynamics matter for entropy comparisons between stages.
DEFAULT_RECIPE = {
    "duration": 1.0,
    "per_class": 50,
    "classes": {
        "low": {"kind": "am_tone", "freq": [400, 600], "amplitude": [0.05, 0.4], "noise": 0.003},
        "high": {"kind": "am_tone", "freq": [1800, 2200], "amplitude": [0.05, 0.4], "noise": 0.003},
    },
}


class AudioFormatError(ValueError):
    """Raised when a WAV file does not match the 16 kHz / mono / PCM16 contract."""


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Immutable mono waveform with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim != 1 or x.size == 0:
            raise ValueError("audio must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(x)):
            raise ValueError("audio samples must be finite")
        if np.max(np.abs(x)) > 1.0:
            raise ValueError("audio samples must lie in [-1, 1]")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"invalid sample_rate={self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_wav(path) -> AudioBuffer:
    """Read a 16 kHz mono PCM16 WAV file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such WAV file: {path}")
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"{path}: not a PCM RIFF/WAVE file ({exc})") from exc
    if channels != 1:
        raise AudioFormatError(f"{path}: channels={channels}, expected mono")
    if width != 2:
        raise AudioFormatError(f"{path}: sample width={8 * width} bits, expected 16")
    if rate != SAMPLE_RATE:
        raise AudioFormatError(f"{path}: sample_rate={rate}, expected {SAMPLE_RATE}")
    pcm = np.frombuffer(raw, dtype="<i2")
    if pcm.size == 0:
        raise AudioFormatError(f"{path}: empty data chunk")
    return AudioBuffer(pcm.astype(np.float64) / PCM_SCALE, rate)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(samples) * PCM_SCALE), -32768, 32767).astype("<i2")


def write_wav(path, audio: AudioBuffer) -> None:
    """Write `audio` as PCM16. Values are rounded to the nearest code; +1.0 saturates."""
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate)
        wf.writeframes(to_pcm16(audio.samples).tobytes())


def synth_tone(
    freq: float,
    duration: float,
    amplitude: float = 1.0,
    sample_rate: int = SAMPLE_RATE,
    phase: float = 0.0,
) -> AudioBuffer:
    """Sampled sine ``amplitude * sin(2*pi*freq*n/sample_rate + phase)``."""
    if not 0 < freq < sample_rate / 2:
        raise ValueError(f"freq={freq} Hz must lie in (0, {sample_rate / 2}) Hz")
    if not 0 <= amplitude <= 1:
        raise ValueError(f"amplitude={amplitude} must lie in [0, 1]")
    n = np.arange(int(round(duration * sample_rate)))
    return AudioBuffer(
        amplitude * np.sin(2 * np.pi * freq * n / sample_rate + phase), sample_rate
    )


# ---------------------------------------------------------------- manifests


@dataclass(frozen=True)
class DatasetManifest:
    """Labelled list of audio files; paths are relative to ``root``."""

    entries: tuple[tuple[str, str], ...]
    class_names: tuple[str, ...]
    root: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        entries = tuple((str(p), str(lab)) for p, lab in self.entries)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "root", Path(self.root))
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError("class_names must be unique")
        known = set(self.class_names)
        paths = [p for p, _ in entries]
        if len(set(paths)) != len(paths):
            raise ValueError("duplicate paths in manifest")
        for p, lab in entries:
            if lab not in known:
                raise ValueError(f"label {lab!r} of {p} not in class_names")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def labels(self) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.class_names)}
        return np.array([index[lab] for _, lab in self.entries], dtype=int)

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def load(self, i: int) -> AudioBuffer:
        return load_wav(self.resolve(self.entries[i][0]))

    def subset(self, indices) -> "DatasetManifest":
        entries = tuple(self.entries[int(i)] for i in indices)
        return DatasetManifest(entries, self.class_names, self.root)

    def save(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "label"])
            w.writerows(self.entries)

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"no such manifest: {path}")
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["path", "label"]:
                raise ValueError(f"{path}: expected header 'path,label'")
            entries = [(row["path"], row["label"]) for row in reader]
        # class order: first appearance
        names = list(dict.fromkeys(lab for _, lab in entries))
        return cls(tuple(entries), tuple(names), path.parent)


# ------------------------------------------------------------- synthesis


def _uniform(rng: np.random.Generator, spec, default):
    """Draw from a ``[lo, hi]`` range, or return a fixed scalar."""
    v = spec if spec is not None else default
    if isinstance(v, (list, tuple)):
        lo, hi = v
        return float(rng.uniform(lo, hi))
    return float(v)


def _synth_signal(kind: str, params: Mapping, n: int, sr: int, rng) -> np.ndarray:
    t = np.arange(n) / sr
    amp = _uniform(rng, params.get("amplitude"), [0.3, 0.8])
    phase = float(rng.uniform(0, 2 * np.pi))
    if kind == "tone":
        f = _uniform(rng, params.get("freq"), 1000.0)
        x = np.sin(2 * np.pi * f * t + phase)
    elif kind == "am_tone":
        f = _uniform(rng, params.get("freq"), 1000.0)
        fm = _uniform(rng, params.get("mod_freq"), [2.0, 8.0])
        depth = _uniform(rng, params.get("mod_depth"), 0.8)
        env = 1 - depth * 0.5 * (1 + np.cos(2 * np.pi * fm * t))
        x = env * np.sin(2 * np.pi * f * t + phase)
    elif kind == "chirp":
        f0 = _uniform(rng, params.get("f_start"), 300.0)
        f1 = _uniform(rng, params.get("f_end"), 3000.0)
        dur = n / sr
        inst = 2 * np.pi * (f0 * t + 0.5 * (f1 - f0) * t * t / dur)
        x = np.sin(inst + phase)
    elif kind == "noise_burst":
        burst = _uniform(rng, params.get("burst"), [0.1, 0.4])
        m = max(1, int(burst * sr))
        start = int(rng.integers(0, max(1, n - m)))
        x = np.zeros(n)
        x[start : start + m] = rng.uniform(-1, 1, size=min(m, n - start))
    else:
        raise ValueError(f"unknown signal kind {kind!r}; expected one of {SIGNAL_KINDS}")
    x = amp * x
    noise = _uniform(rng, params.get("noise"), 0.0)
    if noise > 0:
        x = x + noise * rng.standard_normal(n)
    return np.clip(x, -1.0, 32767 / PCM_SCALE)


def synth_corpus(recipe: Mapping, out_dir, seed: int) -> DatasetManifest:
    """Write a balanced synthetic corpus and its ``manifest.csv``.

    ``recipe`` looks like::

        {"duration": 1.0, "per_class": 50,
         "classes": {"low": {"kind": "tone", "freq": [400, 600]},
                     "high": {"kind": "tone", "freq": [1800, 2200]}}}

    Range-valued parameters are drawn uniformly per file. Output is a pure
    function of ``(recipe, seed)``.
    """
    classes = recipe.get("classes", {})
    if len(classes) < 2:
        raise ValueError("corpus recipe needs at least two classes")
    per_class = int(recipe.get("per_class", 50))
    duration = float(recipe.get("duration", 1.0))
    sr = int(recipe.get("sample_rate", SAMPLE_RATE))
    n = int(round(duration * sr))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    ss = np.random.SeedSequence(seed)
    class_seeds = ss.spawn(len(classes))
    for (name, params), cseed in zip(classes.items(), class_seeds):
        kind = params.get("kind", "tone")
        rng = np.random.default_rng(cseed)
        for i in range(per_class):
            x = _synth_signal(kind, params, n, sr, rng)
            rel = f"{name}/{name}_{i:04d}.wav"
            (out_dir / name).mkdir(exist_ok=True)
            write_wav(out_dir / rel, AudioBuffer(to_pcm16(x) / PCM_SCALE, sr))
            entries.append((rel, name))
    manifest = DatasetManifest(tuple(entries), tuple(classes), out_dir)
    manifest.save(out_dir / "manifest.csv")
    return manifest


def load_recipe(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def balanced_subset(labels: Sequence[int], limit: int, seed: int) -> np.ndarray:
    """Indices of at most ``limit`` items drawn class-balanced, in sorted order."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    rng = np.random.default_rng(seed)
    base, extra = divmod(int(limit), classes.size)
    picked: list[int] = []
    for k, c in enumerate(classes):
        members = np.flatnonzero(labels == c)
        take = min(members.size, base + (1 if k < extra else 0))
        picked.extend(rng.permutation(members)[:take].tolist())
    return np.array(sorted(picked), dtype=int)


def stratified_split(labels: Iterable[int], val_fraction: float, seed: int):
    """Seeded per-class train/validation split; returns (train_idx, val_idx)."""
    labels = np.asarray(list(labels))
    rng = np.random.default_rng(seed)
    train, val = [], []
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        n_val = int(round(val_fraction * members.size))
        val.extend(members[:n_val].tolist())
        train.extend(members[n_val:].tolist())
    return np.array(sorted(train), dtype=int), np.array(sorted(val), dtype=int)
