"""Second-order bandpass filterbank modelling the analog channel filters.

Each channel is a constant-peak-gain bandpass biquad obtained from the analog
prototype ``H(s) = (s/(Q w0)) / (s^2/w0^2 + s/(Q w0) + 1)`` by the bilinear
transform. The centre frequency is pre-warped so the 0 dB peak sits exactly at
``fc``; the bandwidth is pre-warped as well so that channels close to Nyquist
keep the analog prototype's octave bandwidth (and its decay time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.signal import lfilter

from .signal_io import AudioBuffer, SAMPLE_RATE


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n: int, f_min: float, f_max: float) -> np.ndarray:
    """``n`` frequencies equally spaced in mel between ``f_min`` and ``f_max`` inclusive."""
    if n < 1 or not 0 < f_min <= f_max:
        raise ValueError(f"invalid mel range n={n}, f_min={f_min}, f_max={f_max}")
    if n == 1:
        return np.array([float(f_min)])
    f = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n))
    # pin endpoints against round-off in the mel round trip
    f[0], f[-1] = f_min, f_max
    return f


@dataclass(frozen=True)
class FilterbankConfig:
    n_channels: int = 16
    f_min: float = 100.0
    f_max: float = 7000.0
    q_factor: float = 4.0
    sample_rate: int = SAMPLE_RATE
    # explicit per-channel centres override the mel spacing (learned configs)
    center_freqs: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        nyq = self.sample_rate / 2
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        if self.q_factor <= 0:
            raise ValueError("q_factor must be positive")
        if self.center_freqs is not None:
            cf = tuple(float(f) for f in self.center_freqs)
            if len(cf) != self.n_channels:
                raise ValueError("center_freqs length must equal n_channels")
            if not all(0 < f < nyq for f in cf):
                raise ValueError(f"center frequencies must lie in (0, {nyq}) Hz")
            object.__setattr__(self, "center_freqs", cf)
        elif self.n_channels == 1:
            if not 0 < self.f_min <= self.f_max < nyq:
                raise ValueError(f"need 0 < f_min <= f_max < {nyq} Hz")
        elif not 0 < self.f_min < self.f_max < nyq:
            raise ValueError(
                f"need 0 < f_min < f_max < {nyq} Hz, got f_min={self.f_min}, f_max={self.f_max}"
            )

    def centers(self) -> np.ndarray:
        if self.center_freqs is not None:
            return np.array(self.center_freqs)
        return mel_center_frequencies(self.n_channels, self.f_min, self.f_max)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["center_freqs"] is not None:
            d["center_freqs"] = list(d["center_freqs"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FilterbankConfig":
        d = dict(d)
        if d.get("center_freqs") is not None:
            d["center_freqs"] = tuple(d["center_freqs"])
        return cls(**d)


@dataclass(frozen=True)
class BiquadCoeffs:
    """Normalized biquad ``(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)``."""

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2])

    @property
    def a(self) -> np.ndarray:
        return np.array([1.0, self.a1, self.a2])

    def poles(self) -> np.ndarray:
        return np.roots(self.a)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freq, sample_rate: int) -> np.ndarray:
        """Complex frequency response at ``freq`` (Hz)."""
        z = np.exp(-1j * 2 * np.pi * np.asarray(freq, dtype=np.float64) / sample_rate)
        return (self.b0 + self.b1 * z + self.b2 * z * z) / (1 + self.a1 * z + self.a2 * z * z)


def design_bandpass(fc: float, q: float, sample_rate: int = SAMPLE_RATE) -> BiquadCoeffs:
    """Constant 0 dB peak-gain bandpass biquad centred on ``fc``."""
    if not 0 < fc < sample_rate / 2:
        raise ValueError(f"fc={fc} Hz must lie in (0, {sample_rate / 2}) Hz")
    if q <= 0:
        raise ValueError("q must be positive")
    w0 = 2 * math.pi * fc / sample_rate
    sin_w0 = math.sin(w0)
    # analog bandwidth in octaves, pre-warped to the digital frequency axis
    bw_oct = 2 * math.asinh(1 / (2 * q)) / math.log(2)
    alpha = sin_w0 * math.sinh(math.log(2) / 2 * bw_oct * w0 / sin_w0)
    a0 = 1 + alpha
    return BiquadCoeffs(
        b0=alpha / a0,
        b1=0.0,
        b2=-alpha / a0,
        a1=-2 * math.cos(w0) / a0,
        a2=(1 - alpha) / a0,
    )


def prototype_gain(f, fc: float, q: float):
    """Magnitude of the analog bandpass prototype at frequency ``f``."""
    f = np.asarray(f, dtype=np.float64)
    return 1.0 / np.sqrt(1.0 + q * q * (f / fc - fc / f) ** 2)


@dataclass(frozen=True, eq=False)
class MultiChannelSignal:
    channels: np.ndarray  # (n_channels, n_samples)
    sample_rate: int
    center_freqs: np.ndarray

    def __post_init__(self):
        ch = np.atleast_2d(np.asarray(self.channels, dtype=np.float64))
        if not np.all(np.isfinite(ch)):
            raise ValueError("non-finite samples in multichannel signal")
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "center_freqs", np.asarray(self.center_freqs, dtype=np.float64))

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    def replace(self, channels) -> "MultiChannelSignal":
        return MultiChannelSignal(channels, self.sample_rate, self.center_freqs)


def design_filterbank(cfg: FilterbankConfig) -> list[BiquadCoeffs]:
    return [design_bandpass(fc, cfg.q_factor, cfg.sample_rate) for fc in cfg.centers()]


def apply_filterbank(audio: AudioBuffer, cfg: FilterbankConfig) -> MultiChannelSignal:
    """Filter ``audio`` through every channel from a zero initial state."""
    if audio.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: audio {audio.sample_rate} Hz, filterbank {cfg.sample_rate} Hz"
        )
    x = audio.samples
    out = np.empty((cfg.n_channels, x.size))
    for i, c in enumerate(design_filterbank(cfg)):
        # scipy's lfilter evaluates direct form II transposed
        out[i] = lfilter(c.b, c.a, x)
    return MultiChannelSignal(out, cfg.sample_rate, cfg.centers())
