"""Digital MFCC baseline: 20 Mel bands, 10 cepstral coefficients (c0..c9)."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.fft import dct, rfft

from .features import FeatureMatrix, StageTrace, frame_starts
from .filterbank import hz_to_mel, mel_to_hz
from .signal_io import AudioBuffer, SAMPLE_RATE


@dataclass(frozen=True)
class MfccConfig:
    n_mels: int = 20
    n_coeffs: int = 10
    fft_size: int = 512
    frame_window: int = 400
    frame_hop: int = 160
    f_min: float = 20.0
    f_max: float = 8000.0
    log_floor: float = 1e-6
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if not 1 <= self.n_coeffs <= self.n_mels:
            raise ValueError("need 1 <= n_coeffs <= n_mels")
        if self.fft_size < self.frame_window:
            raise ValueError("fft_size must be >= frame_window")
        if not self.frame_window >= self.frame_hop >= 1:
            raise ValueError("need frame_window >= frame_hop >= 1")
        if not 0 <= self.f_min < self.f_max <= self.sample_rate / 2:
            raise ValueError("need 0 <= f_min < f_max <= Nyquist")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def to_dict(self) -> dict:
        return asdict(self)


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def frames(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    starts = frame_starts(x.size, window, hop)
    return x[starts[:, None] + np.arange(window)]


def stft_power(audio: AudioBuffer, cfg: MfccConfig = MfccConfig()) -> FeatureMatrix:
    """Hann-windowed power spectrogram ``|X|^2``, bins x frames."""
    if audio.sample_rate != cfg.sample_rate:
        raise ValueError(f"sample-rate mismatch: {audio.sample_rate} vs {cfg.sample_rate}")
    if len(audio) < cfg.frame_window:
        raise ValueError(f"audio has {len(audio)} samples, fewer than one {cfg.frame_window}-sample frame")
    fr = frames(audio.samples, cfg.frame_window, cfg.frame_hop) * hann(cfg.frame_window)
    X = rfft(fr, n=cfg.fft_size, axis=1)
    power = X.real**2 + X.imag**2
    return FeatureMatrix(power.T, cfg.frame_hop, cfg.frame_window, "stft_power", cfg.sample_rate)


def mel_peaks(cfg: MfccConfig) -> np.ndarray:
    """Triangle corner frequencies: ``n_mels + 2`` points equally spaced in mel."""
    return mel_to_hz(np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.n_mels + 2))


def mel_triangles(freqs, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Unit-peak triangular weights, ``n_mels x len(freqs)``."""
    f = np.asarray(freqs, dtype=np.float64)
    p = mel_peaks(cfg)
    left, center, right = p[:-2, None], p[1:-1, None], p[2:, None]
    rising = (f - left) / (center - left)
    falling = (right - f) / (right - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def bin_frequencies(cfg: MfccConfig) -> np.ndarray:
    return np.arange(cfg.n_bins) * cfg.sample_rate / cfg.fft_size


def mel_apply(spec: FeatureMatrix, cfg: MfccConfig = MfccConfig()) -> FeatureMatrix:
    if spec.n_channels != cfg.n_bins:
        raise ValueError(f"expected {cfg.n_bins} spectral bins, got {spec.n_channels}")
    weights = mel_triangles(bin_frequencies(cfg), cfg)
    return spec.with_values(weights @ spec.values, "mel")


def mfcc(audio: AudioBuffer, cfg: MfccConfig = MfccConfig()) -> tuple[FeatureMatrix, StageTrace]:
    """STFT power -> Mel -> log -> orthonormal DCT-II, keeping c0..c(n_coeffs-1)."""
    trace = StageTrace()
    spec = stft_power(audio, cfg)
    trace.add(spec)
    mel = mel_apply(spec, cfg)
    trace.add(mel)
    logmel = mel.with_values(np.log(mel.values + cfg.log_floor), "log_mel")
    trace.add(logmel)
    coeffs = dct(logmel.values, type=2, norm="ortho", axis=0)[: cfg.n_coeffs]
    feat = logmel.with_values(coeffs, "mfcc")
    trace.add(feat)
    return feat, trace
