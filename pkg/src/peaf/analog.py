"""Analog feature path: activation, integrate-and-fire encoding, spike counting.

L-PEAF and N-PEAF are ``filterbank -> activation -> IAF -> spike count``; they
differ only in the activation (absolute value vs. clipped exponential).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import (
    ActivationSpec,
    FrontendConfig,
    IafSpec,
    LearnableSpec,
    PcenParams,
    Variant,
)
from .features import FeatureMatrix, StageTrace, frame_rms, n_frames
from .filterbank import FilterbankConfig, MultiChannelSignal, apply_filterbank
from .signal_io import AudioBuffer

TARGET_SPIKES_PER_FRAME = 50


def activation_fn(x, spec: ActivationSpec):
    x = np.abs(np.asarray(x, dtype=np.float64))
    if spec.kind == "absolute":
        return x
    return np.minimum(np.expm1(spec.gain * x), spec.clip)


def activate(sig: MultiChannelSignal, spec: ActivationSpec) -> MultiChannelSignal:
    """``|x|`` or ``min(exp(g|x|) - 1, C)`` applied elementwise."""
    return sig.replace(activation_fn(sig.channels, spec))


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    spikes: tuple[np.ndarray, ...]  # per channel, increasing sample indices
    total_samples: int
    sample_rate: int = 16000

    def __post_init__(self):
        spikes = tuple(np.asarray(s, dtype=np.int64) for s in self.spikes)
        for s in spikes:
            if s.size and (s[0] < 0 or s[-1] >= self.total_samples or np.any(np.diff(s) <= 0)):
                raise ValueError("spike indices must be strictly increasing within [0, total_samples)")
        object.__setattr__(self, "spikes", spikes)

    @property
    def n_channels(self) -> int:
        return len(self.spikes)

    def counts(self) -> np.ndarray:
        return np.array([s.size for s in self.spikes])

    def raster(self) -> np.ndarray:
        """Dense 0/1 matrix, channels x samples."""
        r = np.zeros((self.n_channels, self.total_samples))
        for c, s in enumerate(self.spikes):
            r[c, s] = 1.0
        return r


@njit(cache=True)
def _iaf_kernel(x, threshold, gain):
    n_ch, n = x.shape
    fired = np.zeros((n_ch, n), dtype=np.bool_)
    for c in range(n_ch):
        acc = 0.0
        for i in range(n):
            acc += gain * x[c, i]
            if acc >= threshold:
                fired[c, i] = True
                acc -= threshold
    return fired


def iaf_encode(sig: MultiChannelSignal, spec: IafSpec) -> SpikeTrain:
    """Integrate each channel; fire and subtract the threshold on crossing.

    At most one spike per sample; residual charge above threshold carries
    over to the next sample.
    """
    x = np.ascontiguousarray(sig.channels, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("IAF input must be nonnegative (apply an activation first)")
    fired = _iaf_kernel(x, float(spec.threshold), float(spec.integration_gain))
    return SpikeTrain(tuple(np.flatnonzero(row) for row in fired), x.shape[1], sig.sample_rate)


def count_spikes(train: SpikeTrain, frame_window: int, frame_hop: int) -> FeatureMatrix:
    """Spikes per channel in frames ``[t*hop, t*hop + window)``."""
    if not frame_window >= frame_hop >= 1:
        raise ValueError("need frame_window >= frame_hop >= 1")
    t = n_frames(train.total_samples, frame_window, frame_hop)
    starts = np.arange(t) * frame_hop
    out = np.zeros((train.n_channels, t))
    for c, s in enumerate(train.spikes):
        lo = np.searchsorted(s, starts, side="left")
        hi = np.searchsorted(s, starts + frame_window, side="left")
        out[c] = hi - lo
    return FeatureMatrix(out, frame_hop, frame_window, "spike_count", train.sample_rate)


def snapshot(x, frame_window: int, frame_hop: int, tag: str, sample_rate: int) -> FeatureMatrix:
    """Per-frame RMS of a continuous-time stage, so it can enter a StageTrace."""
    return FeatureMatrix(frame_rms(x, frame_window, frame_hop), frame_hop, frame_window, tag, sample_rate)


def calibrate_threshold(
    activation: ActivationSpec,
    frame_window: int = 160,
    target_spikes: float = TARGET_SPIKES_PER_FRAME,
    integration_gain: float = 1.0,
) -> float:
    """IAF threshold giving ``target_spikes`` per frame for a full-scale tone at a channel centre.

    At the centre the bandpass gain is one, so the channel carries a unit
    sinusoid; its mean activated value is integrated over the frame.
    """
    phase = (np.arange(100_000) + 0.5) / 100_000
    mean_drive = float(np.mean(activation_fn(np.sin(2 * np.pi * phase), activation)))
    return integration_gain * mean_drive * frame_window / target_spikes


def default_frontend(
    variant: Variant | str = Variant.L_PEAF,
    filterbank: FilterbankConfig | None = None,
    frame_window: int = 160,
    frame_hop: int = 160,
) -> FrontendConfig:
    variant = Variant(variant)
    fb = filterbank or FilterbankConfig()
    if variant is Variant.N_PEAF:
        act = ActivationSpec("clipped_exponential", gain=4.0, clip=10.0)
    else:
        act = ActivationSpec("absolute")
    iaf = IafSpec(calibrate_threshold(act, frame_window), 1.0)
    learnable = None
    if variant is Variant.LEARN_PEAF:
        n = fb.n_channels
        learnable = LearnableSpec(
            lowpass_cutoffs=(400.0,) * n,
            pooling="gaussian",
            gaussian_sigma=(0.4 * frame_window / 2,) * n,
            pcen=PcenParams.default(n),
        )
    return FrontendConfig(variant, fb, act, iaf, frame_window, frame_hop, learnable)


def extract_peaf(audio: AudioBuffer, cfg: FrontendConfig) -> tuple[FeatureMatrix, StageTrace]:
    """Run a PEAF variant; returns the final feature and a per-stage trace."""
    if cfg.variant is Variant.LEARN_PEAF:
        from .learnable import extract_learn_peaf

        return extract_learn_peaf(audio, cfg)
    if audio.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: audio {audio.sample_rate} Hz, config {cfg.sample_rate} Hz"
        )
    w, h, sr = cfg.frame_window, cfg.frame_hop, cfg.sample_rate
    trace = StageTrace()
    trace.add(snapshot(audio.samples, w, h, "input", sr))
    bp = apply_filterbank(audio, cfg.filterbank)
    trace.add(snapshot(bp.channels, w, h, "bandpass", sr))
    act = activate(bp, cfg.activation)
    trace.add(snapshot(act.channels, w, h, "activation", sr))
    train = iaf_encode(act, cfg.iaf)
    trace.add(snapshot(train.raster(), w, h, "iaf", sr))
    feat = count_spikes(train, w, h)
    trace.add(feat)
    return feat, trace
