"""Learn-PEAF: the L-PEAF chain extended with a per-channel first-order lowpass,
a differentiable Gaussian pooling stage in place of the IAF, and PCEN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from .analog import activate, count_spikes, iaf_encode, snapshot
from .classifier import (
    MlpModel,
    TrainConfig,
    cross_entropy,
    loss_and_grads,
    sgd_step,
    standardization,
)
from .config import FrontendConfig, PcenParams, Variant
from .features import FeatureMatrix, StageTrace, n_frames
from .filterbank import (
    MultiChannelSignal,
    apply_filterbank,
    design_bandpass,
    hz_to_mel,
    mel_to_hz,
)
from .signal_io import AudioBuffer, DatasetManifest


def lowpass_coefficient(cutoff: float, sample_rate: int) -> float:
    return 1.0 - math.exp(-2 * math.pi * cutoff / sample_rate)


def lowpass_first_order(sig: MultiChannelSignal, cutoffs) -> MultiChannelSignal:
    """One-pole smoother per channel: ``y[n] = y[n-1] + k (x[n] - y[n-1])``, ``y[-1] = 0``."""
    cutoffs = np.broadcast_to(np.asarray(cutoffs, dtype=np.float64), (sig.n_channels,))
    if np.any(cutoffs <= 0):
        raise ValueError("lowpass cutoffs must be positive")
    out = np.empty_like(sig.channels)
    for c, fc in enumerate(cutoffs):
        k = lowpass_coefficient(fc, sig.sample_rate)
        out[c] = lfilter([k], [1.0, k - 1.0], sig.channels[c])
    return sig.replace(out)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Unit-sum Gaussian taps on ``[-ceil(4 sigma), ceil(4 sigma)]``."""
    half = int(math.ceil(4 * sigma))
    j = np.arange(-half, half + 1)
    w = np.exp(-0.5 * (j / sigma) ** 2)
    w[np.abs(j) > 4 * sigma] = 0.0
    return w / w.sum()


def frame_centers(total_samples: int, frame_window: int, frame_hop: int) -> np.ndarray:
    return np.arange(n_frames(total_samples, frame_window, frame_hop)) * frame_hop + frame_window // 2


def _pool_rows(x: np.ndarray, sigma: float, frame_window: int, frame_hop: int) -> np.ndarray:
    """Gaussian pooling of every row of ``x`` with one shared ``sigma``."""
    n = x.shape[1]
    centers = frame_centers(n, frame_window, frame_hop)
    w = gaussian_kernel(sigma)
    half = w.size // 2
    out = np.zeros((x.shape[0], centers.size))
    for t, m in enumerate(centers):
        lo, hi = max(0, m - half), min(n, m + half + 1)
        taps = w[lo - m + half : hi - m + half]
        out[:, t] = x[:, lo:hi] @ taps / taps.sum()
    return out


def gaussian_pool(sig: MultiChannelSignal, sigma, frame_window: int, frame_hop: int) -> FeatureMatrix:
    """Gaussian-smooth each channel and sample it at frame centres.

    Near the signal edges the kernel is renormalised over the available
    samples, so constant inputs pass through unchanged everywhere.
    """
    x = sig.channels
    if np.any(x < 0):
        raise ValueError("gaussian_pool input must be nonnegative")
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (sig.n_channels,))
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    t = n_frames(x.shape[1], frame_window, frame_hop)
    out = np.zeros((sig.n_channels, t))
    for c in range(sig.n_channels):
        out[c] = _pool_rows(x[c : c + 1], sigma[c], frame_window, frame_hop)[0]
    return FeatureMatrix(out, frame_hop, frame_window, "gaussian_pool", sig.sample_rate)


def _smooth(E: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """PCEN smoother ``M`` and its derivative ``dM/ds`` (per channel)."""
    M = np.empty_like(E)
    dM = np.zeros_like(E)
    M[:, 0] = E[:, 0]
    for t in range(1, E.shape[1]):
        M[:, t] = (1 - s) * M[:, t - 1] + s * E[:, t]
        dM[:, t] = (1 - s) * dM[:, t - 1] - M[:, t - 1] + E[:, t]
    return M, dM


def _check_pcen_input(E: np.ndarray, params: PcenParams) -> None:
    if E.shape[0] != params.n_channels:
        raise ValueError(f"PCEN has {params.n_channels} channels, feature has {E.shape[0]}")
    if np.any(E < 0):
        raise ValueError("PCEN input must be nonnegative")


def _pcen_rows(E, s, a, d, r, floor):
    """PCEN of each row of ``E``; parameters are per-row arrays."""
    M, _ = _smooth(E, s)
    out = (E / (floor + M) ** a[:, None] + d[:, None]) ** r[:, None] - d[:, None] ** r[:, None]
    # alpha=0, r=1 is algebraically the identity; return it without round-off
    identity = (a == 0) & (r == 1)
    out[identity] = E[identity]
    return out


def pcen(feat: FeatureMatrix, params: PcenParams) -> FeatureMatrix:
    """Per-channel energy normalisation ``(E / (eps + M)^alpha + delta)^r - delta^r``."""
    E = feat.values
    _check_pcen_input(E, params)
    if E.shape[1] == 0:
        return feat.with_values(E, "pcen")
    return feat.with_values(_pcen_rows(E, *params.arrays(), params.floor), "pcen")


def pcen_gradients(feat: FeatureMatrix, params: PcenParams) -> dict[str, np.ndarray]:
    """Analytic d(output)/d(parameter) per cell, for each channel's own parameters.

    Keys ``smoothing``, ``alpha``, ``delta``, ``root``; each array has the
    feature's shape. Cell ``(c, t)`` depends only on channel ``c``'s values.
    """
    E = feat.values
    _check_pcen_input(E, params)
    s, a, d, r = (p[:, None] for p in params.arrays())
    M, dM = _smooth(E, s[:, 0])
    base = params.floor + M
    u = E * base**-a
    v = u + d
    outer = r * v ** (r - 1)
    return {
        "smoothing": outer * (-a) * E * base ** (-a - 1) * dM,
        "alpha": outer * (-u * np.log(base)),
        "delta": outer - r * d ** (r - 1),
        "root": v**r * np.log(v) - d**r * np.log(d),
    }


def extract_learn_peaf(audio: AudioBuffer, cfg: FrontendConfig) -> tuple[FeatureMatrix, StageTrace]:
    """Filterbank, |x|, lowpass, pooling (Gaussian or IAF + count), optional PCEN."""
    if cfg.variant is not Variant.LEARN_PEAF or cfg.learnable is None:
        raise ValueError("extract_learn_peaf needs a LEARN_PEAF config")
    if audio.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: audio {audio.sample_rate} Hz, config {cfg.sample_rate} Hz"
        )
    spec = cfg.learnable
    w, h, sr = cfg.frame_window, cfg.frame_hop, cfg.sample_rate
    trace = StageTrace()
    trace.add(snapshot(audio.samples, w, h, "input", sr))
    bp = apply_filterbank(audio, cfg.filterbank)
    trace.add(snapshot(bp.channels, w, h, "bandpass", sr))
    act = activate(bp, cfg.activation)
    trace.add(snapshot(act.channels, w, h, "activation", sr))
    lp = lowpass_first_order(act, spec.lowpass_cutoffs)
    # the one-pole output of a nonnegative input is nonnegative; clip round-off
    lp = lp.replace(np.maximum(lp.channels, 0.0))
    trace.add(snapshot(lp.channels, w, h, "lowpass", sr))
    if spec.pooling == "gaussian":
        feat = gaussian_pool(lp, spec.gaussian_sigma, w, h)
        trace.add(feat)
    else:
        train = iaf_encode(lp, cfg.iaf)
        trace.add(snapshot(train.raster(), w, h, "iaf", sr))
        feat = count_spikes(train, w, h)
        trace.add(feat)
    if spec.pcen is not None:
        feat = pcen(feat, spec.pcen)
        trace.add(feat)
    return feat, trace


# ------------------------------------------------------------ optimization

# Per-group normalisation for gradient descent: (to_normalized, from_normalized).
def _param_space(cfg: FrontendConfig):
    sr = cfg.sample_rate
    nyq = sr / 2
    mel_nyq = float(hz_to_mel(nyq))
    w = cfg.frame_window
    mel = (lambda f: hz_to_mel(f) / mel_nyq, lambda m: mel_to_hz(m * mel_nyq))
    ident = (lambda v: v, lambda v: v)
    return {
        # group: (normaliser, physical bounds)
        "center_freqs": (mel, (20.0, 0.45 * sr)),
        "cutoffs": (mel, (10.0, 0.999 * nyq)),
        "sigma": ((lambda s: s / w, lambda v: v * w), (0.5, 4.0 * w)),
        "smoothing": (ident, (1e-3, 1.0)),
        "alpha": (ident, (0.0, 1.5)),
        "delta": (ident, (1e-2, 10.0)),
        "root": (ident, (0.05, 1.0)),
    }


_PCEN_KEYS = ("smoothing", "alpha", "delta", "root")


def _physical_params(cfg: FrontendConfig) -> dict[str, np.ndarray]:
    spec = cfg.learnable
    p = {
        "center_freqs": cfg.filterbank.centers(),
        "cutoffs": np.array(spec.lowpass_cutoffs),
        "sigma": np.array(spec.gaussian_sigma),
    }
    if spec.pcen is not None:
        p.update(zip(_PCEN_KEYS, spec.pcen.arrays()))
    return p


def _with_params(cfg: FrontendConfig, p: dict[str, np.ndarray]) -> FrontendConfig:
    spec = cfg.learnable
    fb = replace(cfg.filterbank, center_freqs=tuple(float(f) for f in p["center_freqs"]))
    pc = spec.pcen
    if pc is not None:
        pc = PcenParams(*(tuple(p[k]) for k in _PCEN_KEYS), floor=pc.floor)
    spec = replace(
        spec,
        lowpass_cutoffs=tuple(p["cutoffs"]),
        gaussian_sigma=tuple(p["sigma"]),
        pcen=pc,
    )
    return cfg.replace(filterbank=fb, learnable=spec)


def _trainable_keys(cfg: FrontendConfig) -> list[str]:
    keys = []
    for group in cfg.learnable.trainable:
        if group == "pcen":
            if cfg.learnable.pcen is not None:
                keys.extend(_PCEN_KEYS)
        elif group == "cutoffs":
            keys.append("cutoffs")
        else:
            keys.append(group)
    return keys


def _channel_features(X: np.ndarray, cfg: FrontendConfig, p: dict[str, np.ndarray], c: int) -> np.ndarray:
    """Learn-PEAF (Gaussian pooling) output of channel ``c`` for a batch of waveforms."""
    sr = cfg.sample_rate
    bq = design_bandpass(p["center_freqs"][c], cfg.filterbank.q_factor, sr)
    y = np.abs(lfilter(bq.b, bq.a, X, axis=1))
    k = lowpass_coefficient(p["cutoffs"][c], sr)
    y = np.maximum(lfilter([k], [1.0, k - 1.0], y, axis=1), 0.0)
    E = _pool_rows(y, p["sigma"][c], cfg.frame_window, cfg.frame_hop)
    if cfg.learnable.pcen is None:
        return E
    rows = np.ones(X.shape[0])
    s, a, d, r = (rows * p[key][c] for key in _PCEN_KEYS)
    return _pcen_rows(E, s, a, d, r, cfg.learnable.pcen.floor)


@dataclass
class OptimizationResult:
    config: FrontendConfig
    losses: list[float]  # losses[k] is the training loss before step k; last entry is final

    def __iter__(self):
        return iter((self.config, self.losses))

    def write_history(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("step,loss\n")
            for k, v in enumerate(self.losses):
                fh.write(f"{k},{v!r}\n")


def optimize_frontend(
    manifest: DatasetManifest,
    cfg: FrontendConfig,
    classifier: TrainConfig = TrainConfig(learning_rate=0.03),
    steps: int = 200,
    seed: int = 0,
    frontend_lr: float = 1e-2,
    fd_step: float = 1e-3,
) -> OptimizationResult:
    """Jointly descend classifier weights and the masked frontend parameters.

    Classifier gradients are analytic; frontend gradients are central finite
    differences of the batch cross-entropy in normalised parameter space.
    Every step uses the whole manifest as one batch, and inputs are
    standardised with statistics of the current batch features. Parameters
    are clipped back into their valid ranges after each update.
    """
    if cfg.variant is not Variant.LEARN_PEAF or cfg.learnable is None:
        raise ValueError("optimize_frontend needs a LEARN_PEAF config")
    if cfg.learnable.pooling != "gaussian":
        raise ValueError("IAF pooling is not differentiable; use gaussian pooling")
    keys = _trainable_keys(cfg)
    if not keys:
        raise ValueError("trainable mask is empty")
    if steps == 0:
        return OptimizationResult(cfg, [])

    y = manifest.labels
    X = np.stack([manifest.load(i).samples for i in range(len(manifest))])
    space = _param_space(cfg)
    p = _physical_params(cfg)
    C = cfg.filterbank.n_channels

    feats = np.stack([_channel_features(X, cfg, p, c) for c in range(C)], axis=1)
    rng = np.random.default_rng(seed)
    n_classes = len(manifest.class_names)
    model = MlpModel.init((feats[0].size, *classifier.hidden, n_classes), rng)

    def batch_loss(F):
        Z = F.reshape(len(F), -1)
        mean, std = standardization(Z)
        return cross_entropy(model.logits((Z - mean) / std), y)

    losses = []
    for _ in range(steps):
        Z = feats.reshape(len(feats), -1)
        mean, std = standardization(Z)
        loss, grads = loss_and_grads(model, (Z - mean) / std, y)
        losses.append(loss)

        updates = {}
        for key in keys:
            (to_n, from_n), (lo, hi) = space[key]
            norm = np.asarray(to_n(p[key]), dtype=np.float64)
            new = norm.copy()
            for c in range(C):
                probe = []
                for sign in (1.0, -1.0):
                    q = dict(p)
                    v = norm.copy()
                    v[c] += sign * fd_step
                    q[key] = np.asarray(from_n(v), dtype=np.float64)
                    F = feats.copy()
                    F[:, c] = _channel_features(X, cfg, q, c)
                    probe.append(batch_loss(F))
                new[c] -= frontend_lr * (probe[0] - probe[1]) / (2 * fd_step)
            updates[key] = np.clip(np.asarray(from_n(new), dtype=np.float64), lo, hi)

        sgd_step(model, grads, classifier.learning_rate)
        p.update(updates)
        feats = np.stack([_channel_features(X, cfg, p, c) for c in range(C)], axis=1)

    losses.append(batch_loss(feats))
    return OptimizationResult(_with_params(cfg, p), losses)
