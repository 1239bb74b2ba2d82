"""Simulation and analysis of power-efficient analog acoustic features (PEAF)."""

from .analog import (
    SpikeTrain,
    activate,
    calibrate_threshold,
    count_spikes,
    default_frontend,
    extract_peaf,
    iaf_encode,
)
from .config import (
    ActivationSpec,
    FrontendConfig,
    IafSpec,
    LearnableSpec,
    PcenParams,
    Variant,
)
from .features import FeatureMatrix, StageTrace
from .filterbank import (
    BiquadCoeffs,
    FilterbankConfig,
    MultiChannelSignal,
    apply_filterbank,
    design_bandpass,
    mel_center_frequencies,
)
from .signal_io import AudioBuffer, DatasetManifest, load_wav, synth_corpus, synth_tone, write_wav

__version__ = "0.1.0"
