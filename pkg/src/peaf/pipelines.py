"""Named feature pipelines shared by the CLI and the entropy report."""

from __future__ import annotations

from typing import Callable

from .analog import default_frontend, extract_peaf
from .config import FrontendConfig, Variant
from .features import FeatureMatrix, StageTrace
from .mfcc import MfccConfig, mfcc
from .signal_io import AudioBuffer

Pipeline = Callable[[AudioBuffer], "tuple[FeatureMatrix, StageTrace]"]

FEATURE_VARIANTS = {
    "l-peaf": Variant.L_PEAF,
    "n-peaf": Variant.N_PEAF,
    "learn-peaf": Variant.LEARN_PEAF,
}
FEATURE_NAMES = ("mfcc", *FEATURE_VARIANTS)


def build_pipeline(
    name: str,
    frontend: FrontendConfig | None = None,
    mfcc_cfg: MfccConfig | None = None,
) -> Pipeline:
    """Pipeline for a feature name; ``frontend`` overrides the variant's defaults."""
    if name == "mfcc":
        cfg = mfcc_cfg or MfccConfig()
        return lambda audio: mfcc(audio, cfg)
    if name not in FEATURE_VARIANTS:
        raise ValueError(f"unknown feature {name!r}; expected one of {FEATURE_NAMES}")
    cfg = frontend if frontend is not None else default_frontend(FEATURE_VARIANTS[name])
    if cfg.variant is not FEATURE_VARIANTS[name]:
        raise ValueError(f"config variant {cfg.variant.value} does not match feature {name!r}")
    return lambda audio: extract_peaf(audio, cfg)
