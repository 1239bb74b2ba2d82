"""Power accounting: ``P_tot = P_feat + N_OPS * FR / E_eff``.

All powers are in watts internally; reports convert to microwatts.
One operation is one multiply or one add, so a multiply-accumulate is 2 OPS.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

MICRO = 1e-6

# Neural-network processor efficiency, operations per joule (OPS/W).
E_EFF = 36.5e12

FRAME_RATES = {"KWS": 30.0, "WWD": 10.0}

# Measured/estimated feature-extraction power (W).
_FEATURE_POWER = {
    "MFCC_WITH_ADC": 7.5 * MICRO,  # 0.34 uW MFCC + 7.2 uW ADC, as printed
    "N_PEAF": 0.072 * MICRO,
    "L_PEAF": 0.38 * MICRO,
}
# Lowpass costs as much as the bandpass filters (16 % of L-PEAF); PCEN adds 10 %.
LEARN_PEAF_OVERHEAD = 0.16 + 0.10

_FEATURE_PROVENANCE = {
    "MFCC_WITH_ADC": "published estimate: MFCC 0.34 uW + ADC 7.2 uW = 7.5 uW",
    "N_PEAF": "fabricated N-PEAF chip estimate: 0.072 uW",
    "L_PEAF": "fabricated L-PEAF chip estimate: 0.38 uW",
    "LEARN_PEAF": "L-PEAF 0.38 uW x (1 + 0.16 lowpass + 0.10 PCEN)",
}

_ALIASES = {
    "MFCC": "MFCC_WITH_ADC",
    "MFCC_WITH_ADC": "MFCC_WITH_ADC",
    "N_PEAF": "N_PEAF",
    "L_PEAF": "L_PEAF",
    "LEARN_PEAF": "LEARN_PEAF",
}

# Classifier operation counts per inference, obtained by solving the power
# equation for N_OPS from the published classifier power estimates
# (4 significant figures). Keys: (classifier, task).
CLASSIFIER_POWER_UW = {
    ("mini-efficientnet", "KWS"): 0.097,
    ("mini-efficientnet", "WWD"): 0.079,
    ("lenet-5", "KWS"): 0.34,
    ("lenet-5", "WWD"): 0.30,
    ("ds-cnn", "KWS"): 8.3,
    ("ds-cnn", "WWD"): 5.4,
    ("efficientnet", "KWS"): 48.0,
}
N_OPS_PRESETS = {
    ("mini-efficientnet", "KWS"): 1.180e5,
    ("mini-efficientnet", "WWD"): 2.883e5,
    ("lenet-5", "KWS"): 4.137e5,
    ("lenet-5", "WWD"): 1.095e6,
    ("ds-cnn", "KWS"): 1.010e7,
    ("ds-cnn", "WWD"): 1.971e7,
    ("efficientnet", "KWS"): 5.840e7,
}
CLASSIFIERS = ("mini-efficientnet", "lenet-5", "ds-cnn", "efficientnet")


def canonical_feature(variant: str) -> str:
    key = str(variant).upper().replace("-", "_").replace("+", "_WITH_")
    try:
        return _ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown feature variant {variant!r}") from None


def canonical_task(task: str) -> str:
    t = str(task).upper()
    if t not in FRAME_RATES:
        raise ValueError(f"unknown task {task!r}; expected kws or wwd")
    return t


def feature_power(variant: str) -> float:
    """Feature-extraction power in watts."""
    key = canonical_feature(variant)
    if key == "LEARN_PEAF":
        return _FEATURE_POWER["L_PEAF"] * (1 + LEARN_PEAF_OVERHEAD)
    return _FEATURE_POWER[key]


def classifier_power(n_ops: float, fr: float, e_eff: float = E_EFF) -> float:
    """``n_ops * fr / e_eff`` in watts."""
    if n_ops < 0 or fr <= 0 or e_eff <= 0:
        raise ValueError("need n_ops >= 0, fr > 0 and e_eff > 0")
    return n_ops * fr / e_eff


# ----------------------------------------------------------- op counting


@dataclass(frozen=True)
class Dense:
    n_in: int
    n_out: int


@dataclass(frozen=True)
class Conv2d:
    in_ch: int
    out_ch: int
    kh: int
    kw: int
    out_h: int
    out_w: int


@dataclass(frozen=True)
class DepthwiseConv2d:
    ch: int
    kh: int
    kw: int
    out_h: int
    out_w: int


@dataclass(frozen=True)
class Pool:
    """Spatial pooling by integer factors; free by convention."""

    fh: int = 1
    fw: int = 1


@dataclass(frozen=True)
class Activation:
    pass


Layer = Dense | Conv2d | DepthwiseConv2d | Pool | Activation


def count_ops(layers: Sequence[Layer]) -> int:
    """Operations per inference (2 per multiply-accumulate).

    Shapes are tracked as ``(channels, h, w)`` or a flat size; a dense layer
    after a convolution consumes the flattened map.
    """
    ops = 0
    shape: tuple[int, ...] | None = None

    def flat(s):
        n = 1
        for d in s:
            n *= d
        return n

    for i, layer in enumerate(layers):
        if isinstance(layer, Dense):
            if shape is not None and flat(shape) != layer.n_in:
                raise ValueError(f"layer {i}: dense expects {layer.n_in} inputs, got {flat(shape)}")
            ops += 2 * layer.n_in * layer.n_out
            shape = (layer.n_out,)
        elif isinstance(layer, Conv2d):
            if shape is not None and (len(shape) != 3 or shape[0] != layer.in_ch):
                raise ValueError(f"layer {i}: conv2d expects {layer.in_ch} input channels, got shape {shape}")
            ops += 2 * layer.kh * layer.kw * layer.in_ch * layer.out_ch * layer.out_h * layer.out_w
            shape = (layer.out_ch, layer.out_h, layer.out_w)
        elif isinstance(layer, DepthwiseConv2d):
            if shape is not None and (len(shape) != 3 or shape[0] != layer.ch):
                raise ValueError(f"layer {i}: depthwise conv expects {layer.ch} channels, got shape {shape}")
            ops += 2 * layer.kh * layer.kw * layer.ch * layer.out_h * layer.out_w
            shape = (layer.ch, layer.out_h, layer.out_w)
        elif isinstance(layer, Pool):
            if shape is not None and len(shape) == 3:
                shape = (shape[0], shape[1] // layer.fh, shape[2] // layer.fw)
        elif isinstance(layer, Activation):
            pass
        else:
            raise TypeError(f"layer {i}: unsupported layer {layer!r}")
    return ops


def mlp_layers(n_inputs: int, hidden: Sequence[int], n_classes: int) -> list[Layer]:
    sizes = [n_inputs, *hidden, n_classes]
    layers: list[Layer] = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        layers += [Dense(a, b), Activation()]
    return layers[:-1]


# --------------------------------------------------------------- reports


@dataclass(frozen=True)
class PowerEntry:
    feature: str
    classifier: str
    task: str
    p_feat: float
    n_ops: float
    fr: float
    e_eff: float
    p_class: float
    p_tot: float
    provenance: dict

    def row_uw(self) -> list[str]:
        return [
            self.feature,
            self.classifier,
            self.task,
            f"{self.p_feat / MICRO:.6g}",
            f"{self.p_class / MICRO:.6g}",
            f"{self.p_tot / MICRO:.6g}",
        ]


def power_report(
    feature: str,
    n_ops: float | None = None,
    task: str = "KWS",
    *,
    layers: Sequence[Layer] | None = None,
    classifier: str | None = None,
    e_eff: float = E_EFF,
) -> PowerEntry:
    """Total power of a feature/classifier pair for a task.

    Exactly one of ``n_ops``, ``layers`` or a preset ``classifier`` name
    supplies the operation count.
    """
    feat = canonical_feature(feature)
    task = canonical_task(task)
    sources = [n_ops is not None, layers is not None, classifier is not None and n_ops is None and layers is None]
    if sum(sources) != 1:
        raise ValueError("give exactly one of n_ops, layers or a preset classifier")
    if layers is not None:
        n_ops = count_ops(layers)
        ops_note = "counted from layer list"
        classifier = classifier or "custom"
    elif n_ops is not None:
        ops_note = "supplied explicitly"
        classifier = classifier or "custom"
    else:
        key = (classifier, task)
        if key not in N_OPS_PRESETS:
            raise ValueError(f"no N_OPS preset for classifier {classifier!r} on {task}")
        n_ops = N_OPS_PRESETS[key]
        ops_note = (
            f"derived: published {CLASSIFIER_POWER_UW[key]} uW classifier estimate x E_eff / {FRAME_RATES[task]:g} fps"
        )
    fr = FRAME_RATES[task]
    p_feat = feature_power(feat)
    p_class = classifier_power(n_ops, fr, e_eff)
    return PowerEntry(
        feature=feat,
        classifier=classifier,
        task=task,
        p_feat=p_feat,
        n_ops=float(n_ops),
        fr=fr,
        e_eff=e_eff,
        p_class=p_class,
        p_tot=p_feat + p_class,
        provenance={
            "P_feat": _FEATURE_PROVENANCE[feat],
            "N_OPS": ops_note,
            "FR": f"{fr:g} fps for {task}",
            "E_eff": f"{e_eff:g} OPS/W neural-network processor",
        },
    )


def power_table() -> list[PowerEntry]:
    """Every feature against every preset classifier and task."""
    out = []
    for feat in ("MFCC_WITH_ADC", "N_PEAF", "L_PEAF", "LEARN_PEAF"):
        for clf in CLASSIFIERS:
            for task in FRAME_RATES:
                if (clf, task) in N_OPS_PRESETS:
                    out.append(power_report(feat, task=task, classifier=clf))
    return out


def write_power_csv(entries: Sequence[PowerEntry], path_or_file) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "classifier", "task", "P_feat_uW", "P_class_uW", "P_tot_uW"])
        for e in entries:
            w.writerow(e.row_uw())

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
