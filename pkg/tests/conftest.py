"""Shared corpora, the slow optimisation run, and the acceptance summary."""

import contextlib
import time
from dataclasses import replace

import numpy as np
import pytest

from peaf.analog import default_frontend
from peaf.classifier import TrainConfig, evaluate, train_mlp
from peaf.filterbank import FilterbankConfig
from peaf.learnable import optimize_frontend
from peaf.pipelines import build_pipeline
from peaf.signal_io import DEFAULT_RECIPE, stratified_split, synth_corpus

# 500 Hz vs 2000 Hz tones, used by the frontend-optimisation checks
TONE_RECIPE = {
    "duration": 0.5,
    "per_class": 40,
    "classes": {
        "low": {"kind": "tone", "freq": [475, 525], "amplitude": [0.1, 0.8], "noise": 0.01},
        "high": {"kind": "tone", "freq": [1900, 2100], "amplitude": [0.1, 0.8], "noise": 0.01},
    },
}
MISALIGNED_CENTERS = (3000.0, 4000.0, 5000.0, 6000.0)
OPT_STEPS = 200


def misaligned_config():
    fb = FilterbankConfig(n_channels=4, center_freqs=MISALIGNED_CENTERS)
    cfg = default_frontend("learn-peaf", filterbank=fb)
    return cfg.replace(learnable=replace(cfg.learnable, trainable=("center_freqs",)))


@pytest.fixture(scope="session")
def default_corpus(tmp_path_factory):
    return synth_corpus(DEFAULT_RECIPE, tmp_path_factory.mktemp("default_corpus"), seed=0)


@pytest.fixture(scope="session")
def tone_corpus(tmp_path_factory):
    return synth_corpus(TONE_RECIPE, tmp_path_factory.mktemp("tone_corpus"), seed=3)


def _val_accuracy(manifest, cfg, tr, va):
    pipe = build_pipeline("learn-peaf", frontend=cfg)
    feats = [pipe(manifest.load(i))[0] for i in range(len(manifest))]
    y = manifest.labels
    model, _ = train_mlp([feats[i] for i in tr], y[tr], TrainConfig(val_fraction=0, epochs=50, seed=0))
    return evaluate(model, [feats[i] for i in va], y[va])[0]


@pytest.fixture(scope="session")
def optimization_run(tone_corpus):
    """Optimise misaligned centres on half the tone corpus; score fixed vs optimised."""
    tr, va = stratified_split(tone_corpus.labels, 0.5, seed=0)
    cfg = misaligned_config()
    t0 = time.perf_counter()
    result = optimize_frontend(tone_corpus.subset(tr), cfg, steps=OPT_STEPS, seed=0)
    elapsed = time.perf_counter() - t0
    return {
        "initial": cfg,
        "result": result,
        "seconds": elapsed,
        "fixed_acc": _val_accuracy(tone_corpus, cfg, tr, va),
        "opt_acc": _val_accuracy(tone_corpus, result.config, tr, va),
    }


# ------------------------------------------------------------ acceptance log

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """``with criterion(n, title) as note:`` records PASS/FAIL for criterion ``n``."""
    results = request.config.stash[_RESULTS]

    @contextlib.contextmanager
    def _record(number, title):
        details = []
        t0 = time.perf_counter()
        try:
            yield details.append
        except BaseException:
            results[number] = ("FAIL", title, details, time.perf_counter() - t0)
            raise
        results[number] = ("PASS", title, details, time.perf_counter() - t0)

    return _record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        status, title, details, seconds = results[number]
        extra = "; ".join(details)
        line = f"[{status}] criterion {number:2d}: {title} ({seconds:.1f} s)"
        terminalreporter.write_line(line + (f" -- {extra}" if extra else ""))
