import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import iaf_brute_force
from peaf.analog import (
    SpikeTrain,
    activation_fn,
    calibrate_threshold,
    count_spikes,
    default_frontend,
    extract_peaf,
    iaf_encode,
)
from peaf.config import ActivationSpec, FrontendConfig, IafSpec, Variant
from peaf.filterbank import MultiChannelSignal
from peaf.signal_io import AudioBuffer, synth_tone

ABS = ActivationSpec("absolute")
CEXP = ActivationSpec("clipped_exponential", gain=4.0, clip=10.0)


def chan(*rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    return MultiChannelSignal(rows, 16000, np.full(len(rows), 1000.0))


class TestActivation:
    def test_absolute(self):
        assert activation_fn(-0.5, ABS) == 0.5

    def test_clipped_exponential(self):
        assert activation_fn(0.5, CEXP) == pytest.approx(6.389056, abs=1e-6)
        assert activation_fn(-0.5, CEXP) == activation_fn(0.5, CEXP)
        assert activation_fn(1.0, CEXP) == 10.0
        assert activation_fn(0.0, CEXP) == 0.0

    def test_monotone(self):
        x = np.linspace(0, 1, 1001)
        assert np.all(np.diff(activation_fn(x, CEXP)) >= 0)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            ActivationSpec("relu")
        with pytest.raises(ValueError):
            ActivationSpec("clipped_exponential", gain=0)


class TestIaf:
    def test_zero_input(self):
        train = iaf_encode(chan(np.zeros(500)), IafSpec(1.0))
        assert train.counts().tolist() == [0]

    def test_constant_half(self):
        train = iaf_encode(chan(np.full(1000, 0.5)), IafSpec(50.0, 1.0))
        assert train.counts().tolist() == [10]

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            iaf_encode(chan([0.1, -0.1]), IafSpec(1.0))

    def test_one_spike_per_sample(self):
        train = iaf_encode(chan(np.full(10, 5.0)), IafSpec(1.0))
        assert train.spikes[0].tolist() == list(range(10))

    @settings(max_examples=60, deadline=None)
    @given(
        x=st.lists(st.floats(0, 3, allow_nan=False), min_size=1, max_size=300),
        threshold=st.floats(0.05, 20),
        gain=st.floats(0.1, 5),
    )
    def test_matches_brute_force(self, x, threshold, gain):
        train = iaf_encode(chan(x), IafSpec(threshold, gain))
        assert train.spikes[0].tolist() == iaf_brute_force(x, threshold, gain)

    @settings(max_examples=40, deadline=None)
    @given(x=st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=300))
    def test_doubling_never_decreases(self, x):
        spec = IafSpec(2.0)
        x = np.asarray(x)
        assert iaf_encode(chan(2 * x), spec).counts()[0] >= iaf_encode(chan(x), spec).counts()[0]

    @settings(max_examples=60, deadline=None)
    @given(a=st.floats(0, 2), theta=st.floats(0.5, 50), g=st.floats(0.1, 3), n=st.integers(1, 3000))
    def test_constant_oracle(self, a, theta, g, n):
        # one spike per sample at most, so the closed form needs g*a <= theta
        assume(g * a <= theta)
        count = iaf_encode(chan(np.full(n, a)), IafSpec(theta, g)).counts()[0]
        assert abs(count - math.floor(g * a * n / theta)) <= 1


class TestCountSpikes:
    def test_example(self):
        train = SpikeTrain((np.array([10, 20, 500]),), 512)
        assert count_spikes(train, 256, 256).values.tolist() == [[2.0, 1.0]]

    def test_empty(self):
        feat = count_spikes(SpikeTrain((np.array([], dtype=int),) * 3, 800), 160, 160)
        assert feat.values.shape == (3, 5)
        assert not feat.values.any()
        assert feat.stage_tag == "spike_count"

    def test_non_overlapping_sum(self):
        rng = np.random.default_rng(0)
        s = np.sort(rng.choice(1000, 100, replace=False))
        feat = count_spikes(SpikeTrain((s,), 1000), 160, 160)
        assert feat.values.sum() == np.sum(s < 960)

    def test_overlapping_frames(self):
        train = SpikeTrain((np.array([0, 5, 9]),), 10)
        assert count_spikes(train, 4, 2).values.tolist() == [[1, 1, 1, 1]]

    def test_bad_framing(self):
        with pytest.raises(ValueError):
            count_spikes(SpikeTrain((np.array([1]),), 10), 2, 4)

    def test_unsorted_spikes_rejected(self):
        with pytest.raises(ValueError):
            SpikeTrain((np.array([5, 3]),), 10)


class TestCalibration:
    def test_full_scale_tone_gives_fifty_spikes(self):
        cfg = default_frontend("l-peaf")
        fc = cfg.filterbank.centers()[8]
        feat, _ = extract_peaf(synth_tone(fc, 1.0, 1.0), cfg)
        assert np.median(feat.values[8, 20:]) == pytest.approx(50, abs=2)

    def test_absolute_closed_form(self):
        assert calibrate_threshold(ABS) == pytest.approx(2 / math.pi * 160 / 50, rel=1e-6)


class TestExtract:
    def test_silence(self):
        feat, trace = extract_peaf(AudioBuffer(np.zeros(16000)), default_frontend("l-peaf"))
        assert feat.values.shape == (16, 100)
        assert not feat.values.any()
        assert trace.tags == ["input", "bandpass", "activation", "iaf", "spike_count"]
        for tag in trace.tags[1:]:
            assert not trace[tag].values.any()

    @pytest.mark.parametrize("variant", ["l-peaf", "n-peaf"])
    def test_tone_peaks_at_nearest_channel(self, variant):
        cfg = default_frontend(variant)
        feat, _ = extract_peaf(synth_tone(1000, 1.0, 0.3), cfg)
        nearest = np.argmin(np.abs(cfg.filterbank.centers() - 1000))
        assert np.argmax(feat.values.sum(axis=1)) == nearest

    def test_deterministic(self):
        cfg = default_frontend("n-peaf")
        audio = synth_tone(440, 0.5, 0.4)
        a, _ = extract_peaf(audio, cfg)
        b, _ = extract_peaf(audio, cfg)
        assert np.array_equal(a.values, b.values)

    def test_sample_rate_mismatch(self):
        with pytest.raises(ValueError, match="sample-rate"):
            extract_peaf(AudioBuffer(np.zeros(800), 8000), default_frontend())

    def test_time_shift(self):
        cfg = default_frontend("l-peaf")
        rng = np.random.default_rng(4)
        x = 0.3 * rng.standard_normal(8000).clip(-3, 3)
        k = 7
        shifted = np.concatenate([np.zeros(k * 160), x])
        a, _ = extract_peaf(AudioBuffer(x), cfg)
        b, _ = extract_peaf(AudioBuffer(shifted), cfg)
        assert not b.values[:, :k].any()
        assert np.array_equal(b.values[:, k:], a.values)

    @pytest.mark.parametrize("scale", [0.25, 0.5, 0.8, 2.0])
    def test_l_peaf_homogeneity(self, scale):
        cfg = default_frontend("l-peaf")
        x = synth_tone(700, 0.5, 0.3).samples + synth_tone(2500, 0.5, 0.1).samples
        base, _ = extract_peaf(AudioBuffer(x), cfg)
        scaled, _ = extract_peaf(AudioBuffer(scale * x), cfg)
        diff = scaled.values.sum(axis=1) - scale * base.values.sum(axis=1)
        assert np.all(np.abs(diff) <= 1)

    def test_n_peaf_saturation(self):
        # square wave above ln(C+1)/g in magnitude: the activation is C everywhere
        g, c = 4.0, 10.0
        level = math.log(c + 1) / g
        x = np.where(np.arange(2000) % 2 == 0, 1.0, -1.0) * (level + 0.05)
        spec = IafSpec(20.0)
        act = activation_fn(x, CEXP)
        sat = iaf_encode(chan(act), spec).counts()[0]
        ref = iaf_encode(chan(np.full(2000, c)), spec).counts()[0]
        assert abs(sat - ref) <= 1


class TestConfig:
    def test_variant_activation_consistency(self):
        cfg = default_frontend("l-peaf")
        with pytest.raises(ValueError):
            cfg.replace(variant=Variant.N_PEAF)

    def test_json_round_trip(self, tmp_path):
        for v in ("l-peaf", "n-peaf", "learn-peaf"):
            cfg = default_frontend(v)
            cfg.save(tmp_path / f"{v}.json")
            assert FrontendConfig.load(tmp_path / f"{v}.json") == cfg
