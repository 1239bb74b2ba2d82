import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import entropy_bits
from peaf.features import FeatureMatrix
from peaf.info import (
    encode_feature,
    feature_entropy,
    histogram2d,
    shannon_entropy,
    stage_entropy_report,
    write_report_csv,
)
from peaf.pipelines import build_pipeline
from peaf.signal_io import AudioBuffer, DatasetManifest, synth_tone, write_wav


class TestEncode:
    def test_two_by_two(self):
        enc = encode_feature(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert enc.values.tolist() == [1, 2, 3, 4]
        assert enc.labels.tolist() == [1, 2, 3, 4]

    def test_scalar(self):
        enc = encode_feature([[7.5]])
        assert (enc.values.tolist(), enc.labels.tolist()) == ([7.5], [1])

    def test_size(self):
        feat = FeatureMatrix(np.zeros((16, 98)), 160, 160, "spike_count")
        assert encode_feature(feat).n == 1568

    def test_empty(self):
        with pytest.raises(ValueError):
            encode_feature(np.zeros((0, 3)))


class TestHistogram:
    def test_constant_feature(self):
        dist = histogram2d(encode_feature(np.full((16, 64), 3.0)), 64, 64)
        assert np.count_nonzero(dist.counts.sum(axis=1)) == 1
        np.testing.assert_array_equal(dist.counts[0], np.full(64, 16.0))
        assert shannon_entropy(dist) == pytest.approx(6.0, abs=1e-12)

    def test_one_point_per_value_bin(self):
        dist = histogram2d(encode_feature([[0.0, 1.0, 2.0, 3.0]]), 4, 1)
        assert dist.probabilities[:, 0].tolist() == [0.25] * 4

    def test_top_edge_inclusive(self):
        dist = histogram2d(encode_feature([[0.0, 10.0]]), 5, 1)
        assert dist.counts[:, 0].tolist() == [1, 0, 0, 0, 1]

    @settings(max_examples=50, deadline=None)
    @given(
        shape=st.tuples(st.integers(1, 20), st.integers(1, 40)),
        bv=st.integers(1, 70),
        bs=st.integers(1, 70),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_counts_sum_to_n(self, shape, bv, bs, seed):
        x = np.random.default_rng(seed).standard_normal(shape)
        dist = histogram2d(encode_feature(x), bv, bs)
        assert dist.counts.sum() == x.size
        assert dist.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        # brute-force recount of one random cell
        lo, hi = x.min(), x.max()
        flat = x.reshape(-1)
        vi = np.clip(np.floor((flat - lo) / (hi - lo) * bv), 0, bv - 1) if hi > lo else np.zeros(flat.size)
        si = np.clip(np.floor((np.arange(1, flat.size + 1) - 0.5) / flat.size * bs), 0, bs - 1)
        ref = np.zeros((bv, bs))
        np.add.at(ref, (vi.astype(int), si.astype(int)), 1)
        np.testing.assert_array_equal(dist.counts, ref)

    def test_bad_bins(self):
        with pytest.raises(ValueError):
            histogram2d(encode_feature([[1.0]]), 0, 4)


class TestEntropy:
    @pytest.mark.parametrize(
        "p,bits", [([1.0], 0.0), ([1 / 8] * 8, 3.0), ([0.5, 0.25, 0.25], 1.5), ([0.5, 0.0, 0.5], 1.0)]
    )
    def test_analytic(self, p, bits):
        assert shannon_entropy(p) == bits

    def test_unnormalized(self):
        with pytest.raises(ValueError):
            shannon_entropy([0.5, 0.4])
        with pytest.raises(ValueError):
            shannon_entropy([1.5, -0.5])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=40).filter(lambda v: sum(v) > 0))
    def test_matches_oracle(self, weights):
        p = np.array(weights) / np.sum(weights)
        assert shannon_entropy(p) == pytest.approx(entropy_bits(p), abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), bv=st.integers(1, 64), bs=st.integers(1, 64))
    def test_bounds(self, seed, bv, bs):
        x = np.random.default_rng(seed).exponential(size=(8, 30))
        s = feature_entropy(x, bv, bs)
        assert 0 <= s <= math.log2(bv * bs) + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_affine_relabel_invariance(self, seed):
        x = np.random.default_rng(seed).uniform(0, 5, (6, 50))
        # an increasing affine map keeps every bin assignment
        assert feature_entropy(3.0 * x + 11.0) == pytest.approx(feature_entropy(x), abs=1e-12)

    @pytest.mark.parametrize("n,bs", [(64, 64), (100, 64), (37, 8)])
    def test_constant_equals_spatial_marginal(self, n, bs):
        dist = histogram2d(encode_feature(np.full((1, n), 2.0)), 64, bs)
        marginal = dist.probabilities.sum(axis=0)
        assert shannon_entropy(dist) == shannon_entropy(marginal)


def _corpus(root, signals):
    entries = []
    for i, x in enumerate(signals):
        write_wav(root / f"s{i}.wav", AudioBuffer(x))
        entries.append((f"s{i}.wav", "a" if i % 2 == 0 else "b"))
    return DatasetManifest(tuple(entries), ("a", "b"), root)


class TestReport:
    def test_identical_files_zero_std(self, tmp_path):
        x = synth_tone(800, 0.2, 0.4).samples
        m = _corpus(tmp_path, [x] * 4)
        reports = stage_entropy_report(m, {"l-peaf": build_pipeline("l-peaf")}, 16, 16, seed=0)
        rep = reports["l-peaf"]
        assert rep.stages == ["input", "bandpass", "activation", "iaf", "spike_count"]
        assert np.all(rep.std == 0)
        assert rep.n == 4

    def test_single_sample(self, tmp_path):
        m = _corpus(tmp_path, [synth_tone(f, 0.2, 0.3).samples for f in (500, 900, 1500, 3000)])
        reports = stage_entropy_report(m, {"mfcc": build_pipeline("mfcc")}, sample_limit=1, seed=2)
        rep = reports["mfcc"]
        assert rep.n == 1
        assert np.all(rep.std == 0)

    def test_deterministic_csv(self, tmp_path):
        m = _corpus(tmp_path, [synth_tone(f, 0.2, 0.3).samples for f in (500, 900, 1500, 3000)])
        pipes = {name: build_pipeline(name) for name in ("l-peaf", "mfcc")}
        for out in ("a.csv", "b.csv"):
            write_report_csv(stage_entropy_report(m, pipes, seed=1), tmp_path / out)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        rows = list(csv.reader(open(tmp_path / "a.csv")))
        assert rows[0] == ["pipeline", "stage", "mean_bits", "std_bits", "n"]
        assert len(rows) == 1 + 5 + 4

    def test_empty_manifest(self, tmp_path):
        with pytest.raises(ValueError):
            stage_entropy_report(DatasetManifest((), ("a",), tmp_path), {"mfcc": build_pipeline("mfcc")})
