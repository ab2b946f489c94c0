"""Experiment harness checks at reduced scale."""

import pytest

from amqsec.analysis import bloom_nai_fp_bound, cuckoo_nai_fp_bound
from amqsec.experiments import (
    bloom_fp_experiment,
    cuckoo_fp_experiment,
    load_factor_experiment,
    nai_check,
)


class TestBloomFp:
    def test_rate_tracks_the_estimate_within_noise(self):
        rep = bloom_fp_experiment(m=1024, k=5, n=50, probes=20_000, seed=42)
        fp = bloom_nai_fp_bound(1024, 5, 50)
        assert rep.probes == 20_000
        noise = 4 * (fp.estimate / rep.probes) ** 0.5
        assert rep.empirical_fp <= fp.bound + noise
        assert rep.empirical_fp == pytest.approx(fp.estimate, abs=noise)

    def test_deterministic_per_seed(self):
        a = bloom_fp_experiment(m=256, k=3, n=20, probes=2_000, seed=7)
        b = bloom_fp_experiment(m=256, k=3, n=20, probes=2_000, seed=7)
        assert a == b


class TestCuckooFp:
    def test_rate_sits_under_the_bound_at_the_requested_load(self):
        rep = cuckoo_fp_experiment(s=4, lam_i=8, lam_t=8, num=500,
                                   probes=10_000, seed=9)
        assert rep.empirical_fp <= cuckoo_nai_fp_bound(4, 8)
        assert 0.9 <= rep.load_fraction < 0.905
        assert rep.inserted == round(rep.load_fraction * 4 * 256)

    def test_unreachable_load_raises(self):
        # a one-slot-per-bucket table cannot pass half full reliably
        with pytest.raises(RuntimeError):
            cuckoo_fp_experiment(s=1, lam_i=4, lam_t=8, num=50,
                                 probes=10, seed=3, target_load=1.0)


class TestLoadFactor:
    def test_wrapped_filter_fills_most_slots(self):
        rep = load_factor_experiment(s=2, lam_i=6, lam_t=12, num=200,
                                     trials=4, seed=11)
        assert len(rep.fractions) == 4
        assert all(0.0 < f <= 1.0 for f in rep.fractions)
        # the (2,2) regime packs past 80% even at this tiny size
        assert rep.mean_fraction > 0.8

    def test_plain_variant_runs_too(self):
        rep = load_factor_experiment(s=2, lam_i=5, lam_t=12, num=200,
                                     trials=2, seed=12, wrapped=False)
        assert len(rep.fractions) == 2


class TestNaiCheck:
    def test_distance_is_sampling_noise(self):
        rep = nai_check(m=8, k=1, n=3, trials=2_000, seed=13)
        assert rep.trials == 2_000
        # at most 92 distinct reachable states for these parameters
        assert rep.support <= 92
        assert rep.distance < 0.2
