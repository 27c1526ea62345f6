import itertools

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from qdlnsim.tuning import (
    UEV,
    ChannelFileError,
    EnsembleSpec,
    REFERENCE_ENSEMBLE,
    QDChannel,
    align_channels,
    max_overlap_window,
    pair_resonance,
    reachable_interval,
    read_channels_csv,
    sample_ensemble,
    write_channels_csv,
)

E0 = 1.3496


def ch(i, e0=E0, rate=-4.1, vmin=-100.0, vmax=100.0):
    return QDChannel(i, e0, rate, vmin, vmax)


channel_st = st.builds(
    lambda i, de, rate, lo, width: QDChannel(i, E0 + de, rate, lo, lo + width),
    st.just(0),
    st.floats(-1e-3, 1e-3),
    st.one_of(st.just(0.0), st.floats(-10, 10)),
    st.floats(-150, 50),
    st.floats(1, 250),
)


def channel_lists(max_n=8):
    return st.lists(channel_st, min_size=1, max_size=max_n).map(
        lambda cs: [QDChannel(i, c.e0, c.rate, c.v_min, c.v_max) for i, c in enumerate(cs)]
    )


def subset_oracle(channels, tol):
    """Largest subset whose widened intervals share a point, by brute force."""
    exp = [(lo - tol, hi + tol) for lo, hi in map(reachable_interval, channels)]
    for k in range(len(exp), 0, -1):
        for sub in itertools.combinations(exp, k):
            if max(s[0] for s in sub) <= min(s[1] for s in sub):
                return k
    return 0


def candidate_oracle(channels, tol):
    """Best count over the candidate targets lo - tol and hi + tol of every interval."""
    reach = [reachable_interval(c) for c in channels]
    cands = [x for lo, hi in reach for x in (lo - tol, hi + tol, lo + tol, hi - tol)]
    best = 0
    for t in cands:
        best = max(best, sum(lo <= t + tol and hi >= t - tol for lo, hi in reach))
    return best


class TestChannel:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ch(0, vmin=10, vmax=10)
        with pytest.raises(ValueError):
            ch(0, e0=1.6)
        with pytest.raises(ValueError):
            ch(0, rate=float("inf"))


class TestReachable:
    def test_flat(self):
        assert reachable_interval(ch(0, rate=0.0)) == (E0, E0)

    def test_symmetric(self):
        lo, hi = reachable_interval(ch(0, rate=5.0))
        assert lo == pytest.approx(E0 - 0.5e-3) and hi == pytest.approx(E0 + 0.5e-3)

    def test_negative_rate_flips(self):
        c = ch(0, rate=-5.0, vmin=0, vmax=100)
        assert reachable_interval(c) == (c.energy(100), c.energy(0))


class TestSampling:
    def test_degenerate(self):
        cs = sample_ensemble(EnsembleSpec(sigma_inhomogeneous=0.0, rate_spread=0.0, seed=5))
        assert len({(c.e0, c.rate) for c in cs}) == 1

    def test_deterministic(self):
        assert sample_ensemble(EnsembleSpec(seed=9)) == sample_ensemble(EnsembleSpec(seed=9))
        assert sample_ensemble(EnsembleSpec(seed=9)) != sample_ensemble(EnsembleSpec(seed=10))

    def test_mean_full_range_shift(self):
        s = REFERENCE_ENSEMBLE
        assert abs(s.rate_mean) * 2 * s.v_limit * UEV == pytest.approx(0.82e-3)
        cs = [c for seed in range(50) for c in sample_ensemble(EnsembleSpec(seed=seed))]
        mean_shift = np.mean([hi - lo for lo, hi in map(reachable_interval, cs)])
        assert mean_shift == pytest.approx(0.82e-3, rel=0.02)

    def test_spec_invariants(self):
        with pytest.raises(ValueError):
            EnsembleSpec(n=0)
        with pytest.raises(ValueError):
            EnsembleSpec(sigma_inhomogeneous=-1e-4)


class TestAlign:
    def test_overlapping_pair(self):
        a, b = ch(0, E0), ch(1, E0 + 0.2e-3)
        res = align_channels([a, b], 1e-6)
        assert res.aligned_ids == {0, 1}
        assert res.residuals == {0: 0.0, 1: 0.0} or all(r < 1e-15 for r in res.residuals.values())

    def test_disjoint_pair(self):
        a, b = ch(0, 1.30, rate=1.0), ch(1, 1.40, rate=1.0)
        res = align_channels([a, b], 1e-6)
        assert res.count == 1

    def test_single_channel_at_e0(self):
        res = align_channels([ch(3)], 1e-6)
        assert res.aligned_ids == {3} and res.target == E0 and res.voltages[3] == 0.0

    def test_prefers_small_bias(self):
        # two identical channels can meet anywhere in range; zero bias wins
        res = align_channels([ch(0), ch(1)], 1e-6)
        assert res.voltages == {0: 0.0, 1: 0.0}

    def test_rejects_bad_tolerance(self):
        with pytest.raises(ValueError):
            align_channels([ch(0)], 0.0)

    @settings(deadline=None, max_examples=200)
    @given(channel_lists(), st.floats(1e-7, 3e-4))
    def test_invariants(self, cs, tol):
        res = align_channels(cs, tol)
        for c in cs:
            v = res.voltages[c.id]
            assert c.v_min <= v <= c.v_max
            assert res.residuals[c.id] == pytest.approx(abs(c.energy(v) - res.target), abs=1e-15)
        for i in res.aligned_ids:
            assert res.residuals[i] <= tol + 1e-15

    @settings(deadline=None, max_examples=200)
    @given(channel_lists(), st.floats(1e-7, 3e-4))
    def test_count_optimal(self, cs, tol):
        res = align_channels(cs, tol)
        assert res.count == subset_oracle(cs, tol) == candidate_oracle(cs, tol)

    @settings(deadline=None, max_examples=100)
    @given(channel_lists(), st.floats(1e-7, 3e-4), st.randoms(use_true_random=False))
    def test_permutation(self, cs, tol, rnd):
        shuffled = list(cs)
        rnd.shuffle(shuffled)
        a, b = align_channels(cs, tol), align_channels(shuffled, tol)
        assert a.count == b.count
        assert a.target == pytest.approx(b.target, abs=1e-12)

    def test_text_roundtrip(self):
        res = align_channels(sample_ensemble(EnsembleSpec(seed=1)), 1e-6)
        back = yaml.safe_load(res.to_text())
        assert back["aligned_count"] == res.count
        assert back["target_eV"] == res.target
        assert {c["id"]: c["voltage_V"] for c in back["channels"]} == res.voltages


class TestOverlap:
    def test_two_intervals(self):
        lo, hi, depth = max_overlap_window([ch(0, E0, rate=5.0), ch(1, E0 + 0.3e-3, rate=5.0)])
        assert depth == 2 and hi - lo == pytest.approx(0.7e-3)

    def test_disjoint(self):
        _, _, depth = max_overlap_window([ch(0, 1.30), ch(1, 1.40)])
        assert depth == 1


class TestPairResonance:
    def test_identical(self):
        assert pair_resonance(ch(0), ch(1)) == (0.0, 0.0)

    def test_feasible_example(self):
        a, b = ch(0, E0, rate=5.0), ch(1, E0 + 0.4e-3, rate=-5.0)
        va, vb = pair_resonance(a, b)
        assert abs(va) <= 100 and abs(vb) <= 100
        assert a.energy(va) == pytest.approx(b.energy(vb), abs=1e-12)

    def test_infeasible(self):
        assert pair_resonance(ch(0, 1.30, rate=1.0), ch(1, 1.40, rate=1.0)) is None

    def test_flat_channel(self):
        a, b = ch(0, E0, rate=0.0), ch(1, E0 + 0.2e-3, rate=-4.0)
        va, vb = pair_resonance(a, b)
        assert va == 0.0 and b.energy(vb) == pytest.approx(E0, abs=1e-12)

    def test_grid_oracle(self):
        rng = np.random.default_rng(77)
        checked = 0
        while checked < 50:
            ra, rb = rng.uniform(-8, 8, 2)
            a = QDChannel(0, E0 + rng.normal(0, 2e-4), ra, -100, 100)
            b = QDChannel(1, E0 + rng.normal(0, 2e-4), rb, -100, 100)
            got = pair_resonance(a, b)
            # grid over V_a; V_b follows exactly from the linear model
            va = np.arange(-1000, 1001) * 0.1
            vb = (a.e0 + ra * UEV * va - b.e0) / (rb * UEV)
            ok = (vb >= b.v_min) & (vb <= b.v_max)
            if not ok.any():
                assert got is None
                continue
            grid_cost = np.maximum(np.abs(va[ok]), np.abs(vb[ok])).min()
            assert got is not None
            cost = max(abs(got[0]), abs(got[1]))
            assert a.energy(got[0]) == pytest.approx(b.energy(got[1]), abs=1e-12)
            assert cost <= grid_cost + 1e-9
            assert grid_cost - cost <= 0.1 * max(1.0, abs(ra / rb)) + 1e-9
            checked += 1


class TestCsv:
    def test_roundtrip(self):
        cs = sample_ensemble(EnsembleSpec(seed=4))
        assert read_channels_csv(write_channels_csv(cs)) == cs

    def test_bad_row_names_line(self):
        text = "id,e0_eV,rate_ueV_per_V,vmin,vmax\n0,1.35,-4,-100,100\n1,1.35,oops,-100,100\n"
        with pytest.raises(ChannelFileError, match="line 3"):
            read_channels_csv(text)

    def test_short_row(self):
        with pytest.raises(ChannelFileError, match="line 2"):
            read_channels_csv("id,e0_eV,rate_ueV_per_V,vmin,vmax\n0,1.35\n")

    def test_invalid_channel_names_line(self):
        with pytest.raises(ChannelFileError, match="line 2"):
            read_channels_csv("id,e0_eV,rate_ueV_per_V,vmin,vmax\n0,1.35,-4,100,-100\n")

    def test_header(self):
        with pytest.raises(ChannelFileError, match="line 1"):
            read_channels_csv("a,b\n")
