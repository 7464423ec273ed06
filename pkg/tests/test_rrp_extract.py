"""
Tests for S_LC, ridge portion growth, the scale test and gathering.
"""

import numpy as np
import pytest

from rrpridge.core.errors import ConfigError
from rrpridge.pipeline import analyze
from rrpridge.rrp_extract import (
    PortionTracker,
    RidgePortion,
    SlcGrid,
    UnionFind,
    bounded_rates,
    compute_slc,
    extract_rrps,
    gather,
    groups_frame,
    grow_portions,
    local_maxima,
    neighborhood_intervals,
    portions_frame,
)
from rrpridge.signal import add_noise
from rrpridge.tfr import ModulationGrid
from tests.conftest import LENGTH, N_BINS, SIGMA


def make_slc(s_lc: np.ndarray, half_support: int = 2, sigma: float = 1.0) -> SlcGrid:
    zeros = np.zeros(s_lc.shape, dtype=np.int32)
    return SlcGrid(
        s_lc=s_lc,
        lower=zeros,
        upper=zeros,
        sigma=sigma,
        half_support=half_support,
        peaks=local_maxima(s_lc),
    )


def ridge_grid(rows: int = 20, n_bins: int = 16, center: int = 5) -> np.ndarray:
    s_lc = np.zeros((rows, n_bins))
    s_lc[:, center - 1] = 5.0
    s_lc[:, center] = 10.0
    s_lc[:, center + 1] = 5.0
    return s_lc


def portion(start: int, bins: list[int], energy: float) -> RidgePortion:
    return RidgePortion(start=start, bins=np.array(bins), energy=energy, origin=start)


def test_local_maxima_rules():
    """Test strict rise, plateau at lowest bin and excluded boundaries."""
    values = np.array(
        [
            [0, 1, 0, 2, 2, 1, 0],
            [3, 2, 1, 0, 1, 2, 3],
            [0, 1, 1, 1, 1, 1, 1],
        ],
        dtype=float,
    )
    mask = local_maxima(values)
    assert np.flatnonzero(mask[0]).tolist() == [1, 3]
    assert not mask[1].any()
    assert not mask[2].any()


def test_slc_dominates_spectrogram_and_peaks_on_tone(tone_analysis):
    """Test that S_LC sums a band containing the bin and peaks at the tone."""
    slc = tone_analysis.slc
    spectrogram = tone_analysis.grid.spectrogram()
    assert np.all(slc.s_lc >= spectrogram - 1e-9 * spectrogram.max())
    assert np.all(slc.lower <= np.arange(slc.n_bins)[None, :])
    assert np.all(np.argmax(slc.s_lc[54 : LENGTH - 54], axis=1) == 100)


def test_compute_slc_rejects_shape_mismatch(tone_analysis):
    """Test that q̂ and the STFT must share a shape."""
    with pytest.raises(ConfigError):
        compute_slc(tone_analysis.grid, ModulationGrid(np.zeros((2, 2))), SIGMA)


def test_slc_peaks_follow_stft_magnitude(tone_analysis):
    """Test that candidate maxima are taken on |V| and sit on the tone."""
    slc = tone_analysis.slc
    expected = local_maxima(tone_analysis.grid.magnitude())
    assert np.array_equal(slc.peaks, expected)
    assert np.all(slc.peaks[54 : LENGTH - 54, 100])


def test_slc_intervals_use_bounded_chirp_rate(tone_analysis):
    """Test that huge q̂ values widen S_LC no more than the rate bound."""
    grid = tone_analysis.grid
    wild = compute_slc(grid, ModulationGrid(np.full(grid.values.shape, 1e9)), SIGMA)
    capped = compute_slc(
        grid, ModulationGrid(np.full(grid.values.shape, float(LENGTH))), SIGMA
    )
    assert np.array_equal(wild.lower, capped.lower)
    assert np.array_equal(wild.upper, capped.upper)
    assert np.all(capped.upper - capped.lower < N_BINS // 4)
    rates = bounded_rates(ModulationGrid(np.array([[-1e9, 3.0, 1e9]])), LENGTH, 50.0)
    assert rates.tolist() == [[-50.0, 3.0, 50.0]]
    with pytest.raises(ConfigError):
        bounded_rates(ModulationGrid(np.zeros((1, 1))), LENGTH, 0.0)


def test_noisy_tones_are_both_seeded(two_tone_signal):
    """Test that both tones of a 10 dB mixture seed portions at every init."""
    analysis = analyze(add_noise(two_tone_signal, 10.0, seed=1), SIGMA, N_BINS)
    tracker = PortionTracker(analysis.slc, analysis.qhat, 2)
    for n0 in (100, 200, 300, 400):
        bins = np.sort(tracker.bins[tracker.seeds(n0)])
        assert bins.size == 2
        assert np.all(np.abs(bins - [50, 150]) <= 1)


def test_rrp_points_rank_among_strongest_peaks(two_tone_signal):
    """Test that every RRP point is a |V| peak among the 2P+1 strongest."""
    analysis = analyze(add_noise(two_tone_signal, 0.0, seed=4), SIGMA, N_BINS)
    slc = analysis.slc
    modes = 2
    rrps = extract_rrps(slc, analysis.qhat, modes, 8)
    assert rrps
    for rrp in rrps:
        for n, k in rrp.points():
            assert slc.peaks[n, k]
            column = slc.s_lc[n][slc.peaks[n]]
            assert np.sum(column > slc.s_lc[n, k]) < 2 * modes + 1


def test_out_of_band_samples_carry_no_energy():
    """Test that S_LC lookups beyond [0, N-1] read zero."""
    slc = make_slc(np.ones((4, 8)))
    values = slc.at(np.array([0, 1, 2, 3]), np.array([-3.0, 0.0, 7.2, 9.0]))
    assert values.tolist() == [0.0, 1.0, 1.0, 0.0]


def test_single_ridge_is_one_rrp():
    """Test that a clean ridge reproduced by every init gives one RRP."""
    s_lc = ridge_grid()
    rrps = extract_rrps(make_slc(s_lc), ModulationGrid(np.zeros_like(s_lc)), 1, 8)
    assert len(rrps) == 1
    (rrp,) = rrps
    assert (rrp.start, rrp.end) == (0, 19)
    assert np.all(rrp.bins == 5)
    assert rrp.energy == pytest.approx(200.0)
    assert rrp.origin == 2


def test_scale_larger_than_init_count_gives_nothing():
    """Test that s beyond the number of init indices keeps no portion."""
    s_lc = ridge_grid()
    qhat = ModulationGrid(np.zeros_like(s_lc))
    assert extract_rrps(make_slc(s_lc), qhat, 1, 17) == []
    with pytest.raises(ConfigError):
        extract_rrps(make_slc(s_lc), qhat, 1, 0)


def test_scale_counts_consecutive_inits():
    """Test that a broken ridge keeps only the portion seen by s inits."""
    s_lc = ridge_grid()
    s_lc[10] = 0.0
    qhat = ModulationGrid(np.zeros_like(s_lc))
    # inits 2..9 see rows 0..9, inits 11..17 see rows 11..19
    rrps = extract_rrps(make_slc(s_lc), qhat, 1, 8)
    assert [(r.start, r.end) for r in rrps] == [(0, 9)]
    rrps = extract_rrps(make_slc(s_lc), qhat, 1, 7)
    assert [(r.start, r.end) for r in rrps] == [(0, 9), (11, 19)]


def test_grow_portions_pads_missing_maxima():
    """Test that a column without maxima yields an empty portion."""
    s_lc = ridge_grid()
    s_lc[10] = 0.0
    slc = make_slc(s_lc)
    qhat = ModulationGrid(np.zeros_like(s_lc))
    (empty,) = grow_portions(slc, qhat, 10, 1)
    assert empty.is_empty
    (full,) = grow_portions(slc, qhat, 3, 1)
    assert (full.start, full.end) == (0, 9)
    with pytest.raises(ConfigError):
        grow_portions(slc, qhat, 20, 1)


def test_two_ridges_sorted_by_start_end_bins():
    """Test RRP ordering for two parallel ridges."""
    s_lc = ridge_grid(center=3) + 0.8 * ridge_grid(center=12)
    rrps = extract_rrps(make_slc(s_lc), ModulationGrid(np.zeros_like(s_lc)), 2, 8)
    assert [int(r.bins[0]) for r in rrps] == [3, 12]


def test_rrps_of_noiseless_tone(tone_analysis):
    """Test that a noiseless tone gives a single RRP and a single group."""
    rrps = extract_rrps(tone_analysis.slc, tone_analysis.qhat, 1, 8)
    assert len(rrps) == 1
    assert np.all(rrps[0].bins[54 : LENGTH - 54] == 100)
    groups = gather(rrps, tone_analysis.slc, SIGMA, 20)
    assert len(groups) == 1


def test_union_find_smaller_root_wins():
    """Test union-find roots and components."""
    forest = UnionFind(5)
    forest.union(3, 1)
    forest.union(1, 0)
    assert forest.find(3) == 0
    assert forest.num_components == 3
    assert forest.components() == [[0, 1, 3], [2], [4]]


def test_neighborhood_intervals_prolong_and_clip():
    """Test that intervals extend delta_t around the portion inside [0, L)."""
    owner, n, lo, hi = neighborhood_intervals([portion(1, [5, 6], 1.0)], 0.5, 3, 5, 16)
    assert n.tolist() == [0, 1, 2, 3, 4]
    assert lo.tolist() == [4, 4, 5, 5, 5]
    assert hi.tolist() == [6, 6, 7, 7, 7]
    assert np.all(owner == 0)


def test_gather_merges_overlapping_neighborhoods():
    """Test merging, union energy and strongest-member representatives."""
    slc = make_slc(np.ones((20, 16)))
    a = portion(0, [5] * 5, 5.0)
    b = portion(3, [6] * 5, 9.0)
    c = portion(0, [12] * 5, 5.0)
    groups = gather([a, b, c], slc, 1.0, 0)
    assert len(groups) == 2
    merged, alone = groups
    assert merged.energy == pytest.approx(10.0)
    assert merged.times.tolist() == list(range(8))
    assert merged.bin_at(0) == 5 and merged.bin_at(3) == 6
    assert merged.bin_at(9) is None
    assert alone.energy == pytest.approx(5.0) and alone.bin_at(0) == 12


def test_gather_delta_t_bridges_gaps():
    """Test that prolongation by delta_t joins portions separated in time."""
    slc = make_slc(np.ones((20, 16)))
    rrps = [
        portion(0, [5] * 5, 5.0),
        portion(3, [6] * 5, 9.0),
        portion(10, [5] * 3, 3.0),
    ]
    assert len(gather(rrps, slc, 1.0, 0)) == 2
    assert len(gather(rrps, slc, 1.0, 3)) == 1


def test_gather_is_order_independent():
    """Test that shuffling the RRPs does not change the groups."""
    slc = make_slc(np.ones((20, 16)))
    rrps = [
        portion(0, [5] * 5, 5.0),
        portion(3, [6] * 5, 9.0),
        portion(0, [12] * 5, 5.0),
        portion(10, [5] * 3, 3.0),
    ]
    forward = gather(rrps, slc, 1.0, 3)
    backward = gather(rrps[::-1], slc, 1.0, 3)
    assert [g.members for g in forward] == [g.members for g in backward]
    assert [g.energy for g in forward] == [g.energy for g in backward]


def test_gather_edge_cases():
    """Test empty input and negative delta_t."""
    slc = make_slc(np.ones((20, 16)))
    assert gather([], slc, 1.0, 20) == []
    with pytest.raises(ConfigError):
        gather([portion(0, [5], 1.0)], slc, 1.0, -1)


def test_frames_layout():
    """Test portion and group export columns."""
    slc = make_slc(np.ones((20, 16)))
    rrps = [portion(0, [5] * 5, 5.0)]
    assert list(portions_frame(rrps).columns) == ["portion_id", "n", "k", "energy"]
    groups = gather(rrps, slc, 1.0, 0)
    frame = groups_frame(groups)
    assert list(frame.columns) == ["group_id", "n", "k", "energy"]
    assert len(frame) == 5
