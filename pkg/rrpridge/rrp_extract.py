"""
Relevant ridge portions (RRPs).

Pipeline:
1. compute_slc - spectrogram energy summed over the local linear-chirp band
   around each bin (S_LC);
2. grow_portions / extract_rrps - chain the local maxima of |V| along the q̂
   prediction, keep only maxima among the 2P+1 of their column with the
   largest S_LC, and retain portions reproduced by s consecutive
   initialization indices;
3. gather - merge RRPs whose time-frequency neighborhoods intersect.

Portions are grown for every initialization index. Each local maximum has
exactly one successor and one predecessor, so chains are resolved once for
all maxima by pointer jumping and a portion is identified by its start,
end and an additive fingerprint of its points.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from loguru import logger

from rrpridge.core.errors import ConfigError
from rrpridge.tfr import ModulationGrid, TfGrid, round_half_away

# Point fingerprints are summed modulo this Mersenne prime.
FINGERPRINT_MODULUS = (1 << 61) - 1
FINGERPRINT_SEED = 0x5EED


def local_std_hz(q_hat: np.ndarray | float, sigma: float) -> np.ndarray:
    """Spread of |V| around a linear chirp ridge, in Hz."""
    return np.sqrt(1 + sigma**4 * np.square(q_hat)) / (math.sqrt(2 * math.pi) * sigma)


def harmonic_half_width(
    sigma: float, length: int, n_bins: int, factor: float = 3.0
) -> float:
    """factor·N/(L√(2π)σ) in bins: band half-width around a pure harmonic."""
    return factor * n_bins / (length * math.sqrt(2 * math.pi) * sigma)


@dataclass(frozen=True)
class SlcGrid:
    """
    S_LC values and the [lower, upper] bin interval each one sums over.

    ``peaks`` marks the local maxima of |V| along frequency; S_LC is only
    ranked and chained at those points.
    """

    s_lc: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sigma: float
    half_support: int
    peaks: np.ndarray

    @property
    def length(self) -> int:
        return int(self.s_lc.shape[0])

    @property
    def n_bins(self) -> int:
        return int(self.s_lc.shape[1])

    def at(self, times: np.ndarray, bins: np.ndarray) -> np.ndarray:
        """S_LC at (n, k) pairs, bins rounded to nearest; 0 outside [0, N-1]."""
        k = round_half_away(bins)
        inside = (k >= 0) & (k < self.n_bins)
        values = self.s_lc[
            np.asarray(times, dtype=np.int64), np.clip(k, 0, self.n_bins - 1)
        ]
        return np.where(inside, values, 0.0)


@dataclass(frozen=True)
class RidgePortion:
    """Time-contiguous chain of points, one bin per index from start."""

    start: int
    bins: np.ndarray
    energy: float
    origin: int

    @property
    def end(self) -> int:
        return self.start + int(self.bins.size) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.bins.size)

    @property
    def is_empty(self) -> bool:
        return self.bins.size == 0

    def points(self) -> list[tuple[int, int]]:
        return list(zip(self.times.tolist(), self.bins.tolist(), strict=True))

    def sort_key(self) -> tuple[int, int, tuple[int, ...]]:
        return (self.start, self.end, tuple(self.bins.tolist()))


@dataclass(frozen=True)
class RidgeGroup:
    """Gathered RRPs: one point per time index and the energy R of the union."""

    times: np.ndarray
    bins: np.ndarray
    energy: float
    members: tuple[int, ...] = field(default_factory=tuple)

    @property
    def size(self) -> int:
        return int(self.times.size)

    def bin_at(self, n: int) -> int | None:
        pos = int(np.searchsorted(self.times, n))
        if pos < self.times.size and self.times[pos] == n:
            return int(self.bins[pos])
        return None


def bounded_rates(
    qhat: ModulationGrid, length: int, max_chirp_rate: float | None = None
) -> np.ndarray:
    """q̂ clipped to ±max_chirp_rate; the default L sweeps the band once."""
    bound = float(length) if max_chirp_rate is None else max_chirp_rate
    if bound <= 0:
        raise ConfigError(f"max_chirp_rate must be positive, got {bound}")
    return np.clip(qhat.q_hat, -bound, bound)


def compute_slc(
    grid: TfGrid,
    qhat: ModulationGrid,
    sigma: float,
    max_chirp_rate: float | None = None,
) -> SlcGrid:
    """
    S_LC[n, k] = Σ |V[n, j]|² for j in [⌊k - std·N/L⌋, ⌈k + std·N/L⌉].

    std is the linear-chirp spread at the local chirp rate q̂[n, k], with q̂
    bounded by ``max_chirp_rate`` (L Hz per unit time by default).
    """
    if qhat.q_hat.shape != grid.values.shape:
        raise ConfigError("Modulation grid and STFT grid shapes differ")
    length, n_bins = grid.values.shape
    rates = bounded_rates(qhat, length, max_chirp_rate)
    half = local_std_hz(rates, sigma) * n_bins / length
    k = np.arange(n_bins)[None, :]
    lower = np.clip(np.floor(k - half), 0, n_bins - 1).astype(np.int32)
    upper = np.clip(np.ceil(k + half), 0, n_bins - 1).astype(np.int32)

    cumulative = np.zeros((length, n_bins + 1))
    np.cumsum(grid.spectrogram(), axis=1, out=cumulative[:, 1:])
    s_lc = np.take_along_axis(cumulative, upper + 1, axis=1) - np.take_along_axis(
        cumulative, lower, axis=1
    )
    return SlcGrid(
        s_lc=np.maximum(s_lc, 0.0),
        lower=lower,
        upper=upper,
        sigma=sigma,
        half_support=grid.window.half_support,
        peaks=local_maxima(grid.magnitude()),
    )


def local_maxima(values: np.ndarray) -> np.ndarray:
    """
    Boolean mask of row-wise local maxima.

    A bin is a maximum when it is strictly above its lower neighbor and above
    the first differing value to its right, so a plateau is represented by its
    lowest bin. Bins 0 and N-1 never qualify.
    """
    rows, n_bins = values.shape
    mask = np.zeros(values.shape, dtype=bool)
    if n_bins < 3:
        return mask
    change = values[:, 1:] != values[:, :-1]
    marker = np.where(change, np.arange(n_bins - 1)[None, :], n_bins - 1)
    # run_end[k]: last bin of the run of equal values starting at k
    run_end = np.minimum.accumulate(marker[:, ::-1], axis=1)[:, ::-1]
    k = np.arange(1, n_bins - 1)
    end = run_end[:, 1:]
    inside = end < n_bins - 1
    after = np.take_along_axis(values, np.minimum(end + 1, n_bins - 1), axis=1)
    mask[:, 1:-1] = (
        (values[:, 1:-1] > values[:, :-2]) & inside & (after < values[:, k])
    )
    return mask


class PortionTracker:
    """
    Local maxima of |V| with their S_LC column ranks and successor links.

    Every maximum ranked among the 2P+1 strongest of its column is linked
    forward to the maximum of the next column nearest to k + ⌈q̂·N/L²⌋ and
    backward to the one nearest to k - ⌈q̂·N/L²⌋; a link is cut when that
    nearest maximum ranks beyond 2P.
    """

    def __init__(self, slc: SlcGrid, qhat: ModulationGrid, modes: int) -> None:
        if modes < 1:
            raise ConfigError(f"Number of modes must be at least 1, got {modes}")
        self.slc = slc
        self.modes = modes
        self.keep = 2 * modes + 1

        n_idx, k_idx = np.nonzero(slc.peaks)
        self.rows = n_idx.astype(np.int64)
        self.bins = k_idx.astype(np.int64)
        self.values = slc.s_lc[n_idx, k_idx]
        self.row_start = np.searchsorted(self.rows, np.arange(slc.length + 1))

        # rank within the column: by S_LC descending, lower bin first on ties
        order = np.lexsort((self.bins, -self.values, self.rows))
        self.rank = np.empty(self.rows.size, dtype=np.int64)
        self.rank[order] = np.arange(order.size) - self.row_start[self.rows[order]]
        self.valid = self.rank < self.keep

        steps = qhat.steps(slc.length, slc.n_bins)[self.rows, self.bins]
        self.forward = self._links(self.rows + 1, self.bins + steps)
        self.backward = self._links(self.rows - 1, self.bins - steps)

        rng = np.random.Generator(np.random.PCG64(FINGERPRINT_SEED))
        self.weights = rng.integers(
            1, FINGERPRINT_MODULUS, size=self.rows.size, dtype=np.int64
        )
        self._resolve_chains()

    def _links(self, target_rows: np.ndarray, predicted: np.ndarray) -> np.ndarray:
        """Index of the nearest maximum in the target row, -1 if cut."""
        links = np.full(self.rows.size, -1, dtype=np.int64)
        inside = self.valid & (target_rows >= 0) & (target_rows < self.slc.length)
        src = np.flatnonzero(inside)
        if src.size == 0:
            return links
        row = target_rows[src]
        lo = self.row_start[row]
        hi = self.row_start[row + 1]
        has_max = hi > lo
        src, row, lo, hi = src[has_max], row[has_max], lo[has_max], hi[has_max]

        psi = np.clip(predicted[src], 0, self.slc.n_bins - 1)
        keys = self.rows * self.slc.n_bins + self.bins
        pos = np.searchsorted(keys, row * self.slc.n_bins + psi, side="left")
        right = np.clip(pos, lo, hi - 1)
        left = np.clip(pos - 1, lo, hi - 1)
        # nearest maximum, ties to the lower bin
        pick_left = np.abs(self.bins[left] - psi) <= np.abs(self.bins[right] - psi)
        target = np.where(pick_left, left, right)
        target = np.where(self.valid[target], target, -1)
        links[src] = target
        return links

    def _resolve_chains(self) -> None:
        """Chain ends, energies and fingerprints in both directions."""
        self.forward_end, self.forward_energy, self.forward_print = _jump(
            self.forward, self.values, self.weights
        )
        self.backward_end, self.backward_energy, self.backward_print = _jump(
            self.backward, self.values, self.weights
        )

    def seeds(self, n0: int) -> np.ndarray:
        """Indices of the P strongest maxima of column n0 (may be fewer)."""
        lo, hi = self.row_start[n0], self.row_start[n0 + 1]
        in_row = np.arange(lo, hi)
        return in_row[np.argsort(self.rank[in_row], kind="stable")][: self.modes]

    def keys(self, seeds: np.ndarray) -> np.ndarray:
        """(start, end, fingerprint) of the portion grown from each seed."""
        start = self.rows[self.backward_end[seeds]]
        end = self.rows[self.forward_end[seeds]]
        fingerprint = (
            self.forward_print[seeds]
            + self.backward_print[seeds]
            - self.weights[seeds]
        ) % FINGERPRINT_MODULUS
        return np.stack([start, end, fingerprint], axis=-1)

    def portion(self, seed: int, origin: int) -> RidgePortion:
        """Materialize the portion through a seed maximum."""
        before: list[int] = []
        node = self.backward[seed]
        while node >= 0:
            before.append(int(self.bins[node]))
            node = self.backward[node]
        after: list[int] = []
        node = self.forward[seed]
        while node >= 0:
            after.append(int(self.bins[node]))
            node = self.forward[node]
        bins = np.array(
            [*reversed(before), int(self.bins[seed]), *after], dtype=np.int64
        )
        energy = float(
            self.forward_energy[seed] + self.backward_energy[seed] - self.values[seed]
        )
        return RidgePortion(
            start=int(self.rows[seed]) - len(before),
            bins=bins,
            energy=energy,
            origin=origin,
        )


def _jump(
    links: np.ndarray, values: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Follow links to the chain end, summing values and weights on the way."""
    nxt = links.copy()
    end = np.arange(links.size)
    energy = values.astype(float).copy()
    prints = weights.copy()
    active = nxt >= 0
    while np.any(active):
        src = np.flatnonzero(active)
        hop = nxt[src]
        energy_next = energy[hop]
        prints_next = prints[hop]
        end_next = end[hop]
        nxt_next = nxt[hop]
        energy[src] += energy_next
        prints[src] = (prints[src] + prints_next) % FINGERPRINT_MODULUS
        end[src] = end_next
        nxt[src] = nxt_next
        active = nxt >= 0
    return end, energy, prints


def grow_portions(
    slc: SlcGrid,
    qhat: ModulationGrid,
    n0: int,
    modes: int,
    tracker: PortionTracker | None = None,
) -> list[RidgePortion]:
    """
    Grow P portions from the |V| maxima of column n0 with the largest S_LC.

    When the column has fewer than P maxima the list is padded with empty
    portions (``is_empty``).
    """
    if not 0 <= n0 < slc.length:
        raise ConfigError(f"Initialization index {n0} outside [0, {slc.length})")
    tracker = tracker or PortionTracker(slc, qhat, modes)
    portions = [tracker.portion(int(seed), n0) for seed in tracker.seeds(n0)]
    if len(portions) < modes:
        logger.debug("Too few local maxima at init index", n0=n0, found=len(portions))
    while len(portions) < modes:
        portions.append(
            RidgePortion(
                start=n0, bins=np.empty(0, dtype=np.int64), energy=0.0, origin=n0
            )
        )
    return portions


def rrp_init_indices(length: int, half_support: int, stride: int) -> np.ndarray:
    if stride < 1:
        raise ConfigError(f"init_stride must be at least 1, got {stride}")
    lo, hi = half_support, length - 1 - half_support
    if hi < lo:
        return np.array([length // 2], dtype=np.int64)
    return np.arange(lo, hi + 1, stride, dtype=np.int64)


def extract_rrps(
    slc: SlcGrid,
    qhat: ModulationGrid,
    modes: int,
    scale: int,
    init_stride: int = 1,
) -> list[RidgePortion]:
    """
    Portions reproduced identically by `scale` consecutive init indices.

    Init indices run over [M, L-1-M] with the given stride. A portion's
    origin is the first init index of its first qualifying run. The result
    is sorted by (start, end, bins).
    """
    if scale < 1:
        raise ConfigError(f"Scale s must be at least 1, got {scale}")
    tracker = PortionTracker(slc, qhat, modes)
    inits = rrp_init_indices(slc.length, slc.half_support, init_stride)

    seed_rows: list[np.ndarray] = []
    seed_pos: list[np.ndarray] = []
    for position, n0 in enumerate(inits):
        seeds = tracker.seeds(int(n0))
        seed_rows.append(seeds)
        seed_pos.append(np.full(seeds.size, position, dtype=np.int64))
    seeds = np.concatenate(seed_rows) if seed_rows else np.empty(0, dtype=np.int64)
    positions = np.concatenate(seed_pos) if seed_pos else np.empty(0, dtype=np.int64)
    if seeds.size == 0:
        return []

    keys = tracker.keys(seeds)
    _, identity = np.unique(keys, axis=0, return_inverse=True)
    identity = identity.ravel()

    # runs of consecutive init positions per portion identity
    order = np.lexsort((positions, identity))
    ident, pos, seed = identity[order], positions[order], seeds[order]
    fresh = np.ones(ident.size, dtype=bool)
    fresh[1:] = (ident[1:] != ident[:-1]) | (pos[1:] != pos[:-1])
    ident, pos, seed = ident[fresh], pos[fresh], seed[fresh]
    breaks = np.ones(ident.size, dtype=bool)
    breaks[1:] = (ident[1:] != ident[:-1]) | (pos[1:] != pos[:-1] + 1)
    run_id = np.cumsum(breaks) - 1
    run_start = np.flatnonzero(breaks)
    run_length = np.bincount(run_id)

    rrps: list[RidgePortion] = []
    seen: set[int] = set()
    for run in np.flatnonzero(run_length >= scale):
        first = run_start[run]
        if int(ident[first]) in seen:
            continue
        seen.add(int(ident[first]))
        rrps.append(tracker.portion(int(seed[first]), int(inits[pos[first]])))

    rrps.sort(key=RidgePortion.sort_key)
    logger.debug(
        "Relevant ridge portions extracted",
        init_indices=int(inits.size),
        distinct_portions=int(identity.max()) + 1,
        rrps=len(rrps),
        scale=scale,
    )
    return rrps


class UnionFind:
    """Union-find with path compression; the smaller root wins a union."""

    def __init__(self, size: int) -> None:
        self.parents = list(range(size))
        self.num_components = size

    def find(self, elem: int) -> int:
        root = elem
        while root != self.parents[root]:
            root = self.parents[root]
        while elem != root:
            self.parents[elem], elem = root, self.parents[elem]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if rb < ra:
            ra, rb = rb, ra
        self.parents[rb] = ra
        self.num_components -= 1

    def components(self) -> list[list[int]]:
        """Members per component, ordered by smallest member."""
        groups: dict[int, list[int]] = {}
        for elem in range(len(self.parents)):
            groups.setdefault(self.find(elem), []).append(elem)
        return list(groups.values())


def neighborhood_intervals(
    rrps: Sequence[RidgePortion],
    half_width: float,
    delta_t: int,
    length: int,
    n_bins: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    One frequency interval per (RRP, time) covering the RRP neighborhood.

    Returns (owner, n, lo, hi). Along the portion the interval is the
    harmonic slab around the point; it is prolonged delta_t indices before
    the start and after the end with the endpoint slab.
    """
    owners, times, bins = [], [], []
    for index, rrp in enumerate(rrps):
        head = np.arange(max(rrp.start - delta_t, 0), rrp.start)
        tail = np.arange(rrp.end + 1, min(rrp.end + delta_t, length - 1) + 1)
        t = np.concatenate([head, rrp.times, tail])
        k = np.concatenate(
            [
                np.full(head.size, rrp.bins[0]),
                rrp.bins,
                np.full(tail.size, rrp.bins[-1]),
            ]
        )
        owners.append(np.full(t.size, index, dtype=np.int64))
        times.append(t)
        bins.append(k)
    owner = np.concatenate(owners)
    n = np.concatenate(times).astype(np.int64)
    k = np.concatenate(bins).astype(float)
    lo = np.clip(np.floor(k - half_width), 0, n_bins - 1).astype(np.int64)
    hi = np.clip(np.ceil(k + half_width), 0, n_bins - 1).astype(np.int64)
    return owner, n, lo, hi


def gather(
    rrps: Sequence[RidgePortion],
    slc: SlcGrid,
    sigma: float,
    delta_t: int,
) -> list[RidgeGroup]:
    """
    Merge RRPs with intersecting neighborhoods into groups.

    R is the S_LC sum over the union of the member points. Where members
    disagree at a time index the point of the member with the largest own
    energy is kept. Groups are returned by decreasing R. Member ids index the
    RRPs in (start, end, bins) order, which makes the result independent of
    the input order.
    """
    if delta_t < 0:
        raise ConfigError(f"delta_t must be non-negative, got {delta_t}")
    rrps = sorted((r for r in rrps if not r.is_empty), key=RidgePortion.sort_key)
    if not rrps:
        return []

    half_width = harmonic_half_width(sigma, slc.length, slc.n_bins)
    owner, n, lo, hi = neighborhood_intervals(
        rrps, half_width, delta_t, slc.length, slc.n_bins
    )

    # per time index, sweep intervals by lower bound; an interval touching the
    # running upper bound joins the block of its predecessor
    order = np.lexsort((owner, lo, n))
    owner, n, lo, hi = owner[order], n[order], lo[order], hi[order]
    running = np.maximum.accumulate(hi + n * (2 * slc.n_bins))
    overlap = (n[1:] == n[:-1]) & (lo[1:] + n[1:] * (2 * slc.n_bins) <= running[:-1])
    forest = UnionFind(len(rrps))
    if np.any(overlap):
        edges = np.unique(
            np.stack([owner[:-1][overlap], owner[1:][overlap]], axis=1), axis=0
        )
        for a, b in edges.tolist():
            forest.union(a, b)

    groups = [_build_group(members, rrps, slc) for members in forest.components()]
    groups.sort(key=lambda g: (-g.energy, g.members[0]))
    logger.debug("RRPs gathered", rrps=len(rrps), groups=len(groups))
    return groups


def _build_group(
    members: list[int], rrps: Sequence[RidgePortion], slc: SlcGrid
) -> RidgeGroup:
    times = np.concatenate([rrps[m].times for m in members])
    bins = np.concatenate([rrps[m].bins for m in members])
    unique_points = np.unique(times * slc.n_bins + bins)
    energy = float(slc.s_lc.ravel()[unique_points].sum())

    # representative per time: strongest member, then lowest member id
    strength = np.concatenate(
        [np.full(rrps[m].bins.size, -rrps[m].energy) for m in members]
    )
    rank = np.concatenate([np.full(rrps[m].bins.size, m) for m in members])
    order = np.lexsort((rank, strength, times))
    first = np.ones(order.size, dtype=bool)
    first[1:] = times[order][1:] != times[order][:-1]
    keep = order[first]
    return RidgeGroup(
        times=times[keep],
        bins=bins[keep],
        energy=energy,
        members=tuple(members),
    )


def portions_frame(rrps: Sequence[RidgePortion]) -> pd.DataFrame:
    """Columns portion_id, n, k, energy (the portion energy on every row)."""
    frames = [
        pd.DataFrame(
            {"portion_id": index, "n": rrp.times, "k": rrp.bins, "energy": rrp.energy}
        )
        for index, rrp in enumerate(rrps)
    ]
    if not frames:
        return pd.DataFrame(columns=["portion_id", "n", "k", "energy"])
    return pd.concat(frames, ignore_index=True)


def groups_frame(groups: Sequence[RidgeGroup]) -> pd.DataFrame:
    """Columns group_id, n, k, energy (the group energy R on every row)."""
    frames = [
        pd.DataFrame(
            {
                "group_id": index,
                "n": group.times,
                "k": group.bins,
                "energy": group.energy,
            }
        )
        for index, group in enumerate(groups)
    ]
    if not frames:
        return pd.DataFrame(columns=["group_id", "n", "k", "energy"])
    return pd.concat(frames, ignore_index=True)
