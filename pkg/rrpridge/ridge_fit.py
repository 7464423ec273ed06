"""
Energy-greedy assembly of ridge groups into smooth ridge models.

Models map normalized time t in [0, 1] to frequency bins. The greedy loop:
1. seed P modes with the first P groups (by energy) that share a time index;
2. fit each mode by weighted least squares (weights R²), absorb any unused
   group lying in a mode's region and refit until nothing changes;
3. try every remaining group, in energy order, as an extension of the
   modes, keeping it when the total S_LC energy along the curves grows;
4. repeat the absorption and the scan with the chirp-aware region;
5. if the final curves intersect, fall back to the best non-intersecting
   accepted state, or report the fit incomplete when there is none.

The same loop drives the single-mode smoothing-spline variant.
"""

import itertools
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal, Protocol

import numpy as np
import pandas as pd
from loguru import logger
from scipy.interpolate import BSpline, make_smoothing_spline

from rrpridge.core.errors import ConfigError, DetectionError
from rrpridge.rrp_extract import RidgeGroup, SlcGrid, harmonic_half_width, local_std_hz

RegionKind = Literal["harmonic", "chirp"]

# Smoothing-parameter bracket and relative bisection tolerance.
SPLINE_LAM_MIN = 1e-18
SPLINE_LAM_MAX = 1e12
SPLINE_LAM_RTOL = 1e-6
# make_smoothing_spline needs at least this many distinct abscissae.
SPLINE_MIN_POINTS = 5


class Curve(Protocol):
    def __call__(self, t: np.ndarray) -> np.ndarray: ...

    def deriv(self) -> "Curve": ...


class SplineCurve:
    """Cubic smoothing spline, continued linearly outside its data range."""

    def __init__(self, spline: BSpline, lam: float) -> None:
        self.spline = spline
        self.lam = lam
        self.lo = float(spline.t[spline.k])
        self.hi = float(spline.t[-spline.k - 1])
        self._slope_lo = float(spline(self.lo, 1))
        self._slope_hi = float(spline(self.hi, 1))

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inner = self.spline(np.clip(t, self.lo, self.hi))
        below = np.where(t < self.lo, (t - self.lo) * self._slope_lo, 0.0)
        above = np.where(t > self.hi, (t - self.hi) * self._slope_hi, 0.0)
        return inner + below + above

    def deriv(self) -> "SplineDerivative":
        return SplineDerivative(self)


class SplineDerivative:
    """
    Derivative of a SplineCurve of the given order.

    The slope is constant outside the data range and higher orders vanish
    there, matching the linear continuation.
    """

    def __init__(self, curve: SplineCurve, order: int = 1) -> None:
        self.curve = curve
        self.order = order

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.order > self.curve.spline.k:
            return np.zeros_like(t)
        inner = np.clip(t, self.curve.lo, self.curve.hi)
        values = self.curve.spline(inner, self.order)
        if self.order == 1:
            return values
        inside = (t >= self.curve.lo) & (t <= self.curve.hi)
        return np.where(inside, values, 0.0)

    def deriv(self) -> "SplineDerivative":
        return SplineDerivative(self.curve, self.order + 1)


@dataclass(frozen=True)
class RidgeModel:
    """Smooth ridge: frequency bins as a function of normalized time."""

    curve: Curve
    members: tuple[int, ...] = ()
    kind: str = "polynomial"

    def bins(self, length: int) -> np.ndarray:
        return np.asarray(self.curve(np.arange(length) / length), dtype=float)

    def slope(self, length: int) -> np.ndarray:
        """d(bins)/dt on the time grid."""
        return np.asarray(self.curve.deriv()(np.arange(length) / length), dtype=float)

    def frequency_hz(self, length: int, n_bins: int) -> np.ndarray:
        return self.bins(length) * length / n_bins

    def chirp_rate_hz(self, length: int, n_bins: int) -> np.ndarray:
        """Chirp rate in Hz per unit normalized time."""
        return self.slope(length) * length / n_bins

    def describe(self) -> str:
        """Structured text block with the model parameters."""
        lines = [f"kind = {self.kind}", f"members = {list(self.members)}"]
        if isinstance(self.curve, SplineCurve):
            spline = self.curve.spline
            lines.append(f"lam = {self.curve.lam:.6e}")
            lines.append(f"degree = {spline.k}")
            lines.append("knots = " + " ".join(f"{v:.9g}" for v in spline.t))
            lines.append("coefficients = " + " ".join(f"{v:.9g}" for v in spline.c))
        else:
            monomial = self.curve.convert(  # type: ignore[attr-defined]
                kind=np.polynomial.Polynomial
            )
            coefficients = " ".join(f"{v:.12g}" for v in monomial.coef)
            lines.append(f"degree = {monomial.degree()}")
            lines.append("coefficients = " + coefficients)
        return "\n".join(lines)


@dataclass(frozen=True)
class BandSet:
    """
    Integer bands [lower, upper] per mode (rows) and time (columns).

    A band with lower > upper is empty at that time.
    """

    lower: np.ndarray
    upper: np.ndarray

    @property
    def modes(self) -> int:
        return int(self.lower.shape[0])

    @property
    def length(self) -> int:
        return int(self.lower.shape[1])

    def contains(self, mode: int, values: np.ndarray) -> np.ndarray:
        """Whether each value lies inside the band of `mode` at its time."""
        return (values >= self.lower[mode]) & (values <= self.upper[mode])


def full_band(length: int, n_bins: int) -> BandSet:
    """Single band covering every bin at every time."""
    return BandSet(
        lower=np.zeros((1, length), dtype=np.int64),
        upper=np.full((1, length), n_bins - 1, dtype=np.int64),
    )


@dataclass(frozen=True)
class FitState:
    """Member groups per mode, the fitted models and their energy."""

    members: tuple[tuple[int, ...], ...]
    models: tuple[RidgeModel, ...]
    energy: float


@dataclass(frozen=True)
class RidgeFit:
    models: list[RidgeModel]
    bands: BandSet
    energy: float
    complete: bool
    non_intersecting: bool
    history: list[FitState] = field(default_factory=list)


ModeFitter = Callable[[np.ndarray, np.ndarray, np.ndarray], Curve]


def effective_degree(degree: int, times: np.ndarray, length: int) -> int:
    """
    Degree usable on the given times.

    Capped by the distinct times minus one and by the covered share of the
    signal: a mode seen on a fraction s of [0, L) gets at most ⌈d·s⌉ (>= 1).
    """
    distinct = np.unique(times).size
    span = int(times.max() - times.min()) + 1
    by_span = max(1, math.ceil(degree * span / length))
    return max(0, min(degree, distinct - 1, by_span))


def polynomial_fitter(degree: int, length: int) -> ModeFitter:
    """Weighted least squares in a Legendre basis on t = n/L in [0, 1]."""

    def fit(times: np.ndarray, bins: np.ndarray, weights: np.ndarray) -> Curve:
        effective = effective_degree(degree, times, length)
        return np.polynomial.Legendre.fit(
            times / length, bins, effective, w=weights, domain=[0.0, 1.0]
        )

    return fit


def spline_fitter(tol_bins: float, length: int) -> ModeFitter:
    """
    Smoothest cubic spline whose weighted mean squared residual is <= tol².

    Weights enter squared, like the least-squares fit. The smoothing
    parameter is bisected on a log scale until the budget is active; when
    the weighted straight line already meets it, the line is returned.
    """

    def fit(times: np.ndarray, bins: np.ndarray, weights: np.ndarray) -> Curve:
        x = times / length
        weights2 = weights**2
        budget = tol_bins**2

        def residual(curve: Curve) -> float:
            return float(np.sum(weights2 * (bins - curve(x)) ** 2) / np.sum(weights2))

        line = np.polynomial.Polynomial.fit(
            x, bins, min(1, np.unique(times).size - 1), w=weights, domain=[0.0, 1.0]
        )
        if np.unique(times).size < SPLINE_MIN_POINTS or residual(line) <= budget:
            return line

        ux, inverse = np.unique(x, return_inverse=True)
        total = np.bincount(inverse, weights=weights2)
        uy = np.bincount(inverse, weights=weights2 * bins) / total

        def spline(lam: float) -> SplineCurve:
            return SplineCurve(make_smoothing_spline(ux, uy, w=total, lam=lam), lam)

        lo, hi = math.log(SPLINE_LAM_MIN), math.log(SPLINE_LAM_MAX)
        best = spline(SPLINE_LAM_MIN)
        if residual(best) > budget:
            logger.warning(
                "Spline tolerance unreachable, using the least smooth spline",
                tol_bins=tol_bins,
                residual=math.sqrt(residual(best)),
            )
            return best
        while hi - lo > SPLINE_LAM_RTOL:
            mid = 0.5 * (lo + hi)
            candidate = spline(math.exp(mid))
            if residual(candidate) <= budget:
                lo, best = mid, candidate
            else:
                hi = mid
        return best

    return fit


class GreedyRidgeFit:
    """State of the energy-greedy assembly for one set of groups."""

    def __init__(
        self,
        groups: Sequence[RidgeGroup],
        slc: SlcGrid,
        fitter: ModeFitter,
        sigma: float,
        kind: str,
        literal_chirp_rate: bool = False,
    ) -> None:
        self.groups = list(groups)
        self.slc = slc
        self.fitter = fitter
        self.sigma = sigma
        self.kind = kind
        self.literal_chirp_rate = literal_chirp_rate

        self.group_of = np.concatenate(
            [
                np.full(g.size, index, dtype=np.int64)
                for index, g in enumerate(self.groups)
            ]
        )
        self.point_n = np.concatenate([g.times for g in self.groups]).astype(np.int64)
        self.point_k = np.concatenate([g.bins for g in self.groups]).astype(float)
        top = max(g.energy for g in self.groups)
        self.weights = np.array(
            [g.energy / top if top > 0 else 1.0 for g in self.groups]
        )
        self.sizes = np.bincount(self.group_of, minlength=len(self.groups))
        self.history: list[FitState] = []

    # fitting and scoring

    def fit_mode(self, members: tuple[int, ...]) -> RidgeModel:
        mask = np.isin(self.group_of, members)
        curve = self.fitter(
            self.point_n[mask], self.point_k[mask], self.weights[self.group_of[mask]]
        )
        return RidgeModel(curve=curve, members=tuple(sorted(members)), kind=self.kind)

    def energy(self, models: Sequence[RidgeModel]) -> float:
        length = self.slc.length
        n = np.arange(length)
        return float(sum(self.slc.at(n, model.bins(length)).sum() for model in models))

    def region(
        self, model: RidgeModel, kind: RegionKind
    ) -> tuple[np.ndarray, np.ndarray]:
        length, n_bins = self.slc.length, self.slc.n_bins
        center = model.bins(length)
        if kind == "harmonic":
            half = harmonic_half_width(self.sigma, length, n_bins)
        else:
            half = chirp_half_width(
                model, self.sigma, length, n_bins, self.literal_chirp_rate
            )
        return np.floor(center - half), np.ceil(center + half)

    def mean_distance(self, model: RidgeModel) -> np.ndarray:
        """Mean |k - curve(n/L)| over each group's points."""
        distance = np.abs(self.point_k - model.bins(self.slc.length)[self.point_n])
        totals = np.bincount(
            self.group_of, weights=distance, minlength=len(self.groups)
        )
        return totals / np.maximum(self.sizes, 1)

    # greedy steps

    def absorb(
        self,
        members: list[tuple[int, ...]],
        models: list[RidgeModel],
        kind: RegionKind,
    ) -> tuple[list[tuple[int, ...]], list[RidgeModel]]:
        """Add unused groups hit by a mode region, refit, until stable."""
        members, models = list(members), list(models)
        for _ in range(len(self.groups) + 1):
            used = np.zeros(len(self.groups), dtype=bool)
            for group_ids in members:
                used[list(group_ids)] = True
            if used.all():
                break
            free_point = ~used[self.group_of]
            hits = np.zeros((len(models), len(self.groups)), dtype=bool)
            for p, model in enumerate(models):
                lo, hi = self.region(model, kind)
                inside = (
                    free_point
                    & (self.point_k >= lo[self.point_n])
                    & (self.point_k <= hi[self.point_n])
                )
                counts = np.bincount(
                    self.group_of[inside], minlength=len(self.groups)
                )
                hits[p] = counts > 0
            hit_groups = np.flatnonzero(hits.any(axis=0))
            if hit_groups.size == 0:
                break
            distances = np.stack([self.mean_distance(model) for model in models])
            distances = np.where(hits, distances, np.inf)
            owner = np.argmin(distances[:, hit_groups], axis=0)
            changed = set()
            for group, p in zip(hit_groups.tolist(), owner.tolist(), strict=True):
                members[p] = (*members[p], group)
                changed.add(p)
            for p in changed:
                models[p] = self.fit_mode(members[p])
        return members, models

    def snapshot(
        self,
        members: list[tuple[int, ...]],
        models: list[RidgeModel],
        energy: float,
    ) -> None:
        self.history.append(
            FitState(
                members=tuple(tuple(sorted(m)) for m in members),
                models=tuple(models),
                energy=energy,
            )
        )

    def candidate_subset(self, q: int, modes: int, cover: np.ndarray) -> list[int]:
        """
        q plus the P-1 lowest-index other groups sharing a time with it.

        When no time index is shared by that many other groups, q is tried
        alone against its nearest mode.
        """
        if modes == 1:
            return [q]
        times = self.groups[q].times
        counts = cover[:, times].sum(axis=0) - cover[q, times]
        shared = np.flatnonzero(counts >= modes - 1)
        if shared.size == 0:
            return [q]
        n = times[shared[0]]
        partners = [g for g in np.flatnonzero(cover[:, n]).tolist() if g != q]
        return [*partners[: modes - 1], q]

    def assign(
        self,
        subset: list[int],
        members: list[tuple[int, ...]],
        models: list[RidgeModel],
    ) -> list[int] | None:
        """Mode of each subset group, by least total mean distance."""
        current = {g: p for p, group_ids in enumerate(members) for g in group_ids}
        distances = np.stack([self.mean_distance(model)[subset] for model in models])
        best: tuple[float, tuple[int, ...]] | None = None
        for perm in itertools.permutations(range(len(models)), len(subset)):
            pairs = zip(subset, perm, strict=True)
            if any(g in current and current[g] != p for g, p in pairs):
                continue
            cost = float(sum(distances[p, i] for i, p in enumerate(perm)))
            if best is None or cost < best[0]:
                best = (cost, perm)
        return None if best is None else list(best[1])

    def scan(
        self,
        members: list[tuple[int, ...]],
        models: list[RidgeModel],
        energy: float,
        kind: RegionKind,
        cover: np.ndarray,
    ) -> tuple[list[tuple[int, ...]], list[RidgeModel], float]:
        modes = len(models)
        for q in range(len(self.groups)):
            if any(q in group_ids for group_ids in members):
                continue
            subset = self.candidate_subset(q, modes, cover)
            assignment = self.assign(subset, members, models)
            if assignment is None:
                continue
            trial_members = list(members)
            changed = set()
            for group, p in zip(subset, assignment, strict=True):
                if group not in trial_members[p]:
                    trial_members[p] = (*trial_members[p], group)
                    changed.add(p)
            trial_models = [
                self.fit_mode(trial_members[p]) if p in changed else models[p]
                for p in range(modes)
            ]
            trial_members, trial_models = self.absorb(trial_members, trial_models, kind)
            trial_energy = self.energy(trial_models)
            if trial_energy > energy:
                members, models, energy = trial_members, trial_models, trial_energy
                self.snapshot(members, models, energy)
                logger.debug(
                    "Ridge extension accepted", group=q, energy=energy, region=kind
                )
        return members, models, energy

    def run(self, modes: int) -> tuple[list[RidgeModel], float, bool, bool]:
        """Execute the full greedy assembly; returns (models, E, complete, disjoint)."""
        cover = np.zeros((len(self.groups), self.slc.length), dtype=bool)
        cover[self.group_of, self.point_n] = True

        seeds, _ = initial_groups(cover, modes)
        complete = len(seeds) == modes
        if not complete:
            logger.warning(
                "Fewer ridge groups share a time index than requested modes",
                requested=modes,
                found=len(seeds),
            )
        n_star = int(np.flatnonzero(cover[seeds].all(axis=0))[0])
        seeds = sorted(seeds, key=lambda g: (self.groups[g].bin_at(n_star) or 0, g))

        members: list[tuple[int, ...]] = [(g,) for g in seeds]
        models = [self.fit_mode(m) for m in members]
        members, models = self.absorb(members, models, "harmonic")
        energy = self.energy(models)
        self.snapshot(members, models, energy)

        members, models, energy = self.scan(
            members, models, energy, "harmonic", cover
        )

        post_members, post_models = self.absorb(members, models, "chirp")
        post_energy = self.energy(post_models)
        if post_energy > energy:
            members, models, energy = post_members, post_models, post_energy
            self.snapshot(members, models, energy)
        members, models, energy = self.scan(members, models, energy, "chirp", cover)

        disjoint = curves_disjoint(models, self.slc.length)
        if not disjoint:
            fallback = [
                s for s in self.history if curves_disjoint(s.models, self.slc.length)
            ]
            if fallback:
                best = max(fallback, key=lambda s: s.energy)
                logger.info(
                    "Final ridges intersect, using best non-intersecting state",
                    final_energy=energy,
                    fallback_energy=best.energy,
                )
                models, energy, disjoint = list(best.models), best.energy, True
            else:
                logger.warning("Every accepted ridge state intersects")
                complete = False
        return models, energy, complete, disjoint


def initial_groups(cover: np.ndarray, modes: int) -> tuple[list[int], int]:
    """
    First q0 such that `modes` groups among 0..q0 share a time index.

    Returns the sharing groups (lowest indices) and q0. When no time is
    shared by that many groups, the largest achievable count is used.
    """
    counts = np.zeros(cover.shape[1], dtype=np.int64)
    best_count, best_q = 0, 0
    for q in range(cover.shape[0]):
        counts += cover[q]
        top = int(counts.max())
        if top > best_count:
            best_count, best_q = top, q
        if top >= modes:
            break
    target = min(best_count, modes)
    seen = cover[: best_q + 1].sum(axis=0)
    n_star = int(np.flatnonzero(seen >= target)[0])
    seeds = np.flatnonzero(cover[: best_q + 1, n_star])[:target]
    return seeds.tolist(), best_q


def curves_disjoint(models: Sequence[RidgeModel], length: int) -> bool:
    """True when curve_p < curve_{p+1} at every grid time."""
    if len(models) < 2:
        return True
    curves = np.stack([model.bins(length) for model in models])
    return bool(np.all(np.diff(curves, axis=0) > 0))


def chirp_half_width(
    model: RidgeModel,
    sigma: float,
    length: int,
    n_bins: int,
    literal_chirp_rate: bool = False,
    factor: float = 3.0,
) -> np.ndarray:
    """factor·std_LC·N/L in bins along a model, std from the curve's chirp rate."""
    if literal_chirp_rate:
        rate = model.slope(length)
    else:
        rate = model.chirp_rate_hz(length, n_bins)
    return factor * local_std_hz(rate, sigma) * n_bins / length


def _check_groups(groups: Sequence[RidgeGroup]) -> None:
    if not groups:
        raise DetectionError("No ridge groups to fit")


def fit_polynomial_ridges(
    groups: Sequence[RidgeGroup],
    slc: SlcGrid,
    modes: int,
    degree: int,
    sigma: float,
    literal_chirp_rate: bool = False,
) -> RidgeFit:
    """
    Fit P polynomial ridges of degree d to groups sorted by decreasing R.

    Raises:
        ConfigError: on d < 1 or P < 1
        DetectionError: when there is no group at all
    """
    if degree < 1:
        raise ConfigError(f"Polynomial degree must be at least 1, got {degree}")
    if modes < 1:
        raise ConfigError(f"Number of modes must be at least 1, got {modes}")
    _check_groups(groups)
    engine = GreedyRidgeFit(
        groups,
        slc,
        polynomial_fitter(degree, slc.length),
        sigma,
        "polynomial",
        literal_chirp_rate,
    )
    models, energy, complete, disjoint = engine.run(modes)
    bands = ridge_bands(models, sigma, slc.length, slc.n_bins, literal_chirp_rate)
    return RidgeFit(
        models=models,
        bands=bands,
        energy=energy,
        complete=complete,
        non_intersecting=disjoint,
        history=engine.history,
    )


def fit_spline_ridge(
    groups: Sequence[RidgeGroup],
    slc: SlcGrid,
    tol_bins: float,
    sigma: float,
    literal_chirp_rate: bool = False,
) -> RidgeFit:
    """Single-mode variant with a tolerance-constrained cubic smoothing spline."""
    if tol_bins <= 0:
        raise ConfigError(f"Spline tolerance must be positive, got {tol_bins}")
    _check_groups(groups)
    engine = GreedyRidgeFit(
        groups,
        slc,
        spline_fitter(tol_bins, slc.length),
        sigma,
        "spline",
        literal_chirp_rate,
    )
    models, energy, complete, disjoint = engine.run(1)
    bands = ridge_bands(models, sigma, slc.length, slc.n_bins, literal_chirp_rate)
    return RidgeFit(
        models=models,
        bands=bands,
        energy=energy,
        complete=complete,
        non_intersecting=disjoint,
        history=engine.history,
    )


def ridge_bands(
    models: Sequence[RidgeModel],
    sigma: float,
    length: int,
    n_bins: int,
    literal_chirp_rate: bool = False,
) -> BandSet:
    """
    F∓[n] = ⌊curve ∓ 3·std_LC·N/L⌋ / ⌈...⌉, clipped, overlaps split.

    std_LC uses the curve's chirp rate in Hz per unit time; with
    ``literal_chirp_rate`` the derivative in bins per unit time is used as is.
    """
    if not models:
        return BandSet(
            lower=np.empty((0, length), dtype=np.int64),
            upper=np.empty((0, length), dtype=np.int64),
        )
    centers = np.stack([model.bins(length) for model in models])
    half = np.stack(
        [chirp_half_width(m, sigma, length, n_bins, literal_chirp_rate) for m in models]
    )
    lower = np.clip(np.floor(centers - half), 0, n_bins - 1).astype(np.int64)
    upper = np.clip(np.ceil(centers + half), 0, n_bins - 1).astype(np.int64)
    lower, upper = split_overlaps(lower, upper, centers)
    return BandSet(lower=lower, upper=upper)


def split_overlaps(
    lower: np.ndarray, upper: np.ndarray, centers: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Make adjacent bands disjoint at every time.

    Modes are ordered by center at each time; where band p reaches band p+1
    the boundary moves to mid = ⌊(F⁺_p + F⁻_{p+1})/2⌋, giving F⁺_p = mid and
    F⁻_{p+1} = mid + 1.
    """
    lower, upper = lower.copy(), upper.copy()
    if lower.shape[0] < 2:
        return lower, upper
    columns = np.arange(lower.shape[1])
    order = np.argsort(centers, axis=0, kind="stable")
    for rank in range(lower.shape[0] - 1):
        a, b = order[rank], order[rank + 1]
        up_a = upper[a, columns]
        low_b = lower[b, columns]
        clash = up_a >= low_b
        mid = (up_a + low_b) // 2
        upper[a[clash], columns[clash]] = mid[clash]
        lower[b[clash], columns[clash]] = mid[clash] + 1
    return lower, upper


def models_frame(
    models: Sequence[RidgeModel],
    bands: BandSet,
    length: int,
    n_bins: int,
) -> pd.DataFrame:
    """Columns mode, n, curve_bins, curve_hz, chirp_rate_hz_per_s, F_minus, F_plus."""
    frames = [
        pd.DataFrame(
            {
                "mode": p,
                "n": np.arange(length),
                "curve_bins": model.bins(length),
                "curve_hz": model.frequency_hz(length, n_bins),
                "chirp_rate_hz_per_s": model.chirp_rate_hz(length, n_bins),
                "F_minus": bands.lower[p],
                "F_plus": bands.upper[p],
            }
        )
        for p, model in enumerate(models)
    ]
    if not frames:
        return pd.DataFrame(
            columns=[
                "mode",
                "n",
                "curve_bins",
                "curve_hz",
                "chirp_rate_hz_per_s",
                "F_minus",
                "F_plus",
            ]
        )
    return pd.concat(frames, ignore_index=True)


def describe_models(models: Sequence[RidgeModel]) -> str:
    """Text block with one [mode.p] section per model."""
    sections = [f"[mode.{p}]\n{model.describe()}" for p, model in enumerate(models)]
    return "\n\n".join(sections) + "\n"
