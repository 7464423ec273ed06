"""
Synthetic multicomponent signals, noise injection and SNR measurement.

Time is normalized: sample n of a length-L signal sits at t = n/L, so
frequencies are expressed in cycles per unit normalized time ("Hz") and the
representable band is [0, L).
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from rrpridge.core.errors import SignalError

TimeFunction = Callable[[np.ndarray], np.ndarray]

# Noise generator family, fixed so that bench CSVs compare across platforms.
NOISE_BIT_GENERATOR = "PCG64"


@dataclass(frozen=True)
class Signal:
    """Complex discrete-time series; sample n represents time n/L."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size < 2:
            raise SignalError("A signal needs at least two samples")
        if not np.all(np.isfinite(samples)):
            raise SignalError("Signal samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def length(self) -> int:
        return int(self.samples.size)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.length) / self.length

    def norm(self) -> float:
        return float(np.linalg.norm(self.samples))

    def __add__(self, other: "Signal") -> "Signal":
        if other.length != self.length:
            raise SignalError("Cannot add signals of different lengths")
        return Signal(self.samples + other.samples)


@dataclass(frozen=True)
class ModeSpec:
    """
    One AM-FM mode A(t)·exp(2iπ φ(t)).

    The instantaneous frequency φ′ and chirp rate φ″ are carried next to the
    phase so that detectors can be scored against the analytic truth.
    """

    amplitude: TimeFunction
    phase: TimeFunction
    inst_freq: TimeFunction
    chirp_rate: TimeFunction
    name: str = "mode"
    params: dict[str, float] = field(default_factory=dict)

    def sample(self, length: int) -> np.ndarray:
        t = np.arange(length) / length
        return np.broadcast_to(self.amplitude(t), t.shape) * np.exp(
            2j * np.pi * self.phase(t)
        )

    def sampled_if(self, length: int) -> np.ndarray:
        t = np.arange(length) / length
        return np.broadcast_to(self.inst_freq(t), t.shape).astype(float)


def _constant(value: float) -> TimeFunction:
    return lambda t: np.full_like(np.asarray(t, dtype=float), value)


def tone(frequency: float, amplitude: float = 1.0) -> ModeSpec:
    """Pure harmonic mode with constant frequency."""
    return ModeSpec(
        amplitude=_constant(amplitude),
        phase=lambda t: frequency * t,
        inst_freq=_constant(frequency),
        chirp_rate=_constant(0.0),
        name="tone",
        params={"frequency": frequency, "amplitude": amplitude},
    )


def linear_chirp(start: float, rate: float, amplitude: float = 1.0) -> ModeSpec:
    """Linear chirp with IF start + rate·t."""
    return ModeSpec(
        amplitude=_constant(amplitude),
        phase=lambda t: start * t + 0.5 * rate * t**2,
        inst_freq=lambda t: start + rate * t,
        chirp_rate=_constant(rate),
        name="linear",
        params={"start": start, "rate": rate, "amplitude": amplitude},
    )


def cosine_mode(
    center: float, depth: float, cycles: float, amplitude: float = 1.0
) -> ModeSpec:
    """Mode with IF center + depth·cos(2π·cycles·t)."""
    omega = 2 * np.pi * cycles
    return ModeSpec(
        amplitude=_constant(amplitude),
        phase=lambda t: center * t + depth / omega * np.sin(omega * t),
        inst_freq=lambda t: center + depth * np.cos(omega * t),
        chirp_rate=lambda t: -depth * omega * np.sin(omega * t),
        name="cosine",
        params={
            "center": center,
            "depth": depth,
            "cycles": cycles,
            "amplitude": amplitude,
        },
    )


def exponential_chirp(start: float, base: float, amplitude: float = 1.0) -> ModeSpec:
    """Mode with IF start·base**t (base > 0, base != 1)."""
    if base <= 0 or base == 1:
        raise SignalError("Exponential chirp base must be positive and != 1")
    log_base = math.log(base)
    return ModeSpec(
        amplitude=_constant(amplitude),
        phase=lambda t: start * (np.power(base, t) - 1.0) / log_base,
        inst_freq=lambda t: start * np.power(base, t),
        chirp_rate=lambda t: start * log_base * np.power(base, t),
        name="exponential",
        params={"start": start, "base": base, "amplitude": amplitude},
    )


def check_separation(
    modes: Sequence[ModeSpec], length: int, delta: float = 0.0
) -> None:
    """
    Validate that sampled IFs stay in [0, L) and are ordered and separated.

    Raises:
        SignalError: if an IF leaves the band or two IFs cross (or come within
            2·delta of each other)
    """
    previous: np.ndarray | None = None
    for index, mode in enumerate(modes):
        freq = mode.sampled_if(length)
        if np.any(freq < 0) or np.any(freq >= length):
            raise SignalError(
                f"Mode {index} ({mode.name}) leaves the representable band "
                f"[0, {length})"
            )
        if previous is not None and np.any(freq - previous <= 2 * delta):
            raise SignalError(
                f"Modes {index - 1} and {index} cross or are closer than 2*delta"
            )
        previous = freq


def synthesize(modes: Sequence[ModeSpec], length: int) -> Signal:
    """
    Sum the sampled modes: samples[n] = Σ_p A_p[n]·exp(2iπ φ_p[n]).

    An empty mode list gives the all-zero signal.
    """
    if length < 2:
        raise SignalError("Signal length must be at least 2")
    check_separation(modes, length)
    samples = np.zeros(length, dtype=np.complex128)
    for mode in modes:
        amplitude = np.broadcast_to(mode.amplitude(np.arange(length) / length), length)
        if np.any(amplitude <= 0):
            raise SignalError(f"Mode {mode.name} has a non-positive amplitude")
        samples += mode.sample(length)
    return Signal(samples)


def add_noise(clean: Signal, target_snr_db: float, seed: int) -> Signal:
    """
    Add circular complex Gaussian noise at the prescribed input SNR.

    The noise is rescaled from its own sample norm so that the measured SNR
    equals the target up to floating point; +inf returns the clean signal.
    """
    reference = clean.norm()
    if reference == 0:
        raise SignalError("Cannot set an SNR on an all-zero signal")
    if math.isinf(target_snr_db) and target_snr_db > 0:
        return clean
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal(clean.length) + 1j * rng.standard_normal(clean.length)
    noise *= reference / (np.linalg.norm(noise) * 10 ** (target_snr_db / 20))
    return Signal(clean.samples + noise)


def snr_db(reference: Signal | np.ndarray, estimate: Signal | np.ndarray) -> float:
    """
    20·log10(‖reference‖₂ / ‖estimate − reference‖₂).

    A perfect estimate returns +inf.
    """
    ref = reference.samples if isinstance(reference, Signal) else np.asarray(reference)
    est = estimate.samples if isinstance(estimate, Signal) else np.asarray(estimate)
    if ref.shape != est.shape:
        raise SignalError(f"Length mismatch: {ref.shape} vs {est.shape}")
    ref_norm = float(np.linalg.norm(ref))
    if ref_norm == 0:
        raise SignalError("SNR is undefined for a zero reference")
    err_norm = float(np.linalg.norm(est - ref))
    if err_norm == 0:
        return math.inf
    return 20 * math.log10(ref_norm / err_norm)


PRESETS: dict[str, Callable[..., list[ModeSpec]]] = {
    "tone": lambda frequency=1024.0: [tone(frequency)],
    "two_tones": lambda low=800.0, high=2400.0: [tone(low), tone(high)],
    "linear": lambda start=800.0, rate=1200.0: [linear_chirp(start, rate)],
    "cosine": lambda center=1500.0, depth=300.0, cycles=2.0: [
        cosine_mode(center, depth, cycles)
    ],
    "exponential": lambda start=600.0, base=4.0: [exponential_chirp(start, base)],
    "two_linear": lambda start1=500.0, rate1=1000.0, start2=1300.0, rate2=1500.0: [
        linear_chirp(start1, rate1),
        linear_chirp(start2, rate2),
    ],
    "two_cosine": lambda center1=1000.0,
    depth1=300.0,
    cycles1=2.0,
    center2=2500.0,
    depth2=150.0,
    cycles2=1.0: [
        cosine_mode(center1, depth1, cycles1),
        cosine_mode(center2, depth2, cycles2),
    ],
    "linear_exponential": lambda start=500.0, rate=800.0, exp_start=1200.0, base=2.5: [
        linear_chirp(start, rate),
        exponential_chirp(exp_start, base),
    ],
}


def preset_modes(name: str, **params: float) -> list[ModeSpec]:
    """
    Build the modes of a named preset.

    Parameter defaults are plausible reconstructions of the demonstration
    signals at L = 4096, not published values.
    """
    try:
        factory = PRESETS[name]
    except KeyError as e:
        raise SignalError(
            f"Unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from e
    return factory(**params)
