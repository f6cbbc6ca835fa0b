"""Simulated ISM-band observations: noise sources, rectangular signals, ground truth.

Observations are signal-plus-noise in the spectral domain, the signal being a
rectangular function over a contiguous bin range inside one of the equal
subbands.  Powers are carried in mW throughout; signal amplitudes are
quoted in mV with the sqrt-mW identification A_mw = (A_mv / sqrt(1000))^2, which
reproduces the reference amplitudes (63.2 mV at 0 dB for a quarter-band signal
over 1 mW noise).

Noise can be synthetic white Gaussian, a synthetic "industrial" surrogate
(white base plus sparse impulses plus a first-order spectral tilt; this stands
in for real captures, which are not distributed), or a raw IQ trace file of
interleaved little-endian float32 (I, Q) pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InsufficientSamplesError, TraceFormatError, ZeroPowerError
from .spectral import ComplexSeries, ResourceBlock, SpectralFrame, frame_signal

NOISE_KINDS = ("white-gaussian", "surrogate-industrial", "trace-file")

_MV_PER_SQRT_MW = np.sqrt(1000.0)  # 1 sqrt(mW) = sqrt(0.001) V = 31.62... mV


def _rng(seed: int) -> np.random.Generator:
    # Philox: counter-based, splittable, deterministic per 64-bit seed.
    return np.random.Generator(np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))


@dataclass(frozen=True)
class SurrogateNoiseParams:
    """Shape parameters of the synthetic industrial noise surrogate."""

    impulse_rate: float = 1e-3
    impulse_amplitude_factor: float = 10.0
    spectral_tilt_db_per_decade: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.impulse_rate < 1.0:
            raise ValueError("impulse_rate must lie in [0, 1)")
        if self.impulse_amplitude_factor < 0:
            raise ValueError("impulse_amplitude_factor must be non-negative")
        if not np.isfinite(self.spectral_tilt_db_per_decade):
            raise ValueError("spectral_tilt_db_per_decade must be finite")


@dataclass(frozen=True)
class NoiseSource:
    """Selects exactly one noise origin: synthetic kind, or a trace file."""

    kind: str = "white-gaussian"
    seed: int = 0
    path: str | None = None
    params: SurrogateNoiseParams = field(default_factory=SurrogateNoiseParams)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.kind == "trace-file" and not self.path:
            raise ValueError("trace-file noise requires a path")
        if self.kind != "trace-file" and self.path is not None:
            raise ValueError(f"{self.kind} noise must not carry a path")


@dataclass(frozen=True)
class SubbandSignal:
    """A rectangular-spectrum transmission inside one subband.

    Exactly one of amplitude_mv / target_snr_db is given; a target SNR is
    translated into an amplitude at scenario build time via
    :func:`amplitude_for_snr` using the signal's own whole-band occupancy.
    frame_end is exclusive; None means "until the last frame".
    """

    subband_index: int
    occupancy_fraction: float
    amplitude_mv: float | None = None
    target_snr_db: float | None = None
    frame_start: int = 0
    frame_end: int | None = None

    def __post_init__(self):
        if self.subband_index < 0:
            raise ValueError("subband_index must be non-negative")
        if not 0.0 < self.occupancy_fraction <= 1.0:
            raise ValueError("occupancy_fraction must lie in (0, 1]")
        if (self.amplitude_mv is None) == (self.target_snr_db is None):
            raise ValueError("give exactly one of amplitude_mv or target_snr_db")
        if self.amplitude_mv is not None and not (
            self.amplitude_mv >= 0 and np.isfinite(self.amplitude_mv)
        ):
            raise ValueError("amplitude_mv must be finite and non-negative")
        if self.frame_start < 0:
            raise ValueError("frame_start must be non-negative")

    def occupied_bins(self, n_bins: int, subband_count: int) -> tuple[int, int]:
        """Bin range [lo, hi) of this signal, centered inside its subband."""
        if n_bins % subband_count != 0:
            raise ValueError("n_bins must be divisible by subband_count")
        sub_width = n_bins // subband_count
        if self.subband_index >= subband_count:
            raise ValueError(
                f"subband_index {self.subband_index} out of range for {subband_count} subbands"
            )
        width = max(1, int(round(self.occupancy_fraction * sub_width)))
        lo = self.subband_index * sub_width + (sub_width - width) // 2
        return lo, lo + width

    def active_in(self, frame: int, n_frames: int) -> bool:
        end = n_frames if self.frame_end is None else self.frame_end
        return self.frame_start <= frame < end


@dataclass(frozen=True)
class SnrStep:
    """One entry of an SNR schedule: frames [frame_start, frame_end) at target dB."""

    frame_start: int
    frame_end: int
    target_snr_db: float

    def __post_init__(self):
        if not 0 <= self.frame_start < self.frame_end:
            raise ValueError("need 0 <= frame_start < frame_end")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one simulated transmission."""

    n_bins: int
    n_frames: int
    sample_rate_hz: float = 10e6
    noise: NoiseSource = field(default_factory=NoiseSource)
    reference_noise_power_mw: float = 1.0
    subband_count: int = 4
    signals: tuple[SubbandSignal, ...] = ()
    snr_schedule: tuple[SnrStep, ...] = ()
    name: str = "scenario"

    def __post_init__(self):
        if self.n_bins < 2 or self.n_frames < 1:
            raise ValueError("need n_bins >= 2 and n_frames >= 1")
        if self.reference_noise_power_mw <= 0:
            raise ValueError("reference_noise_power_mw must be positive")
        if self.subband_count < 1 or self.n_bins % self.subband_count != 0:
            raise ValueError("subbands must partition the bins into equal contiguous ranges")
        object.__setattr__(self, "signals", tuple(self.signals))
        object.__setattr__(self, "snr_schedule", tuple(self.snr_schedule))
        for sig in self.signals:
            sig.occupied_bins(self.n_bins, self.subband_count)  # validates placement


@dataclass(frozen=True)
class GroundTruth:
    """Per-frame reference noise power, analytic SNR and true signal mask."""

    noise_power_mw: np.ndarray        # (M,)
    true_snr_db: np.ndarray           # (M,), -inf where no signal
    signal_bin_mask: np.ndarray       # (M, N) bool

    def __post_init__(self):
        power = np.asarray(self.noise_power_mw, dtype=np.float64).copy()
        snr = np.asarray(self.true_snr_db, dtype=np.float64).copy()
        mask = np.asarray(self.signal_bin_mask, dtype=bool).copy()
        if mask.ndim != 2 or power.shape != (mask.shape[0],) or snr.shape != (mask.shape[0],):
            raise ValueError("ground truth arrays have inconsistent shapes")
        for arr in (power, snr, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "noise_power_mw", power)
        object.__setattr__(self, "true_snr_db", snr)
        object.__setattr__(self, "signal_bin_mask", mask)

    @property
    def n_frames(self) -> int:
        return self.signal_bin_mask.shape[0]

    def occupied_fraction(self, frame: int) -> float:
        return float(self.signal_bin_mask[frame].mean())


def load_iq_trace(path: str | Path, sample_rate_hz: float = 10e6) -> ComplexSeries:
    """Read interleaved little-endian float32 (I, Q) pairs in capture order."""
    raw = Path(path).read_bytes()
    if len(raw) % 8 != 0:
        raise TraceFormatError(
            f"{path}: length {len(raw)} bytes is not a whole number of float32 I/Q pairs"
        )
    floats = np.frombuffer(raw, dtype="<f4")
    finite = np.isfinite(floats)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0]) // 2
        raise TraceFormatError(f"{path}: non-finite value at sample {idx}")
    samples = floats[0::2].astype(np.float64) + 1j * floats[1::2].astype(np.float64)
    return ComplexSeries(samples=samples, sample_rate_hz=sample_rate_hz)


def write_iq_trace(path: str | Path, series: ComplexSeries) -> None:
    """Write a series in the raw float32 interleaved I/Q format."""
    out = np.empty(2 * len(series), dtype="<f4")
    out[0::2] = series.samples.real.astype(np.float32)
    out[1::2] = series.samples.imag.astype(np.float32)
    Path(path).write_bytes(out.tobytes())


def rescale_to_power(series: ComplexSeries, target_mw: float) -> ComplexSeries:
    """Scale by a single real factor so the mean of |s|^2 equals target_mw."""
    if target_mw <= 0:
        raise ValueError("target power must be positive")
    current = series.mean_power()
    if current == 0.0:
        raise ZeroPowerError("cannot rescale an all-zero series")
    factor = np.sqrt(target_mw / current)
    return ComplexSeries(samples=series.samples * factor, sample_rate_hz=series.sample_rate_hz)


def synth_white_noise(length: int, power_mw: float, seed: int,
                      sample_rate_hz: float = 10e6) -> ComplexSeries:
    """Circularly-symmetric complex Gaussian noise with E|w|^2 = power_mw."""
    if length < 1:
        raise ValueError("length must be >= 1")
    if power_mw <= 0:
        raise ValueError("power_mw must be positive")
    rng = _rng(seed)
    scale = np.sqrt(power_mw / 2.0)
    samples = scale * (rng.standard_normal(length) + 1j * rng.standard_normal(length))
    return ComplexSeries(samples=samples, sample_rate_hz=sample_rate_hz)


def synth_industrial_noise(length: int, params: SurrogateNoiseParams, power_mw: float,
                           seed: int, sample_rate_hz: float = 10e6) -> ComplexSeries:
    """Synthetic industrial-environment surrogate: impulsive, spectrally tilted noise.

    White Gaussian base, plus Bernoulli impulses of magnitude
    impulse_amplitude_factor times the base RMS at uniformly random phase,
    plus a first-order recursive tilt filter; the result is rescaled to
    power_mw exactly.  With impulse_rate 0 and tilt 0 the output is plain
    white Gaussian noise.  This is a stand-in for real captures and carries
    no claim of matching any measured environment.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = _rng(seed)
    base = (rng.standard_normal(length) + 1j * rng.standard_normal(length)) / np.sqrt(2.0)
    hits = rng.random(length) < params.impulse_rate
    n_hits = int(hits.sum())
    if n_hits:
        phases = np.exp(2j * np.pi * rng.random(n_hits))
        base[hits] += params.impulse_amplitude_factor * phases
    tilt = params.spectral_tilt_db_per_decade
    if tilt != 0.0:
        # One-pole recursion; |tilt|/20 maps one 20 dB/decade pole to rho = 1.
        rho = min(abs(tilt) / 20.0, 0.95)
        if tilt < 0:
            base = _one_pole_lowpass(base, rho)
        else:
            base = np.concatenate([[base[0]], base[1:] - rho * base[:-1]])
    series = ComplexSeries(samples=base, sample_rate_hz=sample_rate_hz)
    return rescale_to_power(series, power_mw)


def _one_pole_lowpass(x: np.ndarray, rho: float) -> np.ndarray:
    from scipy.signal import lfilter

    return lfilter([1.0], [1.0, -rho], x)


def amplitude_for_snr(target_snr_db: float, noise_power_mw: float,
                      occupied_fraction: float) -> float:
    """Rect amplitude (mV) so that A^2 * fraction equals noise * 10^(SNR/10) in mW."""
    if not 0.0 < occupied_fraction <= 1.0:
        raise ValueError("occupied_fraction must lie in (0, 1]")
    if noise_power_mw <= 0:
        raise ValueError("noise_power_mw must be positive")
    a_sqrt_mw = np.sqrt(noise_power_mw * 10.0 ** (target_snr_db / 10.0) / occupied_fraction)
    return float(a_sqrt_mw * _MV_PER_SQRT_MW)


def amplitude_mv_to_sqrt_mw(amplitude_mv: float) -> float:
    return amplitude_mv / _MV_PER_SQRT_MW


def inject_rect_signal(frame: SpectralFrame, signal: SubbandSignal,
                       subband_count: int = 4,
                       reference_noise_power_mw: float = 1.0) -> SpectralFrame:
    """Add a rectangular spectral signal to one frame.

    The per-bin spectral offset is A * sqrt(N) (A in sqrt-mW), which makes the
    whole-band mean-power contribution exactly A^2 * width / N in the
    |X|^2/N power convention.  Bins outside the band are untouched.
    """
    n = frame.n_bins
    lo, hi = signal.occupied_bins(n, subband_count)
    if not (0 <= lo < hi <= n):
        raise ValueError(f"band [{lo}, {hi}) outside the frame's {n} bins")
    amplitude_mv = signal.amplitude_mv
    if amplitude_mv is None:
        amplitude_mv = amplitude_for_snr(
            signal.target_snr_db, reference_noise_power_mw, (hi - lo) / n
        )
    offset = amplitude_mv_to_sqrt_mw(amplitude_mv) * np.sqrt(n)
    bins = frame.bins.copy()
    bins[lo:hi] += offset
    return SpectralFrame(bins=bins, frame_index=frame.frame_index)


def _noise_series(config: ScenarioConfig) -> ComplexSeries:
    total = config.n_bins * config.n_frames
    src = config.noise
    if src.kind == "white-gaussian":
        series = synth_white_noise(total, 1.0, src.seed, config.sample_rate_hz)
    elif src.kind == "surrogate-industrial":
        series = synth_industrial_noise(total, src.params, 1.0, src.seed, config.sample_rate_hz)
    else:
        series = load_iq_trace(src.path, config.sample_rate_hz)
        if len(series) < total:
            raise InsufficientSamplesError(
                f"trace {src.path} has {len(series)} samples, scenario needs {total}"
            )
    return rescale_to_power(series, config.reference_noise_power_mw)


def _frame_amplitudes(config: ScenarioConfig, frame: int) -> list[tuple[int, int, float]]:
    """Resolved (lo, hi, amplitude_sqrt_mw) for every signal active in ``frame``."""
    active = [s for s in config.signals if s.active_in(frame, config.n_frames)]
    if not active:
        return []
    step = next(
        (s for s in config.snr_schedule if s.frame_start <= frame < s.frame_end), None
    )
    out = []
    if step is not None:
        # A schedule step overrides amplitudes: every active signal gets the
        # amplitude that makes the combined occupancy hit the target SNR.
        combined = sum(
            (hi - lo) for lo, hi in
            (s.occupied_bins(config.n_bins, config.subband_count) for s in active)
        ) / config.n_bins
        a_mv = amplitude_for_snr(step.target_snr_db, config.reference_noise_power_mw, combined)
        for s in active:
            lo, hi = s.occupied_bins(config.n_bins, config.subband_count)
            out.append((lo, hi, amplitude_mv_to_sqrt_mw(a_mv)))
        return out
    for s in active:
        lo, hi = s.occupied_bins(config.n_bins, config.subband_count)
        a_mv = s.amplitude_mv
        if a_mv is None:
            a_mv = amplitude_for_snr(
                s.target_snr_db, config.reference_noise_power_mw, (hi - lo) / config.n_bins
            )
        out.append((lo, hi, amplitude_mv_to_sqrt_mw(a_mv)))
    return out


def build_scenario(config: ScenarioConfig) -> tuple[ResourceBlock, GroundTruth]:
    """Construct the noisy observation block and its analytic ground truth.

    The noise stream is rescaled so its mean power over all N*M samples equals
    the reference exactly; signals are added in the spectral domain, so the
    per-frame true SNR follows from the configured powers alone.
    """
    n, m = config.n_bins, config.n_frames
    noise = _noise_series(config)
    time_frames = frame_signal(noise, n, m)
    spectral = [np.fft.fft(fr) for fr in time_frames]

    mask = np.zeros((m, n), dtype=bool)
    snr_db = np.full(m, -np.inf)
    root_n = np.sqrt(n)
    for f in range(m):
        signal_power = 0.0
        for lo, hi, a_sqrt_mw in _frame_amplitudes(config, f):
            spectral[f][lo:hi] += a_sqrt_mw * root_n
            mask[f, lo:hi] = True
            signal_power += a_sqrt_mw**2 * (hi - lo) / n
        if signal_power > 0:
            snr_db[f] = 10.0 * np.log10(signal_power / config.reference_noise_power_mw)

    block = ResourceBlock(
        frames=tuple(SpectralFrame(bins=b, frame_index=i) for i, b in enumerate(spectral))
    )
    truth = GroundTruth(
        noise_power_mw=np.full(m, config.reference_noise_power_mw),
        true_snr_db=snr_db,
        signal_bin_mask=mask,
    )
    return block, truth


def time_series_of(block: ResourceBlock, sample_rate_hz: float) -> ComplexSeries:
    """Inverse-transform a block back to one contiguous time-domain stream."""
    parts = [np.fft.ifft(fr.bins) for fr in block.frames]
    return ComplexSeries(samples=np.concatenate(parts), sample_rate_hz=sample_rate_hz)


# --- configuration files ----------------------------------------------------

_TOP_KEYS = {
    "n_bins", "n_frames", "sample_rate_hz", "noise", "reference_noise_power_mw",
    "subband_count", "signals", "snr_schedule", "name",
}
_NOISE_KEYS = {"kind", "seed", "path", "params"}
_PARAM_KEYS = {"impulse_rate", "impulse_amplitude_factor", "spectral_tilt_db_per_decade"}
_SIGNAL_KEYS = {
    "subband_index", "occupancy_fraction", "amplitude_mv", "target_snr_db",
    "frame_start", "frame_end",
}
_SCHEDULE_KEYS = {"frame_start", "frame_end", "target_snr_db"}


def _check_keys(mapping: dict, allowed: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ValueError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def scenario_config_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from parsed structured text; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ValueError("scenario config must be a mapping")
    _check_keys(data, _TOP_KEYS, "scenario config")
    noise_data = dict(data.get("noise", {}))
    _check_keys(noise_data, _NOISE_KEYS, "noise")
    params_data = dict(noise_data.pop("params", {}))
    _check_keys(params_data, _PARAM_KEYS, "noise.params")
    noise = NoiseSource(params=SurrogateNoiseParams(**params_data), **noise_data)

    signals = []
    for i, sig in enumerate(data.get("signals", [])):
        _check_keys(dict(sig), _SIGNAL_KEYS, f"signals[{i}]")
        signals.append(SubbandSignal(**sig))
    schedule = []
    for i, step in enumerate(data.get("snr_schedule", [])):
        _check_keys(dict(step), _SCHEDULE_KEYS, f"snr_schedule[{i}]")
        schedule.append(SnrStep(**step))

    kwargs = {k: v for k, v in data.items() if k not in ("noise", "signals", "snr_schedule")}
    return ScenarioConfig(
        noise=noise, signals=tuple(signals), snr_schedule=tuple(schedule), **kwargs
    )


def scenario_config_from_file(path: str | Path) -> ScenarioConfig:
    """Load a JSON scenario config file."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_config_from_dict(data)


def with_seed(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    """Copy of the config with the noise seed replaced."""
    return replace(config, noise=replace(config.noise, seed=seed))
