"""Benchmark harness: frame-by-frame method evaluation, accuracy/stability metrics,
operation counting and CSV report emission.

Methods produce per-frame series.  ML is evaluated on every frame; the
windowed methods (MVU, AIC, CBE, MMSE) slide a trailing window of
``window_frames`` over the scenario, one step per frame, and report at the
window's last frame.  The SNR attached to each entry applies the excess-power
definition with the numerator measured on that frame's whole-band mean power.

Separation inputs follow each strategy's working regime: ideal and Fisher
masks are computed per frame, while the ROF mask is computed on the trailing
window's averaged periodogram (per-frame spectra fluctuate too much for the
erosion bandwidth search at low SNR).
"""

from __future__ import annotations

import concurrent.futures
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import estimators as est
from . import separation as sep
from .opcount import OpCounter, OpCounts
from .scenario import GroundTruth, ScenarioConfig, build_scenario, with_seed
from .spectral import PowerSpectrum, ResourceBlock, SpectralFrame, dft, power_spectrum

ESTIMATOR_NAMES = ("ML", "MVU", "AIC", "CBE", "MMSE")
SEPARATION_NAMES = ("none", "ideal", "fisher", "rof")
DEFAULT_WINDOW_FRAMES = 100


@dataclass(frozen=True)
class MethodSpec:
    """One benchmark entry: an estimator, its separation strategy, and overrides.

    Recognized params: window_frames, lambda1_pct, lambda2_fraction,
    occupied_fraction, occupancy_from ("truth" or "aic"), grid_size, blind.
    """

    estimator: str
    separation: str = "none"
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.estimator not in ESTIMATOR_NAMES:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.separation not in SEPARATION_NAMES:
            raise ValueError(f"unknown separation {self.separation!r}")
        if self.estimator in ("ML", "MVU") and self.separation == "none":
            raise ValueError(f"{self.estimator} requires a separation strategy")
        if self.estimator in ("AIC", "CBE", "MMSE") and self.separation != "none":
            raise ValueError(f"{self.estimator} performs its own separation")

    @property
    def label(self) -> str:
        if self.separation == "none":
            return self.estimator
        return f"{self.estimator}({self.separation})"


@dataclass(frozen=True)
class EstimateSeries:
    """Per-frame estimates and SNR mapping of one method on one seeded scenario."""

    scenario_id: str
    seed: int
    method: str
    separation: str
    frame_index: np.ndarray
    noise_power_est_mw: np.ndarray
    noise_power_true_mw: np.ndarray
    snr_est_db: np.ndarray
    snr_true_db: np.ndarray

    def __post_init__(self):
        size = self.frame_index.size
        for name in ("noise_power_est_mw", "noise_power_true_mw", "snr_est_db", "snr_true_db"):
            if getattr(self, name).size != size:
                raise ValueError("series arrays must share one length")

    def __len__(self) -> int:
        return self.frame_index.size


@dataclass(frozen=True)
class BenchmarkReport:
    """Aggregated accuracy/stability metrics and operation counts for one method."""

    scenario_id: str
    method: str
    separation: str
    seed_count: int
    rmse_db: float
    std_dev_db: float
    mean_bias_db: float
    ops: OpCounts
    wall_time_ms: float = 0.0


def rmse_db(series: EstimateSeries, truth: GroundTruth) -> float:
    """Root-mean-square SNR error over frames with finite true SNR."""
    true_db = truth.true_snr_db[series.frame_index]
    keep = np.isfinite(true_db)
    if not keep.any():
        raise ValueError("no frames with finite true SNR to compare against")
    err = series.snr_est_db[keep] - true_db[keep]
    return float(np.sqrt(np.mean(err**2)))


def mean_bias_db(series: EstimateSeries, truth: GroundTruth) -> float:
    """Mean signed SNR error over frames with finite true SNR."""
    true_db = truth.true_snr_db[series.frame_index]
    keep = np.isfinite(true_db)
    if not keep.any():
        raise ValueError("no frames with finite true SNR to compare against")
    return float(np.mean(series.snr_est_db[keep] - true_db[keep]))


def sample_std(values: np.ndarray) -> float:
    """Sample standard deviation (ddof=1) of a dB series."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise ValueError("need at least 2 entries")
    return float(np.std(values, ddof=1))


def std_dev_db(series: EstimateSeries) -> float:
    """Sample standard deviation of the estimated-SNR series about its own mean."""
    finite = series.snr_est_db[np.isfinite(series.snr_est_db)]
    return sample_std(finite)


class _MaskProvider:
    """Per-seed cache of separation masks over one scenario's power matrix."""

    def __init__(self, power: np.ndarray, truth: GroundTruth, params: dict[str, Any]):
        self.power = power
        self.truth = truth
        self.rof_params = sep.RofParams(
            lambda1_pct=params.get("lambda1_pct", 5.0),
            lambda2_fraction=params.get("lambda2_fraction", 0.05),
        )
        self._frame_cache: dict[tuple[str, int], sep.SeparationMask] = {}
        self._window_cache: dict[tuple[int, int], sep.SeparationMask] = {}

    def frame_mask(self, kind: str, frame: int) -> sep.SeparationMask:
        key = (kind, frame)
        if key not in self._frame_cache:
            if kind == "ideal":
                mask = sep.ideal_separate(self.truth, frame)
            elif kind == "fisher":
                mask = sep.fisher_separate(PowerSpectrum(self.power[frame], frame))
            else:
                raise ValueError(f"no per-frame mask for {kind!r}")
            self._frame_cache[key] = mask
        return self._frame_cache[key]

    def rof_window_mask(self, lo: int, hi: int) -> sep.SeparationMask:
        key = (lo, hi)
        if key not in self._window_cache:
            averaged = PowerSpectrum(self.power[lo:hi].mean(axis=0), hi - 1)
            self._window_cache[key] = sep.rof_separate(averaged, self.rof_params)
        return self._window_cache[key]

    def window_masks(self, kind: str, lo: int, hi: int) -> list[sep.SeparationMask]:
        if kind == "rof":
            return [self.rof_window_mask(lo, hi)] * (hi - lo)
        return [self.frame_mask(kind, f) for f in range(lo, hi)]


def _window_block(block: ResourceBlock, lo: int, hi: int) -> ResourceBlock:
    frames = tuple(
        SpectralFrame(bins=block.frames[f].bins, frame_index=f - lo) for f in range(lo, hi)
    )
    return ResourceBlock(frames=frames)


def _occupancy(method: MethodSpec, truth: GroundTruth, frame: int,
               window_pg: PowerSpectrum, window_len: int) -> float:
    explicit = method.params.get("occupied_fraction")
    if explicit is not None:
        return float(explicit)
    if method.params.get("occupancy_from") == "aic":
        n_min = est.aic_estimate(window_pg, window_len).diagnostics["n_min"]
        return n_min / window_pg.n_bins
    return truth.occupied_fraction(frame)


def _evaluate_method(method: MethodSpec, block: ResourceBlock, truth: GroundTruth,
                     power: np.ndarray, scenario_id: str, seed: int) -> EstimateSeries:
    n_frames, _ = power.shape
    window = int(method.params.get("window_frames", min(n_frames, DEFAULT_WINDOW_FRAMES)))
    window = max(1, min(window, n_frames))
    masks = _MaskProvider(power, truth, method.params)
    frame_mean = power.mean(axis=1)
    spectra = [PowerSpectrum(power[f], f) for f in range(n_frames)]

    frames: list[int] = []
    values: list[float] = []
    if method.estimator == "ML":
        for f in range(n_frames):
            if method.separation == "rof":
                mask = masks.rof_window_mask(max(0, f - window + 1), f + 1)
            else:
                mask = masks.frame_mask(method.separation, f)
            ml = est.ml_estimate(spectra[f], mask)
            frames.append(f)
            values.append(ml.value_mw)
    else:
        for f in range(window - 1, n_frames):
            lo, hi = f - window + 1, f + 1
            if method.estimator == "MVU":
                window_masks = masks.window_masks(method.separation, lo, hi)
                value = est.mvu_estimate(spectra[lo:hi], window_masks).value_mw
            elif method.estimator == "AIC":
                pg = PowerSpectrum(power[lo:hi].mean(axis=0), f)
                value = est.aic_estimate(pg, hi - lo).value_mw
            elif method.estimator == "CBE":
                pg = PowerSpectrum(power[lo:hi].mean(axis=0), f)
                fraction = _occupancy(method, truth, f, pg, hi - lo)
                value = est.cbe_estimate(
                    _window_block(block, lo, hi), fraction,
                    grid_size=int(method.params.get("grid_size", 100)),
                ).value_mw
            else:  # MMSE
                value = est.mmse_estimate(
                    _window_block(block, lo, hi), blind=bool(method.params.get("blind", True))
                ).value_mw
            frames.append(f)
            values.append(value)

    frames_arr = np.asarray(frames, dtype=np.int64)
    values_arr = np.asarray(values, dtype=np.float64)
    snr = np.array([
        est.snr_from_powers(frame_mean[f], v)[1] for f, v in zip(frames_arr, values_arr)
    ])
    return EstimateSeries(
        scenario_id=scenario_id, seed=seed,
        method=method.estimator, separation=method.separation,
        frame_index=frames_arr,
        noise_power_est_mw=values_arr,
        noise_power_true_mw=truth.noise_power_mw[frames_arr],
        snr_est_db=snr,
        snr_true_db=truth.true_snr_db[frames_arr],
    )


def _run_one_seed(config: ScenarioConfig, methods: list[MethodSpec],
                  seed: int) -> tuple[list[EstimateSeries], GroundTruth]:
    block, truth = build_scenario(with_seed(config, seed))
    power = np.stack([power_spectrum(fr).power for fr in block.frames])
    series = [
        _evaluate_method(m, block, truth, power, config.name, seed) for m in methods
    ]
    return series, truth


def run_scenario(config: ScenarioConfig, methods: list[MethodSpec], seeds: list[int],
                 max_workers: int | None = 1) -> list[EstimateSeries]:
    """Evaluate every method over every seeded realization of the scenario.

    Results are ordered by (seed, method) position regardless of worker
    count, so identical inputs produce identical output.
    """
    if not methods:
        raise ValueError("need at least one method")
    if not seeds:
        raise ValueError("need at least one seed")
    if max_workers is not None and max_workers <= 1:
        runs = [_run_one_seed(config, methods, s) for s in seeds]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_run_one_seed, config, methods, s) for s in seeds]
            runs = [f.result() for f in futures]
    out: list[EstimateSeries] = []
    for series, _ in runs:
        out.extend(series)
    return out


def ground_truths(config: ScenarioConfig, seeds: list[int]) -> dict[int, GroundTruth]:
    """Analytic ground truth per seed (cheap; noise realization is not needed)."""
    return {s: build_scenario(with_seed(config, s))[1] for s in seeds}


def _metric_or_nan(metric, *args) -> float:
    try:
        return metric(*args)
    except ValueError:
        return float("nan")


def build_reports(config: ScenarioConfig, methods: list[MethodSpec], seeds: list[int],
                  series: list[EstimateSeries],
                  wall_times_ms: dict[str, float] | None = None) -> list[BenchmarkReport]:
    """Per-method aggregation: seed-averaged RMSE/stability plus operation counts.

    wall_times_ms is opt-in; by default the column is written as 0.0 so that
    identical runs emit byte-identical reports.
    """
    truths = ground_truths(config, seeds)
    reports = []
    for method in methods:
        own = [s for s in series
               if s.method == method.estimator and s.separation == method.separation]
        if not own:
            continue
        rmses, stds, biases = [], [], []
        for s in own:
            truth = truths[s.seed]
            # Scenarios without signal have no finite true SNR; the SNR-error
            # metrics are undefined there and reported as NaN.
            rmses.append(_metric_or_nan(rmse_db, s, truth))
            biases.append(_metric_or_nan(mean_bias_db, s, truth))
            stds.append(_metric_or_nan(std_dev_db, s))
        counter = count_ops(method, config.n_bins)
        reports.append(BenchmarkReport(
            scenario_id=config.name,
            method=method.estimator,
            separation=method.separation,
            seed_count=len(own),
            rmse_db=float(np.mean(rmses)),
            std_dev_db=float(np.mean(stds)),
            mean_bias_db=float(np.mean(biases)),
            ops=counter.counts,
            wall_time_ms=(wall_times_ms or {}).get(method.label, 0.0),
        ))
    return reports


def run_benchmark(config: ScenarioConfig, methods: list[MethodSpec], seeds: list[int],
                  max_workers: int | None = 1,
                  timing: bool = False) -> tuple[list[EstimateSeries], list[BenchmarkReport]]:
    """Full pass: series for every (method, seed) plus aggregated reports."""
    wall: dict[str, float] = {}
    if timing:
        series = []
        for method in methods:
            start = time.perf_counter()
            series.extend(run_scenario(config, [method], seeds, max_workers=max_workers))
            wall[method.label] = 1e3 * (time.perf_counter() - start)
    else:
        series = run_scenario(config, methods, seeds, max_workers=max_workers)
    reports = build_reports(config, methods, seeds, series, wall_times_ms=wall or None)
    return series, reports


# --- operation counting ------------------------------------------------------


def _counting_block(n_frames: int, n_bins: int, ops: OpCounter) -> ResourceBlock:
    rng = np.random.Generator(np.random.Philox(key=12345))
    frames = []
    for i in range(n_frames):
        t = (rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)) / np.sqrt(2)
        # Only the final frame's transform is booked: the complexity model
        # charges one FFT per batch of N new samples.
        frames.append(dft(t, frame_index=i, ops=ops if i == n_frames - 1 else None))
    return ResourceBlock(frames=tuple(frames))


def count_ops(method: MethodSpec, n: int) -> OpCounter:
    """Count scalar operations of one estimation pass at block size n.

    ML/MVU/AIC/MMSE run on an n-frame by n-bin block as in the complexity
    model; CBE runs on an n-frame by 2n-bin block because the
    Marchenko-Pastur edge formulas degenerate on square blocks (the
    covariance matrix it decomposes is n x n either way).
    """
    if n < 16:
        raise ValueError("operation counting needs n >= 16")
    ops = OpCounter()
    n_bins = 2 * n if method.estimator == "CBE" else n
    block = _counting_block(n, n_bins, ops)
    last = block.frames[-1]

    if method.estimator in ("ML", "MVU"):
        power = power_spectrum(last, ops=ops)
        if method.separation == "rof":
            mask = sep.rof_separate(power, ops=ops)
        elif method.separation == "fisher":
            mask = sep.fisher_separate(power, ops=ops)
        else:
            mask = sep.SeparationMask(is_signal=np.zeros(n, dtype=bool), method="ideal")
        est.ml_estimate(power, mask, ops=ops)
        if method.estimator == "MVU":
            ops.add(n)  # fold the frame into the block's running noise mean
    elif method.estimator == "AIC":
        power = power_spectrum(last, ops=ops)
        ops.mul(n)  # running periodogram average update
        ops.add(n)
        pg = PowerSpectrum(power.power, last.frame_index)
        est.aic_estimate(pg, block.n_frames, ops=ops)
    elif method.estimator == "CBE":
        power_spectrum(last, ops=ops)
        fraction = float(method.params.get("occupied_fraction", 0.25))
        est.cbe_estimate(block, fraction,
                         grid_size=int(method.params.get("grid_size", 100)), ops=ops)
    else:  # MMSE
        power_spectrum(last, ops=ops)
        est.mmse_estimate(block, blind=bool(method.params.get("blind", True)), ops=ops)
    return ops


# --- CSV emission -------------------------------------------------------------

SERIES_COLUMNS = (
    "scenario_id", "seed", "method", "separation", "frame_index",
    "noise_power_est_mw", "noise_power_true_mw", "snr_est_db", "snr_true_db",
)
REPORT_COLUMNS = (
    "scenario_id", "method", "separation", "seed_count", "rmse_db", "std_dev_db",
    "mean_bias_db", "ops_add", "ops_mul", "ops_cmp", "ops_transcendental", "wall_time_ms",
)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return "%.9g" % value
    return str(value)


def write_series_csv(path: str | Path, series: list[EstimateSeries]) -> None:
    """Per-frame series rows, sorted by (method, separation, seed, frame)."""
    rows = []
    for s in sorted(series, key=lambda s: (s.method, s.separation, s.seed)):
        for i in range(len(s)):
            rows.append((
                s.scenario_id, s.seed, s.method, s.separation, int(s.frame_index[i]),
                float(s.noise_power_est_mw[i]), float(s.noise_power_true_mw[i]),
                float(s.snr_est_db[i]), float(s.snr_true_db[i]),
            ))
    _write_csv(path, SERIES_COLUMNS, rows)


def write_report_csv(path: str | Path, reports: list[BenchmarkReport]) -> None:
    """Aggregated report rows, sorted by (method, separation)."""
    rows = []
    for r in sorted(reports, key=lambda r: (r.method, r.separation)):
        rows.append((
            r.scenario_id, r.method, r.separation, r.seed_count, r.rmse_db,
            r.std_dev_db, r.mean_bias_db, r.ops.adds, r.ops.muls, r.ops.cmps,
            r.ops.transcendental, r.wall_time_ms,
        ))
    _write_csv(path, REPORT_COLUMNS, rows)


def _write_csv(path: str | Path, columns: tuple[str, ...], rows: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
