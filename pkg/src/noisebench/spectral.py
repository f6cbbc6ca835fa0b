"""Framing, DFT and power-spectrum assembly for time-frequency blocks.

Conventions: frames are non-overlapping, rectangular-windowed slices of the
input stream; the DFT is the unnormalized forward transform (Parseval reads
``sum |X(n)|^2 == N * sum |x(t)|^2``); bin powers are ``|X(n)|^2 / N`` so the
mean over bins equals the time-domain mean power.  All value types hold
read-only arrays and every operation is a pure function, so results can be
shared freely between threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamplesError
from .opcount import OpCounter

log = logging.getLogger(__name__)


def _as_finite_complex(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    if isinstance(values, np.ndarray) and not arr.flags.writeable and arr is values:
        return arr  # already validated and frozen by an earlier constructor
    finite = np.isfinite(arr.real) & np.isfinite(arr.imag)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0])
        raise ValueError(f"{what} contains a non-finite value at sample {idx}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ComplexSeries:
    """A stream of complex I/Q samples at a fixed sample rate.

    A zero-length series is permitted (e.g. loading an empty trace file);
    operations that need data raise :class:`InsufficientSamplesError`.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_finite_complex(self.samples, "samples"))
        if not (self.sample_rate_hz > 0 and np.isfinite(self.sample_rate_hz)):
            raise ValueError("sample_rate_hz must be positive and finite")

    def __len__(self) -> int:
        return self.samples.size

    def mean_power(self) -> float:
        """Mean of |s|^2 over the series (linear power units)."""
        if self.samples.size == 0:
            raise InsufficientSamplesError("series is empty")
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class SpectralFrame:
    """N complex spectral coefficients of one time frame."""

    bins: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bins", _as_finite_complex(self.bins, "bins"))
        if self.bins.size < 2:
            raise ValueError("a spectral frame needs at least 2 bins")
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")

    @property
    def n_bins(self) -> int:
        return self.bins.size


@dataclass(frozen=True)
class PowerSpectrum:
    """Non-negative per-bin powers of one frame (mW when scenario-scaled)."""

    power: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        arr = np.asarray(self.power, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("power must be one-dimensional")
        if not (isinstance(self.power, np.ndarray) and not arr.flags.writeable and arr is self.power):
            if not np.all(np.isfinite(arr)):
                raise ValueError("power contains non-finite entries")
            if np.any(arr < 0):
                raise ValueError("power entries must be non-negative")
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "power", arr)

    @property
    def n_bins(self) -> int:
        return self.power.size


@dataclass(frozen=True)
class ResourceBlock:
    """M spectral frames of identical bin count: the unit of analysis."""

    frames: tuple[SpectralFrame, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("a resource block needs at least one frame")
        n = frames[0].n_bins
        for i, fr in enumerate(frames):
            if fr.n_bins != n:
                raise ValueError("all frames in a block must share the bin count")
            if fr.frame_index != i:
                raise ValueError("frame indices must be consecutive from 0")
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def n_bins(self) -> int:
        return self.frames[0].n_bins

    def spectral_matrix(self) -> np.ndarray:
        """(M, N) complex matrix of raw spectral coefficients, rows = frames."""
        return np.stack([fr.bins for fr in self.frames])


def frame_signal(series: ComplexSeries, frame_len: int, frame_count: int) -> list[np.ndarray]:
    """Slice the stream into ``frame_count`` non-overlapping frames of ``frame_len``.

    Frame i holds samples [i*frame_len, (i+1)*frame_len); trailing samples
    beyond frame_len*frame_count are discarded.  No window is applied.
    """
    if frame_len < 1 or frame_count < 1:
        raise ValueError("frame_len and frame_count must be >= 1")
    needed = frame_len * frame_count
    if len(series) < needed:
        raise InsufficientSamplesError(
            f"need {needed} samples for {frame_count} frames of {frame_len}, have {len(series)}"
        )
    if len(series) > needed:
        log.debug("discarding %d trailing samples", len(series) - needed)
    data = series.samples[:needed]
    return [data[i * frame_len:(i + 1) * frame_len] for i in range(frame_count)]


def dft(frame: np.ndarray, frame_index: int = 0, ops: OpCounter | None = None) -> SpectralFrame:
    """Unnormalized forward DFT of one time-domain frame (any N >= 2)."""
    arr = _as_finite_complex(frame, "frame")
    if arr.size < 2:
        raise ValueError("frame must have at least 2 samples")
    if ops is not None:
        ops.fft(arr.size)
    return SpectralFrame(bins=np.fft.fft(arr), frame_index=frame_index)


def power_spectrum(frame: SpectralFrame, ops: OpCounter | None = None) -> PowerSpectrum:
    """Per-bin power |X(n)|^2 / N; its bin mean equals the time-domain mean power."""
    n = frame.n_bins
    if ops is not None:
        # |X|^2 is two squarings plus one addition per bin; 1/N one more multiply.
        ops.mul(2 * n)
        ops.add(n)
        ops.mul(n)
    power = (frame.bins.real**2 + frame.bins.imag**2) / n
    return PowerSpectrum(power=power, frame_index=frame.frame_index)


def averaged_periodogram(block: ResourceBlock, ops: OpCounter | None = None) -> PowerSpectrum:
    """Bin-wise mean of the per-frame power spectra over the whole block."""
    mat = power_matrix(block, ops=ops)
    if ops is not None:
        ops.add((block.n_frames - 1) * block.n_bins)
        ops.mul(block.n_bins)
    return PowerSpectrum(power=mat.mean(axis=0), frame_index=block.frames[-1].frame_index)


def power_matrix(block: ResourceBlock, ops: OpCounter | None = None) -> np.ndarray:
    """(M, N) matrix of per-frame bin powers in the |X|^2/N convention."""
    mat = np.stack([power_spectrum(fr, ops=ops).power for fr in block.frames])
    mat.setflags(write=False)
    return mat


def block_from_frames(time_frames: list[np.ndarray], ops: OpCounter | None = None) -> ResourceBlock:
    """Transform time-domain frames into a resource block."""
    return ResourceBlock(
        frames=tuple(dft(fr, frame_index=i, ops=ops) for i, fr in enumerate(time_frames))
    )
