"""Signal conditioning for 30 s PPG/ACC segments.

Bandpass filter design and causal application, windowing, per-segment
z-normalization, motion magnitude/score, and percentile stratification.
All functions are pure; batch callers may parallelize over segments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal as sps

SAMPLE_RATE_HZ = 32.0
WINDOW_S = 30.0
SEGMENT_LEN = 960  # 30 s at 32 Hz

# Channel row order inside a segment.
CH_PPG, CH_ACC_X, CH_ACC_Y, CH_ACC_Z = 0, 1, 2, 3

# Rhythm classes, index order fixed everywhere (labels, logits, probabilities).
LABELS = ("SR", "AF", "Other")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

PPG_BAND_HZ = (0.5, 8.0)
PPG_FILTER_ORDER = 3
ACC_BAND_HZ = (0.5, 5.0)
ACC_FILTER_ORDER = 2

ZNORM_EPS = 1e-12


class ParameterError(ValueError):
    """Invalid argument to a signal-processing operation."""


@dataclass
class RawRecording:
    """Synchronized single-patient recording: PPG plus tri-axial ACC at 32 Hz."""

    patient_id: str
    ppg: np.ndarray
    acc_x: np.ndarray
    acc_y: np.ndarray
    acc_z: np.ndarray
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __post_init__(self):
        lengths = {len(self.ppg), len(self.acc_x), len(self.acc_y), len(self.acc_z)}
        if len(lengths) != 1:
            raise ParameterError("all four channels must have equal length")
        if self.sample_rate_hz <= 0:
            raise ParameterError("sample_rate_hz must be positive")


@dataclass
class Segment:
    """One 30 s window: 4x960 channel matrix (PPG, ACC-x/y/z) with label and motion score."""

    patient_id: str
    channels: np.ndarray  # (4, 960)
    label: str
    motion_score: float | None = None
    processed: bool = False

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float64)
        if self.channels.shape != (4, SEGMENT_LEN):
            raise ParameterError(
                f"segment channels must be 4x{SEGMENT_LEN}, got {self.channels.shape}"
            )
        if self.label not in LABEL_INDEX:
            raise ParameterError(f"unknown label {self.label!r}")
        if self.motion_score is not None and self.motion_score < 0:
            raise ParameterError("motion_score must be nonnegative")


@dataclass
class BiquadCascade:
    """Digital bandpass filter as second-order sections plus its design parameters.

    ``sections`` rows are (b0, b1, b2, a1, a2) with a0 normalized to 1.
    """

    sections: np.ndarray
    low_hz: float
    high_hz: float
    order: int
    sample_rate_hz: float

    @property
    def sos(self) -> np.ndarray:
        """Sections in scipy layout (b0, b1, b2, a0=1, a1, a2)."""
        n = len(self.sections)
        out = np.empty((n, 6))
        out[:, :3] = self.sections[:, :3]
        out[:, 3] = 1.0
        out[:, 4:] = self.sections[:, 3:]
        return out

    def poles(self) -> np.ndarray:
        """Poles of every section, concatenated."""
        return np.concatenate(
            [np.roots([1.0, a1, a2]) for _, _, _, a1, a2 in self.sections]
        )

    def magnitude(self, freqs_hz) -> np.ndarray:
        """|H| evaluated at the given frequencies."""
        _, h = sps.sosfreqz(self.sos, worN=np.atleast_1d(freqs_hz), fs=self.sample_rate_hz)
        return np.abs(h)


@dataclass
class MotionStrata:
    """Percentile binning of segments by motion score.

    ``assignment[i]`` is the bin (0..n_bins-1) of segment i; ``bin_edges`` holds
    the score at the start of each bin plus the maximum score (n_bins+1 values).
    """

    bin_edges: np.ndarray
    assignment: np.ndarray
    n_bins: int = 10

    def members(self, b: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == b)


def design_bandpass(low_hz: float, high_hz: float, order: int, fs_hz: float) -> BiquadCascade:
    """Butterworth bandpass as a cascade of biquads.

    Analog prototype of the given order, bandpass-transformed and mapped with
    the bilinear transform (prewarped band edges), so the digital filter has
    order 2*order and gain exactly 1/sqrt(2) at both edges.
    """
    if order < 1:
        raise ParameterError("order must be >= 1")
    if not (0.0 < low_hz < high_hz < fs_hz / 2.0):
        raise ParameterError(
            f"band edges must satisfy 0 < low < high < fs/2, got ({low_hz}, {high_hz}) at fs={fs_hz}"
        )
    sos = sps.butter(order, [low_hz, high_hz], btype="bandpass", fs=fs_hz, output="sos")
    sections = np.column_stack([sos[:, 0], sos[:, 1], sos[:, 2], sos[:, 4], sos[:, 5]])
    return BiquadCascade(sections, low_hz, high_hz, order, fs_hz)


@lru_cache(maxsize=8)
def ppg_bandpass(fs_hz: float = SAMPLE_RATE_HZ) -> BiquadCascade:
    return design_bandpass(*PPG_BAND_HZ, PPG_FILTER_ORDER, fs_hz)


@lru_cache(maxsize=8)
def acc_bandpass(fs_hz: float = SAMPLE_RATE_HZ) -> BiquadCascade:
    return design_bandpass(*ACC_BAND_HZ, ACC_FILTER_ORDER, fs_hz)


def apply_filter(f: BiquadCascade, x) -> np.ndarray:
    """Single causal forward pass through the cascade, zero initial state."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("cannot filter an empty sequence")
    return sps.sosfilt(f.sos, x)


def segment_windows(rec: RawRecording, window_s: float = WINDOW_S) -> list[np.ndarray]:
    """Cut a recording into non-overlapping 4xW windows; trailing partial dropped."""
    w = int(round(window_s * rec.sample_rate_hz))
    stacked = np.vstack([rec.ppg, rec.acc_x, rec.acc_y, rec.acc_z]).astype(np.float64)
    n = stacked.shape[1] // w
    return [stacked[:, i * w : (i + 1) * w].copy() for i in range(n)]


def znormalize(x) -> np.ndarray:
    """Zero-mean unit-variance rescaling (population std); constant input maps to zeros."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean()
    sd = np.sqrt(np.mean((x - mu) ** 2))
    if sd < ZNORM_EPS:
        return np.zeros_like(x)
    return (x - mu) / sd


def acc_magnitude(ax, ay, az) -> np.ndarray:
    """Pointwise Euclidean norm of the three acceleration axes."""
    ax, ay, az = (np.asarray(a, dtype=np.float64) for a in (ax, ay, az))
    if not (len(ax) == len(ay) == len(az)):
        raise ParameterError("acceleration axes must have equal length")
    return np.sqrt(ax * ax + ay * ay + az * az)


def motion_score(magnitude) -> float:
    """Population variance of the (bandpassed) magnitude signal."""
    magnitude = np.asarray(magnitude, dtype=np.float64)
    if magnitude.size == 0:
        raise ParameterError("cannot score an empty sequence")
    return float(np.mean((magnitude - magnitude.mean()) ** 2))


def stratify_percentiles(scores, n_bins: int = 10) -> MotionStrata:
    """Assign every segment to a percentile bin of its motion score.

    Ranks ascending (ties broken by original index); rank r of N goes to bin
    floor(r * n_bins / N), so no segment is excluded and bin sizes differ by
    at most one.
    """
    if n_bins < 1:
        raise ParameterError("n_bins must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ParameterError("scores must be nonempty")
    n = scores.size
    order = np.argsort(scores, kind="stable")
    assignment = np.empty(n, dtype=np.int64)
    ranks = np.arange(n, dtype=np.int64)
    assignment[order] = ranks * n_bins // n
    sorted_scores = scores[order]
    starts = [int(np.ceil(j * n / n_bins)) for j in range(n_bins)]
    edges = np.array([sorted_scores[min(s, n - 1)] for s in starts] + [sorted_scores[-1]])
    return MotionStrata(bin_edges=edges, assignment=assignment, n_bins=n_bins)


def preprocess_segment(seg: Segment) -> Segment:
    """Condition one raw segment for feature extraction and the network.

    PPG: 0.5-8 Hz 3rd-order bandpass, then z-normalized. ACC axes: 0.5-5 Hz
    2nd-order bandpass; the motion score is the variance of their magnitude,
    and the normalized filtered axes become the network's ACC channels.
    """
    if seg.processed:
        raise ParameterError(f"segment of patient {seg.patient_id} is already processed")
    fs = SAMPLE_RATE_HZ
    ppg_f = apply_filter(ppg_bandpass(fs), seg.channels[CH_PPG])
    acc_f = [apply_filter(acc_bandpass(fs), seg.channels[c]) for c in (CH_ACC_X, CH_ACC_Y, CH_ACC_Z)]
    score = motion_score(acc_magnitude(*acc_f))
    channels = np.vstack([znormalize(ppg_f)] + [znormalize(a) for a in acc_f])
    return Segment(
        patient_id=seg.patient_id,
        channels=channels,
        label=seg.label,
        motion_score=score,
        processed=True,
    )


def preprocess_segments(segments) -> list[Segment]:
    """Condition a batch of segments, preserving input order and excluding none."""
    return [preprocess_segment(s) for s in segments]
