"""Changepoint detection and semantic filtering over an execution trace.

Detection looks for peaks of the Savitzky-Golay second derivative of every
normalized, low-passed kinematic feature. Filtering then walks the candidates
in time order and drops one whenever it is too close to the previous
candidate or sees the same scene fluents.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.signal import butter, filtfilt

from .fluents import compute_fluents, without_reachable
from .trace import N_FEATURES, ExecutionTrace, kinematic_matrix


@dataclass(frozen=True)
class SegmenterConfig:
    alpha: float = 0.20
    sg_window: int = 21
    sg_polyorder: int = 3
    lowpass_cutoff: float = 1.5  # Hz
    min_gap: float = 1.0  # s
    use_reachable_in_filtering: bool = True
    # |k''| of a normalized feature below this is treated as numerical zero
    min_peak: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.sg_window % 2 != 1 or self.sg_window <= self.sg_polyorder + 1:
            raise ValueError("sg_window must be odd and larger than sg_polyorder + 1")
        if self.sg_polyorder < 2:
            raise ValueError("sg_polyorder must be at least 2 for a second derivative")
        if not self.min_gap > 0:
            raise ValueError("min_gap must be positive")
        if not self.lowpass_cutoff > 0:
            raise ValueError("lowpass_cutoff must be positive")
        if self.min_peak < 0:
            raise ValueError("min_peak must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Changepoint:
    index: int
    t: float
    source_feature: int | None = None


@dataclass(frozen=True)
class Segment:
    start: Changepoint
    end: Changepoint

    def __post_init__(self) -> None:
        if not self.start.t < self.end.t:
            raise ValueError("segment must have positive duration")

    @property
    def duration(self) -> float:
        return self.end.t - self.start.t

    def to_json(self) -> dict:
        return {
            "start_t": self.start.t,
            "end_t": self.end.t,
            "start_idx": self.start.index,
            "end_idx": self.end.index,
        }


def normalize_features(K: np.ndarray) -> np.ndarray:
    """Divide every column by its largest absolute value; zero columns pass."""
    K = np.asarray(K, dtype=float)
    scale = np.max(np.abs(K), axis=0, keepdims=True)
    scale[scale == 0.0] = 1.0
    return K / scale


def lowpass(K: np.ndarray, cutoff: float, sample_rate: float) -> np.ndarray:
    """Zero-phase 2nd-order Butterworth low-pass applied to each column."""
    nyquist = sample_rate / 2.0
    if not cutoff < nyquist:
        raise ValueError(f"cutoff {cutoff} Hz must be below Nyquist {nyquist} Hz")
    K = np.asarray(K, dtype=float)
    b, a = butter(2, cutoff / nyquist)
    squeeze = K.ndim == 1
    X = K[:, None] if squeeze else K
    padlen = min(3 * max(len(a), len(b)), X.shape[0] - 1)
    Y = filtfilt(b, a, X, axis=0, padlen=padlen)
    return Y[:, 0] if squeeze else Y


def sg_coefficients(window: int, polyorder: int, deriv: int, dt: float = 1.0) -> np.ndarray:
    """Correlation weights giving the ``deriv``-th derivative at the window
    center of the local least-squares polynomial."""
    half = (window - 1) // 2
    m = np.arange(-half, half + 1, dtype=float)
    V = np.vander(m, polyorder + 1, increasing=True)
    # row `deriv` of the pseudo-inverse maps samples to the t**deriv coefficient
    return math.factorial(deriv) * np.linalg.pinv(V)[deriv] / dt**deriv


def sg_second_derivative(x: np.ndarray, window: int, polyorder: int, dt: float) -> np.ndarray:
    """Savitzky-Golay estimate of d2x/dt2, mirror-padded at both ends."""
    x = np.asarray(x, dtype=float)
    if window % 2 != 1:
        raise ValueError("window must be odd")
    if x.shape[0] < window:
        raise ValueError(f"series of length {x.shape[0]} is shorter than window {window}")
    w = sg_coefficients(window, polyorder, 2, dt)
    half = (window - 1) // 2
    pad = [(half, half)] + [(0, 0)] * (x.ndim - 1)
    xp = np.pad(x, pad, mode="reflect")
    out = np.zeros_like(x)
    n = x.shape[0]
    for k, wk in enumerate(w):
        out += wk * xp[k : k + n]
    return out


def find_peaks_strict(y: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima of ``y``; a flat top reports its
    leftmost sample. End samples are never peaks."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n < 3:
        return np.zeros(0, dtype=int)
    peaks = []
    i = 1
    while i < n - 1:
        if y[i] > y[i - 1]:
            j = i
            while j + 1 < n and y[j + 1] == y[i]:
                j += 1
            if j + 1 < n and y[j + 1] < y[i]:
                peaks.append(i)
            i = j + 1
        else:
            i += 1
    return np.asarray(peaks, dtype=int)


def feature_peaks(acc: np.ndarray, alpha: float, min_peak: float = 0.0) -> np.ndarray:
    """Peaks of |acc| whose height exceeds ``alpha`` times the tallest peak."""
    mag = np.abs(acc)
    peaks = find_peaks_strict(mag)
    if peaks.size == 0:
        return peaks
    heights = mag[peaks]
    top = heights.max()
    if top <= min_peak:
        return np.zeros(0, dtype=int)
    return peaks[(heights > alpha * top) & (heights > min_peak)]


def second_derivatives(trace: ExecutionTrace, cfg: SegmenterConfig) -> np.ndarray:
    """Normalized, low-passed kinematics differentiated twice (T x 16)."""
    K = kinematic_matrix(trace)
    if K.shape[0] < 2 * cfg.sg_window:
        raise ValueError(
            f"trace has {K.shape[0]} frames; need at least {2 * cfg.sg_window} for SG window"
        )
    K = lowpass(normalize_features(K), cfg.lowpass_cutoff, trace.sample_rate)
    return sg_second_derivative(K, cfg.sg_window, cfg.sg_polyorder, trace.dt)


def detect_changepoints_per_feature(
    trace: ExecutionTrace, cfg: SegmenterConfig
) -> list[np.ndarray]:
    acc = second_derivatives(trace, cfg)
    return [feature_peaks(acc[:, i], cfg.alpha, cfg.min_peak) for i in range(N_FEATURES)]


def detect_changepoints(trace: ExecutionTrace, cfg: SegmenterConfig) -> list[Changepoint]:
    """Union of thresholded second-derivative peaks over all 16 features.

    Candidates at the same frame index are merged; the lowest feature id is
    kept as the source.
    """
    per_feature = detect_changepoints_per_feature(trace, cfg)
    first_source: dict[int, int] = {}
    for feat, idx in enumerate(per_feature):
        for i in idx.tolist():
            first_source.setdefault(i, feat)
    times = trace._times
    return [Changepoint(i, float(times[i]), first_source[i]) for i in sorted(first_source)]


def filter_changepoints(
    trace: ExecutionTrace, C: Sequence[Changepoint], cfg: SegmenterConfig
) -> list[Changepoint]:
    """Drop candidates that repeat the previous candidate's fluents or come
    less than ``min_gap`` seconds after it.

    The reference point (time and fluents) advances to every candidate,
    including dropped ones, so a dense run of candidates is removed
    entirely after its first member.
    """
    kept: list[Changepoint] = []
    fluents: frozenset = frozenset()
    c_old = trace.frames[0].t
    for c in C:
        f_old = fluents
        fluents = compute_fluents(trace.frames[c.index])
        if not cfg.use_reachable_in_filtering:
            fluents = without_reachable(fluents)
        if not (fluents == f_old or c.t - c_old < cfg.min_gap):
            kept.append(c)
        c_old = c.t
    return kept


def segments_from_changepoints(
    trace: ExecutionTrace, changepoints: Sequence[Changepoint]
) -> list[Segment]:
    last = len(trace.frames) - 1
    times = trace._times
    bounds = [Changepoint(0, float(times[0]))]
    for c in changepoints:
        if bounds[-1].index < c.index < last:
            bounds.append(c)
    bounds.append(Changepoint(last, float(times[last])))
    return [Segment(a, b) for a, b in zip(bounds, bounds[1:])]


def segment(trace: ExecutionTrace, cfg: SegmenterConfig | None = None) -> list[Segment]:
    """Split ``trace`` into segments between filtered changepoints.

    The first and last frames act as implicit boundaries so the segments
    tile the whole trace.
    """
    cfg = cfg or SegmenterConfig()
    candidates = detect_changepoints(trace, cfg)
    return segments_from_changepoints(trace, filter_changepoints(trace, candidates, cfg))
