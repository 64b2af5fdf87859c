"""Electrode-polarization artifact detection and suppression.

Three steps: first difference of the signal, runs of consecutive samples
with abnormally large difference, and zeroing of the segment between the
zero crossings of the signal that enclose each run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvariantError
from .model import TrialSet, ms_to_samples, trial_extent


@dataclass(frozen=True)
class ArtifactParams:
    """Detector settings.

    With ``derivative_threshold_uv_per_sample`` unset the threshold adapts:
    ``threshold_multiplier`` times the median absolute first difference in a
    rolling window of ``rolling_window_s`` seconds.
    """

    derivative_threshold_uv_per_sample: float | None = None
    threshold_multiplier: float = 8.0
    rolling_window_s: float = 4.0
    min_consecutive_samples: int = 3
    max_suppression_ms: float = 1000.0
    taper_samples: int = 16

    def __post_init__(self):
        thr = self.derivative_threshold_uv_per_sample
        if thr is not None and not thr > 0:
            raise ValueError("derivative_threshold_uv_per_sample must be positive")
        if not self.threshold_multiplier > 0 or not self.rolling_window_s > 0:
            raise ValueError("threshold_multiplier and rolling_window_s must be positive")
        if self.min_consecutive_samples < 1:
            raise ValueError("min_consecutive_samples must be >= 1")
        if not self.max_suppression_ms > 0:
            raise ValueError("max_suppression_ms must be positive")
        if self.taper_samples < 0:
            raise ValueError("taper_samples must be >= 0")


@dataclass(frozen=True, eq=False)
class SuppressionResult:
    cleaned: np.ndarray
    spans: tuple[tuple[int, int], ...] = ()
    feedback_suspended: tuple[bool, ...] = field(default=())


def rolling_threshold(diff: np.ndarray, fs: float, params: ArtifactParams) -> np.ndarray:
    """Per-difference-sample threshold.

    The median is re-evaluated every quarter second over a centred window;
    exact zero differences (suppressed stretches) are ignored.
    """
    if params.derivative_threshold_uv_per_sample is not None:
        return np.full(diff.shape, float(params.derivative_threshold_uv_per_sample))
    mag = np.abs(diff)
    n = len(mag)
    half = max(1, int(round(params.rolling_window_s * fs / 2)))
    hop = max(1, int(round(fs / 4)))
    out = np.empty(n)
    for start in range(0, n, hop):
        centre = start + hop // 2
        win = mag[max(0, centre - half):min(n, centre + half)]
        win = win[win > 0]
        scale = np.median(win) if win.size else 0.0
        out[start:start + hop] = scale
    # a flat window gives no scale; never flag on it
    out[out == 0] = np.inf
    return out * params.threshold_multiplier


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive (first, last) index pairs of True runs."""
    if not mask.any():
        return []
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def detect_artifact_spans(x, params: ArtifactParams = ArtifactParams(), fs: float = 512.0):
    """Half-open sample spans holding polarization artifacts, disjoint and sorted."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("signal must be 1-D with at least 2 samples")
    diff = np.diff(x)
    flagged = np.abs(diff) > rolling_threshold(diff, fs, params)
    runs = [r for r in _runs(flagged) if r[1] - r[0] + 1 >= params.min_consecutive_samples]
    if not runs:
        return []

    # crossing k sits between samples k-1 and k
    crossings = np.flatnonzero(x[:-1] * x[1:] <= 0) + 1
    cap = ms_to_samples(params.max_suppression_ms, fs)
    spans = []
    for first, last in runs:
        # difference index i spans samples i..i+1
        s0, s1 = first, last + 1
        i = np.searchsorted(crossings, s0, side="right") - 1
        start = int(crossings[i]) if i >= 0 else 0
        j = np.searchsorted(crossings, s1, side="right")
        stop = int(crossings[j]) if j < len(crossings) else len(x)
        if stop - start > cap:
            start = max(start, s0 - cap // 4)
            stop = min(stop, start + cap)
        spans.append((start, stop))

    merged = [spans[0]]
    for a, b in spans[1:]:
        if a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return [(a, min(b, a + cap)) for a, b in merged]


def _taper(n: int) -> np.ndarray:
    """Raised-cosine ramp from 1 down towards 0 over ``n`` samples (both ends excluded)."""
    k = np.arange(1, n + 1)
    return 0.5 * (1 + np.cos(np.pi * k / (n + 1)))


def suppress(x, spans, taper_samples: int = 16) -> SuppressionResult:
    """Zero each span, with raised-cosine tapers just outside its edges.

    Samples outside every span and taper are returned bit-identical.
    """
    x = np.asarray(x, dtype=float)
    spans = [tuple(map(int, s)) for s in spans]
    for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
        if a1 < b0:
            raise InvariantError(f"overlapping spans {(a0, b0)} and {(a1, b1)}")
    cleaned = x.copy()
    if not spans:
        return SuppressionResult(cleaned)
    gain = np.ones(len(x))
    ramp = _taper(taper_samples)
    for a, b in spans:
        if not 0 <= a < b <= len(x):
            raise ValueError(f"span {(a, b)} outside signal")
        gain[a:b] = 0.0
        lead = ramp[max(0, taper_samples - a):]
        gain[a - len(lead):a] = np.minimum(gain[a - len(lead):a], lead)
        tail = ramp[::-1][:max(0, min(taper_samples, len(x) - b))]
        gain[b:b + len(tail)] = np.minimum(gain[b:b + len(tail)], tail)
    touched = gain != 1.0
    cleaned[touched] = x[touched] * gain[touched]
    return SuppressionResult(cleaned, tuple(spans), tuple(True for _ in spans))


def clean_channels(data, fs: float, params: ArtifactParams = ArtifactParams()):
    """Detect and suppress per channel; returns (cleaned array, spans per channel)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    out = np.empty_like(data)
    all_spans = []
    for i, ch in enumerate(data):
        spans = detect_artifact_spans(ch, params, fs)
        out[i] = suppress(ch, spans, params.taper_samples).cleaned
        all_spans.append(spans)
    return out, all_spans


def flag_trials(trialset: TrialSet, spans_by_channel) -> TrialSet:
    """Attach suppressed spans to trials; a trial whose analysis extent meets
    any span becomes invalid (its feedback would have been suspended)."""
    all_spans = sorted({tuple(s) for spans in spans_by_channel for s in spans})
    trials = []
    for trial in trialset:
        lo, hi = trial_extent(trial, trialset.timing, trialset.fs)
        hits = tuple((a, b) for a, b in all_spans if a < hi and lo < b)
        trials.append(replace(trial, artifact_spans=hits, valid=trial.valid and not hits))
    return trialset.with_trials(trials)
