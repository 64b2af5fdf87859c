"""Band-power ERD%: individual band selection plus reference/active power change.

For each (reference, active) period pair and channel:

1. pick the most reactive 2 Hz band by comparing the mean log spectra of
   the reference and active windows across trials;
2. band-pass each trial in that band (zero-phase, offline), square it, and
   take the mean power in the reference and active windows;
3. ERD% = (A - R) / R * 100 per trial; a trial is identified when ERD% is
   below minus the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dsp import BandpassFilter, FilterMode, apply_filter, design_bandpass, mean_log_spectrum
from .errors import InsufficientDataError, NoReactiveBandError, TruncatedTrialError
from .model import (
    FrequencyBand,
    StandardPeriod,
    Trial,
    TrialSet,
    erd_percent_array,
    ms_to_samples,
    period_bounds,
)

DEFAULT_CHANNELS = ("C3", "Cz", "C4")


@dataclass(frozen=True)
class PeriodPair:
    reference: StandardPeriod
    active: StandardPeriod

    def __post_init__(self):
        if self.reference not in (StandardPeriod.R1, StandardPeriod.R2):
            raise ValueError("reference must be R1 or R2")
        if self.active not in (StandardPeriod.A1, StandardPeriod.A2, StandardPeriod.A3):
            raise ValueError("active must be A1, A2 or A3")

    @property
    def label(self) -> str:
        return self.reference.value + self.active.value

    @classmethod
    def parse(cls, label: str) -> PeriodPair:
        return cls(StandardPeriod(label[:2]), StandardPeriod(label[2:]))


ALL_PAIRS = tuple(
    PeriodPair(r, a)
    for r in (StandardPeriod.R1, StandardPeriod.R2)
    for a in (StandardPeriod.A1, StandardPeriod.A2, StandardPeriod.A3)
)


@dataclass(frozen=True)
class StandardParams:
    channels: tuple[str, ...] = DEFAULT_CHANNELS
    band_width_hz: float = 2.0
    search_range_hz: tuple[float, float] = (4.0, 30.0)
    confidence: float = 0.95
    min_trials: int = 8
    default_band: tuple[float, float] = (11.5, 13.5)
    # R1: this many consecutive 1 s windows starting at r1_offset_ms
    r1_offset_ms: float = 1000.0
    r1_windows: int = 8


@dataclass(frozen=True, eq=False)
class IndividualBand:
    band: FrequencyBand
    pair: PeriodPair | None
    channel: str
    frequencies_hz: np.ndarray
    difference: np.ndarray
    bound: np.ndarray
    fallback: bool = False

    @property
    def center_hz(self) -> float:
        return self.band.center


def select_individual_band(ref_windows, act_windows, fs: float, channel: str = "",
                           pair: PeriodPair | None = None, band_width_hz: float = 2.0,
                           confidence: float = 0.95, min_trials: int = 8,
                           search_range_hz: tuple[float, float] = (4.0, 30.0)) -> IndividualBand:
    """Most reactive band from two sets of 1 s windows.

    Per-bin difference of mean log spectra (reference minus active) with a
    normal-approximation confidence half-width from the across-trial spread.
    Among ``band_width_hz`` windows on the spectral grid where every bin is
    positive and above the half-width, the one with the largest mean
    difference wins.

    Raises
    ------
    InsufficientDataError
        Fewer than ``min_trials`` windows in either set.
    NoReactiveBandError
        No candidate band passes.
    """
    ref_windows = np.atleast_2d(ref_windows)
    act_windows = np.atleast_2d(act_windows)
    if min(len(ref_windows), len(act_windows)) < min_trials:
        raise InsufficientDataError(
            f"need >= {min_trials} windows per set, got {len(ref_windows)} and {len(act_windows)}"
        )
    ref = mean_log_spectrum(ref_windows, fs)
    act = mean_log_spectrum(act_windows, fs)
    f = ref.frequencies_hz
    diff = ref.log_power - act.log_power
    z = stats.norm.ppf(0.5 + confidence / 2)
    bound = z * np.sqrt(ref.log_power_sem ** 2 + act.log_power_sem ** 2)

    ok = (diff > 0) & (diff > bound)
    step = f[1] - f[0]
    n_bins = int(round(band_width_hz / step))
    best, best_score = None, -np.inf
    lo_f, hi_f = search_range_hz
    for i in range(len(f) - n_bins + 1):
        lo, hi = f[i], f[i] + band_width_hz
        if lo < lo_f or hi > hi_f or lo <= 0 or hi >= fs / 2:
            continue
        sel = slice(i, i + n_bins)
        if ok[sel].all():
            score = diff[sel].mean()
            if score > best_score:
                best, best_score = (lo, hi), score
    if best is None:
        raise NoReactiveBandError(f"no reactive band for {channel or 'channel'}")
    return IndividualBand(FrequencyBand(float(best[0]), float(best[1])), pair, channel,
                          f, diff, bound)


@dataclass(frozen=True, eq=False)
class PairResult:
    """Per-trial ERD% for one (pair, channel, band) and its aggregates."""

    pair: PeriodPair
    channel: str
    band: FrequencyBand
    trial_indices: tuple[int, ...]
    erd_percent: np.ndarray  # NaN where the reference power was zero
    threshold_percent: float
    n_excluded: int
    average_trial_erd: float

    @property
    def evaluated(self) -> np.ndarray:
        return ~np.isnan(self.erd_percent)

    @property
    def identified(self) -> np.ndarray:
        return self.evaluated & (np.nan_to_num(self.erd_percent, nan=np.inf)
                                 < -self.threshold_percent)

    @property
    def n_evaluated(self) -> int:
        return int(self.evaluated.sum())

    @property
    def identification_rate_percent(self) -> float:
        n = self.n_evaluated
        return 100.0 * self.identified.sum() / n if n else float("nan")

    @property
    def mean_erd(self) -> float:
        v = self.erd_percent[self.identified]
        return float(v.mean()) if v.size else float("nan")

    @property
    def std_erd(self) -> float:
        v = self.erd_percent[self.identified]
        if v.size == 0:
            return float("nan")
        return float(v.std(ddof=1)) if v.size > 1 else 0.0


def r1_bounds(fs: float, params: StandardParams) -> list[tuple[int, int]]:
    one = ms_to_samples(1000, fs)
    start = ms_to_samples(params.r1_offset_ms, fs)
    return [(start + k * one, start + (k + 1) * one) for k in range(params.r1_windows)]


def trial_windows(trialset: TrialSet, trials, period: StandardPeriod, channel: str,
                  params: StandardParams) -> np.ndarray:
    """Raw 1 s windows of one period for spectral band selection."""
    x = trialset.recording.channel(channel)
    n, fs = len(x), trialset.fs
    if period is StandardPeriod.R1:
        bounds = r1_bounds(fs, params)
        if bounds[-1][1] > n:
            raise TruncatedTrialError("baseline segment shorter than the R1 windows")
    else:
        bounds = [period_bounds(t, period, trialset.timing, fs, n) for t in trials]
    return np.stack([x[a:b] for a, b in bounds]) if bounds else np.empty((0, 0))


def _filtered_power(x: np.ndarray, windows, filt: BandpassFilter) -> np.ndarray:
    """Mean squared zero-phase band-passed signal over each window.

    Each window is filtered inside an epoch padded by the filter length on
    both sides (clipped to the signal) so edge transients stay outside it.
    """
    pad = filt.length
    lo = max(0, min(a for a, _ in windows) - pad)
    hi = min(len(x), max(b for _, b in windows) + pad)
    y = apply_filter(filt, x[lo:hi], FilterMode.ZERO_PHASE) ** 2
    return np.array([y[a - lo:b - lo].mean() for a, b in windows])


def r1_power(trialset: TrialSet, channel: str, filt: BandpassFilter,
             params: StandardParams) -> float:
    x = trialset.recording.channel(channel)
    return float(np.mean(_filtered_power(x, r1_bounds(trialset.fs, params), filt)))


def trial_powers(trialset: TrialSet, trial: Trial, channel: str, filt: BandpassFilter,
                 periods) -> np.ndarray:
    """Mean band power in each of ``periods`` (non-R1) for one trial."""
    x = trialset.recording.channel(channel)
    bounds = [period_bounds(trial, p, trialset.timing, trialset.fs, len(x)) for p in periods]
    return _filtered_power(x, bounds, filt)


def erd_for_pair(trialset: TrialSet, band: FrequencyBand, pair: PeriodPair, channel: str,
                 threshold_percent: float = 40.0, params: StandardParams = StandardParams(),
                 transition_width_hz: float = 1.0, stopband_atten_db: float = 40.0,
                 trials=None) -> PairResult:
    """Per-trial ERD% in ``band`` for ``pair`` on ``channel``.

    Trials with zero reference power are excluded and tallied. Identification
    is strict: ERD% < -threshold.
    """
    trials = trialset.valid_trials if trials is None else tuple(trials)
    filt = design_bandpass(band, trialset.fs, transition_width_hz, stopband_atten_db)
    periods = [pair.active] if pair.reference is StandardPeriod.R1 \
        else [pair.reference, pair.active]
    act = np.empty(len(trials))
    ref = np.empty(len(trials))
    base = r1_power(trialset, channel, filt, params) \
        if pair.reference is StandardPeriod.R1 else None
    for i, t in enumerate(trials):
        p = trial_powers(trialset, t, channel, filt, periods)
        act[i] = p[-1]
        ref[i] = base if base is not None else p[0]
    erd = erd_percent_array(act, ref)
    n_excluded = int(np.isnan(erd).sum())
    keep = ref > 0
    avg = float(erd_percent_array(act[keep].mean(), ref[keep].mean())) if keep.any() \
        else float("nan")
    return PairResult(pair, channel, band, tuple(t.index for t in trials), erd,
                      threshold_percent, n_excluded, avg)


@dataclass(frozen=True, eq=False)
class StandardCell:
    band: IndividualBand
    result: PairResult


@dataclass(frozen=True, eq=False)
class StandardResult:
    cells: dict = field(default_factory=dict)  # (pair label, channel) -> StandardCell
    n_trials: int = 0

    def cell(self, pair: str | PeriodPair, channel: str) -> StandardCell:
        label = pair.label if isinstance(pair, PeriodPair) else pair
        return self.cells[(label, channel)]


def analyze_standard(trialset: TrialSet, threshold_percent: float = 40.0,
                     params: StandardParams = StandardParams(), pairs=ALL_PAIRS,
                     transition_width_hz: float = 1.0,
                     stopband_atten_db: float = 40.0) -> StandardResult:
    """Band selection and ERD% for every pair and channel on the valid trials.

    Falls back to ``params.default_band`` when no band is reactive or there
    are too few trials to select one.
    """
    trials = trialset.valid_trials
    cells = {}
    for pair in pairs:
        for ch in params.channels:
            act_w = trial_windows(trialset, trials, pair.active, ch, params)
            ref_w = trial_windows(trialset, trials, pair.reference, ch, params)
            try:
                ib = select_individual_band(
                    ref_w, act_w, trialset.fs, ch, pair, params.band_width_hz,
                    params.confidence, params.min_trials, params.search_range_hz)
            except (NoReactiveBandError, InsufficientDataError):
                ib = IndividualBand(FrequencyBand(*params.default_band), pair, ch,
                                    np.array([]), np.array([]), np.array([]), fallback=True)
            res = erd_for_pair(trialset, ib.band, pair, ch, threshold_percent, params,
                               transition_width_hz, stopband_atten_db, trials)
            cells[(pair.label, ch)] = StandardCell(ib, res)
    return StandardResult(cells, len(trials))
