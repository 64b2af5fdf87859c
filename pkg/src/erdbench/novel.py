"""Streaming energy-ratio ERD detection on differential channels.

Pipeline: differential signals between neighbouring electrodes, a bank of
overlapping 2 Hz bands, causal band-pass filtering, energies of five
consecutive 500 ms intervals around the cues, and the four consecutive
energy ratios averaged per electrode group against a ratio threshold.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal import oaconvolve

from .dsp import BandpassFilter, design_bandpass
from .errors import ConfigError
from .model import (
    NOVEL_PERIODS,
    FrequencyBand,
    Hemisphere,
    Montage,
    Recording,
    Trial,
    TrialTiming,
    ms_to_samples,
    period_bounds,
)


class Group(str, Enum):
    LEFT_SIDE = "left"
    INTER_HEMISPHERE = "inter"
    RIGHT_SIDE = "right"


GROUPS = tuple(Group)

# Row labels: start of the later interval of each ratio relative to cue2.
TRANSITIONS = ("post1/pre", "post2/post1", "post3/post2", "reaction/post3")
TRANSITION_ROWS = ("-1.5 s", "-1 s", "-0.5 s", "onset")


@dataclass(frozen=True)
class DifferentialPair:
    positive: str
    negative: str
    group: Group

    @property
    def label(self) -> str:
        return f"{self.positive}-{self.negative}"


def group_for(montage: Montage, a: str, b: str) -> Group:
    ha, hb = montage.electrode(a).hemisphere, montage.electrode(b).hemisphere
    if ha is hb is Hemisphere.LEFT:
        return Group.LEFT_SIDE
    if ha is hb is Hemisphere.RIGHT:
        return Group.RIGHT_SIDE
    return Group.INTER_HEMISPHERE


def default_pairs(montage: Montage | None = None) -> tuple[DifferentialPair, ...]:
    """Horizontal and vertical neighbours, plus diagonals touching the midline.

    On the default montage this gives 33 pairs: 7 left, 7 right, 19 inter.
    """
    montage = montage or Montage.default()
    by_pos = {(e.grid_row, e.grid_col): e.label for e in montage.electrodes}
    pairs = []
    for (r, c), label in sorted(by_pos.items()):
        for dr, dc in ((0, 1), (1, 0), (1, -1), (1, 1)):
            other = by_pos.get((r + dr, c + dc))
            if other is None:
                continue
            diagonal = dr and dc
            if diagonal and montage.midline_col not in (c, c + dc):
                continue
            pairs.append(DifferentialPair(label, other, group_for(montage, label, other)))
    return tuple(pairs)


def validate_pairs(pairs, montage: Montage, strict: bool = True):
    for p in pairs:
        for label in (p.positive, p.negative):
            if label not in montage:
                raise ConfigError(f"unknown electrode {label!r}", field="differential_pairs")
        if strict and not montage.adjacent(p.positive, p.negative):
            raise ConfigError(f"{p.label} are not grid neighbours", field="differential_pairs")


@dataclass(frozen=True, eq=False)
class DifferentialSet:
    pairs: tuple[DifferentialPair, ...]
    data: np.ndarray  # (n_pairs, n_samples)

    @property
    def groups(self) -> np.ndarray:
        return np.array([p.group.value for p in self.pairs])


def build_differentials(recording: Recording, pairs, montage: Montage | None = None,
                        strict: bool = True) -> DifferentialSet:
    """Sample-wise positive minus negative electrode for each pair."""
    pairs = tuple(pairs)
    if montage is not None:
        validate_pairs(pairs, montage, strict)
    try:
        pos = [recording.index(p.positive) for p in pairs]
        neg = [recording.index(p.negative) for p in pairs]
    except KeyError as exc:
        raise ConfigError(f"recording lacks channel {exc}", field="differential_pairs") from None
    data = recording.data[pos] - recording.data[neg]
    return DifferentialSet(pairs, data)


@dataclass(frozen=True)
class BandBank:
    bands: tuple[FrequencyBand, ...]

    def __len__(self):
        return len(self.bands)

    def __iter__(self):
        return iter(self.bands)

    def index(self, band: FrequencyBand) -> int:
        for i, b in enumerate(self.bands):
            if math.isclose(b.lo_hz, band.lo_hz) and math.isclose(b.hi_hz, band.hi_hz):
                return i
        raise KeyError(f"band {band} not in bank")


def enumerate_bands(lo: float, hi: float, width: float = 2.0, hop: float = 1.0) -> BandBank:
    """Bands of ``width`` starting at ``lo`` every ``hop`` Hz, last one ending by ``hi``."""
    if not (lo < hi and 0 < hop < width <= hi - lo):
        raise ValueError(f"infeasible band bank lo={lo} hi={hi} width={width} hop={hop}")
    count = math.floor((hi - lo - width) / hop + 1e-9) + 1
    bands = tuple(FrequencyBand(round(lo + k * hop, 9), round(lo + k * hop + width, 9))
                  for k in range(count))
    return BandBank(bands)


@dataclass(frozen=True, eq=False)
class RatioProfile:
    """Interval energies and consecutive ratios.

    ``energies`` is (n_trials, n_channels, n_bands, 5); ``ratios`` is
    (n_trials, n_channels, n_bands, 4) with NaN where the denominator
    energy is zero or the interval was unavailable.
    """

    trial_indices: tuple[int, ...]
    pairs: tuple[DifferentialPair, ...]
    bank: BandBank
    energies: np.ndarray
    ratios: np.ndarray

    @property
    def degenerate(self) -> np.ndarray:
        return np.isnan(self.ratios)


def bank_filters(bank: BandBank, fs: float, transition_width_hz: float = 1.0,
                 stopband_atten_db: float = 40.0) -> list[BandpassFilter]:
    return [design_bandpass(b, fs, transition_width_hz, stopband_atten_db) for b in bank]


def _interval_bounds(trial: Trial, timing: TrialTiming, fs: float):
    bounds = [period_bounds(trial, p, timing, fs) for p in NOVEL_PERIODS]
    lengths = {b - a for a, b in bounds}
    if len(lengths) != 1:
        raise ValueError(f"intervals must share one length, got {sorted(lengths)}")
    return bounds


def interval_energies(signals: np.ndarray, trial: Trial, timing: TrialTiming, fs: float,
                      filters) -> np.ndarray:
    """Energies of the five intervals for each signal and band, shape (n_sig, n_bands, 5).

    The filter is causal, so interval ``[a, b)`` is read from the output at
    ``[a + D, b + D)`` with ``D`` the group delay: interval k's energy only
    depends on input up to ``b + D``. Intervals whose delayed window runs
    past the available samples come back NaN. The filter starts ``L - 1``
    samples before the first interval so its state is fully warmed up.
    """
    signals = np.atleast_2d(signals)
    n = signals.shape[-1]
    bounds = _interval_bounds(trial, timing, fs)
    out = np.full((signals.shape[0], len(filters), len(bounds)), np.nan)
    for j, filt in enumerate(filters):
        d = filt.group_delay_samples
        warm = bounds[0][0] - (filt.length - 1)
        if warm < 0:
            continue
        stop = min(n, bounds[-1][1] + d)
        seg = signals[:, warm:stop]
        y = _causal(seg, filt.taps)
        for k, (a, b) in enumerate(bounds):
            if b + d > stop:
                break
            w = y[:, a + d - warm:b + d - warm]
            out[:, j, k] = np.einsum("ij,ij->i", w, w)
    return out


def _causal(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return oaconvolve(x, taps[None, :], mode="full", axes=-1)[:, :x.shape[-1]]


def ratios_from_energies(energies: np.ndarray) -> np.ndarray:
    num, den = energies[..., 1:], energies[..., :-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    return np.where(den > 0, r, np.nan)


def ratio_profile(trials, diffs: DifferentialSet, bank: BandBank, timing: TrialTiming,
                  fs: float, transition_width_hz: float = 1.0,
                  stopband_atten_db: float = 40.0) -> RatioProfile:
    filters = bank_filters(bank, fs, transition_width_hz, stopband_atten_db)
    trials = tuple(trials)
    energies = np.full((len(trials), len(diffs.pairs), len(bank), len(NOVEL_PERIODS)), np.nan)
    for i, tr in enumerate(trials):
        energies[i] = interval_energies(diffs.data, tr, timing, fs, filters)
    return RatioProfile(tuple(t.index for t in trials), diffs.pairs, bank, energies,
                        ratios_from_energies(energies))


@dataclass(frozen=True, eq=False)
class GroupDecisions:
    """Per trial, group, band and transition: group-mean ratio and identification.

    Arrays are (n_trials, n_groups, n_bands, 4); ``evaluable`` is False where
    every channel of the group was degenerate.
    """

    mean_ratio: np.ndarray
    identified: np.ndarray
    evaluable: np.ndarray
    threshold_ratio: float

    @property
    def mean_erd_percent(self) -> np.ndarray:
        return (self.mean_ratio - 1) * 100

    def identification_percent(self) -> np.ndarray:
        """(n_groups, n_bands, 4) share of evaluable trials identified."""
        n = self.evaluable.sum(axis=0)
        hits = (self.identified & self.evaluable).sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(n > 0, 100 * hits / n, np.nan)

    def identified_erd_stats(self):
        """Mean and std (ddof=1) of group ERD% over identified trials only."""
        erd = np.where(self.identified & self.evaluable, self.mean_erd_percent, np.nan)
        count = np.sum(~np.isnan(erd), axis=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            mean = np.nanmean(erd, axis=0)
            std = np.where(count > 1, np.nanstd(erd, axis=0, ddof=1), 0.0)
        return np.where(count > 0, mean, np.nan), np.where(count > 0, std, np.nan), count


def group_identify(profile: RatioProfile, threshold_ratio: float = 0.60) -> GroupDecisions:
    """Average each ratio over a group's non-degenerate channels; identified iff
    the group mean is strictly below ``threshold_ratio``."""
    groups = np.array([p.group.value for p in profile.pairs])
    n_t, _, n_b, n_r = profile.ratios.shape
    mean = np.full((n_t, len(GROUPS), n_b, n_r), np.nan)
    for g, group in enumerate(GROUPS):
        sel = profile.ratios[:, groups == group.value]
        if sel.shape[1] == 0:
            continue
        count = np.sum(~np.isnan(sel), axis=1)
        total = np.nansum(sel, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean[:, g] = np.where(count > 0, total / count, np.nan)
    evaluable = ~np.isnan(mean)
    identified = evaluable & (np.nan_to_num(mean, nan=np.inf) < threshold_ratio)
    return GroupDecisions(mean, identified, evaluable, threshold_ratio)


def threshold_ratio_for(threshold_percent: float) -> float:
    """ERD stronger than ``threshold_percent`` means ratio below ``1 - p/100``."""
    return 1 - threshold_percent / 100


def streaming_latency_samples(filters) -> int:
    """Samples past an interval's end needed before its energy is final."""
    return max(f.group_delay_samples for f in filters)


def interval_samples(timing: TrialTiming, fs: float) -> int:
    return ms_to_samples(timing.pre_trigger_ms, fs)
