"""Domain types: montage, recordings, trial timing, bands and ERD measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import DegenerateReferenceError, TruncatedTrialError

DEFAULT_FS = 512.0


class Hemisphere(str, Enum):
    LEFT = "Left"
    MIDLINE = "Midline"
    RIGHT = "Right"


@dataclass(frozen=True)
class Electrode:
    label: str
    grid_row: int
    grid_col: int
    hemisphere: Hemisphere


# Sensorimotor grid. Columns are lateral positions with the midline at index 2.
DEFAULT_GRID: tuple[tuple[str | None, ...], ...] = (
    ("FC3", "FC1", "FCz", "FC2", "FC4"),
    ("C3", "C1", "Cz", "C2", "C4"),
    ("CP3", "CP1", "CPz", "CP2", "CP4"),
    (None, None, "Pz", None, None),
)
DEFAULT_MIDLINE_COL = 2


def hemisphere_for(col: int, midline_col: int) -> Hemisphere:
    if col < midline_col:
        return Hemisphere.LEFT
    if col > midline_col:
        return Hemisphere.RIGHT
    return Hemisphere.MIDLINE


@dataclass(frozen=True)
class Montage:
    """Ordered electrode set laid out on a 2-D grid.

    Only grid adjacency and hemisphere matter to the pipelines; labels are
    free-form.
    """

    electrodes: tuple[Electrode, ...]
    midline_col: int = DEFAULT_MIDLINE_COL

    def __post_init__(self):
        object.__setattr__(self, "electrodes", tuple(self.electrodes))
        labels = [e.label for e in self.electrodes]
        if len(set(labels)) != len(labels):
            raise ValueError("montage labels must be unique")
        positions = [(e.grid_row, e.grid_col) for e in self.electrodes]
        if len(set(positions)) != len(positions):
            raise ValueError("two electrodes share a grid position")
        for e in self.electrodes:
            expected = hemisphere_for(e.grid_col, self.midline_col)
            if e.hemisphere != expected:
                raise ValueError(
                    f"electrode {e.label}: hemisphere {e.hemisphere.value} "
                    f"inconsistent with column {e.grid_col}"
                )

    @classmethod
    def from_grid(cls, grid: Sequence[Sequence[str | None]], midline_col: int) -> Montage:
        electrodes = []
        for r, row in enumerate(grid):
            for c, label in enumerate(row):
                if label:
                    electrodes.append(Electrode(label, r, c, hemisphere_for(c, midline_col)))
        return cls(tuple(electrodes), midline_col)

    @classmethod
    def default(cls) -> Montage:
        return cls.from_grid(DEFAULT_GRID, DEFAULT_MIDLINE_COL)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.electrodes)

    def __len__(self):
        return len(self.electrodes)

    def __contains__(self, label):
        return any(e.label == label for e in self.electrodes)

    def electrode(self, label: str) -> Electrode:
        for e in self.electrodes:
            if e.label == label:
                return e
        raise KeyError(label)

    def adjacent(self, a: str, b: str) -> bool:
        """True for distinct electrodes that are grid neighbours (incl. diagonals)."""
        ea, eb = self.electrode(a), self.electrode(b)
        dr, dc = abs(ea.grid_row - eb.grid_row), abs(ea.grid_col - eb.grid_col)
        return max(dr, dc) == 1


class TriggerCode(IntEnum):
    TRIAL_START = 1
    CUE1 = 2
    CUE2 = 3
    MOVEMENT_END = 4


@dataclass(frozen=True)
class Trigger:
    sample_index: int
    code: TriggerCode


@dataclass(frozen=True, eq=False)
class Recording:
    """Multichannel EEG in microvolts, shape (n_channels, n_samples).

    The sample array is copied and made read-only on construction.
    """

    sample_rate_hz: float
    labels: tuple[str, ...]
    data: np.ndarray
    triggers: tuple[Trigger, ...] = ()

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError("sample rate must be positive")
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2 or data.shape[1] < 1:
            raise ValueError("channels must be equal-length sequences of length >= 1")
        if data.shape[0] != len(self.labels):
            raise ValueError(f"{data.shape[0]} channels but {len(self.labels)} labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("channel labels must be unique")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", tuple(self.labels))
        triggers = tuple(
            t if isinstance(t, Trigger) else Trigger(int(t[0]), TriggerCode(t[1]))
            for t in self.triggers
        )
        last = -1
        for t in triggers:
            if not 0 <= t.sample_index < data.shape[1]:
                raise ValueError(f"trigger at sample {t.sample_index} outside recording")
            if t.sample_index <= last:
                raise ValueError("trigger sample indices must be strictly increasing")
            last = t.sample_index
        object.__setattr__(self, "triggers", triggers)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown channel {label!r}") from None

    def channel(self, label: str) -> np.ndarray:
        return self.data[self.index(label)]

    def with_data(self, data: np.ndarray) -> Recording:
        return Recording(self.sample_rate_hz, self.labels, data, self.triggers)

    def truncated(self, n_samples: int) -> Recording:
        kept = tuple(t for t in self.triggers if t.sample_index < n_samples)
        return Recording(self.sample_rate_hz, self.labels, self.data[:, :n_samples], kept)


def ms_to_samples(ms: float, fs: float) -> int:
    """Duration in ms to a sample count, rounding half up."""
    # Fraction keeps e.g. 500 ms @ 512 Hz exactly 256 and makes x.5 ties deterministic.
    exact = Fraction(ms) * Fraction(fs) / 1000
    return math.floor(exact + Fraction(1, 2))


@dataclass(frozen=True)
class TrialTiming:
    pre_trigger_ms: float = 500.0
    post_trigger_ms: float = 1500.0
    reaction_ms: float = 500.0
    movement_min_ms: float = 500.0
    movement_max_ms: float = 740.0
    recovery_ms: float = 1000.0

    def __post_init__(self):
        for name in ("pre_trigger_ms", "post_trigger_ms", "reaction_ms",
                     "movement_min_ms", "movement_max_ms", "recovery_ms"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.movement_min_ms < self.movement_max_ms:
            raise ValueError("movement_min_ms must be < movement_max_ms")

    @property
    def post_interval_ms(self) -> float:
        return self.post_trigger_ms / 3

    def post_interval_samples(self, fs: float) -> int:
        n = ms_to_samples(self.post_trigger_ms, fs)
        if n % 3:
            raise ValueError(
                f"post-trigger window of {n} samples at {fs} Hz does not split into "
                "three equal sub-intervals"
            )
        return n // 3


@dataclass(frozen=True)
class Trial:
    """Absolute sample indices of one trial's landmarks in its recording."""

    index: int
    trial_start: int
    cue1: int
    cue2: int
    movement_end: int
    valid: bool = True
    artifact_spans: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if not self.trial_start < self.cue1 < self.cue2 <= self.movement_end:
            raise ValueError(
                f"trial {self.index}: landmarks out of order "
                f"({self.trial_start}, {self.cue1}, {self.cue2}, {self.movement_end})"
            )
        object.__setattr__(self, "artifact_spans", tuple(tuple(s) for s in self.artifact_spans))

    def shifted(self, offset: int) -> Trial:
        return replace(
            self,
            trial_start=self.trial_start + offset,
            cue1=self.cue1 + offset,
            cue2=self.cue2 + offset,
            movement_end=self.movement_end + offset,
            artifact_spans=tuple((a + offset, b + offset) for a, b in self.artifact_spans),
        )


@dataclass(frozen=True, eq=False)
class TrialSet:
    recording: Recording
    trials: tuple[Trial, ...]
    timing: TrialTiming = field(default_factory=TrialTiming)

    def __post_init__(self):
        object.__setattr__(self, "trials", tuple(self.trials))

    def __len__(self):
        return len(self.trials)

    def __iter__(self) -> Iterator[Trial]:
        return iter(self.trials)

    @property
    def valid_trials(self) -> tuple[Trial, ...]:
        return tuple(t for t in self.trials if t.valid)

    @property
    def fs(self) -> float:
        return self.recording.sample_rate_hz

    def with_trials(self, trials) -> TrialSet:
        return TrialSet(self.recording, tuple(trials), self.timing)


@dataclass(frozen=True, order=True)
class FrequencyBand:
    lo_hz: float
    hi_hz: float

    def __post_init__(self):
        if not 0 < self.lo_hz < self.hi_hz:
            raise ValueError(f"invalid band ({self.lo_hz}, {self.hi_hz})")

    def check_rate(self, fs: float) -> None:
        if not self.hi_hz < fs / 2:
            raise ValueError(f"band {self} reaches Nyquist at fs={fs}")

    @property
    def width(self) -> float:
        return self.hi_hz - self.lo_hz

    @property
    def center(self) -> float:
        return (self.lo_hz + self.hi_hz) / 2

    def overlaps(self, other: FrequencyBand) -> bool:
        return self.lo_hz < other.hi_hz and other.lo_hz < self.hi_hz

    @property
    def label(self) -> str:
        return f"{self.lo_hz:g}-{self.hi_hz:g}"

    def __str__(self):
        return f"({self.lo_hz:g}, {self.hi_hz:g}) Hz"


@dataclass(frozen=True)
class ErdMeasure:
    """Relative band-power change between a reference and an active period.

    Stored as an exact rational energy ratio, so the percent and ratio views
    convert into each other without rounding. Negative percent means
    desynchronization.
    """

    exact_ratio: Fraction

    def __post_init__(self):
        r = Fraction(self.exact_ratio)
        if r < 0:
            raise ValueError("energy ratio must be >= 0 (percent >= -100)")
        object.__setattr__(self, "exact_ratio", r)

    @classmethod
    def from_ratio(cls, ratio) -> ErdMeasure:
        return cls(Fraction(ratio))

    @classmethod
    def from_percent(cls, percent) -> ErdMeasure:
        return cls(1 + Fraction(percent) / 100)

    @property
    def exact_percent(self) -> Fraction:
        return (self.exact_ratio - 1) * 100

    @property
    def ratio(self) -> float:
        return float(self.exact_ratio)

    @property
    def percent(self) -> float:
        return float(self.exact_percent)

    def identified(self, threshold_percent: float = 40.0) -> bool:
        """ERD stronger than the threshold (strict)."""
        return self.exact_percent < -Fraction(threshold_percent)


def erd_percent(active_power: float, reference_power: float) -> ErdMeasure:
    """ERD/ERS as ``(A - R) / R * 100``.

    Raises
    ------
    DegenerateReferenceError
        If the reference power is zero.
    """
    if active_power < 0 or reference_power < 0:
        raise ValueError("powers must be non-negative")
    if reference_power == 0:
        raise DegenerateReferenceError("reference power is zero")
    return ErdMeasure(Fraction(active_power) / Fraction(reference_power))


def erd_percent_array(active, reference) -> np.ndarray:
    """Vectorised ERD%; NaN where the reference is zero."""
    active = np.asarray(active, dtype=float)
    reference = np.asarray(reference, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (active - reference) / reference * 100.0
    return np.where(reference > 0, out, np.nan)


class StandardPeriod(str, Enum):
    R1 = "R1"
    R2 = "R2"
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"


class NovelPeriod(str, Enum):
    PRE_TRIGGER = "pre"
    POST1 = "post1"
    POST2 = "post2"
    POST3 = "post3"
    REACTION_TIME = "reaction"


NOVEL_PERIODS = tuple(NovelPeriod)
STANDARD_PERIOD_MS = 1000.0


def period_bounds(
    trial: Trial,
    period: StandardPeriod | NovelPeriod,
    timing: TrialTiming,
    fs: float,
    n_samples: int | None = None,
    baseline_offset_ms: float = 1000.0,
) -> tuple[int, int]:
    """Half-open sample range ``[start, stop)`` of an analysis period.

    Standard periods are 1 s long: R1 sits in the baseline segment at
    ``baseline_offset_ms`` from the recording start, R2 ends at cue1, A1 ends
    at cue2, A2 starts ``reaction_ms`` after cue2 and A3 starts at
    movement end. Novel periods are 500 ms long: pre-trigger ends at cue1,
    post1..post3 tile the post-trigger window, reaction starts at cue2.
    """
    one_s = ms_to_samples(STANDARD_PERIOD_MS, fs)
    if period is StandardPeriod.R1:
        start = ms_to_samples(baseline_offset_ms, fs)
        bounds = (start, start + one_s)
    elif period is StandardPeriod.R2:
        bounds = (trial.cue1 - one_s, trial.cue1)
    elif period is StandardPeriod.A1:
        bounds = (trial.cue2 - one_s, trial.cue2)
    elif period is StandardPeriod.A2:
        start = trial.cue2 + ms_to_samples(timing.reaction_ms, fs)
        bounds = (start, start + one_s)
    elif period is StandardPeriod.A3:
        bounds = (trial.movement_end, trial.movement_end + one_s)
    elif period is NovelPeriod.PRE_TRIGGER:
        bounds = (trial.cue1 - ms_to_samples(timing.pre_trigger_ms, fs), trial.cue1)
    elif period in (NovelPeriod.POST1, NovelPeriod.POST2, NovelPeriod.POST3):
        k = (NovelPeriod.POST1, NovelPeriod.POST2, NovelPeriod.POST3).index(period)
        step = timing.post_interval_samples(fs)
        bounds = (trial.cue1 + k * step, trial.cue1 + (k + 1) * step)
    elif period is NovelPeriod.REACTION_TIME:
        bounds = (trial.cue2, trial.cue2 + ms_to_samples(timing.reaction_ms, fs))
    else:
        raise TypeError(f"not an analysis period: {period!r}")
    if bounds[0] < 0 or (n_samples is not None and bounds[1] > n_samples):
        raise TruncatedTrialError(
            f"trial {trial.index}: {period.value} {bounds} outside recording"
        )
    return bounds


def trial_extent(trial: Trial, timing: TrialTiming, fs: float) -> tuple[int, int]:
    """Smallest range covering every per-trial analysis period of both methods."""
    periods = [p for p in StandardPeriod if p is not StandardPeriod.R1] + list(NovelPeriod)
    spans = [period_bounds(trial, p, timing, fs) for p in periods]
    return min(s for s, _ in spans), max(e for _, e in spans)
