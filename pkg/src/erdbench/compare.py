"""Run both detectors on one trial set; tabulate results and benchmark cost."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .artifacts import clean_channels, flag_trials
from .config import AnalysisConfig
from .dsp import (
    FilterMode,
    StreamingFir,
    apply_filter,
    design_bandpass,
    fft_macs,
    fir_macs,
    log_periodograms,
)
from .errors import EmptyReportError
from .model import FrequencyBand, StandardPeriod, TrialSet, ms_to_samples, period_bounds
from .novel import (
    GROUPS,
    BandBank,
    TRANSITION_ROWS,
    TRANSITIONS,
    build_differentials,
    group_identify,
    interval_samples,
    ratio_profile,
)
from .standard import ALL_PAIRS, analyze_standard

ALIGNED_PAIR = "R2A1"
ALIGNED_TRANSITION = "post1/pre"


def _num(v) -> float | None:
    v = float(v)
    return None if math.isnan(v) else round(v, 10)


@dataclass(frozen=True, eq=False)
class DetectionReport:
    """Both methods' results in table-ready form.

    ``standard`` rows are keyed by (pair, channel); ``novel`` holds arrays
    indexed (group, band, transition). NaN marks cells with nothing to
    average.
    """

    threshold_percent: float
    n_trials: int
    n_standard: int
    n_novel: int
    exclusions: dict = field(default_factory=dict)
    channels: tuple[str, ...] = ()
    pairs: tuple[str, ...] = ()
    standard: dict = field(default_factory=dict)
    bands: tuple[FrequencyBand, ...] = ()
    report_band: int = 0
    novel_identification: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 4)))
    novel_mean: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 4)))
    novel_std: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 4)))
    novel_count: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 4), dtype=int))

    @classmethod
    def empty(cls, threshold_percent: float = 40.0) -> DetectionReport:
        return cls(threshold_percent, 0, 0, 0)

    def aligned(self) -> dict:
        """Standard R2A1 per channel next to novel post1/pre per group (report band)."""
        out = {"standard": {}, "novel": {}}
        for ch in self.channels:
            cell = self.standard.get((ALIGNED_PAIR, ch))
            if cell:
                out["standard"][ch] = cell["identification_percent"]
        if self.bands:
            t = TRANSITIONS.index(ALIGNED_TRANSITION)
            for g, group in enumerate(GROUPS):
                out["novel"][group.value] = float(self.novel_identification[g, self.report_band, t])
        return out

    def to_dict(self) -> dict:
        std_cells = [
            {"pair": p, "channel": c, **{k: (_num(v) if isinstance(v, float) else v)
                                         for k, v in self.standard[(p, c)].items()}}
            for p in self.pairs for c in self.channels if (p, c) in self.standard
        ]
        novel = []
        for b, band in enumerate(self.bands):
            for t, name in enumerate(TRANSITIONS):
                for g, group in enumerate(GROUPS):
                    novel.append({
                        "band": [band.lo_hz, band.hi_hz], "transition": name,
                        "row": TRANSITION_ROWS[t], "group": group.value,
                        "identification_percent": _num(self.novel_identification[g, b, t]),
                        "mean_erd": _num(self.novel_mean[g, b, t]),
                        "std_erd": _num(self.novel_std[g, b, t]),
                        "n_identified": int(self.novel_count[g, b, t]),
                    })
        aligned = self.aligned()
        return {
            "threshold_percent": self.threshold_percent,
            "n_trials": self.n_trials,
            "n_trials_standard": self.n_standard,
            "n_trials_novel": self.n_novel,
            "exclusions": self.exclusions,
            "report_band": ([self.bands[self.report_band].lo_hz,
                             self.bands[self.report_band].hi_hz] if self.bands else None),
            "standard": std_cells,
            "novel": novel,
            "aligned": {k: {n: _num(v) for n, v in d.items()} for k, d in aligned.items()},
        }

    def tables(self) -> dict:
        """CSV layouts: pairs x channels for the standard method, transition
        rows x groups (report band) for the novel one."""
        def split(name):
            return [h for c in self.channels for h in (f"{c} {name}", f"{c} std")]

        t1, t2, t3 = [], [], []
        for p in self.pairs:
            cells = [self.standard.get((p, c)) for c in self.channels]
            if not all(cells):
                continue
            t1.append((p, [v for c in cells for v in (c["individual_frequency_hz"], 0.0)]))
            t2.append((p, [c["identification_percent"] for c in cells]))
            t3.append((p, [v for c in cells for v in (c["mean_erd"], c["std_erd"])]))
        groups = [g.value for g in GROUPS]
        t4, t5 = [], []
        if self.bands:
            b = self.report_band
            for t, row in enumerate(TRANSITION_ROWS):
                t4.append((row, list(self.novel_identification[:, b, t])))
                t5.append((row, [v for g in range(len(GROUPS))
                                 for v in (self.novel_mean[g, b, t], self.novel_std[g, b, t])]))
        group_split = [h for g in groups for h in (f"{g} mean", f"{g} std")]
        return {
            "table1": (["pair"] + split("mean"), t1),
            "table2": (["pair", *self.channels], t2),
            "table3": (["pair"] + split("mean"), t3),
            "table4": (["interval", *groups], t4),
            "table5": (["interval"] + group_split, t5),
        }


def prepare_trials(trialset: TrialSet, config: AnalysisConfig) -> tuple[TrialSet, int]:
    """Suppress artifacts (if configured) and invalidate hit trials.

    Returns the cleaned trial set and the number of trials lost to artifacts.
    """
    if not config.suppress_artifacts or len(trialset) == 0:
        return trialset, 0
    rec = trialset.recording
    cleaned, spans = clean_channels(rec.data, rec.sample_rate_hz, config.artifact)
    flagged = flag_trials(TrialSet(rec.with_data(cleaned), trialset.trials, trialset.timing),
                          spans)
    lost = sum(1 for a, b in zip(trialset, flagged) if a.valid and not b.valid)
    return flagged, lost


def _usable(trialset: TrialSet):
    """Valid trials whose standard periods all fit the recording."""
    n, fs = trialset.recording.n_samples, trialset.fs
    keep = []
    for t in trialset.valid_trials:
        try:
            for p in StandardPeriod:
                if p is not StandardPeriod.R1:
                    period_bounds(t, p, trialset.timing, fs, n)
        except IndexError:
            continue
        keep.append(t)
    return tuple(keep)


METHODS = ("standard", "novel")


def run_comparison(trialset: TrialSet, config: AnalysisConfig = AnalysisConfig(),
                   pairs=ALL_PAIRS, methods=METHODS) -> DetectionReport:
    """Both methods on the same trials under one shared validity rule.

    ``methods`` can restrict the run to one of them; the other half of the
    report is then left empty.

    Raises
    ------
    EmptyReportError
        Trials exist but none survives validation.
    """
    thr = config.identification_threshold_percent
    if len(trialset) == 0:
        return DetectionReport.empty(thr)
    prepared, lost = prepare_trials(trialset, config)
    usable = _usable(prepared)
    if not usable:
        raise EmptyReportError(f"all {len(trialset)} trials are invalid")
    ts = prepared.with_trials(usable)
    filt = config.filter

    if "standard" not in methods:
        pairs = ()
    std = analyze_standard(ts, thr, config.standard, pairs, filt.transition_width_hz,
                           filt.stopband_atten_db)
    standard = {}
    for (label, ch), cell in std.cells.items():
        r = cell.result
        standard[(label, ch)] = {
            "band": [r.band.lo_hz, r.band.hi_hz],
            "individual_frequency_hz": float(cell.band.center_hz),
            "fallback_band": bool(cell.band.fallback),
            "identification_percent": float(r.identification_rate_percent),
            "mean_erd": float(r.mean_erd),
            "std_erd": float(r.std_erd),
            "n_identified": int(r.identified.sum()),
            "n_evaluated": r.n_evaluated,
            "n_zero_reference": r.n_excluded,
            "average_trial_erd": float(r.average_trial_erd),
        }

    bank = config.band_bank if "novel" in methods else BandBank(())
    diffs = build_differentials(ts.recording, config.pairs, config.montage, config.strict_pairs)
    profile = ratio_profile(usable, diffs, bank, ts.timing, ts.fs,
                            filt.transition_width_hz, filt.stopband_atten_db)
    dec = group_identify(profile, config.threshold_ratio)
    mean, sd, count = dec.identified_erd_stats()
    try:
        report_band = bank.index(FrequencyBand(*config.report_band))
    except KeyError:
        report_band = 0
    n_novel = int(dec.evaluable.any(axis=(1, 2, 3)).sum())

    exclusions = {
        "invalid_before_analysis": sum(1 for t in trialset if not t.valid),
        "artifact": lost,
        "truncated": len(prepared.valid_trials) - len(usable),
        "standard_zero_reference": int(sum(c["n_zero_reference"] for c in standard.values())),
        "novel_degenerate_ratios": int(profile.degenerate.sum()),
    }
    return DetectionReport(
        threshold_percent=thr, n_trials=len(trialset), n_standard=std.n_trials, n_novel=n_novel,
        exclusions=exclusions,
        channels=tuple(config.standard.channels) if pairs else (),
        pairs=tuple(p.label for p in pairs), standard=standard, bands=tuple(bank),
        report_band=report_band, novel_identification=dec.identification_percent(),
        novel_mean=mean, novel_std=sd, novel_count=count,
    )


# ---------------------------------------------------------------- benchmark

@dataclass(frozen=True)
class MethodBench:
    """Per-trial stage wall times (ms, median of repetitions) and cost counts."""

    stage_ms: dict
    compute_ms: float
    group_delay_ms: float
    latency_ms: float
    macs_total: int
    macs_per_unit: int
    units: int
    unit: str


@dataclass(frozen=True)
class BenchResult:
    standard: MethodBench
    novel: MethodBench
    repetitions: int
    n_trials: int

    def to_dict(self) -> dict:
        return {"repetitions": self.repetitions, "n_trials": self.n_trials,
                "standard": vars(self.standard), "novel": vars(self.novel)}


def standard_epoch_samples(trialset: TrialSet, filter_length: int) -> int:
    """Longest padded epoch filtered offline per trial: every non-baseline
    period plus one filter length on each side."""
    longest = 0
    for t in trialset.valid_trials:
        spans = [period_bounds(t, p, trialset.timing, trialset.fs)
                 for p in StandardPeriod if p is not StandardPeriod.R1]
        longest = max(longest, max(b for _, b in spans) - min(a for a, _ in spans))
    return longest + 2 * filter_length


def standard_unit_macs(epoch_samples: int, filter_length: int, fs: float,
                       n_windows: int = 2) -> dict:
    """Offline cost for one channel in one band over a full trial.

    Zero-phase filtering and squaring of the epoch plus the band-selection
    spectra (one Hann-windowed FFT per 1 s window).
    """
    nperseg = ms_to_samples(1000, fs)
    nfft = 2 * nperseg
    return {
        "filter": fir_macs(epoch_samples, filter_length),
        "power": epoch_samples,
        "spectra": n_windows * (fft_macs(nfft) + nperseg),
    }


def novel_unit_macs(n_interval: int, filter_length: int) -> dict:
    """Streaming cost for one differential signal in one band over one interval."""
    return {"filter": fir_macs(n_interval, filter_length), "energy": n_interval, "ratio": 1}


def _median_ms(fn, repetitions: int) -> float:
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1000)
    return statistics.median(times)


def run_bench(trialset: TrialSet, config: AnalysisConfig = AnalysisConfig(),
              repetitions: int | None = None, max_trials: int = 10) -> BenchResult:
    """Time each stage of both methods and count multiply-accumulates.

    Filters are designed before timing starts. Decision latency is the
    filter group delay plus the measured compute for one decision: one
    streamed interval for the novel method, one trial for the standard one.
    """
    repetitions = config.bench_repetitions if repetitions is None else repetitions
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    trials = _usable(trialset)[:max_trials]
    if not trials:
        raise EmptyReportError("no usable trials to benchmark")
    ts = trialset.with_trials(trials)
    fs, timing = ts.fs, ts.timing
    tw, att = config.filter.transition_width_hz, config.filter.stopband_atten_db
    rec = ts.recording

    # standard: one pair x channel cell per (pair, channel), fixed band
    band = FrequencyBand(*config.standard.default_band)
    sfilt = design_bandpass(band, fs, tw, att)
    pairs = ALL_PAIRS
    chans = config.standard.channels
    epoch = standard_epoch_samples(ts, sfilt.length)
    idx = [rec.index(c) for c in chans]

    def epoch_of(t):
        lo = max(0, t.cue1 - ms_to_samples(1000, fs) - sfilt.length)
        return rec.data[idx, lo:lo + epoch]

    epochs = [epoch_of(t) for t in trials]
    filtered = [apply_filter(sfilt, e, FilterMode.ZERO_PHASE) for e in epochs]
    powers = [f ** 2 for f in filtered]
    one = ms_to_samples(1000, fs)

    def s_filter():
        for e in epochs:
            for _ in pairs:
                apply_filter(sfilt, e, FilterMode.ZERO_PHASE)

    def s_spectra():
        for e in epochs:
            for _ in pairs:
                log_periodograms(e[:, :2 * one].reshape(-1, one), fs)

    def s_decision():
        for p in powers:
            for _ in pairs:
                a = p[:, -sfilt.length - one:-sfilt.length].mean(axis=1)
                r = p[:, sfilt.length:sfilt.length + one].mean(axis=1)
                ((a - r) / r * 100 < -config.identification_threshold_percent).sum()

    n = len(trials)
    s_stage = {k: _median_ms(f, repetitions) / n
               for k, f in (("filtering", s_filter), ("spectra", s_spectra),
                            ("decision", s_decision))}
    s_compute = sum(s_stage.values())
    s_unit = sum(standard_unit_macs(epoch, sfilt.length, fs).values())
    s_units = len(pairs) * len(chans)
    standard = MethodBench(s_stage, s_compute, sfilt.group_delay_ms,
                           sfilt.group_delay_ms + s_compute, s_unit * s_units, s_unit,
                           s_units, "channel-band per trial")

    # novel: stream one interval block through every band's filter
    bank = config.band_bank
    filters = [design_bandpass(b, fs, tw, att) for b in bank]
    diffs = build_differentials(rec, config.pairs, config.montage, config.strict_pairs)
    n_int = interval_samples(timing, fs)
    blocks = [diffs.data[:, t.cue1:t.cue1 + n_int] for t in trials]
    streams = [StreamingFir(f, len(diffs.pairs)) for f in filters]
    outs = [[s.process(b) for s in streams] for b in blocks]
    groups = diffs.groups
    prev = np.ones((len(diffs.pairs), len(filters)))

    def n_filter():
        for b in blocks:
            for s in streams:
                s.process(b)

    def n_energy():
        for o in outs:
            [np.einsum("ij,ij->i", y, y) for y in o]

    def n_decision():
        for o in outs:
            e = np.stack([np.einsum("ij,ij->i", y, y) for y in o], axis=1)
            r = e / prev
            for g in GROUPS:
                r[groups == g.value].mean(axis=0) < config.threshold_ratio

    n_stage = {k: _median_ms(f, repetitions) / n
               for k, f in (("filtering", n_filter), ("energy", n_energy),
                            ("decision", n_decision))}
    n_compute = sum(n_stage.values())
    delay = max(f.group_delay_ms for f in filters)
    longest = max(f.length for f in filters)
    n_unit = sum(novel_unit_macs(n_int, longest).values())
    n_units = len(diffs.pairs) * len(filters)
    n_total = sum(sum(novel_unit_macs(n_int, f.length).values()) for f in filters) \
        * len(diffs.pairs)
    novel = MethodBench(n_stage, n_compute, delay, delay + n_compute, n_total, n_unit,
                        n_units, "signal-band per interval")
    return BenchResult(standard, novel, repetitions, n)
