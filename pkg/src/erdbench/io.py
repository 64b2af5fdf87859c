"""Recording files, trial segmentation and report emission.

CsvMatrix layout::

    fs=512
    FC3,FC1,...,Pz,trigger
    1.25,-0.5,...,3.0,0
    ...

JsonLines layout: a header object ``{"fs": 512, "labels": [...]}`` followed
by one object per sample ``{"x": [...], "trigger": 0}``. A line
``{"event": code, "sample": index}`` may add a trigger out of band.
Samples are written with 17 significant digits, so finite values
round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError
from .model import (
    Recording,
    Trial,
    TrialSet,
    TrialTiming,
    Trigger,
    TriggerCode,
    ms_to_samples,
    trial_extent,
)


class RecordingFormat(str, Enum):
    CSV_MATRIX = "csv"
    JSON_LINES = "jsonl"

    @classmethod
    def for_path(cls, path) -> RecordingFormat:
        return cls.JSON_LINES if Path(path).suffix.lower() in (".jsonl", ".ndjson") \
            else cls.CSV_MATRIX


class ReportFormat(str, Enum):
    JSON = "json"
    CSV_TABLES = "csv"


def _rate(text: str, line: int) -> float:
    try:
        fs = float(text)
    except ValueError:
        raise FormatError(f"bad sample rate {text!r}", line=line) from None
    if not (math.isfinite(fs) and fs > 0):
        raise FormatError(f"sample rate must be positive, got {text}", line=line)
    return fs


def _triggers(codes: list[int], lines: list[int]) -> tuple[Trigger, ...]:
    out = []
    for i, (code, line) in enumerate(zip(codes, lines)):
        if code == 0:
            continue
        try:
            out.append(Trigger(i, TriggerCode(code)))
        except ValueError:
            raise FormatError(f"unknown trigger code {code}", line=line) from None
    return tuple(out)


def _finish(fs, labels, rows, codes, lines) -> Recording:
    if not rows:
        raise FormatError("no samples")
    data = np.array(rows, dtype=float).T
    try:
        return Recording(fs, tuple(labels), data, _triggers(codes, lines))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def _read_csv(path: Path) -> Recording:
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if not head:
            raise FormatError("empty file", line=1)
        if len(head) != 1 or not head[0].strip().startswith("fs="):
            raise FormatError("first row must be 'fs=<hz>'", line=1)
        fs = _rate(head[0].strip()[3:], 1)
        names = next(reader, None)
        if not names or names[-1].strip() != "trigger" or len(names) < 2:
            raise FormatError("second row must list channel labels then 'trigger'", line=2)
        labels = [n.strip() for n in names[:-1]]
        rows, codes, lines = [], [], []
        for line, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != len(names):
                raise FormatError(f"expected {len(names)} fields, got {len(row)}", line=line)
            try:
                rows.append([float(v) for v in row[:-1]])
                codes.append(int(row[-1]))
            except ValueError as exc:
                raise FormatError(str(exc), line=line) from None
            lines.append(line)
    return _finish(fs, labels, rows, codes, lines)


def _read_jsonl(path: Path) -> Recording:
    fs = labels = None
    rows, codes, lines, events = [], [], [], []
    with path.open() as fh:
        for line, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise FormatError(exc.msg, line=line) from None
            if fs is None:
                if not isinstance(obj, dict) or "fs" not in obj or "labels" not in obj:
                    raise FormatError("header must hold 'fs' and 'labels'", line=line)
                fs = _rate(str(obj["fs"]), line)
                labels = [str(v) for v in obj["labels"]]
                continue
            if isinstance(obj, dict) and "event" in obj:
                try:
                    events.append((int(obj["sample"]), int(obj["event"]), line))
                except (KeyError, TypeError, ValueError):
                    raise FormatError("event needs integer 'event' and 'sample'",
                                      line=line) from None
                continue
            x = obj.get("x") if isinstance(obj, dict) else None
            if not isinstance(x, list) or len(x) != len(labels):
                raise FormatError(f"expected {len(labels)} samples in 'x'", line=line)
            try:
                rows.append([float(v) for v in x])
                codes.append(int(obj.get("trigger", 0)))
            except (TypeError, ValueError) as exc:
                raise FormatError(str(exc), line=line) from None
            lines.append(line)
    if fs is None:
        raise FormatError("empty file", line=1)
    for sample, code, line in events:
        if not 0 <= sample < len(rows):
            raise FormatError(f"trigger at sample {sample} beyond {len(rows)} samples",
                              line=line)
        if codes[sample]:
            raise FormatError(f"second trigger at sample {sample}", line=line)
        codes[sample] = code
        lines[sample] = line
    return _finish(fs, labels, rows, codes, lines)


def load_recording(path, fmt: RecordingFormat | str | None = None) -> Recording:
    """Read a recording; the format defaults to the file extension.

    Raises
    ------
    FormatError
        Malformed content, with the 1-based line number when known.
    OSError
        The file cannot be opened.
    """
    path = Path(path)
    fmt = RecordingFormat(fmt) if fmt is not None else RecordingFormat.for_path(path)
    return _read_jsonl(path) if fmt is RecordingFormat.JSON_LINES else _read_csv(path)


def _codes(recording: Recording) -> np.ndarray:
    codes = np.zeros(recording.n_samples, dtype=int)
    for t in recording.triggers:
        codes[t.sample_index] = int(t.code)
    return codes


def save_recording(recording: Recording, path, fmt: RecordingFormat | str | None = None):
    path = Path(path)
    fmt = RecordingFormat(fmt) if fmt is not None else RecordingFormat.for_path(path)
    codes = _codes(recording)
    data = recording.data.T
    with path.open("w", newline="") as fh:
        if fmt is RecordingFormat.JSON_LINES:
            fh.write(json.dumps({"fs": recording.sample_rate_hz,
                                 "labels": list(recording.labels)}) + "\n")
            for row, code in zip(data, codes):
                # json uses repr, the shortest exact form of each double
                fh.write(json.dumps({"x": row.tolist(), "trigger": int(code)}) + "\n")
        else:
            fh.write(f"fs={recording.sample_rate_hz:.17g}\n")
            fh.write(",".join(recording.labels) + ",trigger\n")
            for row, code in zip(data, codes):
                fh.write(",".join(f"{v:.17g}" for v in row) + f",{code}\n")


def segment_trials(recording: Recording, timing: TrialTiming = TrialTiming()) -> TrialSet:
    """Group triggers into trials, one per TrialStart.

    A trial missing a landmark gets the nominal timing for it and is marked
    invalid; so is a trial whose analysis periods run past the recording.
    Sample data is never touched.
    """
    fs = recording.sample_rate_hz
    groups: list[dict] = []
    for trig in recording.triggers:
        if trig.code is TriggerCode.TRIAL_START:
            groups.append({TriggerCode.TRIAL_START: trig.sample_index})
        elif groups and trig.code not in groups[-1]:
            groups[-1][trig.code] = trig.sample_index

    pre = ms_to_samples(timing.pre_trigger_ms, fs)
    post = ms_to_samples(timing.post_trigger_ms, fs)
    reaction = ms_to_samples(timing.reaction_ms, fs)
    trials = []
    for k, g in enumerate(groups):
        start = g[TriggerCode.TRIAL_START]
        complete = len(g) == 4
        cue1 = g.get(TriggerCode.CUE1, start + pre)
        cue2 = g.get(TriggerCode.CUE2, cue1 + post)
        end = g.get(TriggerCode.MOVEMENT_END, cue2 + reaction)
        try:
            trial = Trial(k, start, cue1, cue2, end, valid=complete)
        except ValueError:
            trial = Trial(k, start, start + pre, start + pre + post,
                          start + pre + post + reaction, valid=False)
        lo, hi = trial_extent(trial, timing, fs)
        if lo < 0 or hi > recording.n_samples:
            trial = Trial(k, trial.trial_start, trial.cue1, trial.cue2, trial.movement_end,
                          valid=False)
        trials.append(trial)
    return TrialSet(recording, tuple(trials), timing)


def _fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{round(v, 2) + 0.0:.2f}"  # + 0.0 folds -0.00 into 0.00


def write_table(path, header, rows):
    """Write one CSV table; numeric cells with two decimals, NaN as empty."""
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for label, values in rows:
            fh.write(",".join([label] + [_fmt(v) for v in values]) + "\n")


def emit_report(report, path, fmt: ReportFormat | str = ReportFormat.JSON):
    """Write a report as one JSON document or as a directory of CSV tables.

    ``report`` needs ``to_dict()`` and ``tables()``; the latter maps a file
    stem to ``(header, rows)``.
    """
    fmt = ReportFormat(fmt)
    path = Path(path)
    if fmt is ReportFormat.JSON:
        path.write_text(json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n")
        return
    path.mkdir(parents=True, exist_ok=True)
    for stem, (header, rows) in report.tables().items():
        write_table(path / f"{stem}.csv", header, rows)


def write_ground_truth(truth, trialset: TrialSet, path):
    Path(path).write_text(json.dumps(truth.to_dict(trialset.trials)) + "\n")


def sidecar_path(recording_path) -> Path:
    p = Path(recording_path)
    return p.with_name(p.stem + ".truth.json")
