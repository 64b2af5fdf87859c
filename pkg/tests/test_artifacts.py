import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erdbench.artifacts import (
    ArtifactParams,
    clean_channels,
    detect_artifact_spans,
    flag_trials,
    rolling_threshold,
    suppress,
)
from erdbench.errors import InvariantError
from erdbench.model import Recording, Trial, TrialSet
from erdbench.synth import SynthSpec, generate, pink_noise, polarization_transient

FS = 512.0


def clean_fixture(seed=0, seconds=8):
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * FS)) / FS
    return pink_noise(len(t), FS, 10.0, rng) + 10 * np.sin(2 * np.pi * 12.5 * t + 0.3)


def corrupted_fixture(at=2000, peak=500.0, seed=0):
    x = clean_fixture(seed)
    return x, x + polarization_transient(len(x), at, peak, 20.0, FS)


def test_zero_signal_has_no_spans():
    assert detect_artifact_spans(np.zeros(1000), ArtifactParams(), FS) == []
    fixed = ArtifactParams(derivative_threshold_uv_per_sample=1.0)
    assert detect_artifact_spans(np.zeros(1000), fixed, FS) == []


def test_short_signal_rejected():
    with pytest.raises(ValueError):
        detect_artifact_spans(np.zeros(1))


def test_params_validation():
    with pytest.raises(ValueError):
        ArtifactParams(derivative_threshold_uv_per_sample=0)
    with pytest.raises(ValueError):
        ArtifactParams(min_consecutive_samples=0)
    with pytest.raises(ValueError):
        ArtifactParams(max_suppression_ms=-1)


def test_single_artifact_single_span_fixed_threshold():
    at = 2000
    clean, bad = corrupted_fixture(at)
    # oracle: first-difference scan of the clean twin
    thr = 5 * np.max(np.abs(np.diff(clean)))
    assert np.max(np.abs(np.diff(bad))) > 10 * np.max(np.abs(np.diff(clean)))
    spans = detect_artifact_spans(bad, ArtifactParams(derivative_threshold_uv_per_sample=thr), FS)
    assert len(spans) == 1
    a, b = spans[0]
    assert a <= at < b
    assert detect_artifact_spans(
        clean, ArtifactParams(derivative_threshold_uv_per_sample=thr), FS) == []


def test_span_ends_are_zero_crossings():
    _, bad = corrupted_fixture()
    (a, b), = detect_artifact_spans(bad, ArtifactParams(), FS)
    # crossing k lies between samples k-1 and k
    assert bad[a - 1] * bad[a] <= 0
    assert b == len(bad) or bad[b - 1] * bad[b] <= 0
    # nearest crossings: none between the span start and the flagged run, nor
    # between the run's end and the span stop
    d = np.abs(np.diff(bad))
    above = d > rolling_threshold(np.diff(bad), FS, ArtifactParams())
    first = last = int(np.flatnonzero(above)[0])
    while last + 1 < len(d) and above[last + 1]:
        last += 1
    crossings = np.flatnonzero(bad[:-1] * bad[1:] <= 0) + 1
    assert not np.any((crossings > a) & (crossings <= first))
    assert not np.any((crossings > last + 1) & (crossings < b))


def test_span_capped():
    x = np.concatenate([np.zeros(10), 100 + 50 * np.arange(3000.0)])  # never crosses back
    params = ArtifactParams(derivative_threshold_uv_per_sample=1.0, max_suppression_ms=100)
    spans = detect_artifact_spans(x, params, FS)
    assert spans and all(b - a <= 51 for a, b in spans)


def test_suppress_identity_without_spans():
    x = clean_fixture()
    res = suppress(x, [])
    assert np.array_equal(res.cleaned, x)
    assert res.spans == () and res.feedback_suspended == ()


def test_suppress_flattens_span_below_threshold():
    clean, bad = corrupted_fixture()
    params = ArtifactParams()
    spans = detect_artifact_spans(bad, params, FS)
    res = suppress(bad, spans, params.taper_samples)
    assert res.feedback_suspended == (True,)
    (a, b), = res.spans
    assert not res.cleaned[a:b].any()
    taper = params.taper_samples
    seg = res.cleaned[a - taper - 1:b + taper + 1]
    d = np.abs(np.diff(seg))
    thr = rolling_threshold(np.diff(bad), FS, params)[a - taper - 1:b + taper]
    assert np.all(d < thr)
    # taper-induced bound: the ramp step times the local amplitude plus the signal's own step
    ramp_step = np.pi / (2 * (taper + 1))
    local = np.max(np.abs(bad[a - taper - 1:a])) if a > taper else 0
    own = np.max(np.abs(np.diff(bad[a - taper - 1:a + 1])))
    assert np.max(d[:taper + 2]) <= ramp_step * local + own + 1e-9


def test_suppress_locality_bit_identical():
    _, bad = corrupted_fixture()
    spans = detect_artifact_spans(bad, ArtifactParams(), FS)
    res = suppress(bad, spans, 16)
    (a, b), = spans
    outside = np.ones(len(bad), bool)
    outside[a - 16:b + 16] = False
    assert np.array_equal(res.cleaned[outside], bad[outside])


def test_suppress_idempotent():
    _, bad = corrupted_fixture()
    p = ArtifactParams()
    once = suppress(bad, detect_artifact_spans(bad, p, FS), p.taper_samples).cleaned
    spans2 = detect_artifact_spans(once, p, FS)
    twice = suppress(once, spans2, p.taper_samples).cleaned
    assert spans2 == []
    assert np.array_equal(once, twice)


def test_suppress_overlapping_spans_is_internal_error():
    with pytest.raises(InvariantError):
        suppress(np.ones(100), [(10, 30), (20, 40)])


def test_suppress_at_edges():
    x = np.ones(50)
    res = suppress(x, [(0, 5), (45, 50)], taper_samples=8)
    assert not res.cleaned[:5].any() and not res.cleaned[45:].any()
    assert np.all(res.cleaned[5:13] < 1) and res.cleaned[25] == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_clean_noise_rarely_flagged(seed):
    x = pink_noise(4 * int(FS), FS, 10.0, np.random.default_rng(seed))
    assert detect_artifact_spans(x, ArtifactParams(), FS) == []


def test_clean_channels_and_flag_trials():
    rec, ts, _ = generate(SynthSpec(n_trials=4, seed=2))
    t = ts.trials[1]
    data = rec.data.copy()
    data[3] += polarization_transient(rec.n_samples, t.cue1 + 100, 500.0, 20.0, FS)
    cleaned, spans = clean_channels(data, FS)
    assert [len(s) for s in spans].count(1) == 1 and len(spans[3]) == 1
    flagged = flag_trials(TrialSet(rec.with_data(cleaned), ts.trials, ts.timing), spans)
    assert [tr.valid for tr in flagged] == [True, False, True, True]
    assert flagged.trials[1].artifact_spans == tuple(spans[3])


def test_flag_trials_keeps_invalid():
    rec = Recording(FS, ("a",), np.zeros((1, 20000)))
    ts = TrialSet(rec, (Trial(0, 6000, 6256, 7024, 7400, valid=False),))
    assert not flag_trials(ts, [[]]).trials[0].valid
