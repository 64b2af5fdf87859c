import numpy as np
import pytest

from erdbench.errors import InsufficientDataError, NoReactiveBandError, TruncatedTrialError
from erdbench.dsp import design_bandpass
from erdbench.model import FrequencyBand, Recording, StandardPeriod, TrialSet, period_bounds
from erdbench.standard import (
    ALL_PAIRS,
    PeriodPair,
    StandardParams,
    analyze_standard,
    erd_for_pair,
    r1_bounds,
    select_individual_band,
    trial_windows,
)
from erdbench.synth import SmrSpec, SynthSpec, generate

FS = 512.0
BAND = FrequencyBand(11.5, 13.5)
R2A1 = PeriodPair.parse("R2A1")


def test_pairs():
    assert [p.label for p in ALL_PAIRS] == ["R1A1", "R1A2", "R1A3", "R2A1", "R2A2", "R2A3"]
    assert PeriodPair.parse("R1A3") == PeriodPair(StandardPeriod.R1, StandardPeriod.A3)
    with pytest.raises(ValueError):
        PeriodPair(StandardPeriod.A1, StandardPeriod.A2)


def _windows(n, amp, seed, f0=12.5):
    rng = np.random.default_rng(seed)
    t = np.arange(512) / FS
    return np.stack([amp * np.sin(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
                     + rng.standard_normal(512) for _ in range(n)])


def test_band_selection_identical_sets():
    w = _windows(20, 5.0, 0)
    with pytest.raises(NoReactiveBandError):
        select_individual_band(w, w, FS)


def test_band_selection_too_few_trials():
    with pytest.raises(InsufficientDataError):
        select_individual_band(_windows(7, 5, 0), _windows(20, 1, 1), FS)


def test_band_selection_finds_reactive_frequency():
    ib = select_individual_band(_windows(30, 8.0, 0), _windows(30, 2.0, 1), FS, "C3")
    assert ib.band.width == 2.0
    assert ib.band.lo_hz <= 12.5 <= ib.band.hi_hz
    assert ib.center_hz == ib.band.center
    assert not ib.fallback
    # reactive bins clear the bound
    sel = (ib.frequencies_hz >= ib.band.lo_hz) & (ib.frequencies_hz < ib.band.hi_hz)
    assert np.all(ib.difference[sel] > ib.bound[sel])


def test_band_selection_respects_search_range():
    with pytest.raises(NoReactiveBandError):
        select_individual_band(_windows(30, 8.0, 0), _windows(30, 2.0, 1), FS,
                               search_range_hz=(20.0, 30.0))


@pytest.fixture(scope="module")
def quiet():
    return generate(SynthSpec(n_trials=12, noise_rms_uv=0.5, seed=2))


@pytest.fixture(scope="module")
def noiseless():
    return generate(SynthSpec(n_trials=12, noise_rms_uv=0.0, seed=2))


@pytest.mark.xfail(strict=True, reason="the 615-tap band-pass spreads the cue step about "
                   "0.6 s each way, reaching into both 1 s windows; measured -47.86 on "
                   "every trial and seed")
def test_noiseless_half_power_drop_within_one_point(noiseless):
    _, ts, truth = noiseless
    res = erd_for_pair(ts, BAND, R2A1, "C3")
    ch = ts.recording.labels.index("C3")
    target = [100 * (truth.standard_ratio(t, ch, StandardPeriod.R2, StandardPeriod.A1) - 1)
              for t in ts.valid_trials]
    assert np.all(np.abs(res.erd_percent - np.array(target)) <= 1.0)


def _direct_filter_oracle(x, taps, bounds):
    """Mean power of the delay-compensated convolution, computed with np.convolve."""
    d = (len(taps) - 1) // 2
    y = np.convolve(x, taps)[d:d + len(x)]
    return np.array([np.mean(y[a:b] ** 2) for a, b in bounds])


def test_noiseless_half_power_drop_each_trial(noiseless):
    _, ts, truth = noiseless
    res = erd_for_pair(ts, BAND, R2A1, "C3")
    assert res.n_evaluated == 12 and res.n_excluded == 0
    assert res.identification_rate_percent == 100.0
    # the synthetic truth is -50; filter leakage across the step shrinks it a little
    assert np.all((res.erd_percent > -50) & (res.erd_percent < -46))
    # an independent full-signal convolution reproduces the same numbers
    filt = design_bandpass(BAND, FS)
    x = truth.smr[ts.recording.labels.index("C3")]
    for t, e in zip(ts.valid_trials, res.erd_percent):
        bounds = [period_bounds(t, p, ts.timing, FS) for p in (StandardPeriod.R2, StandardPeriod.A1)]
        r, a = _direct_filter_oracle(x, filt.taps, bounds)
        assert e == pytest.approx(100 * (a - r) / r, abs=1e-6)
    # average-trial and per-trial means agree for a single clean component
    assert res.average_trial_erd == pytest.approx(res.mean_erd, rel=0.01)


def test_no_modulation_never_identified():
    _, ts, _ = generate(SynthSpec(n_trials=10, noise_rms_uv=0.0, seed=2,
                                  smr=SmrSpec(erd_depth_percent=0, movement_depth_percent=0)))
    for pair in ALL_PAIRS:
        res = erd_for_pair(ts, BAND, pair, "C4")
        assert res.identification_rate_percent == 0.0
        assert np.all(np.abs(res.erd_percent) < 1.0)


def test_gain_invariance(noiseless):
    rec, ts, _ = noiseless
    scaled = TrialSet(rec.with_data(rec.data * 123.0), ts.trials, ts.timing)
    for pair in ("R1A2", "R2A1"):
        a = erd_for_pair(ts, BAND, PeriodPair.parse(pair), "Cz")
        b = erd_for_pair(scaled, BAND, PeriodPair.parse(pair), "Cz")
        np.testing.assert_allclose(a.erd_percent, b.erd_percent, rtol=1e-9, atol=1e-9)
        assert np.array_equal(a.identified, b.identified)


def test_threshold_monotone():
    _, ts, _ = generate(SynthSpec(n_trials=40, noise_rms_uv=SynthSpec.noise_for_snr(10, 10),
                                  seed=5))
    rates = [erd_for_pair(ts, BAND, R2A1, "C3", thr).identification_rate_percent
             for thr in (60, 40, 20)]
    assert rates[0] <= rates[1] <= rates[2]


def test_stationary_mean_erd_unbiased():
    spec = SynthSpec(n_trials=200, noise_rms_uv=SynthSpec.noise_for_snr(10, 10), seed=3,
                     smr=SmrSpec(erd_depth_percent=0))
    _, ts, _ = generate(spec)
    e = erd_for_pair(ts, BAND, R2A1, "C3").erd_percent
    assert abs(e.mean()) <= 2 * e.std(ddof=1) / np.sqrt(len(e))


def test_zero_reference_excluded():
    rec, ts, _ = generate(SynthSpec(n_trials=3, noise_rms_uv=0.0, seed=0))
    data = rec.data.copy()
    data[rec.labels.index("C3")] = 0.0
    flat = TrialSet(rec.with_data(data), ts.trials, ts.timing)
    res = erd_for_pair(flat, BAND, R2A1, "C3")
    assert res.n_excluded == 3 and res.n_evaluated == 0
    assert np.isnan(res.identification_rate_percent) and np.isnan(res.mean_erd)
    assert np.isnan(res.average_trial_erd)


def test_r1_windows_and_truncation():
    params = StandardParams()
    assert r1_bounds(FS, params) == [(512 + 512 * k, 1024 + 512 * k) for k in range(8)]
    rec = Recording(FS, ("C3",), np.zeros((1, 2000)))
    with pytest.raises(TruncatedTrialError):
        trial_windows(TrialSet(rec, ()), (), StandardPeriod.R1, "C3", params)


def test_analyze_standard_low_noise(quiet):
    # with no noise at all the log spectra of far-off leakage bins dominate the
    # selection, so a faint noise floor stands in for "clean"
    _, ts, _ = quiet
    res = analyze_standard(ts, pairs=(R2A1,))
    assert res.n_trials == 12
    for ch in ("C3", "Cz", "C4"):
        cell = res.cell("R2A1", ch)
        assert cell.band.band.overlaps(BAND)
        assert cell.result.identification_rate_percent == 100.0


def test_analyze_standard_falls_back_with_few_trials():
    _, ts, _ = generate(SynthSpec(n_trials=4, noise_rms_uv=1.0, seed=9))
    cell = analyze_standard(ts, pairs=(R2A1,)).cell(R2A1, "C3")
    assert cell.band.fallback and cell.band.band == BAND
