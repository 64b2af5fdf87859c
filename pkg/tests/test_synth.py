import numpy as np
import pytest

from erdbench.dsp import window_energy
from erdbench.model import NOVEL_PERIODS, Hemisphere, NovelPeriod, StandardPeriod, period_bounds
from erdbench.synth import (
    ArtifactSpec,
    SmrSpec,
    SynthSpec,
    generate,
    inject_polarization_artifact,
    pink_noise,
)


def smr_window_ratio(truth, ts, ch, num, den):
    x = truth.smr[ch]
    out = []
    for t in ts:
        a = period_bounds(t, num, ts.timing, ts.fs)
        b = period_bounds(t, den, ts.timing, ts.fs)
        out.append(window_energy(x, a) / window_energy(x, b))
    return np.array(out)


def test_no_modulation_all_ratios_one():
    spec = SynthSpec(n_trials=5, noise_rms_uv=0, smr=SmrSpec(erd_depth_percent=0), seed=1)
    rec, ts, truth = generate(spec)
    assert np.all(truth.novel_ratios == 1.0)
    assert np.array_equal(rec.data, truth.smr)
    for ch in range(rec.n_channels):
        assert truth.standard_ratio(ts.trials[0], ch, StandardPeriod.R2, StandardPeriod.A1) == 1


def test_onset_ratio_exact_for_whole_cycle_carrier():
    # 12 Hz fits exactly 6 cycles in 500 ms, so window energy is a**2 N / 2 exactly
    spec = SynthSpec(n_trials=6, noise_rms_uv=0, seed=4,
                     smr=SmrSpec(center_hz=12.0, erd_depth_percent=50))
    rec, ts, truth = generate(spec)
    for ch in range(rec.n_channels):
        r = smr_window_ratio(truth, ts, ch, NovelPeriod.POST1, NovelPeriod.PRE_TRIGGER)
        np.testing.assert_allclose(r, 0.5, rtol=1e-6)
        np.testing.assert_allclose(truth.novel_ratios[:, ch, 0], r, rtol=1e-6)


def test_onset_ratio_default_carrier_close():
    spec = SynthSpec(n_trials=6, noise_rms_uv=0, seed=4)
    rec, ts, truth = generate(spec)
    r = smr_window_ratio(truth, ts, 0, NovelPeriod.POST1, NovelPeriod.PRE_TRIGGER)
    # 6.25 cycles per window: the leftover partial cycle moves each window's
    # energy by at most 1 / (N sin(w)) relative, about 2.6 %, so the ratio by 5.3 %
    w = 2 * np.pi * 12.5 / 512
    bound = 1 / (256 * np.sin(w))
    assert np.all(np.abs(r / 0.5 - 1) <= (1 + bound) / (1 - bound) - 1)
    assert np.all(truth.novel_ratios[:, :, 0] == pytest.approx(0.5))


def test_truth_ratios_telescoping_and_positive():
    _, _, truth = generate(SynthSpec(n_trials=5, seed=3, smr=SmrSpec(movement_depth_percent=70)))
    assert np.all(truth.novel_ratios > 0)
    prod = truth.novel_ratios.prod(axis=-1)
    np.testing.assert_allclose(prod, 0.3, rtol=1e-12)  # reaction (movement) vs rest


def test_deterministic_and_seed_sensitive():
    a = generate(SynthSpec(n_trials=3, seed=7))[0]
    b = generate(SynthSpec(n_trials=3, seed=7))[0]
    c = generate(SynthSpec(n_trials=3, seed=8))[0]
    assert np.array_equal(a.data, b.data)
    assert a.triggers == b.triggers
    assert not np.array_equal(a.data, c.data)


def test_noise_does_not_change_truth():
    quiet = generate(SynthSpec(n_trials=4, noise_rms_uv=0, seed=5))
    loud = generate(SynthSpec(n_trials=4, noise_rms_uv=30, seed=5))
    assert np.array_equal(quiet[2].novel_ratios, loud[2].novel_ratios)
    assert np.array_equal(quiet[2].smr, loud[2].smr)
    assert np.array_equal(quiet[2].smr, quiet[0].data)


def test_unaffected_hemisphere_has_flat_envelope():
    spec = SynthSpec(n_trials=3, seed=1, smr=SmrSpec(affected_hemispheres=(Hemisphere.LEFT,)))
    rec, _, truth = generate(spec)
    right = [i for i, e in enumerate(spec.montage.electrodes) if e.hemisphere is Hemisphere.RIGHT]
    assert np.all(truth.envelope[right] == 1.0)
    assert np.all(truth.novel_ratios[:, right] == 1.0)


def test_trial_ledger_matches_triggers():
    rec, ts, _ = generate(SynthSpec(n_trials=10, seed=0))
    assert len(rec.triggers) == 40
    fs = rec.sample_rate_hz
    for t in ts:
        assert t.cue1 - t.trial_start == 256 and t.cue2 - t.cue1 == 768
        assert 256 + 256 <= t.movement_end - t.cue2 <= 256 + 379
    for t, nxt in zip(ts.trials, ts.trials[1:]):
        assert nxt.trial_start - t.movement_end >= 1000 * fs / 1000


def test_pink_noise_rms_and_spectrum_slope():
    x = pink_noise(2 ** 16, 512.0, 10.0, np.random.default_rng(0))
    assert np.sqrt(np.mean(x ** 2)) == pytest.approx(10.0)
    p = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(len(x), 1 / 512)
    low = p[(f > 4) & (f < 8)].mean()
    high = p[(f > 16) & (f < 32)].mean()
    assert low / high == pytest.approx(4.0, rel=0.25)  # 1/f power
    assert p[np.abs(f - 50) < 0.4].max() < 1e-12 * p.max()  # notch
    assert p[f > 61].max() < 1e-12 * p.max()


def test_spec_validation():
    with pytest.raises(ValueError):
        SmrSpec(erd_depth_percent=100)
    with pytest.raises(ValueError):
        SynthSpec(fs=20.0)
    with pytest.raises(ValueError):
        ArtifactSpec(probability=1.5)


def test_snr_helper():
    assert SynthSpec.noise_for_snr(10.0, 10.0) == pytest.approx(np.sqrt(5.0))


def test_inject_artifact_into_zero_signal():
    spec = SynthSpec(n_trials=1, noise_rms_uv=0, smr=SmrSpec(rest_amplitude_uv=0), seed=0)
    rec, _, _ = generate(spec)
    out = inject_polarization_artifact(rec, "C3", 3000, 500.0, 20.0)
    x = out.channel("C3")
    assert np.max(np.abs(x)) == 500.0 and x[3000] == 500.0
    assert not rec.data.any()  # input unmodified
    assert np.array_equal(inject_polarization_artifact(rec, "C3", 3000, 0.0, 20.0).data, rec.data)
    with pytest.raises(KeyError):
        inject_polarization_artifact(rec, "X9", 3000, 500.0, 20.0)
    with pytest.raises(ValueError):
        inject_polarization_artifact(rec, "C3", rec.n_samples, 500.0, 20.0)


def test_inject_artifact_derivative_and_additivity():
    spec = SynthSpec(n_trials=2, noise_rms_uv=10.0, smr=SmrSpec(rest_amplitude_uv=0), seed=3)
    rec, _, _ = generate(spec)
    out = inject_polarization_artifact(rec, "Cz", 6000, 500.0, 20.0)
    clean = rec.channel("Cz")
    assert np.max(np.abs(np.diff(out.channel("Cz")))) > 10 * np.max(np.abs(np.diff(clean)))
    k = np.arange(rec.n_samples - 6000)
    transient = np.zeros(rec.n_samples)
    transient[6000:] = 500.0 * np.exp(-k / (20.0 * 512 / 1000))
    # float addition then subtraction restores to rounding level
    np.testing.assert_allclose(out.channel("Cz") - transient, clean, rtol=0, atol=1e-12)
    others = [i for i, lbl in enumerate(rec.labels) if lbl != "Cz"]
    assert np.array_equal(out.data[others], rec.data[others])


def test_artifact_schedule_reported():
    spec = SynthSpec(n_trials=20, seed=2, artifact=ArtifactSpec(probability=0.5))
    rec, ts, truth = generate(spec)
    assert 0 < len(truth.artifacts) < 20
    for k, ch, at in truth.artifacts:
        t = ts.trials[k]
        assert t.cue1 - 512 <= at < t.movement_end
        assert ch in rec.labels
    d = truth.to_dict(ts.trials)
    assert len(d["trials"]) == 20 and len(d["novel_ratios"]) == 20
    assert len(d["novel_ratios"][0][0]) == len(NOVEL_PERIODS) - 1
