"""Monte Carlo calibration runs used to freeze test thresholds.

Usage: python3 scripts/calibrate.py [artifact|suppression|band|aligned|ratios|all]
"""

import sys
import time

import numpy as np

from erdbench.artifacts import ArtifactParams, detect_artifact_spans, suppress
from erdbench.compare import run_comparison
from erdbench.config import AnalysisConfig
from erdbench.dsp import FilterMode, apply_filter, design_bandpass
from erdbench.model import FrequencyBand, StandardPeriod, trial_extent
from erdbench.novel import build_differentials, default_pairs, enumerate_bands, ratio_profile
from erdbench.standard import StandardParams, select_individual_band, trial_windows
from erdbench.synth import SmrSpec, SynthSpec, generate, inject_polarization_artifact

SNR10 = SynthSpec.noise_for_snr(10.0, 10.0)


def artifact_false_positives(n_seeds=100):
    """Fraction of clean trials (any channel) touched by a detected span."""
    hits = total = 0
    for seed in range(n_seeds):
        rec, ts, _ = generate(SynthSpec(n_trials=10, seed=seed))
        spans = [detect_artifact_spans(ch, ArtifactParams(), rec.sample_rate_hz)
                 for ch in rec.data]
        for t in ts:
            lo, hi = trial_extent(t, ts.timing, ts.fs)
            total += 1
            hits += any(a < hi and lo < b for s in spans for a, b in s)
    print(f"artifact false positives: {hits}/{total} = {100 * hits / total:.2f}%")


def paired_suppression(n_trials=100, seed=0):
    rec, ts, _ = generate(SynthSpec(n_trials=n_trials, seed=seed))
    rng = np.random.default_rng(seed + 1000)
    filt = design_bandpass(FrequencyBand(5.5, 16.5), ts.fs)
    ok, errs = 0, []
    for t in ts:
        ch = rec.labels[int(rng.integers(rec.n_channels))]
        at = int(rng.integers(t.cue1 - 512, t.movement_end))
        bad = inject_polarization_artifact(rec, ch, at, 500.0, 20.0)
        lo, hi = trial_extent(t, ts.timing, ts.fs)
        a, b = lo - 2048, hi + 2048
        x = rec.channel(ch)[a:b]
        y = bad.channel(ch)[a:b]
        spans = detect_artifact_spans(y, ArtifactParams(), ts.fs)
        z = suppress(y, spans).cleaned
        fx = apply_filter(filt, x, FilterMode.ZERO_PHASE)
        fz = apply_filter(filt, z, FilterMode.ZERO_PHASE)
        mask = np.zeros(len(x), bool)
        mask[lo - a:hi - a] = True
        for s0, s1 in spans:
            mask[s0:s1] = False
        ex, ez = np.sum(fx[mask] ** 2), np.sum(fz[mask] ** 2)
        err = abs(ez - ex) / ex
        errs.append(err)
        ok += err <= 0.10
    print(f"paired suppression within 10%: {ok}/{n_trials}; "
          f"median err {np.median(errs):.3f}, max {np.max(errs):.3f}")


def band_recovery(n_seeds=100, n_trials=100):
    ok = 0
    for seed in range(n_seeds):
        rec, ts, _ = generate(SynthSpec(n_trials=n_trials, noise_rms_uv=SNR10, seed=seed))
        p = StandardParams()
        trials = ts.valid_trials
        ref = trial_windows(ts, trials, StandardPeriod.R2, "C3", p)
        act = trial_windows(ts, trials, StandardPeriod.A1, "C3", p)
        try:
            ib = select_individual_band(ref, act, ts.fs)
            ok += ib.band.overlaps(FrequencyBand(11.5, 13.5))
        except Exception as exc:
            print(" seed", seed, type(exc).__name__)
    print(f"band recovery: {ok}/{n_seeds}")


def aligned(n_seeds=20, n_trials=200):
    cfg = AnalysisConfig()
    for depth in (50.0, 0.0):
        rows = []
        for seed in range(n_seeds):
            t0 = time.time()
            spec = SynthSpec(n_trials=n_trials, noise_rms_uv=SNR10, seed=seed,
                             smr=SmrSpec(erd_depth_percent=depth))
            _, ts, _ = generate(spec)
            rep = run_comparison(ts, cfg)
            al = rep.aligned()
            rows.append(list(al["standard"].values()) + list(al["novel"].values()))
            print(f" depth {depth} seed {seed}: {np.round(rows[-1], 1)} ({time.time() - t0:.1f}s)",
                  flush=True)
        rows = np.array(rows)
        print(f"depth {depth}: min per cell {rows.min(axis=0)}, max {rows.max(axis=0)}")


def stationary_ratios(n_trials=200, seed=0):
    spec = SynthSpec(n_trials=n_trials, noise_rms_uv=SNR10, seed=seed,
                     smr=SmrSpec(erd_depth_percent=0.0))
    rec, ts, _ = generate(spec)
    diffs = build_differentials(rec, default_pairs())
    bank = enumerate_bands(5.5, 16.5)
    prof = ratio_profile(ts.valid_trials, diffs, bank, ts.timing, ts.fs)
    med = np.nanmedian(prof.ratios, axis=0)
    print(f"stationary ratio medians: min {med.min():.3f} max {med.max():.3f}")


RUNS = {"artifact": artifact_false_positives, "suppression": paired_suppression,
        "band": band_recovery, "aligned": aligned, "ratios": stationary_ratios}

if __name__ == "__main__":
    which = sys.argv[1:] or ["all"]
    for name, fn in RUNS.items():
        if "all" in which or name in which:
            fn()
