"""Synthetic sensorimotor EEG with known ERD and injectable polarization artifacts.

Each channel is pink background noise plus a sensorimotor rhythm (SMR)
whose amplitude is multiplied by ``sqrt(1 - depth/100)`` from cue1 on, so the
SMR energy ratio across the onset is exactly ``1 - depth/100``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    NOVEL_PERIODS,
    Hemisphere,
    Montage,
    Recording,
    StandardPeriod,
    Trial,
    TrialSet,
    TrialTiming,
    Trigger,
    TriggerCode,
    ms_to_samples,
    period_bounds,
)


@dataclass(frozen=True)
class SmrSpec:
    center_hz: float = 12.5
    bandwidth_hz: float = 0.0
    rest_amplitude_uv: float = 10.0
    # energy drop (percent) during planning (cue1..cue2) and movement (cue2..end)
    erd_depth_percent: float = 50.0
    movement_depth_percent: float | None = None
    recovery_depth_percent: float = 0.0
    ramp_ms: float = 0.0
    affected_hemispheres: tuple[Hemisphere, ...] = tuple(Hemisphere)

    def __post_init__(self):
        object.__setattr__(self, "affected_hemispheres",
                           tuple(Hemisphere(h) for h in self.affected_hemispheres))
        for name in ("erd_depth_percent", "recovery_depth_percent"):
            if not 0 <= getattr(self, name) < 100:
                raise ValueError(f"{name} must be in [0, 100)")
        if self.movement_depth_percent is not None and not 0 <= self.movement_depth_percent < 100:
            raise ValueError("movement_depth_percent must be in [0, 100)")
        if self.center_hz <= 0 or self.bandwidth_hz < 0 or self.rest_amplitude_uv < 0:
            raise ValueError("invalid SMR parameters")
        if self.ramp_ms < 0:
            raise ValueError("ramp_ms must be >= 0")

    @property
    def movement_depth(self) -> float:
        return self.erd_depth_percent if self.movement_depth_percent is None \
            else self.movement_depth_percent


@dataclass(frozen=True)
class ArtifactSpec:
    probability: float = 0.0
    peak_uv: float = 500.0
    decay_ms: float = 20.0

    def __post_init__(self):
        if not 0 <= self.probability <= 1:
            raise ValueError("artifact probability must be in [0, 1]")
        if self.decay_ms <= 0:
            raise ValueError("decay_ms must be positive")


@dataclass(frozen=True)
class SynthSpec:
    n_trials: int = 80
    fs: float = 512.0
    timing: TrialTiming = field(default_factory=TrialTiming)
    montage: Montage = field(default_factory=Montage.default)
    noise_rms_uv: float = 10.0
    smr: SmrSpec = field(default_factory=SmrSpec)
    artifact: ArtifactSpec = field(default_factory=ArtifactSpec)
    baseline_s: float = 10.0
    tail_s: float = 3.0
    jitter_ms: float = 250.0
    band_limit_hz: tuple[float, float] = (0.1, 60.0)
    notch_hz: float | None = 50.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trials < 0:
            raise ValueError("n_trials must be >= 0")
        if self.noise_rms_uv < 0:
            raise ValueError("noise_rms_uv must be >= 0")
        if not self.fs > 2 * (self.smr.center_hz + self.smr.bandwidth_hz):
            raise ValueError("fs must exceed twice the SMR's highest frequency")
        if self.baseline_s < 2.5:
            raise ValueError("baseline_s must leave room for the R1 window")

    @staticmethod
    def noise_for_snr(rest_amplitude_uv: float, snr_db: float) -> float:
        """Background RMS giving the requested SMR-to-noise power ratio.

        SNR is broadband: sinusoid power ``a**2 / 2`` over background variance.
        """
        return math.sqrt(rest_amplitude_uv ** 2 / 2 / 10 ** (snr_db / 10))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Known answers for a generated recording.

    ``envelope`` is the SMR amplitude multiplier per channel and sample;
    ``novel_ratios`` holds, per trial and channel, the SMR energy ratio of
    post1/pre, post2/post1, post3/post2 and reaction/post3.
    """

    spec: SynthSpec
    smr: np.ndarray
    envelope: np.ndarray
    novel_ratios: np.ndarray
    artifacts: tuple[tuple[int, str, int], ...] = ()

    def window_ratio(self, channel: int, active: tuple[int, int], reference: tuple[int, int]):
        """Envelope energy ratio ``mean(m**2)`` over active vs reference windows."""
        env = self.envelope[channel]
        a = np.mean(env[active[0]:active[1]] ** 2)
        r = np.mean(env[reference[0]:reference[1]] ** 2)
        return float(a / r)

    def standard_ratio(self, trial: Trial, channel: int, reference: StandardPeriod,
                       active: StandardPeriod, baseline_offset_ms: float = 1000.0):
        fs, timing = self.spec.fs, self.spec.timing
        ref = period_bounds(trial, reference, timing, fs, baseline_offset_ms=baseline_offset_ms)
        act = period_bounds(trial, active, timing, fs, baseline_offset_ms=baseline_offset_ms)
        return self.window_ratio(channel, act, ref)

    def to_dict(self, trials=()) -> dict:
        return {
            "seed": self.spec.seed,
            "n_trials": self.spec.n_trials,
            "fs": self.spec.fs,
            "smr_center_hz": self.spec.smr.center_hz,
            "erd_depth_percent": self.spec.smr.erd_depth_percent,
            "noise_rms_uv": self.spec.noise_rms_uv,
            "affected_hemispheres": [h.value for h in self.spec.smr.affected_hemispheres],
            "trials": [
                {"index": t.index, "trial_start": t.trial_start, "cue1": t.cue1,
                 "cue2": t.cue2, "movement_end": t.movement_end, "valid": t.valid}
                for t in trials
            ],
            "novel_ratios": self.novel_ratios.tolist(),
            "artifacts": [
                {"trial": k, "channel": ch, "sample": s} for k, ch, s in self.artifacts
            ],
        }


def pink_noise(n: int, fs: float, rms: float, rng: np.random.Generator,
               band: tuple[float, float] = (0.1, 60.0), notch_hz: float | None = 50.0):
    """White noise shaped by a 1/sqrt(f) magnitude profile, band-limited, scaled to ``rms``."""
    if rms == 0 or n == 0:
        return np.zeros(n)
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1 / fs)
    shape = np.zeros_like(f)
    keep = (f >= band[0]) & (f <= band[1])
    shape[keep] = 1 / np.sqrt(f[keep])
    if notch_hz is not None:
        shape[np.abs(f - notch_hz) < 0.5] = 0
    x = np.fft.irfft(spec * shape, n)
    return x * (rms / np.sqrt(np.mean(x ** 2)))


def narrowband_carrier(n: int, fs: float, center_hz: float, bandwidth_hz: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Unit-amplitude (RMS 1/sqrt(2)) oscillation: a sinusoid, or band-limited
    Gaussian noise when ``bandwidth_hz > 0``."""
    t = np.arange(n) / fs
    if bandwidth_hz == 0:
        return np.sin(2 * np.pi * center_hz * t + rng.uniform(0, 2 * np.pi))
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1 / fs)
    spec[np.abs(f - center_hz) > bandwidth_hz / 2] = 0
    x = np.fft.irfft(spec, n)
    return x / np.sqrt(2 * np.mean(x ** 2))


def polarization_transient(n_samples: int, at_sample: int, peak_uv: float, decay_ms: float,
                           fs: float) -> np.ndarray:
    """Step of ``peak_uv`` at ``at_sample`` decaying exponentially with ``decay_ms``."""
    out = np.zeros(n_samples)
    k = np.arange(n_samples - at_sample)
    out[at_sample:] = peak_uv * np.exp(-k / (decay_ms * fs / 1000))
    return out


def inject_polarization_artifact(recording: Recording, channel: str, at_sample: int,
                                 peak_uv: float, decay_ms: float) -> Recording:
    """Return a copy of ``recording`` with a polarization transient added to one channel."""
    idx = recording.index(channel)
    if not 0 <= at_sample < recording.n_samples:
        raise ValueError(f"at_sample {at_sample} outside recording")
    if peak_uv == 0:
        return recording.with_data(recording.data)
    data = recording.data.copy()
    data[idx] += polarization_transient(recording.n_samples, at_sample, peak_uv, decay_ms,
                                        recording.sample_rate_hz)
    return recording.with_data(data)


def _schedule(spec: SynthSpec, rng: np.random.Generator):
    fs, tm = spec.fs, spec.timing
    pre = ms_to_samples(tm.pre_trigger_ms, fs)
    post = ms_to_samples(tm.post_trigger_ms, fs)
    reaction = ms_to_samples(tm.reaction_ms, fs)
    recovery = ms_to_samples(tm.recovery_ms, fs)
    mv_lo = ms_to_samples(tm.movement_min_ms, fs)
    mv_hi = ms_to_samples(tm.movement_max_ms, fs)
    jitter = ms_to_samples(spec.jitter_ms, fs)
    trials = []
    t = ms_to_samples(spec.baseline_s * 1000, fs)
    for k in range(spec.n_trials):
        cue1 = t + pre
        cue2 = cue1 + post
        end = cue2 + reaction + int(rng.integers(mv_lo, mv_hi + 1))
        trials.append(Trial(k, t, cue1, cue2, end))
        t = end + recovery + (int(rng.integers(0, jitter + 1)) if jitter else 0)
    n = t + ms_to_samples(spec.tail_s * 1000, fs)
    return trials, n


def _envelope(spec: SynthSpec, trials, n: int) -> np.ndarray:
    smr = spec.smr
    plan = math.sqrt(1 - smr.erd_depth_percent / 100)
    move = math.sqrt(1 - smr.movement_depth / 100)
    rec = math.sqrt(1 - smr.recovery_depth_percent / 100)
    ramp = ms_to_samples(smr.ramp_ms, spec.fs)
    env = np.ones(n)
    for i, tr in enumerate(trials):
        nxt = trials[i + 1].trial_start if i + 1 < len(trials) else n
        env[tr.cue1:tr.cue2] = plan
        if ramp:
            r = min(ramp, tr.cue2 - tr.cue1)
            env[tr.cue1:tr.cue1 + r] = 1 + (plan - 1) * np.arange(1, r + 1) / r
        env[tr.cue2:tr.movement_end] = move
        env[tr.movement_end:nxt] = rec
    return env


def generate(spec: SynthSpec):
    """Build a synthetic recording.

    Returns
    -------
    recording : Recording
    trialset : TrialSet
        The generator's own trial ledger (artifact-hit trials stay valid here;
        detection decides validity downstream).
    truth : GroundTruth

    Every random stream derives from ``spec.seed`` via ``SeedSequence.spawn``,
    one child per purpose and per channel, so output does not depend on
    generation order.
    """
    root = np.random.SeedSequence(spec.seed)
    sched_ss, art_ss, noise_ss, smr_ss = root.spawn(4)
    labels = spec.montage.labels
    n_ch = len(labels)
    trials, n = _schedule(spec, np.random.default_rng(sched_ss))

    base_env = _envelope(spec, trials, n)
    affected = np.array([e.hemisphere in spec.smr.affected_hemispheres
                         for e in spec.montage.electrodes])
    envelope = np.where(affected[:, None], base_env[None, :], 1.0)

    smr = np.empty((n_ch, n))
    noise = np.empty((n_ch, n))
    for i, (s_smr, s_noise) in enumerate(zip(smr_ss.spawn(n_ch), noise_ss.spawn(n_ch))):
        carrier = narrowband_carrier(n, spec.fs, spec.smr.center_hz, spec.smr.bandwidth_hz,
                                     np.random.default_rng(s_smr))
        smr[i] = spec.smr.rest_amplitude_uv * envelope[i] * carrier
        noise[i] = pink_noise(n, spec.fs, spec.noise_rms_uv, np.random.default_rng(s_noise),
                              spec.band_limit_hz, spec.notch_hz)
    data = smr + noise

    artifacts = []
    if spec.artifact.probability > 0:
        rng = np.random.default_rng(art_ss)
        for tr in trials:
            if rng.random() < spec.artifact.probability:
                ch = int(rng.integers(n_ch))
                at = int(rng.integers(tr.cue1 - ms_to_samples(1000, spec.fs), tr.movement_end))
                data[ch] += polarization_transient(n, at, spec.artifact.peak_uv,
                                                   spec.artifact.decay_ms, spec.fs)
                artifacts.append((tr.index, labels[ch], at))

    triggers = []
    for tr in trials:
        triggers += [Trigger(tr.trial_start, TriggerCode.TRIAL_START),
                     Trigger(tr.cue1, TriggerCode.CUE1),
                     Trigger(tr.cue2, TriggerCode.CUE2),
                     Trigger(tr.movement_end, TriggerCode.MOVEMENT_END)]
    recording = Recording(spec.fs, labels, data, tuple(triggers))

    ratios = np.empty((len(trials), n_ch, len(NOVEL_PERIODS) - 1))
    for k, tr in enumerate(trials):
        bounds = [period_bounds(tr, p, spec.timing, spec.fs) for p in NOVEL_PERIODS]
        e2 = np.stack([np.mean(envelope[:, a:b] ** 2, axis=1) for a, b in bounds], axis=1)
        ratios[k] = e2[:, 1:] / e2[:, :-1]

    truth = GroundTruth(spec, smr, envelope, ratios, tuple(artifacts))
    return recording, TrialSet(recording, tuple(trials), spec.timing), truth
