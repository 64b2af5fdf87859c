"""Analysis configuration: one YAML document, every key optional.

``load_config("default")`` returns the built-in defaults. Unknown keys and
invalid values raise :class:`ConfigError` naming the offending field.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .artifacts import ArtifactParams
from .errors import ConfigError
from .model import Montage, TrialTiming
from .novel import BandBank, DifferentialPair, Group, default_pairs, enumerate_bands, validate_pairs
from .standard import StandardParams
from .synth import ArtifactSpec, SmrSpec, SynthSpec


@dataclass(frozen=True)
class FilterParams:
    transition_width_hz: float = 1.0
    stopband_atten_db: float = 40.0


@dataclass(frozen=True)
class SynthParams:
    """Synthetic-source settings; ``snr_db`` overrides ``noise_rms_uv`` when set."""

    n_trials: int = 80
    noise_rms_uv: float = 10.0
    snr_db: float | None = None
    baseline_s: float = 10.0
    tail_s: float = 3.0
    jitter_ms: float = 250.0
    smr: SmrSpec = field(default_factory=SmrSpec)
    artifact: ArtifactSpec = field(default_factory=ArtifactSpec)


@dataclass(frozen=True)
class AnalysisConfig:
    sample_rate_hz: float = 512.0
    montage: Montage = field(default_factory=Montage.default)
    timing: TrialTiming = field(default_factory=TrialTiming)
    differential_pairs: tuple[DifferentialPair, ...] | None = None
    strict_pairs: bool = True
    band_range: tuple[float, float] = (5.5, 16.5)
    band_width_hz: float = 2.0
    band_overlap_hz: float = 1.0
    report_band: tuple[float, float] = (11.5, 13.5)
    identification_threshold_percent: float = 40.0
    artifact: ArtifactParams = field(default_factory=ArtifactParams)
    suppress_artifacts: bool = True
    filter: FilterParams = field(default_factory=FilterParams)
    standard: StandardParams = field(default_factory=StandardParams)
    synth: SynthParams = field(default_factory=SynthParams)
    bench_repetitions: int = 3
    seed: int = 0

    def __post_init__(self):
        if not self.band_width_hz > self.band_overlap_hz > 0:
            raise ConfigError("need band_width_hz > band_overlap_hz > 0", field="band_overlap_hz")
        if not 0 < self.identification_threshold_percent < 100:
            raise ConfigError("must be in (0, 100)", field="identification_threshold_percent")
        lo, hi = self.band_range
        if not 0 < lo < hi < self.sample_rate_hz / 2:
            raise ConfigError(f"invalid range {self.band_range}", field="band_range")
        if self.bench_repetitions < 3:
            raise ConfigError("must be >= 3", field="bench_repetitions")
        if self.differential_pairs is not None:
            validate_pairs(self.differential_pairs, self.montage, self.strict_pairs)
        missing = [c for c in self.standard.channels if c not in self.montage]
        if missing:
            raise ConfigError(f"unknown channels {missing}", field="standard.channels")

    @property
    def pairs(self) -> tuple[DifferentialPair, ...]:
        if self.differential_pairs is not None:
            return self.differential_pairs
        return default_pairs(self.montage)

    @property
    def band_bank(self) -> BandBank:
        return enumerate_bands(*self.band_range, self.band_width_hz,
                               self.band_width_hz - self.band_overlap_hz)

    @property
    def threshold_ratio(self) -> float:
        return 1 - self.identification_threshold_percent / 100

    def synth_spec(self, seed: int | None = None) -> SynthSpec:
        s = self.synth
        noise = s.noise_rms_uv if s.snr_db is None \
            else SynthSpec.noise_for_snr(s.smr.rest_amplitude_uv, s.snr_db)
        return SynthSpec(
            n_trials=s.n_trials, fs=self.sample_rate_hz, timing=self.timing,
            montage=self.montage, noise_rms_uv=noise, smr=s.smr, artifact=s.artifact,
            baseline_s=s.baseline_s, tail_s=s.tail_s, jitter_ms=s.jitter_ms,
            seed=self.seed if seed is None else seed,
        )

    def with_seed(self, seed: int) -> AnalysisConfig:
        return dataclasses.replace(self, seed=seed)


def _build(cls, data: Any, prefix: str, converters: dict | None = None):
    """Construct dataclass ``cls`` from a mapping, naming bad fields."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", field=prefix)
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if key not in known:
            raise ConfigError("unknown key", field=name)
        conv = (converters or {}).get(key)
        try:
            kwargs[key] = conv(value, name) if conv else value
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc), field=name) from None
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field=prefix or None) from None


def _pair(value, name):
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return (float(value[0]), float(value[1]))
    raise ConfigError("expected [lo, hi]", field=name)


def _montage(value, name):
    if not isinstance(value, dict) or "grid" not in value:
        raise ConfigError("expected {grid: [[labels]], midline_col: int}", field=name)
    try:
        return Montage.from_grid(value["grid"], int(value.get("midline_col", 2)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field=name) from None


def _pairs(value, name):
    if value is None:
        return None
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise ConfigError("expected [positive, negative, group]", field=f"{name}[{i}]")
        try:
            group = Group(item[2])
        except ValueError:
            raise ConfigError(f"unknown group {item[2]!r}", field=f"{name}[{i}]") from None
        out.append(DifferentialPair(str(item[0]), str(item[1]), group))
    return tuple(out)


def _standard(value, name):
    return _build(StandardParams, value, name, {
        "channels": lambda v, n: tuple(str(c) for c in v),
        "search_range_hz": _pair,
        "default_band": _pair,
    })


def _synth(value, name):
    return _build(SynthParams, value, name, {
        "smr": lambda v, n: _build(SmrSpec, v, n, {
            "affected_hemispheres": lambda h, _: tuple(h)}),
        "artifact": lambda v, n: _build(ArtifactSpec, v, n),
    })


_CONVERTERS = {
    "montage": _montage,
    "timing": lambda v, n: _build(TrialTiming, v, n),
    "differential_pairs": _pairs,
    "band_range": _pair,
    "report_band": _pair,
    "artifact": lambda v, n: _build(ArtifactParams, v, n),
    "filter": lambda v, n: _build(FilterParams, v, n),
    "standard": _standard,
    "synth": _synth,
}


def config_from_dict(data: dict | None) -> AnalysisConfig:
    return _build(AnalysisConfig, data or {}, "", _CONVERTERS)


def load_config(source: str | Path) -> AnalysisConfig:
    """Parse a YAML config file, or return defaults for ``"default"``."""
    if str(source) == "default":
        return AnalysisConfig()
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", field="config") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}", field="config") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping", field="config")
    return config_from_dict(data)
