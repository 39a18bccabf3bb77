"""
Scenario configuration: a TOML file with nested sections, parsed strictly.

Unknown keys are rejected so that a typo in a sweep axis cannot silently fall
back to a default. ``"none"`` stands in for an absent value wherever a field
is optional (TOML has no null). :func:`reference_config` renders every
default as a commented file.
"""
from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import Any, Literal

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .adaptive import AdaptiveConfig
from .channel import ChannelSpec
from .errors import ConfigurationError
from .frontend import FrontEndParams
from .signals import GENERATION_RATE, PROCESSING_RATE, WaveformSpec
from .testbed import Impairments

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MIN_CAPTURE_SAMPLES = 100_000
_NONE_WORDS = ("none", "off", "null")


def _none_word(v):
    if isinstance(v, str) and v.strip().lower() in _NONE_WORDS:
        return None
    return v


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class WaveformSection(_Section):
    """Waveform shape; duration and symbol seed come from the scenario."""

    kind: Literal["LFM", "QPSK"] = "LFM"
    center_freq: float = Field(default=2.4e9, ge=0)
    bandwidth_or_baud: float = Field(default=2e9, gt=0)
    rolloff: float = Field(default=0.35, ge=0, le=1)

    def to_spec(self, duration: float, seed: int) -> WaveformSpec:
        return WaveformSpec(kind=self.kind, center_freq=self.center_freq,
                            bandwidth_or_baud=self.bandwidth_or_baud, duration=duration,
                            rolloff=self.rolloff, symbol_seed=seed)


class Seeds(_Section):
    noise: int = Field(default=0, ge=0)
    symbols: int = Field(default=1, ge=0)


class ImpairmentSection(_Section):
    gain_error_db: float = 0.2
    extra_delay_s: float = Field(default=7.8125e-12, ge=0)
    fine_tune_enabled: bool = False

    def to_impairments(self) -> Impairments:
        return Impairments(self.gain_error_db, self.extra_delay_s, self.fine_tune_enabled)


class PrematchSection(_Section):
    search: Literal["bisection", "exhaustive"] = "bisection"
    half_window: int = Field(default=7, ge=1)
    xcorr_threshold: float = Field(default=3.0, gt=0)
    max_lag: int | None = Field(default=None, ge=0)
    forced_fine_delay: int | None = Field(default=None, ge=0)
    delay_study: tuple[int, ...] = ()

    @field_validator("max_lag", "forced_fine_delay", mode="before")
    @classmethod
    def _none(cls, v):
        return _none_word(v)


class MetricsSection(_Section):
    welch_segment: int = Field(default=8192, ge=16)
    welch_overlap: float = Field(default=0.5, ge=0, lt=1)
    spectrogram_window: int = Field(default=1024, ge=16)
    spectrogram_overlap: float = Field(default=0.75, ge=0, lt=1)
    soi_guard: float = Field(default=0.1, ge=0)
    settle_fraction: float = Field(default=0.05, ge=0, lt=0.5)
    steady_state_fraction: float = Field(default=0.2, gt=0, le=1)
    spectrograms: bool = True


class ScenarioConfig(_Section):
    name: str = "scenario"
    duration: float = Field(default=10e-6, gt=0)
    processing_rate: float = Field(default=PROCESSING_RATE, gt=0)
    generation_rate: float = Field(default=GENERATION_RATE, gt=0)
    lo_freq: float | None = Field(default=None, ge=0)
    lo_phase: float = 0.0
    if_cutoff: float | None = Field(default=None, gt=0)
    digital_lead_taps: int = Field(default=8, ge=0)
    si_waveform: WaveformSection = WaveformSection()
    soi_waveform: WaveformSection | None = None
    channel: ChannelSpec = ChannelSpec()
    frontend: FrontEndParams = FrontEndParams()
    adaptive: AdaptiveConfig = AdaptiveConfig()
    seeds: Seeds = Seeds()
    impairments: ImpairmentSection = ImpairmentSection()
    prematch: PrematchSection = PrematchSection()
    metrics: MetricsSection = MetricsSection()

    @field_validator("lo_freq", "if_cutoff", "soi_waveform", mode="before")
    @classmethod
    def _none(cls, v):
        return _none_word(v)

    # -- derived views -----------------------------------------------------

    @property
    def si_spec(self) -> WaveformSpec:
        return self.si_waveform.to_spec(self.duration, self.seeds.symbols)

    @property
    def soi_spec(self) -> WaveformSpec:
        """Explicit SOI waveform, else same kind and centre at 1/4 the bandwidth or baud."""
        w = self.soi_waveform
        if w is None:
            w = self.si_waveform.model_copy(
                update={"bandwidth_or_baud": self.si_waveform.bandwidth_or_baud / 4})
        return w.to_spec(self.duration, self.seeds.symbols + 1)

    @property
    def capture_samples(self) -> int:
        return int(round(self.duration * self.frontend.osc_sample_rate))

    @model_validator(mode="after")
    def _invariants(self):
        if self.capture_samples < MIN_CAPTURE_SAMPLES:
            raise ValueError(
                f"duration {self.duration:g} s gives {self.capture_samples} capture samples; "
                f"at least {MIN_CAPTURE_SAMPLES} are required")
        for key, spec in (("si_waveform", self.si_spec), ("soi_waveform", self.soi_spec)):
            try:
                spec.check_band(self.generation_rate)
                if self.lo_freq is None:
                    spec.check_band(self.frontend.osc_sample_rate)
            except ConfigurationError as exc:
                raise ValueError(f"{key}: {exc}") from None
        if self.lo_freq is not None:
            for key, spec in (("si_waveform", self.si_spec), ("soi_waveform", self.soi_spec)):
                lo, hi = spec.band
                if lo < self.lo_freq < hi:
                    raise ValueError(f"{key}: band [{lo:.4g}, {hi:.4g}] Hz straddles lo_freq")
                if_hi = max(abs(hi - self.lo_freq), abs(lo - self.lo_freq))
                if if_hi >= self.frontend.osc_sample_rate / 2:
                    raise ValueError(f"{key}: IF band edge {if_hi:.4g} Hz is above Nyquist")
        return self


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"].removeprefix("Value error, ")
        parts.append(f"{loc}: {msg}")
    return "; ".join(parts)


def config_from_dict(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(_format_errors(exc)) from None


def parse_config(path) -> ScenarioConfig:
    """Read and validate a scenario file. Errors name the offending key."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return config_from_dict(data)


def _nones_to_words(obj: Any) -> Any:
    if obj is None:
        return "none"
    if isinstance(obj, dict):
        return {k: _nones_to_words(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nones_to_words(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def config_to_dict(cfg: ScenarioConfig) -> dict:
    data = cfg.model_dump(mode="python", by_alias=True)
    if cfg.frontend.adc_bits is None:
        data["frontend"]["adc_bits"] = "ideal"
    return _nones_to_words(data)


def dump_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def set_dotted(data: dict, key: str, value) -> dict:
    """Copy of ``data`` with ``a.b.c = value``; intermediate tables are created."""
    out = dict(data)
    head, _, rest = key.partition(".")
    if not rest:
        out[head] = value
        return out
    sub = out.get(head)
    if not isinstance(sub, dict):
        sub = {}
    out[head] = set_dotted(sub, rest, value)
    return out


def reference_config() -> str:
    """Every key at its default, with a short note per section."""
    notes = {
        "si_waveform": "transmitted SI; band must fit the capture Nyquist (or the IF after the mixer)",
        "soi_waveform": "\"none\" derives it: same kind and centre, 1/4 bandwidth or baud",
        "channel": "direct path absolute; multipath delays/attenuations relative to it",
        "frontend": "DDMZM, photodetector and oscilloscope; adc_bits = \"ideal\" disables quantisation",
        "adaptive": "digital canceller; both algorithms also run on identical inputs for comparison",
        "seeds": "noise draws; SI symbols use `symbols`, SOI symbols `symbols + 1`",
        "impairments": "extra_delay_s is the sub-point part of the true delay; fine tuning supplies it",
        "prematch": "forced_fine_delay skips the search; delay_study lists extra delays to report",
        "metrics": "Welch/spectrogram settings, SOI notch guard and the settle fraction dropped from the start",
    }
    text = dump_config(ScenarioConfig())
    lines = ["# photosic scenario reference: every key at its default value", ""]
    for line in text.splitlines():
        if line.startswith("[") and not line.startswith("[["):
            section = line.strip("[]").split(".")[0]
            if section in notes and line.strip("[]") == section:
                lines.append(f"# {notes.pop(section)}")
        lines.append(line)
    if "soi_waveform" in notes:
        idx = next(i for i, ln in enumerate(lines) if ln.startswith("soi_waveform"))
        lines.insert(idx, f"# {notes.pop('soi_waveform')}")
    return "\n".join(lines) + "\n"
