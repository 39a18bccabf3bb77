"""
Received-signal composition: direct-path SI, multipath echoes, SOI and noise.

Multipath taps are given relative to the direct path (extra delay, extra
power attenuation), which is how the testbed scenario is described: the echo
sits 5 ns behind and 26 dB below the direct-path self-interference.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .signals import SampledSignal, delay_fractional, scale


class PathTap(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    delay_s: float = Field(ge=0, allow_inf_nan=False)
    attenuation_db: float = Field(ge=0, allow_inf_nan=False)

    @property
    def amplitude(self) -> float:
        return 10 ** (-self.attenuation_db / 20)


# 482 points on the 64 GSa/s grid; 2.083 dB corresponds to an amplitude of 0.7868.
DEFAULT_DIRECT = PathTap(delay_s=482 / 64e9, attenuation_db=2.0832)


class ChannelSpec(BaseModel):
    """Static self-interference channel.

    ``direct_path`` is absolute (relative to the transmitted SI);
    ``multipaths`` are relative to the direct path. ``soi_rel_power_db`` sets
    the SOI power against the *measured* direct-path SI power; ``None``
    disables the SOI. ``noise_floor_dbm_hz`` is a one-sided white-noise PSD
    referred to 50 ohm, or ``None`` for no noise.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    direct_path: PathTap = DEFAULT_DIRECT
    multipaths: tuple[PathTap, ...] = (PathTap(delay_s=5e-9, attenuation_db=26.0),)
    soi_rel_power_db: float | None = -26.0
    noise_floor_dbm_hz: float | None = None

    @field_validator("soi_rel_power_db", "noise_floor_dbm_hz", mode="before")
    @classmethod
    def _none_words(cls, v):
        if isinstance(v, str) and v.lower() in ("none", "off", "-inf"):
            return None
        return v

    @field_validator("multipaths")
    @classmethod
    def _weaker_echoes(cls, taps):
        for tap in taps:
            if tap.attenuation_db == 0:
                warnings.warn("multipath tap is as strong as the direct path", stacklevel=2)
        return taps


@dataclass(frozen=True)
class ChannelComponents:
    direct: SampledSignal
    multipath_sum: SampledSignal
    soi_scaled: SampledSignal
    noise: SampledSignal

    def total(self) -> SampledSignal:
        x = self.direct.samples + self.multipath_sum.samples + self.soi_scaled.samples \
            + self.noise.samples
        return SampledSignal(x, self.direct.sample_rate)


def noise_std(noise_floor_dbm_hz: float, sample_rate: float, impedance: float = 50.0) -> float:
    """RMS voltage of white noise with the given one-sided PSD over [0, fs/2]."""
    watts_per_hz = 10 ** (noise_floor_dbm_hz / 10) * 1e-3
    return float(np.sqrt(watts_per_hz * impedance * sample_rate / 2))


def dbm_hz_for_snr(signal_power_v2: float, snr_db: float, bandwidth: float,
                   impedance: float = 50.0) -> float:
    """Noise PSD giving ``snr_db`` against ``signal_power_v2`` within ``bandwidth``."""
    noise_w = signal_power_v2 / impedance * 10 ** (-snr_db / 10)
    return float(10 * np.log10(noise_w / bandwidth / 1e-3))


def render_components(si_tx: SampledSignal, soi: SampledSignal | None, spec: ChannelSpec,
                      seed: int = 0) -> ChannelComponents:
    """Render each addend of the received signal separately."""
    if soi is not None and soi.sample_rate != si_tx.sample_rate:
        raise ValueError(f"sample rate mismatch: SI {si_tx.sample_rate}, SOI {soi.sample_rate}")
    if soi is not None and len(soi) != len(si_tx):
        raise ValueError(f"length mismatch: SI {len(si_tx)}, SOI {len(soi)}")
    duration = si_tx.duration
    d0 = spec.direct_path.delay_s
    for tap in spec.multipaths:
        if d0 + tap.delay_s >= duration:
            raise ValueError(f"path delay {d0 + tap.delay_s:.4g} s exceeds duration {duration:.4g} s")

    direct = scale(delay_fractional(si_tx, d0), spec.direct_path.amplitude)
    mp = np.zeros(len(si_tx))
    for tap in spec.multipaths:
        echo = delay_fractional(si_tx, d0 + tap.delay_s)
        mp += echo.samples * spec.direct_path.amplitude * tap.amplitude
    multipath_sum = si_tx.replace(mp)

    zeros = np.zeros(len(si_tx))
    if soi is None or spec.soi_rel_power_db is None or soi.power == 0:
        soi_scaled = si_tx.replace(zeros)
    else:
        g = np.sqrt(direct.power / soi.power * 10 ** (spec.soi_rel_power_db / 10))
        soi_scaled = SampledSignal(soi.samples * g, soi.sample_rate)

    if spec.noise_floor_dbm_hz is None:
        noise = si_tx.replace(zeros)
    else:
        rng = np.random.default_rng(seed)
        sigma = noise_std(spec.noise_floor_dbm_hz, si_tx.sample_rate)
        noise = si_tx.replace(rng.normal(0.0, sigma, len(si_tx)))

    return ChannelComponents(direct, multipath_sum, soi_scaled, noise)


def compose_received(si_tx: SampledSignal, soi: SampledSignal | None, spec: ChannelSpec,
                     seed: int = 0) -> SampledSignal:
    return render_components(si_tx, soi, spec, seed).total()
