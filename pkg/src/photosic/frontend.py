"""
Dual-drive MZM + photodetector link, receiver filtering, mixer and capture.

The modulator is modelled at the intensity level. With the two arm drives
v1 (received signal) and v2 (reference) and a bias phase phi, the detected
photocurrent is

    i(t) = R * P/2 * (1 + cos(pi * (v1 - v2) / Vpi + phi))

At quadrature (phi = pi/2) the AC part is -R P/2 sin(pi (v1 - v2) / Vpi):
the link subtracts the two drives, which is what makes it an analog
canceller. We report the AC part with the sign flipped so the received arm
enters positively.
"""
from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .errors import ConfigurationError
from .signals import SampledSignal, resample


class FrontEndParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    v_pi: float = Field(default=3.5, gt=0)
    bias_phase: float = np.pi / 2
    pd_responsivity: float = Field(default=0.88, gt=0)
    optical_power_dbm: float = 15.5
    pd_bandwidth: float = Field(default=11e9, gt=0)
    osc_bandwidth: float = Field(default=3e9, gt=0)
    osc_sample_rate: float = Field(default=10e9, gt=0)
    transfer_mode: Literal["linearized", "sinusoidal"] = "sinusoidal"
    adc_bits: int | None = Field(default=None, ge=2, le=24)
    filter_order: int = Field(default=4, ge=1)
    drive_amplitude: float = Field(default=1.0, gt=0)

    @field_validator("adc_bits", mode="before")
    @classmethod
    def _ideal(cls, v):
        if isinstance(v, str) and v.lower() == "ideal":
            return None
        return v

    @property
    def photocurrent_scale(self) -> float:
        """R * P_opt / 2 in amperes."""
        return self.pd_responsivity * 10 ** (self.optical_power_dbm / 10) * 1e-3 / 2


def ddmzm_pd(v1: SampledSignal, v2: SampledSignal, p: FrontEndParams) -> SampledSignal:
    """AC-coupled photocurrent of the DDMZM link for arm drives ``v1``, ``v2``."""
    if v1.sample_rate != v2.sample_rate:
        raise ValueError(f"drive rate mismatch: {v1.sample_rate} vs {v2.sample_rate}")
    if len(v1) != len(v2):
        raise ValueError(f"drive length mismatch: {len(v1)} vs {len(v2)}")
    x = np.pi * (v1.samples - v2.samples) / p.v_pi
    a = p.photocurrent_scale
    if p.transfer_mode == "linearized":
        i = a * np.sin(p.bias_phase) * x
    else:
        # static bias term removed
        i = a * (np.cos(p.bias_phase) - np.cos(x + p.bias_phase))
    return SampledSignal(i, v1.sample_rate, {"photocurrent_scale_A": a,
                                             "transfer_mode": p.transfer_mode})


def butterworth_gain(f: np.ndarray, corner: float, order: int) -> np.ndarray:
    return 1.0 / np.sqrt(1.0 + (np.abs(f) / corner) ** (2 * order))


def _apply_magnitude(sig: SampledSignal, gain: np.ndarray) -> SampledSignal:
    X = np.fft.rfft(sig.samples)
    return sig.replace(np.fft.irfft(X * gain, n=len(sig)))


def receiver_filter(sig: SampledSignal, p: FrontEndParams, *, pd: bool = True,
                    osc: bool = True) -> SampledSignal:
    """Cascaded PD and oscilloscope low-pass responses.

    Both are Butterworth magnitude responses of ``p.filter_order`` applied
    with zero phase in the frequency domain, so they shape the spectrum
    without shifting the timing the delay search relies on.
    """
    f = np.fft.rfftfreq(len(sig), 1 / sig.sample_rate)
    g = np.ones_like(f)
    if pd:
        g *= butterworth_gain(f, p.pd_bandwidth, p.filter_order)
    if osc:
        g *= butterworth_gain(f, p.osc_bandwidth, p.filter_order)
    return _apply_magnitude(sig, g)


def mixer_downconvert(sig: SampledSignal, lo_freq: float, lo_phase: float = 0.0,
                      cutoff: float | None = None) -> SampledSignal:
    """Multiply by the LO and keep the difference product.

    The image is removed by an ideal low-pass at ``cutoff`` (default
    ``lo_freq / 2``; no filtering when the LO is at DC).
    """
    if not 0 <= lo_freq < sig.sample_rate / 2:
        raise ConfigurationError(
            f"LO frequency {lo_freq:.4g} Hz must lie in [0, {sig.sample_rate / 2:.4g}) Hz")
    lo = np.cos(2 * np.pi * lo_freq * sig.times() + lo_phase)
    mixed = sig.replace(sig.samples * lo)
    if cutoff is None:
        cutoff = lo_freq / 2 if lo_freq > 0 else None
    if cutoff is None:
        return mixed
    f = np.fft.rfftfreq(len(sig), 1 / sig.sample_rate)
    return _apply_magnitude(mixed, (f <= cutoff).astype(float))


def quantize(x: np.ndarray, bits: int, full_scale: float | None = None) -> np.ndarray:
    """Mid-rise uniform quantizer over [-full_scale, full_scale].

    The full scale defaults to the record's peak, like an auto-ranged scope.
    """
    if full_scale is None:
        full_scale = float(np.max(np.abs(x)))
    if full_scale == 0:
        return x.copy()
    step = 2 * full_scale / 2**bits
    top = 2 ** (bits - 1)
    codes = np.clip(np.floor(x / step), -top, top - 1)
    return (codes + 0.5) * step


def capture(sig: SampledSignal, p: FrontEndParams, *, pd: bool = True) -> SampledSignal:
    """Receiver filtering, rate conversion to the scope rate, optional ADC."""
    filtered = receiver_filter(sig, p, pd=pd)
    # receiver_filter band-limits on purpose; the out-of-band check would only
    # trip on harmonics the scope is meant to reject.
    out = resample(filtered, p.osc_sample_rate, max_out_of_band_db=None)
    if p.adc_bits is not None:
        out = out.replace(quantize(out.samples, p.adc_bits))
    return out
