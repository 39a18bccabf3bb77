"""
The simulated measurement setup: waveform synthesis, channel, DDMZM link and
oscilloscope capture wired together.

Signals that would be played by the waveform generator live on the
generation grid (64 GSa/s by default) and are in volts; everything the
oscilloscope returns is at its capture rate. The true SI-arm delay is the
channel's direct-path delay plus ``extra_delay_s``, the part that cannot be
reached with integer generation-grid points. ``fine_tune`` models an analog
delay line that supplies exactly that remainder.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channel import ChannelComponents, ChannelSpec, PathTap, render_components
from .errors import ConfigurationError
from .frontend import FrontEndParams, capture, ddmzm_pd, mixer_downconvert, receiver_filter
from .metrics import Band, band_power, welch_psd
from .prematch import PrematchContext
from .signals import (GENERATION_RATE, PROCESSING_RATE, SampledSignal, WaveformSpec,
                      delay_fractional, delay_integer, generate, resample)


@dataclass(frozen=True)
class Impairments:
    gain_error_db: float = 0.0
    extra_delay_s: float = 0.0
    fine_tune_enabled: bool = False


def synthesis_rate(spec: WaveformSpec, processing_rate: float, generation_rate: float) -> float:
    """Processing rate when the waveform fits comfortably, else the generation rate."""
    if spec.band[1] <= 0.4 * processing_rate:
        return processing_rate
    return generation_rate


def capture_band(band: Band, lo_freq: float | None) -> Band:
    """Map an RF band to where it lands after (optional) downconversion."""
    lo, hi = band
    if lo_freq is None:
        return lo, hi
    if lo >= lo_freq:
        return lo - lo_freq, hi - lo_freq
    if hi <= lo_freq:
        return lo_freq - hi, lo_freq - lo
    raise ConfigurationError(f"band [{lo:.4g}, {hi:.4g}] Hz straddles the LO at {lo_freq:.4g} Hz")


def derived_soi(si: WaveformSpec, seed: int) -> WaveformSpec:
    """Same centre and kind as the SI, a quarter of its bandwidth or symbol rate."""
    return si.model_copy(update={"bandwidth_or_baud": si.bandwidth_or_baud / 4,
                                 "symbol_seed": seed})


class Testbed:
    """One configured instance of the link, with cached captures."""

    __test__ = False  # not a pytest class

    def __init__(self, si_spec: WaveformSpec, soi_spec: WaveformSpec | None,
                 channel: ChannelSpec, frontend: FrontEndParams, *,
                 processing_rate: float = PROCESSING_RATE,
                 generation_rate: float = GENERATION_RATE,
                 lo_freq: float | None = None, lo_phase: float = 0.0,
                 if_cutoff: float | None = None, noise_seed: int = 0,
                 impairments: Impairments = Impairments(), soi_guard: float = 0.1,
                 settle_fraction: float = 0.05, welch_segment: int = 8192,
                 welch_overlap: float = 0.5):
        self.si_spec = si_spec
        self.soi_spec = soi_spec
        self.channel = channel
        self.frontend = frontend
        self.processing_rate = processing_rate
        self.generation_rate = generation_rate
        self.lo_freq = lo_freq
        self.lo_phase = lo_phase
        self.if_cutoff = if_cutoff
        self.noise_seed = noise_seed
        self.impairments = impairments
        self.soi_guard = soi_guard
        self.settle_fraction = settle_fraction
        self.welch_segment = welch_segment
        self.welch_overlap = welch_overlap

        self.si_band = capture_band(si_spec.band, lo_freq)
        self.soi_band = capture_band(soi_spec.band, lo_freq) if soi_spec is not None else None
        nyq = frontend.osc_sample_rate / 2
        if self.si_band[1] >= nyq:
            raise ConfigurationError(
                f"SI band edge {self.si_band[1]:.4g} Hz is above the capture Nyquist {nyq:.4g} Hz")

    # -- synthesis and channel -------------------------------------------------

    def _synth(self, spec: WaveformSpec) -> SampledSignal:
        rate = synthesis_rate(spec, self.processing_rate, self.generation_rate)
        sig = generate(spec, rate)
        return sig.replace(sig.samples * self.frontend.drive_amplitude)

    @cached_property
    def si_synth(self) -> SampledSignal:
        """Transmitted SI in volts at the rate it was synthesised."""
        return self._synth(self.si_spec)

    @cached_property
    def si_gen(self) -> SampledSignal:
        return resample(self.si_synth, self.generation_rate)

    @cached_property
    def soi_gen(self) -> SampledSignal | None:
        if self.soi_spec is None:
            return None
        return resample(self._synth(self.soi_spec), self.generation_rate)

    @cached_property
    def components(self) -> ChannelComponents:
        d = self.channel.direct_path
        true_direct = PathTap(delay_s=d.delay_s + self.impairments.extra_delay_s,
                              attenuation_db=d.attenuation_db)
        spec = self.channel.model_copy(update={"direct_path": true_direct})
        return render_components(self.si_gen, self.soi_gen, spec, self.noise_seed)

    @cached_property
    def received(self) -> SampledSignal:
        return self.components.total()

    @cached_property
    def received_without_soi(self) -> SampledSignal:
        c = self.components
        return self.si_gen.replace(c.direct.samples + c.multipath_sum.samples + c.noise.samples)

    @cached_property
    def zeros(self) -> SampledSignal:
        return self.si_gen.replace(np.zeros(len(self.si_gen)))

    # -- receiver --------------------------------------------------------------

    def _downconvert(self, sig: SampledSignal) -> SampledSignal:
        sig = receiver_filter(sig, self.frontend, osc=False)
        return mixer_downconvert(sig, self.lo_freq, self.lo_phase, self.if_cutoff)

    def to_capture(self, sig: SampledSignal, *, ideal: bool = False) -> SampledSignal:
        p = self.frontend.model_copy(update={"adc_bits": None}) if ideal else self.frontend
        if self.lo_freq is None:
            return capture(sig, p)
        return capture(self._downconvert(sig), p, pd=False)

    def detect(self, v1: SampledSignal, v2: SampledSignal) -> SampledSignal:
        """Drive both DDMZM arms and return the oscilloscope record."""
        return self.to_capture(ddmzm_pd(v1, v2, self.frontend))

    @cached_property
    def tx_digital(self) -> SampledSignal:
        """The transmitted SI as the receiver chain would present it, noise-free."""
        return self.to_capture(self.si_gen, ideal=True)

    @cached_property
    def rx_only(self) -> SampledSignal:
        return self.detect(self.received, self.zeros)

    @cached_property
    def ref_only(self) -> SampledSignal:
        return self.detect(self.zeros, self.si_gen)

    @cached_property
    def soi_only(self) -> SampledSignal:
        return self.detect(self.components.soi_scaled, self.zeros)

    # -- reference path --------------------------------------------------------

    @property
    def rate_ratio(self) -> float:
        return self.generation_rate / self.frontend.osc_sample_rate

    def reference(self, gain: float, fine_points: int) -> SampledSignal:
        """Reference drive: scaled, delayed by integer generation points.

        The gain (with any configured gain error) multiplies the waveform
        before rate conversion; both operations are linear, so it is applied to
        the cached generation-rate copy.
        """
        g = gain * 10 ** (self.impairments.gain_error_db / 20)
        ref = self.si_gen.replace(self.si_gen.samples * g)
        if self.impairments.fine_tune_enabled and self.impairments.extra_delay_s > 0:
            return delay_fractional(ref, fine_points / self.generation_rate
                                    + self.impairments.extra_delay_s)
        return delay_integer(ref, fine_points)

    def analog(self, gain: float, fine_points: int, *, with_soi: bool = True) -> SampledSignal:
        rx = self.received if with_soi else self.received_without_soi
        return self.detect(rx, self.reference(gain, fine_points))

    # -- measurement -----------------------------------------------------------

    def settled(self, sig: SampledSignal) -> SampledSignal:
        n = int(len(sig) * self.settle_fraction)
        return sig.replace(sig.samples[n:])

    @property
    def exclusions(self) -> tuple[Band, ...]:
        if self.soi_band is None or self.channel.soi_rel_power_db is None:
            return ()
        lo, hi = self.soi_band
        pad = (hi - lo) * self.soi_guard / 2
        return ((lo - pad, hi + pad),)

    def band_power_db(self, sig: SampledSignal) -> float:
        psd = welch_psd(self.settled(sig), self.welch_segment, self.welch_overlap)
        return band_power(psd, *self.si_band, exclude=self.exclusions)

    @cached_property
    def rx_only_power_db(self) -> float:
        return self.band_power_db(self.rx_only)

    def residual_db(self, gain: float, fine_points: int) -> float:
        """Post-analog in-band power relative to the uncancelled capture."""
        return self.band_power_db(self.analog(gain, fine_points)) - self.rx_only_power_db

    def prematch_context(self, **kw) -> PrematchContext:
        return PrematchContext(capture_rx_only=self.rx_only, capture_ref_only=self.ref_only,
                               tx_digital=self.tx_digital, residual_db=self.residual_db,
                               rate_ratio=self.rate_ratio, **kw)

    def lead_points(self, lead_taps: int) -> int:
        """Generation-grid lead closest to ``lead_taps`` capture samples.

        Behind a mixer the lead is snapped to a whole number of LO cycles, so
        the residual seen by the real-valued digital filter is a plain delay
        rather than a delay plus an LO phase rotation.
        """
        target = lead_taps * self.rate_ratio
        if self.lo_freq is None or self.lo_freq == 0:
            return int(round(target))
        period = self.generation_rate / self.lo_freq
        cands = np.arange(max(0, int(target - 2 * period)), int(target + 2 * period) + 1)
        cycles = cands / period
        off = np.abs(cycles - np.round(cycles))
        ok = cands[off <= off.min() + 1e-9]
        return int(ok[np.argmin(np.abs(ok - target))])

    def digital_reference(self, fine_points: int, lead_taps: int) -> SampledSignal:
        """Clean transmitted SI at the reference arm's timing, advanced by a lead.

        The waveform is delayed on the generation grid (plus the delay-line
        setting when fine tuning is on) and passed through the noise-free
        receive chain, then normalised to unit RMS. The lead lets the filter
        place taps on both sides of the residual direct path.
        """
        lead = min(self.lead_points(lead_taps), fine_points)
        delay = (fine_points - lead) / self.generation_rate
        if self.impairments.fine_tune_enabled:
            delay += self.impairments.extra_delay_s
        x = self.to_capture(delay_fractional(self.si_gen, delay), ideal=True).samples
        rms = np.sqrt(np.mean(x**2))
        return self.tx_digital.replace(x / rms if rms > 0 else x)
