"""
Spectral measurements: Welch PSD, band power, cancellation depth,
spectrograms and SOI power bookkeeping.

All levels are relative dB; no absolute calibration is attempted.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .signals import SampledSignal

Band = tuple[float, float]


@dataclass(frozen=True)
class PsdEstimate:
    freqs: np.ndarray
    psd: np.ndarray        # dB of power per Hz, relative
    resolution_bw: float

    @property
    def linear(self) -> np.ndarray:
        return 10 ** (self.psd / 10)

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.freqs, self.psd]), delimiter=",",
                   header="freq_hz,psd_db", comments="", fmt="%.9g")


def welch_psd(sig: SampledSignal, segment_len: int = 8192, overlap: float = 0.5) -> PsdEstimate:
    """Averaged Hann-windowed periodogram, one-sided, density scaling."""
    if segment_len > len(sig):
        raise ValueError(f"segment length {segment_len} exceeds signal length {len(sig)}")
    if not 0 <= overlap < 1:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    f, pxx = sps.welch(sig.samples, fs=sig.sample_rate, window="hann", nperseg=segment_len,
                       noverlap=int(segment_len * overlap), detrend=False,
                       scaling="density", return_onesided=True)
    win = sps.get_window("hann", segment_len)
    enbw = sig.sample_rate * np.sum(win**2) / np.sum(win) ** 2
    return PsdEstimate(f, 10 * np.log10(pxx + 1e-300), float(enbw))


def _band_mask(freqs: np.ndarray, f_lo: float, f_hi: float,
               exclude: Sequence[Band] = ()) -> np.ndarray:
    mask = (freqs >= f_lo) & (freqs <= f_hi)
    for a, b in exclude:
        mask &= ~((freqs >= a) & (freqs <= b))
    return mask


def band_power(psd: PsdEstimate, f_lo: float, f_hi: float,
               exclude: Sequence[Band] = ()) -> float:
    """Integrated PSD over [f_lo, f_hi] minus any ``exclude`` bands, in dB.

    A full-band integral reproduces the mean-square power of the signal.
    """
    if f_hi <= f_lo:
        raise ValueError(f"empty band [{f_lo}, {f_hi}]")
    if f_lo < psd.freqs[0] - psd.bin_width or f_hi > psd.freqs[-1] + psd.bin_width:
        raise ValueError(f"band [{f_lo:.4g}, {f_hi:.4g}] is outside the PSD grid")
    mask = _band_mask(psd.freqs, f_lo, f_hi, exclude)
    if not mask.any():
        raise ValueError("band contains no PSD bins")
    return float(10 * np.log10(np.sum(psd.linear[mask]) * psd.bin_width + 1e-300))


def cancellation_depth(before: SampledSignal, after: SampledSignal, band: Band,
                       exclude: Sequence[Band] = (), segment_len: int = 8192,
                       overlap: float = 0.5) -> float:
    """Band power before minus after (dB); positive means suppression."""
    if before.sample_rate != after.sample_rate:
        raise ValueError("before/after sample rates differ")
    p0 = band_power(welch_psd(before, segment_len, overlap), *band, exclude=exclude)
    p1 = band_power(welch_psd(after, segment_len, overlap), *band, exclude=exclude)
    return p0 - p1


@dataclass(frozen=True)
class Spectrogram:
    times: np.ndarray
    freqs: np.ndarray
    mag_db: np.ndarray     # shape (freqs, times)

    def ridge(self) -> np.ndarray:
        """Frequency of the strongest bin in each time column."""
        return self.freqs[np.argmax(self.mag_db, axis=0)]

    def to_csv(self, path):
        t, f = np.meshgrid(self.times, self.freqs)
        np.savetxt(path, np.column_stack([t.ravel(), f.ravel(), self.mag_db.ravel()]),
                   delimiter=",", header="time_s,freq_hz,mag_db", comments="", fmt="%.6g")


def spectrogram(sig: SampledSignal, window_len: int = 1024, hop: int | None = None) -> Spectrogram:
    """Hann STFT power density in dB (same scaling as :func:`welch_psd`)."""
    if window_len > len(sig):
        raise ValueError(f"window length {window_len} exceeds signal length {len(sig)}")
    if hop is None:
        hop = window_len // 4
    f, t, sxx = sps.spectrogram(sig.samples, fs=sig.sample_rate, window="hann",
                                nperseg=window_len, noverlap=window_len - hop, detrend=False,
                                scaling="density", mode="psd")
    return Spectrogram(t, f, 10 * np.log10(sxx + 1e-300))


def soi_power_delta(soi_before: SampledSignal, soi_after: SampledSignal, band: Band,
                    segment_len: int = 8192) -> float:
    """Change of SOI-band power (dB) between two renderings of the SOI contribution."""
    p0 = band_power(welch_psd(soi_before, segment_len), *band)
    p1 = band_power(welch_psd(soi_after, segment_len), *band)
    return p1 - p0


@dataclass(frozen=True)
class CancellationReport:
    analog_depth_db: float
    digital_depth_db: float
    total_depth_db: float
    soi_power_delta_db: float
    band: Band
    excluded: tuple[Band, ...]
    psd_before: PsdEstimate
    psd_analog: PsdEstimate
    psd_total: PsdEstimate
    soi_stage_deltas_db: dict

    def scalars(self) -> dict:
        return {
            "analog_depth_db": self.analog_depth_db,
            "digital_depth_db": self.digital_depth_db,
            "total_depth_db": self.total_depth_db,
            "soi_power_delta_db": self.soi_power_delta_db,
            "soi_stage_deltas_db": dict(self.soi_stage_deltas_db),
            "band": {"f_lo": self.band[0], "f_hi": self.band[1]},
            "excluded": [{"f_lo": a, "f_hi": b} for a, b in self.excluded],
        }


def cancellation_report(before: SampledSignal, analog: SampledSignal, total: SampledSignal,
                        band: Band, exclude: Sequence[Band] = (), *,
                        soi_stage_deltas_db: dict | None = None, segment_len: int = 8192,
                        overlap: float = 0.5) -> CancellationReport:
    """Depths for both stages from one PSD pipeline, so analog + digital == total."""
    psds = [welch_psd(s, segment_len, overlap) for s in (before, analog, total)]
    p0, p1, p2 = (band_power(p, *band, exclude=exclude) for p in psds)
    deltas = dict(soi_stage_deltas_db or {})
    return CancellationReport(
        analog_depth_db=p0 - p1, digital_depth_db=p1 - p2, total_depth_db=p0 - p2,
        soi_power_delta_db=float(deltas.get("total", 0.0)), band=tuple(band),
        excluded=tuple(tuple(b) for b in exclude), psd_before=psds[0], psd_analog=psds[1],
        psd_total=psds[2], soi_stage_deltas_db=deltas)


def write_learning_curve(path, squared_error: np.ndarray):
    idx = np.arange(squared_error.size)
    np.savetxt(path, np.column_stack([idx, squared_error]), delimiter=",",
               header="sample_index,squared_error", comments="", fmt=["%d", "%.9g"])
