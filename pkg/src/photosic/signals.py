"""
Waveform synthesis and sample-domain manipulation.

Everything flows between stages as a :class:`SampledSignal`: a real-valued
sample array with an explicit sample rate. Digital processing runs at the
10 GSa/s processing rate; waveforms headed for the arbitrary waveform
generator live on the 64 GSa/s generation grid.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import signal as sps
from scipy.special import i0

from .errors import AliasingError, ConfigurationError

PROCESSING_RATE = 10e9
GENERATION_RATE = 64e9

SIG_MAGIC = b"SIG1"
_SIG_HEADER = struct.Struct("<4s4xQd")  # 24 bytes


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Real waveform plus sample rate.

    The sample array is copied on construction and marked read-only, so a
    signal can be shared freely between stages and threads.
    """

    samples: np.ndarray
    sample_rate: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        if x.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if x.size == 0:
            raise ValueError("a signal needs at least one sample")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, SampledSignal):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    __hash__ = None

    def __getitem__(self, index: slice) -> "SampledSignal":
        """Time slice at the same rate (step slicing would change the rate, so it is refused)."""
        if not isinstance(index, slice) or index.step not in (None, 1):
            raise TypeError("SampledSignal supports contiguous slices only")
        return self.replace(self.samples[index])

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def power(self) -> float:
        """Mean-square value (V^2 for voltage signals)."""
        return float(np.mean(self.samples**2))

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def replace(self, samples, **meta) -> "SampledSignal":
        """New signal at the same rate; ``meta`` entries are merged in."""
        return SampledSignal(samples, self.sample_rate, {**self.meta, **meta})

    def __add__(self, other: "SampledSignal") -> "SampledSignal":
        _check_compatible(self, other)
        return SampledSignal(self.samples + other.samples, self.sample_rate)

    def __sub__(self, other: "SampledSignal") -> "SampledSignal":
        _check_compatible(self, other)
        return SampledSignal(self.samples - other.samples, self.sample_rate)

    # SIG1 binary dump: 24-byte header then little-endian float64 samples.
    def to_bytes(self) -> bytes:
        header = _SIG_HEADER.pack(SIG_MAGIC, self.samples.size, self.sample_rate)
        return header + self.samples.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SampledSignal":
        if len(data) < _SIG_HEADER.size:
            raise ValueError("truncated SIG1 header")
        magic, count, rate = _SIG_HEADER.unpack_from(data)
        if magic != SIG_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {SIG_MAGIC!r}")
        body = data[_SIG_HEADER.size:]
        if len(body) != 8 * count:
            raise ValueError(f"header says {count} samples, body holds {len(body) // 8}")
        return cls(np.frombuffer(body, dtype="<f8"), rate)


def _check_compatible(a: SampledSignal, b: SampledSignal):
    if a.sample_rate != b.sample_rate:
        raise ValueError(f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}")
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")


def write_sig(path, sig: SampledSignal):
    with open(path, "wb") as fh:
        fh.write(sig.to_bytes())


def read_sig(path) -> SampledSignal:
    with open(path, "rb") as fh:
        return SampledSignal.from_bytes(fh.read())


class WaveformSpec(BaseModel):
    """Description of an LFM chirp or RRC-shaped QPSK waveform.

    ``bandwidth_or_baud`` is the sweep bandwidth (Hz) for LFM and the symbol
    rate (Bd) for QPSK.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["LFM", "QPSK"]
    center_freq: float = Field(ge=0)
    bandwidth_or_baud: float = Field(ge=0)
    duration: float = Field(default=10e-6, gt=0)
    rolloff: float = Field(default=0.35, ge=0, le=1)
    symbol_seed: int = 0

    @property
    def occupied_bandwidth(self) -> float:
        if self.kind == "LFM":
            return self.bandwidth_or_baud
        return (1 + self.rolloff) * self.bandwidth_or_baud

    @property
    def band(self) -> tuple[float, float]:
        half = self.occupied_bandwidth / 2
        return self.center_freq - half, self.center_freq + half

    def check_band(self, sample_rate: float):
        """Raise :class:`ConfigurationError` unless the band fits in [0, fs/2)."""
        lo, hi = self.band
        if lo < 0:
            raise ConfigurationError(
                f"{self.kind} band lower edge {lo:.4g} Hz is below 0 Hz "
                f"(center - occupied/2 must be >= 0)")
        if hi >= sample_rate / 2:
            raise ConfigurationError(
                f"{self.kind} band upper edge {hi:.4g} Hz exceeds Nyquist "
                f"{sample_rate / 2:.4g} Hz (center + occupied/2 must be < fs/2)")


def _n_samples(duration, rate):
    return int(round(duration * rate))


def generate_lfm(spec: WaveformSpec, sample_rate: float) -> SampledSignal:
    """Unit-peak real chirp sweeping center -/+ bandwidth/2 over the duration."""
    if spec.kind != "LFM":
        raise ConfigurationError(f"generate_lfm needs an LFM spec, got {spec.kind}")
    spec.check_band(sample_rate)
    n = _n_samples(spec.duration, sample_rate)
    t = np.arange(n) / sample_rate
    f0 = spec.center_freq - spec.bandwidth_or_baud / 2
    k = spec.bandwidth_or_baud / spec.duration
    phase = 2 * np.pi * (f0 * t + 0.5 * k * t**2)
    return SampledSignal(np.cos(phase), sample_rate, {"kind": "LFM", "chirp_rate": k})


def rrc_taps(rolloff: float, sps: int, span: int) -> np.ndarray:
    """Root-raised-cosine impulse response, unit energy, ``span`` symbols long."""
    t = np.arange(-span * sps // 2, span * sps // 2 + 1) / sps
    a = rolloff
    h = np.empty_like(t)
    for i, ti in enumerate(t):
        if ti == 0:
            h[i] = 1 - a + 4 * a / np.pi
        elif a > 0 and abs(abs(4 * a * ti) - 1) < 1e-12:
            h[i] = a / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * a))
                                     + (1 - 2 / np.pi) * np.cos(np.pi / (4 * a)))
        else:
            h[i] = (np.sin(np.pi * ti * (1 - a)) + 4 * a * ti * np.cos(np.pi * ti * (1 + a))) \
                / (np.pi * ti * (1 - (4 * a * ti) ** 2))
    return h / np.sqrt(np.sum(h**2))


def qpsk_symbols(seed: int, count: int) -> np.ndarray:
    """Gray-mapped unit-energy QPSK symbols from a seeded generator."""
    bits = np.random.default_rng(seed).integers(0, 2, size=(count, 2))
    return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / np.sqrt(2)


def generate_qpsk(spec: WaveformSpec, sample_rate: float, span: int = 16) -> SampledSignal:
    """Unit-peak passband QPSK with RRC pulse shaping.

    The symbol with index 0 is centred on t = 0; ``span // 2`` extra symbols
    are drawn on either side so the waveform is in steady state over the whole
    record. ``meta["symbols"]`` holds the symbols from t = 0 onwards and
    ``meta["scale"]`` the factor that brought the peak to 1.
    """
    if spec.kind != "QPSK":
        raise ConfigurationError(f"generate_qpsk needs a QPSK spec, got {spec.kind}")
    if spec.bandwidth_or_baud <= 0:
        raise ConfigurationError("QPSK symbol rate must be positive")
    spec.check_band(sample_rate)

    n = _n_samples(spec.duration, sample_rate)
    ratio = Fraction(sample_rate / spec.bandwidth_or_baud).limit_denominator(1000)
    up, down = ratio.numerator, ratio.denominator
    guard = span // 2
    n_sym = int(math.ceil(n / float(ratio))) + 1
    syms = qpsk_symbols(spec.symbol_seed, n_sym + 2 * guard)

    h = rrc_taps(spec.rolloff, up, span)
    bb = sps.upfirdn(h, syms, up=up)
    # h is centred on index len(h)//2; symbol `guard` is the t=0 symbol.
    start = len(h) // 2 + guard * up
    bb = bb[start:start + (n + 1) * down]
    if down > 1:
        bb = sps.resample_poly(bb, 1, down)
    bb = bb[:n]

    t = np.arange(n) / sample_rate
    carrier = np.exp(2j * np.pi * spec.center_freq * t)
    x = np.real(bb * carrier)
    scale = 1.0 / np.max(np.abs(x))
    return SampledSignal(x * scale, sample_rate, {
        "kind": "QPSK", "symbols": syms[guard:], "samples_per_symbol": float(ratio),
        "scale": scale})


def generate(spec: WaveformSpec, sample_rate: float) -> SampledSignal:
    if spec.kind == "LFM":
        return generate_lfm(spec, sample_rate)
    return generate_qpsk(spec, sample_rate)


def _spectral_fraction_above(x: np.ndarray, rate: float, cutoff: float) -> float:
    spec = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(x.size, 1 / rate)
    total = spec.sum()
    if total == 0:
        return 0.0
    return float(spec[f > cutoff].sum() / total)


def resample(sig: SampledSignal, new_rate: float, *, max_out_of_band_db: float | None = -40.0,
             kaiser_beta: float = 8.0) -> SampledSignal:
    """Polyphase band-limited rate conversion.

    When reducing the rate, the fraction of signal power above the new Nyquist
    frequency is checked first and :class:`AliasingError` raised if it exceeds
    ``max_out_of_band_db``. Pass ``None`` when the caller has already
    band-limited the signal on purpose (e.g. an oscilloscope front end).
    """
    if new_rate <= 0:
        raise ConfigurationError(f"new_rate must be positive, got {new_rate}")
    if new_rate == sig.sample_rate:
        return sig
    if new_rate < sig.sample_rate and max_out_of_band_db is not None:
        frac = _spectral_fraction_above(sig.samples, sig.sample_rate, new_rate / 2)
        if frac > 10 ** (max_out_of_band_db / 10):
            raise AliasingError(
                f"{10 * np.log10(frac):.1f} dB of the signal power lies above the new "
                f"Nyquist frequency {new_rate / 2:.4g} Hz")
    ratio = Fraction(new_rate / sig.sample_rate).limit_denominator(10000)
    y = sps.resample_poly(sig.samples, ratio.numerator, ratio.denominator,
                          window=("kaiser", kaiser_beta))
    return SampledSignal(y, new_rate, dict(sig.meta))


def _shift(x: np.ndarray, k: int) -> np.ndarray:
    """Delay by ``k`` samples (advance if negative), zero fill, same length."""
    y = np.zeros_like(x)
    if k >= 0:
        y[k:] = x[:x.size - k]
    else:
        y[:k] = x[-k:]
    return y


def delay_integer(sig: SampledSignal, points: int) -> SampledSignal:
    """output[n] = input[n - points], zero-filled head, length preserved."""
    points = int(points)
    if points < 0:
        raise ValueError(f"delay must be non-negative, got {points}")
    if points >= len(sig):
        raise ValueError(f"delay of {points} points exceeds signal length {len(sig)}")
    return sig.replace(_shift(sig.samples, points))


def fractional_delay_kernel(frac: float, half_width: int = 64, beta: float = 8.0) -> np.ndarray:
    """Kaiser-windowed sinc taps for a delay of ``frac`` in [0, 1) samples.

    Tap ``j`` multiplies ``x[n - (j - half_width)]``.
    """
    k = np.arange(-half_width, half_width + 1) - frac
    w = i0(beta * np.sqrt(np.clip(1 - (k / (half_width + 1)) ** 2, 0, None))) / i0(beta)
    return np.sinc(k) * w


def delay_fractional(sig: SampledSignal, delay_s: float, half_width: int = 64) -> SampledSignal:
    """Delay by an arbitrary time using windowed-sinc interpolation."""
    if delay_s < 0:
        raise ValueError(f"delay must be non-negative, got {delay_s}")
    if delay_s >= sig.duration:
        raise ValueError(f"delay {delay_s:.4g} s is not shorter than the signal ({sig.duration:.4g} s)")
    d = delay_s * sig.sample_rate
    n0 = int(np.floor(d))
    frac = d - n0
    if frac < 1e-9:
        return delay_integer(sig, n0)
    if 1 - frac < 1e-9:
        return delay_integer(sig, n0 + 1) if n0 + 1 < len(sig) else sig.replace(np.zeros(len(sig)))
    h = fractional_delay_kernel(frac, half_width)
    y = sps.oaconvolve(sig.samples, h, mode="full")[half_width:half_width + len(sig)]
    return sig.replace(_shift(y, n0))


def scale(sig: SampledSignal, gain: float) -> SampledSignal:
    if not math.isfinite(gain):
        raise ValueError(f"gain must be finite, got {gain}")
    return sig.replace(sig.samples * gain)
