import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal as sps

from oracles import qpsk_demodulate, sine_fit
from photosic.errors import AliasingError, ConfigurationError
from photosic.metrics import spectrogram
from photosic.signals import (SampledSignal, WaveformSpec, delay_fractional, delay_integer,
                              generate, generate_lfm, generate_qpsk, read_sig, resample,
                              rrc_taps, scale, write_sig)

FS = 10e9


def lfm(fc=2.4e9, bw=2e9, duration=10e-6, rate=FS):
    return generate_lfm(WaveformSpec(kind="LFM", center_freq=fc, bandwidth_or_baud=bw,
                                     duration=duration), rate)


def qpsk(fc=2e9, baud=2e9, duration=10e-6, rate=FS, seed=0):
    return generate_qpsk(WaveformSpec(kind="QPSK", center_freq=fc, bandwidth_or_baud=baud,
                                      duration=duration, symbol_seed=seed), rate)


class TestSampledSignal:
    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            SampledSignal(np.array([]), FS)
        with pytest.raises(ValueError):
            SampledSignal(np.array([1.0, np.nan]), FS)
        with pytest.raises(ValueError):
            SampledSignal(np.ones(3), 0.0)

    def test_samples_are_read_only_copies(self):
        x = np.ones(4)
        s = SampledSignal(x, FS)
        x[0] = 5
        assert s.samples[0] == 1
        with pytest.raises(ValueError):
            s.samples[0] = 2

    def test_sig1_round_trip(self, tmp_path):
        s = lfm(duration=1e-7)
        data = s.to_bytes()
        assert data[:4] == b"SIG1" and len(data) == 24 + 8 * len(s)
        assert int.from_bytes(data[8:16], "little") == len(s)
        write_sig(tmp_path / "x.sig", s)
        back = read_sig(tmp_path / "x.sig")
        assert back.sample_rate == s.sample_rate
        assert np.array_equal(back.samples, s.samples)

    def test_sig1_rejects_corrupt(self):
        data = lfm(duration=1e-8).to_bytes()
        with pytest.raises(ValueError, match="magic"):
            SampledSignal.from_bytes(b"XXXX" + data[4:])
        with pytest.raises(ValueError, match="samples"):
            SampledSignal.from_bytes(data[:-8])


class TestLfm:
    def test_sweep_band_and_unit_peak(self):
        s = lfm()
        assert np.max(np.abs(s.samples)) == pytest.approx(1.0, abs=1e-6)
        sg = spectrogram(s, 1024, 256)
        ridge = sg.ridge()
        df = sg.freqs[1]
        assert ridge[0] == pytest.approx(1.4e9, abs=3 * df)
        assert ridge[-1] == pytest.approx(3.4e9, abs=3 * df)

    def test_zero_bandwidth_is_a_tone(self):
        sg = spectrogram(lfm(fc=1e9, bw=0, duration=2e-6), 1024, 256)
        ridge = sg.ridge()
        assert np.ptp(ridge) == 0
        assert ridge[0] == pytest.approx(1e9, abs=sg.freqs[1])

    def test_ridge_slope_matches_chirp_rate(self):
        # 1 GHz over 10 us: 1e14 Hz/s; the ridge must track the line within one bin
        s = lfm(fc=2e9, bw=1e9)
        sg = spectrogram(s, 1024, 256)
        df = sg.freqs[1]
        expected = 1.5e9 + 1e14 * sg.times
        assert np.max(np.abs(sg.ridge() - expected)) <= df
        slope = np.polyfit(sg.times, sg.ridge(), 1)[0]
        assert slope == pytest.approx(1e14, rel=0.01)

    def test_deterministic(self):
        assert np.array_equal(lfm(duration=1e-7).samples, lfm(duration=1e-7).samples)

    def test_nyquist_violation_names_bound(self):
        with pytest.raises(ConfigurationError, match="Nyquist"):
            lfm(fc=4.5e9, bw=2e9)
        with pytest.raises(ConfigurationError, match="below 0"):
            lfm(fc=0.5e9, bw=2e9)

    def test_autocorrelation_peak_to_sidelobe(self):
        # time-bandwidth product 2000
        x = lfm(duration=1e-6).samples
        a = sps.hilbert(x)
        c = np.abs(sps.correlate(a, a, mode="full", method="fft"))
        mid = len(x) - 1
        side = np.max(np.concatenate([c[:mid - 5], c[mid + 6:]]))
        assert 20 * np.log10(c[mid] / side) > 10


class TestQpsk:
    def test_seed_determinism(self):
        a, b = qpsk(duration=1e-6, seed=3), qpsk(duration=1e-6, seed=3)
        assert a.samples.tobytes() == b.samples.tobytes()
        assert not np.array_equal(a.samples, qpsk(duration=1e-6, seed=4).samples)

    def test_occupied_band(self):
        s = qpsk()
        f, p = sps.welch(s.samples, fs=FS, nperseg=4096)
        pdb = 10 * np.log10(p / p.max())
        # -20 dB edges for 2 Gbaud, rolloff 0.35 at 2 GHz: about 0.65 and 3.35 GHz
        above = f[pdb > -20]
        assert above.min() == pytest.approx(0.65e9, abs=0.1e9)
        assert above.max() == pytest.approx(3.35e9, abs=0.1e9)

    @pytest.mark.parametrize("fc,baud", [(2e9, 2e9), (1.2e9, 1e9), (0.8e9, 0.5e9)])
    def test_loopback_demodulation(self, fc, baud):
        s = qpsk(fc=fc, baud=baud, duration=2e-6)
        sps_ = int(round(FS / baud))
        n = int(2e-6 * baud) - 16
        sent = s.meta["symbols"][:n]
        got = qpsk_demodulate(s.samples, FS, fc, baud, rrc_taps(0.35, sps_, 16), n)
        assert np.array_equal(np.sign(got.real), np.sign(sent.real))
        assert np.array_equal(np.sign(got.imag), np.sign(sent.imag))

    def test_non_integer_oversampling(self):
        s = qpsk(fc=8e9, baud=0.1e9, rate=64e9, duration=1e-6)
        assert len(s) == 64000
        assert np.max(np.abs(s.samples)) == pytest.approx(1.0)


class TestResample:
    def test_identity_at_same_rate(self):
        s = lfm(duration=1e-7)
        assert resample(s, FS) is s

    def test_round_trip_psd(self):
        s = lfm(fc=2e9, bw=1e9, duration=4e-6)
        back = resample(resample(s, 64e9), FS)
        f, p0 = sps.welch(s.samples[2000:-2000], fs=FS, nperseg=2048)
        _, p1 = sps.welch(back.samples[2000:-2000], fs=FS, nperseg=2048)
        band = (f > 1.6e9) & (f < 2.4e9)
        assert np.max(np.abs(10 * np.log10(p1[band] / p0[band]))) < 0.1

    def test_tone_amplitude_preserved(self):
        tone = lfm(fc=1e9, bw=0, duration=1e-6)
        up = resample(tone, 64e9)
        core = slice(6400, -6400)
        amp, _ = sine_fit(up.samples[core], 64e9, 1e9)
        assert amp == pytest.approx(1.0, rel=0.005)

    def test_aliasing_is_an_error(self):
        s = lfm(fc=8e9, bw=1e9, duration=1e-7, rate=64e9)
        with pytest.raises(AliasingError):
            resample(s, FS)

    def test_resample_commutes_with_on_grid_delay(self):
        s = resample(lfm(fc=2e9, bw=1e9, duration=2e-6), 64e9)
        a = resample(delay_integer(s, 64 * 7), FS).samples
        b = delay_integer(resample(s, FS), 70).samples
        core = slice(500, -500)
        err = np.sum((a[core] - b[core]) ** 2) / np.sum(b[core] ** 2)
        assert err < 1e-5


class TestDelay:
    def test_integer_delay(self):
        s = lfm(duration=1e-7, rate=64e9)
        d = delay_integer(s, 482)
        assert 482 / 64e9 == pytest.approx(7.53125e-9, abs=1e-18)
        assert np.all(d.samples[:482] == 0)
        assert np.array_equal(d.samples[482:], s.samples[:-482])
        assert delay_integer(s, 0) == s

    def test_integer_delay_xcorr_peak(self):
        s = lfm(duration=1e-7, rate=64e9)
        d = delay_integer(s, 482)
        c = sps.correlate(d.samples, s.samples, mode="full")
        lags = sps.correlation_lags(len(d), len(s))
        assert lags[np.argmax(c)] == 482

    def test_integer_delay_errors(self):
        s = lfm(duration=1e-9)
        with pytest.raises(ValueError):
            delay_integer(s, len(s))
        with pytest.raises(ValueError):
            delay_integer(s, -1)

    @given(a=st.integers(0, 200), b=st.integers(0, 200))
    @settings(max_examples=30, deadline=None)
    def test_composition(self, a, b):
        s = SampledSignal(np.random.default_rng(0).normal(size=1000), FS)
        two = delay_integer(delay_integer(s, a), b)
        one = delay_integer(s, a + b)
        assert np.array_equal(two.samples, one.samples)

    def test_fractional_matches_integer_on_grid(self):
        s = lfm(fc=2e9, bw=1e9, duration=1e-6)
        for delay, k in ((5e-9, 50), (0.0, 0)):
            a = delay_fractional(s, delay).samples
            b = delay_integer(s, k).samples
            err = np.sum((a - b) ** 2) / np.sum(b**2)
            assert err == 0 or 10 * np.log10(err) < -60

    def test_fractional_phase_of_tone(self):
        tone = lfm(fc=1e9, bw=0, duration=1e-6)
        d = delay_fractional(tone, 0.25e-9)
        core = slice(200, -200)
        _, p0 = sine_fit(tone.samples[core], FS, 1e9)
        _, p1 = sine_fit(d.samples[core], FS, 1e9)
        assert np.degrees((p0 - p1) % (2 * np.pi)) == pytest.approx(90.0, abs=0.1)

    def test_fractional_off_grid_against_analytic_tone(self):
        tone = lfm(fc=1e9, bw=0, duration=1e-6)
        d = delay_fractional(tone, 0.123e-9)
        t = np.arange(len(tone)) / FS
        ref = np.cos(2 * np.pi * 1e9 * (t - 0.123e-9))
        core = slice(200, -200)
        err = np.sum((d.samples[core] - ref[core]) ** 2) / np.sum(ref[core] ** 2)
        assert 10 * np.log10(err) < -60

    def test_fractional_errors(self):
        s = lfm(duration=1e-8)
        with pytest.raises(ValueError):
            delay_fractional(s, -1e-12)
        with pytest.raises(ValueError):
            delay_fractional(s, 1e-8)


class TestScale:
    def test_direct_path_gain_power_drop(self):
        s = lfm(duration=1e-7)
        ratio = scale(s, 0.7868).power / s.power
        assert 10 * np.log10(ratio) == pytest.approx(-2.08, abs=0.005)

    def test_trivial_gains(self):
        s = lfm(duration=1e-7)
        assert np.array_equal(scale(s, 1.0).samples, s.samples)
        assert scale(s, 0.5).power / s.power == pytest.approx(0.25, rel=1e-12)

    @given(g=st.floats(-10, 10, allow_nan=False))
    @settings(max_examples=50, deadline=None)
    def test_energy_gain_law(self, g):
        s = SampledSignal(np.random.default_rng(1).normal(size=256), FS)
        assert scale(s, g).power == pytest.approx(g * g * s.power, rel=1e-12, abs=1e-300)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            scale(lfm(duration=1e-8), float("inf"))


def test_generate_dispatch():
    spec = WaveformSpec(kind="QPSK", center_freq=1e9, bandwidth_or_baud=0.5e9, duration=1e-7)
    assert generate(spec, FS).meta["kind"] == "QPSK"


def test_slicing_keeps_rate():
    x = SampledSignal(np.arange(10.0), 10e9)
    assert x[2:5] == SampledSignal(np.array([2.0, 3.0, 4.0]), 10e9)
    with pytest.raises(TypeError):
        x[::2]
    with pytest.raises(TypeError):
        x[3]
