import struct
import wave

import numpy as np
import pytest

from atclab import _kernels
from atclab.corpus.audio import (
    AudioBuffer,
    Skipped,
    _half_sample_taps,
    cut_segment,
    read_wav,
    resample_8k_to_16k,
    write_wav,
)
from atclab.corpus.transcripts import TransmissionRecord
from atclab.errors import CorruptHeader, OutOfBounds, UnsupportedFormat, WrongRate


def rec(start, end):
    return TransmissionRecord("", "", start, end, "words", "f")


def write_pcm(path, values, rate=8000, channels=1, width=2):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(b"".join(struct.pack("<h", v) for v in values) if width == 2
                      else bytes(values))


class TestWavIo:
    def test_frame_count_and_rate(self, tmp_path):
        p = tmp_path / "a.wav"
        write_pcm(p, [0] * 80_000)
        buf = read_wav(p)
        assert len(buf.samples) == 80_000
        assert buf.sample_rate_hz == 8000

    def test_scaling(self, tmp_path):
        p = tmp_path / "a.wav"
        write_pcm(p, [32767, -32768, 0])
        buf = read_wav(p)
        assert buf.samples[0] == pytest.approx(32767 / 32768)
        assert buf.samples[1] == -1.0
        assert buf.samples[2] == 0.0

    def test_stereo_rejected(self, tmp_path):
        p = tmp_path / "a.wav"
        write_pcm(p, [0, 0, 0, 0], channels=2)
        with pytest.raises(UnsupportedFormat):
            read_wav(p)

    def test_8bit_rejected(self, tmp_path):
        p = tmp_path / "a.wav"
        write_pcm(p, [0, 0], width=1)
        with pytest.raises(UnsupportedFormat):
            read_wav(p)

    def test_garbage_rejected(self, tmp_path):
        p = tmp_path / "a.wav"
        p.write_bytes(b"RIFFxxxxNOTWAVE")
        with pytest.raises(CorruptHeader):
            read_wav(p)

    def test_write_read_round_trip(self, tmp_path, rng):
        p = tmp_path / "a.wav"
        samples = np.round(rng.uniform(-1, 1, 1000) * 32768) / 32768
        samples = np.clip(samples, -1, 32767 / 32768)
        write_wav(p, AudioBuffer(samples, 16000))
        back = read_wav(p)
        assert back.sample_rate_hz == 16000
        np.testing.assert_allclose(back.samples, samples, atol=1e-12)


def buffer_of(seconds, rate=8000):
    n = int(seconds * rate)
    return AudioBuffer(np.linspace(-0.5, 0.5, n), rate)


class TestCutSegment:
    def test_span_sample_count(self):
        out = cut_segment(buffer_of(30), rec(10.0, 16.5))
        assert len(out.samples) == 52_000

    def test_short_span_padded_with_following_audio(self):
        audio = buffer_of(30)
        out = cut_segment(audio, rec(10.0, 12.0))
        assert len(out.samples) == 5 * 8000
        start = 10 * 8000
        np.testing.assert_array_equal(out.samples, audio.samples[start:start + 40_000])

    def test_pad_wraps_to_leading_audio_at_file_end(self):
        audio = buffer_of(10)
        out = cut_segment(audio, rec(7.0, 9.0))
        assert len(out.samples) == 5 * 8000
        # 1 s of trailing audio available, remaining 2 s come from before
        np.testing.assert_array_equal(out.samples, audio.samples[5 * 8000:])

    def test_too_long_skipped(self):
        out = cut_segment(buffer_of(40), rec(1.0, 32.0))
        assert out == Skipped("too_long")

    def test_source_too_short(self):
        out = cut_segment(buffer_of(3), rec(0.5, 2.0))
        assert out == Skipped("source_too_short")

    def test_clamp_within_tolerance(self):
        audio = buffer_of(20)
        out = cut_segment(audio, rec(10.0, 20.4))
        assert len(out.samples) == 10 * 8000

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBounds):
            cut_segment(buffer_of(20), rec(10.0, 20.5))


class TestResampler:
    def test_length_doubles(self):
        out = resample_8k_to_16k(buffer_of(0.1))
        assert len(out.samples) == 1600
        assert out.sample_rate_hz == 16000

    def test_dc_preserved(self):
        x = AudioBuffer(np.full(8000, 0.5), 8000)
        y = resample_8k_to_16k(x).samples
        assert np.abs(y[200:-200] - 0.5).max() < 1e-3

    def test_sine_snr_vs_analytic(self):
        t8 = np.arange(8000) / 8000
        x = AudioBuffer(0.9 * np.sin(2 * np.pi * 1000 * t8), 8000)
        y = resample_8k_to_16k(x).samples
        t16 = np.arange(16_000) / 16_000
        ideal = 0.9 * np.sin(2 * np.pi * 1000 * t16)
        trim = 64
        err = y[trim:-trim] - ideal[trim:-trim]
        snr_db = 10 * np.log10(np.sum(ideal[trim:-trim] ** 2) / np.sum(err ** 2))
        assert snr_db >= 40.0

    def test_wrong_rate(self):
        with pytest.raises(WrongRate):
            resample_8k_to_16k(AudioBuffer(np.zeros(100), 16000))

    def test_output_clamped(self):
        x = AudioBuffer(np.resize([1.0, -1.0], 400), 8000)
        y = resample_8k_to_16k(x).samples
        assert np.abs(y).max() <= 1.0

    def test_backends_agree(self, rng):
        x = rng.uniform(-1, 1, 4000)
        taps = _half_sample_taps()
        a = _kernels.pure.upsample2(x, taps)
        b = _kernels.upsample2(x, taps)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    def test_taps_unit_dc(self):
        assert _half_sample_taps().sum() == pytest.approx(1.0, abs=1e-15)
