"""Audio segment handling: WAV I/O, cutting by transmission times, and
8 kHz to 16 kHz resampling."""

import wave
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import CorruptHeader, OutOfBounds, UnsupportedFormat, WrongRate
from .transcripts import TransmissionRecord

VALID_RATES = (8000, 16000)
CLAMP_TOLERANCE_S = 0.5  # trailing records may overrun a continuous recording


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate_hz: int

    def __post_init__(self):
        if self.sample_rate_hz not in VALID_RATES:
            raise WrongRate(f"sample rate {self.sample_rate_hz} not in {VALID_RATES}")
        s = self.samples
        if s.dtype != np.float64:
            raise UnsupportedFormat(f"samples must be float64, got {s.dtype}")
        if len(s) and (abs(s).max() > 1.0 or not np.isfinite(s).all()):
            raise UnsupportedFormat("samples outside [-1, 1]")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class Skipped:
    reason: str  # "too_long" | "source_too_short"


def read_wav(path: str) -> AudioBuffer:
    """Read a mono 16-bit PCM RIFF/WAVE file; samples scale by 1/32768."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getcomptype() != "NONE":
                raise UnsupportedFormat(f"compressed wav ({w.getcomptype()})")
            if w.getnchannels() != 1:
                raise UnsupportedFormat(f"{w.getnchannels()} channels, need mono")
            if w.getsampwidth() != 2:
                raise UnsupportedFormat(f"{8 * w.getsampwidth()}-bit, need 16-bit")
            rate = w.getframerate()
            frames = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise CorruptHeader(str(exc)) from exc
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, rate)


def write_wav(path: str, audio: AudioBuffer) -> None:
    pcm = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate_hz)
        w.writeframes(pcm.tobytes())


def cut_segment(audio: AudioBuffer, record: TransmissionRecord,
                min_s: float = 5.0, max_s: float = 30.0):
    """Cut [start_s, end_s) out of `audio`.

    Spans longer than max_s are skipped. Spans shorter than min_s are
    extended with trailing source audio, then leading audio once the file
    end is reached, to exactly min_s. Times past the file end by less
    than CLAMP_TOLERANCE_S clamp; farther is an error.
    """
    sr = audio.sample_rate_hz
    n = len(audio.samples)
    duration = n / sr
    for t in (record.start_s, record.end_s):
        if t - duration >= CLAMP_TOLERANCE_S:
            raise OutOfBounds(f"time {t} is {t - duration:.2f}s past file end")
    start = min(int(round(record.start_s * sr)), n)
    end = min(int(round(record.end_s * sr)), n)

    span = end - start
    if span > int(round(max_s * sr)):
        return Skipped("too_long")

    min_len = int(round(min_s * sr))
    if span >= min_len:
        return AudioBuffer(audio.samples[start:end].copy(), sr)

    need = min_len - span
    trail = min(need, n - end)
    lead = min(need - trail, start)
    if trail + lead < need:
        return Skipped("source_too_short")
    out = audio.samples[start - lead:end + trail].copy()
    return AudioBuffer(out, sr)


def _half_sample_taps(n_taps: int = 48) -> np.ndarray:
    """Odd-phase taps of the factor-2 interpolator: a Hann-windowed sinc
    evaluated at half-sample offsets, normalized to unit DC gain. The even
    phase of the underlying 2*n_taps+1 prototype reduces to the identity,
    so even outputs copy the input exactly."""
    k = np.arange(n_taps)
    center = (n_taps - 1) / 2.0  # 23.5: taps sit at offsets k - 23.5
    # odd-phase slice of a Hann window spanning the 2*n_taps+1 prototype
    window = np.sin(np.pi * (2 * k + 1) / (2 * n_taps)) ** 2
    taps = np.sinc(k - center) * window
    return taps / taps.sum()


_TAPS = _half_sample_taps()


def resample_8k_to_16k(audio: AudioBuffer) -> AudioBuffer:
    """Upsample 8 kHz audio to 16 kHz (zero-insertion plus a windowed-sinc
    low pass at half the output Nyquist). Output has exactly twice the
    input length and is clamped to [-1, 1]."""
    if audio.sample_rate_hz != 8000:
        raise WrongRate(f"expected 8000 Hz input, got {audio.sample_rate_hz}")
    y = _kernels.upsample2(audio.samples, _TAPS)
    np.clip(y, -1.0, 1.0, out=y)
    return AudioBuffer(y, 16000)
