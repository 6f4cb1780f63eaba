"""Audio frontend: WAV ingestion, resampling, normalization, chunking, log-Mel features.

Feature geometry is fixed to the values the encoder family expects:
16 kHz input, 25 ms analysis window, 10 ms hop, 80 mel bins, 30 s context
(giving exactly 3000 frames for a padded buffer). All functions are pure.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import ceil, log

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import DegenerateFilter, EmptyAudio, InvalidRate, TooShort, UnreadableFile

SAMPLE_RATE = 16000      # Hz, canonical model rate
N_FFT = 400              # 25 ms analysis window
HOP_LENGTH = 160         # 10 ms hop
N_MELS = 80
CONTEXT_SECONDS = 30.0   # encoder audio context
MEL_FLOOR = 1e-10        # clamp before log; silence maps to log(MEL_FLOOR)
LOG_FLOOR = log(MEL_FLOOR)


@dataclass(eq=False)
class AudioBuffer:
    """Mono waveform with its sample rate. Samples are float64 in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise InvalidRate(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(eq=False)
class LogMelSpectrogram:
    """n_frames x n_mels matrix of natural-log filterbank energies."""

    values: np.ndarray
    n_mels: int = N_MELS
    frame_hop_s: float = HOP_LENGTH / SAMPLE_RATE

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def read_wav(source) -> AudioBuffer:
    """Read a RIFF/WAVE file (path, file object, or bytes) into a mono buffer.

    PCM16 and IEEE float32 payloads are accepted; stereo is averaged to mono.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(bytes(source))
    try:
        rate, data = wavfile.read(source)
    except Exception as exc:
        raise UnreadableFile(f"not a readable WAV file: {exc}") from exc
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    else:
        raise UnreadableFile(f"unsupported WAV sample format {data.dtype}")
    if samples.size == 0:
        raise EmptyAudio("WAV file holds no samples")
    return AudioBuffer(samples, int(rate))


def write_wav(path, audio: AudioBuffer) -> None:
    """Write a mono float32 WAV file."""
    wavfile.write(path, audio.sample_rate_hz, audio.samples.astype(np.float32))


def resample(audio: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Band-limited (windowed-sinc polyphase) resampling to target_hz."""
    if len(audio) == 0:
        raise EmptyAudio("cannot resample an empty buffer")
    if target_hz <= 0:
        raise InvalidRate(f"target_hz must be positive, got {target_hz}")
    if target_hz == audio.sample_rate_hz:
        return AudioBuffer(audio.samples.copy(), target_hz)
    ratio = Fraction(target_hz, audio.sample_rate_hz)
    out = resample_poly(audio.samples, ratio.numerator, ratio.denominator)
    return AudioBuffer(out, target_hz)


def normalize(audio: AudioBuffer) -> AudioBuffer:
    """Peak normalization: max |sample| becomes exactly 1; silence is unchanged."""
    peak = np.max(np.abs(audio.samples)) if len(audio) else 0.0
    if peak == 0.0:
        return AudioBuffer(audio.samples.copy(), audio.sample_rate_hz)
    return AudioBuffer(audio.samples / peak, audio.sample_rate_hz)


def pad_or_trim(audio: AudioBuffer, seconds: float) -> AudioBuffer:
    """Force the buffer to an exact duration: zero-pad the tail or truncate."""
    if seconds <= 0:
        raise InvalidRate(f"seconds must be positive, got {seconds}")
    target = int(round(seconds * audio.sample_rate_hz))
    n = len(audio)
    if n == target:
        out = audio.samples.copy()
    elif n > target:
        out = audio.samples[:target].copy()
    else:
        out = np.concatenate([audio.samples, np.zeros(target - n)])
    return AudioBuffer(out, audio.sample_rate_hz)


def chunk_audio(audio: AudioBuffer, max_seconds: float) -> list[AudioBuffer]:
    """Split into consecutive chunks of at most max_seconds.

    Chunks partition the input exactly: concatenating them reproduces the
    samples, and every chunk except possibly the last has full duration.
    """
    if len(audio) == 0:
        raise EmptyAudio("cannot chunk an empty buffer")
    if max_seconds <= 0:
        raise InvalidRate(f"max_seconds must be positive, got {max_seconds}")
    step = int(round(max_seconds * audio.sample_rate_hz))
    n = len(audio)
    return [
        AudioBuffer(audio.samples[i : i + step].copy(), audio.sample_rate_hz)
        for i in range(0, n, step)
    ]


def hz_to_mel(f):
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(n_fft: int = N_FFT, n_mels: int = N_MELS,
                   sample_rate_hz: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular filterbank, n_mels x (n_fft//2 + 1), centers equally spaced
    on the mel scale between 0 Hz and Nyquist."""
    if n_mels < 2:
        raise DegenerateFilter(f"need at least 2 mel bins, got {n_mels}")
    n_freqs = n_fft // 2 + 1
    bin_hz = np.arange(n_freqs) * sample_rate_hz / n_fft
    mel_pts = np.linspace(0.0, hz_to_mel(sample_rate_hz / 2), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)

    fb = np.zeros((n_mels, n_freqs))
    for m in range(n_mels):
        lo, ctr, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        rising = (bin_hz - lo) / (ctr - lo)
        falling = (hi - bin_hz) / (hi - ctr)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    if np.any(fb.sum(axis=1) == 0.0):
        raise DegenerateFilter(
            f"{n_mels} mel bins exceed the resolution of a {n_fft}-point FFT "
            f"at {sample_rate_hz} Hz"
        )
    return fb


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft_power(samples: np.ndarray, n_fft: int = N_FFT,
               hop: int = HOP_LENGTH) -> np.ndarray:
    """Hann-windowed power spectrogram, frame count floor(len/hop).

    The tail is zero-padded so the final frames have full windows.
    """
    n_frames = len(samples) // hop
    needed = (n_frames - 1) * hop + n_fft
    padded = np.concatenate([samples, np.zeros(max(0, needed - len(samples)))])
    frames = sliding_window_view(padded, n_fft)[:: hop][:n_frames]
    spec = np.fft.rfft(frames * _hann_periodic(n_fft), axis=1)
    return spec.real**2 + spec.imag**2


def log_mel(audio: AudioBuffer) -> LogMelSpectrogram:
    """Log-Mel feature matrix for a 16 kHz buffer (resample first if needed)."""
    if audio.sample_rate_hz != SAMPLE_RATE:
        raise InvalidRate(
            f"log_mel expects {SAMPLE_RATE} Hz audio, got {audio.sample_rate_hz} Hz"
        )
    if len(audio) < N_FFT:
        raise TooShort(f"need at least {N_FFT} samples, got {len(audio)}")
    power = stft_power(audio.samples)
    mel = power @ mel_filterbank().T
    values = np.log(np.maximum(mel, MEL_FLOOR))
    return LogMelSpectrogram(values)


def num_chunks(duration_s: float, max_seconds: float) -> int:
    return max(1, ceil(duration_s / max_seconds))
