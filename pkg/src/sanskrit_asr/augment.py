"""Waveform augmentation: pitch shift, time stretch, noise, silence insertion.

Pitch shift is resample-then-stretch: reinterpreting resampled audio at the
original rate scales pitch and duration together, then a phase-vocoder
stretch restores the duration. Each transform has a measurable spectral or
length contract, tested against DFT oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import audio as dsp
from .audio import AudioBuffer
from .data import Dataset, ManifestEntry
from .errors import InvalidPosition, InvalidRate, ZeroSignal

STRETCH_N_FFT = 1024
STRETCH_HOP = 256


def pitch_shift(audio: AudioBuffer, semitones: float) -> AudioBuffer:
    """Scale pitch by 2^(semitones/12), preserving duration to within a hop."""
    if abs(semitones) > 12:
        raise InvalidRate("pitch shift limited to +-12 semitones")
    if semitones == 0:
        return AudioBuffer(audio.samples.copy(), audio.sample_rate_hz)
    factor = 2.0 ** (semitones / 12.0)
    sr = audio.sample_rate_hz
    # Fewer samples at the same playback rate: pitch and speed both scale.
    sped = dsp.resample(audio, round(sr / factor))
    sped = AudioBuffer(sped.samples, sr)
    out = time_stretch(sped, 1.0 / factor)
    # Exact-length contract against the input.
    target = len(audio.samples)
    samples = out.samples
    if len(samples) < target:
        samples = np.concatenate([samples, np.zeros(target - len(samples))])
    return AudioBuffer(samples[:target], sr)


def time_stretch(audio: AudioBuffer, rate: float) -> AudioBuffer:
    """Phase-vocoder stretch: length -> round(len/rate), pitch unchanged."""
    if not 0.5 <= rate <= 2.0:
        raise InvalidRate(f"stretch rate {rate} outside [0.5, 2.0]")
    if rate == 1.0:
        return AudioBuffer(audio.samples.copy(), audio.sample_rate_hz)

    x = audio.samples
    n_fft = STRETCH_N_FFT
    hop_syn = STRETCH_HOP
    hop_ana = max(1, round(hop_syn * rate))
    out_len = round(len(x) / rate)

    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n_fft) / n_fft)
    n_frames = max(1, 1 + math.ceil(max(0, out_len - n_fft) / hop_syn))
    needed = (n_frames - 1) * hop_ana + n_fft
    if len(x) < needed:
        x = np.concatenate([x, np.zeros(needed - len(x))])

    omega = 2 * np.pi * np.arange(n_fft // 2 + 1) / n_fft
    expected = omega * hop_ana

    out = np.zeros((n_frames - 1) * hop_syn + n_fft)
    norm = np.zeros_like(out)
    prev_phase = None
    syn_phase = None
    for k in range(n_frames):
        frame = x[k * hop_ana : k * hop_ana + n_fft] * window
        spec = np.fft.rfft(frame)
        mag = np.abs(spec)
        phase = np.angle(spec)
        if prev_phase is None:
            syn_phase = phase.copy()
        else:
            delta = phase - prev_phase - expected
            delta -= 2 * np.pi * np.round(delta / (2 * np.pi))
            true_freq = omega + delta / hop_ana
            syn_phase = syn_phase + true_freq * hop_syn
        prev_phase = phase
        resyn = np.fft.irfft(mag * np.exp(1j * syn_phase), n=n_fft)
        start = k * hop_syn
        out[start : start + n_fft] += resyn * window
        norm[start : start + n_fft] += window**2
    out /= np.maximum(norm, 1e-8)

    if len(out) < out_len:
        out = np.concatenate([out, np.zeros(out_len - len(out))])
    return AudioBuffer(out[:out_len], audio.sample_rate_hz)


def add_noise(audio: AudioBuffer, snr_db: float, rng_seed: int) -> AudioBuffer:
    """Mix white Gaussian noise at an exact measured SNR. inf passes through."""
    if math.isinf(snr_db) and snr_db > 0:
        return AudioBuffer(audio.samples.copy(), audio.sample_rate_hz)
    p_signal = float(np.mean(audio.samples**2))
    if p_signal == 0.0:
        raise ZeroSignal("cannot set an SNR against silent audio")
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal(len(audio.samples))
    p_noise = float(np.mean(noise**2))
    scale = math.sqrt(p_signal / (10 ** (snr_db / 10) * p_noise))
    return AudioBuffer(audio.samples + scale * noise, audio.sample_rate_hz)


def insert_silence(audio: AudioBuffer, at_s: float, dur_s: float) -> AudioBuffer:
    """Splice dur_s of exact zeros into the waveform at time at_s."""
    sr = audio.sample_rate_hz
    if not 0 <= at_s <= audio.duration_s:
        raise InvalidPosition(f"insertion point {at_s}s outside [0, {audio.duration_s}]s")
    if dur_s < 0:
        raise InvalidPosition("silence duration must be nonnegative")
    at = round(at_s * sr)
    gap = np.zeros(round(dur_s * sr))
    samples = np.concatenate([audio.samples[:at], gap, audio.samples[at:]])
    return AudioBuffer(samples, sr)


@dataclass(frozen=True)
class AugmentPolicy:
    """Enabled transforms with parameter ranges; None disables a transform."""

    pitch_semitones: tuple[float, float] | None = (-2.0, 2.0)
    stretch_rate: tuple[float, float] | None = (0.9, 1.1)
    snr_db: tuple[float, float] | None = (10.0, 30.0)
    silence_s: tuple[float, float] | None = (0.1, 0.5)

    def enabled(self) -> list[str]:
        names = []
        if self.pitch_semitones is not None:
            names.append("pitch")
        if self.stretch_rate is not None:
            names.append("stretch")
        if self.snr_db is not None:
            names.append("noise")
        if self.silence_s is not None:
            names.append("silence")
        return names

    def to_json(self) -> dict:
        return {
            "pitch_semitones": self.pitch_semitones,
            "stretch_rate": self.stretch_rate,
            "snr_db": self.snr_db,
            "silence_s": self.silence_s,
        }

    @classmethod
    def from_json(cls, d: dict) -> "AugmentPolicy":
        def pair(v):
            return None if v is None else (float(v[0]), float(v[1]))

        return cls(
            pitch_semitones=pair(d.get("pitch_semitones", (-2.0, 2.0))),
            stretch_rate=pair(d.get("stretch_rate", (0.9, 1.1))),
            snr_db=pair(d.get("snr_db", (10.0, 30.0))),
            silence_s=pair(d.get("silence_s", (0.1, 0.5))),
        )


def _aug_path(ds: Dataset, original: str) -> str:
    stem, dot, ext = original.rpartition(".")
    existing = {e.audio_path for e in ds.entries}
    n = 0
    while f"{stem}.aug{n}.{ext}" in existing:
        n += 1
    return f"{stem}.aug{n}.{ext}"


def _apply_one(buf: AudioBuffer, name: str, policy: AugmentPolicy, rng) -> AudioBuffer:
    if name == "pitch":
        lo, hi = policy.pitch_semitones
        return pitch_shift(buf, float(rng.uniform(lo, hi)))
    if name == "stretch":
        lo, hi = policy.stretch_rate
        return time_stretch(buf, float(rng.uniform(lo, hi)))
    if name == "noise":
        lo, hi = policy.snr_db
        return add_noise(buf, float(rng.uniform(lo, hi)), int(rng.integers(2**31)))
    if name == "silence":
        lo, hi = policy.silence_s
        dur = float(rng.uniform(lo, hi))
        at = float(rng.uniform(0.0, buf.duration_s))
        return insert_silence(buf, at, dur)
    raise ValueError(f"unknown transform {name!r}")


def augment_subset(
    ds: Dataset, fraction: float, seed: int, policy: AugmentPolicy | None = None
) -> Dataset:
    """Augment round(fraction * n_train) train files; other splits untouched.

    One uniformly chosen enabled transform per selected file. New audio is
    written beside the original with a .augN.wav suffix and appended as a new
    train entry with the transcript unchanged.
    """
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must lie in [0, 1]")
    if policy is None:
        policy = AugmentPolicy()
    names = policy.enabled()
    train = ds.split("train")
    n_pick = round(fraction * len(train))
    if n_pick == 0 or not names:
        return Dataset(list(ds.entries), vocab=ds.vocab, root=ds.root)

    rng = np.random.default_rng(seed)
    picks = rng.choice(len(train), size=n_pick, replace=False)
    new_entries = list(ds.entries)
    working = Dataset(new_entries, vocab=ds.vocab, root=ds.root)
    for idx in sorted(int(i) for i in picks):
        entry = train[idx]
        buf = dsp.read_wav(ds.resolve(entry))
        name = names[int(rng.integers(len(names)))]
        out = _apply_one(buf, name, policy, rng)
        peak = float(np.max(np.abs(out.samples))) if len(out.samples) else 0.0
        if peak > 1.0:
            out = AudioBuffer(out.samples / peak, out.sample_rate_hz)
        rel = _aug_path(working, entry.audio_path)
        target = Path(rel)
        if not target.is_absolute() and ds.root is not None:
            target = ds.root / target
        dsp.write_wav(target, out)
        new_entries.append(
            ManifestEntry(
                audio_path=rel,
                devanagari=entry.devanagari,
                slp1=entry.slp1,
                speaker_id=entry.speaker_id,
                split="train",
                duration_s=len(out.samples) / out.sample_rate_hz,
            )
        )
    return Dataset(new_entries, vocab=ds.vocab, root=ds.root)
