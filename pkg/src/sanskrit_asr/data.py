"""Manifest-driven corpus handling and the deterministic synthetic corpus.

The synthetic generator maps 16 SLP1 syllables to fixed two-tone dyads so a
toy model can learn the task end to end in minutes. Dyad fundamentals sit on
a 2-semitone grid, which keeps classes separable even under the ood split's
global +1 semitone offset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import audio as dsp
from .errors import ParseError, SplitViolation, UnreadableFile
from .script import Transcript, Vocabulary, build_vocab, slp1_to_deva

SPLITS = ("train", "val", "test", "ood")

# Fixed syllable inventory: one consonant class per place/manner row.
SYLLABLES = (
    "ka", "ga", "ca", "ja", "wa", "qa", "ta", "da",
    "pa", "ba", "ma", "na", "ya", "ra", "la", "sa",
)

BASE_HZ = 220.0
SEMITONE = 2.0 ** (1.0 / 12.0)
# Fundamental per syllable: 2-semitone steps starting at 220 Hz.
DYAD_F1_HZ = tuple(BASE_HZ * SEMITONE ** (2 * i) for i in range(len(SYLLABLES)))
DYAD_INTERVAL = SEMITONE ** 7  # second partial a fifth above
DYAD_SECONDS = 0.150
SILENCE_SECONDS = 0.050
FADE_SECONDS = 0.010
DYAD_AMP = 0.6
PARTIAL_AMP = 0.4
OOD_OFFSET_SEMITONES = 1.0

MIN_SYLLABLES = 3
MAX_SYLLABLES = 12

TRAIN_FRACTION = 0.8
VAL_FRACTION = 0.1

MANIFEST_NAME = "manifest.jsonl"
VOCAB_NAME = "vocab.json"


@dataclass(frozen=True)
class ManifestEntry:
    audio_path: str
    devanagari: str
    slp1: str
    speaker_id: str
    split: str
    duration_s: float

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")

    def to_json(self) -> dict:
        return {
            "audio_path": self.audio_path,
            "devanagari": self.devanagari,
            "slp1": self.slp1,
            "speaker_id": self.speaker_id,
            "split": self.split,
            "duration_s": self.duration_s,
        }


@dataclass
class Dataset:
    entries: list[ManifestEntry]
    vocab: Vocabulary | None = None
    root: Path | None = None

    def __post_init__(self):
        paths = [e.audio_path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise SplitViolation("duplicate audio paths in manifest")
        seen = {s: set() for s in SPLITS}
        for e in self.entries:
            seen[e.split].add(e.speaker_id)
        overlap = seen["ood"] & (seen["train"] | seen["val"])
        if overlap:
            raise SplitViolation(
                f"ood speakers also appear in train/val: {sorted(overlap)}"
            )

    def split(self, name: str) -> list[ManifestEntry]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return [e for e in self.entries if e.split == name]

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.audio_path)
        if not p.is_absolute() and self.root is not None:
            p = self.root / p
        return p

    def __len__(self) -> int:
        return len(self.entries)


_REQUIRED_FIELDS = ("audio_path", "devanagari", "slp1", "speaker_id", "split")


def load_manifest(path) -> Dataset:
    """Parse a JSONL manifest; recompute any missing duration from the audio."""
    path = Path(path)
    if not path.is_file():
        raise UnreadableFile(f"manifest not found: {path}")
    entries = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", line=lineno) from e
            missing = [k for k in _REQUIRED_FIELDS if k not in raw]
            if missing:
                raise ParseError(f"missing fields {missing}", line=lineno)
            duration = raw.get("duration_s")
            if duration is None:
                wav = Path(raw["audio_path"])
                if not wav.is_absolute():
                    wav = path.parent / wav
                duration = dsp.read_wav(wav).duration_s
            try:
                entry = ManifestEntry(
                    audio_path=raw["audio_path"],
                    devanagari=raw["devanagari"],
                    slp1=raw["slp1"],
                    speaker_id=raw["speaker_id"],
                    split=raw["split"],
                    duration_s=float(duration),
                )
            except ValueError as e:
                raise ParseError(str(e), line=lineno) from e
            entries.append(entry)
    ds = Dataset(entries, root=path.parent)
    vocab_path = path.parent / VOCAB_NAME
    if vocab_path.is_file():
        from .script import load_vocab

        ds.vocab = load_vocab(vocab_path)
    return ds


def save_manifest(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in ds.entries:
            f.write(json.dumps(e.to_json(), ensure_ascii=False) + "\n")


def synth_dyad(syllable_idx: int, pitch_offset_semitones: float = 0.0) -> np.ndarray:
    """150-ms two-tone dyad for one syllable class, with raised-cosine fades."""
    sr = dsp.SAMPLE_RATE
    n = round(DYAD_SECONDS * sr)
    t = np.arange(n) / sr
    f1 = DYAD_F1_HZ[syllable_idx] * SEMITONE ** pitch_offset_semitones
    f2 = f1 * DYAD_INTERVAL
    w = DYAD_AMP * (np.sin(2 * np.pi * f1 * t) + PARTIAL_AMP * np.sin(2 * np.pi * f2 * t))
    n_fade = round(FADE_SECONDS * sr)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n_fade) / n_fade)
    w[:n_fade] *= ramp
    w[-n_fade:] *= ramp[::-1]
    return w


def synth_utterance(syllable_ids, pitch_offset_semitones: float = 0.0) -> np.ndarray:
    sil = np.zeros(round(SILENCE_SECONDS * dsp.SAMPLE_RATE))
    parts = [sil]
    parts.extend(synth_dyad(i, pitch_offset_semitones) for i in syllable_ids)
    parts.append(sil)
    return np.concatenate(parts)


def _transcript(syllable_ids) -> Transcript:
    slp1 = " ".join(SYLLABLES[i] for i in syllable_ids)
    return Transcript(devanagari=slp1_to_deva(slp1), slp1=slp1)


def gen_synthetic_corpus(
    seed: int, n_utterances: int, out_dir, n_ood: int | None = None
) -> Dataset:
    """Write a fully deterministic synthetic corpus under out_dir.

    Main utterances are split 80/10/10 train/val/test by seeded shuffle.
    The ood split is n_ood extra utterances (default one tenth) rendered
    with a +1 semitone global pitch offset under a held-out speaker id.
    """
    if n_utterances < 1:
        raise ValueError("n_utterances must be >= 1")
    if n_ood is None:
        n_ood = max(1, round(0.1 * n_utterances))
    out_dir = Path(out_dir)
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    # All randomness drawn in one fixed order so corpora are byte-identical.
    lengths = rng.integers(MIN_SYLLABLES, MAX_SYLLABLES + 1, size=n_utterances)
    syllables = [rng.integers(0, len(SYLLABLES), size=int(k)) for k in lengths]
    speakers = rng.integers(0, 4, size=n_utterances)
    perm = rng.permutation(n_utterances)
    ood_lengths = rng.integers(MIN_SYLLABLES, MAX_SYLLABLES + 1, size=n_ood)
    ood_syllables = [rng.integers(0, len(SYLLABLES), size=int(k)) for k in ood_lengths]

    n_train = int(n_utterances * TRAIN_FRACTION)
    n_val = int(n_utterances * VAL_FRACTION)
    split_of = {}
    for rank, idx in enumerate(perm):
        if rank < n_train:
            split_of[int(idx)] = "train"
        elif rank < n_train + n_val:
            split_of[int(idx)] = "val"
        else:
            split_of[int(idx)] = "test"

    entries = []
    for i, ids in enumerate(syllables):
        samples = synth_utterance(ids)
        rel = f"audio/utt{i:05d}.wav"
        dsp.write_wav(out_dir / rel, dsp.AudioBuffer(samples, dsp.SAMPLE_RATE))
        tr = _transcript(ids)
        entries.append(
            ManifestEntry(
                audio_path=rel,
                devanagari=tr.devanagari,
                slp1=tr.slp1,
                speaker_id=f"s{int(speakers[i]) + 1:02d}",
                split=split_of[i],
                duration_s=len(samples) / dsp.SAMPLE_RATE,
            )
        )
    for i, ids in enumerate(ood_syllables):
        samples = synth_utterance(ids, pitch_offset_semitones=OOD_OFFSET_SEMITONES)
        rel = f"audio/ood{i:05d}.wav"
        dsp.write_wav(out_dir / rel, dsp.AudioBuffer(samples, dsp.SAMPLE_RATE))
        tr = _transcript(ids)
        entries.append(
            ManifestEntry(
                audio_path=rel,
                devanagari=tr.devanagari,
                slp1=tr.slp1,
                speaker_id="ood01",
                split="ood",
                duration_s=len(samples) / dsp.SAMPLE_RATE,
            )
        )

    ds = Dataset(entries, root=out_dir)
    ds.vocab = build_vocab([e.slp1 for e in entries])
    from .script import save_vocab

    save_manifest(ds, out_dir / MANIFEST_NAME)
    save_vocab(ds.vocab, out_dir / VOCAB_NAME)
    return ds


def dominant_frequency(segment: np.ndarray, sample_rate_hz: int) -> float:
    """Peak of the magnitude spectrum; analysis helper for corpus checks."""
    spectrum = np.abs(np.fft.rfft(segment))
    freqs = np.fft.rfftfreq(len(segment), d=1.0 / sample_rate_hz)
    return float(freqs[int(np.argmax(spectrum))])


def nearest_syllable(f1_hz: float, pitch_offset_semitones: float = 0.0) -> int:
    """Classify a fundamental against the (optionally shifted) dyad table."""
    table = np.array(DYAD_F1_HZ) * SEMITONE ** pitch_offset_semitones
    return int(np.argmin(np.abs(np.log(table) - math.log(f1_hz))))
