"""End-to-end transcription: resample, normalize, chunk, decode, merge.

Chunk length equals the model's audio context (30 s for the published
presets, shorter for toy models). Every chunk is padded to the full context
before the mel transform so encoder geometry is fixed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import audio as dsp
from . import model as mdl
from .audio import AudioBuffer
from .data import Dataset
from .errors import EmptyAudio, EmptySplit
from .model import ModelParams
from .script import decode, slp1_to_deva


def context_seconds(params: ModelParams) -> float:
    """Audio seconds covered by the encoder: 100 mel frames per second, 2 per position."""
    return 2 * params.config.max_audio_frames / 100.0


@dataclass(frozen=True)
class TranscriptionResult:
    devanagari: str
    slp1: str
    chunks: list[dict]
    model_name: str
    audio_duration_s: float

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _decode_mels(params: ModelParams, mels: list[np.ndarray], batch_size: int = 16) -> list[str]:
    """Greedy-decode a list of fixed-geometry mels; returns SLP1 strings."""
    max_len = params.config.max_text_tokens
    out = []
    for i in range(0, len(mels), batch_size):
        batch = np.stack(mels[i : i + batch_size])
        for ids in mdl.greedy_decode_batch(params, batch, max_len):
            out.append(decode(ids, params.vocab))
    return out


def _chunk_mels(audio: AudioBuffer, params: ModelParams) -> tuple[list[np.ndarray], list[tuple[float, float]]]:
    ctx = context_seconds(params)
    duration = audio.duration_s
    chunks = dsp.chunk_audio(audio, ctx)
    mels = [dsp.log_mel(dsp.pad_or_trim(c, ctx)).values for c in chunks]
    spans = [
        (i * ctx, min((i + 1) * ctx, duration)) for i in range(len(chunks))
    ]
    return mels, spans


def _prepare(audio: AudioBuffer) -> AudioBuffer:
    if len(audio.samples) == 0:
        raise EmptyAudio("cannot transcribe empty audio")
    if audio.sample_rate_hz != dsp.SAMPLE_RATE:
        audio = dsp.resample(audio, dsp.SAMPLE_RATE)
    return dsp.normalize(audio)


def transcribe(audio: AudioBuffer, params: ModelParams, batch_size: int = 16) -> TranscriptionResult:
    """Transcribe one buffer, chunking audio longer than the model context."""
    audio = _prepare(audio)
    mels, spans = _chunk_mels(audio, params)
    texts_slp1 = _decode_mels(params, mels, batch_size)
    chunk_rows = [
        {"start_s": s, "end_s": e, "devanagari": slp1_to_deva(t)}
        for (s, e), t in zip(spans, texts_slp1)
    ]
    return TranscriptionResult(
        devanagari=" ".join(r["devanagari"] for r in chunk_rows),
        slp1=" ".join(texts_slp1),
        chunks=chunk_rows,
        model_name=params.name,
        audio_duration_s=audio.duration_s,
    )


def transcribe_file(path, params: ModelParams) -> TranscriptionResult:
    return transcribe(dsp.read_wav(path), params)


def transcribe_dataset_split(
    params: ModelParams, ds: Dataset, split: str, batch_size: int = 16
):
    """Batched transcription of a whole split for evaluation.

    Chunks from all utterances are decoded together, then regrouped, which
    keeps the decoder batched even when every utterance is a single chunk.
    """
    entries = ds.split(split)
    if not entries:
        raise EmptySplit(f"split {split!r} is empty")
    all_mels: list[np.ndarray] = []
    counts: list[int] = []
    for e in entries:
        audio = _prepare(dsp.read_wav(ds.resolve(e)))
        mels, _ = _chunk_mels(audio, params)
        all_mels.extend(mels)
        counts.append(len(mels))
    texts = _decode_mels(params, all_mels, batch_size)
    hyps_slp1 = []
    pos = 0
    for n in counts:
        hyps_slp1.append(" ".join(texts[pos : pos + n]))
        pos += n
    hyps_deva = [slp1_to_deva(h) for h in hyps_slp1]
    refs_deva = [e.devanagari for e in entries]
    refs_slp1 = [e.slp1 for e in entries]
    return refs_deva, hyps_deva, refs_slp1, hyps_slp1
