import json

import numpy as np
import pytest

from sanskrit_asr import audio as dsp
from sanskrit_asr.data import (
    BASE_HZ,
    DYAD_F1_HZ,
    DYAD_INTERVAL,
    DYAD_SECONDS,
    SILENCE_SECONDS,
    SYLLABLES,
    Dataset,
    ManifestEntry,
    dominant_frequency,
    gen_synthetic_corpus,
    load_manifest,
    nearest_syllable,
    save_manifest,
    synth_utterance,
)
from sanskrit_asr.errors import ParseError, SplitViolation


def read_back_syllables(samples, pitch_offset_semitones=0.0):
    """Frequency-detector oracle: dominant DFT bin per 150-ms dyad segment."""
    sr = dsp.SAMPLE_RATE
    lead = round(SILENCE_SECONDS * sr)
    dyad_n = round(DYAD_SECONDS * sr)
    n_syl = round((len(samples) - 2 * lead) / dyad_n)
    heard = []
    for k in range(n_syl):
        seg = samples[lead + k * dyad_n : lead + (k + 1) * dyad_n]
        f1 = dominant_frequency(seg, sr)
        heard.append(nearest_syllable(f1, pitch_offset_semitones))
    return heard


class TestDyadTable:
    def test_sixteen_syllables(self):
        assert len(SYLLABLES) == 16
        assert len(set(SYLLABLES)) == 16

    def test_two_semitone_spacing(self):
        for lo, hi in zip(DYAD_F1_HZ, DYAD_F1_HZ[1:]):
            assert hi / lo == pytest.approx(2 ** (2 / 12))

    def test_base_frequency(self):
        assert DYAD_F1_HZ[0] == BASE_HZ

    def test_partial_is_a_fifth_up(self):
        assert DYAD_INTERVAL == pytest.approx(2 ** (7 / 12))

    def test_range_stays_in_band(self):
        # highest partial must sit well under Nyquist for 16 kHz audio
        assert DYAD_F1_HZ[-1] * DYAD_INTERVAL < 8000


class TestSynthUtterance:
    def test_duration_arithmetic(self):
        samples = synth_utterance([0, 1, 2, 3, 4])
        assert len(samples) == round(
            (5 * DYAD_SECONDS + 2 * SILENCE_SECONDS) * dsp.SAMPLE_RATE
        )

    def test_peak_bounded(self):
        samples = synth_utterance(list(range(16)))
        assert np.max(np.abs(samples)) <= 1.0

    def test_syllables_recoverable(self):
        ids = [0, 15, 7, 3, 0]
        assert read_back_syllables(synth_utterance(ids)) == ids

    def test_pitch_offset_scales_fundamental(self):
        lo = synth_utterance([0])
        hi = synth_utterance([0], pitch_offset_semitones=1.0)
        sr = dsp.SAMPLE_RATE
        lead = round(SILENCE_SECONDS * sr)
        f_lo = dominant_frequency(lo[lead:-lead], sr)
        f_hi = dominant_frequency(hi[lead:-lead], sr)
        assert f_hi / f_lo == pytest.approx(2 ** (1 / 12), rel=0.01)


class TestCorpusGeneration:
    def test_counts_and_splits(self, tiny_corpus):
        n = 12
        n_train = int(n * 0.8)
        n_val = int(n * 0.1)
        assert len(tiny_corpus.split("train")) == n_train
        assert len(tiny_corpus.split("val")) == n_val
        assert len(tiny_corpus.split("test")) == n - n_train - n_val
        assert len(tiny_corpus.split("ood")) == max(1, round(0.1 * n))

    def test_ood_speaker_disjoint(self, tiny_corpus):
        main = {e.speaker_id for e in tiny_corpus.entries if e.split != "ood"}
        ood = {e.speaker_id for e in tiny_corpus.split("ood")}
        assert not main & ood

    def test_files_exist_and_match_duration(self, tiny_corpus):
        for e in tiny_corpus.entries:
            buf = dsp.read_wav(tiny_corpus.resolve(e))
            assert buf.duration_s == pytest.approx(e.duration_s, abs=1e-4)

    def test_transcripts_match_audio(self, tiny_corpus):
        for e in tiny_corpus.entries:
            buf = dsp.read_wav(tiny_corpus.resolve(e))
            offset = 1.0 if e.split == "ood" else 0.0
            heard = read_back_syllables(buf.samples, offset)
            assert " ".join(SYLLABLES[i] for i in heard) == e.slp1

    def test_determinism_byte_identical(self, tmp_path):
        a = gen_synthetic_corpus(seed=5, n_utterances=6, out_dir=tmp_path / "a")
        b = gen_synthetic_corpus(seed=5, n_utterances=6, out_dir=tmp_path / "b")
        assert [e.to_json() for e in a.entries] == [e.to_json() for e in b.entries]
        for ea, eb in zip(a.entries, b.entries):
            assert a.resolve(ea).read_bytes() == b.resolve(eb).read_bytes()
        ma = (tmp_path / "a" / "manifest.jsonl").read_bytes()
        mb = (tmp_path / "b" / "manifest.jsonl").read_bytes()
        assert ma == mb

    def test_seed_changes_content(self, tmp_path):
        a = gen_synthetic_corpus(seed=1, n_utterances=6, out_dir=tmp_path / "a")
        b = gen_synthetic_corpus(seed=2, n_utterances=6, out_dir=tmp_path / "b")
        assert [e.slp1 for e in a.entries] != [e.slp1 for e in b.entries]

    def test_vocab_covers_transcripts(self, tiny_corpus):
        assert tiny_corpus.vocab is not None
        for e in tiny_corpus.entries:
            assert all(ch in tiny_corpus.vocab for ch in e.slp1)

    def test_syllable_lengths_in_range(self, tiny_corpus):
        for e in tiny_corpus.entries:
            n_syl = len(e.slp1.split())
            assert 3 <= n_syl <= 12

    def test_devanagari_consistent_with_slp1(self, tiny_corpus):
        from sanskrit_asr.script import slp1_to_deva

        for e in tiny_corpus.entries:
            assert slp1_to_deva(e.slp1) == e.devanagari


class TestManifest:
    def test_round_trip(self, tiny_corpus, tmp_path):
        path = tmp_path / "manifest.jsonl"
        save_manifest(tiny_corpus, path)
        loaded = load_manifest(path)
        assert loaded.entries == tiny_corpus.entries

    def test_load_attaches_vocab(self, tiny_corpus):
        loaded = load_manifest(tiny_corpus.root / "manifest.jsonl")
        assert loaded.vocab is not None
        assert loaded.vocab.token_to_id == tiny_corpus.vocab.token_to_id

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text('{"bad json\n', encoding="utf-8")
        with pytest.raises(ParseError) as e:
            load_manifest(path)
        assert "line 1" in str(e.value)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text(json.dumps({"audio_path": "x.wav"}) + "\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_manifest(path)

    def test_empty_file_is_empty_dataset(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text("", encoding="utf-8")
        assert len(load_manifest(path)) == 0

    def test_duration_recomputed_when_absent(self, tiny_corpus, tmp_path):
        e = tiny_corpus.entries[0]
        raw = e.to_json()
        del raw["duration_s"]
        raw["audio_path"] = str(tiny_corpus.resolve(e))
        path = tmp_path / "manifest.jsonl"
        path.write_text(json.dumps(raw, ensure_ascii=False) + "\n", encoding="utf-8")
        loaded = load_manifest(path)
        assert loaded.entries[0].duration_s == pytest.approx(e.duration_s)

    def test_unknown_split_rejected(self):
        with pytest.raises(ValueError):
            ManifestEntry(
                audio_path="audio/u0.wav",
                devanagari="क",
                slp1="ka",
                speaker_id="s01",
                split="dev",
                duration_s=1.0,
            )

    def test_nonpositive_duration_rejected(self):
        with pytest.raises(ValueError):
            ManifestEntry(
                audio_path="audio/u0.wav",
                devanagari="क",
                slp1="ka",
                speaker_id="s01",
                split="train",
                duration_s=0.0,
            )

    def test_duplicate_path_rejected(self, tiny_corpus):
        entries = list(tiny_corpus.entries)
        with pytest.raises(SplitViolation):
            Dataset(entries=entries + [entries[0]], root=tiny_corpus.root)

    def test_ood_speaker_leak_rejected(self, tiny_corpus):
        entries = list(tiny_corpus.entries)
        leak = ManifestEntry(
            audio_path="audio/leak.wav",
            devanagari="क",
            slp1="ka",
            speaker_id=tiny_corpus.split("ood")[0].speaker_id,
            split="train",
            duration_s=1.0,
        )
        with pytest.raises(SplitViolation):
            Dataset(entries=entries + [leak], root=tiny_corpus.root)
