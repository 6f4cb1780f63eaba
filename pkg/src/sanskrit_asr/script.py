"""Devanagari <-> SLP1 transliteration, text normalization, character tokenization.

SLP1 assigns one ASCII character per phoneme, which keeps the model
vocabulary near 60 symbols: 4 specials + the SLP1 characters observed in a
corpus. Model-internal text is always SLP1; Devanagari is produced at the
boundary with slp1_to_deva.
"""

from __future__ import annotations

import json
import re
import string
import unicodedata
from dataclasses import dataclass, field

from .errors import EmptyCorpus, UnmappableChar

# Independent vowels.
_VOWELS = {
    "अ": "a", "आ": "A", "इ": "i", "ई": "I", "उ": "u", "ऊ": "U",
    "ऋ": "f", "ॠ": "F", "ऌ": "x", "ॡ": "X",
    "ए": "e", "ऐ": "E", "ओ": "o", "औ": "O",
}

# Dependent vowel signs (matras). The inherent 'a' has no sign.
_MATRAS = {
    "ा": "A", "ि": "i", "ी": "I", "ु": "u", "ू": "U",
    "ृ": "f", "ॄ": "F", "ॢ": "x", "ॣ": "X",
    "े": "e", "ै": "E", "ो": "o", "ौ": "O",
}

_CONSONANTS = {
    "क": "k", "ख": "K", "ग": "g", "घ": "G", "ङ": "N",
    "च": "c", "छ": "C", "ज": "j", "झ": "J", "ञ": "Y",
    "ट": "w", "ठ": "W", "ड": "q", "ढ": "Q", "ण": "R",
    "त": "t", "थ": "T", "द": "d", "ध": "D", "न": "n",
    "प": "p", "फ": "P", "ब": "b", "भ": "B", "म": "m",
    "य": "y", "र": "r", "ल": "l", "व": "v",
    "श": "S", "ष": "z", "स": "s", "ह": "h", "ळ": "L",
}

_SIGNS = {"ं": "M", "ः": "H", "ऽ": "'"}

_DIGITS = {chr(0x0966 + i): str(i) for i in range(10)}  # ० .. ९

_VIRAMA = "्"
_DANDA = "।"
_DOUBLE_DANDA = "॥"

# Candrabindu, inverted candrabindu, and Vedic accent marks are stripped
# during normalization: the SLP1 core table covers classical Sanskrit only.
_STRIPPED = set("ऀँ॒॑॓॔‌‍")

# Danda and Latin punctuation become spaces. The apostrophe stays: it is
# the SLP1 avagraha.
_PUNCT_TO_SPACE = set(string.punctuation) - {"'"} | {_DANDA, _DOUBLE_DANDA, "॰"}

_SLP1_VOWELS = {v: k for k, v in _VOWELS.items()}
_SLP1_MATRAS = {v: k for k, v in _MATRAS.items()}
_SLP1_CONSONANTS = {v: k for k, v in _CONSONANTS.items()}
_SLP1_SIGNS = {v: k for k, v in _SIGNS.items()}
_SLP1_DIGITS = {v: k for k, v in _DIGITS.items()}

#: Every character deva_to_slp1 can emit (plus space and danda dots).
SLP1_ALPHABET = frozenset(
    set(_SLP1_VOWELS) | set(_SLP1_CONSONANTS) | set(_SLP1_SIGNS)
    | set(_SLP1_DIGITS) | {" ", "."}
)

PAD_ID, SOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
SPECIAL_TOKENS = {"<pad>": PAD_ID, "<sos>": SOS_ID, "<eos>": EOS_ID, "<unk>": UNK_ID}

VOCAB_SCHEMA_VERSION = 1


def normalize_text(text: str) -> str:
    """Canonical form used everywhere text is compared.

    NFC composition; candrabindu/Vedic accents dropped; danda and Latin
    punctuation replaced by spaces; whitespace runs collapsed; ends trimmed.
    """
    text = unicodedata.normalize("NFC", text)
    out = []
    for ch in text:
        if ch in _STRIPPED:
            continue
        out.append(" " if ch in _PUNCT_TO_SPACE else ch)
    return re.sub(r"\s+", " ", "".join(out)).strip()


def deva_to_slp1(text: str) -> str:
    """Transliterate Devanagari to SLP1.

    Bare consonants receive the inherent 'a' unless followed by a vowel
    sign or virama. Raises UnmappableChar (with offset) for characters the
    classical table does not cover.
    """
    out: list[str] = []
    pending = False  # a consonant was emitted and may still take a vowel

    def flush():
        nonlocal pending
        if pending:
            out.append("a")
            pending = False

    for i, ch in enumerate(text):
        if ch in _CONSONANTS:
            flush()
            out.append(_CONSONANTS[ch])
            pending = True
        elif ch in _MATRAS:
            if not pending:
                raise UnmappableChar(ch, i)
            out.append(_MATRAS[ch])
            pending = False
        elif ch == _VIRAMA:
            if not pending:
                raise UnmappableChar(ch, i)
            pending = False
        elif ch in _VOWELS:
            flush()
            out.append(_VOWELS[ch])
        elif ch in _SIGNS:
            flush()
            out.append(_SIGNS[ch])
        elif ch in _DIGITS:
            flush()
            out.append(_DIGITS[ch])
        elif ch == _DANDA:
            flush()
            out.append(".")
        elif ch == _DOUBLE_DANDA:
            flush()
            out.append("..")
        elif ch.isspace():
            flush()
            out.append(ch)
        else:
            raise UnmappableChar(ch, i)
    flush()
    return "".join(out)


def slp1_to_deva(text: str) -> str:
    """Inverse of deva_to_slp1 on its image."""
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _SLP1_CONSONANTS:
            out.append(_SLP1_CONSONANTS[ch])
            nxt = text[i + 1] if i + 1 < n else ""
            if nxt in _SLP1_VOWELS:
                if nxt != "a":
                    out.append(_SLP1_MATRAS[nxt])
                i += 2
            else:
                out.append(_VIRAMA)
                i += 1
        elif ch in _SLP1_VOWELS:
            out.append(_SLP1_VOWELS[ch])
            i += 1
        elif ch in _SLP1_SIGNS:
            out.append(_SLP1_SIGNS[ch])
            i += 1
        elif ch in _SLP1_DIGITS:
            out.append(_SLP1_DIGITS[ch])
            i += 1
        elif ch == ".":
            if text.startswith("..", i):
                out.append(_DOUBLE_DANDA)
                i += 2
            else:
                out.append(_DANDA)
                i += 1
        elif ch.isspace():
            out.append(ch)
            i += 1
        else:
            raise UnmappableChar(ch, i)
    return "".join(out)


@dataclass(frozen=True)
class Transcript:
    """Paired Devanagari and SLP1 renderings of one utterance."""

    devanagari: str
    slp1: str

    @classmethod
    def from_devanagari(cls, text: str) -> "Transcript":
        norm = normalize_text(text)
        return cls(devanagari=norm, slp1=deva_to_slp1(norm))

    @classmethod
    def from_slp1(cls, text: str) -> "Transcript":
        norm = normalize_text(text)
        return cls(devanagari=slp1_to_deva(norm), slp1=norm)


@dataclass(frozen=True)
class Vocabulary:
    """Bijective symbol<->id map with fixed special ids 0-3."""

    token_to_id: dict[str, int]
    id_to_token: dict[int, str] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "id_to_token", {i: t for t, i in self.token_to_id.items()}
        )
        assert len(self.id_to_token) == len(self.token_to_id), "vocabulary not bijective"

    def __len__(self) -> int:
        return len(self.token_to_id)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id


def build_vocab(corpus) -> Vocabulary:
    """Vocabulary = specials + every distinct SLP1 character in the corpus.

    Accepts Transcript objects or plain SLP1 strings; character order is
    sorted so identical corpora give identical vocabularies.
    """
    chars: set[str] = set()
    n = 0
    for item in corpus:
        text = item.slp1 if isinstance(item, Transcript) else item
        chars.update(text)
        n += 1
    if n == 0:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    mapping = dict(SPECIAL_TOKENS)
    for i, ch in enumerate(sorted(chars)):
        mapping[ch] = len(SPECIAL_TOKENS) + i
    return Vocabulary(mapping)


def encode(text: str, vocab: Vocabulary, strict: bool = False) -> tuple[list[int], int]:
    """SLP1 text -> [SOS, ...ids..., EOS]. Returns (ids, unknown-char count).

    Characters missing from the vocabulary become UNK unless strict.
    """
    ids = [SOS_ID]
    unk = 0
    for i, ch in enumerate(text):
        tid = vocab.token_to_id.get(ch)
        if tid is None:
            if strict:
                raise UnmappableChar(ch, i)
            tid = UNK_ID
            unk += 1
        ids.append(tid)
    ids.append(EOS_ID)
    return ids, unk


def decode(ids, vocab: Vocabulary) -> str:
    """Token ids -> SLP1 text, special tokens dropped."""
    n_special = len(SPECIAL_TOKENS)
    return "".join(
        vocab.id_to_token[int(i)] for i in ids if int(i) >= n_special
    )


def save_vocab(vocab: Vocabulary, path) -> None:
    payload = {
        "version": VOCAB_SCHEMA_VERSION,
        "specials": SPECIAL_TOKENS,
        "tokens": {t: i for t, i in vocab.token_to_id.items() if t not in SPECIAL_TOKENS},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, sort_keys=True, indent=0)


def load_vocab(path) -> Vocabulary:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    mapping = dict(payload["specials"])
    mapping.update({t: int(i) for t, i in payload["tokens"].items()})
    return Vocabulary(mapping)


def vocab_to_json(vocab: Vocabulary) -> dict:
    return {
        "version": VOCAB_SCHEMA_VERSION,
        "specials": SPECIAL_TOKENS,
        "tokens": {t: i for t, i in vocab.token_to_id.items() if t not in SPECIAL_TOKENS},
    }


def vocab_from_json(payload: dict) -> Vocabulary:
    mapping = dict(payload["specials"])
    mapping.update({t: int(i) for t, i in payload["tokens"].items()})
    return Vocabulary(mapping)
