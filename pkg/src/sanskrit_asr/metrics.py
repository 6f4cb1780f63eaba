"""Edit-distance metrics: WER over Devanagari words, CER over SLP1 characters.

Corpus rates pool edit distance over the whole split (sum of distances over
sum of reference lengths), not a mean of per-utterance rates.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import EmptySplit, UndefinedCER, UndefinedWER
from .script import normalize_text

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EditOps:
    substitutions: int
    insertions: int
    deletions: int

    @property
    def total(self) -> int:
        return self.substitutions + self.insertions + self.deletions


def levenshtein(a, b) -> tuple[int, EditOps]:
    """Minimal unit-cost edit distance from `a` (reference) to `b` (hypothesis).

    Returns (distance, op counts from one minimal traceback). Insertions are
    symbols present only in `b`, deletions symbols present only in `a`.
    """
    a = list(a)
    b = list(b)
    m, n = len(a), len(b)
    # dp[i][j] = distance between a[:i] and b[:j]
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dp[i][0] = i
    dp0 = dp[0]
    for j in range(n + 1):
        dp0[j] = j
    for i in range(1, m + 1):
        ai = a[i - 1]
        row = dp[i]
        prev = dp[i - 1]
        for j in range(1, n + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1]
            else:
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if row[j - 1] < best:
                    best = row[j - 1]
                row[j] = best + 1
    # traceback with a fixed tie order: match/sub, delete, insert
    subs = ins = dels = 0
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            if a[i - 1] == b[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
                i -= 1
                j -= 1
                continue
            if dp[i][j] == dp[i - 1][j - 1] + 1:
                subs += 1
                i -= 1
                j -= 1
                continue
        if i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            dels += 1
            i -= 1
            continue
        ins += 1
        j -= 1
    return dp[m][n], EditOps(subs, ins, dels)


def _corpus_rate(refs, hyps, tokenize, undefined):
    if len(refs) != len(hyps):
        raise ValueError("refs and hyps must have equal length")
    total_dist = 0
    total_ref = 0
    for ref, hyp in zip(refs, hyps):
        r = tokenize(ref)
        h = tokenize(hyp)
        d, _ = levenshtein(r, h)
        total_dist += d
        total_ref += len(r)
    if total_ref == 0:
        raise undefined("no reference symbols to score against")
    return total_dist / total_ref


def wer(refs, hyps) -> float:
    """Corpus word error rate on normalized text; may exceed 1.0."""
    return _corpus_rate(
        refs, hyps, lambda t: normalize_text(t).split(), UndefinedWER
    )


def cer(refs, hyps) -> float:
    """Corpus character error rate on normalized text, spaces retained."""
    return _corpus_rate(refs, hyps, lambda t: list(normalize_text(t)), UndefinedCER)


@dataclass(frozen=True)
class EvalReport:
    """Split-level scoring summary with per-utterance word-op breakdown."""

    split: str
    wer: float
    cer: float
    n_utterances: int
    per_utterance: list[dict]

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["version"] = REPORT_SCHEMA_VERSION
        return d

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, ensure_ascii=False, indent=2)


def build_report(split: str, refs_deva, hyps_deva, refs_slp1, hyps_slp1) -> EvalReport:
    """Score paired transcripts: WER on Devanagari words, CER on SLP1 chars."""
    if not refs_deva:
        raise EmptySplit(f"split {split!r} has no utterances")
    per = []
    for ref, hyp in zip(refs_deva, hyps_deva):
        d, ops = levenshtein(normalize_text(ref).split(), normalize_text(hyp).split())
        per.append(
            {
                "ref": ref,
                "hyp": hyp,
                "substitutions": ops.substitutions,
                "insertions": ops.insertions,
                "deletions": ops.deletions,
            }
        )
    return EvalReport(
        split=split,
        wer=wer(refs_deva, hyps_deva),
        cer=cer(refs_slp1, hyps_slp1),
        n_utterances=len(refs_deva),
        per_utterance=per,
    )


def evaluate(params, ds, split: str, batch_size: int = 16) -> EvalReport:
    """Transcribe every utterance in a split and score it.

    Utterances longer than the model's audio context are chunked and the
    chunk transcripts joined with single spaces, matching the CLI path.
    """
    from .pipeline import transcribe_dataset_split

    refs_deva, hyps_deva, refs_slp1, hyps_slp1 = transcribe_dataset_split(
        params, ds, split, batch_size=batch_size
    )
    return build_report(split, refs_deva, hyps_deva, refs_slp1, hyps_slp1)
