"""Parse logged judge transcripts into K-dimensional rating-logit vectors.

The rating token is located per record; records carrying several candidate
positions resolve to the corpus-wide modal offset-from-end (ratings
conventionally appear at the end of the judge's response).  Probabilities of
surface forms with the same meaning (" 4", "4", "four") are aggregated per
rating before taking logs.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, JudgeSample, LabelScale, ValidationError
from .ratings import rating_values

__all__ = [
    "TranscriptRecord",
    "TranscriptToken",
    "SynonymTable",
    "read_transcripts",
    "locate_rating_positions",
    "build_feature",
    "extract_samples",
]

EPSILON = 1e-12

_NUMBER_WORDS = (
    "one", "two", "three", "four", "five", "six", "seven",
    "eight", "nine", "ten", "eleven", "twelve", "thirteen",
)


@dataclass(frozen=True)
class TranscriptToken:
    text: str
    logprob: float
    alternatives: tuple = ()


@dataclass(frozen=True)
class TranscriptRecord:
    id: str
    tokens: tuple
    declared_score: float | None = None
    label: float | None = None
    meta: dict = field(default_factory=dict)


def _normalize(text: str) -> str:
    # tokenizers emit " 4" and "4" as distinct surface forms
    return text.lstrip().lower()


class SynonymTable:
    """Surface form -> rating value (1..K).  Every rating must at least have
    its digit form, and no surface form may map to two ratings."""

    def __init__(self, mapping: dict, k: int):
        self.k = k
        self.mapping = {}
        for surface, rating in mapping.items():
            norm = _normalize(surface)
            rating = int(rating)
            if not 1 <= rating <= k:
                raise ValidationError(f"rating {rating} outside 1..{k}")
            if norm in self.mapping and self.mapping[norm] != rating:
                raise ValidationError(f"surface form {surface!r} maps to two ratings")
            self.mapping[norm] = rating
        for r in range(1, k + 1):
            if self.mapping.get(str(r)) != r:
                raise ValidationError(f"rating {r} is missing its digit form")

    def lookup(self, text: str) -> int | None:
        return self.mapping.get(_normalize(text))

    @classmethod
    def default(cls, k: int) -> "SynonymTable":
        mapping = {str(r): r for r in range(1, k + 1)}
        for r in range(1, min(k, len(_NUMBER_WORDS)) + 1):
            mapping[_NUMBER_WORDS[r - 1]] = r
        return cls(mapping, k)

    @classmethod
    def from_json(cls, path, k: int) -> "SynonymTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh), k)


def read_transcripts(path) -> list:
    """Load transcript records from JSONL with line-numbered errors."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {lineno}: invalid JSON: {exc}") from exc
            try:
                tokens = []
                for tok in rec["tokens"]:
                    text = str(tok["text"])
                    if not text:
                        raise ValidationError("empty token text")
                    lp = float(tok["logprob"])
                    if not math.isfinite(lp):
                        raise ValidationError("non-finite logprob")
                    alts = tuple(
                        (str(a["text"]), float(a["logprob"]))
                        for a in tok.get("alternatives", [])
                    )
                    tokens.append(TranscriptToken(text, lp, alts))
                declared = rec.get("declared_score")
                label = rec.get("label")
                records.append(TranscriptRecord(
                    id=str(rec["id"]),
                    tokens=tuple(tokens),
                    declared_score=None if declared is None else float(declared),
                    label=None if label is None else float(label),
                    meta={str(k): str(v) for k, v in rec.get("meta", {}).items()},
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"line {lineno}: malformed transcript record: {exc}") from exc
    return records


def _candidates(record: TranscriptRecord, table: SynonymTable) -> list:
    return [i for i, tok in enumerate(record.tokens) if table.lookup(tok.text) is not None]


def locate_rating_positions(records, table: SynonymTable):
    """Per-record position of the rating token.

    Records with exactly one candidate take it; records with several take
    the candidate at the corpus-wide modal offset-from-end (ties prefer the
    offset nearer the end).  Records with none come back as None plus an
    exclusion entry.
    """
    all_candidates = [_candidates(rec, table) for rec in records]
    offset_counts = Counter()
    for rec, cands in zip(records, all_candidates):
        for i in cands:
            offset_counts[len(rec.tokens) - 1 - i] += 1

    positions = []
    exclusions = []
    for rec, cands in zip(records, all_candidates):
        if not cands:
            positions.append(None)
            exclusions.append((rec.id, "unlocatable"))
        elif len(cands) == 1:
            positions.append(cands[0])
        else:
            best = min(cands, key=lambda i: (-offset_counts[len(rec.tokens) - 1 - i],
                                             len(rec.tokens) - 1 - i))
            positions.append(best)
    return positions, exclusions


def build_feature(record: TranscriptRecord, pos: int, table: SynonymTable, k: int) -> np.ndarray:
    """Log-probability vector over the k ratings at one token position.

    Probability mass of every surface form mapping to the same rating is
    summed; ratings with no mass at all get ln(1e-12) so the vector stays
    finite.
    """
    token = record.tokens[pos]
    entries = {}
    for text, lp in token.alternatives:
        # distinct surface forms (" 4" vs "4") each carry their own mass;
        # dedupe only exact repeats of the same literal token
        if text not in entries:
            entries[text] = lp
    # transcripts that log no alternatives still contribute the sampled token
    entries.setdefault(token.text, token.logprob)
    mass = np.zeros(k)
    for text, lp in entries.items():
        rating = table.lookup(text)
        if rating is not None:
            mass[rating - 1] += math.exp(lp)
    if not np.any(mass > 0):
        raise ValidationError("no rating mass")
    out = np.full(k, math.log(EPSILON))
    nz = mass > 0
    out[nz] = np.log(mass[nz])
    return out


def extract_samples(records, table: SynonymTable, k: int, scale: LabelScale):
    """Turn transcripts into judge samples; returns (samples, exclusions).

    The raw score is the declared score when present, otherwise the rating
    of the located token mapped into scale units.  Records without a human
    label cannot become samples and are excluded with a reason.
    """
    positions, exclusions = locate_rating_positions(records, table)
    values = rating_values(scale, k)
    samples = []
    for rec, pos in zip(records, positions):
        if pos is None:
            continue
        if rec.label is None:
            exclusions.append((rec.id, "no label"))
            continue
        try:
            feature = build_feature(rec, pos, table, k)
        except ValidationError as exc:
            exclusions.append((rec.id, str(exc)))
            continue
        if rec.declared_score is not None:
            raw = float(rec.declared_score)
        else:
            raw = float(values[table.lookup(rec.tokens[pos].text) - 1])
        try:
            sample = JudgeSample(rec.id, tuple(feature), raw, rec.label, dict(rec.meta))
            sample.validate(scale, k)
        except ValidationError as exc:
            exclusions.append((rec.id, str(exc)))
            continue
        samples.append(sample)
    return samples, exclusions


def extract_dataset(records, table: SynonymTable, k: int, scale: LabelScale):
    samples, exclusions = extract_samples(records, table, k, scale)
    if not samples:
        raise ValidationError("no samples")
    return Dataset(tuple(samples), scale, k), exclusions
