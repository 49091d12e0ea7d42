"""Story-level text metrics: BLEU-1..4, ROUGE-L and CIDEr.

These double as evaluation and as the reinforcement reward, so they are
implemented from their definitions rather than wrapped from an external
scorer.  CIDEr here is the plain consensus form: per n-gram size, the
cosine between tf-idf count vectors of candidate and reference, averaged
over references and over n = 1..4, scaled by 10.
"""

from __future__ import annotations

import json
import math
import string
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DataValidationError, EmptyInputError

MAX_NGRAM = 4
ROUGE_BETA = 1.2
CIDER_SCALE = 10.0

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)

Tokens = tuple[str, ...]


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation characters, split on whitespace."""
    return [tok for tok in text.lower().translate(_PUNCT_TABLE).split() if tok]


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = MAX_NGRAM) -> list[float]:
    """Modified n-gram precision BLEU-1..max_n with brevity penalty.

    Returns one score per n; an empty candidate scores 0 everywhere.
    """
    if not references:
        raise EmptyInputError("bleu: need at least one reference")
    cand_len = len(candidate)
    if cand_len == 0:
        return [0.0] * max_n
    # closest reference length; ties resolved toward the shorter one
    ref_len = min((abs(len(r) - cand_len), len(r)) for r in references)[1]
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)

    precisions: list[float] = []
    for n in range(1, max_n + 1):
        cand_counts = _ngrams(candidate, n)
        total = sum(cand_counts.values())
        if total == 0:
            precisions.append(0.0)
            continue
        max_ref = Counter()
        for ref in references:
            for gram, count in _ngrams(ref, n).items():
                max_ref[gram] = max(max_ref[gram], count)
        clipped = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
        precisions.append(clipped / total)

    scores: list[float] = []
    for n in range(1, max_n + 1):
        ps = precisions[:n]
        if min(ps) == 0.0:
            scores.append(0.0)
        else:
            scores.append(bp * math.exp(sum(math.log(p) for p in ps) / n))
    return scores


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Longest-common-subsequence F-measure, max over references."""
    if not references:
        raise EmptyInputError("rouge_l: need at least one reference")
    best = 0.0
    for ref in references:
        lcs = _lcs_length(candidate, ref)
        if lcs == 0 or not candidate or not ref:
            continue
        recall = lcs / len(ref)
        precision = lcs / len(candidate)
        beta_sq = ROUGE_BETA * ROUGE_BETA
        f = (1 + beta_sq) * recall * precision / (recall + beta_sq * precision)
        best = max(best, f)
    return best


@dataclass
class CorpusIdf:
    """idf tables per n-gram size, built over a declared story corpus.

    idf(g) = max(0, log(doc_count / (1 + df(g)))); n-grams never seen in
    the corpus get df = 0, i.e. log(doc_count).
    """

    doc_count: int
    tables: dict[int, dict[Tokens, float]]

    SCHEMA = "vidstory.idf/1"

    @classmethod
    def build(cls, documents: Iterable[Sequence[str]], max_n: int = MAX_NGRAM) -> "CorpusIdf":
        docs = [list(d) for d in documents]
        if not docs:
            raise EmptyInputError("CorpusIdf.build: empty corpus")
        doc_count = len(docs)
        tables: dict[int, dict[Tokens, float]] = {}
        for n in range(1, max_n + 1):
            df: Counter = Counter()
            for doc in docs:
                df.update(set(_ngrams(doc, n)))
            tables[n] = {
                gram: max(0.0, math.log(doc_count / (1.0 + count)))
                for gram, count in df.items()
            }
        return cls(doc_count=doc_count, tables=tables)

    def weight(self, gram: Tokens) -> float:
        table = self.tables.get(len(gram), {})
        if gram in table:
            return table[gram]
        return max(0.0, math.log(self.doc_count))

    def scaled(self, factor: float) -> "CorpusIdf":
        if factor <= 0:
            raise ValueError("CorpusIdf.scaled: factor must be positive")
        return CorpusIdf(
            doc_count=self.doc_count,
            tables={
                n: {g: w * factor for g, w in t.items()} for n, t in self.tables.items()
            },
        )

    def save(self, path) -> None:
        payload = {
            "schema": self.SCHEMA,
            "doc_count": self.doc_count,
            "tables": {
                str(n): {" ".join(g): w for g, w in t.items()}
                for n, t in self.tables.items()
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> "CorpusIdf":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("schema") != cls.SCHEMA:
            raise DataValidationError(f"idf file {path}: unknown schema {payload.get('schema')!r}")
        return cls(
            doc_count=int(payload["doc_count"]),
            tables={
                int(n): {tuple(g.split(" ")): float(w) for g, w in t.items()}
                for n, t in payload["tables"].items()
            },
        )


def _tfidf_cosine(cand: Counter, ref: Counter, idf: CorpusIdf) -> float:
    """Cosine of tf-idf vectors; zero if either vector is zero."""
    dot = 0.0
    for gram, count in cand.items():
        if gram in ref:
            w = idf.weight(gram)
            dot += (count * w) * (ref[gram] * w)
    norm_c = math.sqrt(sum((c * idf.weight(g)) ** 2 for g, c in cand.items()))
    norm_r = math.sqrt(sum((c * idf.weight(g)) ** 2 for g, c in ref.items()))
    if norm_c == 0.0 or norm_r == 0.0:
        return 0.0
    return dot / (norm_c * norm_r)


def cider(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    idf: CorpusIdf,
) -> float:
    """Consensus score in [0, 10]: mean tf-idf n-gram cosine, scaled by 10."""
    if idf is None:
        raise EmptyInputError("cider: idf table is required")
    if not references:
        raise EmptyInputError("cider: need at least one reference")
    per_n: list[float] = []
    for n in range(1, MAX_NGRAM + 1):
        cand_counts = _ngrams(candidate, n)
        sims = [_tfidf_cosine(cand_counts, _ngrams(ref, n), idf) for ref in references]
        per_n.append(sum(sims) / len(sims))
    return CIDER_SCALE * sum(per_n) / MAX_NGRAM


@dataclass
class MetricReport:
    """BLEU-1..4, ROUGE-L and CIDEr for one generated story."""

    bleu: tuple[float, float, float, float]
    rouge_l: float
    cider: float

    def to_dict(self) -> dict[str, float]:
        out = {f"bleu{i + 1}": b for i, b in enumerate(self.bleu)}
        out["rouge_l"] = self.rouge_l
        out["cider"] = self.cider
        # percent-style CIDEr column so tables can be read either way
        out["cider_pct"] = self.cider * 10.0
        return out

    @staticmethod
    def csv_header() -> str:
        return "bleu1,bleu2,bleu3,bleu4,rouge_l,cider,cider_pct"

    def to_csv_row(self) -> str:
        d = self.to_dict()
        return ",".join(f"{d[k]:.6f}" for k in MetricReport.csv_header().split(","))


def score_story(
    generated_tokens: Sequence[str],
    reference_token_streams: Sequence[Sequence[str]],
    idf: CorpusIdf,
) -> MetricReport:
    """Score one concatenated story against reference token streams."""
    if not reference_token_streams:
        raise EmptyInputError("score_story: need at least one reference story")
    b = bleu(generated_tokens, reference_token_streams)
    return MetricReport(
        bleu=(b[0], b[1], b[2], b[3]),
        rouge_l=rouge_l(generated_tokens, reference_token_streams),
        cider=cider(generated_tokens, reference_token_streams, idf),
    )
