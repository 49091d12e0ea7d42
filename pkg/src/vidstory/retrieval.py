"""Story generation by sentence retrieval.

A story is an ordered list of sentences pulled from a fixed pool (all
training sentences).  Plain nearest-neighbour lookup can repeat itself on
similar clips, so the sequence-level variant restricts each clip to its k
nearest sentences and solves an exact min-cost assignment that forbids
duplicates, doubling k whenever the candidate lists make a duplicate-free
selection infeasible.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .context_rnn import ContextRnnParams, context_embed_clips
from .errors import DataValidationError, EmptyInputError, ZeroVectorError
from .gru import EncoderBundle, encode_sentence, encode_sequence_states
from .linalg import Array, as_matrix, unit_normalize
from .metrics import CorpusIdf, MetricReport, cider, score_story, tokenize
from .narrator import ClipProposal, NarratorParams, rollout

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PoolEntry:
    """One retrievable sentence with its embedding and provenance."""

    index: int
    text: str
    tokens: tuple[str, ...]
    embedding: Array
    story_id: str = ""


class SentencePool:
    """Immutable sentence collection with a normalized embedding matrix."""

    def __init__(self, entries: Sequence[PoolEntry]):
        if not entries:
            raise EmptyInputError("SentencePool: no sentences")
        self.entries = list(entries)
        rows = []
        for e in self.entries:
            if float(np.linalg.norm(e.embedding)) == 0.0:
                raise ZeroVectorError(f"SentencePool: zero embedding at index {e.index}")
            rows.append(unit_normalize(e.embedding))
        self._unit = np.stack(rows)
        # first entry per distinct token sequence; duplicates share embeddings
        self._unique: list[PoolEntry] = []
        seen: set[tuple[str, ...]] = set()
        for e in self.entries:
            if e.tokens not in seen:
                seen.add(e.tokens)
                self._unique.append(e)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def unique_entries(self) -> list[PoolEntry]:
        return self._unique

    @classmethod
    def from_texts(
        cls,
        texts: Sequence[str],
        embeddings: Sequence[Array],
        story_ids: Sequence[str] | None = None,
    ) -> "SentencePool":
        if len(texts) != len(embeddings):
            raise DataValidationError("SentencePool: texts/embeddings lengths disagree")
        ids = story_ids if story_ids is not None else [""] * len(texts)
        return cls(
            [
                PoolEntry(
                    index=i,
                    text=t,
                    tokens=tuple(tokenize(t)),
                    embedding=np.asarray(e, dtype=np.float64),
                    story_id=s,
                )
                for i, (t, e, s) in enumerate(zip(texts, embeddings, ids))
            ]
        )


def nearest_sentence(m, pool: SentencePool) -> PoolEntry:
    """Highest-cosine pool sentence; ties go to the lowest pool index."""
    scores = pool._unit @ unit_normalize(m)
    return pool.entries[int(np.argmax(scores))]


@dataclass(frozen=True)
class StorySentence:
    text: str
    tokens: tuple[str, ...]
    clip_span: tuple[int, int] | None
    similarity: float


@dataclass
class Story:
    """Ordered sentences, one per clip."""

    sentences: list[StorySentence]

    def __len__(self) -> int:
        return len(self.sentences)

    def token_stream(self) -> list[str]:
        out: list[str] = []
        for s in self.sentences:
            out.extend(s.tokens)
        return out

    def to_jsonl(self) -> str:
        lines = []
        for s in self.sentences:
            lines.append(
                json.dumps(
                    {
                        "text": s.text,
                        "clip_span": list(s.clip_span) if s.clip_span else None,
                        "similarity": s.similarity,
                    }
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")

    def to_text(self) -> str:
        return " ".join(s.text for s in self.sentences)


def knn_story(
    clip_embeddings,
    pool: SentencePool,
    k: int = 4,
    clip_spans: Sequence[tuple[int, int]] | None = None,
) -> Story:
    """Best duplicate-free sentence sequence for a clip-embedding sequence.

    Each clip contributes its k nearest distinct sentences as candidates;
    the returned selection minimizes total (1 - cosine) distance over all
    duplicate-free choices.  k doubles when the candidate lists admit no
    duplicate-free selection.
    """
    m = as_matrix(clip_embeddings, "clip_embeddings")
    n_clips = m.shape[0]
    if n_clips < 1:
        raise EmptyInputError("knn_story: no clips")
    if k < 1:
        raise ValueError("knn_story: k must be >= 1")
    if clip_spans is not None and len(clip_spans) != n_clips:
        raise DataValidationError("knn_story: clip_spans length disagrees")
    unique = pool.unique_entries
    if len(unique) < n_clips:
        raise DataValidationError(
            f"knn_story: pool has {len(unique)} distinct sentences for {n_clips} clips"
        )
    unit_pool = np.stack([unit_normalize(e.embedding) for e in unique])
    unit_clips = np.stack([unit_normalize(row) for row in m])
    dist = 1.0 - unit_clips @ unit_pool.T  # (n_clips, n_unique)

    k_eff = min(k, len(unique))
    while True:
        cost = np.full_like(dist, np.inf)
        for i in range(n_clips):
            nearest = np.argsort(dist[i], kind="stable")[:k_eff]
            cost[i, nearest] = dist[i, nearest]
        try:
            rows, cols = linear_sum_assignment(cost)
            break
        except ValueError:
            if k_eff >= len(unique):  # all-finite matrix is always feasible
                raise
            k_eff = min(2 * k_eff, len(unique))

    chosen = dict(zip(rows.tolist(), cols.tolist()))
    sentences = []
    for i in range(n_clips):
        entry = unique[chosen[i]]
        sentences.append(
            StorySentence(
                text=entry.text,
                tokens=entry.tokens,
                clip_span=tuple(clip_spans[i]) if clip_spans is not None else None,
                similarity=float(1.0 - dist[i, chosen[i]]),
            )
        )
    return Story(sentences=sentences)


def video_prefix_embeddings(bundle: EncoderBundle, frame_features) -> Array:
    """Per-position video-encoder hidden states, the agent's observations."""
    return encode_sequence_states(bundle.video, frame_features)


def generate_story(
    frame_features,
    bundle: EncoderBundle,
    context_params: ContextRnnParams,
    narrator_params: NarratorParams,
    pool: SentencePool,
    knn_k: int = 4,
) -> Story:
    """Full pipeline: scan, select clips, embed with context, retrieve.

    Returns an empty story (with a logged warning) when the agent selects
    no clips.
    """
    frames = as_matrix(frame_features, "frame_features")
    x = video_prefix_embeddings(bundle, frames)
    proposals, _ = rollout(narrator_params, x, mode="test")
    if not proposals:
        logger.warning("generate_story: narrator selected no clips; empty story")
        return Story(sentences=[])
    spans = [(p.start, p.end) for p in proposals]
    m = context_embed_clips(bundle, context_params, frames, spans)
    return knn_story(m, pool, knn_k, clip_spans=spans)


class StoryEngine:
    """Frozen models + sentence pool + references, both for storytelling and
    as the reward oracle for policy training."""

    def __init__(
        self,
        videos: dict,
        annotations: dict,
        train_ids: Sequence[str],
        bundle: EncoderBundle,
        context_params: ContextRnnParams,
        word_table,
        knn_k: int = 4,
        video_ids: Sequence[str] | None = None,
    ):
        self.bundle = bundle
        self.context_params = context_params
        self.word_table = word_table
        self.knn_k = knn_k
        self.videos = videos
        self.annotations = annotations
        self.video_ids = list(video_ids) if video_ids is not None else list(train_ids)
        for vid in self.video_ids:
            if vid not in videos:
                raise DataValidationError(f"StoryEngine: unknown video id {vid!r}")

        texts: list[str] = []
        embeddings: list[Array] = []
        story_ids: list[str] = []
        docs: list[list[str]] = []
        for vid in train_ids:
            for ann in annotations.get(vid, []):
                doc: list[str] = []
                for sent in ann.sentences:
                    toks = tokenize(sent.text)
                    texts.append(sent.text)
                    embeddings.append(
                        encode_sentence(bundle, word_table.encode(toks))
                    )
                    story_ids.append(f"{vid}/{ann.worker_id}")
                    doc.extend(toks)
                docs.append(doc)
        if not texts:
            raise EmptyInputError("StoryEngine: no training sentences for the pool")
        self.pool = SentencePool.from_texts(texts, embeddings, story_ids)
        self.idf = CorpusIdf.build(docs)
        self._frame_cache: dict[str, Array] = {}

    @property
    def embedding_phase(self) -> str:
        return self.bundle.phase

    def video_length(self, video_id: str) -> int:
        return int(self.videos[video_id].frame_features.shape[0])

    def frame_embeddings(self, video_id: str) -> Array:
        if video_id not in self._frame_cache:
            self._frame_cache[video_id] = video_prefix_embeddings(
                self.bundle, self.videos[video_id].frame_features
            )
        return self._frame_cache[video_id]

    def story_for_clips(self, video_id: str, proposals: Sequence[ClipProposal]) -> Story:
        if not proposals:
            return Story(sentences=[])
        spans = [(p.start, p.end) for p in proposals]
        m = context_embed_clips(
            self.bundle, self.context_params, self.videos[video_id].frame_features, spans
        )
        return knn_story(m, self.pool, self.knn_k, clip_spans=spans)

    def reference_streams(self, video_id: str) -> list[list[str]]:
        streams = []
        for ann in self.annotations.get(video_id, []):
            stream: list[str] = []
            for sent in ann.sentences:
                stream.extend(tokenize(sent.text))
            streams.append(stream)
        return streams

    def has_references(self, video_id: str) -> bool:
        return bool(self.annotations.get(video_id))

    def story_reward(self, video_id: str, story: Story) -> float:
        refs = self.reference_streams(video_id)
        if not refs:
            raise DataValidationError(f"story_reward: no references for {video_id!r}")
        return cider(story.token_stream(), refs, self.idf)

    def score_story(self, video_id: str, story: Story) -> MetricReport:
        refs = self.reference_streams(video_id)
        return score_story(story.token_stream(), refs, self.idf)

    def annotated_spans(self, video_id: str) -> list[tuple[int, int]]:
        spans: list[tuple[int, int]] = []
        for ann in self.annotations.get(video_id, []):
            spans.extend((s.start, s.end) for s in ann.sentences)
        return spans

    def tell(self, video_id: str, narrator_params: NarratorParams) -> Story:
        return generate_story(
            self.videos[video_id].frame_features,
            self.bundle,
            self.context_params,
            narrator_params,
            self.pool,
            self.knn_k,
        )
