"""Dataset model, file formats, splits, pseudo-GT clips and synthetic corpora.

On disk a dataset is a directory: meta.json (schema + validation
thresholds), videos.jsonl, annotations.jsonl, and one little-endian
float32 feature file per video.  Time spans are stored in sampled-frame
units throughout.  The synthetic generator builds the small, fully
controlled corpora the verification suite trains on, including
context-ambiguous clip pairs (identical features, context-dependent
sentences) and planted "important" positions for reward learning.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataValidationError, EmptyInputError, ShapeError
from .linalg import Array

logger = logging.getLogger(__name__)

CATEGORIES = ("birthday", "camping", "christmas", "wedding")
WORD_DIM = 300
FEATURE_MAGIC = b"VSFF"
FEATURE_VERSION = 1
DATASET_SCHEMA = "vidstory.dataset/1"
CHECKPOINT_SCHEMA = "vidstory.checkpoint/1"
DEFAULT_MIN_SENTENCES = 8
DEFAULT_MIN_WORDS = 6


# -- core records ---------------------------------------------------------


@dataclass
class VideoRecord:
    """A video as pre-subsampled frame features plus metadata."""

    video_id: str
    category: str
    frame_features: Array  # (T, D) float64
    fps: float = 3.0  # source sampling rate of the feature rows

    def __post_init__(self):
        self.frame_features = np.asarray(self.frame_features, dtype=np.float64)
        if self.category not in CATEGORIES:
            raise DataValidationError(
                f"video {self.video_id!r}: unknown category {self.category!r}"
            )
        if self.frame_features.ndim != 2 or self.frame_features.shape[0] < 1:
            raise DataValidationError(
                f"video {self.video_id!r}: features must be a nonempty (T, D) matrix"
            )

    @property
    def length(self) -> int:
        return self.frame_features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.frame_features.shape[1]


@dataclass(frozen=True)
class SentenceSpan:
    text: str
    start: int  # sampled-frame units, inclusive
    end: int  # exclusive


@dataclass
class StoryAnnotation:
    """One worker's story: ordered sentences with time spans."""

    worker_id: str
    sentences: list[SentenceSpan]

    def validate(
        self,
        video_length: int,
        video_id: str = "?",
        min_sentences: int = DEFAULT_MIN_SENTENCES,
        min_words: int = DEFAULT_MIN_WORDS,
    ) -> None:
        where = f"annotation {self.worker_id!r} for video {video_id!r}"
        if len(self.sentences) < min_sentences:
            raise DataValidationError(
                f"{where}: {len(self.sentences)} sentences < required {min_sentences}"
            )
        prev_start = -1
        for i, s in enumerate(self.sentences):
            if len(s.text.split()) < min_words:
                raise DataValidationError(
                    f"{where}: sentence {i} has fewer than {min_words} words"
                )
            if not 0 <= s.start < s.end <= video_length:
                raise DataValidationError(
                    f"{where}: sentence {i} span [{s.start}, {s.end}) outside video of {video_length}"
                )
            if s.start < prev_start:
                raise DataValidationError(f"{where}: sentence {i} starts before sentence {i - 1}")
            prev_start = s.start

    def spans(self) -> list[tuple[int, int]]:
        return [(s.start, s.end) for s in self.sentences]


@dataclass
class Dataset:
    videos: dict[str, VideoRecord]
    annotations: dict[str, list[StoryAnnotation]]
    min_sentences: int = DEFAULT_MIN_SENTENCES
    min_words: int = DEFAULT_MIN_WORDS

    def validate(self) -> None:
        for vid, anns in self.annotations.items():
            if vid not in self.videos:
                raise DataValidationError(f"annotations reference unknown video {vid!r}")
            for ann in anns:
                ann.validate(
                    self.videos[vid].length, vid, self.min_sentences, self.min_words
                )

    def vocabulary(self) -> list[str]:
        words: set[str] = set()
        for anns in self.annotations.values():
            for ann in anns:
                for s in ann.sentences:
                    words.update(s.text.lower().split())
        return sorted(words)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        all_ids = list(self.train) + list(self.val) + list(self.test)
        if len(set(all_ids)) != len(all_ids):
            raise DataValidationError("DatasetSplit: overlapping partitions")


def make_split(ids: Sequence[str], seed: int) -> DatasetSplit:
    """Seeded shuffle then 70/15/15 partition, remainder going to train."""
    ids = sorted(ids)
    if len(ids) < 3:
        raise EmptyInputError("make_split: need at least three ids")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n = len(ids)
    n_val = int(np.floor(0.15 * n))
    n_test = int(np.floor(0.15 * n))
    n_train = n - n_val - n_test
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        val=tuple(shuffled[n_train : n_train + n_val]),
        test=tuple(shuffled[n_train + n_val :]),
    )


# -- feature files --------------------------------------------------------


def write_feature_file(path, features) -> None:
    """Little-endian float32 matrix with a (magic, version, T, D) header."""
    mat = np.asarray(features, dtype=np.float32)
    if mat.ndim != 2:
        raise ShapeError("write_feature_file: features must be 2-d")
    header = FEATURE_MAGIC + struct.pack("<III", FEATURE_VERSION, mat.shape[0], mat.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(mat).tobytes(order="C"))


def read_feature_file(path) -> Array:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 16 or blob[:4] != FEATURE_MAGIC:
        raise DataValidationError(f"feature file {path.name}: bad magic")
    version, t, d = struct.unpack("<III", blob[4:16])
    if version != FEATURE_VERSION:
        raise DataValidationError(f"feature file {path.name}: unsupported version {version}")
    expected = 16 + 4 * t * d
    if len(blob) != expected:
        raise DataValidationError(
            f"feature file {path.name}: truncated ({len(blob)} bytes, expected {expected})"
        )
    mat = np.frombuffer(blob, dtype="<f4", offset=16).reshape(t, d)
    return mat.astype(np.float64)


# -- dataset directory IO -------------------------------------------------


def save_dataset(dataset: Dataset, root) -> None:
    root = Path(root)
    (root / "features").mkdir(parents=True, exist_ok=True)
    meta = {
        "schema": DATASET_SCHEMA,
        "min_sentences": dataset.min_sentences,
        "min_words": dataset.min_words,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    with open(root / "videos.jsonl", "w", encoding="utf-8") as fh:
        for vid in sorted(dataset.videos):
            rec = dataset.videos[vid]
            write_feature_file(root / "features" / f"{vid}.vsf", rec.frame_features)
            fh.write(
                json.dumps(
                    {
                        "id": vid,
                        "category": rec.category,
                        "fps": rec.fps,
                        "features": f"features/{vid}.vsf",
                    }
                )
                + "\n"
            )
    with open(root / "annotations.jsonl", "w", encoding="utf-8") as fh:
        for vid in sorted(dataset.annotations):
            for ann in dataset.annotations[vid]:
                fh.write(
                    json.dumps(
                        {
                            "video_id": vid,
                            "worker_id": ann.worker_id,
                            "sentences": [
                                {"text": s.text, "start": s.start, "end": s.end}
                                for s in ann.sentences
                            ],
                        }
                    )
                    + "\n"
                )


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise DataValidationError(f"{where}: missing field {key!r}")
    return record[key]


def load_dataset(root) -> Dataset:
    """Load and validate a dataset directory, failing with field-level errors."""
    root = Path(root)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise DataValidationError(f"dataset {root}: meta.json missing")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("schema") != DATASET_SCHEMA:
        raise DataValidationError(f"dataset {root}: unknown schema {meta.get('schema')!r}")
    min_sentences = int(meta.get("min_sentences", DEFAULT_MIN_SENTENCES))
    min_words = int(meta.get("min_words", DEFAULT_MIN_WORDS))

    videos: dict[str, VideoRecord] = {}
    with open(root / "videos.jsonl", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            if not line.strip():
                continue
            rec = json.loads(line)
            where = f"videos.jsonl line {line_no + 1}"
            vid = _require(rec, "id", where)
            features = read_feature_file(root / _require(rec, "features", where))
            videos[vid] = VideoRecord(
                video_id=vid,
                category=_require(rec, "category", where),
                frame_features=features,
                fps=float(rec.get("fps", 3.0)),
            )

    annotations: dict[str, list[StoryAnnotation]] = {vid: [] for vid in videos}
    ann_path = root / "annotations.jsonl"
    if ann_path.exists():
        with open(ann_path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh):
                if not line.strip():
                    continue
                rec = json.loads(line)
                where = f"annotations.jsonl line {line_no + 1}"
                vid = _require(rec, "video_id", where)
                if vid not in videos:
                    raise DataValidationError(f"{where}: unknown video id {vid!r}")
                ann = StoryAnnotation(
                    worker_id=str(_require(rec, "worker_id", where)),
                    sentences=[
                        SentenceSpan(
                            text=_require(s, "text", where),
                            start=int(_require(s, "start", where)),
                            end=int(_require(s, "end", where)),
                        )
                        for s in _require(rec, "sentences", where)
                    ],
                )
                annotations[vid].append(ann)

    dataset = Dataset(
        videos=videos,
        annotations=annotations,
        min_sentences=min_sentences,
        min_words=min_words,
    )
    dataset.validate()
    return dataset


# -- checkpoints ----------------------------------------------------------


def save_checkpoint(path, params: dict[str, Array], meta: dict) -> None:
    """Versioned parameter archive; round-trips float64 bitwise."""
    payload = dict(meta)
    payload.setdefault("schema", CHECKPOINT_SCHEMA)
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    np.savez(path, __meta__=np.asarray(json.dumps(payload)), **arrays)


def load_checkpoint(path) -> tuple[dict[str, Array], dict]:
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"checkpoint {path}: file missing")
    with np.load(path, allow_pickle=False) as npz:
        if "__meta__" not in npz:
            raise DataValidationError(f"checkpoint {path.name}: missing metadata entry")
        meta = json.loads(str(npz["__meta__"]))
        if meta.get("schema") != CHECKPOINT_SCHEMA:
            raise DataValidationError(
                f"checkpoint {path.name}: unknown schema {meta.get('schema')!r}"
            )
        params = {k: npz[k] for k in npz.files if k != "__meta__"}
    return params, meta


# -- pseudo ground-truth clips -------------------------------------------


def _span_mask(spans: Iterable[tuple[int, int]], video_length: int) -> Array:
    mask = np.zeros(video_length, dtype=bool)
    for start, end in spans:
        if not 0 <= start < end <= video_length:
            raise DataValidationError(f"span [{start}, {end}) outside video of {video_length}")
        mask[start:end] = True
    return mask


def frame_iou(spans_a, spans_b, video_length: int) -> float:
    """IoU of two span sets as frame sets."""
    a = _span_mask(spans_a, video_length)
    b = _span_mask(spans_b, video_length)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return float(np.count_nonzero(a & b) / union)


def pseudo_gt_clips(
    annotations: Sequence[StoryAnnotation], video_length: int
) -> list[tuple[int, int]]:
    """Spans of the annotator with the largest mean pairwise IoU.

    Ties resolve to the lowest annotator index; a single annotator is
    returned as-is with a warning.
    """
    if not annotations:
        raise EmptyInputError("pseudo_gt_clips: no annotations")
    if len(annotations) == 1:
        warnings.warn("pseudo_gt_clips: single annotator, returning their spans")
        return annotations[0].spans()
    masks = [_span_mask(ann.spans(), video_length) for ann in annotations]
    scores = []
    for i in range(len(annotations)):
        ious = []
        for j in range(len(annotations)):
            if i == j:
                continue
            union = np.count_nonzero(masks[i] | masks[j])
            inter = np.count_nonzero(masks[i] & masks[j])
            ious.append(inter / union if union else 0.0)
        scores.append(float(np.mean(ious)))
    return annotations[int(np.argmax(scores))].spans()


# -- word vectors ---------------------------------------------------------


def _hashed_word_vector(word: str, seed: int) -> Array:
    digest = hashlib.sha256(f"{seed}:{word}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(WORD_DIM)
    return v / np.linalg.norm(v)


@dataclass
class WordVectorTable:
    """Fixed 300-d word vectors with a deterministic hashed OOV fallback."""

    vectors: dict[str, Array]
    fallback_seed: int = 0
    _cache: dict[str, Array] = field(default_factory=dict, repr=False)

    def lookup(self, word: str) -> Array:
        word = word.lower()
        if word in self.vectors:
            return self.vectors[word]
        if word not in self._cache:
            self._cache[word] = _hashed_word_vector(word, self.fallback_seed)
        return self._cache[word]

    def encode(self, tokens: Sequence[str]) -> Array:
        if not tokens:
            raise EmptyInputError("WordVectorTable.encode: empty token list")
        return np.stack([self.lookup(t) for t in tokens])

    @classmethod
    def synthetic(cls, seed: int, vocab: Sequence[str] = ()) -> "WordVectorTable":
        """Deterministic unit-norm vectors derived from (seed, word) hashes."""
        return cls(
            vectors={w.lower(): _hashed_word_vector(w.lower(), seed) for w in vocab},
            fallback_seed=seed,
        )


def save_word_vector_file(table: WordVectorTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(table.vectors):
            values = " ".join(f"{x:.8e}" for x in table.vectors[word])
            fh.write(f"{word} {values}\n")


def load_word_vector_file(path, fallback_seed: int = 0) -> WordVectorTable:
    vectors: dict[str, Array] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != WORD_DIM:
                raise DataValidationError(
                    f"word vectors line {line_no + 1}: dimension {len(values)} != {WORD_DIM}"
                )
            vectors[word.lower()] = np.array([float(v) for v in values])
    if not vectors:
        raise EmptyInputError(f"word vector file {path}: empty")
    return WordVectorTable(vectors=vectors, fallback_seed=fallback_seed)


def word_vectors(source, seed: int = 0, vocab: Sequence[str] = ()) -> WordVectorTable:
    """Build a table from a file path or synthesize one ("synthetic")."""
    if source == "synthetic":
        return WordVectorTable.synthetic(seed, vocab)
    return load_word_vector_file(source, fallback_seed=seed)


# -- synthetic corpora ----------------------------------------------------

_SYLLABLES = ("ba", "do", "ka", "lu", "mi", "no", "pe", "ra", "su", "ti", "vo", "zu")
_ROLE_PREFIX = {"adj": "fa", "noun": "gol", "verb": "wen", "place": "har"}


def _topic_word(role: str, index: int) -> str:
    digits = []
    x = index
    for _ in range(3):
        digits.append(x % len(_SYLLABLES))
        x //= len(_SYLLABLES)
    return _ROLE_PREFIX[role] + "".join(_SYLLABLES[d] for d in digits)


def topic_sentence(topic: int) -> str:
    return (
        f"the {_topic_word('adj', topic)} {_topic_word('noun', topic)} "
        f"{_topic_word('verb', topic)} near the {_topic_word('place', topic)} today"
    )


def ambiguous_sentences(topic: int) -> tuple[str, str]:
    """Two readings of the same visual topic, disambiguated by position."""
    adj = _topic_word("adj", topic)
    noun = _topic_word("noun", topic)
    place = _topic_word("place", topic)
    early = f"the {adj} {noun} {_topic_word('verb', topic)} near the {place} early"
    late = f"the {adj} {noun} {_topic_word('verb', topic + 1)} near the {place} late"
    return early, late


@dataclass
class SynthConfig:
    """Shape of a generated corpus; planted mode adds reward structure."""

    n_videos: int = 8
    clips_per_video: int = 8
    feature_dim: int = 24
    frames_per_clip: int = 3
    gap_frames: int = 1
    ambiguous_videos: int = 0  # how many videos contain the ambiguous pair
    annotators_per_video: int = 1
    planted: bool = False
    background_frames: int = 3  # planted mode: filler frames between clips

    def __post_init__(self):
        if self.n_videos < 1 or self.clips_per_video < 1:
            raise DataValidationError("SynthConfig: need at least one video and clip")
        if self.ambiguous_videos > self.n_videos:
            raise DataValidationError("SynthConfig: more ambiguous videos than videos")
        if self.ambiguous_videos and self.clips_per_video < 4:
            raise DataValidationError(
                "SynthConfig: ambiguous pairs need at least four clips per video"
            )
        if self.feature_dim < 4:
            raise DataValidationError("SynthConfig: feature_dim too small")


@dataclass
class SynthCorpus:
    dataset: Dataset
    # (video_id, clip_index, variant) for every context-ambiguous clip
    ambiguous_clips: list[tuple[str, int, str]] = field(default_factory=list)
    # video_id -> clip spans that carry reward-bearing sentences
    important_spans: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    # (video_id, clip_index) -> sentence text, for retrieval ground truth
    clip_sentences: dict[tuple[str, int], str] = field(default_factory=dict)
    clip_spans: dict[tuple[str, int], tuple[int, int]] = field(default_factory=dict)


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> Array:
    rows = rng.standard_normal((n, dim)).astype(np.float32).astype(np.float64)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def synth_corpus(cfg: SynthConfig, seed: int) -> SynthCorpus:
    """Deterministically generate a verification corpus.

    Plain mode tiles one feature prototype per clip so clip/sentence
    topics separate cleanly; the first cfg.ambiguous_videos videos carry a
    repeated-prototype clip pair whose sentences depend on position.
    Planted mode instead spaces "important" clips between background
    filler, with importance marked in feature space so a linear readout
    can find it.
    """
    rng = np.random.default_rng([seed, 0xC0FFEE])
    if cfg.planted:
        return _synth_planted(cfg, rng)
    return _synth_plain(cfg, rng)


def _synth_plain(cfg: SynthConfig, rng: np.random.Generator) -> SynthCorpus:
    amb_topic = 2000  # reserved index space for the ambiguous pair's words
    sent_a, sent_b = ambiguous_sentences(amb_topic)
    amb_proto = _unit_rows(rng, 1, cfg.feature_dim)[0]

    # shared anchor topics around the ambiguous slots, then fresh topics
    videos: dict[str, VideoRecord] = {}
    annotations: dict[str, list[StoryAnnotation]] = {}
    corpus = SynthCorpus(dataset=Dataset(videos={}, annotations={}))
    next_topic = 0
    clip_len = cfg.frames_per_clip
    stride = clip_len + cfg.gap_frames
    amb_early_idx, amb_late_idx = 1, cfg.clips_per_video - 2

    anchor_start, anchor_end = None, None
    for v in range(cfg.n_videos):
        vid = f"video{v:03d}"
        is_amb = v < cfg.ambiguous_videos
        topics: list[int | None] = []
        for c in range(cfg.clips_per_video):
            if is_amb and c in (amb_early_idx, amb_late_idx):
                topics.append(None)  # ambiguous slot
            elif is_amb and c == 0:
                if anchor_start is None:
                    anchor_start = next_topic
                    next_topic += 1
                topics.append(anchor_start)
            elif is_amb and c == cfg.clips_per_video - 1:
                if anchor_end is None:
                    anchor_end = next_topic
                    next_topic += 1
                topics.append(anchor_end)
            else:
                topics.append(next_topic)
                next_topic += 1

        frames = np.zeros((cfg.clips_per_video * stride - cfg.gap_frames, cfg.feature_dim))
        sentences: list[SentenceSpan] = []
        for c, topic in enumerate(topics):
            start = c * stride
            end = start + clip_len
            if topic is None:
                proto = amb_proto
                text = sent_a if c == amb_early_idx else sent_b
                corpus.ambiguous_clips.append(
                    (vid, c, "early" if c == amb_early_idx else "late")
                )
            else:
                proto = _unit_rows(
                    np.random.default_rng([hash_seed := topic, 0xFACE]), 1, cfg.feature_dim
                )[0]
                text = topic_sentence(topic)
            frames[start:end] = proto
            sentences.append(SentenceSpan(text=text, start=start, end=end))
            corpus.clip_sentences[(vid, c)] = text
            corpus.clip_spans[(vid, c)] = (start, end)

        videos[vid] = VideoRecord(
            video_id=vid,
            category=CATEGORIES[v % len(CATEGORIES)],
            frame_features=frames,
        )
        annotations[vid] = [
            StoryAnnotation(worker_id=f"worker{w}", sentences=list(sentences))
            for w in range(cfg.annotators_per_video)
        ]

    dataset = Dataset(
        videos=videos,
        annotations=annotations,
        min_sentences=min(DEFAULT_MIN_SENTENCES, cfg.clips_per_video),
        min_words=DEFAULT_MIN_WORDS,
    )
    dataset.validate()
    corpus.dataset = dataset
    return corpus


def _synth_planted(cfg: SynthConfig, rng: np.random.Generator) -> SynthCorpus:
    """Important clips carry a shared feature marker plus a topic direction."""
    marker = _unit_rows(rng, 1, cfg.feature_dim)[0]
    background = _unit_rows(rng, 1, cfg.feature_dim)[0]
    videos: dict[str, VideoRecord] = {}
    annotations: dict[str, list[StoryAnnotation]] = {}
    corpus = SynthCorpus(dataset=Dataset(videos={}, annotations={}))

    clip_len = cfg.frames_per_clip
    stride = clip_len + cfg.background_frames
    topic = 0
    for v in range(cfg.n_videos):
        vid = f"video{v:03d}"
        n_frames = cfg.background_frames + cfg.clips_per_video * stride
        frames = np.tile(background, (n_frames, 1))
        sentences: list[SentenceSpan] = []
        spans: list[tuple[int, int]] = []
        for c in range(cfg.clips_per_video):
            start = cfg.background_frames + c * stride
            end = start + clip_len
            direction = _unit_rows(np.random.default_rng([topic, 0xFEED]), 1, cfg.feature_dim)[0]
            proto = marker + 0.8 * direction
            proto = 1.6 * proto / np.linalg.norm(proto)
            frames[start:end] = proto.astype(np.float32).astype(np.float64)
            text = topic_sentence(topic)
            sentences.append(SentenceSpan(text=text, start=start, end=end))
            spans.append((start, end))
            corpus.clip_sentences[(vid, c)] = text
            corpus.clip_spans[(vid, c)] = (start, end)
            topic += 1
        videos[vid] = VideoRecord(
            video_id=vid,
            category=CATEGORIES[v % len(CATEGORIES)],
            frame_features=frames,
        )
        annotations[vid] = [StoryAnnotation(worker_id="worker0", sentences=sentences)]
        corpus.important_spans[vid] = spans

    dataset = Dataset(
        videos=videos,
        annotations=annotations,
        min_sentences=min(DEFAULT_MIN_SENTENCES, cfg.clips_per_video),
        min_words=DEFAULT_MIN_WORDS,
    )
    dataset.validate()
    corpus.dataset = dataset
    return corpus


# -- glue for the training phases ----------------------------------------


def annotation_pairs(
    dataset: Dataset, video_ids: Sequence[str], word_table: WordVectorTable
):
    """Flatten (clip features, sentence word-vectors) pairs for given videos."""
    from .metrics import tokenize

    clips: list[Array] = []
    sentences: list[Array] = []
    story_ids: list[int] = []
    story_counter = 0
    for vid in video_ids:
        for ann in dataset.annotations.get(vid, []):
            for s in ann.sentences:
                clips.append(dataset.videos[vid].frame_features[s.start : s.end])
                sentences.append(word_table.encode(tokenize(s.text)))
            story_ids.append(story_counter)
            story_counter += 1
    return clips, sentences


def story_sequences(
    dataset: Dataset, video_ids: Sequence[str], word_table: WordVectorTable
) -> tuple[list[list[Array]], list[list[Array]]]:
    """Per-story clip and sentence input sequences for the global phase."""
    from .metrics import tokenize

    clip_seqs: list[list[Array]] = []
    sent_seqs: list[list[Array]] = []
    for vid in video_ids:
        for ann in dataset.annotations.get(vid, []):
            clip_seqs.append(
                [dataset.videos[vid].frame_features[s.start : s.end] for s in ann.sentences]
            )
            sent_seqs.append(
                [word_table.encode(tokenize(s.text)) for s in ann.sentences]
            )
    return clip_seqs, sent_seqs
