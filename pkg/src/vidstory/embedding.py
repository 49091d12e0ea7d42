"""Local clip-sentence embedding: pairwise ranking loss and its trainer.

A clip embedding and its paired sentence embedding should score higher
(cosine) than mismatched pairs by a margin.  Two hinge sums cover both
anchor directions; the sentence-anchored sum is weighted by a balance
factor.  Negatives are re-drawn every epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import EmptyInputError, NonFiniteError, ShapeError, ZeroVectorError
from .gru import EncoderBundle, encode_sequence_t
from .linalg import AdamState, Array, adam_step, cosine_sim

DEFAULT_MARGIN = 0.1
DEFAULT_BALANCE = 0.5


@dataclass
class RankingConfig:
    """Hyperparameters for the local ranking phase."""

    margin: float = DEFAULT_MARGIN
    balance: float = DEFAULT_BALANCE
    negatives_per_anchor: int = 1
    epochs: int = 200
    learning_rate: float = 1e-3
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("RankingConfig: margin must be positive")
        if self.balance < 0:
            raise ValueError("RankingConfig: balance must be nonnegative")
        if self.negatives_per_anchor < 1:
            raise ValueError("RankingConfig: need at least one negative per anchor")
        if self.patience < 0:
            raise ValueError("RankingConfig: patience must be nonnegative")


@dataclass
class PairedBatch:
    """Aligned positive embeddings plus per-anchor negative indices.

    negative_sentences[i] / negative_clips[i] index other batch items that
    act as mismatched partners for anchor i; an anchor never indexes
    itself.
    """

    clips: Sequence
    sentences: Sequence
    negative_sentences: Sequence[Sequence[int]]
    negative_clips: Sequence[Sequence[int]]

    def __post_init__(self):
        n = len(self.clips)
        if not (len(self.sentences) == len(self.negative_sentences) == len(self.negative_clips) == n):
            raise ShapeError("PairedBatch: field lengths disagree")
        for i in range(n):
            for j in list(self.negative_sentences[i]) + list(self.negative_clips[i]):
                if j == i:
                    raise ValueError(f"PairedBatch: anchor {i} lists itself as a negative")
                if not 0 <= j < n:
                    raise IndexError(f"PairedBatch: negative index {j} out of range")

    def __len__(self) -> int:
        return len(self.clips)


def similarity(v, x) -> float:
    """Cosine similarity of sentence and clip embeddings."""
    return cosine_sim(v, x)


def _ranking_hinge_t(batch: PairedBatch, margin: float, balance: float) -> Tensor:
    """Shared two-directional hinge used by both ranking losses."""
    if len(batch) == 0:
        raise EmptyInputError("ranking loss: empty batch")
    xs = [ad.wrap(c) for c in batch.clips]
    vs = [ad.wrap(s) for s in batch.sentences]
    for i, t in enumerate(xs + vs):
        if float(np.linalg.norm(t.data)) == 0.0:
            raise ZeroVectorError(f"ranking loss: zero embedding at batch slot {i}")
    clip_anchored = ad.wrap(0.0)
    sentence_anchored = ad.wrap(0.0)
    for i in range(len(batch)):
        s_pos = ad.cosine(xs[i], vs[i])
        for k in batch.negative_sentences[i]:
            clip_anchored = clip_anchored + ad.relu(margin - s_pos + ad.cosine(xs[i], vs[k]))
        for k in batch.negative_clips[i]:
            sentence_anchored = sentence_anchored + ad.relu(margin - s_pos + ad.cosine(vs[i], xs[k]))
    return clip_anchored + balance * sentence_anchored


def clip_sentence_loss_t(batch: PairedBatch, cfg: RankingConfig) -> Tensor:
    return _ranking_hinge_t(batch, cfg.margin, cfg.balance)


def clip_sentence_loss(batch: PairedBatch, cfg: RankingConfig) -> float:
    return clip_sentence_loss_t(batch, cfg).item()


def sample_negatives(
    n_items: int,
    epoch_index: int,
    seed: int,
    negatives_per_anchor: int = 1,
    groups: Sequence[int] | None = None,
) -> list[list[int]]:
    """Uniform negatives per anchor, deterministic in (seed, epoch_index).

    With groups given, an anchor's negatives come from other groups (used
    for story-level sampling); otherwise only the anchor itself is
    excluded.
    """
    if groups is not None and len(groups) != n_items:
        raise ShapeError("sample_negatives: groups length disagrees with n_items")
    if n_items < 2:
        raise EmptyInputError("sample_negatives: need at least two items")
    rng = np.random.default_rng([abs(int(seed)), abs(int(epoch_index)), 0x5EED])
    out: list[list[int]] = []
    for i in range(n_items):
        if groups is None:
            # uniform over the n-1 other items without building the list
            picks = []
            for _ in range(negatives_per_anchor):
                j = int(rng.integers(0, n_items - 1))
                picks.append(j + 1 if j >= i else j)
            out.append(picks)
        else:
            eligible = [j for j in range(n_items) if groups[j] != groups[i]]
            if not eligible:
                raise EmptyInputError(
                    f"sample_negatives: no out-of-group items for anchor {i}"
                )
            out.append([eligible[int(rng.integers(0, len(eligible)))] for _ in range(negatives_per_anchor)])
    return out


@dataclass
class PairDataset:
    """Raw clip/sentence input pairs, already split for early stopping.

    train_clips[i] is a (T_i, feature_dim) matrix paired with the
    (L_i, word_dim) matrix train_sentences[i]; likewise for validation.
    """

    train_clips: list[Array]
    train_sentences: list[Array]
    val_clips: list[Array]
    val_sentences: list[Array]

    def __post_init__(self):
        if len(self.train_clips) != len(self.train_sentences):
            raise ShapeError("PairDataset: train pair lists disagree")
        if len(self.val_clips) != len(self.val_sentences):
            raise ShapeError("PairDataset: validation pair lists disagree")
        if len(self.train_clips) < 2:
            raise EmptyInputError("PairDataset: need at least two training pairs")


@dataclass
class LossCurve:
    train: list[float] = field(default_factory=list)
    validation: list[float] = field(default_factory=list)


def _encode_pairs_t(
    leaves: dict[str, Tensor], clips: Sequence[Array], sentences: Sequence[Array]
) -> tuple[list[Tensor], list[Tensor]]:
    sent_p = {k.split(".", 1)[1]: v for k, v in leaves.items() if k.startswith("sentence.")}
    vid_p = {k.split(".", 1)[1]: v for k, v in leaves.items() if k.startswith("video.")}
    xs = [encode_sequence_t(vid_p, [ad.wrap(r) for r in clip]) for clip in clips]
    vs = [encode_sequence_t(sent_p, [ad.wrap(r) for r in sent]) for sent in sentences]
    return xs, vs


def _epoch_loss_t(
    leaves: dict[str, Tensor],
    clips: Sequence[Array],
    sentences: Sequence[Array],
    neg_sent: list[list[int]],
    neg_clip: list[list[int]],
    cfg: RankingConfig,
) -> Tensor:
    xs, vs = _encode_pairs_t(leaves, clips, sentences)
    batch = PairedBatch(xs, vs, neg_sent, neg_clip)
    return clip_sentence_loss_t(batch, cfg)


def train_local(
    dataset: PairDataset, bundle: EncoderBundle, cfg: RankingConfig
) -> tuple[EncoderBundle, LossCurve]:
    """Full-batch ADAM on the ranking loss with validation early stopping.

    Returns the parameters from the best-validation epoch and the loss
    curve.  Deterministic for a fixed seed.
    """
    params = bundle.to_param_dict()
    state = AdamState.zeros(params)
    curve = LossCurve()
    n_train = len(dataset.train_clips)
    n_val = len(dataset.val_clips)
    val_neg_sent = val_neg_clip = None
    if n_val >= 2:
        # validation negatives are fixed once so the curve is comparable
        val_neg_sent = sample_negatives(n_val, 0, cfg.seed + 1, cfg.negatives_per_anchor)
        val_neg_clip = sample_negatives(n_val, 1, cfg.seed + 1, cfg.negatives_per_anchor)

    best_params = dict(params)
    best_val = np.inf
    best_epoch = -1
    for epoch in range(cfg.epochs):
        neg_sent = sample_negatives(n_train, epoch, cfg.seed, cfg.negatives_per_anchor)
        neg_clip = sample_negatives(n_train, epoch, cfg.seed + 7, cfg.negatives_per_anchor)
        leaves = ad.wrap_params(params)
        loss = _epoch_loss_t(
            leaves, dataset.train_clips, dataset.train_sentences, neg_sent, neg_clip, cfg
        )
        if not np.isfinite(loss.data):
            raise NonFiniteError(f"train_local: loss diverged at epoch {epoch}")
        ad.backward(loss)
        params, state = adam_step(params, ad.grads_of(leaves), state, cfg.learning_rate)
        curve.train.append(loss.item())

        if n_val >= 2:
            val_leaves = {k: ad.wrap(v) for k, v in params.items()}
            val_loss = _epoch_loss_t(
                val_leaves, dataset.val_clips, dataset.val_sentences,
                val_neg_sent, val_neg_clip, cfg,
            ).item()
        else:
            val_loss = curve.train[-1]
        curve.validation.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = dict(params)
        if epoch - best_epoch >= cfg.patience:
            break
    return bundle.with_params(best_params, phase="local"), curve
