"""Context-aware clip embeddings via a residual bidirectional GRU.

A single GRU cell (weights shared between directions) is run forward and
backward over a clip-embedding sequence, and both hidden states are added
onto the input: m_t = x_t + h_t(fwd) + h_t(bwd).  The shortcut makes the
zero-weight network an exact identity, so training only has to learn the
contextual correction.  The global phase minimizes the same two-way hinge
as the local phase, with a larger margin, jointly over these weights and
the encoders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    DataValidationError,
    EmptyInputError,
    NonFiniteError,
    PhaseOrderError,
    ShapeError,
)
from .gru import EncoderBundle, GruParams, encode_sequence_t, gru_cell_t, init_gru_params
from .embedding import LossCurve, PairedBatch, RankingConfig, _ranking_hinge_t, sample_negatives
from .linalg import AdamState, Array, adam_step, as_matrix

DEFAULT_GLOBAL_MARGIN = 0.2


@dataclass(frozen=True)
class ContextRnnParams:
    """One shared GRU cell; input and hidden width must match for the shortcut."""

    cell: GruParams

    def __post_init__(self):
        if self.cell.input_dim != self.cell.hidden_dim:
            raise ShapeError("ContextRnnParams: residual shortcut needs input_dim == hidden_dim")

    @property
    def dim(self) -> int:
        return self.cell.hidden_dim

    def to_param_dict(self) -> dict[str, Array]:
        return self.cell.to_dict("context.")

    @classmethod
    def from_param_dict(cls, d: dict[str, Array]) -> "ContextRnnParams":
        return cls(cell=GruParams.from_dict(d, "context."))

    @classmethod
    def zeros(cls, dim: int) -> "ContextRnnParams":
        return cls(cell=GruParams.zeros(dim, dim))


def init_context_rnn(rng: np.random.Generator, dim: int) -> ContextRnnParams:
    return ContextRnnParams(cell=init_gru_params(rng, dim, dim))


@dataclass
class GlobalRankingConfig:
    """Hyperparameters for the video-story ranking phase."""

    margin: float = DEFAULT_GLOBAL_MARGIN
    balance: float = 0.5
    epochs: int = 100
    learning_rate: float = 1e-3
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("GlobalRankingConfig: margin must be positive")
        if self.balance < 0:
            raise ValueError("GlobalRankingConfig: balance must be nonnegative")
        if self.patience < 0:
            raise ValueError("GlobalRankingConfig: patience must be nonnegative")


def context_rnn_forward_t(p: dict[str, Tensor], xs: Sequence[Tensor]) -> list[Tensor]:
    if len(xs) == 0:
        raise EmptyInputError("context_rnn_forward: empty sequence")
    dim = p["w_rh"].data.shape[0]
    h0 = np.zeros(dim)
    fwd: list[Tensor] = []
    h = ad.wrap(h0)
    for x in xs:
        h = gru_cell_t(p, x, h)
        fwd.append(h)
    bwd_rev: list[Tensor] = []
    h = ad.wrap(h0)
    for x in reversed(xs):
        h = gru_cell_t(p, x, h)
        bwd_rev.append(h)
    bwd = list(reversed(bwd_rev))
    return [ad.add(ad.add(x, f), b) for x, f, b in zip(xs, fwd, bwd)]


def context_rnn_forward(p: ContextRnnParams, sequence) -> Array:
    """Refine an (N, dim) embedding sequence with past and future context."""
    seq = as_matrix(sequence, "sequence")
    if seq.shape[0] < 1:
        raise EmptyInputError("context_rnn_forward: empty sequence")
    if seq.shape[1] != p.dim:
        raise ShapeError(f"context_rnn_forward: width {seq.shape[1]} != {p.dim}")
    pt = {name: ad.wrap(arr) for name, arr in p.cell.to_dict().items()}
    out = context_rnn_forward_t(pt, [ad.wrap(row) for row in seq])
    return np.stack([t.data for t in out])


def video_story_loss_t(batch: PairedBatch, cfg: GlobalRankingConfig) -> Tensor:
    return _ranking_hinge_t(batch, cfg.margin, cfg.balance)


def video_story_loss(batch: PairedBatch, cfg: GlobalRankingConfig) -> float:
    """Two-way hinge over context-aware clip embeddings and sentences."""
    return video_story_loss_t(batch, cfg).item()


@dataclass
class StorySequenceDataset:
    """Per-story clip/sentence inputs for the global phase.

    Element i of each list belongs to story i: a list of (T, feature_dim)
    clip matrices and the aligned list of (L, word_dim) sentence matrices.
    """

    train_clip_seqs: list[list[Array]]
    train_sentence_seqs: list[list[Array]]
    val_clip_seqs: list[list[Array]] = field(default_factory=list)
    val_sentence_seqs: list[list[Array]] = field(default_factory=list)

    def __post_init__(self):
        for cs, ss in zip(self.train_clip_seqs, self.train_sentence_seqs):
            if len(cs) != len(ss):
                raise ShapeError("StorySequenceDataset: clip/sentence counts disagree")
        if len(self.train_clip_seqs) < 2:
            raise EmptyInputError("StorySequenceDataset: need at least two stories")


def _story_epoch_loss_t(
    leaves: dict[str, Tensor],
    clip_seqs: list[list[Array]],
    sentence_seqs: list[list[Array]],
    neg_sent: list[list[int]],
    neg_clip: list[list[int]],
    cfg: GlobalRankingConfig,
) -> Tensor:
    sent_p = {k.split(".", 1)[1]: v for k, v in leaves.items() if k.startswith("sentence.")}
    vid_p = {k.split(".", 1)[1]: v for k, v in leaves.items() if k.startswith("video.")}
    ctx_p = {k.split(".", 1)[1]: v for k, v in leaves.items() if k.startswith("context.")}
    ms: list[Tensor] = []
    vs: list[Tensor] = []
    for clips, sentences in zip(clip_seqs, sentence_seqs):
        xs = [encode_sequence_t(vid_p, [ad.wrap(r) for r in c]) for c in clips]
        ms.extend(context_rnn_forward_t(ctx_p, xs))
        vs.extend(encode_sequence_t(sent_p, [ad.wrap(r) for r in s]) for s in sentences)
    batch = PairedBatch(ms, vs, neg_sent, neg_clip)
    return video_story_loss_t(batch, cfg)


def _story_groups(clip_seqs: list[list[Array]]) -> list[int]:
    groups: list[int] = []
    for story_idx, clips in enumerate(clip_seqs):
        groups.extend([story_idx] * len(clips))
    return groups


def train_global(
    dataset: StorySequenceDataset,
    bundle: EncoderBundle,
    p: ContextRnnParams,
    cfg: GlobalRankingConfig,
) -> tuple[EncoderBundle, ContextRnnParams, LossCurve]:
    """Joint ADAM over encoders and context weights on the story-level loss.

    Requires the local phase to have run first.  Negative pairs are drawn
    across stories and re-sampled per epoch.
    """
    if bundle.phase not in ("local", "global"):
        raise PhaseOrderError("train_global: run the local phase first")
    if bundle.hidden_dim != p.dim:
        raise ShapeError("train_global: context width disagrees with encoders")
    params = bundle.to_param_dict()
    params.update(p.to_param_dict())
    state = AdamState.zeros(params)
    curve = LossCurve()

    groups = _story_groups(dataset.train_clip_seqs)
    n_anchors = len(groups)
    has_val = len(dataset.val_clip_seqs) >= 2
    if has_val:
        val_groups = _story_groups(dataset.val_clip_seqs)
        val_neg_sent = sample_negatives(len(val_groups), 0, cfg.seed + 1, 1, groups=val_groups)
        val_neg_clip = sample_negatives(len(val_groups), 1, cfg.seed + 1, 1, groups=val_groups)

    best_params = dict(params)
    best_val = np.inf
    best_epoch = -1
    for epoch in range(cfg.epochs):
        neg_sent = sample_negatives(n_anchors, epoch, cfg.seed, 1, groups=groups)
        neg_clip = sample_negatives(n_anchors, epoch, cfg.seed + 7, 1, groups=groups)
        leaves = ad.wrap_params(params)
        loss = _story_epoch_loss_t(
            leaves, dataset.train_clip_seqs, dataset.train_sentence_seqs,
            neg_sent, neg_clip, cfg,
        )
        if not np.isfinite(loss.data):
            raise NonFiniteError(f"train_global: loss diverged at epoch {epoch}")
        ad.backward(loss)
        params, state = adam_step(params, ad.grads_of(leaves), state, cfg.learning_rate)
        curve.train.append(loss.item())

        if has_val:
            val_leaves = {k: ad.wrap(v) for k, v in params.items()}
            val_loss = _story_epoch_loss_t(
                val_leaves, dataset.val_clip_seqs, dataset.val_sentence_seqs,
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

    trained_bundle = bundle.with_params(best_params, phase="global")
    trained_ctx = ContextRnnParams.from_param_dict(best_params)
    return trained_bundle, trained_ctx, curve


def context_embed_clips(
    bundle: EncoderBundle,
    p: ContextRnnParams,
    frame_features,
    clips: Sequence[tuple[int, int]],
) -> Array:
    """Embed [start, end) clips of a video and refine them with context."""
    frames = as_matrix(frame_features, "frame_features")
    if len(clips) == 0:
        raise EmptyInputError("context_embed_clips: no clips given")
    n = frames.shape[0]
    for start, end in clips:
        if not (0 <= start < end <= n):
            raise DataValidationError(
                f"context_embed_clips: clip [{start}, {end}) outside video of {n} frames"
            )
    vid_p = {name: ad.wrap(arr) for name, arr in bundle.video.to_dict().items()}
    ctx_p = {name: ad.wrap(arr) for name, arr in p.cell.to_dict().items()}
    xs = [
        encode_sequence_t(vid_p, [ad.wrap(r) for r in frames[start:end]])
        for start, end in clips
    ]
    out = context_rnn_forward_t(ctx_p, xs)
    return np.stack([t.data for t in out])
