"""Reinforcement-learned clip selection over a video's frame embeddings.

The agent scans frame embeddings left to right.  A similarity gate skips
positions that look like the last sampled frame; at the remaining
candidate positions a Bernoulli indicator decides whether to cut a clip,
and a Gaussian around a learned mean decides its length.  Training is
plain Monte Carlo policy gradient on a text-metric reward, with a
per-video baseline equal to the mean reward of random clip sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    DataValidationError,
    EmptyInputError,
    NonFiniteError,
    PhaseOrderError,
    ShapeError,
    ZeroVectorError,
)
from .linalg import AdamState, Array, adam_step, as_matrix, cosine_sim, sigmoid

GAUSS_LOG_NORM = 0.5 * np.log(2.0 * np.pi)


@dataclass
class NarratorParams:
    """Learnable clip policy plus its fixed scan constants."""

    w_c: Array  # (dim,) indicator weights
    b_c: float = -0.4  # indicator offset; negative biases toward sparse cuts
    w_l: Array | None = None  # (1, dim) length weights
    b_l: Array | None = None  # (1,) length bias
    kappa: float = 40.0  # length scale: mean length lies in (0, kappa)
    tau: float = 0.7  # gate similarity threshold
    epsilon: float = 0.2  # test-time indicator threshold
    sigma_l: float = 4.0  # train-time length noise, sampled-frame units
    gate_reference: str = "sampled"  # or "candidate": what the gate compares against

    def __post_init__(self):
        self.w_c = np.asarray(self.w_c, dtype=np.float64)
        if self.w_c.ndim != 1:
            raise ShapeError("NarratorParams: w_c must be a vector")
        dim = self.w_c.shape[0]
        if self.w_l is None:
            self.w_l = np.zeros((1, dim))
        self.w_l = np.asarray(self.w_l, dtype=np.float64)
        if self.b_l is None:
            self.b_l = np.zeros(1)
        self.b_l = np.asarray(self.b_l, dtype=np.float64)
        if self.w_l.shape != (1, dim) or self.b_l.shape != (1,):
            raise ShapeError("NarratorParams: length head shapes disagree with w_c")
        if not -1.0 < self.tau <= 1.0:
            raise ValueError("NarratorParams: tau must lie in (-1, 1]")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("NarratorParams: epsilon must lie in [0, 1)")
        if self.kappa <= 0 or self.sigma_l <= 0:
            raise ValueError("NarratorParams: kappa and sigma_l must be positive")
        if self.gate_reference not in ("sampled", "candidate"):
            raise ValueError("NarratorParams: unknown gate_reference mode")

    @property
    def dim(self) -> int:
        return self.w_c.shape[0]

    def to_param_dict(self) -> dict[str, Array]:
        return {
            "narrator.w_c": self.w_c,
            "narrator.b_c": np.asarray(float(self.b_c)),
            "narrator.w_l": self.w_l,
            "narrator.b_l": self.b_l,
        }

    def with_params(self, d: dict[str, Array]) -> "NarratorParams":
        return NarratorParams(
            w_c=np.asarray(d["narrator.w_c"], dtype=np.float64),
            b_c=float(d["narrator.b_c"]),
            w_l=np.asarray(d["narrator.w_l"], dtype=np.float64),
            b_l=np.asarray(d["narrator.b_l"], dtype=np.float64),
            kappa=self.kappa,
            tau=self.tau,
            epsilon=self.epsilon,
            sigma_l=self.sigma_l,
            gate_reference=self.gate_reference,
        )


def init_narrator_params(
    rng: np.random.Generator, dim: int, scale: float = 0.08, **kwargs
) -> NarratorParams:
    return NarratorParams(
        w_c=rng.uniform(-scale, scale, size=dim),
        w_l=rng.uniform(-scale, scale, size=(1, dim)),
        b_l=np.zeros(1),
        **kwargs,
    )


@dataclass(frozen=True)
class ClipProposal:
    """A selected clip; [start, end) is the span after clamping."""

    center: int
    length: int
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"ClipProposal: bad span [{self.start}, {self.end})")


def make_clip(center: int, length: int, video_length: int) -> ClipProposal:
    """Center a clip of the given length and truncate it to the video."""
    if not 0 <= center < video_length:
        raise ValueError(f"make_clip: center {center} outside video of {video_length}")
    length = max(1, int(length))
    start = center - length // 2
    end = start + length
    return ClipProposal(
        center=center,
        length=length,
        start=max(0, start),
        end=min(video_length, end),
    )


@dataclass
class EpisodeTrace:
    """Everything one training rollout needs for the policy-gradient step."""

    evaluated_positions: list[int] = field(default_factory=list)
    actions: list[tuple[int, int, float | None]] = field(default_factory=list)
    logprobs: list[float] = field(default_factory=list)
    logprob_total: Tensor | None = None
    leaves: dict[str, Tensor] | None = None
    reward: float | None = None
    baseline: float | None = None


def candidate_gate(x_n, x_p, tau: float) -> int:
    """1 if the position is dissimilar enough from the reference frame.

    The very first position of a scan has no reference (x_p None) and is
    always a candidate.
    """
    if x_p is None:
        return 1
    return 1 if cosine_sim(x_n, x_p) < tau else 0


def clip_probability(x_n, params: NarratorParams) -> float:
    """Bernoulli parameter max(0, sigmoid(w_c . x) + b_c), clamped into [0, 1]."""
    raw = float(sigmoid(float(np.dot(params.w_c, np.asarray(x_n, dtype=np.float64))))) + params.b_c
    return float(np.clip(raw, 0.0, 1.0))


def clip_length_mean(x_n, params: NarratorParams) -> float:
    """Mean clip length kappa * sigmoid(w_l x + b_l), strictly inside (0, kappa)."""
    z = params.w_l @ np.asarray(x_n, dtype=np.float64) + params.b_l
    return float(params.kappa * sigmoid(z)[0])


def _indicator_prob_t(leaves: dict[str, Tensor], x_t: Tensor) -> Tensor:
    raw = ad.sigmoid(ad.dot(leaves["narrator.w_c"], x_t)) + leaves["narrator.b_c"]
    return ad.clamp(raw, 0.0, 1.0)


def _length_mean_t(leaves: dict[str, Tensor], x_t: Tensor, kappa: float) -> Tensor:
    z = ad.matvec(leaves["narrator.w_l"], x_t) + leaves["narrator.b_l"]
    return ad.vsum(kappa * ad.sigmoid(z))


def rollout(
    params: NarratorParams,
    frame_embeddings,
    mode: str = "test",
    rng: np.random.Generator | None = None,
) -> tuple[list[ClipProposal], EpisodeTrace]:
    """Scan a video and propose clips.

    Train mode samples the indicator and length and records their
    log-probabilities on the tape; test mode thresholds the indicator at
    epsilon and uses the mean length.  The first position always anchors
    the gate reference; afterwards the reference moves per
    params.gate_reference.
    """
    x = as_matrix(frame_embeddings, "frame_embeddings")
    n_frames = x.shape[0]
    if n_frames < 1:
        raise EmptyInputError("rollout: empty video")
    if x.shape[1] != params.dim:
        raise ShapeError(f"rollout: embedding width {x.shape[1]} != {params.dim}")
    if mode not in ("train", "test"):
        raise ValueError(f"rollout: unknown mode {mode!r}")
    if mode == "train" and rng is None:
        raise ValueError("rollout: train mode needs an rng")

    trace = EpisodeTrace()
    if mode == "train":
        trace.leaves = ad.wrap_params(params.to_param_dict())
        logprob_total: Tensor = ad.wrap(0.0)
    proposals: list[ClipProposal] = []
    ref_idx: int | None = None

    for n in range(n_frames):
        if ref_idx is None:
            gate = 1
            ref_idx = n  # first evaluated position anchors the gate
        else:
            gate = candidate_gate(x[n], x[ref_idx], params.tau)
        if gate == 0:
            continue
        trace.evaluated_positions.append(n)

        if mode == "train":
            x_t = ad.wrap(x[n])
            p_t = _indicator_prob_t(trace.leaves, x_t)
            p = p_t.item()
            take = bool(rng.random() < p)
            term = ad.log(p_t) if take else ad.log(1.0 - p_t)
            if not np.isfinite(term.data):
                raise NonFiniteError(f"rollout: non-finite indicator log-prob at {n}")
            logprob_total = logprob_total + term
            trace.logprobs.append(term.item())
        else:
            p = clip_probability(x[n], params)
            take = p > params.epsilon

        raw_length: float | None = None
        if take:
            if mode == "train":
                mu_t = _length_mean_t(trace.leaves, x_t, params.kappa)
                raw_length = float(rng.normal(mu_t.item(), params.sigma_l))
                gauss = (
                    -((raw_length - mu_t) * (raw_length - mu_t))
                    / (2.0 * params.sigma_l**2)
                    - (np.log(params.sigma_l) + GAUSS_LOG_NORM)
                )
                if not np.isfinite(gauss.data):
                    raise NonFiniteError(f"rollout: non-finite length log-prob at {n}")
                logprob_total = logprob_total + gauss
                trace.logprobs.append(gauss.item())
                length = int(np.clip(np.rint(raw_length), 1, params.kappa))
            else:
                length = int(np.clip(np.rint(clip_length_mean(x[n], params)), 1, params.kappa))
            proposals.append(make_clip(n, length, n_frames))
            if params.gate_reference == "sampled":
                ref_idx = n
        if params.gate_reference == "candidate":
            ref_idx = n
        trace.actions.append((n, int(take), raw_length))

    if mode == "train":
        trace.logprob_total = logprob_total
    return proposals, trace


def iou_reward(
    proposals: Sequence[ClipProposal],
    annotated_spans: Sequence[tuple[int, int]],
    video_length: int,
) -> float:
    """Intersection-over-union of proposed vs annotated frame sets."""
    proposed = np.zeros(video_length, dtype=bool)
    for clip in proposals:
        if clip.end > video_length:
            raise DataValidationError(f"iou_reward: clip [{clip.start}, {clip.end}) outside video")
        proposed[clip.start : clip.end] = True
    annotated = np.zeros(video_length, dtype=bool)
    for start, end in annotated_spans:
        if not 0 <= start < end <= video_length:
            raise DataValidationError(f"iou_reward: span [{start}, {end}) outside video")
        annotated[start:end] = True
    union = np.count_nonzero(proposed | annotated)
    if union == 0:
        raise EmptyInputError("iou_reward: both frame sets are empty")
    return float(np.count_nonzero(proposed & annotated) / union)


class StoryEngineLike(Protocol):
    """What narrator training needs from the retrieval side."""

    embedding_phase: str
    video_ids: list[str]

    def video_length(self, video_id: str) -> int: ...

    def frame_embeddings(self, video_id: str) -> Array: ...

    def story_for_clips(self, video_id: str, proposals: Sequence[ClipProposal]): ...

    def story_reward(self, video_id: str, story) -> float: ...

    def has_references(self, video_id: str) -> bool: ...

    def annotated_spans(self, video_id: str) -> list[tuple[int, int]]: ...


@dataclass
class RewardConfig:
    """Reward mode and the policy-gradient training knobs."""

    mode: str = "cider"  # or "iou"
    rollouts_k: int = 10  # random rollouts averaged into the per-video baseline
    episodes_per_update: int = 8
    updates: int = 50
    learning_rate: float = 0.01
    seed: int = 0
    baseline_max_clips: int = 12

    def __post_init__(self):
        if self.mode not in ("cider", "iou"):
            raise ValueError(f"RewardConfig: unknown mode {self.mode!r}")
        if self.rollouts_k < 1:
            raise ValueError("RewardConfig: rollouts_k must be >= 1")
        if self.episodes_per_update < 1:
            raise ValueError("RewardConfig: episodes_per_update must be >= 1")


def _proposal_reward(
    engine: StoryEngineLike,
    video_id: str,
    proposals: Sequence[ClipProposal],
    mode: str,
) -> float:
    if mode == "iou":
        return iou_reward(
            proposals, engine.annotated_spans(video_id), engine.video_length(video_id)
        )
    story = engine.story_for_clips(video_id, proposals)
    return engine.story_reward(video_id, story)


def baseline_reward(
    video_id: str,
    k: int,
    engine: StoryEngineLike,
    rng: np.random.Generator,
    mode: str = "cider",
    max_clips: int = 12,
    max_length: int = 40,
) -> float:
    """Average reward of k uniformly random clip sets for one video."""
    if k < 1:
        raise ValueError("baseline_reward: k must be >= 1")
    n_frames = engine.video_length(video_id)
    if n_frames < 1:
        raise EmptyInputError("baseline_reward: empty video")
    rewards = []
    for _ in range(k):
        n_clips = int(rng.integers(1, min(max_clips, n_frames) + 1))
        centers = np.sort(rng.choice(n_frames, size=n_clips, replace=False))
        lengths = rng.integers(1, int(max_length) + 1, size=n_clips)
        proposals = [
            make_clip(int(c), int(l), n_frames) for c, l in zip(centers, lengths)
        ]
        rewards.append(_proposal_reward(engine, video_id, proposals, mode))
    return float(np.mean(rewards))


def reinforce_update(
    traces: Sequence[EpisodeTrace], params: NarratorParams
) -> dict[str, Array]:
    """Monte Carlo policy gradient: mean over episodes of (R - b) grad log pi.

    Returns ascent-direction gradients keyed like params.to_param_dict().
    Each trace must have been produced by a train-mode rollout and carry
    its reward and baseline.
    """
    if not traces:
        raise EmptyInputError("reinforce_update: no episodes")
    grads = {k: np.zeros_like(v) for k, v in params.to_param_dict().items()}
    for trace in traces:
        if trace.logprob_total is None or trace.leaves is None:
            raise ValueError("reinforce_update: trace lacks a training tape")
        if trace.reward is None or trace.baseline is None:
            raise ValueError("reinforce_update: trace lacks reward or baseline")
        if not np.isfinite(trace.logprob_total.data):
            raise NonFiniteError("reinforce_update: non-finite episode log-prob")
        advantage = trace.reward - trace.baseline
        for leaf in trace.leaves.values():
            leaf.grad = None
        ad.backward(trace.logprob_total)
        for k, leaf in trace.leaves.items():
            if leaf.grad is not None:
                grads[k] = grads[k] + advantage * leaf.grad
    m = float(len(traces))
    return {k: g / m for k, g in grads.items()}


@dataclass
class RewardCurve:
    mean_reward: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["update,mean_reward"]
        lines += [f"{i},{r:.6f}" for i, r in enumerate(self.mean_reward)]
        return "\n".join(lines) + "\n"


def train_narrator(
    params: NarratorParams, engine: StoryEngineLike, cfg: RewardConfig
) -> tuple[NarratorParams, RewardCurve]:
    """Policy-gradient training against the engine's reward.

    The embedding side must be fully trained (engine.embedding_phase ==
    "global") and stays frozen; per-video baselines are computed once up
    front from random clip sets.
    """
    if engine.embedding_phase != "global":
        raise PhaseOrderError("train_narrator: embedding models must be globally trained")
    videos = list(engine.video_ids)
    if not videos:
        raise EmptyInputError("train_narrator: engine has no videos")
    if cfg.mode == "cider":
        missing = [v for v in videos if not engine.has_references(v)]
        if missing:
            raise DataValidationError(
                f"train_narrator: no reference stories for {missing[0]}"
            )
    else:
        missing = [v for v in videos if not engine.annotated_spans(v)]
        if missing:
            raise DataValidationError(
                f"train_narrator: no annotated spans for {missing[0]}"
            )

    rng = np.random.default_rng(cfg.seed)
    baselines = {
        vid: baseline_reward(
            vid, cfg.rollouts_k, engine, rng, cfg.mode,
            cfg.baseline_max_clips, int(params.kappa),
        )
        for vid in videos
    }

    param_dict = params.to_param_dict()
    state = AdamState.zeros(param_dict)
    curve = RewardCurve()
    current = params
    for _ in range(cfg.updates):
        update_grads = {k: np.zeros_like(v) for k, v in param_dict.items()}
        episode_rewards: list[float] = []
        for vid in videos:
            x = engine.frame_embeddings(vid)
            traces: list[EpisodeTrace] = []
            for _ in range(cfg.episodes_per_update):
                proposals, trace = rollout(current, x, mode="train", rng=rng)
                trace.reward = _proposal_reward(engine, vid, proposals, cfg.mode)
                trace.baseline = baselines[vid]
                traces.append(trace)
                episode_rewards.append(trace.reward)
            g = reinforce_update(traces, current)
            for k in update_grads:
                update_grads[k] = update_grads[k] + g[k] / len(videos)
        # ascend the expected reward
        descent = {k: -g for k, g in update_grads.items()}
        param_dict, state = adam_step(param_dict, descent, state, cfg.learning_rate)
        current = current.with_params(param_dict)
        curve.mean_reward.append(float(np.mean(episode_rewards)))
    return current, curve
