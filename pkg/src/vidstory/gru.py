"""GRU cell and the two sequence encoders (sentences and video clips).

The cell follows the usual gated-update form: reset and update gates are
sigmoids of affine maps of (input, previous state), the candidate state is
a tanh with the reset gate applied to the previous state, and the output
interpolates previous state and candidate through the update gate.
Gradients come from the reverse-mode tape; the public numpy entry points
run the same code path with constant inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import EmptyInputError, NonFiniteError, ShapeError
from .linalg import Array, as_matrix

GRU_FIELDS = ("w_rx", "w_rh", "b_r", "w_zx", "w_zh", "b_z", "w_hx", "w_hh", "b_h")

DEFAULT_HIDDEN_DIM = 300
INIT_SCALE = 0.08


@dataclass(frozen=True)
class GruParams:
    """One GRU cell's weights; matrices are (hidden, in) / (hidden, hidden)."""

    w_rx: Array
    w_rh: Array
    b_r: Array
    w_zx: Array
    w_zh: Array
    b_z: Array
    w_hx: Array
    w_hh: Array
    b_h: Array

    def __post_init__(self):
        h, d = self.w_rx.shape
        for name in ("w_rx", "w_zx", "w_hx"):
            if getattr(self, name).shape != (h, d):
                raise ShapeError(f"GruParams.{name} must have shape {(h, d)}")
        for name in ("w_rh", "w_zh", "w_hh"):
            if getattr(self, name).shape != (h, h):
                raise ShapeError(f"GruParams.{name} must have shape {(h, h)}")
        for name in ("b_r", "b_z", "b_h"):
            if getattr(self, name).shape != (h,):
                raise ShapeError(f"GruParams.{name} must have shape {(h,)}")

    @property
    def input_dim(self) -> int:
        return self.w_rx.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_rx.shape[0]

    def to_dict(self, prefix: str = "") -> dict[str, Array]:
        return {prefix + name: getattr(self, name) for name in GRU_FIELDS}

    @classmethod
    def from_dict(cls, d: dict[str, Array], prefix: str = "") -> "GruParams":
        return cls(**{name: np.asarray(d[prefix + name], dtype=np.float64) for name in GRU_FIELDS})

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "GruParams":
        return cls(
            w_rx=np.zeros((hidden_dim, input_dim)),
            w_rh=np.zeros((hidden_dim, hidden_dim)),
            b_r=np.zeros(hidden_dim),
            w_zx=np.zeros((hidden_dim, input_dim)),
            w_zh=np.zeros((hidden_dim, hidden_dim)),
            b_z=np.zeros(hidden_dim),
            w_hx=np.zeros((hidden_dim, input_dim)),
            w_hh=np.zeros((hidden_dim, hidden_dim)),
            b_h=np.zeros(hidden_dim),
        )


def init_gru_params(
    rng: np.random.Generator, input_dim: int, hidden_dim: int, scale: float = INIT_SCALE
) -> GruParams:
    """Uniform [-scale, scale] init; small enough to keep gates near 0.5."""

    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    return GruParams(
        w_rx=u(hidden_dim, input_dim),
        w_rh=u(hidden_dim, hidden_dim),
        b_r=u(hidden_dim),
        w_zx=u(hidden_dim, input_dim),
        w_zh=u(hidden_dim, hidden_dim),
        b_z=u(hidden_dim),
        w_hx=u(hidden_dim, input_dim),
        w_hh=u(hidden_dim, hidden_dim),
        b_h=u(hidden_dim),
    )


def gru_cell_t(p: dict[str, Tensor], x_t: Tensor, h_prev: Tensor) -> Tensor:
    """One tape-recorded GRU step."""
    r = ad.sigmoid(ad.matvec(p["w_rx"], x_t) + ad.matvec(p["w_rh"], h_prev) + p["b_r"])
    z = ad.sigmoid(ad.matvec(p["w_zx"], x_t) + ad.matvec(p["w_zh"], h_prev) + p["b_z"])
    h_tilde = ad.tanh(
        ad.matvec(p["w_hx"], x_t) + ad.matvec(p["w_hh"], ad.mul(r, h_prev)) + p["b_h"]
    )
    return ad.add(ad.mul(z, h_prev), ad.mul(1.0 - z, h_tilde))


def _as_tensor_params(p: GruParams) -> dict[str, Tensor]:
    return {name: ad.wrap(getattr(p, name)) for name in GRU_FIELDS}


def gru_cell(p: GruParams, x_t, h_prev) -> Array:
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x_t.shape != (p.input_dim,):
        raise ShapeError(f"gru_cell: input shape {x_t.shape} != ({p.input_dim},)")
    if h_prev.shape != (p.hidden_dim,):
        raise ShapeError(f"gru_cell: state shape {h_prev.shape} != ({p.hidden_dim},)")
    return gru_cell_t(_as_tensor_params(p), ad.wrap(x_t), ad.wrap(h_prev)).data


def encode_sequence_t(p: dict[str, Tensor], inputs: Sequence[Tensor]) -> Tensor:
    if len(inputs) == 0:
        raise EmptyInputError("encode_sequence: empty input sequence")
    hidden_dim = p["w_rh"].data.shape[0]
    h = ad.wrap(np.zeros(hidden_dim))
    for x_t in inputs:
        h = gru_cell_t(p, x_t, h)
    return h


def encode_sequence(p: GruParams, inputs) -> Array:
    """Run the cell over a (T, input_dim) sequence from h_0 = 0; return h_T."""
    inputs = as_matrix(inputs, "inputs")
    if inputs.shape[0] < 1:
        raise EmptyInputError("encode_sequence: empty input sequence")
    if inputs.shape[1] != p.input_dim:
        raise ShapeError(
            f"encode_sequence: input width {inputs.shape[1]} != {p.input_dim}"
        )
    pt = _as_tensor_params(p)
    return encode_sequence_t(pt, [ad.wrap(row) for row in inputs]).data


def encode_sequence_states(p: GruParams, inputs) -> Array:
    """Like encode_sequence but returns every hidden state, shape (T, hidden)."""
    inputs = as_matrix(inputs, "inputs")
    if inputs.shape[0] < 1:
        raise EmptyInputError("encode_sequence_states: empty input sequence")
    if inputs.shape[1] != p.input_dim:
        raise ShapeError(
            f"encode_sequence_states: input width {inputs.shape[1]} != {p.input_dim}"
        )
    pt = _as_tensor_params(p)
    h = ad.wrap(np.zeros(p.hidden_dim))
    states = []
    for row in inputs:
        h = gru_cell_t(pt, ad.wrap(row), h)
        states.append(h.data)
    return np.stack(states)


@dataclass(frozen=True)
class EncoderBundle:
    """The sentence and video encoders plus the training-phase marker."""

    sentence: GruParams
    video: GruParams
    phase: str = "init"  # "init" -> "local" -> "global"

    def __post_init__(self):
        if self.sentence.hidden_dim != self.video.hidden_dim:
            raise ShapeError("EncoderBundle: encoders must share a hidden size")
        if self.phase not in ("init", "local", "global"):
            raise ValueError(f"EncoderBundle: unknown phase {self.phase!r}")

    @property
    def hidden_dim(self) -> int:
        return self.sentence.hidden_dim

    def to_param_dict(self) -> dict[str, Array]:
        d = self.sentence.to_dict("sentence.")
        d.update(self.video.to_dict("video."))
        return d

    def with_params(self, d: dict[str, Array], phase: str | None = None) -> "EncoderBundle":
        return EncoderBundle(
            sentence=GruParams.from_dict(d, "sentence."),
            video=GruParams.from_dict(d, "video."),
            phase=self.phase if phase is None else phase,
        )

    def with_phase(self, phase: str) -> "EncoderBundle":
        return replace(self, phase=phase)


def init_encoder_bundle(
    rng: np.random.Generator, word_dim: int, feature_dim: int, hidden_dim: int = DEFAULT_HIDDEN_DIM
) -> EncoderBundle:
    return EncoderBundle(
        sentence=init_gru_params(rng, word_dim, hidden_dim),
        video=init_gru_params(rng, feature_dim, hidden_dim),
    )


def encode_sentence(bundle: EncoderBundle, word_vectors) -> Array:
    """Embed a sentence given its (T, word_dim) word-vector rows."""
    return encode_sequence(bundle.sentence, word_vectors)


def encode_video_clip(bundle: EncoderBundle, frame_features) -> Array:
    """Embed a clip given its (T, feature_dim) frame-feature rows."""
    return encode_sequence(bundle.video, frame_features)


def encoder_gradients(
    bundle: EncoderBundle,
    batch,
    loss_fn: Callable[[dict[str, Tensor], object], Tensor],
) -> dict[str, Array]:
    """Backpropagate loss_fn(wrapped params, batch) through the encoders.

    loss_fn receives the bundle's parameters as tape leaves keyed
    "sentence.*" / "video.*" and must return a scalar Tensor.
    """
    leaves = ad.wrap_params(bundle.to_param_dict())
    loss = loss_fn(leaves, batch)
    if not np.isfinite(loss.data):
        raise NonFiniteError("encoder_gradients: loss is not finite")
    ad.backward(loss)
    grads = ad.grads_of(leaves)
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"encoder_gradients: non-finite gradient in '{k}'")
    return grads
