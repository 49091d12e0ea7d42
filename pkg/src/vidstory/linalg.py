"""Dense float64 vector/matrix kernels, ADAM, and a finite-difference checker.

Everything model-side funnels through these few functions so that shape
checking and numerical conventions live in one place.  numpy supplies the
actual arithmetic; the contracts (and the errors raised on violation) are
ours.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.special import expit

from .errors import NonFiniteError, ShapeError, ZeroVectorError

Array = np.ndarray

ADAM_BETA1 = 0.8
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def as_vector(x, name: str = "x") -> Array:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {v.shape}")
    return v


def as_matrix(w, name: str = "w") -> Array:
    m = np.asarray(w, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {m.shape}")
    return m


def matvec(w, x) -> Array:
    """Dense matrix-vector product with explicit dimension agreement."""
    w = as_matrix(w)
    x = as_vector(x)
    if w.shape[1] != x.shape[0]:
        raise ShapeError(f"matvec: {w.shape} @ {x.shape} disagree")
    return w @ x


def sigmoid(x) -> Array:
    return expit(np.asarray(x, dtype=np.float64))


def tanh(x) -> Array:
    return np.tanh(np.asarray(x, dtype=np.float64))


def unit_normalize(x) -> Array:
    x = as_vector(x)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise ZeroVectorError("cannot normalize a zero vector")
    return x / norm


def cosine_sim(a, b) -> float:
    """Cosine similarity of two nonzero vectors, in [-1, 1]."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"cosine_sim: shapes {a.shape} and {b.shape} disagree")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus a step counter."""

    m: dict[str, Array]
    v: dict[str, Array]
    step: int = 0

    @classmethod
    def zeros(cls, params: Mapping[str, Array]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            step=0,
        )


def adam_step(
    params: Mapping[str, Array],
    grads: Mapping[str, Array],
    state: AdamState,
    lr: float = 1e-3,
) -> tuple[dict[str, Array], AdamState]:
    """One bias-corrected ADAM update; returns fresh params and state.

    Momentum coefficients are fixed at (0.8, 0.999).  Inputs are left
    untouched; the caller swaps in the returned dictionaries.
    """
    if set(params) != set(grads):
        raise ShapeError("adam_step: parameter and gradient keys differ")
    for k, g in grads.items():
        if np.asarray(g).shape != params[k].shape:
            raise ShapeError(f"adam_step: gradient shape for '{k}' disagrees")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"adam_step: non-finite gradient for '{k}'")
    t = state.step + 1
    new_params: dict[str, Array] = {}
    new_m: dict[str, Array] = {}
    new_v: dict[str, Array] = {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=np.float64)
        m = ADAM_BETA1 * state.m[k] + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v[k] + (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        new_params[k] = p - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        new_m[k] = m
        new_v[k] = v
    return new_params, AdamState(m=new_m, v=new_v, step=t)


def finite_diff_grad(
    f: Callable[[Array], float], x, h: float = 1e-5
) -> Array:
    """Central-difference gradient of a scalar function at x."""
    if h <= 0:
        raise ValueError("finite_diff_grad: h must be positive")
    x = as_vector(x)
    grad = np.zeros_like(x)
    for i in range(x.shape[0]):
        step = np.zeros_like(x)
        step[i] = h
        fp = float(f(x + step))
        fm = float(f(x - step))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError(f"finite_diff_grad: f non-finite at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def max_relative_error(analytic: Mapping[str, Array] | Array, numeric) -> float:
    """Scale-relative max deviation used by every gradient check."""
    if isinstance(analytic, Mapping):
        a = np.concatenate([np.ravel(analytic[k]) for k in sorted(analytic)])
        b = np.concatenate([np.ravel(numeric[k]) for k in sorted(analytic)])
    else:
        a = np.ravel(np.asarray(analytic, dtype=np.float64))
        b = np.ravel(np.asarray(numeric, dtype=np.float64))
    scale = max(float(np.max(np.abs(b), initial=0.0)), 1e-8)
    return float(np.max(np.abs(a - b), initial=0.0)) / scale
