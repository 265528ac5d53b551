"""Deterministic numerical kernels: vector algebra, stable reductions,
the Adam optimizer, seeded randomness, and the finite-difference oracle.

All math is 64-bit. Randomness comes exclusively from SeededRng, a
SplitMix64 generator frozen here so identical seeds give identical
streams on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ArityError,
    DegenerateVectorError,
    NumericError,
    ShapeError,
)

__all__ = [
    "as_vector",
    "cosine",
    "log_sum_exp",
    "AdamState",
    "adam_step",
    "finite_diff_check",
    "SeededRng",
    "seeded_shuffle",
]


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting non-finite entries."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericError(f"{name} contains non-finite entries")
    return v


def cosine(u, v) -> float:
    """Cosine similarity u.v / (|u||v|), clamped to [-1, 1].

    The clamp absorbs rounding that can push parallel vectors a few
    ulp outside the valid range; ordering is unaffected.
    """
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape != v.shape:
        raise ShapeError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine undefined for zero-norm input")
    c = float(np.dot(u, v)) / (nu * nv)
    return min(1.0, max(-1.0, c))


def log_sum_exp(logits) -> float:
    """log(sum(exp(x_i))) with max-subtraction so exp never overflows."""
    x = np.asarray(logits, dtype=np.float64).ravel()
    if x.size == 0:
        raise ArityError("log_sum_exp of an empty sequence")
    if not np.all(np.isfinite(x)):
        raise NumericError("log_sum_exp input contains non-finite entries")
    m = float(np.max(x))
    return m + float(np.log(np.sum(np.exp(x - m))))


@dataclass
class AdamState:
    """Per-parameter-block moment estimates for the Adam optimizer."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: np.ndarray, beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        return cls(
            first_moment=np.zeros_like(params, dtype=np.float64),
            second_moment=np.zeros_like(params, dtype=np.float64),
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState,
              lr: float) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update, applied to ``params`` in place.

    Mutates only ``params`` and ``state``; returns both for chaining.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.shape:
        raise ShapeError(
            f"gradient shape {grads.shape} != parameter shape {params.shape}")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient passed to adam_step")

    state.step_count += 1
    t = state.step_count
    state.first_moment *= state.beta1
    state.first_moment += (1.0 - state.beta1) * grads
    state.second_moment *= state.beta2
    state.second_moment += (1.0 - state.beta2) * np.square(grads)
    m_hat = state.first_moment / (1.0 - state.beta1 ** t)
    v_hat = state.second_moment / (1.0 - state.beta2 ** t)
    params -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


def finite_diff_check(loss_fn, params: np.ndarray, analytic_grads: np.ndarray,
                      h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    error_i = |a_i - c_i| / max(1e-12, |a_i| + |c_i|) with
    c_i = (L(p + h e_i) - L(p - h e_i)) / 2h.
    """
    params = np.asarray(params, dtype=np.float64)
    analytic = np.asarray(analytic_grads, dtype=np.float64)
    if params.size == 0:
        raise ArityError("finite_diff_check needs at least one parameter")
    if analytic.shape != params.shape:
        raise ShapeError(
            f"gradient shape {analytic.shape} != parameter shape {params.shape}")
    if h <= 0:
        raise ValueError("step size h must be positive")

    worst = 0.0
    flat = params.ravel()
    aflat = analytic.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(loss_fn(params))
        flat[i] = orig - h
        down = float(loss_fn(params))
        flat[i] = orig
        if not (math.isfinite(up) and math.isfinite(down)):
            raise NumericError(f"loss non-finite at coordinate {i}")
        central = (up - down) / (2.0 * h)
        err = abs(aflat[i] - central) / max(1e-12, abs(aflat[i]) + abs(central))
        worst = max(worst, err)
    return worst


_SM64_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


@dataclass
class SeededRng:
    """SplitMix64 pseudo-random generator (Vigna, 2015).

    The 64-bit output stream is a pure function of the seed, so every
    consumer is bit-reproducible across runs and platforms. This is the
    only randomness source in the package.
    """

    seed: int
    _state: int = field(init=False, repr=False)

    def __post_init__(self):
        self._state = int(self.seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _SM64_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), in ascending order."""
        if k > n:
            raise ValueError(f"cannot sample {k} from {n} items")
        pool = list(range(n))
        # partial Fisher-Yates: fix positions n-1 .. n-k
        for i in range(n - 1, n - 1 - k, -1):
            j = self.randrange(i + 1)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[n - k:])

    def normal(self, size: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """size i.i.d. Gaussian draws via Box-Muller."""
        out = np.empty(size, dtype=np.float64)
        for i in range(0, size, 2):
            u1 = self.random()
            while u1 == 0.0:
                u1 = self.random()
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(2.0 * math.pi * u2)
            if i + 1 < size:
                out[i + 1] = r * math.sin(2.0 * math.pi * u2)
        return mean + std * out


def seeded_shuffle(items, rng: SeededRng) -> list:
    """Return a new list holding a seeded Fisher-Yates permutation."""
    out = list(items)
    rng.shuffle(out)
    return out
