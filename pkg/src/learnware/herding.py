"""Kernel herding from a reduced KME.

Each draw greedily maximises

    Phi(x) - 1/(T+1) * sum_{t<=T} k(x_t, x)

over the input space.  The maximisation is approximate: gradient ascent
with per-candidate backtracking, started from every reduced-set atom plus
random Gaussian perturbations of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import expansion_value_and_grad, gram
from .rkme import Rkme, weighted_inner


@dataclass
class HerdState:
    """Points herded so far from ``spec``; grows by one row per draw."""

    spec: Rkme
    drawn: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if self.drawn is None:
            self.drawn = np.empty((0, self.spec.dim))

    @property
    def T(self) -> int:
        return self.drawn.shape[0]


def _expansion(spec: Rkme, drawn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centres and weights of the herding objective as one kernel expansion."""
    T = drawn.shape[0]
    centers = np.vstack([spec.Z, drawn])
    weights = np.concatenate([spec.beta, np.full(T, -1.0 / (T + 1))])
    return centers, weights


def _bounds(spec: Rkme) -> tuple[np.ndarray, np.ndarray]:
    pad = 5.0 / np.sqrt(spec.kernel.gamma)
    return spec.Z.min(axis=0) - pad, spec.Z.max(axis=0) + pad


def herd_next(
    state: HerdState,
    restarts: int = 10,
    steps: int = 50,
    rng: np.random.Generator | int | None = 0,
) -> np.ndarray:
    """Draw the next herded point, append it to ``state`` and return it."""
    rng = np.random.default_rng(rng)
    spec = state.spec
    gamma = spec.kernel.gamma
    lo, hi = _bounds(spec)

    starts = [spec.Z]
    if restarts > 0:
        picks = rng.integers(spec.size, size=restarts)
        noise = rng.normal(scale=1.0 / np.sqrt(2.0 * gamma), size=(restarts, spec.dim))
        starts.append(spec.Z[picks] + noise)
    centers, weights = _expansion(spec, state.drawn)
    X = np.clip(np.vstack(starts), lo, hi)
    f, g = expansion_value_and_grad(spec.kernel, X, centers, weights)
    step = np.full(X.shape[0], 0.5 / gamma)

    for _ in range(steps):
        X_try = np.clip(X + step[:, None] * g, lo, hi)
        f_try, g_try = expansion_value_and_grad(spec.kernel, X_try, centers, weights)
        better = f_try > f
        X[better] = X_try[better]
        f[better] = f_try[better]
        g[better] = g_try[better]
        step = np.where(better, step * 1.2, step * 0.5)
        if np.max(step * np.abs(g).max(axis=1)) < 1e-7 / np.sqrt(gamma):
            break

    # argmax returns the lowest index among ties
    x = X[int(np.argmax(f))].copy()
    state.drawn = np.vstack([state.drawn, x])
    return x


def herd_sample(
    spec: Rkme,
    n: int,
    restarts: int = 10,
    steps: int = 50,
    seed: int | np.random.SeedSequence = 0,
) -> np.ndarray:
    """Draw ``n`` points by repeated :func:`herd_next`; deterministic in ``seed``."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    state = HerdState(spec)
    for _ in range(n):
        herd_next(state, restarts=restarts, steps=steps, rng=rng)
    return state.drawn


def herding_error(spec: Rkme, points: np.ndarray) -> float:
    """``|| mean_t k(x_t, .) - Phi ||^2`` via Gram sums."""
    points = np.asarray(points, dtype=float)
    u = np.full(points.shape[0], 1.0 / points.shape[0])
    cfg = spec.kernel
    value = (
        weighted_inner(cfg, points, u, points, u)
        + weighted_inner(cfg, spec.Z, spec.beta, spec.Z, spec.beta)
        - 2.0 * weighted_inner(cfg, points, u, spec.Z, spec.beta)
    )
    return max(value, 0.0)


def herding_errors(spec: Rkme, points: np.ndarray) -> np.ndarray:
    """Error of every prefix ``points[:T]``, T = 1..len(points), in O(T^2)."""
    cfg = spec.kernel
    K = gram(cfg, points)
    cross = gram(cfg, points, spec.Z) @ spec.beta
    phi_sq = weighted_inner(cfg, spec.Z, spec.beta, spec.Z, spec.beta)
    # running sums of the leading principal blocks of K
    row_prefix = np.cumsum(np.tril(K, -1).sum(axis=1))
    T = np.arange(1, points.shape[0] + 1)
    self_sum = 2.0 * row_prefix + np.cumsum(np.diag(K))
    return np.maximum(self_sum / T**2 + phi_sq - 2.0 * np.cumsum(cross) / T, 0.0)
