"""Synthetic providers arranged around a circle.

Provider ``i`` samples from an equal mixture of two isotropic Gaussians at
angle ``2*pi*i/c``: one mean inside the unit circle (radius ``inner``) and
one outside (radius ``outer``).  Every point is labelled by the same global
rule, ``0`` inside the circle and ``1`` outside, whatever provider drew it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import InputError

PROVIDER_NAMES = ("circle", "triangle", "square")


@dataclass(frozen=True)
class ToyConfig:
    n_providers: int = 3
    radius: float = 1.0
    n_per_provider: int = 300
    sigma: float = 0.25
    inner: float = 0.6
    outer: float = 1.4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_providers < 1 or self.n_per_provider < 1:
            raise InputError("need at least one provider and one point per provider")
        if self.sigma < 0 or not (0 <= self.inner < self.radius < self.outer):
            raise InputError("require sigma >= 0 and inner < radius < outer")

    def means(self, provider: int) -> np.ndarray:
        angle = 2.0 * np.pi * provider / self.n_providers
        direction = np.array([np.cos(angle), np.sin(angle)])
        return np.vstack([self.inner * direction, self.outer * direction])

    def name(self, provider: int) -> str:
        return PROVIDER_NAMES[provider] if provider < len(PROVIDER_NAMES) else f"provider{provider}"


def label_rule(X, radius: float = 1.0) -> np.ndarray:
    """Global labelling: 0 strictly inside the circle, 1 on or outside it."""
    X = np.asarray(X, dtype=float)
    return (np.linalg.norm(X, axis=1) >= radius).astype(int)


def _draw(cfg: ToyConfig, provider: int, n: int, rng: np.random.Generator) -> np.ndarray:
    means = cfg.means(provider)
    component = rng.integers(2, size=n)
    return means[component] + cfg.sigma * rng.normal(size=(n, 2))


def _labelled(cfg: ToyConfig, X: np.ndarray) -> Dataset:
    return Dataset(X, label_rule(X, cfg.radius))


def make_toy(cfg: ToyConfig = ToyConfig()) -> tuple[list[Dataset], callable]:
    """Provider datasets plus the labelling rule ``f(X) -> labels``."""
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_providers)
    datasets = [
        _labelled(cfg, _draw(cfg, i, cfg.n_per_provider, np.random.default_rng(s)))
        for i, s in enumerate(streams)
    ]

    def rule(X):
        return label_rule(X, cfg.radius)

    return datasets, rule


def make_test(
    cfg: ToyConfig,
    n: int,
    seed: int,
    provider: int | None = None,
    weights=None,
    return_providers: bool = False,
):
    """Labelled test data.

    Exactly one of ``provider`` (task-recurrent: all points from that
    provider's mixture) or ``weights`` (instance-recurrent: each point's
    provider drawn from ``weights``) must be given.
    """
    if (provider is None) == (weights is None):
        raise InputError("give exactly one of provider= or weights=")
    if n < 1:
        raise InputError(f"test size must be >= 1, got {n}")
    if provider is not None:
        if not 0 <= provider < cfg.n_providers:
            raise InputError(f"provider index {provider} out of range")
        w = np.zeros(cfg.n_providers)
        w[provider] = 1.0
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (cfg.n_providers,) or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise InputError(f"weights must be a probability vector of length {cfg.n_providers}, got {weights!r}")
        w = w / w.sum()
    rng = np.random.default_rng(seed)
    owner = rng.choice(cfg.n_providers, size=n, p=w)
    X = np.empty((n, 2))
    for i in range(cfg.n_providers):
        idx = np.flatnonzero(owner == i)
        if idx.size:
            X[idx] = _draw(cfg, i, idx.size, rng)
    data = _labelled(cfg, X)
    return (data, owner) if return_providers else data
