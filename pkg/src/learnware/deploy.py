"""Deployment phase: pick or combine pooled models for an unlabeled task.

Two modes, chosen by the caller:

* task-recurrent: the test distribution equals one provider's; pick the
  entry whose RKME is closest in MMD and predict everything with its model.
* instance-recurrent: the test distribution is a convex mixture of the
  providers'; estimate the mixture weights, herd a labelled mimic sample,
  train a selector on it and route each test point to the selected model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import InputError
from .herding import herd_sample
from .kernel import KernelConfig, as_matrix, gram
from .market import LearnwareEntry, Pool
from .models import DEFAULT_RIDGE, KernelRidgeModel, train_krc
from .rkme import Rkme, mmd_sq, weighted_inner

logger = logging.getLogger(__name__)

WEIGHT_RIDGE = 1e-8
MIMIC_CAP = 2000


@dataclass
class MixtureWeights:
    w: np.ndarray
    raw_w: np.ndarray
    residual: float
    condition: float = 1.0
    warning: str | None = None

    def to_dict(self) -> dict:
        return {
            "w": self.w.tolist(),
            "raw_w": self.raw_w.tolist(),
            "residual": self.residual,
            "condition": self.condition,
            "warning": self.warning,
        }


@dataclass
class MimicSample:
    X: np.ndarray
    provider: np.ndarray

    def __post_init__(self) -> None:
        self.X = as_matrix(self.X, "X")
        self.provider = np.asarray(self.provider, dtype=int)
        if self.X.shape[0] < 1 or self.provider.shape != (self.X.shape[0],):
            raise InputError("mimic sample needs >= 1 point and one provider index per point")


@dataclass
class Deployment:
    """Predictions plus every intermediate of the deployment run."""

    predictions: np.ndarray
    chosen: np.ndarray
    per_entry_mmd: list[float] | None = None
    weights: MixtureWeights | None = None
    mimic: MimicSample | None = None
    selector: KernelRidgeModel | None = None
    extra: dict = field(default_factory=dict)

    def diagnostics(self) -> dict:
        d: dict = {}
        if self.weights is not None:
            d.update(w=self.weights.w.tolist(), raw_w=self.weights.raw_w.tolist(), residual=self.weights.residual)
        if self.per_entry_mmd is not None:
            d["per_entry_mmd"] = list(self.per_entry_mmd)
        d.update(self.extra)
        return d


def _entries(pool) -> list[LearnwareEntry]:
    entries = pool.entries if isinstance(pool, Pool) else list(pool)
    if not entries:
        raise InputError("the learnware pool is empty")
    return entries


def _test_matrix(test, dim: int) -> np.ndarray:
    X = test.X if isinstance(test, Dataset) else as_matrix(test, "test")
    if X.shape[0] < 1:
        raise InputError("test set is empty")
    if X.shape[1] != dim:
        raise InputError(f"test dimension {X.shape[1]} != pool dimension {dim}")
    return X


def match_task_recurrent(pool, test) -> tuple[int, list[float]]:
    """Index of the entry whose RKME is closest to the test KME, and all distances."""
    entries = _entries(pool)
    X = _test_matrix(test, entries[0].spec.dim)
    mmds = [mmd_sq(X, e.spec) for e in entries]
    # np.argmin returns the first minimiser: ties go to the lowest index
    return int(np.argmin(mmds)), mmds


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def mixture_terms(specs: Sequence[Rkme], X: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """``H[i, j] = <Phi_i, Phi_j>``, ``C[i] = mean_n Phi_i(x_n)`` and ``||mu_X||^2``."""
    cfg = specs[0].kernel
    c = len(specs)
    H = np.empty((c, c))
    for i in range(c):
        for j in range(i, c):
            H[i, j] = H[j, i] = specs[i].beta @ gram(cfg, specs[i].Z, specs[j].Z) @ specs[j].beta
    C = np.array([s(X).mean() for s in specs])
    u = np.full(X.shape[0], 1.0 / X.shape[0])
    return H, C, weighted_inner(cfg, X, u, X, u)


def mixture_residual(H: np.ndarray, C: np.ndarray, test_sq: float, w) -> float:
    """``|| mu_X - sum_i w_i Phi_i ||^2`` from precomputed terms."""
    w = np.asarray(w, dtype=float)
    return max(float(test_sq - 2.0 * w @ C + w @ H @ w), 0.0)


def estimate_weights(pool, test, ridge: float = WEIGHT_RIDGE, projection: str = "clip") -> MixtureWeights:
    """Mixture weights of the test distribution over pool entries.

    Solves ``(H + ridge I) raw_w = C`` and maps ``raw_w`` onto the simplex,
    either by clipping negatives and renormalising (``"clip"``) or by
    Euclidean projection (``"euclidean"``).
    """
    entries = _entries(pool)
    X = _test_matrix(test, entries[0].spec.dim)
    specs = [e.spec for e in entries]
    H, C, test_sq = mixture_terms(specs, X)
    raw_w = np.linalg.solve(H + ridge * np.eye(len(specs)), C)
    cond = float(np.linalg.cond(H))
    warning = f"ill-conditioned mixture Gram matrix (cond={cond:.3g})" if cond > 1e10 else None
    if projection == "clip":
        w = np.clip(raw_w, 0.0, None)
        w = w / w.sum() if w.sum() > 0 else np.full(len(specs), 1.0 / len(specs))
    elif projection == "euclidean":
        w = project_simplex(raw_w)
    else:
        raise InputError(f"unknown projection {projection!r}")
    if warning:
        logger.warning(warning)
    return MixtureWeights(w, raw_w, mixture_residual(H, C, test_sq, w), cond, warning)


def default_mimic_size(entries: Sequence[LearnwareEntry]) -> int:
    classes = [len(e.model.classes) for e in entries if getattr(e.model, "classes", None) is not None]
    per = max(classes) if classes else 10
    return min(20 * len(entries) * per, MIMIC_CAP)


def draw_providers(w, size: int, seed: int = 0) -> np.ndarray:
    """Categorical provider indices for a mimic sample of ``size`` points."""
    return np.random.default_rng(seed).choice(len(w), size=size, p=w)


def generate_mimic(pool, w, size: int, seed: int = 0, restarts: int = 10, steps: int = 50) -> MimicSample:
    """Herded sample labelled by provider index, distributed like ``sum_i w_i P_i``.

    Provider labels are drawn categorically from ``w``; provider ``i``'s
    points come from its own herding stream seeded by ``(seed, i)``, so the
    sample does not depend on the order of the categorical draws.
    """
    entries = _entries(pool)
    w = np.asarray(w.w if isinstance(w, MixtureWeights) else w, dtype=float)
    if size < 1:
        raise InputError(f"mimic size must be >= 1, got {size}")
    if w.shape != (len(entries),) or np.any(w < 0) or not w.sum() > 0:
        raise InputError(f"weights must be non-negative with positive sum, got {w!r}")
    w = w / w.sum()
    labels = draw_providers(w, size, seed)
    X = np.empty((size, entries[0].spec.dim))
    for i, e in enumerate(entries):
        idx = np.flatnonzero(labels == i)
        if idx.size:
            stream = np.random.SeedSequence([seed, i])
            X[idx] = herd_sample(e.spec, idx.size, restarts=restarts, steps=steps, seed=stream)
    return MimicSample(X, labels)


def train_selector(cfg: KernelConfig, sample: MimicSample, ridge: float = DEFAULT_RIDGE) -> KernelRidgeModel:
    """Classifier from input point to provider index, trained on the mimic sample."""
    return train_krc(cfg, Dataset(sample.X, sample.provider), ridge=ridge)


def _predict_routed(entries, X: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    preds: np.ndarray | None = None
    for i in np.unique(chosen):
        idx = np.flatnonzero(chosen == i)
        y = np.asarray(entries[i].model.predict(X[idx]))
        if preds is None:
            preds = np.empty(X.shape[0], dtype=y.dtype)
        elif preds.dtype != y.dtype:
            preds = preds.astype(np.result_type(preds, y))
        preds[idx] = y
    return preds


def deploy_task_recurrent(pool, test) -> Deployment:
    entries = _entries(pool)
    X = _test_matrix(test, entries[0].spec.dim)
    best, mmds = match_task_recurrent(entries, X)
    chosen = np.full(X.shape[0], best)
    return Deployment(entries[best].model.predict(X), chosen, per_entry_mmd=mmds, extra={"chosen_index": best})


def deploy_instance_recurrent(
    pool,
    test,
    mimic_size: int | None = None,
    seed: int = 0,
    selector_kernel: KernelConfig | None = None,
    selector_ridge: float = DEFAULT_RIDGE,
    projection: str = "clip",
    restarts: int = 10,
    steps: int = 50,
) -> Deployment:
    entries = _entries(pool)
    X = _test_matrix(test, entries[0].spec.dim)
    weights = estimate_weights(entries, X, projection=projection)
    size = mimic_size or default_mimic_size(entries)
    mimic = generate_mimic(entries, weights, size, seed=seed, restarts=restarts, steps=steps)
    selector = train_selector(selector_kernel or entries[0].spec.kernel, mimic, ridge=selector_ridge)
    chosen = np.asarray(selector.predict(X), dtype=int)
    preds = _predict_routed(entries, X, chosen)
    _, mmds = match_task_recurrent(entries, X)
    return Deployment(preds, chosen, per_entry_mmd=mmds, weights=weights, mimic=mimic, selector=selector)
