"""Empirical kernel mean embeddings and the reduced-set specification.

A reduced KME summarises a dataset ``X`` by ``M`` weighted pseudo-points
``(beta, Z)`` so that ``sum_m beta_m k(z_m, .)`` is close in RKHS norm to the
empirical embedding ``(1/N) sum_n k(x_n, .)``.  ``Z`` is *constructed*
(optimised freely in input space), never selected from ``X``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Union

import numpy as np
import scipy.linalg
from sklearn.cluster import KMeans

from .data import Dataset
from .errors import DivergenceError, InputError, KernelMismatchError, SolverError
from .kernel import KernelConfig, as_matrix, gram, grad_gram

logger = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-8
_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class Rkme:
    """Reduced KME ``Phi(x) = sum_m beta[m] * k(Z[m], x)``; immutable."""

    kernel: KernelConfig
    beta: np.ndarray
    Z: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        Z = as_matrix(self.Z, "Z").copy()
        beta = np.asarray(self.beta, dtype=float).reshape(-1).copy()
        if Z.shape[0] < 1:
            raise InputError("a reduced set needs at least one point")
        if beta.shape[0] != Z.shape[0]:
            raise InputError(f"beta has {beta.shape[0]} entries but Z has {Z.shape[0]} rows")
        if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(beta))):
            raise InputError("reduced set contains non-finite values")
        Z.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "beta", beta)

    @property
    def size(self) -> int:
        return self.Z.shape[0]

    @property
    def dim(self) -> int:
        return self.Z.shape[1]

    def __call__(self, X) -> np.ndarray:
        """Evaluate ``Phi`` at each row of ``X``."""
        X = as_matrix(X, "X")
        if X.shape[1] != self.dim:
            raise InputError(f"dimension mismatch: spec has d={self.dim}, input has d={X.shape[1]}")
        return gram(self.kernel, X, self.Z) @ self.beta

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "beta": self.beta.tolist(),
            "Z": self.Z.tolist(),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Rkme":
        try:
            return cls(
                kernel=KernelConfig.from_dict(d["kernel"]),
                beta=np.array(d["beta"], dtype=float),
                Z=np.array(d["Z"], dtype=float),
                meta=dict(d.get("meta", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"invalid RKME document: {exc}") from exc


def rkme_eval(spec: Rkme, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError(f"expected a single point, got shape {x.shape}")
    return float(spec(x)[0])


Embedding = Union[Rkme, Dataset, np.ndarray]


def weighted_inner(cfg: KernelConfig, A, wa, B, wb) -> float:
    """``sum_ij wa[i] wb[j] k(A[i], B[j])``, computed in blocks to bound memory."""
    total = 0.0
    for i in range(0, A.shape[0], _CHUNK):
        block = gram(cfg, A[i : i + _CHUNK], B)
        total += float(wa[i : i + _CHUNK] @ (block @ wb))
    return total


def _atoms(emb: Embedding) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(emb, Rkme):
        return emb.Z, emb.beta
    X = emb.X if isinstance(emb, Dataset) else as_matrix(emb)
    if X.shape[0] == 0:
        raise InputError("empty point set")
    return X, np.full(X.shape[0], 1.0 / X.shape[0])


def _resolve_kernel(embs, kernel: KernelConfig | None) -> KernelConfig:
    kernels = [e.kernel for e in embs if isinstance(e, Rkme)]
    if kernel is not None:
        kernels.append(kernel)
    if not kernels:
        raise InputError("a kernel config is required when no RKME is involved")
    if any(k != kernels[0] for k in kernels[1:]):
        raise KernelMismatchError(f"embeddings use different kernels: {sorted(set(map(str, kernels)))}")
    return kernels[0]


def empirical_kme_inner(cfg: KernelConfig, X, X_prime) -> float:
    """Inner product of two empirical KMEs, ``(1/(N N')) sum_ij k(x_i, x'_j)``."""
    A, wa = _atoms(X)
    B, wb = _atoms(X_prime)
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return weighted_inner(cfg, A, wa, B, wb)


def mmd_sq(a: Embedding, b: Embedding, kernel: KernelConfig | None = None) -> float:
    """Squared RKHS distance between two embeddings.

    Each side is an :class:`Rkme` (weights ``beta``) or a raw point set
    (uniform weights).  When neither side is an RKME, ``kernel`` is required.
    Slightly negative round-off results are clamped to zero.
    """
    cfg = _resolve_kernel((a, b), kernel)
    A, wa = _atoms(a)
    B, wb = _atoms(b)
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    value = (
        weighted_inner(cfg, A, wa, A, wa)
        + weighted_inner(cfg, B, wb, B, wb)
        - 2.0 * weighted_inner(cfg, A, wa, B, wb)
    )
    return max(value, 0.0)


def objective(cfg: KernelConfig, beta, Z, X, self_term: float | None = None) -> float:
    """Reduced-set objective ``F(beta, Z) = ||mean_n k(x_n,.) - sum_m beta_m k(z_m,.)||^2``.

    ``self_term`` (the data-only constant) may be passed to avoid recomputing it.
    """
    X = as_matrix(X, "X")
    Z = as_matrix(Z, "Z")
    beta = np.asarray(beta, dtype=float)
    N = X.shape[0]
    if self_term is None:
        w = np.full(N, 1.0 / N)
        self_term = weighted_inner(cfg, X, w, X, w)
    cross = float(beta @ gram(cfg, Z, X).sum(axis=1)) / N
    return self_term + float(beta @ gram(cfg, Z) @ beta) - 2.0 * cross


def update_beta(cfg: KernelConfig, Z, X, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """Optimal weights at fixed ``Z``: solve ``(K + ridge I) beta = C``.

    ``K[n, m] = k(z_n, z_m)`` is M x M and ``C[n] = mean_m k(z_n, x_m)``.
    """
    Z = as_matrix(Z, "Z")
    X = as_matrix(X, "X")
    if Z.shape[0] < 1 or X.shape[0] < 1:
        raise InputError("update_beta needs non-empty Z and X")
    K = gram(cfg, Z)
    C = gram(cfg, Z, X).mean(axis=1)
    if ridge:
        K[np.diag_indices_from(K)] += ridge
    try:
        return scipy.linalg.solve(K, C, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SolverError(f"kernel matrix of the reduced set is singular: {exc}") from exc


def _grad_Z(cfg: KernelConfig, beta: np.ndarray, Z: np.ndarray, X: np.ndarray) -> np.ndarray:
    N = X.shape[0]
    g_zz = grad_gram(cfg, Z, Z, beta)
    g_zx = grad_gram(cfg, Z, X, np.full(N, 1.0 / N))
    return 2.0 * beta[:, None] * (g_zz - g_zx)


def kmeans_init(X: np.ndarray, M: int, seed: int) -> np.ndarray:
    km = KMeans(n_clusters=M, init="k-means++", n_init=1, max_iter=100, random_state=seed)
    with warnings.catch_warnings():
        # fewer distinct points than clusters yields duplicate centres; the ridge handles it
        warnings.simplefilter("ignore")
        km.fit(X)
    return np.array(km.cluster_centers_, dtype=float)


def reduce(
    cfg: KernelConfig,
    X,
    M: int,
    T: int = 20,
    eta: float = 0.1,
    seed: int = 0,
    tol: float = 1e-6,
    ridge: float = DEFAULT_RIDGE,
    max_halvings: int = 20,
) -> Rkme:
    """Build a reduced KME of ``X`` with ``M`` points by alternating optimisation.

    Starts from k-means centres, then for each outer iteration solves for
    ``beta`` in closed form and takes one Jacobi gradient step on all of
    ``Z``.  A step that would increase the objective is halved (up to
    ``max_halvings`` times) and dropped if it never decreases, so the
    recorded objective sequence ``meta["history"]`` is non-increasing.
    Iteration stops early once the relative decrease falls below ``tol``.
    """
    X = X.X if isinstance(X, Dataset) else as_matrix(X, "X")
    N = X.shape[0]
    if not (1 <= M <= N):
        raise InputError(f"reduced set size must satisfy 1 <= M <= N, got M={M}, N={N}")
    if T < 1:
        raise InputError(f"iteration count must be >= 1, got {T}")
    if not eta > 0:
        raise InputError(f"step size must be positive, got {eta}")
    if not np.all(np.isfinite(X)):
        raise InputError("data contains non-finite values")

    w = np.full(N, 1.0 / N)
    self_term = weighted_inner(cfg, X, w, X, w)

    def F(b, z):
        value = objective(cfg, b, z, X, self_term)
        if not np.isfinite(value):
            raise DivergenceError(f"objective became non-finite ({value}); reduce the step size")
        return value

    Z = kmeans_init(X, M, seed)
    beta = update_beta(cfg, Z, X, ridge)
    current = F(beta, Z)
    history = [current]
    for t in range(T):
        candidate = update_beta(cfg, Z, X, ridge)
        value = F(candidate, Z)
        if value <= current:
            beta, current = candidate, value

        grad = _grad_Z(cfg, beta, Z, X)
        step = eta
        for _ in range(max_halvings + 1):
            Z_try = Z - step * grad
            value = F(beta, Z_try)
            if value <= current:
                Z, current = Z_try, value
                break
            step *= 0.5

        previous = history[-1]
        history.append(current)
        if previous - current <= tol * max(previous, np.finfo(float).tiny):
            break

    logger.debug("reduce: N=%d M=%d iters=%d F=%.3e", N, M, len(history) - 1, current)
    meta = {
        "source_size": N,
        "objective": current,
        "history": history,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return Rkme(kernel=cfg, beta=beta, Z=Z, meta=meta)
