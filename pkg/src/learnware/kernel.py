"""Kernel functions, Gram matrices and kernel gradients.

Two shift-invariant kernels are supported::

    gaussian   k(x, x') = exp(-gamma * ||x - x'||^2)
    laplacian  k(x, x') = exp(-gamma * ||x - x'||)

The gaussian kernel is the default everywhere: it is smooth at coincident
points, which the gradient steps in reduced-set construction and herding need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InputError, SingularityError

FAMILIES = ("gaussian", "laplacian")


@dataclass(frozen=True)
class KernelConfig:
    family: str = "gaussian"
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        gamma = float(self.gamma)
        if not np.isfinite(gamma) or gamma <= 0:
            raise InputError(f"gamma must be a positive finite number, got {self.gamma!r}")
        object.__setattr__(self, "gamma", gamma)

    def to_dict(self) -> dict:
        return {"family": self.family, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelConfig":
        try:
            return cls(family=d["family"], gamma=d["gamma"])
        except (KeyError, TypeError) as exc:
            raise InputError(f"invalid kernel config {d!r}") from exc


def _vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1 or x.size == 0:
        raise InputError(f"expected a non-empty vector, got shape {x.shape}")
    return x


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-d float array; a 1-d input is read as a single row."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise InputError(f"{name} must be 2-d, got shape {A.shape}")
    return A


def eval_kernel(cfg: KernelConfig, x, x_prime) -> float:
    x, x_prime = _vector(x), _vector(x_prime)
    if x.shape != x_prime.shape:
        raise InputError(f"dimension mismatch: {x.shape[0]} vs {x_prime.shape[0]}")
    diff = x - x_prime
    sq = float(diff @ diff)
    if cfg.family == "gaussian":
        return float(np.exp(-cfg.gamma * sq))
    return float(np.exp(-cfg.gamma * np.sqrt(sq)))


def sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared distances by norm expansion, clamped at zero."""
    aa = np.einsum("ij,ij->i", A, A)
    bb = np.einsum("ij,ij->i", B, B)
    D = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    return D


def gram(cfg: KernelConfig, A, B=None) -> np.ndarray:
    """Kernel matrix ``G[i, j] = k(A[i], B[j])``; ``B`` defaults to ``A``."""
    A = as_matrix(A, "A")
    B = A if B is None else as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if cfg.family == "gaussian":
        return np.exp(-cfg.gamma * sq_dists(A, B))
    # sqrt amplifies the expansion's cancellation error near zero; use exact differences
    return np.exp(-cfg.gamma * cdist(A, B))


def grad_z(cfg: KernelConfig, z, x) -> np.ndarray:
    """Gradient of ``k(z, x)`` with respect to ``z``."""
    z, x = _vector(z), _vector(x)
    if z.shape != x.shape:
        raise InputError(f"dimension mismatch: {z.shape[0]} vs {x.shape[0]}")
    diff = z - x
    if cfg.family == "gaussian":
        return -2.0 * cfg.gamma * diff * np.exp(-cfg.gamma * float(diff @ diff))
    r = float(np.sqrt(diff @ diff))
    if r == 0.0:
        raise SingularityError("laplacian kernel is not differentiable at z == x")
    return -cfg.gamma * diff / r * np.exp(-cfg.gamma * r)


def grad_gram(cfg: KernelConfig, Z: np.ndarray, X: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Row-wise weighted gradient sums.

    Returns ``out[m] = sum_n weights[n] * d/dz k(z, X[n]) at z = Z[m]``.
    For the laplacian kernel, pairs at zero distance contribute nothing
    (the kink has a zero subgradient there).
    """
    diff = Z[:, None, :] - X[None, :, :]
    if cfg.family == "gaussian":
        K = np.exp(-cfg.gamma * sq_dists(Z, X))
        coef = -2.0 * cfg.gamma * K * weights[None, :]
    else:
        r = cdist(Z, X)
        K = np.exp(-cfg.gamma * r)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(r > 0, -cfg.gamma * K / r, 0.0) * weights[None, :]
    return np.einsum("mn,mnd->md", coef, diff)


def expansion_value_and_grad(
    cfg: KernelConfig, X: np.ndarray, centers: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Value and gradient of ``f(x) = sum_j weights[j] k(centers[j], x)`` at each row of ``X``."""
    if cfg.family == "gaussian":
        K = np.exp(-cfg.gamma * sq_dists(X, centers))
        coef = -2.0 * cfg.gamma * K * weights
    else:
        r = cdist(X, centers)
        K = np.exp(-cfg.gamma * r)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(r > 0, -cfg.gamma * K / r, 0.0) * weights
    # sum_j coef_ij (x_i - c_j) without materialising the n x m x d differences
    grad = X * coef.sum(axis=1, keepdims=True) - coef @ centers
    return K @ weights, grad
