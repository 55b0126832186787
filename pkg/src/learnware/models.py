"""Pre-trained model abstraction and built-in kernel ridge models.

Built-in models expand over a set of centres ``C``:
``scores(x) = k(x, C) @ alpha``.  By default the centres are the training
points (exact kernel ridge).  With ``n_centers`` the centres are k-means
centroids instead, fitted by subset-of-regressors least squares; such models
never store a raw training row and can be published to a pool.

Serialized form (``ModelRef`` JSON)::

    {"kind": ..., "dim": d, "output": "class_index" | "real", "params": <base64>}

``params`` is an ``.npz`` archive for built-ins and a UTF-8 JSON document
``{"command": [...]}`` for external models.  External models speak
line-delimited JSON over stdin/stdout: request ``{"X": [[...], ...]}``,
response ``{"y": [...]}``.
"""

from __future__ import annotations

import base64
import io
import json
import subprocess
import threading
import warnings

import numpy as np
import scipy.linalg
from sklearn.cluster import KMeans

from .data import Dataset, rows_present
from .errors import InputError, ModelRuntimeError
from .kernel import KernelConfig, as_matrix, gram

KINDS = ("kernel_ridge_classifier", "kernel_ridge_regressor", "external")
DEFAULT_RIDGE = 1e-3


class Model:
    kind: str
    dim: int
    output: str

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def _check(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape[1] != self.dim:
            raise InputError(f"model expects d={self.dim}, got d={X.shape[1]}")
        return X

    def params_blob(self) -> bytes:
        raise NotImplementedError

    def stored_arrays(self) -> list[np.ndarray]:
        """Point arrays embedded in the serialized parameters."""
        return []

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "output": self.output,
            "params": base64.b64encode(self.params_blob()).decode("ascii"),
        }


def _npz(**arrays) -> bytes:
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    return buf.getvalue()


class KernelRidgeModel(Model):
    """Kernel expansion ``k(x, centers) @ alpha`` with a classification or regression head."""

    def __init__(self, kernel: KernelConfig, centers, alpha, classes=None, constant=None):
        self.kernel = kernel
        self.centers = as_matrix(centers, "centers")
        self.alpha = np.asarray(alpha, dtype=float)
        self.classes = None if classes is None else np.asarray(classes)
        self.constant = constant
        self.dim = self.centers.shape[1]
        if self.classes is not None:
            self.kind, self.output = "kernel_ridge_classifier", "class_index"
        else:
            self.kind, self.output = "kernel_ridge_regressor", "real"

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        return gram(self.kernel, X, self.centers) @ self.alpha

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        if self.constant is not None:
            return np.full(X.shape[0], self.constant, dtype=np.asarray(self.constant).dtype)
        scores = self.decision_function(X)
        if self.classes is None:
            return scores
        # np.argmax breaks ties towards the lowest class index
        return self.classes[np.argmax(scores, axis=1)]

    def stored_arrays(self) -> list[np.ndarray]:
        return [self.centers]

    def params_blob(self) -> bytes:
        arrays = {
            "family": np.array(self.kernel.family),
            "gamma": np.array(self.kernel.gamma),
            "centers": self.centers,
            "alpha": self.alpha,
        }
        if self.classes is not None:
            arrays["classes"] = self.classes
        if self.constant is not None:
            arrays["constant"] = np.array(self.constant)
        return _npz(**arrays)

    @classmethod
    def from_blob(cls, blob: bytes) -> "KernelRidgeModel":
        with np.load(io.BytesIO(blob), allow_pickle=False) as z:
            kernel = KernelConfig(str(z["family"]), float(z["gamma"]))
            classes = z["classes"] if "classes" in z.files else None
            constant = z["constant"][()] if "constant" in z.files else None
            return cls(kernel, z["centers"], z["alpha"], classes=classes, constant=constant)


def _reduced_centers(X: np.ndarray, n_centers: int, seed: int) -> np.ndarray:
    n_centers = min(n_centers, X.shape[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        km = KMeans(n_clusters=n_centers, init="k-means++", n_init=1, max_iter=100, random_state=seed).fit(X)
    C = np.asarray(km.cluster_centers_, dtype=float)
    # a cluster of identical rows has that row as its centroid; publishing it would leak the row
    degenerate = np.array([np.ptp(X[km.labels_ == j], axis=0).max() == 0 for j in range(C.shape[0])])
    C = C[~degenerate]
    if C.shape[0] == 0 or rows_present(C, X):
        raise InputError("k-means centres reproduce training rows; use exact centres instead")
    return np.unique(C, axis=0)


def _fit(kernel, X, Y, ridge, n_centers, seed):
    if n_centers is None:
        G = gram(kernel, X)
        G[np.diag_indices_from(G)] += ridge
        return X, scipy.linalg.solve(G, Y, assume_a="pos")
    C = _reduced_centers(X, n_centers, seed)
    Kxc = gram(kernel, X, C)
    A = Kxc.T @ Kxc + ridge * gram(kernel, C)
    A[np.diag_indices_from(A)] += 1e-10
    return C, scipy.linalg.solve(A, Kxc.T @ Y, assume_a="pos")


def train_krc(
    cfg: KernelConfig,
    data: Dataset,
    ridge: float = DEFAULT_RIDGE,
    n_centers: int | None = None,
    seed: int = 0,
) -> KernelRidgeModel:
    """One-vs-rest kernel ridge classifier (targets +1 / -1)."""
    if data.y is None:
        raise InputError("classifier training needs labels")
    if not ridge > 0:
        raise InputError(f"ridge must be positive, got {ridge}")
    classes = np.unique(data.y)
    if classes.size == 1:
        return KernelRidgeModel(cfg, data.X[:0], np.zeros((0, 1)), classes=classes, constant=classes[0])
    Y = np.where(data.y[:, None] == classes[None, :], 1.0, -1.0)
    centers, alpha = _fit(cfg, data.X, Y, ridge, n_centers, seed)
    return KernelRidgeModel(cfg, centers, alpha, classes=classes)


def train_krr(
    cfg: KernelConfig,
    data: Dataset,
    ridge: float = DEFAULT_RIDGE,
    n_centers: int | None = None,
    seed: int = 0,
) -> KernelRidgeModel:
    """Kernel ridge regression; with exact centres, ``(G + ridge I) alpha = y``."""
    if data.y is None:
        raise InputError("regression training needs labels")
    if not ridge > 0:
        raise InputError(f"ridge must be positive, got {ridge}")
    y = np.asarray(data.y, dtype=float)
    if np.all(y == y[0]):
        return KernelRidgeModel(cfg, data.X[:0], np.zeros(0), constant=float(y[0]))
    centers, alpha = _fit(cfg, data.X, y, ridge, n_centers, seed)
    return KernelRidgeModel(cfg, centers, alpha)


class ExternalModel(Model):
    """A model living in a subprocess; one request in flight per handle."""

    kind = "external"

    def __init__(self, command: list[str], dim: int, output: str = "class_index", timeout: float = 60.0):
        if output not in ("class_index", "real"):
            raise InputError(f"unknown output type {output!r}")
        self.command = list(command)
        self.dim = int(dim)
        self.output = output
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _start(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                )
            except OSError as exc:
                raise ModelRuntimeError(f"cannot start external model {self.command!r}: {exc}") from exc
        return self._proc

    def _fail(self, message: str) -> ModelRuntimeError:
        proc, self._proc = self._proc, None
        stderr = ""
        if proc is not None:
            proc.kill()
            try:
                _, stderr = proc.communicate(timeout=5)
            except (subprocess.TimeoutExpired, ValueError, OSError):
                pass
        return ModelRuntimeError(message, stderr=stderr or "")

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        with self._lock:
            proc = self._start()
            try:
                proc.stdin.write(json.dumps({"X": X.tolist()}) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise self._fail(f"external model pipe error: {exc}") from exc
            if not line:
                raise self._fail(f"external model exited (code {proc.poll()}) without a response")
            try:
                y = json.loads(line)["y"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise self._fail(f"malformed external model response {line[:200]!r}") from exc
        y = np.asarray(y, dtype=int if self.output == "class_index" else float)
        if y.shape != (X.shape[0],):
            raise ModelRuntimeError(f"external model returned {y.shape} predictions for {X.shape[0]} rows")
        return y

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is not None and proc.poll() is None:
            proc.stdin.close()
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def params_blob(self) -> bytes:
        return json.dumps({"command": self.command}).encode("utf-8")


def predict(model: Model, X) -> np.ndarray:
    return model.predict(X)


def model_from_dict(d: dict) -> Model:
    try:
        kind, dim, output = d["kind"], int(d["dim"]), d["output"]
        blob = base64.b64decode(d["params"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid model document: {exc}") from exc
    if kind == "external":
        return ExternalModel(json.loads(blob.decode("utf-8"))["command"], dim, output)
    if kind not in KINDS:
        raise InputError(f"unknown model kind {kind!r}")
    model = KernelRidgeModel.from_blob(blob)
    if model.kind != kind or model.dim != dim:
        raise InputError(f"model header ({kind}, d={dim}) disagrees with parameters")
    return model
