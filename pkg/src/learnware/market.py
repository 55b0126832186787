"""On-disk learnware pool.

Layout::

    <root>/manifest.json           {"kernel": {...}, "entries": [{"id", "hash"}, ...]}
    <root>/<id>/spec.json          RKME document
    <root>/<id>/model.json         model document
    <root>/<id>/meta.json          provider, task, created

``hash`` is the SHA-256 of the three entry files concatenated in that order.
All specifications in a pool share the pool's kernel, so their embeddings
live in one RKHS and can be compared and mixed.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from filelock import FileLock

from .data import Dataset, rows_present
from .errors import ConflictError, InaccessibilityError, InputError, IntegrityError, NotFoundError
from .kernel import KernelConfig
from .models import Model, model_from_dict
from .rkme import Rkme, reduce

MANIFEST = "manifest.json"
ENTRY_FILES = ("spec.json", "model.json", "meta.json")
_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]{0,127}$")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


@dataclass
class LearnwareEntry:
    id: str
    spec: Rkme
    model: Model
    meta: dict = field(default_factory=dict)


def check_inaccessible(entry: LearnwareEntry, raw: np.ndarray) -> None:
    """Raise if the spec or a built-in model stores a row of ``raw``.

    A smoke check against (near-)verbatim copies only; it is not a privacy guarantee.
    """
    if rows_present(entry.spec.Z, raw):
        raise InaccessibilityError(f"entry {entry.id!r}: reduced set contains a raw training row")
    for arr in entry.model.stored_arrays():
        if rows_present(arr, raw):
            raise InaccessibilityError(
                f"entry {entry.id!r}: model parameters contain raw training rows "
                "(train built-in models with n_centers to publish them)"
            )


class Pool:
    """A directory of (model, RKME) pairs; entries kept in insertion order."""

    def __init__(self, root, kernel: KernelConfig, ids: list[str] | None = None, hashes: dict | None = None):
        self.root = Path(root)
        self.kernel = kernel
        self._ids = list(ids or [])
        self._hashes = dict(hashes or {})
        self._cache: dict[str, LearnwareEntry] = {}

    # construction -----------------------------------------------------------
    @classmethod
    def create(cls, root, kernel: KernelConfig = KernelConfig()) -> "Pool":
        root = Path(root)
        if (root / MANIFEST).exists():
            raise ConflictError(f"a pool already exists at {root}")
        root.mkdir(parents=True, exist_ok=True)
        pool = cls(root, kernel)
        pool._write_manifest()
        return pool

    @classmethod
    def open_or_create(cls, root, kernel: KernelConfig | None = None) -> "Pool":
        if (Path(root) / MANIFEST).exists():
            pool = cls.load(root)
            if kernel is not None and kernel != pool.kernel:
                raise InputError(f"pool kernel is {pool.kernel}, requested {kernel}")
            return pool
        return cls.create(root, kernel or KernelConfig())

    @classmethod
    def load(cls, root) -> "Pool":
        root = Path(root)
        try:
            manifest = json.loads((root / MANIFEST).read_text(encoding="utf-8"))
            kernel = KernelConfig.from_dict(manifest["kernel"])
            items = manifest["entries"]
            ids = [e["id"] for e in items]
            hashes = {e["id"]: e["hash"] for e in items}
        except FileNotFoundError as exc:
            raise IntegrityError(f"no pool manifest at {root / MANIFEST}") from exc
        except (json.JSONDecodeError, KeyError, TypeError, InputError) as exc:
            raise IntegrityError(f"corrupt manifest {root / MANIFEST}: {exc}") from exc
        if len(set(ids)) != len(ids):
            raise IntegrityError("manifest lists duplicate entry ids")
        pool = cls(root, kernel, ids, hashes)
        for entry_id in ids:
            pool._verify(entry_id)
        return pool

    # persistence ------------------------------------------------------------
    def manifest(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "entries": [{"id": i, "hash": self._hashes[i]} for i in self._ids],
        }

    def _write_manifest(self) -> None:
        path = self.root / MANIFEST
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(_dumps(self.manifest()), encoding="utf-8")
        tmp.replace(path)

    def save(self) -> None:
        self._write_manifest()

    def _entry_hash(self, entry_id: str) -> str:
        h = hashlib.sha256()
        for name in ENTRY_FILES:
            h.update((self.root / entry_id / name).read_bytes())
        return h.hexdigest()

    def _verify(self, entry_id: str) -> None:
        try:
            actual = self._entry_hash(entry_id)
        except OSError as exc:
            raise IntegrityError(f"entry {entry_id!r}: missing files ({exc})") from exc
        if actual != self._hashes[entry_id]:
            raise IntegrityError(f"entry {entry_id!r}: content hash does not match the manifest")

    # queries ----------------------------------------------------------------
    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    @property
    def entries(self) -> list[LearnwareEntry]:
        return [self.get(i) for i in self._ids]

    def list(self) -> list[dict]:
        """Entry metadata in insertion order; model blobs are not read."""
        out = []
        for entry_id in self._ids:
            try:
                meta = json.loads((self.root / entry_id / "meta.json").read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise IntegrityError(f"entry {entry_id!r}: unreadable meta.json ({exc})") from exc
            out.append({"id": entry_id, **meta})
        return out

    def get(self, entry_id: str) -> LearnwareEntry:
        if entry_id not in self._hashes:
            raise NotFoundError(f"no entry {entry_id!r} in pool {self.root}")
        if entry_id not in self._cache:
            self._verify(entry_id)
            d = self.root / entry_id
            try:
                spec = Rkme.from_dict(json.loads((d / "spec.json").read_text(encoding="utf-8")))
                model = model_from_dict(json.loads((d / "model.json").read_text(encoding="utf-8")))
                meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError, InputError) as exc:
                raise IntegrityError(f"entry {entry_id!r}: {exc}") from exc
            if spec.kernel != self.kernel:
                raise IntegrityError(f"entry {entry_id!r}: kernel {spec.kernel} differs from pool kernel")
            self._cache[entry_id] = LearnwareEntry(entry_id, spec, model, meta)
        return self._cache[entry_id]

    # upload -----------------------------------------------------------------
    def add(self, entry: LearnwareEntry, raw: np.ndarray | None = None) -> LearnwareEntry:
        """Store a prepared entry; ``raw`` enables the inaccessibility check."""
        if not _ID.match(entry.id):
            raise InputError(f"invalid entry id {entry.id!r}")
        if entry.spec.kernel != self.kernel:
            raise InputError(f"spec kernel {entry.spec.kernel} differs from pool kernel {self.kernel}")
        if entry.spec.dim != entry.model.dim:
            raise InputError(f"spec dimension {entry.spec.dim} != model dimension {entry.model.dim}")
        if raw is not None:
            check_inaccessible(entry, raw)
        with FileLock(str(self.root / ".lock")):
            if entry.id in self._hashes or (self.root / entry.id).exists():
                raise ConflictError(f"entry {entry.id!r} already exists")
            d = self.root / entry.id
            d.mkdir()
            (d / "spec.json").write_text(_dumps(entry.spec.to_dict()), encoding="utf-8")
            (d / "model.json").write_text(_dumps(entry.model.to_dict()), encoding="utf-8")
            (d / "meta.json").write_text(_dumps(entry.meta), encoding="utf-8")
            self._ids.append(entry.id)
            self._hashes[entry.id] = self._entry_hash(entry.id)
            self._write_manifest()
        self._cache.pop(entry.id, None)
        return entry

    def upload(
        self,
        data: Dataset,
        model: Model,
        M: int,
        meta: dict | None = None,
        entry_id: str | None = None,
        **reduce_opts,
    ) -> LearnwareEntry:
        """Upload phase: summarise ``data`` by a reduced KME and store it with ``model``.

        Only the specification, model and metadata are written; ``data``
        itself never reaches the pool.
        """
        if data.dim != model.dim:
            raise InputError(f"data dimension {data.dim} != model dimension {model.dim}")
        entry_id = entry_id or f"lw{len(self._ids):04d}"
        if entry_id in self._hashes:
            raise ConflictError(f"entry {entry_id!r} already exists")
        spec = reduce(self.kernel, data.X, M, **reduce_opts)
        meta = {
            "provider": "",
            "task": "",
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            **(meta or {}),
        }
        return self.add(LearnwareEntry(entry_id, spec, model, meta), raw=data.X)


def load(root) -> Pool:
    return Pool.load(root)
