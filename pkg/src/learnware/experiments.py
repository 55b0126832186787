"""End-to-end toy experiment: three providers upload, a user deploys."""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .deploy import deploy_instance_recurrent, deploy_task_recurrent
from .kernel import KernelConfig
from .market import Pool
from .models import train_krc
from .synth import ToyConfig, make_test, make_toy


@dataclass
class ToySettings:
    spec_kernel: KernelConfig = KernelConfig("gaussian", 1.0)
    model_kernel: KernelConfig = KernelConfig("gaussian", 2.0)
    M: int = 5
    model_centers: int = 50
    n_test: int = 500
    mixture: tuple = (0.7, 0.3, 0.0)
    mimic_size: int | None = None
    toy: ToyConfig = field(default_factory=ToyConfig)


@dataclass
class ToyResult:
    seed: int
    task_provider: int
    task_selected: int
    task_accuracy: float
    per_entry_mmd: list
    instance_accuracy: float
    w_hat: np.ndarray
    raw_w: np.ndarray
    mimic_counts: np.ndarray
    local_accuracy: list

    @property
    def task_correct(self) -> bool:
        return self.task_selected == self.task_provider

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "task_recurrent": {
                "provider": self.task_provider,
                "selected": self.task_selected,
                "accuracy": self.task_accuracy,
                "per_entry_mmd": list(self.per_entry_mmd),
            },
            "instance_recurrent": {
                "accuracy": self.instance_accuracy,
                "w_hat": self.w_hat.tolist(),
                "raw_w": self.raw_w.tolist(),
                "mimic_counts": self.mimic_counts.tolist(),
            },
            "local_accuracy": list(self.local_accuracy),
        }


def build_toy_pool(root, seed: int, settings: ToySettings = ToySettings()) -> tuple[Pool, list]:
    """Generate the providers' data, train their models and upload them."""
    toy = ToyConfig(**{**settings.toy.__dict__, "seed": seed})
    datasets, _ = make_toy(toy)
    pool = Pool.create(root, settings.spec_kernel)
    for i, data in enumerate(datasets):
        model = train_krc(settings.model_kernel, data, n_centers=settings.model_centers, seed=seed)
        pool.upload(data, model, settings.M, {"provider": toy.name(i), "task": "toy"}, entry_id=toy.name(i), seed=seed)
    return pool, datasets


def run_toy(seed: int = 0, settings: ToySettings = ToySettings(), root=None) -> ToyResult:
    """One seeded run of both deployment modes on fresh toy providers.

    The task-recurrent test set comes from provider ``seed % n_providers``;
    the instance-recurrent one from ``settings.mixture``.
    """
    toy = ToyConfig(**{**settings.toy.__dict__, "seed": seed})
    with tempfile.TemporaryDirectory() as tmp:
        pool, _ = build_toy_pool(Path(root or tmp) / "pool", seed, settings)
        entries = pool.entries

        local = []
        for i, e in enumerate(entries):
            held_out = make_test(toy, settings.n_test, seed + 7919 * (i + 1), provider=i)
            local.append(float(np.mean(e.model.predict(held_out.X) == held_out.y)))

        j = seed % toy.n_providers
        task_test = make_test(toy, settings.n_test, seed + 1000, provider=j)
        task = deploy_task_recurrent(entries, task_test)

        inst_test = make_test(toy, settings.n_test, seed + 2000, weights=settings.mixture)
        inst = deploy_instance_recurrent(entries, inst_test, mimic_size=settings.mimic_size, seed=seed)

    return ToyResult(
        seed=seed,
        task_provider=j,
        task_selected=int(task.chosen[0]),
        task_accuracy=float(np.mean(task.predictions == task_test.y)),
        per_entry_mmd=task.per_entry_mmd,
        instance_accuracy=float(np.mean(inst.predictions == inst_test.y)),
        w_hat=inst.weights.w,
        raw_w=inst.weights.raw_w,
        mimic_counts=np.bincount(inst.mimic.provider, minlength=toy.n_providers),
        local_accuracy=local,
    )
