"""Reduced kernel mean embeddings as learnware specifications."""

from .data import Dataset, read_csv, write_csv
from .deploy import (
    MimicSample,
    MixtureWeights,
    deploy_instance_recurrent,
    deploy_task_recurrent,
    estimate_weights,
    generate_mimic,
    match_task_recurrent,
    train_selector,
)
from .herding import HerdState, herd_next, herd_sample
from .kernel import KernelConfig, eval_kernel, grad_z, gram
from .market import LearnwareEntry, Pool
from .models import ExternalModel, KernelRidgeModel, predict, train_krc, train_krr
from .rkme import Rkme, empirical_kme_inner, mmd_sq, reduce, rkme_eval, update_beta

__all__ = [
    "Dataset", "read_csv", "write_csv",
    "MimicSample", "MixtureWeights", "deploy_instance_recurrent", "deploy_task_recurrent",
    "estimate_weights", "generate_mimic", "match_task_recurrent", "train_selector",
    "HerdState", "herd_next", "herd_sample",
    "KernelConfig", "eval_kernel", "grad_z", "gram",
    "LearnwareEntry", "Pool",
    "ExternalModel", "KernelRidgeModel", "predict", "train_krc", "train_krr",
    "Rkme", "empirical_kme_inner", "mmd_sq", "reduce", "rkme_eval", "update_beta",
]
