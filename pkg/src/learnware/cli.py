"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
Results go to stdout, logs to stderr.  ``RKME_NUM_THREADS`` caps the number
of BLAS threads.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data as dio
from .deploy import deploy_instance_recurrent, deploy_task_recurrent, estimate_weights
from .errors import (
    ConflictError,
    InputError,
    IntegrityError,
    KernelMismatchError,
    LearnwareError,
    NotFoundError,
)
from .experiments import ToySettings, run_toy
from .herding import herd_sample
from .kernel import FAMILIES, KernelConfig
from .market import Pool
from .models import model_from_dict, train_krc, train_krr
from .rkme import Rkme, mmd_sq, reduce

logger = logging.getLogger("learnware")

EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 1, 2, 3
_DATA_ERRORS = (InputError, IntegrityError, KernelMismatchError, NotFoundError, ConflictError, FileNotFoundError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def g6(x: float) -> float:
    return float(f"{x:.6g}")


def _emit(obj) -> None:
    print(json.dumps(obj))


def _kernel(args) -> KernelConfig:
    return KernelConfig(args.kernel, args.gamma)


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON from {path}: {exc}") from exc


def _embedding(path):
    """A CSV path is read as a point set, anything else as an RKME document."""
    if str(path).endswith(".csv"):
        return dio.read_csv(path)
    return Rkme.from_dict(_read_json(path))


# commands -------------------------------------------------------------------
def cmd_spec_build(args) -> None:
    data = dio.read_csv(args.data)
    spec = reduce(_kernel(args), data.X, args.size, T=args.iters, eta=args.eta, seed=args.seed)
    Path(args.out).write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")
    _emit({"objective": g6(spec.meta["objective"]), "size": spec.size, "iterations": len(spec.meta["history"]) - 1})


def cmd_pool_add(args) -> None:
    kernel = _kernel(args) if args.gamma is not None else None
    pool = Pool.open_or_create(args.pool, kernel)
    data = dio.read_csv(args.data)
    if args.model:
        model = model_from_dict(_read_json(args.model))
    else:
        if data.y is None:
            raise InputError("--data has no label column; pass --model or add labels")
        model_kernel = KernelConfig(args.kernel, args.model_gamma)
        train = train_krc if np.issubdtype(data.y.dtype, np.integer) else train_krr
        model = train(model_kernel, data, ridge=args.ridge, n_centers=args.centers, seed=args.seed)
    entry = pool.upload(
        data,
        model,
        args.size,
        {"provider": args.provider, "task": args.task},
        entry_id=args.id,
        T=args.iters,
        seed=args.seed,
    )
    _emit({"id": entry.id, "objective": g6(entry.spec.meta["objective"]), "entries": len(pool)})


def cmd_pool_list(args) -> None:
    _emit(Pool.load(args.pool).list())


def cmd_pool_show(args) -> None:
    entry = Pool.load(args.pool).get(args.id)
    _emit(
        {
            "id": entry.id,
            "meta": entry.meta,
            "spec": entry.spec.to_dict(),
            "model": {"kind": entry.model.kind, "dim": entry.model.dim, "output": entry.model.output},
        }
    )


def _prediction_csv(dep) -> str:
    lines = ["index,prediction,chosen_model"]
    for n, (y, c) in enumerate(zip(dep.predictions, dep.chosen)):
        y = int(y) if np.issubdtype(np.asarray(y).dtype, np.integer) else f"{float(y):.6g}"
        lines.append(f"{n},{y},{int(c)}")
    return "\n".join(lines) + "\n"


def cmd_deploy(args) -> None:
    pool = Pool.load(args.pool)
    test = dio.read_csv(args.test)
    if args.mode == "task":
        dep = deploy_task_recurrent(pool, test)
    else:
        dep = deploy_instance_recurrent(pool, test, mimic_size=args.mimic_size, seed=args.seed)
    diag = dep.diagnostics()
    if args.diag:
        Path(args.diag).write_text(json.dumps(diag, indent=2) + "\n", encoding="utf-8")
    csv_text = _prediction_csv(dep)
    if args.out in (None, "-"):
        sys.stdout.write(csv_text)
    else:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        _emit({"n": len(dep.predictions), "models_used": sorted({int(c) for c in dep.chosen})})


def cmd_herd(args) -> None:
    spec = Rkme.from_dict(_read_json(args.spec))
    pts = herd_sample(spec, args.n, restarts=args.restarts, steps=args.steps, seed=args.seed)
    text = dio.format_csv(dio.Dataset(pts))
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")


def cmd_weights(args) -> None:
    w = estimate_weights(Pool.load(args.pool), dio.read_csv(args.test), projection=args.projection)
    if args.diag:
        Path(args.diag).write_text(json.dumps(w.to_dict(), indent=2) + "\n", encoding="utf-8")
    _emit([g6(v) for v in w.w])


def cmd_mmd(args) -> None:
    a, b = _embedding(args.a), _embedding(args.b)
    kernel = _kernel(args) if args.gamma is not None else None
    _emit(g6(mmd_sq(a, b, kernel)))


def cmd_demo_toy(args) -> None:
    settings = ToySettings(n_test=args.n_test, mimic_size=args.mimic_size)
    result = run_toy(args.seed, settings, root=args.pool)
    out = result.to_dict()
    for section in ("task_recurrent", "instance_recurrent"):
        for k, v in out[section].items():
            if isinstance(v, float):
                out[section][k] = g6(v)
            elif isinstance(v, list) and v and isinstance(v[0], float):
                out[section][k] = [g6(x) for x in v]
    out["local_accuracy"] = [g6(x) for x in out["local_accuracy"]]
    _emit(out)


# parser ---------------------------------------------------------------------
def _kernel_flags(p, required_gamma: bool = False, default_gamma: float | None = 1.0) -> None:
    p.add_argument("--kernel", choices=FAMILIES, default="gaussian")
    p.add_argument("--gamma", type=float, required=required_gamma, default=None if required_gamma else default_gamma)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="learnware", description="Reduced-KME learnware specifications and model reuse.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    spec = sub.add_parser("spec", help="build RKME specifications").add_subparsers(dest="action", required=True)
    p = spec.add_parser("build", help="reduced KME of a CSV dataset")
    p.add_argument("--data", required=True)
    _kernel_flags(p, required_gamma=True)
    p.add_argument("--size", type=int, required=True, help="reduced set size M")
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spec_build)

    pool = sub.add_parser("pool", help="manage a learnware pool").add_subparsers(dest="action", required=True)
    p = pool.add_parser("add", help="upload a dataset's spec and model")
    p.add_argument("--pool", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--size", type=int, default=5)
    p.add_argument("--model", help="model JSON; default trains a kernel ridge model on the labels")
    p.add_argument("--id")
    _kernel_flags(p, default_gamma=None)
    p.add_argument("--model-gamma", type=float, default=2.0)
    p.add_argument("--ridge", type=float, default=1e-3)
    p.add_argument("--centers", type=int, default=50, help="model expansion centres (k-means)")
    p.add_argument("--provider", default="")
    p.add_argument("--task", default="")
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pool_add)
    p = pool.add_parser("list")
    p.add_argument("--pool", required=True)
    p.set_defaults(func=cmd_pool_list)
    p = pool.add_parser("show")
    p.add_argument("--pool", required=True)
    p.add_argument("--id", required=True)
    p.set_defaults(func=cmd_pool_show)

    p = sub.add_parser("deploy", help="predict a test set with pooled models")
    p.add_argument("mode", choices=("task", "instance"))
    p.add_argument("--pool", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--mimic-size", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--diag")
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("herd", help="kernel herding from an RKME")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_herd)

    p = sub.add_parser("weights", help="mixture weights of a test set over the pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--projection", choices=("clip", "euclidean"), default="clip")
    p.add_argument("--diag")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("mmd", help="squared MMD between two specs and/or CSV datasets")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    _kernel_flags(p, default_gamma=None)
    p.set_defaults(func=cmd_mmd)

    demo = sub.add_parser("demo", help="reproducible experiments").add_subparsers(dest="action", required=True)
    p = demo.add_parser("toy", help="three providers on a circle, both deployment modes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--mimic-size", type=int)
    p.add_argument("--pool", help="keep the generated pool in this directory")
    p.set_defaults(func=cmd_demo_toy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    threads = os.environ.get("RKME_NUM_THREADS")
    try:
        if threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=int(threads)):
                args.func(args)
        else:
            args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (LearnwareError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
