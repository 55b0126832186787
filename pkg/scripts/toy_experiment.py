"""Run the three-provider toy experiment over several seeds and tabulate results.

    python scripts/toy_experiment.py --seeds 10
"""

import argparse
import time

import numpy as np

from learnware.experiments import ToySettings, run_toy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--n-test", type=int, default=500)
    ap.add_argument("--mimic-size", type=int)
    args = ap.parse_args()

    settings = ToySettings(n_test=args.n_test, mimic_size=args.mimic_size)
    print(f"{'seed':>4} {'prov':>4} {'sel':>3} {'task acc':>8} {'inst acc':>8}  w_hat                  mimic counts  time")
    results = []
    for seed in range(args.seeds):
        t0 = time.perf_counter()
        r = run_toy(seed, settings)
        results.append(r)
        w = " ".join(f"{v:.3f}" for v in r.w_hat)
        print(
            f"{seed:>4} {r.task_provider:>4} {r.task_selected:>3} {r.task_accuracy:>8.3f} {r.instance_accuracy:>8.3f}"
            f"  ({w})  {r.mimic_counts.tolist()!s:<13} {time.perf_counter() - t0:.2f}s"
        )
    w_med = np.median([r.w_hat for r in results], axis=0)
    print(
        f"\ncorrect selections {sum(r.task_correct for r in results)}/{len(results)}; "
        f"median task acc {np.median([r.task_accuracy for r in results]):.3f}; "
        f"median instance acc {np.median([r.instance_accuracy for r in results]):.3f}; "
        f"median w_hat {np.round(w_med, 3).tolist()}"
    )


if __name__ == "__main__":
    main()
