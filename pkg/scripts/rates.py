"""Empirical convergence rates: i.i.d. empirical KME error vs kernel herding error.

    python scripts/rates.py
"""

import numpy as np

from learnware.herding import herd_sample, herding_errors
from learnware.kernel import KernelConfig
from learnware.rkme import reduce, weighted_inner
from learnware.synth import ToyConfig, make_toy


def kme_rate(cfg, rng, Ns, reps=5):
    """Error of the empirical KME of N(0, I_2) samples, against the closed-form embedding."""
    g = cfg.gamma
    out = []
    for N in Ns:
        vals = []
        for _ in range(reps):
            X = rng.normal(size=(N, 2))
            w = np.full(N, 1 / N)
            cross = np.exp(-g * (X**2).sum(axis=1) / (1 + 2 * g)) / (1 + 2 * g)
            vals.append(weighted_inner(cfg, X, w, X, w) - 2 * cross.mean() + 1 / (1 + 4 * g))
        out.append(np.sqrt(max(np.mean(vals), 0.0)))
    return np.array(out)


def main():
    cfg = KernelConfig("gaussian", 1.0)
    rng = np.random.default_rng(0)
    Ns = np.array([50, 100, 200, 400, 800, 1600])
    errs = kme_rate(cfg, rng, Ns)
    print("empirical KME (RKHS norm error):")
    for N, e in zip(Ns, errs):
        print(f"  N={N:5d}  {e:.5f}")
    print(f"  log-log slope {np.polyfit(np.log(Ns), np.log(errs), 1)[0]:.3f}  (expected -0.5)\n")

    data, _ = make_toy(ToyConfig())
    spec = reduce(cfg, data[0].X, 5)
    Ts = np.array([10, 20, 40, 80, 160, 320])
    E = herding_errors(spec, herd_sample(spec, Ts[-1]))
    print("kernel herding (squared error to the RKME):")
    for T in Ts:
        print(f"  T={T:4d}  {E[T - 1]:.3e}")
    print(f"  log-log slope {np.polyfit(np.log(Ts), np.log(E[Ts - 1]), 1)[0]:.3f}  (expected about -1)")


if __name__ == "__main__":
    main()
