"""Exit criteria for the package, one test per criterion.

Run ``pytest tests/test_acceptance.py`` to see a PASS/FAIL line per criterion
in the terminal summary.
"""

import base64
import io
import json
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from learnware.deploy import estimate_weights
from learnware.experiments import ToySettings, build_toy_pool, run_toy
from learnware.herding import herd_sample, herding_errors
from learnware.kernel import KernelConfig, grad_z
from learnware.rkme import Rkme, mmd_sq, reduce, weighted_inner
from learnware.synth import ToyConfig, make_test, make_toy

SEEDS = range(10)
PAPER_W_HAT = np.array([0.701, 0.285, 0.014])
CFG = KernelConfig("gaussian", 1.0)


@pytest.fixture(scope="module")
def toy_runs():
    runs, times = [], []
    for seed in SEEDS:
        t0 = time.perf_counter()
        runs.append(run_toy(seed))
        times.append(time.perf_counter() - t0)
    return runs, times


def test_c1_task_recurrent_toy(toy_runs, report):
    runs, times = toy_runs
    correct = sum(r.task_correct for r in runs)
    accs = np.array([r.task_accuracy for r in runs])
    ok = correct >= 9 and accs.min() >= 0.95 and max(times) < 30
    report(1, ok, f"correct provider {correct}/10, accuracy min {accs.min():.3f} median {np.median(accs):.3f}, slowest run {max(times):.1f}s")
    assert correct >= 9
    assert accs.min() >= 0.95
    assert max(times) < 30


def test_c2_instance_recurrent_toy(toy_runs, report):
    runs, times = toy_runs
    acc = float(np.median([r.instance_accuracy for r in runs]))
    w_med = np.median([r.w_hat for r in runs], axis=0)
    dev = np.abs(w_med - PAPER_W_HAT)
    ok = acc >= 0.88 and np.all(dev <= 0.05) and max(times) < 60
    report(2, ok, f"median accuracy {acc:.3f}, median w_hat {np.round(w_med, 3).tolist()}, max |dev| {dev.max():.3f}")
    assert acc >= 0.88
    assert np.all(dev <= 0.05)
    assert max(times) < 60


def test_c3_reduce_monotone(report):
    r = np.random.default_rng(2024)
    failures = 0
    for _ in range(50):
        N, d = int(r.integers(10, 301)), int(r.integers(1, 6))
        M = int(r.integers(1, min(10, N) + 1))
        X = r.normal(size=(N, d)) * r.uniform(0.2, 3.0) + r.normal(size=d)
        gamma = float(r.uniform(0.1, 2.0))
        h = np.array(reduce(KernelConfig("gaussian", gamma), X, M, seed=int(r.integers(1000))).meta["history"])
        failures += int(np.any(np.diff(h) > 1e-12))
    report(3, failures == 0, f"{50 - failures}/50 runs non-increasing")
    assert failures == 0


def test_c4_mmd_oracle(report):
    r = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        n, m, d = int(r.integers(1, 21)), int(r.integers(1, 21)), int(r.integers(1, 5))
        family = str(r.choice(["gaussian", "laplacian"]))
        gamma = float(r.uniform(0.1, 3.0))
        X, Z, beta = r.normal(size=(n, d)), r.normal(size=(m, d)), r.normal(size=m)
        got = mmd_sq(X, Rkme(KernelConfig(family, gamma), beta, Z))
        expected = max(oracles.mmd_sq(family, gamma, X, oracles.uniform(n), Z, beta), 0.0)
        worst = max(worst, abs(got - expected))
    report(4, worst <= 1e-10, f"max |mmd - loop oracle| = {worst:.2e} over 200 instances")
    assert worst <= 1e-10


def test_c5_empirical_kme_rate(report):
    r = np.random.default_rng(5)
    ref = r.normal(size=(50_000, 2))
    u = np.full(len(ref), 1 / len(ref))
    ref_sq = weighted_inner(CFG, ref, u, ref, u)
    Ns = [50, 100, 200, 400, 800, 1600]
    errs = []
    for N in Ns:
        vals = []
        for _ in range(5):
            X = r.normal(size=(N, 2))
            w = np.full(N, 1 / N)
            vals.append(weighted_inner(CFG, X, w, X, w) + ref_sq - 2 * weighted_inner(CFG, X, w, ref, u))
        errs.append(np.sqrt(max(np.mean(vals), 0.0)))
    slope = float(np.polyfit(np.log(Ns), np.log(errs), 1)[0])
    ok = abs(slope + 0.5) <= 0.15
    report(5, ok, f"log-log slope {slope:.3f} (target -0.5 +/- 0.15)")
    assert ok


def test_c6_herding_rate(report):
    toy = ToyConfig()
    datasets, _ = make_toy(toy)
    spec = reduce(CFG, datasets[0].X, 5)
    E = herding_errors(spec, herd_sample(spec, 320))
    Ts = np.array([10, 20, 40, 80, 160, 320])
    slope = float(np.polyfit(np.log(Ts), np.log(E[Ts - 1]), 1)[0])

    wins = 0
    for seed in SEEDS:
        data, _ = make_toy(ToyConfig(seed=seed))
        s = reduce(CFG, data[0].X, 5, seed=seed)
        herded = mmd_sq(herd_sample(s, 200, seed=seed), s)
        iid = mmd_sq(make_test(ToyConfig(seed=seed), 200, 10_000 + seed, provider=0).X, s)
        wins += int(herded < iid)
    ok = slope < -0.7 and wins >= 8
    report(6, ok, f"E_T slope {slope:.3f} (< -0.7), herded beats i.i.d. in {wins}/10 seeds")
    assert slope < -0.7
    assert wins >= 8


def test_c7_weight_self_recovery(toy_pool, report):
    pool, _ = toy_pool
    entries = pool.entries
    w_own = []
    for j, e in enumerate(entries):
        w_own.append(float(estimate_weights(entries, herd_sample(e.spec, 500, seed=j)).w[j]))
    ok = min(w_own) >= 0.9
    report(7, ok, f"w_j on own herded data: {np.round(w_own, 3).tolist()}")
    assert ok


def test_c8_gradient_finite_differences(report):
    r = np.random.default_rng(8)
    worst = 0.0
    for i in range(100):
        family = "gaussian" if i % 2 == 0 else "laplacian"
        gamma = float(r.uniform(0.2, 2.0))
        z, x = r.normal(size=3), r.normal(size=3)
        fd = np.array(oracles.central_diff(lambda zz: oracles.k(family, gamma, zz, x), list(z)))
        g = grad_z(KernelConfig(family, gamma), z, x)
        worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(fd)))
    report(8, worst <= 1e-4, f"max relative error {worst:.2e} over 100 pairs")
    assert worst <= 1e-4


def _numeric_rows(obj, out):
    if isinstance(obj, list) and obj and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
        out.append(np.array(obj, dtype=float))
    elif isinstance(obj, list):
        for v in obj:
            _numeric_rows(v, out)
    elif isinstance(obj, dict):
        for v in obj.values():
            _numeric_rows(v, out)


def _stored_rows(path: Path) -> list:
    doc = json.loads(path.read_text())
    rows = []
    _numeric_rows(doc, rows)
    if path.name == "model.json":
        with np.load(io.BytesIO(base64.b64decode(doc["params"])), allow_pickle=False) as z:
            for name in z.files:
                arr = np.atleast_2d(z[name]) if z[name].dtype.kind == "f" else None
                if arr is not None:
                    rows.extend(arr)
    return rows


def test_c9_inaccessibility(tmp_path, report):
    # the upload-time assertion runs inside build_toy_pool; reaching the scan means it passed
    pool, datasets = build_toy_pool(tmp_path / "pool", seed=0, settings=ToySettings())
    raw = np.vstack([d.X for d in datasets])
    raw_rows = {tuple(row) for row in raw}
    raw_tokens = {repr(float(v)) for v in raw.ravel()}
    files = [p for p in pool.root.rglob("*") if p.is_file()]
    leaks = []
    for path in files:
        text = path.read_text(errors="replace")
        if path.suffix == ".json":
            for row in _stored_rows(path):
                if row.shape == (2,) and tuple(row) in raw_rows:
                    leaks.append(f"{path.name}: row {row.tolist()}")
        # byte-level: no raw coordinate printed at full precision anywhere
        for tok in raw_tokens:
            if tok in text:
                leaks.append(f"{path.name}: token {tok}")
    report(9, not leaks, f"scanned {len(files)} files, {len(leaks)} raw rows/tokens found")
    assert not leaks, leaks[:5]


def test_c10_out_of_scope_statement(report):
    readme = " ".join((Path(__file__).parent.parent / "README.md").read_text().lower().split())
    ok = "not reproducible" in readme and "test_acceptance.py" in readme
    report(10, ok, "benchmark/industrial results documented as out of scope; criteria 3-8 stand in")
    assert ok
