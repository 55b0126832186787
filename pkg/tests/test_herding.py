import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from learnware.herding import HerdState, herd_next, herd_sample, herding_error, herding_errors
from learnware.kernel import KernelConfig
from learnware.rkme import Rkme, mmd_sq, reduce
from learnware.synth import ToyConfig, make_test, make_toy

SHARP = KernelConfig("gaussian", 4.0)
TWO_ATOMS = Rkme(SHARP, [0.5, 0.5], [[0.0, 0.0], [3.0, 2.0]])


def herd_objective(spec, drawn, x):
    """Herding objective written out term by term."""
    value = sum(b * oracles.k(spec.kernel.family, spec.kernel.gamma, z, x) for b, z in zip(spec.beta, spec.Z))
    T = len(drawn)
    return value - sum(oracles.k(spec.kernel.family, spec.kernel.gamma, p, x) for p in drawn) / (T + 1)


def grid_argmax(spec, drawn, step=0.02):
    xs = np.arange(-1.0, 4.0 + step / 2, step)
    ys = np.arange(-1.0, 3.0 + step / 2, step)
    best, arg = -np.inf, None
    for x in xs:
        for y in ys:
            v = herd_objective(spec, drawn, (x, y))
            if v > best:
                best, arg = v, np.array([x, y])
    return arg


def test_single_atom_first_draw(rng):
    z = rng.normal(size=3)
    spec = Rkme(KernelConfig("gaussian", 1.0), [1.0], [z])
    np.testing.assert_allclose(herd_sample(spec, 1)[0], z, atol=1e-12)


@pytest.fixture(scope="module")
def two_atom_grid():
    first = grid_argmax(TWO_ATOMS, [])
    second = grid_argmax(TWO_ATOMS, [TWO_ATOMS.Z[0]])
    return first, second


def test_two_atoms_first_draw(two_atom_grid):
    first_grid, _ = two_atom_grid
    # the grid oracle places the global maximum on one of the atoms
    assert min(np.linalg.norm(first_grid - z) for z in TWO_ATOMS.Z) <= 0.02
    state = HerdState(TWO_ATOMS)
    x1 = herd_next(state)
    assert min(np.linalg.norm(x1 - z) for z in TWO_ATOMS.Z) <= 1e-3


def test_two_atoms_second_draw(two_atom_grid):
    _, second_grid = two_atom_grid
    np.testing.assert_allclose(second_grid, TWO_ATOMS.Z[1], atol=0.02)
    state = HerdState(TWO_ATOMS, drawn=TWO_ATOMS.Z[:1].copy())
    x2 = herd_next(state)
    assert np.linalg.norm(x2 - second_grid) <= 0.03
    assert state.T == 2


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_draw_beats_every_atom_start(seed):
    r = np.random.default_rng(seed)
    spec = Rkme(KernelConfig("gaussian", 2.0), r.uniform(0.1, 1, 4), r.normal(size=(4, 2)))
    state = HerdState(spec, drawn=r.normal(size=(int(r.integers(0, 5)), 2)))
    prior = state.drawn.copy()
    x = herd_next(state, rng=seed)
    best_start = max(herd_objective(spec, prior, z) for z in spec.Z)
    assert herd_objective(spec, prior, x) >= best_start - 1e-12


@pytest.fixture(scope="module")
def blob_spec():
    X = np.random.default_rng(5).normal(size=(300, 2))
    return reduce(KernelConfig("gaussian", 1.0), X, 10)


def test_deterministic(blob_spec):
    a = herd_sample(blob_spec, 30, seed=4)
    b = herd_sample(blob_spec, 30, seed=4)
    assert a.tobytes() == b.tobytes()


def test_points_inside_inflated_box(blob_spec):
    pts = herd_sample(blob_spec, 60)
    pad = 5 / np.sqrt(blob_spec.kernel.gamma)
    assert np.all(np.isfinite(pts))
    assert np.all(pts >= blob_spec.Z.min(axis=0) - pad)
    assert np.all(pts <= blob_spec.Z.max(axis=0) + pad)


def test_prefix_errors_match_direct(blob_spec):
    pts = herd_sample(blob_spec, 25)
    E = herding_errors(blob_spec, pts)
    for T in (1, 7, 25):
        assert E[T - 1] == pytest.approx(herding_error(blob_spec, pts[:T]), abs=1e-12)
        assert herding_error(blob_spec, pts[:T]) == pytest.approx(mmd_sq(pts[:T], blob_spec), abs=1e-12)


@pytest.fixture(scope="module")
def long_run(blob_spec):
    pts = herd_sample(blob_spec, 320)
    return herding_errors(blob_spec, pts)


def test_error_rate(long_run):
    Ts = np.array([10, 20, 40, 80, 160, 320])
    slope = np.polyfit(np.log(Ts), np.log(long_run[Ts - 1]), 1)[0]
    assert slope < -0.7


def trailing_median(E, window=5):
    return np.array([np.median(E[max(0, i - window + 1) : i + 1]) for i in range(len(E))])


@pytest.mark.xfail(
    strict=True,
    reason="greedy herding does not decrease the error at every step; the window-5 median still rises now and then",
)
def test_error_trailing_median_nonincreasing_every_step(long_run):
    assert np.all(np.diff(trailing_median(long_run)) <= 1e-12)


def test_error_trailing_median_decreases_across_doublings(long_run):
    med = trailing_median(long_run)
    Ts = np.array([5, 10, 20, 40, 80, 160, 320])
    assert np.all(np.diff(med[Ts - 1]) < 0)


def test_herded_beats_iid_on_toy_provider():
    cfg = ToyConfig()
    data, _ = make_toy(cfg)
    spec = reduce(KernelConfig("gaussian", 1.0), data[0].X, 5)
    herded = mmd_sq(herd_sample(spec, 200), spec)
    iid = [mmd_sq(make_test(cfg, 200, s, provider=0).X, spec) for s in range(10)]
    assert herded < np.median(iid)
