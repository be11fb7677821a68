"""End-to-end acceptance checks, one test per criterion.

Each test prints ``criterion N: PASS|FAIL (details)`` and the lines are
repeated in the pytest terminal summary.
"""

import time

import numpy as np
import pytest

from mmh.cli import main as cli_main
from mmh.core import best_fit_affine, center_and_svd, residual_sqd_exact, tail_variance, total_variance
from mmh.datagen import SphereLineSpec, gen_sphere_line, sample_affine_patch
from mmh.hypothesis import ACCEPT, REJECT, TestConfig, evaluate_candidate, fit_reference, full_test, sqd_total
from mmh.idim import (
    IdParams,
    LocalIdRecord,
    compute_all_ids,
    d_vid,
    gmst_local_dimension,
    records_to_arrays,
    stratify,
)
from mmh.io import export_labeled, load_cloud, save_cloud
from mmh.multimanifold import BuildParams, build_multimanifold
from mmh.neighborhoods import NeighborhoodSpec, NeighborIndex, arithmetic_radii, dyadic_radii

from conftest import ACCEPTANCE_LINES, random_rotation

RADII = NeighborhoodSpec.ball(arithmetic_radii(2.0, 0.1, 0.1))
PARAMS = IdParams(0.95, 10, RADII)
N_SPHERE = SphereLineSpec().n_sphere


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def strata_of(X, n_jobs=None):
    return stratify(compute_all_ids(X, PARAMS, n_jobs=n_jobs))


def manifolds_of(X, strata):
    build = BuildParams(K=strata.max_dimension)
    return {i: build_multimanifold(X[g], i, build, ids=g) for i, g in strata.groups.items()}


@pytest.fixture(scope="module")
def run0():
    X = gen_sphere_line(SphereLineSpec(seed=0))
    start = time.perf_counter()
    strata = strata_of(X, n_jobs=1)
    elapsed = time.perf_counter() - start
    return X, strata, elapsed


def test_criterion_01_stratification(run0):
    X, strata, elapsed = run0
    sizes = strata.sizes()
    n = len(X)
    share2 = sizes.get(2, 0) / n
    line_ids = np.arange(N_SPHERE, n)
    line_in_1 = np.isin(line_ids, strata.groups.get(1, [])).mean()
    share3 = sizes.get(3, 0) / n
    ok = (0.85 <= share2 <= 0.97 and sizes.get(1, 0) > 0 and line_in_1 >= 0.60
          and 0 < sizes.get(3, 0) and share3 < 0.05 and elapsed < 60)
    report(1, ok, f"sizes={sizes}, stratum2={share2:.3f}, line points in stratum1={line_in_1:.3f}, "
                  f"stratum3={share3:.3f}, {elapsed:.1f}s single-threaded")


def test_criterion_02_component_counts(run0):
    X, strata, _ = run0
    mms = manifolds_of(X, strata)
    ones = (len(mms[1]), len(mms[3]))
    hits = []
    for seed in range(20):
        Xs = gen_sphere_line(SphereLineSpec(seed=seed))
        st = strata_of(Xs)
        mm = build_multimanifold(Xs[st.groups[2]], 2, BuildParams(K=st.max_dimension))
        first_axis = all(c.cube.depth == 1 for c in mm.components)
        hits.append(len(mm) == 2 and first_axis)
    n_hits = int(sum(hits))
    ok = ones == (1, 1) and n_hits >= 15
    report(2, ok, f"components stratum1/3={ones}, stratum2 seed0={len(mms[2])}, "
                  f"two halves split on x in {n_hits}/20 replications")


def test_criterion_03_sqd_magnitudes(run0):
    X, strata, _ = run0
    mms = manifolds_of(X, strata)
    reference = {1: 0.0076, 2: 0.0096, 3: 0.0031}
    stats = {i: sqd_total(X[strata.groups[i]], mm, 0.95).mean_bound for i, mm in mms.items()}
    ok = all(0 <= v <= 0.05 and reference[i] / 5 <= v <= reference[i] * 5 for i, v in stats.items())
    ok = ok and set(stats) == {1, 2, 3}
    report(3, ok, ", ".join(f"E(SQD) stratum{i}={v:.4f} (ref {reference[i]})" for i, v in stats.items()))


def _random_set(rng):
    n = int(rng.integers(20, 201))
    D = int(rng.integers(2, 7))
    kind = rng.integers(4)
    if kind == 0:  # anisotropic gaussian
        X = rng.standard_normal((n, D)) * rng.uniform(0.01, 5, D)
    elif kind == 1:  # noisy affine patch
        d = int(rng.integers(1, D + 1))
        X = sample_affine_patch(n, d, D, random_state=rng) + rng.normal(0, 0.01, (n, D))
    elif kind == 2:  # curve: helix-like embedding
        s = rng.uniform(0, 4 * np.pi, n)
        X = np.zeros((n, D))
        X[:, 0], X[:, 1] = np.cos(s), np.sin(s)
        X[:, -1] += 0.1 * s
    else:  # curved surface: paraboloid
        uv = rng.uniform(-1, 1, (n, 2))
        X = np.zeros((n, D))
        X[:, :2] = uv
        X[:, -1] += (uv**2).sum(axis=1)
    return X @ random_rotation(D, rng).T


def test_criterion_04_tail_bound():
    rng = np.random.default_rng(2024)
    violations = 0
    for _ in range(1000):
        X = _random_set(rng)
        t = float(rng.choice([0.5, 0.8, 0.9, 0.95, 0.99]))
        s = center_and_svd(X, compute_basis=False)
        d = d_vid(X, t, 10)
        total = total_variance(s)
        if tail_variance(s, d) > (1 - t) * total + 1e-9 * total:
            violations += 1
    report(4, violations == 0, f"{violations} violations over 1000 sets")


def test_criterion_05_oracles():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(500):
        X = _random_set(rng)
        s = center_and_svd(X)
        d = int(rng.integers(0, X.shape[1] + 1))
        exact = residual_sqd_exact(X, best_fit_affine(X, d, summary=s))
        tail = tail_variance(s, d)
        worst = max(worst, abs(exact - tail) / max(tail, 1e-300 + 1e-9 * total_variance(s)))
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(1, 1001))
        X = rng.integers(-20, 21, (n, int(rng.integers(1, 5)))).astype(float)
        brute, tree = NeighborIndex(X, "brute"), NeighborIndex(X, "kd_tree")
        for c in rng.integers(0, n, 5):
            r = float(rng.integers(1, 15))
            k = int(rng.integers(1, n + 1))
            mismatches += not np.array_equal(brute.ball(c, r), tree.ball(c, r))
            mismatches += not np.array_equal(brute.knn(c, k), tree.knn(c, k))
    report(5, worst <= 1e-9 and mismatches == 0,
           f"max relative residual gap {worst:.2e} over 500 sets, {mismatches} index mismatches over 100 clouds")


def test_criterion_06_exact_recovery():
    params = IdParams(0.99, 10, NeighborhoodSpec.knn([100, 200, 400]))
    details, ok = [], True
    for d in range(1, 6):
        X = sample_affine_patch(500, d, 10, random_state=100 + d)
        dims = records_to_arrays(compute_all_ids(X, params))
        defined = dims[dims >= 0]
        mm = build_multimanifold(X, d, BuildParams(t=0.99))
        exact = sqd_total(X, mm, 0.99).total_exact
        good = defined.size > 0 and np.all(defined == d) and len(mm) == 1 and abs(exact) <= 1e-18
        ok &= bool(good)
        details.append(f"d={d}: dims={sorted(set(defined.tolist()))} components={len(mm)} exact={exact:.1e}")
    report(6, ok, "; ".join(details))


def test_criterion_07_rigid_motion():
    X = gen_sphere_line(SphereLineSpec(n_sphere=1200, n_line=150, seed=11))
    Y = gen_sphere_line(SphereLineSpec(n_sphere=1200, n_line=150, seed=12))
    params = IdParams(0.95, 10, NeighborhoodSpec.knn(range(20, 201, 20)))
    config = TestConfig(runs=10)
    dims0 = [(r.dimension, r.argmin_scale_index) for r in compute_all_ids(X, params)]
    verdicts0 = [(d.stratum_dim, d.verdict) for d in full_test(X, Y, params, config)]
    rng = np.random.default_rng(77)
    same_dims = same_verdicts = 0
    for _ in range(10):
        Q = random_rotation(3, rng)
        v = rng.uniform(-10, 10, 3)
        Xm, Ym = X @ Q.T + v, Y @ Q.T + v
        same_dims += [(r.dimension, r.argmin_scale_index) for r in compute_all_ids(Xm, params)] == dims0
        same_verdicts += [(d.stratum_dim, d.verdict) for d in full_test(Xm, Ym, params, config)] == verdicts0
    report(7, same_dims == 10 and same_verdicts == 10,
           f"dimensions identical in {same_dims}/10, verdicts identical in {same_verdicts}/10 (base {verdicts0})")


def test_criterion_08_self_consistency():
    # runs=50 per reference distribution; with 20 runs the empirical 95% interval
    # is too narrow to reach the required acceptance rate
    config = TestConfig(runs=50, delta=0.05)
    accepted = {1: 0, 2: 0, 3: 0}
    shifted_rejects = 0
    trials = 50
    for trial in range(trials):
        X = gen_sphere_line(SphereLineSpec(seed=1000 + 2 * trial))
        Y = gen_sphere_line(SphereLineSpec(seed=1001 + 2 * trial))
        ref = fit_reference(X, PARAMS, config)
        for d in evaluate_candidate(ref, Y, PARAMS, config):
            if d.stratum_dim in accepted and d.verdict == ACCEPT:
                accepted[d.stratum_dim] += 1
        diam = float(np.max(X.max(axis=0) - X.min(axis=0)))
        far = evaluate_candidate(ref, X + 10 * diam, PARAMS, config)
        shifted_rejects += all(d.verdict == REJECT and d.supported == 0 for d in far)
    ok = all(v >= 40 for v in accepted.values()) and shifted_rejects == trials
    report(8, ok, f"accepted per stratum {accepted} of {trials}, translated rejected {shifted_rejects}/{trials}")


@pytest.mark.filterwarnings("ignore:GMST dimension:RuntimeWarning")
def test_criterion_09_gmst():
    n_range = range(200, 401, 25)
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    line = np.outer(rng.uniform(-1, 1, 2000), rng.standard_normal(3))
    index = NeighborIndex(line)
    probes = rng.choice(2000, 200, replace=False)
    rounded = [gmst_local_dimension(line, p, n_range, 5, 1.0, index=index).d_rounded for p in probes]
    line_time = time.perf_counter() - start
    share = np.mean(np.asarray(rounded) == 1)
    patch = sample_affine_patch(2000, 5, 10, random_state=9)
    index = NeighborIndex(patch)
    d_est = [gmst_local_dimension(patch, p, n_range, 5, 1.0, index=index).d_est
             for p in rng.choice(2000, 200, replace=False)]
    mean_d = float(np.mean(d_est))
    ok = share >= 0.95 and abs(mean_d - 5) <= 1 and line_time <= 300
    report(9, ok, f"line d_rounded=1 for {share:.1%}, patch mean d_est={mean_d:.2f}, "
                  f"{line_time:.1f}s for 200 probes")


def test_criterion_10_io_and_radii(tmp_path):
    rng = np.random.default_rng(10)
    X = rng.uniform(-500, 500, (87000, 3))
    start = time.perf_counter()
    src = tmp_path / "synthetic.xyz"
    save_cloud(X, src)
    loaded = load_cloud(src)
    records = [LocalIdRecord(i, int(i % 3) + 1, [], 0, 1.0) for i in range(len(X))]
    out = tmp_path / "labeled.csv"
    export_labeled(loaded, records, stratify(records), out)
    back = load_cloud(out)
    elapsed = time.perf_counter() - start
    lossless = np.array_equal(loaded, X) and np.array_equal(back, X)
    diam = float(np.max(X.max(axis=0) - X.min(axis=0)))
    radii_ok = dyadic_radii(X, 4, 7) == [diam * 2.0**-s for s in range(4, 8)]
    report(10, lossless and radii_ok and elapsed < 10,
           f"lossless={lossless}, {elapsed:.1f}s for 87000 points, dyadic radii exact={radii_ok}")


def test_criterion_11_determinism(tmp_path):
    spec = tmp_path / "run.spec"
    spec.write_text(
        "input.generator = sphere-line\n"
        "gen.seed = 21\n"
        "candidate.generator = sphere-line\n"
        "candidate.seed = 22\n"
        "id.radii = 0.1:2.0:0.1\n"
        "test.runs = 20\n"
    )
    outs = [tmp_path / "first", tmp_path / "second"]
    codes = [cli_main(["run", str(spec), "--out-dir", str(o)]) for o in outs]
    names = ["manifolds.json", "distributions.json", "decisions.json"]
    same = [(outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names]
    report(11, codes == [0, 0] and all(same), f"exit codes {codes}, identical {dict(zip(names, same))}")
