"""Acceptance criteria 1-11, one test each.  Every test prints a single PASS/FAIL line."""
import time

import numpy as np
import pytest
from scipy import stats

from dppc import cli, experiments
from dppc.checks import conditional_correlation_gap, integrable_residuals
from dppc.conditioning import (avg_mult_functional, fredholm_det, hankel_det,
                               marginal_mark0_normalization, marginal_mark0_probability,
                               palm_kernel, toeplitz_det)
from dppc.ground import discretize, finite_space
from dppc.integrable import cd_integrable, sine_integrable
from dppc.kernels import circle_ope_kernel, ope_kernel, random_hermitian_kernel, sine_kernel
from dppc.oracle import from_kernel, mark_exact, mask_of
from dppc.sampler import estimate, sample_dpp, subset_frequencies


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return emit


def _random_case(rng, n):
    space = finite_space(n, rng.uniform(0.5, 2.0, n))
    return random_hermitian_kernel(space, rng, complex_=bool(rng.integers(2)))


def test_criterion_01_oracle_equivalence(report):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst, kernels, observations = 0.0, 0, 0
    for _ in range(60):
        n = int(rng.integers(1, 9))
        K = _random_case(rng, n)
        theta = rng.uniform(0, 1, n)
        tp = from_kernel(K)
        law = mark_exact(tp, theta).ones_law()
        for vm in np.flatnonzero(law > 1e-6):
            _, gap = conditional_correlation_gap(K, theta, int(vm), tp)
            worst = max(worst, gap)
            observations += 1
        kernels += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 30
    report(1, ok, f"{kernels} kernels, {observations} observations, max |gap| = {worst:.2e} "
                  f"(<= 1e-9), {elapsed:.1f}s (< 30s)")


def test_criterion_02_multiplicative_functional(report):
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        K = _random_case(rng, n)
        theta = rng.uniform(0, 1, n)
        phi0 = rng.uniform(0, 1, n)
        k = int(rng.integers(0, min(n, 3) + 1))
        v = tuple(sorted(rng.choice(n, size=k, replace=False)))
        ratio, kern = avg_mult_functional(K, theta, v, phi0, route="both")
        worst = max(worst, abs(ratio - kern))
    report(2, worst <= 1e-10, f"100 tuples, max |ratio - kernel route| = {worst:.2e} (<= 1e-10)")


def test_criterion_03_palm_algebra(report):
    rng = np.random.default_rng(303)
    order = iterate = vanish = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 11))
        K = _random_case(rng, n)
        a, b = (int(i) for i in rng.choice(n, size=2, replace=False))
        ab = palm_kernel(palm_kernel(K, (a,)).kernel, (b,)).kernel.matrix
        ba = palm_kernel(palm_kernel(K, (b,)).kernel, (a,)).kernel.matrix
        joint = palm_kernel(K, (a, b)).kernel.matrix
        order = max(order, np.max(np.abs(ab - ba)))
        iterate = max(iterate, np.max(np.abs(ab - joint)))
        vanish = max(vanish, np.max(np.abs(joint[[a, b], :])), np.max(np.abs(joint[:, [a, b]])))
    ok = order <= 1e-12 and iterate <= 1e-12 and vanish <= 1e-12
    report(3, ok, f"50 cases, order {order:.1e}, iterated-vs-joint {iterate:.1e}, "
                  f"rows at v {vanish:.1e} (all <= 1e-12)")


def test_criterion_04_integrable_suite(report):
    s = discretize("real-interval", 40, bounds=(-3, 3))
    kernels = {"sine": sine_integrable(s),
               "cd": cd_integrable(ope_kernel(np.exp(-s.nodes ** 2), 6, s))}
    tol = {"constraint": 1e-12, "palm_constraint": 1e-12, "nilpotent": 1e-12, "det_R": 1e-10,
           "product_vs_closed": 1e-10, "palm_update_vs_matrix": 1e-10, "jump_conjugation": 1e-10}
    theta = 0.5 + 0.3 * np.cos(s.nodes)
    probes = [complex(z) for z in np.linspace(-2.5, 2.5, 7) + 0.3j] + [0.05 + 0j, 4.0 + 0j]
    worst = {k: 0.0 for k in tol}
    exact = True
    for ik in kernels.values():
        for v in ([], [11], [5, 22], [3, 19, 34]):
            res = integrable_residuals(ik, v, theta, probes)
            for k in tol:
                worst[k] = max(worst[k], res[k])
            exact &= res["dressed_identity_exact"]
    ok = exact and all(worst[k] <= tol[k] for k in tol)
    detail = ", ".join(f"{k} {worst[k]:.1e}" for k in tol)
    report(4, ok, f"sine + CD, |v| <= 3: {detail}; Y = I exact: {exact}")


def test_criterion_05_gue_deformation(report):
    worst = 0.0
    for N in range(2, 11):
        cfg = cli.resolve_config("gue-deform", {"N": N, "observed_points": [0.5]})
        summary, _ = experiments.run_gue_deformation(cfg)
        worst = max(worst, *(a["value"] for a in summary["assertions"].values()))
    report(5, worst <= 1e-8, f"N = 2..10, empty and one point, max deviation {worst:.2e} "
                             f"(<= 1e-8, on the sqrt(e^-NV mu) scale)")


def test_criterion_06_cue_scaling(report):
    cfg = cli.resolve_config("scaling", {})
    summary, _ = experiments.run_scaling_limit(cfg)
    final = summary["errors"][-1]
    ratios = summary["ratios"]
    ok = final <= 1e-2 and all(0.4 <= r <= 0.6 for r in ratios)
    report(6, ok, f"sup error at N=200 {final:.2e} (<= 1e-2); doubling ratios "
                  f"{', '.join(f'{r:.3f}' for r in ratios)} (need 0.4-0.6); "
                  f"fitted order {summary['fitted_order']:.2f}")


def test_criterion_07_jacobi(report):
    start = time.perf_counter()
    cfg = cli.resolve_config("jacobi", {})
    summary, rows = experiments.run_jacobi(cfg)
    elapsed = time.perf_counter() - start
    worst = summary["max_abs_diff"]
    ok = worst <= 1e-6 and len(rows) == 20 and elapsed < 10
    report(7, ok, f"20-point sweep, max |lhs - rhs| = {worst:.2e} (<= 1e-6), {elapsed:.2f}s (< 10s)")


def test_criterion_08_rigidity(report):
    # exact finite-rank projections
    rank_gap = 0.0
    for N, marking in [(3, 0.5), (6, {"piecewise": [[-1, 1, 0.2]], "default": 0.9})]:
        cfg = cli.resolve_config("rigidity", {
            "space": {"domain": "real-interval", "n": 60, "bounds": [-4, 4]},
            "kernel": f"ope:{N}:exp(-x**2)", "marking": marking, "observations": 30})
        _, rows = experiments.run_rigidity(cfg)
        rank_gap = max(rank_gap, *(max(abs(r["variance"]), abs(r["trace"] + r["observed"] - N))
                                   for r in rows))
    cfg = cli.resolve_config("rigidity", {})
    summary, _ = experiments.run_rigidity(cfg)
    ratio = summary["mean_conditional_variance"] / summary["unconditioned_variance"]
    frac = summary["integer_trace_fraction"]
    ok = rank_gap <= 1e-8 and ratio <= 0.2 and frac >= 0.9 and summary["failed_observations"] == 0
    report(8, ok, f"finite rank: max |Var|, |t_v + |v| - N| = {rank_gap:.1e}; sine on [-10,10], "
                  f"400 nodes, 100 observations: variance ratio {ratio:.3f} (<= 0.2), "
                  f"integer-trace fraction {frac:.2f} (>= 0.9)")


def test_criterion_09_sampler(report):
    rng = np.random.default_rng(909)
    K = _random_case(rng, 4)
    batch = sample_dpp(K, 2024, 1_000_000)
    obs = subset_frequencies(batch, 4)
    expect = from_kernel(K).prob * len(batch)
    keep = expect > 0
    chi = stats.chisquare(obs[keep], expect[keep] * obs[keep].sum() / expect[keep].sum())
    s = discretize("real-interval", 30, bounds=(-3, 3))
    ope = ope_kernel(np.exp(-s.nodes ** 2), 5, s)
    counts = set(sample_dpp(ope.kernel, 7, 20_000).counts())
    Ks = sine_kernel(s)
    phi = 0.6 * np.exp(-s.nodes ** 2)
    mean, se = estimate(sample_dpp(Ks, 8, 100_000), "multiplicative", phi)
    z = abs(mean - fredholm_det(Ks, phi)) / se
    ok = chi.pvalue > 1e-3 and counts == {5} and z <= 3
    report(9, ok, f"chi2 p = {chi.pvalue:.3f} (> 0.001) at 1e6 samples; rank-5 counts {sorted(counts)}; "
                  f"multiplicative MC |z| = {z:.2f} (<= 3) at 1e5 samples")


def test_criterion_10_fredholm_stability(report):
    dets = []
    for n in (40, 80):
        s = discretize("real-interval", n, bounds=(0, 1))
        dets.append(fredholm_det(sine_kernel(s), 1.0))
    rel = abs(dets[0] - dets[1]) / abs(dets[1])
    report(10, rel <= 1e-6 and f"{dets[0]:.6g}" == f"{dets[1]:.6g}",
           f"det = {dets[0]:.12f} (40 nodes), {dets[1]:.12f} (80 nodes), relative change {rel:.1e}")


def _oracle_mark0(K, theta, m):
    table = mark_exact(from_kernel(K), theta).table()
    law = {}
    for (a, b), p in table.items():
        if bin(b).count("1") == m:
            law[a] = law.get(a, 0.0) + p
    total = sum(law.values())
    return {a: p / total for a, p in law.items()}


def test_criterion_11_hankel_toeplitz(report):
    theta = np.array([0.3, 0.65, 0.2, 0.5])
    real = finite_space([-1.2, -0.1, 0.5, 1.7], [0.6, 1.0, 1.3, 0.8])
    circ = discretize("unit-circle", 4)
    worst = 0.0
    for ope in (ope_kernel(lambda x: np.exp(-x ** 2 / 2), 2, real),
                circle_ope_kernel(lambda t: 1 + 0.4 * np.sin(t), 2, circ)):
        law = _oracle_mark0(ope.kernel, theta, 1)
        Z, _ = marginal_mark0_normalization(ope, theta, 1)
        for u in range(4):
            worst = max(worst, abs(marginal_mark0_probability(ope, theta, 1, [u], Z)
                                   - law.get(mask_of((u,)), 0.0)))
    f = np.array([0.37, 2.0, 5.0])
    h1 = hankel_det(lambda k: f[:k], 1)
    t1 = toeplitz_det(lambda k: {0: 0.81 + 0j}, 1)
    ok = worst <= 1e-8 and h1 == 0.37 and t1 == 0.81
    report(11, ok, f"N=2, m=1 on 4 nodes (line and circle): max |marginal - oracle| = {worst:.1e} "
                   f"(<= 1e-8); H_1 = f_0 and T_1 = g_0 exactly: {h1 == 0.37 and t1 == 0.81}")
