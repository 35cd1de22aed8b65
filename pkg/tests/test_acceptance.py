"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s`.  Every tolerance is
pinned here; the Monte Carlo criteria use fixed seeds so each line is
reproducible bit for bit.
"""

import itertools
import json
import time

import numpy as np
import pytest

from freebench import (
    AtomicAlgebra,
    DiscreteSelfAdjoint,
    DTensorAbelian,
    FiniteMeasure,
    GenId,
    MatrixTuple,
    ModelSpec,
    MomentOracle,
    NcPolynomial,
    QuantileDiagonal,
    SeededGue,
    SemicircularFamily,
    block_plan,
    catalan,
    collapse_test,
    concentration_report,
    dichotomy_check,
    embed,
    external_averaging_report,
    haar_commutant_unitary,
    hs_norm2,
    normalized_trace,
    semicircle_density_moment,
)
from freebench.runner import run
from freebench.verify import collect_traces

S1 = NcPolynomial.generator(1)
S2 = NcPolynomial.generator(2)
PM1 = DiscreteSelfAdjoint.symmetric_pm1()


def _report(num, name, ok, detail=""):
    print(f"\n[acceptance {num:>2}] {name}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def gue_spec():
    return ModelSpec(factor1=SeededGue(1, seed=101), factor2=SeededGue(1, seed=202))


def test_01_semicircular_moments():
    t0 = time.time()
    oracle = MomentOracle({1: SemicircularFamily(1)})
    worst = 0.0
    for m in range(7):
        sym = oracle.poly_moment(S1 ** (2 * m)).real
        assert sym == catalan(m)
        worst = max(worst, abs(sym - semicircle_density_moment(2 * m)))
    elapsed = time.time() - t0
    _report(
        1,
        "semicircular moments are Catalan numbers",
        worst < 1e-8 and elapsed < 1.0,
        f"max |oracle - quadrature| = {worst:.2e}, elapsed {elapsed:.2f}s",
    )


def test_02_freeness_formula():
    t0 = time.time()
    rng = np.random.default_rng(424242)
    n, samples = 256, 200
    w = (GenId(1, 0), GenId(2, 0), GenId(1, 0), GenId(2, 0))

    def rand_law():
        # weights in exact multiples of 1/n so the quantile diagonal
        # realizes the law with no discretization bias
        natoms = int(rng.integers(2, 5))
        cuts = np.sort(rng.choice(np.arange(1, n), size=natoms - 1, replace=False))
        counts = np.diff(np.concatenate([[0], cuts, [n]]))
        vals = np.sort(rng.uniform(-2, 2, natoms))
        return DiscreteSelfAdjoint(
            tuple((float(v), float(c) / n) for v, c in zip(vals, counts))
        )

    def moment(law, p):
        return sum(wt * v**p for v, wt in law.atoms)

    worst_exact, worst_sigma = 0.0, 0.0
    for trial in range(10):
        lx, ly = rand_law(), rand_law()
        oracle = MomentOracle({1: lx, 2: ly})
        got = oracle.free_product_moment(w)
        expected = (
            moment(lx, 2) * moment(ly, 1) ** 2
            + moment(lx, 1) ** 2 * moment(ly, 2)
            - moment(lx, 1) ** 2 * moment(ly, 1) ** 2
        )
        worst_exact = max(worst_exact, abs(got - expected))
        spec = ModelSpec(factor1=QuantileDiagonal(lx), factor2=QuantileDiagonal(ly))
        tr = collect_traces(
            spec, [("w", NcPolynomial({w: 1.0}))], n, samples, base_seed=1000 + trial
        )["w"]
        mean = tr.mean()
        se = np.sqrt((np.abs(tr - mean) ** 2).sum() / (samples * (samples - 1)))
        worst_sigma = max(worst_sigma, abs(mean - got) / se)
    elapsed = time.time() - t0
    _report(
        2,
        "alternating moment formula, exact + Monte Carlo",
        worst_exact <= 1e-12 and worst_sigma <= 4.0 and elapsed < 120.0,
        f"exact err {worst_exact:.1e}, MC {worst_sigma:.2f} stderr, elapsed {elapsed:.0f}s",
    )


def test_03_asymptotic_freeness_gue():
    spec = gue_spec()
    oracle = spec.oracle()
    gens = [GenId(1, 0), GenId(2, 0)]
    words = []
    for d in range(1, 5):
        words.extend(itertools.product(gens, repeat=d))
    polys = [(f"w{i}", NcPolynomial({tuple(w): 1.0})) for i, w in enumerate(words)]
    traces = collect_traces(spec, polys, 256, 200, base_seed=12345)
    worst = 0.0
    for (label, _), w in zip(polys, words):
        bias = abs(traces[label].mean() - oracle.free_product_moment(tuple(w)))
        worst = max(worst, bias)
    _report(
        3,
        "asymptotic freeness of Haar-conjugated GUE pair",
        worst <= 0.05,
        f"worst |MC - oracle| = {worst:.4f} over {len(words)} monomials (tol 0.05)",
    )


def test_04_amalgamated_block_model():
    amalgam = AtomicAlgebra(((1, 0.5), (1, 0.5)))
    spec = ModelSpec(
        factor1=DTensorAbelian(PM1), factor2=DTensorAbelian(PM1), amalgam=amalgam
    )
    oracle = spec.oracle()
    assert spec.plan(256).n == 256
    letters = [GenId(0, 0), GenId(1, 0), GenId(2, 0)]
    words = []
    for d in range(1, 5):
        words.extend(itertools.product(letters, repeat=d))
    polys = [(f"w{i}", NcPolynomial({tuple(w): 1.0})) for i, w in enumerate(words)]
    traces = collect_traces(spec, polys, 256, 200, base_seed=777)
    worst = 0.0
    for (label, _), w in zip(polys, words):
        target = oracle.moment(tuple(w))
        worst = max(worst, abs(traces[label].mean() - target))
    _report(
        4,
        "amalgamated model matches the block oracle",
        worst <= 0.05,
        f"worst |MC - oracle| = {worst:.4f} over {len(words)} words incl. projections (tol 0.05)",
    )


def test_05_external_averaging():
    spec = gue_spec()
    oracle = spec.oracle()
    polys = [("s1 s2^2 s1", S1 * S2**2 * S1), ("s1 s2", S1 * S2)]
    rep = external_averaging_report(
        spec, polys, [256], 200, base_seed=31415, oracle=oracle, tol=0.1
    )
    rows = {r.label: r for r in rep.rows}
    sandwich, cross = rows["s1 s2^2 s1"], rows["s1 s2"]
    ok = (
        abs(sandwich.oracle - np.sqrt(2)) < 1e-9
        and abs(cross.oracle) < 1e-9
        and abs(sandwich.estimate - np.sqrt(2)) <= 0.1
        and abs(cross.estimate) <= 0.1
    )
    _report(
        5,
        "external averaging matches conditional norms",
        ok,
        f"||E[s1 s2^2 s1]|| = {sandwich.estimate:.4f} (target sqrt2), "
        f"||E[s1 s2]|| = {cross.estimate:.4f} (target 0), tol 0.1",
    )


def test_06_concentration_scaling():
    t0 = time.time()
    rep = concentration_report(
        gue_spec(),
        S1 * S2,
        [64, 128, 256, 512],
        100,
        base_seed=271828,
        slope_range=(-2.6, -1.4),
    )
    slope = rep.metadata["slope"]
    elapsed = time.time() - t0
    _report(
        6,
        "variance of tr p(X) scales like n^-2",
        -2.6 <= slope <= -1.4 and elapsed < 600.0,
        f"slope = {slope:.3f} +- {rep.metadata['slope_stderr']:.3f} "
        f"(interval [-2.6, -1.4]), elapsed {elapsed:.0f}s",
    )


def test_07_collapse_criterion():
    spec = gue_spec()
    det = collapse_test(spec, S1, 256, 200, base_seed=999, tol=1e-12)
    rand = collapse_test(spec, S2, 256, 200, base_seed=999, tol=0.1)
    ok = (
        det.estimator.value <= 1e-12
        and det.collapses
        and rand.oracle == pytest.approx(1.0)
        and rand.estimator.value >= 0.9
        and abs(rand.estimator.value - 1.0) <= 0.1
        and not rand.collapses
    )
    _report(
        7,
        "collapse distinguishes deterministic from conjugated letters",
        ok,
        f"deterministic: {det.estimator.value:.1e} (<= 1e-12); "
        f"conjugated: {rand.estimator.value:.4f} (oracle 1.0, tol 0.1)",
    )


def test_08_block_embedding_correctness():
    alg = AtomicAlgebra(((2, 0.5), (1, 0.3), (3, 0.2)))
    rng = np.random.default_rng(161803)

    plan = block_plan(alg, 60)
    worst_hom = 0.0
    for _ in range(20):
        z = alg.random_element(rng, hermitian=False)
        w = alg.random_element(rng, hermitian=False)
        zw = embed(z * w, plan)
        worst_hom = max(
            worst_hom,
            np.max(np.abs(zw - embed(z, plan) @ embed(w, plan))),
            np.max(np.abs(embed(z.adjoint(), plan) - embed(z, plan).conj().T)),
        )
    worst_hom = max(
        worst_hom, np.max(np.abs(embed(alg.unit(), plan) - np.eye(plan.n)))
    )

    violations = 0
    for k in (10, 100, 1000):
        plan_k = block_plan(alg, k)
        for _ in range(20):
            z = alg.random_element(rng)
            got = normalized_trace(embed(z, plan_k))
            bound = sum(
                nz * abs(r * mj / plan_k.n - g)
                for (r, g), mj, nz in zip(alg.blocks, plan_k.m, z.block_norms())
            )
            if abs(got - z.trace()) > bound + 1e-12:
                violations += 1
    _report(
        8,
        "block embedding is a *-homomorphism with controlled trace error",
        worst_hom <= 1e-10 and violations == 0,
        f"homomorphism defect {worst_hom:.1e}, trace-bound violations {violations}/60",
    )


def test_09_commutant_haar_sampler():
    alg = AtomicAlgebra(((1, 0.5), (2, 0.5)))
    plan = block_plan(alg, 96)
    rng = np.random.default_rng(5150)
    zs = [alg.random_element(rng) for _ in range(5)]
    worst_unit, worst_comm = 0.0, 0.0
    vals = []
    for i in range(400):
        u = haar_commutant_unitary(plan, rng)
        vals.append(normalized_trace(u))
        if i < 20:
            worst_unit = max(worst_unit, hs_norm2(u.conj().T @ u - np.eye(plan.n)))
            for z in zs:
                zm = embed(z, plan)
                worst_comm = max(worst_comm, hs_norm2(u @ zm - zm @ u))
    vals = np.array(vals)
    mean = vals.mean()
    se = np.sqrt((np.abs(vals - mean) ** 2).mean() / len(vals))
    ok = worst_unit <= 1e-10 and worst_comm <= 1e-10 and abs(mean) <= 3 * se
    _report(
        9,
        "commutant Haar sampler: unitary, commuting, centered",
        ok,
        f"unitarity {worst_unit:.1e}, commutators {worst_comm:.1e}, "
        f"|mean tr| = {abs(mean):.1e} vs 3 stderr = {3 * se:.1e}",
    )


def test_10_concentration_dichotomy():
    rng = np.random.default_rng(307)
    g1, g2 = GenId(1, 0), GenId(1, 1)
    violations = 0
    for _ in range(100):
        natoms = int(rng.integers(2, 9))
        pts = []
        for _ in range(natoms):
            m1 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            m2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            pts.append(
                MatrixTuple({g1: (m1 + m1.conj().T) / 2, g2: (m2 + m2.conj().T) / 2})
            )
        weights = rng.dirichlet(np.ones(natoms))
        mu = FiniteMeasure(list(zip(pts, weights)))
        subset = [i for i in range(natoms) if rng.random() < 0.5]
        coords = [g1] if rng.random() < 0.5 else [g1, g2]
        eps = float(rng.uniform(0.05, 1.5))
        if not dichotomy_check(mu, subset, coords, eps):
            violations += 1
    _report(
        10,
        "concentration dichotomy holds on all randomized measures",
        violations == 0,
        f"{violations}/100 violations with exact alpha enumeration",
    )


def test_11_reproducible_reports(tmp_path):
    cfg = {
        "experiment": "reproducibility-probe",
        "seed": 20260810,
        "oracle": {
            "factors": [
                {"label": 1, "law": {"type": "discrete", "atoms": [[-1.0, 0.5], [1.0, 0.5]]}},
                {"label": 2, "law": {"type": "discrete", "atoms": [[-1.0, 0.5], [1.0, 0.5]]}},
            ]
        },
        "model": {
            "factor1": {"type": "quantile_diagonal", "atoms": [[-1.0, 0.5], [1.0, 0.5]]},
            "factor2": {"type": "quantile_diagonal", "atoms": [[-1.0, 0.5], [1.0, 0.5]]},
        },
        "schedule": {"k_list": [16, 32, 64], "samples": 50},
        "polynomials": ["f1.g0 f2.g0", "f1.g0 f2.g0 f1.g0 f2.g0"],
        "tolerances": {"moment_abs": 0.2, "eap": 0.2, "collapse": 0.2},
        "output_dir": str(tmp_path / "unused"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    code1 = run("verify", str(path), out=str(out1))
    code2 = run("verify", str(path), out=str(out2))
    same_json = (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    same_csv = (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()
    _report(
        11,
        "verify runs are byte-identical at fixed seed",
        code1 == 0 and code2 == 0 and same_json and same_csv,
        f"exit codes ({code1}, {code2}), report.json identical: {same_json}, "
        f"report.csv identical: {same_csv}",
    )
