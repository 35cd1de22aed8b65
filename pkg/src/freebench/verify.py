"""Monte Carlo verification harness for the random matrix model hypotheses.

Four hypothesis reports mirror the properties the models must satisfy:

1. operator norm bounds uniform in the scale,
2. convergence of traces of polynomials to the oracle moments,
3. concentration: variance of trace observables decaying like n^-2,
4. external averaging: the 2-norm of the classical mean of p(X)
   matching the oracle's conditional-expectation norm,

plus the collapse test, which estimates the squared distance of p(X)
from the best deterministic matrix (its mean) and compares with the
oracle value tau(p*p) - ||E[p]||_2^2.

Sampling is reproducible by construction: sample s at scale k uses the
seed derived from (base seed, "model/k=<k>", s), so every report row is
a pure function of (model spec, base seed), worker scheduling cannot
change results (chunks are reduced in index order), and deterministic
observables are detected structurally and reported with exactly zero
variance rather than float dust.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .models import ModelSpec, sample_model
from .ncpoly import GenId, MatrixTuple, NcPolynomial, hs_norm2, normalized_trace, op_norm
from .seeds import derive_seed


class InsufficientScales(ValueError):
    """Scaling fits need at least three scales."""


# ---------------------------------------------------------------------
# Results and reports
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorResult:
    """A Monte Carlo estimate with its standard error."""

    value: complex
    stderr: float
    samples: int
    k: int
    n: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if self.samples < 2 and self.stderr != 0.0:
            raise ValueError("a reported stderr needs at least 2 samples")


@dataclass
class ReportRow:
    hypothesis: str
    label: str
    k: int
    n: int
    estimate: complex
    stderr: float
    oracle: complex | None
    tol: float | None
    passed: bool
    note: str = ""


@dataclass
class HypothesisReport:
    hypothesis: str
    rows: list
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def to_jsonable(self):
        return {
            "hypothesis": self.hypothesis,
            "passed": self.passed,
            "metadata": self.metadata,
            "rows": [
                {
                    "hypothesis": r.hypothesis,
                    "label": r.label,
                    "k": r.k,
                    "n": r.n,
                    "estimate_re": float(np.real(r.estimate)),
                    "estimate_im": float(np.imag(r.estimate)),
                    "stderr": float(r.stderr),
                    "oracle_re": None if r.oracle is None else float(np.real(r.oracle)),
                    "oracle_im": None if r.oracle is None else float(np.imag(r.oracle)),
                    "tol": r.tol,
                    "passed": bool(r.passed),
                    "note": r.note,
                }
                for r in self.rows
            ],
        }


CSV_HEADER = "hypothesis,poly,k,n,estimate_re,estimate_im,stderr,oracle_re,oracle_im,tol,passed"


def rows_to_csv(rows):
    lines = [CSV_HEADER]
    for r in rows:
        oracle_re = "" if r.oracle is None else f"{float(np.real(r.oracle)):.12g}"
        oracle_im = "" if r.oracle is None else f"{float(np.imag(r.oracle)):.12g}"
        tol = "" if r.tol is None else f"{r.tol:.12g}"
        lines.append(
            f"{r.hypothesis},{r.label},{r.k},{r.n},"
            f"{float(np.real(r.estimate)):.12g},{float(np.imag(r.estimate)):.12g},"
            f"{float(r.stderr):.12g},{oracle_re},{oracle_im},{tol},{int(r.passed)}"
        )
    return "\n".join(lines) + "\n"


def spec_fingerprint(spec: ModelSpec):
    return hashlib.sha256(repr(spec).encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------
# Sampling machinery
# ---------------------------------------------------------------------


def sample_seed(base_seed, k, index):
    """Seed of sample `index` at scale k; shared by every report so that
    runs are reproducible row by row."""
    return derive_seed(base_seed, f"model/k={k}", index)


def _per_sample(spec, k, samples, base_seed, work, jobs=1):
    """Map `work` over the model samples, yielding results in index order.

    With jobs > 1 the samples are built in a thread pool (the heavy
    lifting is BLAS, which releases the GIL) but results are still
    consumed in index order, so the output is scheduling-invariant.
    """

    def one(s):
        rng = np.random.default_rng(sample_seed(base_seed, k, s))
        return work(sample_model(spec, k, rng))

    if jobs <= 1:
        for s in range(samples):
            yield one(s)
        return
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        for start in range(0, samples, 4 * jobs):
            block = range(start, min(start + 4 * jobs, samples))
            yield from ex.map(one, block)


def _prefix_cache(mt: MatrixTuple):
    eye = np.eye(mt.dim, dtype=np.complex128)
    cache = {(): eye}

    def product(w):
        m = cache.get(w)
        if m is None:
            m = product(w[:-1]) @ mt[w[-1]]
            cache[w] = m
        return m

    return product


def word_traces(mt: MatrixTuple, words):
    """Normalized traces of many words, sharing prefix products."""
    product = _prefix_cache(mt)
    out = {}
    for w in sorted(set(words), key=len):
        if not w:
            out[w] = 1.0 + 0.0j
        else:
            pre = product(w[:-1])
            out[w] = complex(np.einsum("ij,ji->", pre, mt[w[-1]])) / mt.dim
    return out


def poly_trace_from_table(p: NcPolynomial, table):
    return sum((c * table[w] for w, c in p.terms.items()), 0.0 + 0.0j)


def poly_matrix(p: NcPolynomial, mt: MatrixTuple, product=None):
    if product is None:
        product = _prefix_cache(mt)
    out = np.zeros((mt.dim, mt.dim), dtype=np.complex128)
    for w, c in p.terms.items():
        out += c * product(w)
    return out


def is_deterministic_observable(p: NcPolynomial):
    """True when p only touches the deterministic letters (factor 1 and
    the amalgam's projections), so p(X) does not depend on the draw."""
    return all(g.factor in (0, 1) for g in p.generators())


def _labeled(polys):
    out = []
    for item in polys:
        if isinstance(item, tuple):
            out.append((str(item[0]), item[1]))
        else:
            out.append((repr(item), item))
    return out


def collect_traces(spec, polys, k, samples, base_seed, jobs=1):
    """Per-sample traces of every polynomial: dict label -> complex array."""
    polys = _labeled(polys)
    words = set()
    for _, p in polys:
        words.update(p.terms)

    def work(mt):
        table = word_traces(mt, words)
        return [poly_trace_from_table(p, table) for _, p in polys]

    rows = list(_per_sample(spec, k, samples, base_seed, work, jobs))
    arr = np.array(rows, dtype=np.complex128)
    return {label: arr[:, i] for i, (label, _) in enumerate(polys)}


def mean_matrices(spec, polys, k, samples, base_seed, jobs=1):
    """Classical expectation of p(X) per polynomial, by pairwise-stable
    accumulation over samples in index order."""
    polys = _labeled(polys)

    def work(mt):
        product = _prefix_cache(mt)
        return [poly_matrix(p, mt, product) for _, p in polys]

    total = None
    count = 0
    # binary-counter pairwise merging keeps O(log S) partial sums
    stack = []
    for res in _per_sample(spec, k, samples, base_seed, work, jobs):
        item = (1, res)
        while stack and stack[-1][0] == item[0]:
            lvl, prev = stack.pop()
            item = (lvl + 1, [a + b for a, b in zip(prev, item[1])])
        stack.append(item)
        count += 1
    for _, res in stack:
        total = res if total is None else [a + b for a, b in zip(total, res)]
    return {label: m / count for (label, _), m in zip(polys, total)}


def _mean_stderr(values):
    values = np.asarray(values)
    mean = complex(values.mean())
    if len(values) < 2:
        return mean, 0.0
    dev = np.abs(values - mean) ** 2
    return mean, float(np.sqrt(dev.sum() / (len(values) * (len(values) - 1))))


# ---------------------------------------------------------------------
# Hypothesis 1: operator norm bounds
# ---------------------------------------------------------------------


def check_norm_bounds(spec: ModelSpec, k, samples, base_seed=0, bounds=None, jobs=1, norm_tol=1e-8):
    """Max operator norm per generator over the samples versus its bound."""
    if samples < 1:
        raise ValueError("need at least one sample")
    plan = spec.plan(k)
    gens = spec.generators()

    def work(mt):
        return [op_norm(mt[g], tol=1e-10) for g in gens]

    maxima = None
    for res in _per_sample(spec, k, samples, base_seed, work, jobs):
        maxima = res if maxima is None else [max(a, b) for a, b in zip(maxima, res)]

    rows = []
    for g, mx in zip(gens, maxima):
        bound = bounds[g] if bounds is not None else spec.bound_for(g)
        rows.append(
            ReportRow(
                hypothesis="1",
                label=str(GenId(*g)),
                k=k,
                n=plan.n,
                estimate=mx,
                stderr=0.0,
                oracle=bound,
                tol=norm_tol,
                passed=mx <= bound + norm_tol,
                note="max operator norm over samples",
            )
        )
    return HypothesisReport(
        hypothesis="1",
        rows=rows,
        metadata={"seed": base_seed, "samples": samples, "spec": spec_fingerprint(spec)},
    )


# ---------------------------------------------------------------------
# Hypothesis 2: convergence of the law
# ---------------------------------------------------------------------


def estimate_moment(spec: ModelSpec, p, k, samples, base_seed=0, jobs=1):
    """Sample mean and stderr of tau_n(p(X)) at one scale."""
    if samples < 2:
        raise ValueError("need at least two samples for a stderr")
    plan = spec.plan(k)
    if is_deterministic_observable(p):
        rng = np.random.default_rng(sample_seed(base_seed, k, 0))
        mt = sample_model(spec, k, rng)
        val = normalized_trace(poly_matrix(p, mt))
        return EstimatorResult(value=val, stderr=0.0, samples=samples, k=k, n=plan.n)
    traces = collect_traces(spec, [("p", p)], k, samples, base_seed, jobs)["p"]
    mean, se = _mean_stderr(traces)
    return EstimatorResult(value=mean, stderr=se, samples=samples, k=k, n=plan.n)


def convergence_report(
    spec: ModelSpec,
    polys,
    k_list,
    samples,
    base_seed=0,
    oracle=None,
    tol_abs=0.05,
    jobs=1,
):
    """Moment estimates against the oracle for every polynomial and scale.

    A row passes when |mean - oracle| <= max(tol_abs, 4*stderr).  The
    metadata records, per polynomial, the fitted decay exponent of the
    absolute bias against n (when the bias is resolvable)."""
    polys = _labeled(polys)
    oracle = oracle if oracle is not None else spec.oracle()
    rows = []
    bias_by_label = {label: [] for label, _ in polys}
    ns = []
    for k in k_list:
        plan = spec.plan(k)
        ns.append(plan.n)
        traces = collect_traces(spec, polys, k, samples, base_seed, jobs)
        for label, p in polys:
            target = oracle.poly_moment(p)
            if is_deterministic_observable(p):
                mean, se = complex(traces[label][0]), 0.0
            else:
                mean, se = _mean_stderr(traces[label])
            bias = abs(mean - target)
            bias_by_label[label].append(bias)
            rows.append(
                ReportRow(
                    hypothesis="2",
                    label=label,
                    k=k,
                    n=plan.n,
                    estimate=mean,
                    stderr=se,
                    oracle=target,
                    tol=tol_abs,
                    passed=bias <= max(tol_abs, 4 * se),
                )
            )
    exponents = {}
    for label, biases in bias_by_label.items():
        usable = [(n, b) for n, b in zip(ns, biases) if b > 0]
        if len(usable) >= 2:
            x = np.log([n for n, _ in usable])
            y = np.log([b for _, b in usable])
            exponents[label] = float(np.polyfit(x, y, 1)[0])
    return HypothesisReport(
        hypothesis="2",
        rows=rows,
        metadata={
            "seed": base_seed,
            "samples": samples,
            "spec": spec_fingerprint(spec),
            "bias_decay_exponents": exponents,
        },
    )


# ---------------------------------------------------------------------
# Hypothesis 3: concentration at scale n^2
# ---------------------------------------------------------------------


def concentration_report(
    spec: ModelSpec,
    p,
    k_list,
    samples,
    base_seed=0,
    eps_grid=(0.02, 0.05, 0.1),
    slope_range=(-2.6, -1.4),
    jobs=1,
):
    """Variance scaling of the trace observable tau_n(p(X)).

    Fits the slope of log Var against log n; n^2-scale concentration
    predicts a slope near -2 for Lipschitz observables.  Also reports
    the empirical tail frequencies P(|tr p - mean| > eps) per scale and
    checks they do not grow when n doubles (beyond sampling noise).  A
    deterministic observable short-circuits to a degenerate pass with
    exactly zero variance.
    """
    if len(k_list) < 3:
        raise InsufficientScales("need at least three scales for a slope")
    if samples < 50:
        raise ValueError("need at least 50 samples per scale")
    rows = []
    if is_deterministic_observable(p):
        for k in k_list:
            plan = spec.plan(k)
            rows.append(
                ReportRow(
                    hypothesis="3",
                    label="variance",
                    k=k,
                    n=plan.n,
                    estimate=0.0,
                    stderr=0.0,
                    oracle=0.0,
                    tol=None,
                    passed=True,
                    note="deterministic observable; degenerate pass",
                )
            )
        return HypothesisReport(
            hypothesis="3",
            rows=rows,
            metadata={"seed": base_seed, "samples": samples, "degenerate": True},
        )

    ns, variances = [], []
    tails = {eps: [] for eps in eps_grid}
    for k in k_list:
        plan = spec.plan(k)
        traces = collect_traces(spec, [("p", p)], k, samples, base_seed, jobs)["p"]
        mean = traces.mean()
        dev = np.abs(traces - mean)
        var = float((dev**2).sum() / (samples - 1))
        m4 = float((dev**4).mean())
        var_se = float(np.sqrt(max(m4 - var**2, 0.0) / samples))
        ns.append(plan.n)
        variances.append(var)
        rows.append(
            ReportRow(
                hypothesis="3",
                label="variance",
                k=k,
                n=plan.n,
                estimate=var,
                stderr=var_se,
                oracle=None,
                tol=None,
                passed=True,
                note="per-scale variance of tr p(X)",
            )
        )
        for eps in eps_grid:
            freq = float((dev > eps).mean())
            tails[eps].append(freq)
            rows.append(
                ReportRow(
                    hypothesis="3",
                    label=f"tail eps={eps:g}",
                    k=k,
                    n=plan.n,
                    estimate=freq,
                    stderr=float(np.sqrt(freq * (1 - freq) / samples)),
                    oracle=None,
                    tol=None,
                    passed=True,
                    note="P(|tr p - mean| > eps)",
                )
            )

    x = np.log(ns)
    y = np.log(variances)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    denom = float(((x - x.mean()) ** 2).sum())
    slope_se = float(np.sqrt(resid @ resid / max(len(x) - 2, 1) / denom))
    rows.append(
        ReportRow(
            hypothesis="3",
            label="slope",
            k=k_list[-1],
            n=ns[-1],
            estimate=float(slope),
            stderr=slope_se,
            oracle=-2.0,
            tol=None,
            passed=slope_range[0] <= slope <= slope_range[1],
            note=f"log Var vs log n; target interval [{slope_range[0]}, {slope_range[1]}]",
        )
    )
    for eps, freqs in tails.items():
        noise = [
            2 * np.sqrt(max(f * (1 - f), 0.0) / samples) + 2.0 / samples for f in freqs
        ]
        monotone = all(
            freqs[i + 1] <= freqs[i] + noise[i] + noise[i + 1]
            for i in range(len(freqs) - 1)
        )
        rows.append(
            ReportRow(
                hypothesis="3",
                label=f"tail-trend eps={eps:g}",
                k=k_list[-1],
                n=ns[-1],
                estimate=freqs[-1],
                stderr=0.0,
                oracle=None,
                tol=None,
                passed=monotone,
                note="tail frequency never grows with n beyond noise",
            )
        )
    return HypothesisReport(
        hypothesis="3",
        rows=rows,
        metadata={
            "seed": base_seed,
            "samples": samples,
            "spec": spec_fingerprint(spec),
            "slope": float(slope),
            "slope_stderr": slope_se,
            "slope_interval_2se": [float(slope - 2 * slope_se), float(slope + 2 * slope_se)],
        },
    )


# ---------------------------------------------------------------------
# Hypothesis 4: external averaging
# ---------------------------------------------------------------------


def external_averaging_report(
    spec: ModelSpec,
    polys,
    k_list,
    samples,
    base_seed=0,
    oracle=None,
    target=1,
    tol=0.1,
    jobs=1,
):
    """|| (1/S) sum_s p(X_s) ||_2 against the oracle conditional norm.

    The Monte Carlo side estimates the 2-norm of the classical
    expectation; the oracle side is the doubled-word conditional norm
    onto the target factor.  A row passes when the difference is within
    tol."""
    polys = _labeled(polys)
    oracle = oracle if oracle is not None else spec.oracle()
    rows = []
    for k in k_list:
        plan = spec.plan(k)
        means = mean_matrices(spec, polys, k, samples, base_seed, jobs)
        for label, p in polys:
            mc = hs_norm2(means[label])
            target_val = oracle.cond_exp_norm(p, target)
            rows.append(
                ReportRow(
                    hypothesis="4",
                    label=label,
                    k=k,
                    n=plan.n,
                    estimate=mc,
                    stderr=0.0,
                    oracle=target_val,
                    tol=tol,
                    passed=abs(mc - target_val) <= tol,
                    note="||E[p(X)]||_2 vs conditional norm",
                )
            )
    return HypothesisReport(
        hypothesis="4",
        rows=rows,
        metadata={"seed": base_seed, "samples": samples, "spec": spec_fingerprint(spec)},
    )


# ---------------------------------------------------------------------
# Collapse criterion
# ---------------------------------------------------------------------


@dataclass
class CollapseResult:
    estimator: EstimatorResult
    oracle: float
    collapses: bool
    oracle_zero: bool
    consistent: bool

    @property
    def verdict(self):
        return "collapses" if self.collapses else "spreads"


def collapse_test(
    spec: ModelSpec,
    p,
    k,
    samples,
    base_seed=0,
    oracle=None,
    tol=0.1,
    target=1,
    jobs=1,
):
    """Distance of p(X) from the best deterministic matrix (its mean).

    Estimates E||p(X) - E p(X)||_2^2 in two passes over the same derived
    samples (mean first, then deviations) and compares with the oracle
    Pythagoras value tau(p*p) - ||E[p]||_2^2.  The verdict 'collapses'
    means the estimate is below tol, which the oracle predicts exactly
    when p lies in the target factor."""
    oracle_obj = oracle if oracle is not None else spec.oracle()
    pp = oracle_obj.poly_moment(p.adjoint() * p).real
    ce = oracle_obj.cond_exp_norm(p, target)
    oracle_val = max(pp - ce**2, 0.0)
    plan = spec.plan(k)

    if is_deterministic_observable(p):
        est = EstimatorResult(value=0.0, stderr=0.0, samples=samples, k=k, n=plan.n)
        return CollapseResult(
            estimator=est,
            oracle=oracle_val,
            collapses=True,
            oracle_zero=oracle_val <= 1e-12,
            consistent=oracle_val <= tol,
        )

    mean = mean_matrices(spec, [("p", p)], k, samples, base_seed, jobs)["p"]

    def work(mt):
        return hs_norm2(poly_matrix(p, mt) - mean) ** 2

    dists = np.array(list(_per_sample(spec, k, samples, base_seed, work, jobs)))
    value, se = _mean_stderr(dists)
    value = float(value.real)
    est = EstimatorResult(value=value, stderr=se, samples=samples, k=k, n=plan.n)
    return CollapseResult(
        estimator=est,
        oracle=oracle_val,
        collapses=value <= tol,
        oracle_zero=oracle_val <= 1e-12,
        consistent=abs(value - oracle_val) <= max(tol, 4 * se),
    )
