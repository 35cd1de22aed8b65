"""Walkthrough: what the classical expectation of the model knows.

Three related phenomena for the model (X deterministic, Y conjugated):

* external averaging: ||E[p(X,Y)]||_2 converges to the norm of the
  conditional expectation of p onto the first factor;
* collapse: p(X,Y) is close to a deterministic matrix exactly when the
  oracle says p lives in the first factor;
* concentration: the variance of tr p decays like n^-2.
"""

import numpy as np

from freebench import (
    ModelSpec,
    NcPolynomial,
    SeededGue,
    collapse_test,
    concentration_report,
    external_averaging_report,
)

spec = ModelSpec(factor1=SeededGue(1, seed=21), factor2=SeededGue(1, seed=22))
oracle = spec.oracle()
s1 = NcPolynomial.generator(1)
s2 = NcPolynomial.generator(2)

print("== external averaging ==")
polys = [
    ("s1", s1),
    ("s1 s2", s1 * s2),
    ("s1 s2^2 s1", s1 * s2**2 * s1),
]
rep = external_averaging_report(spec, polys, [256], 150, base_seed=7, oracle=oracle, tol=0.1)
for row in rep.rows:
    print(
        f"  ||E[{row.label}]||_2 = {row.estimate.real:.4f}"
        f"   oracle {row.oracle.real:.4f}   {'ok' if row.passed else 'off'}"
    )

print("\n== collapse ==")
for label, p in [("s1 (deterministic)", s1), ("s2 (conjugated)", s2), ("s2^2 - 1", s2**2 - 1)]:
    res = collapse_test(spec, p, 256, 150, base_seed=7, oracle=oracle, tol=0.1)
    print(
        f"  E||{label} - mean||^2 = {res.estimator.value:.4f}"
        f"   oracle {res.oracle:.4f}   verdict: {res.verdict}"
    )

print("\n== concentration: variance scaling of tr(s1 s2) ==")
rep = concentration_report(spec, s1 * s2, [64, 128, 256, 512], 100, base_seed=7)
for row in rep.rows:
    if row.label == "variance":
        print(f"  n = {row.n:>4}   Var[tr p] = {row.estimate.real:.3e}")
slope = rep.metadata["slope"]
print(f"  fitted slope of log Var vs log n: {slope:.3f}  (n^-2 scaling predicts -2)")
