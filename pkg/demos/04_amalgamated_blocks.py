"""Walkthrough: the block model for amalgamation over an atomic algebra.

An atomic algebra embeds into matrices by repeating each block along
the diagonal; the randomizing unitary is Haar on the commutant of that
embedding, so the amalgam stays pointwise fixed.  Mixed moments of
(X1, U X2 U*, projections) converge to the amalgamated free product.
"""

import itertools

import numpy as np

from freebench import (
    AtomicAlgebra,
    DiscreteSelfAdjoint,
    DTensorAbelian,
    GenId,
    ModelSpec,
    NcPolynomial,
    block_plan,
    embed,
    haar_commutant_unitary,
    hs_norm2,
    normalized_trace,
)
from freebench.verify import collect_traces

# the amalgam: two atoms of weight 1/2 (the diagonal subalgebra of 2x2)
D = AtomicAlgebra(((1, 0.5), (1, 0.5)))
print("amalgam blocks:", D.blocks)

# block plans allocate floor(k * weight / size) copies of each block
for k in (10, 100, 256):
    plan = block_plan(D, k)
    print(f"  k = {k:>4}: multiplicities {plan.m}, total dimension n(k) = {plan.n}")

# the embedded projections and a commutant Haar unitary
plan = block_plan(D, 8)
e0 = embed(D.central_projection(0), plan)
print("\nembedded projection onto atom 0 (k = 8):")
print(np.real(e0).astype(int))
u = haar_commutant_unitary(plan, np.random.default_rng(1))
print(f"commutator with the embedding: {hs_norm2(u @ e0 - e0 @ u):.2e}")

# the full model: both factors are "amalgam tensor a symmetric +-1 law"
pm1 = DiscreteSelfAdjoint.symmetric_pm1()
spec = ModelSpec(factor1=DTensorAbelian(pm1), factor2=DTensorAbelian(pm1), amalgam=D)
oracle = spec.oracle()

letters = {"e": GenId(0, 0), "a": GenId(1, 0), "b": GenId(2, 0)}
print("\nmixed moments at n(k) = 256, 100 draws (e = projection, a, b = the factors)")
print(f"  {'word':<10} {'MC mean':>10} {'oracle':>10}")
for symbols in itertools.chain(
    itertools.product("ab", repeat=2),
    [("e", "a"), ("a", "e", "b"), ("a", "b", "a", "b"), ("e", "a", "b", "a")],
):
    word = tuple(letters[s] for s in symbols)
    p = NcPolynomial({word: 1.0})
    traces = collect_traces(spec, [("w", p)], 256, 100, base_seed=99)["w"]
    target = oracle.moment(word).real
    print(f"  {' '.join(symbols):<10} {traces.mean().real:>10.4f} {target:>10.4f}")

# the oracle reports algebra-valued expectations componentwise per atom
vec = oracle.amalgamated_moment((letters["e"], letters["a"], letters["a"]))
print(f"\nE_D[e a^2] componentwise: {np.real(vec)}  (projection mask times tau(a^2))")
