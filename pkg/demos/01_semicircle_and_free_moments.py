"""Walkthrough: the symbolic moment oracle.

Moments of a standard semicircular element, a quadrature cross-check,
and mixed moments of free elements via the centering recursion.
"""

import numpy as np

from freebench import (
    DiscreteSelfAdjoint,
    MomentOracle,
    NcPolynomial,
    SemicircularFamily,
    catalan,
    semicircle_density_moment,
)

s1 = NcPolynomial.generator(1)
s2 = NcPolynomial.generator(2)

# One standard semicircular element: even moments are Catalan numbers.
oracle = MomentOracle({1: SemicircularFamily(1)})
print("even moments of a standard semicircular element")
print(f"{'2m':>4} {'oracle':>10} {'catalan':>10} {'quadrature':>14}")
for m in range(7):
    sym = oracle.poly_moment(s1 ** (2 * m)).real
    quad = semicircle_density_moment(2 * m)
    print(f"{2*m:>4} {sym:>10.1f} {catalan(m):>10} {quad:>14.10f}")

# Two free semicircular elements: their sum is semicircular of variance 2,
# so its 2m-th moment is 2^m * catalan(m).
free_pair = MomentOracle({1: SemicircularFamily(1), 2: SemicircularFamily(1)})
print("\nmoments of s1 + s2 (free, each standard)")
for m in range(1, 5):
    val = free_pair.poly_moment((s1 + s2) ** (2 * m)).real
    print(f"  tau((s1+s2)^{2*m}) = {val:.1f}   expected {2**m * catalan(m)}")

# The alternating word s1 s2 s1 s2 has moment zero: the only pairings
# that match generator labels are crossing.
print(f"\ntau(s1 s2 s1 s2) = {free_pair.poly_moment(s1*s2*s1*s2).real:.1f}")

# Freeness determines every mixed moment from the factor moments.  For
# single self-adjoint elements x, y with discrete spectra:
#   tau(xyxy) = tau(x^2) tau(y)^2 + tau(x)^2 tau(y^2) - tau(x)^2 tau(y)^2
law_x = DiscreteSelfAdjoint(((0.0, 0.3), (2.0, 0.7)))
law_y = DiscreteSelfAdjoint(((-1.0, 0.4), (3.0, 0.6)))
o = MomentOracle({1: law_x, 2: law_y})
x = NcPolynomial.generator(1)
y = NcPolynomial.generator(2)


def mom(law, p):
    return sum(w * v**p for v, w in law.atoms)


lhs = o.poly_moment(x * y * x * y).real
rhs = (
    mom(law_x, 2) * mom(law_y, 1) ** 2
    + mom(law_x, 1) ** 2 * mom(law_y, 2)
    - mom(law_x, 1) ** 2 * mom(law_y, 1) ** 2
)
print(f"\ntau(xyxy) by the centering recursion: {lhs:.10f}")
print(f"tau(xyxy) by the closed formula:      {rhs:.10f}")
print(f"difference: {abs(lhs - rhs):.2e}")

# Conditional expectation onto the first factor, two routes: project the
# polynomial, or square via a ghost copy of the second factor.
p = s1 * s2**2 * s1
projected = free_pair.cond_exp_onto_factor(p, 1)
print(f"\nE[s1 s2^2 s1 | first factor] = {projected}")
print(f"norm via projection:  {free_pair.poly_norm2(projected):.6f}")
print(f"norm via ghost copy:  {free_pair.cond_exp_norm(p, 1):.6f}  (= sqrt(2))")
print(f"reference sqrt(2)   = {np.sqrt(2):.6f}")
