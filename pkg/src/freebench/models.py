"""Random matrix models for free products over an atomic amalgam.

The model ties together three pieces:

1. deterministic microstates for the first factor,
2. deterministic microstates for the second factor, conjugated by a
   Haar unitary drawn from the commutant of the embedded amalgam,
3. the embedded amalgam's central projections as factor-0 letters.

For a scalar amalgam the commutant is the full unitary group and the
model reduces to plain Haar conjugation; that is the classical recipe
whose mixed moments converge to the free product of the factor laws.
With a nontrivial abelian amalgam, the commutant unitary is block
diagonal and the limit is the amalgamated free product.

Microstate recipes:

* ``QuantileDiagonal(law)``: the diagonal matrix of the law's quantiles
  at midpoints (t+1/2)/n, sorted ascending.
* ``DTensorAbelian(law)``: the quantile diagonal of the law placed in
  the commutant coordinates of each block, so the microstate commutes
  with the embedded amalgam and jointly converges to "amalgam tensor
  one discrete generator".
* ``SeededGue(count, seed)``: `count` independent GUE matrices from a
  fixed seed.  The seed is part of the recipe, so the "deterministic"
  microstate is reproducible; a GUE sample at desk scale stands in for
  a certified microstate of a semicircular family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atomic import AtomicAlgebra, BlockPlan, block_plan, embed
from .moments import DiscreteSelfAdjoint, MomentOracle, SemicircularFamily
from .ncpoly import GenId, MatrixTuple
from .seeds import derive_seed


class RecipeAmalgamMismatch(ValueError):
    """The microstate recipe is inconsistent with the amalgam."""


def haar_unitary(n, rng):
    """Exact Haar unitary: QR of a complex Ginibre matrix with the
    R-diagonal phase correction (columns divided by R_ii/|R_ii|)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_commutant_unitary(plan: BlockPlan, rng):
    """Haar unitary from the commutant of the embedded amalgam.

    Within the band of block j the commutant is "identity of size r(j)
    tensor an m(j,k) x m(j,k) matrix", so the sample is the direct sum
    over blocks of kron(U_j, I_{r(j)}) with independent Haar U_j.
    Blocks with zero multiplicity contribute nothing; 1x1 unitary
    factors are uniform phases.
    """
    out = np.zeros((plan.n, plan.n), dtype=np.complex128)
    pos = 0
    for (r, _), mj in zip(plan.algebra.blocks, plan.m):
        if mj == 0:
            continue
        u = haar_unitary(mj, rng)
        band = r * mj
        out[pos : pos + band, pos : pos + band] = np.kron(u, np.eye(r))
        pos += band
    return out


def quantile_diagonal(law: DiscreteSelfAdjoint, n):
    """Diagonal entries: quantiles of the law at midpoints (t+1/2)/n, ascending."""
    atoms = sorted(law.atoms)
    values = np.array([v for v, _ in atoms])
    cum = np.cumsum([w for _, w in atoms])
    mids = (np.arange(n) + 0.5) / n
    idx = np.searchsorted(cum, mids, side="left")
    idx = np.minimum(idx, len(values) - 1)
    return values[idx]


def gue_matrix(n, rng):
    """Normalized GUE: Hermitian with entry variance 1/n, so the spectral
    distribution approaches the semicircle on [-2, 2] and tr X^2 -> 1."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / np.sqrt(4.0 * n)


# ---------------------------------------------------------------------
# Microstate recipes
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class QuantileDiagonal:
    """One generator: the quantile diagonal of a discrete law (scalar amalgam)."""

    law: DiscreteSelfAdjoint

    count = 1

    def norm_bound(self):
        return max(abs(v) for v, _ in self.law.atoms)


@dataclass(frozen=True)
class DTensorAbelian:
    """One generator commuting with the amalgam: per block, the law's
    quantile diagonal in the commutant coordinates."""

    law: DiscreteSelfAdjoint

    count = 1

    def norm_bound(self):
        return max(abs(v) for v, _ in self.law.atoms)


@dataclass(frozen=True)
class SeededGue:
    """`count` independent GUE generators from a fixed seed (scalar amalgam)."""

    count: int = 1
    seed: int = 0

    def norm_bound(self):
        # spectral edge 2 plus finite-n slack
        return 3.0


def compatible_microstate(recipe, plan: BlockPlan, factor):
    """Deterministic microstate tuple for one factor at the plan's scale."""
    n = plan.n
    scalar = plan.algebra.is_scalar
    if isinstance(recipe, QuantileDiagonal):
        if not scalar:
            raise RecipeAmalgamMismatch(
                "quantile-diagonal microstates need a scalar amalgam; "
                "use the block-commutant recipe instead"
            )
        return MatrixTuple({GenId(factor, 0): np.diag(quantile_diagonal(recipe.law, n))})
    if isinstance(recipe, DTensorAbelian):
        if scalar:
            return MatrixTuple(
                {GenId(factor, 0): np.diag(quantile_diagonal(recipe.law, n))}
            )
        out = np.zeros((n, n), dtype=np.complex128)
        pos = 0
        for (r, _), mj in zip(plan.algebra.blocks, plan.m):
            if mj == 0:
                continue
            band = r * mj
            q = np.diag(quantile_diagonal(recipe.law, mj))
            out[pos : pos + band, pos : pos + band] = np.kron(q, np.eye(r))
            pos += band
        return MatrixTuple({GenId(factor, 0): out})
    if isinstance(recipe, SeededGue):
        if not scalar:
            raise RecipeAmalgamMismatch("GUE microstates need a scalar amalgam")
        entries = {}
        for i in range(recipe.count):
            rng = np.random.default_rng(derive_seed(recipe.seed, "gue", i))
            entries[GenId(factor, i)] = gue_matrix(n, rng)
        return MatrixTuple(entries)
    raise TypeError(f"unknown microstate recipe {type(recipe).__name__}")


# ---------------------------------------------------------------------
# Model specification and sampling
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Declarative random matrix model: two factor recipes over an
    optional amalgam plus operator norm bounds per generator."""

    factor1: object
    factor2: object
    amalgam: AtomicAlgebra | None = None
    norm_bounds: dict | None = None

    def __post_init__(self):
        algebra = self.algebra()
        for recipe in (self.factor1, self.factor2):
            if isinstance(recipe, (QuantileDiagonal, SeededGue)) and not algebra.is_scalar:
                raise RecipeAmalgamMismatch(
                    f"{type(recipe).__name__} needs a scalar amalgam"
                )
            if isinstance(recipe, DTensorAbelian):
                if self.amalgam is None:
                    raise RecipeAmalgamMismatch(
                        "block-commutant diagonals need an explicit amalgam"
                    )
                if not algebra.is_abelian:
                    raise RecipeAmalgamMismatch(
                        "block-commutant diagonals need an abelian amalgam"
                    )

    def algebra(self):
        return self.amalgam if self.amalgam is not None else AtomicAlgebra.scalar()

    def plan(self, k):
        return block_plan(self.algebra(), k)

    def generators(self):
        """Generator ids of a sampled tuple: the two factors, plus the
        amalgam's projections when the amalgam is nontrivial."""
        gens = []
        algebra = self.algebra()
        if not algebra.is_scalar:
            gens.extend(GenId(0, j) for j in range(algebra.num_blocks))
        gens.extend(GenId(1, i) for i in range(self.factor1.count))
        gens.extend(GenId(2, i) for i in range(self.factor2.count))
        return gens

    def bound_for(self, g):
        g = GenId(*g)
        if self.norm_bounds and g in self.norm_bounds:
            return self.norm_bounds[g]
        if g.factor == 0:
            return 1.0
        recipe = self.factor1 if g.factor == 1 else self.factor2
        return recipe.norm_bound()

    def oracle(self, degree_cap=16):
        """The matching symbolic oracle: GUE recipes become semicircular
        families, diagonal recipes become their discrete laws."""
        factors = {
            1: _law_of(self.factor1),
            2: _law_of(self.factor2),
        }
        amalgam = None if self.algebra().is_scalar else self.algebra()
        return MomentOracle(factors, amalgam=amalgam, degree_cap=degree_cap)


def _law_of(recipe):
    if isinstance(recipe, SeededGue):
        return SemicircularFamily(recipe.count)
    if isinstance(recipe, (QuantileDiagonal, DTensorAbelian)):
        return recipe.law
    raise TypeError(f"unknown microstate recipe {type(recipe).__name__}")


def _conjugate(u, x):
    d = np.diagonal(x)
    if np.count_nonzero(x - np.diag(d)) == 0:
        return (u * d) @ u.conj().T  # diagonal x: skip one dense matmul
    return u @ x @ u.conj().T


def sample_model(spec: ModelSpec, k, rng):
    """One draw: factor-1 microstates as-is, factor-2 microstates
    conjugated by a single commutant Haar unitary, and the embedded
    projections for a nontrivial amalgam.  Hermiticity and operator
    norms are preserved by the conjugation."""
    plan = spec.plan(k)
    x1 = compatible_microstate(spec.factor1, plan, factor=1)
    x2 = compatible_microstate(spec.factor2, plan, factor=2)
    u = haar_commutant_unitary(plan, rng)
    conj = {g: _conjugate(u, x2[g]) for g in x2.generators()}
    entries = {g: x1[g] for g in x1.generators()}
    entries.update(conj)
    algebra = plan.algebra
    if not algebra.is_scalar:
        for j in range(algebra.num_blocks):
            entries[GenId(0, j)] = embed(algebra.central_projection(j), plan)
    return MatrixTuple(entries, dim=plan.n)
