"""Exact symbolic moments for free products, with and without amalgamation.

The oracle assigns a base law to each free factor and computes mixed
moments by the centering recursion: group a word into maximal
same-factor blocks, subtract the trace from each block, and use the
fact that an alternating product of centered elements has trace zero.
Expanding the product ``prod_t (b_t - tau(b_t))`` and solving for the
full moment gives

    tau(b_1 ... b_m) = - sum_{S nonempty} (-1)^{|S|}
                         prod_{t in S} tau(b_t) * tau(merge(rest)),

where removing the blocks in S merges adjacent same-factor neighbors,
so every term strictly shortens the word.  Results are memoized on the
canonical block sequence.

Base laws:

* ``SemicircularFamily(count)``: ``count`` standard semicircular
  generators, free within their factor.  A word's moment counts the
  noncrossing pair partitions whose pairs connect equal generator
  indices.
* ``DiscreteSelfAdjoint(atoms)``: one self-adjoint generator with an
  atomic spectral distribution; the moment of a power is the weighted
  power sum of the atoms.
* ``MatrixBlock(blocks)``: the central projections of an atomic block
  algebra; distinct projections multiply to zero.

Amalgamation is supported for an abelian atomic algebra whose minimal
projections are central in every factor (factors of the structured form
"algebra tensor one abelian discrete generator").  In that case the
algebra-valued expectation of a word factors into a projection mask
times the scalar centering recursion applied to the non-projection
letters, and the result is reported componentwise per atom.

Conditional expectations onto one free factor come in two routes: the
norm via the doubled-word identity ``||E[p]||_2^2 = tau(p^* p~)`` where
``p~`` replaces the non-target generators by an independent ghost copy,
and the polynomial itself via the same centering recursion with a leaf
rule that keeps pure target words and scalarizes everything else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atomic import AtomicAlgebra
from .ncpoly import GenId, NcPolynomial, word_adjoint


class ForeignLetter(ValueError):
    """A word handed to a base law references another factor."""


class MissingFactorLaw(KeyError):
    """A word references a factor the oracle has no law for."""


class DegreeLimitExceeded(ValueError):
    """Word length above the configured cap for the centering expansion."""


class UnsupportedAmalgam(ValueError):
    """Amalgamated moments need an abelian atomic amalgam and discrete factors."""


class OracleError(RuntimeError):
    """Internal inconsistency, e.g. a squared norm that is genuinely negative."""


# ---------------------------------------------------------------------
# Base laws
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class SemicircularFamily:
    """A family of `count` free standard semicircular generators."""

    count: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class DiscreteSelfAdjoint:
    """One self-adjoint generator with atoms ((value, weight), ...)."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(v), float(w)) for v, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("need at least one atom")
        for _, w in atoms:
            if not w > 0:
                raise ValueError("atom weights must be positive")
        total = sum(w for _, w in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"atom weights sum to {total!r}, expected 1")

    def power_moment(self, p):
        if p == 0:
            return 1.0
        return float(sum(w * v**p for v, w in self.atoms))

    @staticmethod
    def symmetric_pm1():
        return DiscreteSelfAdjoint(((-1.0, 0.5), (1.0, 0.5)))


@dataclass(frozen=True)
class MatrixBlock:
    """Central projections of an atomic block algebra as generators.

    Generator index j is the projection onto block j; the moment of a
    word is gamma(j) when every letter equals j and zero otherwise.
    """

    blocks: tuple

    @staticmethod
    def of(algebra: AtomicAlgebra):
        return MatrixBlock(algebra.blocks)


def _pairing_moment(indices, memo):
    """Number of noncrossing pair partitions pairing equal indices."""
    if not indices:
        return 1.0
    if len(indices) % 2:
        return 0.0
    val = memo.get(indices)
    if val is not None:
        return val
    total = 0.0
    first = indices[0]
    for t in range(1, len(indices), 2):
        if indices[t] == first:
            total += _pairing_moment(indices[1:t], memo) * _pairing_moment(
                indices[t + 1 :], memo
            )
    memo[indices] = total
    return total


def base_moment(law, word):
    """Moment of a single-factor word under its base law.

    The empty word gives 1.  Raises ForeignLetter when the word mixes
    factors or references an unknown generator index.
    """
    word = tuple(GenId(*g) for g in word)
    if not word:
        return 1.0 + 0.0j
    factor = word[0].factor
    if any(g.factor != factor for g in word):
        raise ForeignLetter(f"word {word} mixes factors")
    if isinstance(law, SemicircularFamily):
        for g in word:
            if not 0 <= g.index < law.count:
                raise ForeignLetter(f"semicircular index {g.index} out of range")
        return complex(_pairing_moment(tuple(g.index for g in word), {}))
    if isinstance(law, DiscreteSelfAdjoint):
        for g in word:
            if g.index != 0:
                raise ForeignLetter("discrete law has a single generator, index 0")
        return complex(law.power_moment(len(word)))
    if isinstance(law, MatrixBlock):
        j = word[0].index
        if not 0 <= j < len(law.blocks):
            raise ForeignLetter(f"projection index {j} out of range")
        if any(g.index != j for g in word):
            return 0.0 + 0.0j
        return complex(law.blocks[j][1])
    raise TypeError(f"unknown base law {type(law).__name__}")


# ---------------------------------------------------------------------
# The oracle
# ---------------------------------------------------------------------


def _group_blocks(word):
    """Canonical block form: maximal runs of same-factor letters."""
    blocks = []
    for g in word:
        if blocks and blocks[-1][0] == g.factor:
            blocks[-1] = (g.factor, blocks[-1][1] + (g,))
        else:
            blocks.append((g.factor, (g,)))
    return tuple(blocks)


def _merge_blocks(blocks):
    out = []
    for f, w in blocks:
        if out and out[-1][0] == f:
            out[-1] = (f, out[-1][1] + w)
        else:
            out.append((f, w))
    return tuple(out)


class MomentOracle:
    """Symbolic trace functional for a free product of base laws.

    `factors` maps factor labels (positive integers) to base laws.  An
    optional abelian atomic `amalgam` occupies factor 0; its minimal
    projections are the factor-0 generators.  Queries are memoized on
    canonical words; after construction the caches only grow, and
    duplicate concurrent computation is harmless because results are
    identical, so moment queries are safe from multiple threads.
    """

    def __init__(self, factors, amalgam=None, degree_cap=16):
        self.factors = {int(f): law for f, law in factors.items()}
        for f in self.factors:
            if f <= 0:
                raise ValueError("factor labels must be positive; 0 is the amalgam")
        self.amalgam = amalgam
        self.degree_cap = int(degree_cap)
        self._memo = {}
        self._dvec_memo = {}

    # -- helpers -------------------------------------------------------

    def _law(self, factor):
        law = self.factors.get(factor)
        if law is None:
            raise MissingFactorLaw(factor)
        return law

    def _check_cap(self, word):
        if len(word) > self.degree_cap:
            raise DegreeLimitExceeded(
                f"word of length {len(word)} exceeds cap {self.degree_cap}"
            )

    def _block_trace(self, factor, word):
        if factor == 0:
            if self.amalgam is None:
                raise MissingFactorLaw(0)
            return base_moment(MatrixBlock.of(self.amalgam), word)
        return base_moment(self._law(factor), word)

    # -- scalar free product ---------------------------------------------

    def free_product_moment(self, word):
        """tau of a word in the free product of the factor laws over C."""
        word = tuple(GenId(*g) for g in word)
        self._check_cap(word)
        for g in word:
            self._law(g.factor)
        return self._mixed(_group_blocks(word))

    def _mixed(self, blocks):
        m = len(blocks)
        if m == 0:
            return 1.0 + 0.0j
        if m == 1:
            return self._block_trace(*blocks[0])
        cached = self._memo.get(blocks)
        if cached is not None:
            return cached
        traces = [self._block_trace(f, w) for f, w in blocks]
        total = 0.0 + 0.0j
        for mask in range(1, 1 << m):
            coeff = 1.0 + 0.0j
            rest = []
            dead = False
            for t in range(m):
                if mask >> t & 1:
                    coeff *= traces[t]
                    if coeff == 0:
                        dead = True
                        break
                else:
                    rest.append(blocks[t])
            if dead:
                continue
            sign = 1.0 if bin(mask).count("1") % 2 else -1.0
            total += sign * coeff * self._mixed(_merge_blocks(tuple(rest)))
        self._memo[blocks] = total
        return total

    def moment(self, word):
        """Scalar trace of a word, dispatching on the amalgam."""
        word = tuple(GenId(*g) for g in word)
        if self.amalgam is None:
            return self.free_product_moment(word)
        if self.amalgam.is_scalar:
            # the single projection of a scalar amalgam is the unit
            for g in word:
                if g.factor == 0 and g.index != 0:
                    raise ForeignLetter(f"projection index {g.index} out of range")
            return self.free_product_moment(tuple(g for g in word if g.factor != 0))
        return self.amalgam.scalar_trace(self.amalgamated_moment(word))

    def poly_moment(self, p):
        """tau(p): coefficient-weighted sum of word moments."""
        p = p if isinstance(p, NcPolynomial) else NcPolynomial({(): p})
        return sum((c * self.moment(w) for w, c in p.terms.items()), 0.0 + 0.0j)

    def poly_norm2(self, p):
        """||p||_2 = tau(p* p)^{1/2} through the oracle."""
        val = self.poly_moment(p.adjoint() * p)
        return float(np.sqrt(max(0.0, val.real)))

    # -- amalgamated moments ----------------------------------------------

    def _require_structured_amalgam(self):
        if self.amalgam is None:
            raise UnsupportedAmalgam("oracle has no amalgam")
        if not self.amalgam.is_abelian:
            raise UnsupportedAmalgam(
                "amalgamated moments are implemented for abelian atomic amalgams only"
            )
        for f, law in self.factors.items():
            if not isinstance(law, DiscreteSelfAdjoint):
                raise UnsupportedAmalgam(
                    f"factor {f} is not of the structured discrete form"
                )

    def amalgamated_moment(self, word):
        """Algebra-valued expectation of a word, componentwise per atom.

        With the amalgam's projections central in every structured
        factor, the projection letters of the word factor out into a
        componentwise mask, and the expectation of the remaining
        letters is scalar, so the recursion runs with vector arithmetic
        that is constant across unmasked atoms.
        """
        self._require_structured_amalgam()
        word = tuple(GenId(*g) for g in word)
        self._check_cap(word)
        num = self.amalgam.num_blocks
        key = word
        cached = self._dvec_memo.get(key)
        if cached is not None:
            return cached.copy()
        mask = np.ones(num)
        rest = []
        for g in word:
            if g.factor == 0:
                if not 0 <= g.index < num:
                    raise ForeignLetter(f"projection index {g.index} out of range")
                keep = np.zeros(num)
                keep[g.index] = 1.0
                mask = mask * keep
            else:
                self._law(g.factor)
                rest.append(g)
        if np.all(mask == 0):
            vec = np.zeros(num, dtype=np.complex128)
        else:
            scalar = self._mixed(_group_blocks(tuple(rest)))
            vec = mask.astype(np.complex128) * scalar
        self._dvec_memo[key] = vec
        return vec.copy()

    def amalgamated_scalar_trace(self, word):
        """tau(word) = sum_j gamma(j) * component_j of the expectation."""
        return self.amalgam.scalar_trace(self.amalgamated_moment(word))

    # -- conditional expectation onto a factor ----------------------------

    def _ghost_labels(self, target):
        offset = max(self.factors) + 1
        return {f: f + offset for f in self.factors if f != target}

    def cond_exp_norm(self, p, target):
        """||E[p]||_2 for the expectation onto one free factor.

        Uses the doubled-word identity: adjoin an independent copy of
        every non-target factor, relabel the non-target generators of
        ``p`` into the copy to get ``p~``, and return
        ``sqrt(tau(p* p~))``, which equals the 2-norm of the
        conditional expectation of p onto the target factor.  Tiny
        negative real parts (above -1e-8) are clamped to zero; anything
        more negative signals an oracle bug and raises.
        """
        if target not in self.factors:
            raise MissingFactorLaw(target)
        if self.amalgam is not None and not self.amalgam.is_scalar:
            raise UnsupportedAmalgam(
                "conditional expectations are implemented over scalar amalgams"
            )
        ghosts = self._ghost_labels(target)
        tripled = MomentOracle(
            {**self.factors, **{ghosts[f]: self.factors[f] for f in ghosts}},
            degree_cap=2 * self.degree_cap,
        )
        relabeled = NcPolynomial(
            {
                tuple(
                    GenId(ghosts.get(g.factor, g.factor), g.index) for g in w
                ): c
                for w, c in p.terms.items()
            }
        )
        q = p.adjoint() * relabeled
        val = tripled.poly_moment(q)
        if val.real < -1e-8:
            raise OracleError(f"negative squared norm {val!r} from the doubled word")
        return float(np.sqrt(max(0.0, val.real)))

    def cond_exp_onto_factor(self, p, target):
        """E[p] as a polynomial over the target factor.

        Runs the centering recursion with the leaf rule: a pure target
        word passes through, a single non-target block is replaced by
        its trace.  The result r satisfies tau(r* q) = tau(p* q) for
        every target-factor polynomial q within the degree cap.
        """
        if target not in self.factors:
            raise MissingFactorLaw(target)
        if self.amalgam is not None and not self.amalgam.is_scalar:
            raise UnsupportedAmalgam(
                "conditional expectations are implemented over scalar amalgams"
            )
        out = NcPolynomial.zero()
        memo = {}
        for w, c in p.terms.items():
            self._check_cap(w)
            for g in w:
                self._law(g.factor)
            out = out + c * self._project(_group_blocks(tuple(GenId(*g) for g in w)), target, memo)
        return out

    def _project(self, blocks, target, memo):
        m = len(blocks)
        if m == 0:
            return NcPolynomial.one()
        if m == 1:
            f, w = blocks[0]
            if f == target:
                return NcPolynomial({w: 1.0})
            return NcPolynomial({(): self._block_trace(f, w)})
        cached = memo.get(blocks)
        if cached is not None:
            return cached
        traces = [self._block_trace(f, w) for f, w in blocks]
        total = NcPolynomial.zero()
        for mask in range(1, 1 << m):
            coeff = 1.0 + 0.0j
            rest = []
            dead = False
            for t in range(m):
                if mask >> t & 1:
                    coeff *= traces[t]
                    if coeff == 0:
                        dead = True
                        break
                else:
                    rest.append(blocks[t])
            if dead:
                continue
            sign = 1.0 if bin(mask).count("1") % 2 else -1.0
            total = total + (sign * coeff) * self._project(
                _merge_blocks(tuple(rest)), target, memo
            )
        memo[blocks] = total
        return total


def free_product_moment(oracle: MomentOracle, word):
    return oracle.free_product_moment(word)


def amalgamated_moment(oracle: MomentOracle, word):
    return oracle.amalgamated_moment(word)


def cond_exp_norm(oracle: MomentOracle, p, target):
    return oracle.cond_exp_norm(p, target)


def cond_exp_onto_factor(oracle: MomentOracle, p, target):
    return oracle.cond_exp_onto_factor(p, target)


def semicircle_density_moment(power, rtol=1e-10):
    """Numerical-integration cross-check of the semicircular moments:
    integral of t^power against (1/2pi) sqrt(4 - t^2) on [-2, 2]."""
    from scipy.integrate import quad

    val, _ = quad(
        lambda t: t**power * np.sqrt(4.0 - t * t) / (2.0 * np.pi),
        -2.0,
        2.0,
        epsabs=1e-13,
        epsrel=rtol,
    )
    return val


def catalan(m):
    """Catalan number C_m, the 2m-th moment of the standard semicircle."""
    from math import comb

    return comb(2 * m, m) // (m + 1)
