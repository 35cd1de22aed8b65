"""Atomic block algebras and their matrix embeddings.

An atomic algebra is a finite direct sum of matrix blocks ``M_{r(j)}``
with positive trace weights ``gamma(j)`` summing to one.  For a scale
parameter ``k`` the block plan allocates ``m(j,k) = floor(k*gamma(j)/r(j))``
copies of block ``j``, for a total matrix dimension
``n(k) = sum_j r(j)*m(j,k) <= k``, and the block embedding ``embed``
repeats each block matrix ``m(j,k)`` times down the diagonal.  The
normalized matrix trace of an embedded element then converges to the
weighted block trace as ``k`` grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EmptyPlan(ValueError):
    """The scale k is too small: every block got multiplicity zero."""


@dataclass(frozen=True)
class AtomicAlgebra:
    """Finite direct sum of matrix blocks (r(j), gamma(j)).

    The weights must sum to 1 within 1e-12.  ``scalar()`` gives the
    trivial one-block algebra of 1x1 matrices, used for models with no
    amalgamation.
    """

    blocks: tuple

    def __post_init__(self):
        blocks = tuple((int(r), float(g)) for r, g in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise ValueError("an atomic algebra needs at least one block")
        for r, g in blocks:
            if r < 1:
                raise ValueError(f"block size must be >= 1, got {r}")
            if not g > 0:
                raise ValueError(f"block weight must be positive, got {g}")
        total = sum(g for _, g in blocks)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"block weights sum to {total!r}, expected 1")

    @staticmethod
    def scalar():
        return AtomicAlgebra(((1, 1.0),))

    @property
    def num_blocks(self):
        return len(self.blocks)

    @property
    def is_abelian(self):
        return all(r == 1 for r, _ in self.blocks)

    @property
    def is_scalar(self):
        return self.blocks == ((1, 1.0),)

    def weights(self):
        return np.array([g for _, g in self.blocks])

    def scalar_trace(self, vec):
        """Weighted sum over atoms: the trace of a diagonal element of
        an abelian algebra given componentwise."""
        vec = np.asarray(vec)
        if vec.shape != (self.num_blocks,):
            raise ValueError(f"expected {self.num_blocks} components, got {vec.shape}")
        return complex(np.dot(self.weights(), vec))

    def element(self, mats):
        return AtomicElement(self, tuple(np.asarray(m, dtype=np.complex128) for m in mats))

    def central_projection(self, j):
        """The central projection onto block j (identity there, zero elsewhere)."""
        mats = []
        for jj, (r, _) in enumerate(self.blocks):
            mats.append(np.eye(r) if jj == j else np.zeros((r, r)))
        return self.element(mats)

    def unit(self):
        return self.element([np.eye(r) for r, _ in self.blocks])

    def random_element(self, rng, hermitian=True):
        mats = []
        for r, _ in self.blocks:
            m = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
            if hermitian:
                m = (m + m.conj().T) / 2
            mats.append(m)
        return self.element(mats)


@dataclass(frozen=True)
class AtomicElement:
    """One matrix per block of an atomic algebra."""

    algebra: AtomicAlgebra
    mats: tuple

    def __post_init__(self):
        if len(self.mats) != self.algebra.num_blocks:
            raise ValueError("block count does not match the algebra")
        for (r, _), m in zip(self.algebra.blocks, self.mats):
            if m.shape != (r, r):
                raise ValueError(f"block of shape {m.shape}, expected ({r},{r})")

    def __mul__(self, other):
        if isinstance(other, AtomicElement):
            return self.algebra.element([a @ b for a, b in zip(self.mats, other.mats)])
        return self.algebra.element([other * a for a in self.mats])

    __rmul__ = __mul__

    def __add__(self, other):
        return self.algebra.element([a + b for a, b in zip(self.mats, other.mats)])

    def adjoint(self):
        return self.algebra.element([a.conj().T for a in self.mats])

    def trace(self):
        """The weighted trace: sum_j gamma(j) * tr_{r(j)}(z_j)."""
        return sum(
            g * complex(np.trace(m)) / r
            for (r, g), m in zip(self.algebra.blocks, self.mats)
        )

    def block_norms(self):
        return [float(np.linalg.norm(m, 2)) for m in self.mats]


@dataclass(frozen=True)
class BlockPlan:
    """Multiplicities m(j,k) and total dimension n(k) for one scale k."""

    algebra: AtomicAlgebra
    k: int
    m: tuple
    n: int

    def offsets(self):
        """Start offset of each block's band of the big matrix (m(j,k)=0
        blocks get a zero-width band)."""
        offs = []
        pos = 0
        for (r, _), mj in zip(self.algebra.blocks, self.m):
            offs.append(pos)
            pos += r * mj
        return offs


def block_plan(algebra: AtomicAlgebra, k) -> BlockPlan:
    """Allocate block multiplicities for scale k.

    m(j,k) = floor(k*gamma(j)/r(j)) and n(k) = sum_j r(j)*m(j,k), so
    n(k) <= k and r(j)*m(j,k)/n(k) -> gamma(j).  Raises EmptyPlan when
    every block gets multiplicity zero.
    """
    k = int(k)
    if k < 1:
        raise ValueError(f"scale k must be >= 1, got {k}")
    m = tuple(int(np.floor(k * g / r)) for r, g in algebra.blocks)
    n = sum(r * mj for (r, _), mj in zip(algebra.blocks, m))
    if n == 0:
        raise EmptyPlan(f"k={k} is too small for every block of {algebra.blocks}")
    return BlockPlan(algebra=algebra, k=k, m=m, n=n)


def embed(z: AtomicElement, plan: BlockPlan):
    """Block embedding: repeat block j down the diagonal m(j,k) times.

    A unital *-homomorphism into the n(k) x n(k) matrices; blocks with
    m(j,k) = 0 are dropped.
    """
    if z.algebra != plan.algebra:
        raise ValueError("element and plan come from different algebras")
    out = np.zeros((plan.n, plan.n), dtype=np.complex128)
    pos = 0
    for (r, _), mj, mat in zip(plan.algebra.blocks, plan.m, z.mats):
        for _ in range(mj):
            out[pos : pos + r, pos : pos + r] = mat
            pos += r
    return out


def embedded_trace(z: AtomicElement, plan: BlockPlan):
    """Normalized trace of the embedding, sum_j (r*m/n) tr_r(z_j), without
    building the big matrix."""
    return sum(
        (r * mj / plan.n) * complex(np.trace(mat)) / r
        for (r, _), mj, mat in zip(plan.algebra.blocks, plan.m, z.mats)
    )
