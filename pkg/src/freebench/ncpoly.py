"""Non-commutative *-polynomials over indexed self-adjoint generators.

A generator is identified by a pair ``(factor, index)``: factor ``0`` is
reserved for a common amalgam, factors ``1, 2, ...`` are free factors.
Words are finite sequences of generators, and a polynomial is a sparse
linear combination of words with complex coefficients.  Because the
generators are self-adjoint, the adjoint of a word is its reversal and
the adjoint of a polynomial conjugates coefficients and reverses words.

Evaluation substitutes an ``n x n`` Hermitian matrix for each generator,
giving the unique unital *-homomorphism into the matrix algebra.  The
module also provides the normalized trace, the associated 2-norm, and a
power-iteration operator norm.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

HERMITIAN_TOL = 1e-10


class MissingGenerator(KeyError):
    """A polynomial references a generator with no matrix assigned."""


class ShapeMismatch(ValueError):
    """Matrix tuples disagree in dimension or generator set."""


class NoConvergenceWarning(RuntimeWarning):
    """Power iteration hit its iteration cap; best estimate returned."""


class GenId(NamedTuple):
    """Label of one self-adjoint generator: (factor, index within factor)."""

    factor: int
    index: int

    def __str__(self):
        return f"f{self.factor}.g{self.index}"


Word = tuple  # tuple of GenId; the empty tuple is the unit


def word_adjoint(w):
    """Adjoint of a word: reversal (generators are self-adjoint)."""
    return tuple(reversed(w))


def word_str(w):
    return "1" if not w else " ".join(str(g) for g in w)


class NcPolynomial:
    """Sparse *-polynomial: a map from words to nonzero complex coefficients.

    Supports ``+``, ``-``, ``*`` (both polynomial and scalar), integer
    powers, and ``adjoint()``.  Zero coefficients are never stored, so
    equality and degree are structural.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Word, complex] | None = None):
        clean = {}
        if terms:
            for w, c in terms.items():
                c = complex(c)
                if c != 0:
                    clean[tuple(w)] = clean.get(tuple(w), 0) + c
        self.terms = {w: c for w, c in clean.items() if c != 0}

    # -- constructors ------------------------------------------------

    @staticmethod
    def zero():
        return NcPolynomial()

    @staticmethod
    def one():
        return NcPolynomial({(): 1.0})

    @staticmethod
    def generator(factor, index=0):
        """The monomial ``t`` for a single generator."""
        return NcPolynomial({(GenId(factor, index),): 1.0})

    @staticmethod
    def monomial(gens: Iterable[GenId], coeff=1.0):
        return NcPolynomial({tuple(GenId(*g) for g in gens): coeff})

    # -- algebra -----------------------------------------------------

    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0) + c
        return NcPolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return NcPolynomial({w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return NcPolynomial({w: c * other for w, c in self.terms.items()})
        other = _as_poly(other)
        out = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                w = w1 + w2
                out[w] = out.get(w, 0) + c1 * c2
        return NcPolynomial(out)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self * other
        return _as_poly(other) * self

    def __pow__(self, n):
        if n < 0:
            raise ValueError("negative powers are not defined")
        out = NcPolynomial.one()
        for _ in range(int(n)):
            out = out * self
        return out

    def adjoint(self):
        """Conjugate coefficients and reverse words; an involution."""
        return NcPolynomial(
            {word_adjoint(w): np.conj(c) for w, c in self.terms.items()}
        )

    # -- queries -----------------------------------------------------

    @property
    def degree(self):
        """Max word length; the zero polynomial has degree -1 by convention."""
        if not self.terms:
            return -1
        return max(len(w) for w in self.terms)

    def generators(self):
        """Set of GenIds appearing in any word."""
        out = set()
        for w in self.terms:
            out.update(w)
        return out

    def __eq__(self, other):
        if not isinstance(other, NcPolynomial):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for w in sorted(self.terms, key=lambda w: (len(w), w)):
            parts.append(f"({self.terms[w]:.6g})*{word_str(w)}")
        return " + ".join(parts)

    def isclose(self, other, tol=1e-12):
        diff = self - other
        return all(abs(c) <= tol for c in diff.terms.values())

    # -- serialization -----------------------------------------------

    def to_list(self):
        """Serialize as a list of (word, re, im) with words as [factor, index] pairs."""
        out = []
        for w in sorted(self.terms, key=lambda w: (len(w), w)):
            c = self.terms[w]
            out.append([[list(g) for g in w], float(c.real), float(c.imag)])
        return out

    @staticmethod
    def from_list(items):
        terms = {}
        for w, re, im in items:
            word = tuple(GenId(int(f), int(i)) for f, i in w)
            terms[word] = terms.get(word, 0) + complex(re, im)
        return NcPolynomial(terms)


def _as_poly(x):
    if isinstance(x, NcPolynomial):
        return x
    if isinstance(x, (int, float, complex)):
        return NcPolynomial({(): x})
    raise TypeError(f"cannot interpret {type(x).__name__} as a polynomial")


def nc_mul(p, q):
    """Bilinear word-concatenation product."""
    return _as_poly(p) * _as_poly(q)


def nc_adjoint(p):
    return _as_poly(p).adjoint()


# ---------------------------------------------------------------------
# Matrix tuples
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class NormBounds:
    """Operator norm bounds, one positive real per generator."""

    bounds: dict

    def __post_init__(self):
        for g, r in self.bounds.items():
            if not r > 0:
                raise ValueError(f"norm bound for {g} must be positive, got {r}")

    def __getitem__(self, g):
        return self.bounds[GenId(*g)]


class MatrixTuple:
    """An indexed tuple of n x n complex Hermitian matrices.

    Inputs are symmetrized ``M <- (M + M†)/2`` on ingestion; a correction
    larger than ``HERMITIAN_TOL`` in max-entry norm triggers a warning.
    Instances are immutable: the arrays are copies with the writeable
    flag cleared.
    """

    __slots__ = ("dim", "entries")

    def __init__(self, entries: Mapping, dim=None):
        fixed = {}
        for g, m in entries.items():
            g = GenId(*g)
            m = np.asarray(m, dtype=np.complex128)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ShapeMismatch(f"matrix for {g} is not square: {m.shape}")
            if dim is None:
                dim = m.shape[0]
            elif m.shape[0] != dim:
                raise ShapeMismatch(
                    f"matrix for {g} has dim {m.shape[0]}, expected {dim}"
                )
            defect = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
            if defect > HERMITIAN_TOL:
                warnings.warn(
                    f"matrix for {g} symmetrized; Hermitian defect {defect:.3e}",
                    stacklevel=2,
                )
            m = (m + m.conj().T) / 2
            m.setflags(write=False)
            fixed[g] = m
        if dim is None:
            raise ShapeMismatch("empty matrix tuple needs an explicit dim")
        self.dim = int(dim)
        self.entries = fixed

    def __getitem__(self, g):
        return self.entries[GenId(*g)]

    def __contains__(self, g):
        return GenId(*g) in self.entries

    def generators(self):
        return sorted(self.entries)

    def restrict(self, gens):
        return MatrixTuple({g: self.entries[GenId(*g)] for g in gens}, dim=self.dim)

    def merged(self, other):
        """Union of two tuples of equal dimension (disjoint or equal entries)."""
        if other.dim != self.dim:
            raise ShapeMismatch(f"dims differ: {self.dim} vs {other.dim}")
        out = dict(self.entries)
        out.update(other.entries)
        return MatrixTuple(out, dim=self.dim)


def evaluate(p, mt: MatrixTuple):
    """Evaluate a polynomial on a matrix tuple.

    The unique unital *-homomorphism sending each generator to its
    matrix: words map to matrix products (the empty word to the
    identity) and the result is the coefficient-weighted sum.
    """
    p = _as_poly(p)
    n = mt.dim
    out = np.zeros((n, n), dtype=np.complex128)
    eye = np.eye(n, dtype=np.complex128)
    for w, c in p.terms.items():
        m = eye
        for g in w:
            if g not in mt.entries:
                raise MissingGenerator(g)
            m = m @ mt.entries[g]
        out += c * m
    return out


def normalized_trace(m):
    """tau_n(M) = Tr(M)/n."""
    m = np.asarray(m)
    return complex(np.trace(m)) / m.shape[0]


def hs_norm2(m):
    """2-norm ||M||_2 = tau(M† M)^{1/2}, i.e. Frobenius norm over sqrt(n)."""
    m = np.asarray(m)
    return float(np.linalg.norm(m)) / np.sqrt(m.shape[0])


def op_norm(m, tol=1e-10, max_iter=10_000):
    """Largest singular value by power iteration on M†M.

    Runs a deterministic restart schedule (fixed start vectors, then
    fixed-seed random restarts) and keeps the best Rayleigh estimate,
    which is always a lower bound on the true value.  If no restart
    reaches the relative tolerance a ``NoConvergenceWarning`` is issued
    and the best estimate is returned.  The result is clamped below by
    the 2-norm, so ``hs_norm2(M) <= op_norm(M)`` holds exactly.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    m = np.asarray(m, dtype=np.complex128)
    n = m.shape[0]
    if n == 0:
        return 0.0
    h = m.conj().T @ m
    floor = hs_norm2(m)
    if floor == 0.0:
        return 0.0

    starts = [np.ones(n), np.zeros(n)]
    starts[1][int(np.argmax(np.abs(np.diag(h))))] = 1.0
    rng = np.random.default_rng(0x5EED)
    starts.append(rng.standard_normal(n) + 1j * rng.standard_normal(n))

    best = 0.0
    converged = False
    for v in starts:
        v = v.astype(np.complex128)
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v /= nv
        prev = 0.0
        for _ in range(max_iter):
            w = h @ v
            nw = np.linalg.norm(w)
            if nw == 0:
                break
            est = np.sqrt(abs(float(np.real(np.vdot(v, w)))))
            v = w / nw
            if abs(est - prev) <= tol * max(est, 1e-300):
                best = max(best, est)
                converged = True
                break
            prev = est
        else:
            best = max(best, prev)
    if not converged:
        warnings.warn(
            f"power iteration did not converge to rel tol {tol}",
            NoConvergenceWarning,
            stacklevel=2,
        )
    return max(best, floor)


# ---------------------------------------------------------------------
# Serialization: binary container and JSON
# ---------------------------------------------------------------------

_MAGIC = b"NCT1"


def write_tuple(mt: MatrixTuple, path):
    """Write a matrix tuple to the binary container.

    Layout: magic ``NCT1``, then ``<qq`` header (n, generator count),
    then per generator ``<qq`` (factor, index) followed by n*n complex
    doubles in row-major order.
    """
    gens = mt.generators()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<qq", mt.dim, len(gens)))
        for g in gens:
            f.write(struct.pack("<qq", g.factor, g.index))
            f.write(np.ascontiguousarray(mt.entries[g]).tobytes())


def read_tuple(path):
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ValueError(f"not a matrix tuple container: magic {magic!r}")
        n, count = struct.unpack("<qq", f.read(16))
        entries = {}
        for _ in range(count):
            factor, index = struct.unpack("<qq", f.read(16))
            buf = f.read(16 * n * n)
            m = np.frombuffer(buf, dtype=np.complex128).reshape(n, n)
            entries[GenId(factor, index)] = m
    return MatrixTuple(entries, dim=n)


def tuple_to_json(mt: MatrixTuple):
    """JSON-friendly dict; intended for small n."""
    return {
        "dim": mt.dim,
        "entries": {
            str(g): [[[float(z.real), float(z.imag)] for z in row] for row in mt.entries[g]]
            for g in mt.generators()
        },
    }


def tuple_from_json(obj):
    entries = {}
    for key, rows in obj["entries"].items():
        fpart, gpart = key.split(".")
        g = GenId(int(fpart[1:]), int(gpart[1:]))
        entries[g] = np.array(
            [[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128
        )
    return MatrixTuple(entries, dim=int(obj["dim"]))


def dump_poly(p, path):
    with open(path, "w") as f:
        json.dump(_as_poly(p).to_list(), f)


def load_poly(path):
    with open(path) as f:
        return NcPolynomial.from_list(json.load(f))
