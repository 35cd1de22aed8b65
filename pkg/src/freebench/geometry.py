"""Neighborhood geometry on matrix tuples: coverings and concentration.

The distance between two tuples over a coordinate set F is the maximum
of the 2-norms of the coordinate differences; the (F, eps)-neighborhood
is the strict sublevel set of that distance.  Covering numbers on a
finite point cloud are bracketed between a greedy farthest-point cover
(upper bound, centers restricted to the cloud) and a greedy
2eps-separated packing (lower bound): no epsilon-ball can hold two
points of the packing, so packing size <= covering number <= cover
size.

The concentration function of a finite measure is the largest mass
outside the eps-neighborhood of any half-mass set.  On a few atoms it
is computable exactly by enumerating subsets, which makes the
dichotomy (half-mass sets swallow everything but alpha after widening
to 2eps) a theorem-as-test: a false return flags a bug in the
neighborhood or measure code, never a counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ncpoly import MatrixTuple, ShapeMismatch, evaluate, hs_norm2, normalized_trace


class EmptyCloud(ValueError):
    """Covering queries need at least one point."""


class TooManyAtoms(ValueError):
    """Exact concentration enumeration is capped at 15 atoms."""


class InsufficientScales(ValueError):
    """A scaling fit needs at least three scales."""


def tuple_distance(a: MatrixTuple, b: MatrixTuple, coords):
    """max over i in F of ||A_i - B_i||_2."""
    if a.dim != b.dim:
        raise ShapeMismatch(f"dims differ: {a.dim} vs {b.dim}")
    coords = list(coords)
    if not coords:
        raise ValueError("coordinate set F must be nonempty")
    dist = 0.0
    for g in coords:
        if g not in a or g not in b:
            raise ShapeMismatch(f"coordinate {g} missing from a tuple")
        dist = max(dist, hs_norm2(a[g] - b[g]))
    return dist


def in_neighborhood(a: MatrixTuple, b: MatrixTuple, coords, eps):
    """Strict inequality on every coordinate, so a point at distance
    exactly eps is outside."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return tuple_distance(a, b, coords) < eps


@dataclass
class PointCloud:
    """A homogeneous list of matrix tuples (same dim, same generators)."""

    points: list

    def __post_init__(self):
        if self.points:
            dim = self.points[0].dim
            gens = tuple(self.points[0].generators())
            for p in self.points[1:]:
                if p.dim != dim or tuple(p.generators()) != gens:
                    raise ShapeMismatch("cloud points disagree in shape")

    def __len__(self):
        return len(self.points)

    def distance_matrix(self, coords):
        pts = self.points
        n = len(pts)
        d = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d[i, j] = d[j, i] = tuple_distance(pts[i], pts[j], coords)
        return d


def _farthest_point_order(dmat):
    """Greedy traversal: start at index 0, then repeatedly take the point
    farthest from the chosen set (ties to the lowest index).  Returns the
    visiting order and each point's distance to the prior selection."""
    n = dmat.shape[0]
    order = [0]
    gaps = [np.inf]
    mind = dmat[0].copy()
    for _ in range(n - 1):
        nxt = int(np.argmax(mind))  # argmax takes the first max: lowest index
        if mind[nxt] <= 0 and len(order) < n:
            # remaining points coincide with chosen centers
            remaining = [i for i in range(n) if i not in set(order)]
            for i in remaining:
                order.append(i)
                gaps.append(0.0)
            break
        order.append(nxt)
        gaps.append(float(mind[nxt]))
        mind = np.minimum(mind, dmat[nxt])
    return order, gaps


def covering_number(cloud: PointCloud, coords, eps):
    """Sandwich (lower, upper) for the eps covering number of the cloud.

    upper: greedy farthest-point cover with centers from the cloud;
    lower: the prefix of the same traversal that stays 2eps-separated.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot cover an empty cloud")
    if not eps > 0:
        raise ValueError("eps must be positive")
    dmat = cloud.distance_matrix(coords)
    order, gaps = _farthest_point_order(dmat)
    # the cover keeps selecting while some point is >= eps from all centers
    upper = 1
    for gap in gaps[1:]:
        if gap >= eps:
            upper += 1
        else:
            break
    lower = 1
    for gap in gaps[1:]:
        if gap >= 2 * eps:
            lower += 1
        else:
            break
    return lower, upper


@dataclass
class FiniteMeasure:
    """Atoms (matrix tuple, weight >= 0) with weights summing to one."""

    atoms: list

    def __post_init__(self):
        total = sum(w for _, w in self.atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        for _, w in self.atoms:
            if w < 0:
                raise ValueError("weights must be nonnegative")

    def weights(self):
        return np.array([w for _, w in self.atoms])

    def points(self):
        return [p for p, _ in self.atoms]


def _neighborhood_mass_complement(measure: FiniteMeasure, subset, coords, eps, dmat=None):
    """Mass of atoms at distance >= eps from every atom of the subset."""
    pts = measure.points()
    w = measure.weights()
    if dmat is None:
        cloud = PointCloud(pts)
        dmat = cloud.distance_matrix(coords)
    subset = sorted(subset)
    if not subset:
        return 1.0
    inside = (dmat[:, subset] < eps).any(axis=1)
    return float(w[~inside].sum())


def concentration_function(measure: FiniteMeasure, coords, eps):
    """Exact alpha(F, eps): max mass outside the eps-neighborhood over
    all subsets of atoms with mass >= 1/2.  Exponential in the atom
    count, capped at 15 atoms."""
    n = len(measure.atoms)
    if n > 15:
        raise TooManyAtoms(f"{n} atoms; exact enumeration is capped at 15")
    w = measure.weights()
    cloud = PointCloud(measure.points())
    dmat = cloud.distance_matrix(coords)
    alpha = 0.0
    for mask in range(1, 1 << n):
        subset = [i for i in range(n) if mask >> i & 1]
        if w[subset].sum() < 0.5:
            continue
        alpha = max(
            alpha, _neighborhood_mass_complement(measure, subset, coords, eps, dmat)
        )
    return alpha


def empirical_concentration(measure: FiniteMeasure, coords, eps, observables):
    """Lower-bound witness for the concentration function.

    For each observable g, split the atoms at the weighted median of
    Re tr g and measure the mass at distance >= eps from the upper
    half-mass set.  Distances to the finite atom set overestimate
    distances to any underlying set the atoms sample, so the returned
    max over observables is a conservative witness of spread (for a
    sampled underlying measure, read it against the doubled radius).
    """
    if not observables:
        raise ValueError("need at least one observable")
    pts = measure.points()
    w = measure.weights()
    cloud = PointCloud(pts)
    dmat = cloud.distance_matrix(coords)
    best = 0.0
    for g in observables:
        vals = np.array([float(normalized_trace(evaluate(g, p)).real) for p in pts])
        # upper weighted median: the largest cut with mass(tr >= cut) >= 1/2,
        # so the half-mass set is as small as the observable allows
        order = np.argsort(-vals, kind="stable")
        cum = np.cumsum(w[order])
        cut = int(np.searchsorted(cum, 0.5 - 1e-12, side="left"))
        median = vals[order[min(cut, len(vals) - 1)]]
        upper = [i for i in range(len(pts)) if vals[i] >= median]
        best = max(
            best, _neighborhood_mass_complement(measure, upper, coords, eps, dmat)
        )
    return best


_CLOUD_MAGIC = b"NCC1"


def write_cloud(cloud: PointCloud, path):
    """Persist a cloud: a count header, then one tuple container per point
    (same layout as the single-tuple container)."""
    import struct

    from .ncpoly import _MAGIC

    with open(path, "wb") as f:
        f.write(_CLOUD_MAGIC)
        f.write(struct.pack("<q", len(cloud.points)))
        for p in cloud.points:
            gens = p.generators()
            f.write(_MAGIC)
            f.write(struct.pack("<qq", p.dim, len(gens)))
            for g in gens:
                f.write(struct.pack("<qq", g.factor, g.index))
                f.write(np.ascontiguousarray(p.entries[g]).tobytes())


def read_cloud(path):
    import struct

    from .ncpoly import _MAGIC, GenId

    points = []
    with open(path, "rb") as f:
        if f.read(4) != _CLOUD_MAGIC:
            raise ValueError("not a point cloud container")
        (count,) = struct.unpack("<q", f.read(8))
        for _ in range(count):
            if f.read(4) != _MAGIC:
                raise ValueError("corrupt cloud container")
            n, ngens = struct.unpack("<qq", f.read(16))
            entries = {}
            for _ in range(ngens):
                factor, index = struct.unpack("<qq", f.read(16))
                buf = f.read(16 * n * n)
                entries[GenId(factor, index)] = np.frombuffer(
                    buf, dtype=np.complex128
                ).reshape(n, n)
            points.append(MatrixTuple(entries, dim=n))
    return PointCloud(points)


def dichotomy_check(measure: FiniteMeasure, subset, coords, eps):
    """Check mu(Omega) > alpha(F,eps) implies mu(N_{F,2eps}(Omega)) >= 1 - alpha.

    alpha is computed exactly, so a correct neighborhood/measure
    implementation returns True for every input; False is a bug signal.
    """
    alpha = concentration_function(measure, coords, eps)
    w = measure.weights()
    subset = sorted(set(subset))
    mass = float(w[subset].sum()) if subset else 0.0
    if mass <= alpha:
        return True  # implication holds vacuously
    outside = _neighborhood_mass_complement(measure, subset, coords, 2 * eps)
    return (1.0 - outside) >= 1.0 - alpha - 1e-12
