"""Neighborhoods, covering sandwiches, exact concentration, dichotomy."""

import numpy as np
import pytest

from freebench import (
    FiniteMeasure,
    GenId,
    MatrixTuple,
    NcPolynomial,
    PointCloud,
    concentration_function,
    covering_number,
    dichotomy_check,
    empirical_concentration,
    in_neighborhood,
)
from freebench.geometry import EmptyCloud, TooManyAtoms, tuple_distance

G = GenId(1, 0)


def diag_tuple(*vals):
    """Scalar multiples of the identity embed the real line isometrically
    in 2-norm, which makes hand geometry easy."""
    return MatrixTuple({G: np.diag(list(map(float, vals)))})


def scalar_tuple(x, n=2):
    return MatrixTuple({G: x * np.eye(n)})


class TestNeighborhood:
    def test_self_membership(self):
        a = diag_tuple(1.0, 2.0)
        for eps in (1e-9, 0.1, 10.0):
            assert in_neighborhood(a, a, [G], eps)

    def test_identity_offset(self):
        a = scalar_tuple(0.0)
        b = scalar_tuple(1.0)  # difference is the identity, 2-norm 1
        assert not in_neighborhood(a, b, [G], 0.5)
        assert in_neighborhood(a, b, [G], 1.5)

    def test_boundary_is_excluded(self):
        a = scalar_tuple(0.0)
        b = scalar_tuple(0.25)
        assert tuple_distance(a, b, [G]) == pytest.approx(0.25)
        assert not in_neighborhood(a, b, [G], 0.25)  # strict inequality
        assert in_neighborhood(a, b, [G], 0.25 + 1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(139)
        for _ in range(10):
            a = diag_tuple(*rng.standard_normal(3))
            b = diag_tuple(*rng.standard_normal(3))
            eps = float(rng.uniform(0.1, 2.0))
            assert in_neighborhood(a, b, [G], eps) == in_neighborhood(b, a, [G], eps)


class TestCovering:
    def test_singleton(self):
        cloud = PointCloud([scalar_tuple(0.0)])
        assert covering_number(cloud, [G], 0.5) == (1, 1)

    def test_two_distant_points(self):
        eps = 0.2
        cloud = PointCloud([scalar_tuple(0.0), scalar_tuple(3 * eps)])
        assert covering_number(cloud, [G], eps) == (2, 2)

    def test_empty_cloud(self):
        with pytest.raises(EmptyCloud):
            covering_number(PointCloud([]), [G], 0.5)

    def test_sandwich_and_monotonicity_in_eps(self):
        rng = np.random.default_rng(149)
        cloud = PointCloud([scalar_tuple(float(x)) for x in rng.uniform(0, 4, size=30)])
        prev_upper = np.inf
        for eps in (0.1, 0.2, 0.4, 0.8):
            lower, upper = covering_number(cloud, [G], eps)
            assert lower <= upper
            assert upper <= prev_upper
            prev_upper = upper

    def test_monotone_in_coordinates(self):
        # adding a coordinate can only increase distances, hence the cover
        rng = np.random.default_rng(151)
        g2 = GenId(2, 0)
        pts = []
        for _ in range(25):
            pts.append(
                MatrixTuple(
                    {
                        G: float(rng.uniform(0, 2)) * np.eye(2),
                        g2: float(rng.uniform(0, 2)) * np.eye(2),
                    }
                )
            )
        cloud = PointCloud(pts)
        for eps in (0.15, 0.3, 0.6):
            _, upper_small = covering_number(cloud, [G], eps)
            _, upper_big = covering_number(cloud, [G, g2], eps)
            assert upper_big >= upper_small

    def test_packing_bounds_cover(self):
        # lower(2 eps packing) <= upper(eps cover) on random clouds
        rng = np.random.default_rng(157)
        for _ in range(5):
            cloud = PointCloud(
                [diag_tuple(*rng.standard_normal(4)) for _ in range(20)]
            )
            lower, upper = covering_number(cloud, [G], float(rng.uniform(0.2, 1.0)))
            assert lower <= upper


class TestConcentrationFunction:
    def test_two_atom_exact(self):
        d = 1.0  # distance between the two scalar atoms
        mu = FiniteMeasure([(scalar_tuple(0.0), 0.5), (scalar_tuple(d), 0.5)])
        assert concentration_function(mu, [G], 0.5) == pytest.approx(0.5)
        assert concentration_function(mu, [G], 1.5) == pytest.approx(0.0)

    def test_point_mass(self):
        mu = FiniteMeasure([(scalar_tuple(1.0), 1.0)])
        for eps in (0.01, 1.0):
            assert concentration_function(mu, [G], eps) == 0.0

    def test_atom_cap(self):
        pts = [(scalar_tuple(float(i)), 1.0 / 16) for i in range(16)]
        with pytest.raises(TooManyAtoms):
            concentration_function(FiniteMeasure(pts), [G], 0.1)


class TestEmpiricalConcentration:
    def test_point_mass_is_zero(self):
        mu = FiniteMeasure([(scalar_tuple(2.0), 1.0)])
        p = NcPolynomial.generator(1)
        assert empirical_concentration(mu, [G], 0.3, [p]) == 0.0

    def test_two_separated_atoms(self):
        eps = 0.1
        mu = FiniteMeasure([(scalar_tuple(0.0), 0.5), (scalar_tuple(10 * eps), 0.5)])
        p = NcPolynomial.generator(1)  # separates the atoms by trace
        assert empirical_concentration(mu, [G], eps, [p]) == pytest.approx(0.5)

    def test_fine_grid_below_diameter(self):
        grid = np.linspace(0, 1, 11)
        mu = FiniteMeasure([(scalar_tuple(float(x)), 1.0 / len(grid)) for x in grid])
        p = NcPolynomial.generator(1)
        assert empirical_concentration(mu, [G], 1.5, [p]) == 0.0


class TestDichotomy:
    def test_single_atom(self):
        mu = FiniteMeasure([(scalar_tuple(0.0), 1.0)])
        assert dichotomy_check(mu, [0], [G], 0.5)

    def test_randomized_small_measures(self):
        rng = np.random.default_rng(163)
        for trial in range(100):
            natoms = int(rng.integers(2, 9))
            pts = [scalar_tuple(float(x)) for x in rng.uniform(0, 3, natoms)]
            w = rng.dirichlet(np.ones(natoms))
            mu = FiniteMeasure(list(zip(pts, w)))
            subset = [i for i in range(natoms) if rng.random() < 0.5]
            eps = float(rng.uniform(0.05, 1.0))
            assert dichotomy_check(mu, subset, [G], eps), (
                f"trial {trial}: dichotomy violated"
            )

    def test_adversarial_two_clusters(self):
        # clusters at distance strictly between eps and 2 eps exercise
        # the widening from eps to 2 eps
        eps = 0.4
        gap = 1.5 * eps
        pts = [scalar_tuple(0.0), scalar_tuple(0.01), scalar_tuple(gap), scalar_tuple(gap + 0.01)]
        mu = FiniteMeasure([(p, 0.25) for p in pts])
        for subset in ([0, 1], [2, 3], [0, 2], [0], [0, 1, 2, 3]):
            assert dichotomy_check(mu, subset, [G], eps)


class TestCloudSerialization:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(167)
        pts = []
        for _ in range(5):
            m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            pts.append(MatrixTuple({G: (m + m.conj().T) / 2}))
        cloud = PointCloud(pts)
        path = tmp_path / "cloud.ncc"
        from freebench.geometry import read_cloud, write_cloud

        write_cloud(cloud, path)
        back = read_cloud(path)
        assert len(back) == len(cloud)
        for a, b in zip(cloud.points, back.points):
            assert np.array_equal(np.asarray(a[G]), np.asarray(b[G]))
