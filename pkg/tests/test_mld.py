import numpy as np
import pytest

from conftest import R, S, decorated_square, square, without_point
from delone_ids.Decoration.mld import (Hopping, LocalDerivation, LocalityPreconditionError, ScaleError, build_gfin,
                                       cluster_class, decorate, decoration_derivation, host_mask, underivation,
                                       underive, verify_locality)
from delone_ids.Geometry.geometry import GeneratorSpec, VanHoveSequence, Window, generate
from delone_ids.Geometry.patterns import dominant_class, frequency, same_points, singleton_class


def test_gfin_eigenfunction(gfin):
    assert len(gfin) == 4
    assert gfin.eigenvalue == 0
    assert gfin.residual() == 0
    assert gfin.cluster_radius == pytest.approx(0.01)
    assert gfin.diameter() == pytest.approx(R / 21)
    assert np.all(np.linalg.norm(gfin.vertices, axis=1) <= gfin.cluster_radius + 1e-15)


def test_gfin_laplacian(gfin):
    assert gfin.eigenvalue_for(Hopping.LAPLACIAN) == -2
    assert gfin.residual(Hopping.LAPLACIAN) == 0


def test_gfin_arguments():
    with pytest.raises(ValueError):
        build_gfin(0)
    with pytest.raises(ValueError):
        build_gfin(R, d=1)
    assert build_gfin(R, d=3).vertices.shape == (4, 3)


def test_decorated_square_lattice():
    omega = decorated_square(8)
    assert len(omega) == 289 * 5
    assert omega.generator.kind is GeneratorSpec.Kind.DECORATED
    assert omega.generator.param("r") == R
    assert omega.meta["occurrences"] == 289
    assert omega.r_pack == pytest.approx(R / 42 / 2)
    assert omega.window.same_as(Window.cube(8 + R / 42))


def test_decoration_scale_must_stay_below_packing(gfin):
    dense = square(3, spacing=0.4)
    with pytest.raises(ScaleError):
        decorate(dense, singleton_class(0.2), gfin)


def test_host_mask():
    omega = decorated_square(3)
    hosts = host_mask(omega, R)
    assert hosts.sum() == 49
    assert np.allclose(omega.points[hosts], np.round(omega.points[hosts]))


@pytest.mark.parametrize("L", [3, 6, 9])
@pytest.mark.parametrize("kind", [GeneratorSpec.Kind.SQUARE, GeneratorSpec.Kind.TRIANGULAR])
def test_underive_recovers_lattices(gfin, kind, L):
    base = generate(GeneratorSpec(kind), Window.cube(L + S))
    decorated = decorate(base, singleton_class(S), gfin)
    recovered = underive(decorated, R)
    assert recovered.window.same_as(Window.cube(L - R / 42 - R / 3))
    expected = base.restricted(recovered.window)
    assert same_points(recovered.points, expected.points, 1e-9)


@pytest.mark.parametrize("L", [6, 8, 10])
def test_underive_recovers_octagonal(octagonal, gfin, L):
    base = octagonal.restricted(Window.cube(L))
    P = dominant_class(base, 1.0)
    decorated = decorate(base, P, gfin)
    assert 0 < decorated.meta["occurrences"] < len(base)
    recovered = underive(decorated, R)
    assert same_points(recovered.points, base.restricted(recovered.window).points, 1e-9)


def test_underive_keeps_undecorated_sets(z2):
    recovered = underive(z2, R)
    assert len(recovered) == len(z2.restricted(recovered.window))


def test_cluster_frequency_matches_host_frequency(gfin, z2):
    omega = decorated_square(10)
    seq = VanHoveSequence.cubes([4, 8])
    clusters = frequency(omega, cluster_class(gfin), seq)
    hosts = frequency(z2, singleton_class(S), seq)
    assert clusters.nu == pytest.approx(hosts.nu)
    assert clusters.nu == pytest.approx(289 / 256)


def test_decoration_is_local(gfin):
    omega1 = square(6)
    omega2 = without_point(omega1, [2, 2])
    D = decoration_derivation(singleton_class(S), gfin)
    assert D.radius == pytest.approx(S + R / 42)
    assert verify_locality(D, omega1, omega2, [0, 0], 1.0)
    with pytest.raises(LocalityPreconditionError):
        verify_locality(D, omega1, omega2, [1, 1], 1.0)


def test_underivation_is_local():
    omega1 = decorated_square(5)
    omega2 = without_point(omega1, [4, 4])
    assert verify_locality(underivation(R), omega1, omega2, [0, 0], 1.0)


def test_parity_dependent_decoration_is_not_local(gfin):
    P = singleton_class(S)

    def parity_decoration(omega):
        return decorate(omega, P, gfin) if len(omega) % 2 == 0 else omega

    D = LocalDerivation(S + gfin.cluster_radius, "decorate when the point count is even", parity_decoration)
    omega1 = square(6)
    omega2 = without_point(omega1, [6, 6])
    assert len(omega1) % 2 == 1
    assert not verify_locality(D, omega1, omega2, [0, 0], 1.0)


@pytest.mark.parametrize("L", [6.22, 7.5, 9.0])
def test_decorated_window_is_complete(octagonal, gfin, L):
    P = dominant_class(octagonal.restricted(Window.cube(10)), 1.0)
    reference = decorate(octagonal.restricted(Window.cube(14)), P, gfin)
    small = decorate(octagonal.restricted(Window.cube(L)), P, gfin)
    assert small.window.same_as(Window.cube(L - 1.0 - R / 42))
    assert same_points(small.points, reference.points[reference.sites_in(small.window)], 1e-9)


def test_satellites_of_hosts_outside_the_window(gfin):
    omega = decorate(square(3 + S + R / 84), singleton_class(S), gfin)
    assert omega.meta["occurrences"] == 49
    assert omega.window.same_as(Window.cube(3 - R / 84))
    # 25 full clusters and one inward satellite for each of the 20 non-corner edge hosts.
    assert len(omega) == 25 * 5 + 20
    omega.index_of([3 - R / 42, 2])


def test_eigenfunction_survives_corner_attachments(gfin):
    rng = np.random.default_rng(0)
    A_fin = gfin.adjacency()
    for _ in range(20):
        extra = int(rng.integers(1, 8))
        n = len(gfin) + extra
        A = np.zeros((n, n), dtype=int)
        A[:4, :4] = A_fin
        outer = np.triu(rng.integers(0, 2, (extra, extra)), 1)
        A[4:, 4:] = outer + outer.T
        for corner in gfin.corner_indices:
            A[corner, 4:] = A[4:, corner] = rng.integers(0, 2, extra)
        u = np.concatenate([gfin.eigenfunction, np.zeros(extra)])
        assert np.array_equal(A @ u, gfin.eigenvalue * u)


def test_decoration_commutes_with_translation(octagonal, gfin):
    base = octagonal.restricted(Window.cube(8))
    P = dominant_class(base, 1.0)
    decorated = decorate(base, P, gfin)
    recovered = underive(decorated, R)
    rng = np.random.default_rng(1)
    for t in rng.uniform(-5, 5, (5, 2)):
        moved = decorate(base.shifted(t), P, gfin)
        assert moved.window.same_as(decorated.window.translated(t))
        assert same_points(moved.points, decorated.points + t, 1e-9)
        assert same_points(underive(moved, R).points, recovered.points + t, 1e-9)
