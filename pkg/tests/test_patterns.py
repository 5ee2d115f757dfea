import numpy as np
import pytest

from delone_ids.Geometry.geometry import UntrustedRegionError, VanHoveSequence, Window, save_point_set
from delone_ids.Geometry.patterns import (Pattern, PatternClass, ball_pattern, dominant_class, enumerate_ball_classes,
                                          equivalent, frequency, load_pattern_class, max_disjoint, occurrences,
                                          restrict, same_points, save_pattern_class, singleton_class)
from delone_ids.Spectral.bounds import packing_constant


def test_lattice_ball_patterns_are_equivalent(z2):
    P1 = ball_pattern(z2, [0, 0], 1.5)
    P2 = ball_pattern(z2, [3, -2], 1.5)
    assert len(P1) == 9
    assert P1.is_ball
    assert equivalent(P1, P2)
    assert not equivalent(P1, ball_pattern(z2, [0, 0], 1.0))


def test_equivalence_needs_matching_support():
    points = np.array([[0.0, 0.0], [1.0, 0.0]])
    P1 = Pattern(points, Window.ball([0, 0], 1.2))
    P2 = Pattern(points + [5, 5], Window.ball([5, 5], 1.2))
    P3 = Pattern(points + [5, 5], Window.ball([6, 5], 1.2))
    assert equivalent(P1, P2)
    assert not equivalent(P1, P3)
    with pytest.raises(ValueError):
        equivalent(P1, P2, tol=0)


def test_pattern_points_must_lie_in_support():
    with pytest.raises(ValueError):
        Pattern(np.array([[2.0, 0.0]]), Window.ball([0, 0], 1))


def test_singleton_occurrences(z2):
    occ = occurrences(z2, singleton_class(0.5), Window.cube(3))
    assert len(occ) == 49
    assert np.all(np.diff(occ[:, 0]) >= 0)
    with pytest.raises(UntrustedRegionError):
        occurrences(z2, singleton_class(0.5), Window.cube(12))


def test_occurrences_of_an_edge_pattern(z2):
    P = PatternClass.from_pattern(ball_pattern(z2, [0, 0], 1.0))
    assert len(P.relative_points()) == 5
    assert len(occurrences(z2, P, Window.cube(4))) == 81


def test_lattice_frequency(z2):
    estimate = frequency(z2, singleton_class(0.5), VanHoveSequence.cubes([5, 10]))
    assert estimate.nu == pytest.approx(21 ** 2 / 20 ** 2)
    assert [w.count for w in estimate.per_window] == [121, 441]
    assert estimate.convergence == pytest.approx((1.21 - 1.1025) / 1.21)


def test_lattice_has_one_ball_class(z2):
    classes = enumerate_ball_classes(z2, 1.5, Window.cube(5))
    assert len(classes) == 1
    assert classes[0][1] == 121


def test_octagonal_ball_classes_are_finite_and_nested(octagonal):
    small = enumerate_ball_classes(octagonal, 1.0, Window.cube(5))
    large = enumerate_ball_classes(octagonal, 1.0, Window.cube(10))
    assert 1 < len(small) <= len(large) < 200
    for P, _ in small:
        assert any(equivalent(P.canonical, Q.canonical) for Q, _ in large)
    assert sum(count for _, count in large) == len(octagonal.sites_in(Window.cube(10)))


def test_octagonal_frequencies_settle(octagonal):
    P = dominant_class(octagonal.restricted(Window.cube(12)), 1.0)
    estimate = frequency(octagonal, P, VanHoveSequence.cubes([12, 16, 20]))
    assert estimate.nu > 0
    assert estimate.convergence < 0.5


def test_digest_is_translation_invariant(z2):
    P1 = PatternClass.from_pattern(ball_pattern(z2, [0, 0], 1.5))
    P2 = PatternClass.from_pattern(ball_pattern(z2, [2, 1], 1.5))
    assert P1.digest() == P2.digest()
    assert P1.digest() != singleton_class(1.5).digest()


def test_max_disjoint():
    occ = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    assert max_disjoint(occ, 1.0) == 2
    assert max_disjoint(occ, 0.9) == 3
    assert max_disjoint(np.zeros((0, 2)), 1.0) == 0
    with pytest.raises(ValueError):
        max_disjoint(occ, 0)


def test_equivalence_is_translation_only():
    plus = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    P = Pattern(plus, Window.ball([0, 0], 1.2))
    rotation = np.array([[1, -1], [1, 1]]) / np.sqrt(2)
    perturbed = plus.copy()
    perturbed[1, 0] += 1e-6
    assert equivalent(P, Pattern(plus + [3, -2], Window.ball([3, -2], 1.2)))
    assert not equivalent(P, Pattern(plus @ rotation.T, Window.ball([0, 0], 1.2)))
    assert not equivalent(P, Pattern(perturbed, Window.ball([0, 0], 1.2)))


def test_occurrences_commute_with_translation(octagonal):
    P = dominant_class(octagonal.restricted(Window.cube(10)), 1.0)
    Q = Window.cube(5)
    reference = occurrences(octagonal, P, Q)
    assert len(reference) > 0
    rng = np.random.default_rng(0)
    for t in rng.uniform(-4, 4, (20, 2)):
        moved = occurrences(octagonal.shifted(t), P, Q.translated(t))
        assert same_points(moved, reference + t, 1e-9)


def test_occurrence_counts_grow_with_the_window(octagonal):
    P = dominant_class(octagonal.restricted(Window.cube(10)), 1.0)
    estimate = frequency(octagonal, P, VanHoveSequence.cubes([2, 4, 8, 12]))
    counts = [w.count for w in estimate.per_window]
    assert counts == sorted(counts)
    assert counts[0] < counts[-1]


@pytest.mark.parametrize("s", [0.4, 1.0, 1.5])
def test_disjoint_copies_reach_the_packing_bound(octagonal, z2, s):
    for omega in (z2, octagonal):
        P = dominant_class(omega.restricted(Window.cube(10)), s)
        occ = occurrences(omega, P, Window.cube(8))
        C = packing_constant(P.radius, omega.r_pack, omega.d)
        assert max_disjoint(occ, 2 * P.radius) >= np.ceil(len(occ) / C)


def test_pattern_class_file(tmp_path, octagonal, z2):
    path = tmp_path / "pattern.txt"
    save_pattern_class(singleton_class(0.4), path)
    assert path.read_text().splitlines() == ["# delone d=2", "# support ball r=0.4", "0 0"]
    assert load_pattern_class(path).digest() == singleton_class(0.4).digest()

    P = dominant_class(octagonal.restricted(Window.cube(10)), 1.0)
    save_pattern_class(P, path)
    loaded = load_pattern_class(path)
    assert loaded.radius == pytest.approx(1.0)
    assert np.array_equal(loaded.relative_points(), P.relative_points())
    assert len(occurrences(octagonal, loaded, Window.cube(5))) == len(occurrences(octagonal, P, Window.cube(5)))

    box = PatternClass.from_pattern(restrict(z2, Window.box([0, 0], [2, 1])))
    save_pattern_class(box, path)
    assert equivalent(load_pattern_class(path).canonical, box.canonical)


def test_pattern_class_file_needs_support(tmp_path, z2):
    path = tmp_path / "points.txt"
    save_point_set(z2.restricted(Window.cube(1)), path)
    with pytest.raises(ValueError):
        load_pattern_class(path)
