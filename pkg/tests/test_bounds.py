import pytest

from conftest import S
from delone_ids.Geometry.geometry import VanHoveSequence
from delone_ids.Geometry.patterns import singleton_class
from delone_ids.Spectral.bounds import (chain_text, disjoint_inequality_check, inequality_chain, jump_bound_report,
                                        packing_audit, packing_constant)


def test_packing_constant():
    assert packing_constant(0.4, 1.0, 2) == pytest.approx(4.84)
    assert packing_constant(1.0, 1.0, 1) == pytest.approx(4)
    with pytest.raises(ValueError):
        packing_constant(0, 1.0, 2)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_packing_constant_is_monotone(d):
    radii = [0.1, 0.5, 1.0, 2.0]
    values = [packing_constant(r, 0.5, d) for r in radii]
    assert values == sorted(values)
    shrinking = [packing_constant(1.0, r, d) for r in radii]
    assert shrinking == sorted(shrinking, reverse=True)


def test_disjoint_inequality():
    assert disjoint_inequality_check(10, 3, 4)
    assert not disjoint_inequality_check(10, 2, 4)
    assert disjoint_inequality_check(0, 0, 4)
    with pytest.raises(ValueError):
        disjoint_inequality_check(2, 3, 4)


def test_packing_audit(z2, flagship):
    audit = packing_audit(z2, S)
    assert audit.C == pytest.approx(11.56)
    assert audit.max_count == 5
    assert audit.ok
    assert packing_audit(flagship, S, samples=50).ok


def test_jump_bound_on_decorated_lattice(flagship, flagship_rule, gfin):
    report = jump_bound_report(flagship_rule, flagship, singleton_class(S), gfin, VanHoveSequence.cubes([4, 6]), 0.0)
    assert report.nu == pytest.approx(169 / 144)
    assert report.C == pytest.approx(241 ** 2)
    assert report.satisfied
    assert report.observed_jump >= report.nu
    assert report.lower_bound == pytest.approx(report.nu / report.C)
    lines = report.render().splitlines()
    assert lines[0] == "# bound"
    assert "satisfied=true" in lines


def test_jump_bound_away_from_the_eigenvalue(flagship, flagship_rule, gfin):
    report = jump_bound_report(flagship_rule, flagship, singleton_class(S), gfin, VanHoveSequence.cubes([4, 6]), 0.5)
    assert report.observed_jump == 0
    assert not report.satisfied


def test_jump_bound_without_decoration(z2, nn_rule, gfin):
    report = jump_bound_report(nn_rule, z2, singleton_class(S), gfin, VanHoveSequence.cubes([4, 6]), 0.0)
    assert report.nu == 0
    assert report.C == pytest.approx(11.56)
    assert report.satisfied


def test_inequality_chain(flagship, flagship_rule, gfin):
    rows = inequality_chain(flagship_rule, flagship, singleton_class(S), gfin, VanHoveSequence.cubes([4, 6]), 0.0)
    assert [row.L for row in rows] == [4, 6]
    assert [row.occurrences for row in rows] == [81, 169]
    assert all(row.holds for row in rows)
    assert all(0 < row.disjoint <= row.occurrences for row in rows)
    assert all(row.above > row.below for row in rows)
    text = chain_text(rows)
    assert text.splitlines()[1] == "# L eps N(E-eps) N(E+eps) occurrences disjoint holds"
    assert text.splitlines()[2].endswith(" true")
