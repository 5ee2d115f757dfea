import numpy as np
import pytest

from delone_ids.Decoration.mld import build_gfin, decorate
from delone_ids.Geometry.geometry import DeloneSet, GeneratorSpec, Window, generate
from delone_ids.Geometry.patterns import singleton_class
from delone_ids.Spectral.operators import decorated_rule, nn_adjacency_rule

R = 0.42
S = 0.4


def square(L, d=2, spacing=1.0):
    return generate(GeneratorSpec(GeneratorSpec.Kind.SQUARE, spacing=spacing), Window.cube(L, d))


def decorated_square(L, spacing=1.0):
    """Fully decorated square lattice, complete on [-L - r/42, L + r/42]^2."""
    G = build_gfin(R)
    base = square(L + S + 2 * G.cluster_radius, spacing=spacing)
    return decorate(base, singleton_class(S), G)


def without_point(omega, x):
    keep = np.linalg.norm(omega.points - np.asarray(x, dtype=float), axis=1) > 1e-9
    return DeloneSet.from_points(omega.points[keep], omega.generator, omega.window)


@pytest.fixture(scope="session")
def gfin():
    return build_gfin(R)


@pytest.fixture(scope="session")
def z2():
    return square(12)


@pytest.fixture(scope="session")
def z1():
    return square(20, d=1)


@pytest.fixture(scope="session")
def nn_rule():
    return nn_adjacency_rule(1.0)


@pytest.fixture(scope="session")
def flagship():
    """Decorated square lattice large enough for windows up to L = 8 with the decorated rule."""
    return decorated_square(14)


@pytest.fixture(scope="session")
def flagship_rule(gfin):
    return decorated_rule(gfin, 1.0)


@pytest.fixture(scope="session")
def octagonal():
    spec = GeneratorSpec(GeneratorSpec.Kind.CUT_AND_PROJECT)
    return generate(spec, Window.cube(24), seed=1)
