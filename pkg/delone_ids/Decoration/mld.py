#!/usr/bin/env python3
"""
Local decoration of a Delone set by a small graph carrying a compactly
supported eigenfunction, and the local rule that strips it again.

The graph sits inside B(0, r/42) and has diameter r/21. Every occurrence t of
a ball pattern P receives a copy t + V_G; a point is recognised as a host
again by comparing its r/42- and r/3-neighbourhoods.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist

from delone_ids.Geometry.geometry import DeloneSet, GeneratorSpec, UntrustedRegionError, Window
from delone_ids.Geometry.patterns import Pattern, PatternClass, same_points, occurrences
from delone_ids.Utilities.utils import Tolerance

# Cluster size relative to the decoration scale r.
CLUSTER_DIVISOR = 42
HOST_TEST_DIVISOR = 3


class ScaleError(ValueError):
    pass


class LocalityPreconditionError(ValueError):
    pass


class Hopping(enum.Enum):
    ADJACENCY = "adjacency"
    LAPLACIAN = "laplacian"   # A - D, degree subtracted on the diagonal


@dataclass(frozen=True, eq=False)
class FiniteGraph:
    vertices: np.ndarray
    edges: tuple
    eigenfunction: np.ndarray
    eigenvalue: float
    corner_indices: tuple
    scale: float
    labels: tuple = ("a", "b", "c", "d")

    def __len__(self):
        return len(self.vertices)

    @property
    def cluster_radius(self):
        return self.scale / CLUSTER_DIVISOR

    def adjacency(self):
        n = len(self.vertices)
        A = np.zeros((n, n), dtype=int)
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1
        return A

    def laplacian(self):
        A = self.adjacency()
        return A - np.diag(A.sum(axis=1))

    def operator(self, hopping=Hopping.ADJACENCY):
        return self.adjacency() if hopping is Hopping.ADJACENCY else self.laplacian()

    def eigenvalue_for(self, hopping=Hopping.ADJACENCY):
        """Eigenvalue of u_fin under the chosen hopping; the Laplacian shifts it by -degree."""
        if hopping is Hopping.ADJACENCY:
            return self.eigenvalue
        support = np.flatnonzero(self.eigenfunction)
        degrees = self.adjacency().sum(axis=1)[support]
        if len(set(degrees)) != 1:
            raise ValueError("u_fin is not a Laplacian eigenvector: its support has mixed degrees.")
        return self.eigenvalue - float(degrees[0])

    def residual(self, hopping=Hopping.ADJACENCY):
        M = self.operator(hopping)
        u = self.eigenfunction
        return float(np.abs(M @ u - self.eigenvalue_for(hopping) * u).max())

    def diameter(self):
        return float(pdist(self.vertices).max())


def build_gfin(r, d=2):
    """
    The four-vertex graph a=(0, r/42), b=(0, -r/42), c=(-r/42, 0), d=(r/42, 0)
    with edges a-c, a-d, b-c, b-d, u_fin = (1, -1, 0, 0) at eigenvalue 0 and
    attachment corners {c, d}.
    """
    if r <= 0:
        raise ValueError(f"Decoration scale must be positive, got {r}.")
    if d < 2:
        raise ValueError("The decoration graph needs d >= 2.")
    h = r / CLUSTER_DIVISOR
    vertices = np.zeros((4, d))
    vertices[0, 1] = h
    vertices[1, 1] = -h
    vertices[2, 0] = -h
    vertices[3, 0] = h
    return FiniteGraph(
        vertices=vertices,
        edges=((0, 2), (0, 3), (1, 2), (1, 3)),
        eigenfunction=np.array([1.0, -1.0, 0.0, 0.0]),
        eigenvalue=0.0,
        corner_indices=(2, 3),
        scale=float(r),
    )


def cluster_class(G):
    """Ball class of one decoration cluster: the host together with t + V_G, radius r/42."""
    d = G.vertices.shape[1]
    points = np.vstack([np.zeros((1, d)), G.vertices])
    return PatternClass(Pattern(points, Window.ball(np.zeros(d), G.cluster_radius)))


def decorate(omega, P, G, tol=Tolerance.match):
    """
    ω ∪ {t + V_G : t an occurrence of P}.

    Occurrences can only be decided where B(t, s(P)) lies in the sample, and a
    host just outside that region may still own satellites inside it, so the
    result lives on the window eroded by s(P) + r/42.
    """
    r = G.scale
    if r >= 2 * omega.r_pack:
        raise ScaleError(f"Decoration scale r={r} must stay below 2*r_pack={2 * omega.r_pack:.6g}.")
    if not P.is_ball:
        raise ValueError("Decorations are attached to ball-pattern classes.")

    decidable = omega.window.eroded(P.radius)
    complete = omega.window.eroded(P.radius + G.cluster_radius)
    if complete is None:
        raise UntrustedRegionError(f"{omega.window} is too small for patterns of radius {P.radius}.")
    hosts = omega.points[omega.sites_in(complete, tol)]
    occ = occurrences(omega, P, decidable, tol)
    satellites = (occ[:, None, :] + G.vertices[None, :, :]).reshape(-1, omega.d)
    points = np.vstack([hosts, satellites])
    points = points[complete.contains(points, tol)]

    spec = GeneratorSpec(GeneratorSpec.Kind.DECORATED,
                         params=(("r", float(r)), ("pattern", P.digest())),
                         base=omega.generator)
    logging.debug(f"Decorated {len(occ)} of {len(hosts)} sites with a {len(G)}-vertex cluster (r={r})")
    return DeloneSet.from_points(points, spec, complete, meta={"occurrences": len(occ)})


def host_mask(omega, r, tol=Tolerance.match):
    """True for points whose r/3- and r/42-neighbourhoods coincide."""
    if len(omega) == 0:
        return np.zeros(0, dtype=bool)
    outer = omega.tree.query_ball_point(omega.points, r / HOST_TEST_DIVISOR + tol, return_length=True)
    inner = omega.tree.query_ball_point(omega.points, r / CLUSTER_DIVISOR + tol, return_length=True)
    return np.asarray(outer) == np.asarray(inner)


def underive(omega_b, r, tol=Tolerance.match):
    """Keep the host points of a decorated set; the result is trusted on the window eroded by r/3."""
    trusted = omega_b.window.eroded(r / HOST_TEST_DIVISOR)
    if trusted is None:
        raise UntrustedRegionError(f"{omega_b.window} is too small to underive at scale {r}.")
    keep = host_mask(omega_b, r, tol) & trusted.contains(omega_b.points, tol)
    spec = omega_b.generator.base or replace(omega_b.generator, params=())
    logging.debug(f"Underived {keep.sum()} hosts out of {len(omega_b)} points (r={r})")
    return DeloneSet.from_points(omega_b.points[keep], spec, trusted)


@dataclass(frozen=True)
class LocalDerivation:
    radius: float
    description: str
    forward: Callable[[DeloneSet], DeloneSet]

    def __call__(self, omega):
        return self.forward(omega)


def decoration_derivation(P, G):
    return LocalDerivation(P.radius + G.cluster_radius,
                           f"decorate pattern {P.digest()} with r={G.scale}",
                           lambda omega: decorate(omega, P, G))


def underivation(r):
    return LocalDerivation(r / HOST_TEST_DIVISOR, f"underive r={r}", lambda omega: underive(omega, r))


def verify_locality(D, omega1, omega2, x, s, tol=Tolerance.match):
    """
    Whether D(ω1) and D(ω2) agree on B(x, s) given that ω1 and ω2 agree on B(x, s + 2 r_D).
    """
    x = np.asarray(x, dtype=float)
    reach = Window.ball(x, s + 2 * D.radius)
    for omega in (omega1, omega2):
        omega.require_trusted(reach, "locality check")
    before1 = omega1.points[omega1.sites_in(reach, tol)]
    before2 = omega2.points[omega2.sites_in(reach, tol)]
    if not same_points(before1, before2, tol):
        raise LocalityPreconditionError(f"Inputs differ inside B({x}, {s + 2 * D.radius}).")

    view = Window.ball(x, s)
    after1, after2 = D(omega1), D(omega2)
    for omega in (after1, after2):
        omega.require_trusted(view, "locality check")
    return same_points(after1.points[after1.sites_in(view, tol)],
                        after2.points[after2.sites_in(view, tol)], tol)
