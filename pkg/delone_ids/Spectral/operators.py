#!/usr/bin/env python3
"""
Finite-range operators on Delone sets.

A rule gives the matrix element between two points of ω from the local
configuration around them. Rules prepare per-set data once (roles of points,
degrees) and evaluate entries for index pairs in bulk; `kernel` is the
point-level view of the same thing.
"""
from __future__ import annotations

import enum
import logging
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from delone_ids.Decoration.mld import CLUSTER_DIVISOR, Hopping, ScaleError, host_mask
from delone_ids.Geometry.geometry import GeneratorSpec, Window
from delone_ids.Geometry.patterns import classify_sites
from delone_ids.Utilities.storage import matrix_text
from delone_ids.Utilities.utils import Tolerance, format_float


class OperatorRule:
    class Kind(enum.Enum):
        NN_ADJACENCY = "nn"
        DECORATED = "decorated"
        CUSTOM = "custom"

    def __init__(self, kind, range_, description, hopping=Hopping.ADJACENCY):
        self.kind = kind
        self.range = float(range_)
        self.description = description
        self.hopping = hopping
        self._contexts = weakref.WeakKeyDictionary()

    def __repr__(self):
        return f"OperatorRule({self.description})"

    def context(self, omega):
        if omega not in self._contexts:
            self._contexts[omega] = self._prepare(omega)
        return self._contexts[omega]

    def _prepare(self, omega):
        ctx = {}
        if self.hopping is Hopping.LAPLACIAN:
            ctx["degree"] = self._degrees(omega, ctx)
        return ctx

    def _degrees(self, omega, ctx):
        degree = np.zeros(len(omega))
        if len(omega) < 2:
            return degree
        pairs = omega.tree.query_pairs(self.range, output_type='ndarray')
        if len(pairs):
            values = self.offdiagonal(ctx, omega, pairs[:, 0], pairs[:, 1])
            np.add.at(degree, pairs[:, 0], values)
            np.add.at(degree, pairs[:, 1], values)
        return degree

    def offdiagonal(self, ctx, omega, I, J):
        """Entries for index arrays I, J of distinct points."""
        raise NotImplementedError

    def diagonal(self, ctx, omega, I):
        if self.hopping is Hopping.LAPLACIAN:
            return -ctx["degree"][I]
        return np.zeros(len(I))

    def kernel(self, omega, x, y):
        i, j = omega.index_of(x), omega.index_of(y)
        ctx = self.context(omega)
        if i == j:
            return float(self.diagonal(ctx, omega, np.array([i]))[0])
        return float(self.offdiagonal(ctx, omega, np.array([i]), np.array([j]))[0])


class NearestNeighbourRule(OperatorRule):
    def __init__(self, threshold, hopping=Hopping.ADJACENCY, tol=Tolerance.match):
        if threshold <= 0:
            raise ValueError(f"Hopping threshold must be positive, got {threshold}.")
        super().__init__(OperatorRule.Kind.NN_ADJACENCY, threshold + tol,
                         f"nn threshold={format_float(threshold)} hopping={hopping.value}", hopping)
        self.threshold = float(threshold)
        self.tol = tol

    def offdiagonal(self, ctx, omega, I, J):
        dist = np.linalg.norm(omega.points[I] - omega.points[J], axis=1)
        return ((dist > 0) & (dist <= self.threshold + self.tol)).astype(float)


class DecoratedRule(OperatorRule):
    """
    Hopping on a decorated set: copies of the graph edges inside each cluster,
    corners wired to the cluster's host, nearest-neighbour hopping between hosts.
    """

    def __init__(self, graph, host_threshold, hopping=Hopping.ADJACENCY, tol=Tolerance.match):
        if host_threshold < 2 * graph.scale:
            raise ScaleError(f"Host threshold {host_threshold} must be at least 2r = {2 * graph.scale}.")
        super().__init__(OperatorRule.Kind.DECORATED, host_threshold + graph.scale,
                         f"decorated threshold={format_float(host_threshold)} r={format_float(graph.scale)} "
                         f"hopping={hopping.value}", hopping)
        self.graph = graph
        self.threshold = float(host_threshold)
        self.tol = tol
        n = len(graph)
        self.edge_table = np.zeros((n, n), dtype=bool)
        for i, j in graph.edges:
            self.edge_table[i, j] = self.edge_table[j, i] = True
        self.corner = np.zeros(n, dtype=bool)
        self.corner[list(graph.corner_indices)] = True

    def _prepare(self, omega):
        r = self.graph.scale
        if omega.generator.kind is GeneratorSpec.Kind.DECORATED:
            built_at = omega.generator.param("r")
            if built_at is not None and abs(built_at - r) > self.tol:
                raise ScaleError(f"Set was decorated at r={built_at}, rule expects r={r}.")

        satellite = ~host_mask(omega, r, self.tol)
        host = np.full(len(omega), -1)
        label = np.full(len(omega), -1)
        reach = r / CLUSTER_DIVISOR + self.tol
        orphans = 0
        for i in np.flatnonzero(satellite):
            owners = [j for j in omega.tree.query_ball_point(omega.points[i], reach) if not satellite[j]]
            if len(owners) != 1:
                orphans += 1
                continue
            offset = omega.points[i] - omega.points[owners[0]]
            mismatch = np.abs(self.graph.vertices - offset).max(axis=1)
            k = int(np.argmin(mismatch))
            if mismatch[k] <= 10 * self.tol:
                host[i], label[i] = owners[0], k
            else:
                orphans += 1
        if orphans:
            logging.warning(f"{orphans} satellite points without a recognisable host carry no hopping.")

        ctx = {"satellite": satellite, "host": host, "label": label}
        if self.hopping is Hopping.LAPLACIAN:
            ctx["degree"] = self._degrees(omega, ctx)
        return ctx

    def offdiagonal(self, ctx, omega, I, J):
        satellite, host, label = ctx["satellite"], ctx["host"], ctx["label"]
        sat_i, sat_j = satellite[I], satellite[J]
        dist = np.linalg.norm(omega.points[I] - omega.points[J], axis=1)

        between_hosts = ~sat_i & ~sat_j & (dist > 0) & (dist <= self.threshold + self.tol)
        same_cluster = sat_i & sat_j & (host[I] == host[J]) & (host[I] >= 0)
        inside = same_cluster & self.edge_table[label[I], label[J]]
        host_to_corner = ~sat_i & sat_j & (host[J] == I) & self.corner[label[J]]
        corner_to_host = sat_i & ~sat_j & (host[I] == J) & self.corner[label[I]]
        return (between_hosts | inside | host_to_corner | corner_to_host).astype(float)


class CustomRule(OperatorRule):
    """Arbitrary kernel procedure (ω, x, y) -> value; the caller vouches for its range."""

    def __init__(self, kernel, range_, description="custom"):
        super().__init__(OperatorRule.Kind.CUSTOM, range_, description)
        self._kernel = kernel

    def offdiagonal(self, ctx, omega, I, J):
        return np.array([self._kernel(omega, omega.points[i], omega.points[j]) for i, j in zip(I, J)], dtype=float)

    def diagonal(self, ctx, omega, I):
        return np.array([self._kernel(omega, omega.points[i], omega.points[i]) for i in I], dtype=float)


def nn_adjacency_rule(threshold, hopping=Hopping.ADJACENCY):
    return NearestNeighbourRule(threshold, hopping)


def decorated_rule(graph, host_threshold, hopping=Hopping.ADJACENCY):
    return DecoratedRule(graph, host_threshold, hopping)


def custom_rule(kernel, range_, description="custom"):
    return CustomRule(kernel, range_, description)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    sites: np.ndarray
    matrix: np.ndarray
    window: Window
    rule: str
    indices: np.ndarray = field(default=None, repr=False)

    @property
    def dimension(self):
        return len(self.sites)

    def is_symmetric(self):
        return bool(np.array_equal(self.matrix, self.matrix.T))

    def export(self):
        return matrix_text(self.matrix)


def assemble(rule, omega, Q, tol=Tolerance.match):
    """
    Dense matrix of `rule` restricted to the sites of omega in Q, in lexicographic site order.
    """
    omega.require_trusted(Q.expanded(rule.range), f"assembly of {rule.description}")
    idx = omega.sites_in(Q, tol)
    n = len(idx)
    M = np.zeros((n, n))
    if n:
        ctx = rule.context(omega)
        if n > 1:
            pairs = cKDTree(omega.points[idx]).query_pairs(rule.range, output_type='ndarray')
            if len(pairs):
                values = rule.offdiagonal(ctx, omega, idx[pairs[:, 0]], idx[pairs[:, 1]])
                M[pairs[:, 0], pairs[:, 1]] = values
                M[pairs[:, 1], pairs[:, 0]] = values
        M[np.arange(n), np.arange(n)] = rule.diagonal(ctx, omega, idx)
    logging.debug(f"Assembled {rule.description} on {Q}: {n} sites, {int(np.count_nonzero(M))} nonzeros")
    return AssembledOperator(omega.points[idx], M, Q, rule.description, idx)


@dataclass
class AxiomReport:
    samples: int
    range_violations: int = 0
    symmetry_violations: int = 0
    equivariance_violations: int = 0
    checked_translates: int = 0
    details: list = field(default_factory=list)

    @property
    def violations(self):
        return self.range_violations + self.symmetry_violations + self.equivariance_violations

    @property
    def ok(self):
        return self.violations == 0

    def note(self, kind, message):
        setattr(self, kind, getattr(self, kind) + 1)
        if len(self.details) < 20:
            self.details.append(message)


def check_rule_axioms(rule, omega, samples=1000, seed=0, local_copies=100, tol=Tolerance.match):
    """
    Randomised audit of the finite-range operator axioms.

    1. Range: random pairs at distance >= r_A have kernel 0.
    2. Symmetry: kernel(x, y) == kernel(y, x) for random pairs within range.
    3. Equivariance: for a pair (x, y) within range, every other site x' whose
       2 r_A-neighbourhood is a translate of the one around x must give the same
       value at (x', y + x' - x). A translated cut-out of the neighbourhood is
       compared as well, which exposes dependence on data outside it.
    """
    rng = np.random.default_rng(seed)
    report = AxiomReport(samples)
    rho = 2 * rule.range
    trusted = omega.window.eroded(3 * rule.range)
    if trusted is None or len(omega) < 2:
        logging.warning("Axiom audit skipped: the sample is too small for the rule's range.")
        return report
    sites = omega.sites_in(trusted, tol)
    if len(sites) < 2:
        logging.warning("Axiom audit skipped: no sites far enough from the sample boundary.")
        return report

    # Range.
    I = rng.choice(sites, samples)
    J = rng.integers(0, len(omega), samples)
    for i, j in zip(I, J):
        x, y = omega.points[i], omega.points[j]
        if i != j and np.linalg.norm(x - y) >= rule.range and rule.kernel(omega, x, y) != 0:
            report.note("range_violations", f"nonzero kernel beyond range at {x}, {y}")

    pairs = omega.tree.query_pairs(rule.range, output_type='ndarray')
    pairs = pairs[np.isin(pairs[:, 0], sites)] if len(pairs) else pairs
    if len(pairs) == 0:
        return report
    chosen = pairs[rng.integers(0, len(pairs), samples)]

    labels, _ = classify_sites(omega, sites, rho, tol)
    members = {}
    for site, label in zip(sites, labels):
        members.setdefault(label, []).append(site)
    label_of = dict(zip(sites, labels))

    for k, (i, j) in enumerate(chosen):
        x, y = omega.points[i], omega.points[j]
        value = rule.kernel(omega, x, y)
        if value != rule.kernel(omega, y, x):
            report.note("symmetry_violations", f"asymmetric kernel at {x}, {y}")

        others = [m for m in members[label_of[i]] if m != i]
        for m in rng.permutation(others)[:3]:
            t = omega.points[m] - x
            if rule.kernel(omega, x + t, y + t) != value:
                report.note("equivariance_violations", f"kernel differs between {x} and translate {x + t}")
            report.checked_translates += 1

        if k < local_copies:
            shift = rng.uniform(-10, 10, omega.d)
            around = Window.cube(np.linalg.norm(y - x) + 2 * rule.range, omega.d, center=x)
            copy = omega.restricted(around).shifted(shift)
            if rule.kernel(copy, x + shift, y + shift) != value:
                report.note("equivariance_violations", f"kernel at {x}, {y} changes on a translated local copy")
            report.checked_translates += 1

    logging.info(f"Axiom audit of {rule.description}: {report.violations} violations "
                 f"({report.checked_translates} translate comparisons)")
    return report
