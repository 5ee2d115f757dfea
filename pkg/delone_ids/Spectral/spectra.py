#!/usr/bin/env python3
"""
Finite-volume spectra: eigensystems, counting functions (IDS approximants),
jump detection and extraction of eigenvectors vanishing near the boundary.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial
from scipy import linalg

from delone_ids.Decoration.mld import Hopping, decorate
from delone_ids.Geometry.geometry import GeneratorSpec, Window, generate, inner_boundary_sites
from delone_ids.Geometry.patterns import singleton_class
from delone_ids.Spectral.operators import assemble, decorated_rule
from delone_ids.Utilities.log_formatter import VERBOSE
from delone_ids.Utilities.storage import table_text
from delone_ids.Utilities.utils import Tolerance, cluster_tolerance, format_float

MAX_DENSE_DIMENSION = 6000


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray
    dimension: int


def _check_dimension(n):
    if n > MAX_DENSE_DIMENSION:
        raise ValueError(f"Dense eigensolves are limited to {MAX_DENSE_DIMENSION} sites, got {n}.")


def eigensystem(A):
    """Full symmetric eigendecomposition; values ascending, vectors in columns."""
    M = A.matrix
    n = len(M)
    _check_dimension(n)
    if n == 0:
        return EigenSystem(np.zeros(0), np.zeros((0, 0)), 0)
    try:
        values, vectors = linalg.eigh(M)
    except linalg.LinAlgError as e:
        raise EigensolverError(f"Eigensolver failed on a {n}x{n} matrix: {e}") from e

    scale = max(float(np.abs(M).max()), 1.0)
    residual = np.linalg.norm(M @ vectors - vectors * values, axis=0)
    bad = residual > Tolerance.residual * (1 + np.abs(values)) * scale
    if np.any(bad):
        raise EigensolverError(f"{bad.sum()} eigenpairs exceed the residual bound (max {residual.max():.3g}).")
    drift = np.abs(vectors.T @ vectors - np.eye(n)).max()
    if drift > Tolerance.residual:
        raise EigensolverError(f"Eigenvectors are not orthonormal (deviation {drift:.3g}).")
    logging.log(VERBOSE, f"Eigensystem n={n}: max residual {residual.max():.3g}")
    return EigenSystem(values, vectors, n)


def eigenvalues(A):
    M = A.matrix
    _check_dimension(len(M))
    if len(M) == 0:
        return np.zeros(0)
    try:
        return linalg.eigvalsh(M)
    except linalg.LinAlgError as e:
        raise EigensolverError(f"Eigensolver failed on a {len(M)}x{len(M)} matrix: {e}") from e


@dataclass(frozen=True, eq=False)
class IDSApproximant:
    eigenvalues: np.ndarray
    volume: float
    label: str = ""

    def __post_init__(self):
        if self.volume <= 0:
            raise ValueError(f"Window volume must be positive, got {self.volume}.")
        object.__setattr__(self, "eigenvalues", np.sort(np.asarray(self.eigenvalues, dtype=float)))

    def __call__(self, E):
        return counting(self, E)

    def left_limit(self, E):
        return np.searchsorted(self.eigenvalues, E, side='left') / self.volume

    @property
    def dimension(self):
        return len(self.eigenvalues)


def counting(ids, E):
    """N(E) = #{λ <= E} / |Q|."""
    return np.searchsorted(ids.eigenvalues, E, side='right') / ids.volume


def ids_curve(rule, omega, Q, label=None):
    A = assemble(rule, omega, Q)
    values = eigenvalues(A)
    return IDSApproximant(values, Q.volume(), label if label is not None else repr(Q))


def sup_distance(N1, N2):
    """Exact sup_E |N1(E) - N2(E)|, evaluated on both sides of every jump of either curve."""
    jumps = np.union1d(N1.eigenvalues, N2.eigenvalues)
    if len(jumps) == 0:
        return 0.0
    right = np.abs(counting(N1, jumps) - counting(N2, jumps))
    left = np.abs(N1.left_limit(jumps) - N2.left_limit(jumps))
    return float(max(right.max(), left.max()))


def translate_sup_distances(rule, omega, L_small, L_large, shifts):
    """
    sup_distance between the counting functions on [-L_small, L_small]^d + t and
    [-L_large, L_large]^d + t for every shift t.

    Returns:
        distances: one value per shift
        sample_max: their maximum (a maximum over the sampled shifts only)
    """
    distances = []
    for t in shifts:
        t = np.asarray(t, dtype=float)
        small = Window.cube(L_small, omega.d, center=t)
        large = Window.cube(L_large, omega.d, center=t)
        distances.append(sup_distance(ids_curve(rule, omega, small), ids_curve(rule, omega, large)))
    return distances, max(distances)


@dataclass(frozen=True)
class Jump:
    energy: float
    weight: float
    multiplicity: int


@dataclass(frozen=True)
class JumpReport:
    jumps: tuple
    cluster_tol: float
    volume: float
    label: str = ""


def eigenvalue_clusters(values, tol):
    """Split sorted eigenvalues into runs whose consecutive gaps are at most tol."""
    if len(values) == 0:
        return []
    breaks = np.flatnonzero(np.diff(values) > tol) + 1
    return np.split(values, breaks)


def detect_jumps(ids, weight_floor, cluster_tol=None):
    if weight_floor <= 0:
        raise ValueError("Weight floor must be positive.")
    tol = cluster_tolerance(ids.eigenvalues) if cluster_tol is None else cluster_tol
    jumps = []
    for cluster in eigenvalue_clusters(ids.eigenvalues, tol):
        weight = len(cluster) / ids.volume
        if weight >= weight_floor:
            jumps.append(Jump(float(cluster.mean()), weight, len(cluster)))
    return JumpReport(tuple(jumps), tol, ids.volume, ids.label)


def jump_near(report, E):
    """The reported jump at E, or None."""
    tol = max(report.cluster_tol, Tolerance.match)
    return next((jump for jump in report.jumps if abs(jump.energy - E) <= tol), None)


def jump_report_text(report):
    return table_text(f"jumps window={report.label} cluster_tol={format_float(report.cluster_tol)}",
                      ["E", "weight", "multiplicity", "volume"],
                      [(j.energy, j.weight, j.multiplicity, float(report.volume)) for j in report.jumps])


def max_cluster_weight(ids, cluster_tol=None):
    tol = cluster_tolerance(ids.eigenvalues) if cluster_tol is None else cluster_tol
    clusters = eigenvalue_clusters(ids.eigenvalues, tol)
    return max((len(c) for c in clusters), default=0) / ids.volume


def multiplicity_at(values, E, tol):
    values = np.asarray(values)
    return int(np.count_nonzero(np.abs(values - E) <= tol))


def jump_at(ids, E, tol=None):
    """Height of the counting function step across [E - tol, E + tol]."""
    tol = cluster_tolerance(ids.eigenvalues) if tol is None else tol
    return multiplicity_at(ids.eigenvalues, E, tol) / ids.volume


@dataclass(frozen=True, eq=False)
class CompactEigenfunction:
    vector: np.ndarray
    residual: float
    eigenspace_dimension: int
    boundary_count: int


def _boundary_rows(A, boundary, tol=Tolerance.match):
    boundary = np.asarray(boundary, dtype=float).reshape(-1, A.sites.shape[1] if A.dimension else 0)
    if len(boundary) == 0:
        return np.zeros(0, dtype=int)
    rows = []
    for p in boundary:
        dist = np.abs(A.sites - p).max(axis=1)
        i = int(np.argmin(dist))
        if dist[i] > tol:
            raise ValueError(f"Boundary point {p} is not a site of the operator.")
        rows.append(i)
    return np.array(rows, dtype=int)


def extract_compact_eigenfunction(A, E, boundary, tol):
    """
    A unit eigenvector near E with zero coordinates on `boundary`, if the
    eigenspace U = span{v : |λ - E| <= tol} is larger than the boundary.

    Returns:
        CompactEigenfunction or None
    """
    if A.dimension == 0:
        return None
    rows = _boundary_rows(A, boundary)
    system = eigensystem(A)
    U = system.vectors[:, np.abs(system.values - E) <= tol]

    k = U.shape[1]
    logging.log(VERBOSE, f"Eigenspace near E={E}: dim {k}, boundary sites {len(rows)}")
    if k == 0 or k <= len(rows):
        return None

    if len(rows):
        coefficients = linalg.null_space(U[rows, :])
        if coefficients.shape[1] == 0:
            return None
        f = U @ coefficients[:, 0]
        f[rows] = 0.0
    else:
        f = U[:, 0].copy()
    f /= np.linalg.norm(f)
    residual = float(np.linalg.norm(A.matrix @ f - E * f))
    return CompactEigenfunction(f, residual, k, len(rows))


def zero_extension_residual(rule, omega, f, A, E, margin):
    """
    Residual of f, extended by zero to the window of A enlarged by `margin`,
    under the operator assembled there.
    """
    big = assemble(rule, omega, A.window.expanded(margin))
    position = {int(i): k for k, i in enumerate(big.indices)}
    g = np.zeros(big.dimension)
    for value, i in zip(f, A.indices):
        g[position[int(i)]] = value
    return float(np.linalg.norm(big.matrix @ g - E * g))


@dataclass(frozen=True)
class ConverseDiagnostic:
    label: str
    L: float
    kernel_dimension: int
    boundary_count: int
    c: float
    epsilon: float
    crossover: bool


def converse_diagnostic(rule, omega, seq, E, cluster_tol=None):
    """
    Per window: multiplicity of E, number of sites within 2 r_A of the boundary,
    and both divided by the window volume. `crossover` marks windows where the
    multiplicity exceeds the boundary count, so that an eigenvector vanishing
    on the boundary layer must exist.
    """
    diagnostics = []
    for Q in seq:
        A = assemble(rule, omega, Q)
        values = eigenvalues(A)
        tol = cluster_tolerance(values) if cluster_tol is None else cluster_tol
        kernel = multiplicity_at(values, E, tol)
        boundary = len(inner_boundary_sites(omega, Q, 2 * rule.range))
        volume = Q.volume()
        L = float(Q.half_widths.min()) if Q.is_box else float(Q.radius)
        diagnostics.append(ConverseDiagnostic(repr(Q), L, kernel, boundary, kernel / volume,
                                              boundary / volume, kernel > boundary))
        logging.log(VERBOSE, f"Converse diagnostic L={L:g}: multiplicity {kernel}, boundary {boundary}")
    return diagnostics


def first_crossover(diagnostics):
    return next((k for k, diag in enumerate(diagnostics) if diag.crossover), None)


def spectral_pairing(ids, poly_coeffs):
    """(1/|Q|) Σ φ(λ) for the polynomial φ with coefficients in ascending order."""
    return float(np.sum(polynomial.polyval(ids.eigenvalues, np.asarray(poly_coeffs, dtype=float))) / ids.volume)


def isolated_cell_multiplicity(G, E, hopping=Hopping.ADJACENCY, host_threshold=1.0, tol=1e-8):
    """
    Multiplicity of E on one decorated cell (host plus cluster), counted among
    eigenvectors vanishing at the host. Those survive any coupling of the host
    to the rest of the system, so each cluster contributes this many states at E.
    """
    d = G.vertices.shape[1]
    rule = decorated_rule(G, max(host_threshold, 2 * G.scale), hopping)
    margin = rule.range + 1.0
    lone = generate(GeneratorSpec(GeneratorSpec.Kind.SQUARE, spacing=4 * margin), Window.cube(2 * margin, d))
    cell = decorate(lone, singleton_class(G.scale, d), G)
    A = assemble(rule, cell, Window.cube(G.cluster_radius, d))
    system = eigensystem(A)
    U = system.vectors[:, np.abs(system.values - E) <= tol]
    if U.shape[1] == 0:
        return 0
    host_row = int(np.argmin(np.linalg.norm(A.sites, axis=1)))
    return int(U.shape[1] - np.linalg.matrix_rank(U[[host_row], :], tol=Tolerance.residual))
