#!/usr/bin/env python3
"""
Patterns (finite configurations with a support window), their translation
classes, occurrences and frequencies.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from delone_ids.Geometry.geometry import Window
from delone_ids.Utilities.log_formatter import VERBOSE
from delone_ids.Utilities.storage import point_file_text, read_point_file, write_atomic
from delone_ids.Utilities.utils import Tolerance, canonical_key, digest, format_float, lexicographic_order


@dataclass(frozen=True, eq=False)
class Pattern:
    points: np.ndarray
    support: Window

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, self.support.d)
        object.__setattr__(self, "points", points[lexicographic_order(points)])
        if not np.all(self.support.contains(self.points)):
            raise ValueError("Every point of a pattern must lie in its support.")

    def __len__(self):
        return len(self.points)

    @property
    def is_ball(self):
        """Ball support centered at one of the points."""
        if self.support.is_box or len(self.points) == 0:
            return False
        return bool(np.min(np.linalg.norm(self.points - self.support.center, axis=1)) <= Tolerance.match)

    @property
    def radius(self):
        if self.support.is_box:
            raise ValueError("Box patterns have no radius.")
        return self.support.radius

    def anchor(self):
        if self.is_ball:
            return self.support.center
        if len(self.points):
            return self.points[0]
        return self.support.lower

    def candidate_anchors(self):
        if self.is_ball:
            return [self.support.center]
        if len(self.points):
            return list(self.points)
        return [self.support.lower]

    def translated(self, t):
        return Pattern(self.points + np.asarray(t, dtype=float), self.support.translated(t))


@dataclass(frozen=True, eq=False)
class PatternClass:
    canonical: Pattern

    @classmethod
    def from_pattern(cls, P):
        return cls(P.translated(-P.anchor()))

    @property
    def is_ball(self):
        return self.canonical.is_ball

    @property
    def radius(self):
        return self.canonical.radius

    @property
    def d(self):
        return self.canonical.support.d

    def relative_points(self):
        """Points relative to the ball center, in canonical order."""
        rel = self.canonical.points - self.canonical.support.center
        return rel[lexicographic_order(rel)]

    def digest(self):
        return digest(self.canonical.points)

    def header(self):
        """Ball classes are written about their center, so only the radius goes in the header."""
        if self.is_ball:
            return [("support", {"kind": "ball", "r": format_float(self.radius)})]
        return [("support", self.canonical.support.header_fields())]

    def file_points(self):
        return self.relative_points() if self.is_ball else self.canonical.points


def pattern_class_text(P):
    return point_file_text(P.file_points(), P.header())


def save_pattern_class(P, path):
    write_atomic(path, pattern_class_text(P))
    logging.debug(f"Saved pattern class {P.digest()} ({len(P.canonical)} points) to {path}")


def load_pattern_class(path):
    points, headers = read_point_file(path)
    if "support" not in headers:
        raise ValueError(f"{path} is not a pattern-class file (missing '# support' header).")
    fields = headers["support"]
    if fields.get("kind") == "ball" and "center" not in fields:
        support = Window.ball(np.zeros(points.shape[1]), float(fields["r"]))
    else:
        support = Window.from_header(fields)
    return PatternClass.from_pattern(Pattern(points, support))


def singleton_class(s, d=2):
    """The class of a lone point: ({0}, B(0, s))."""
    return PatternClass(Pattern(np.zeros((1, d)), Window.ball(np.zeros(d), s)))


def restrict(omega, Q):
    """Q ∧ ω: the points of omega inside Q, with Q as support."""
    omega.require_trusted(Q, "restriction")
    return Pattern(omega.points[omega.sites_in(Q)], Q)


def ball_pattern(omega, x, s):
    return restrict(omega, Window.ball(x, s))


def same_points(A, B, tol):
    if len(A) != len(B):
        return False
    if len(A) == 0:
        return True
    dist, idx = cKDTree(A).query(B)
    return bool(dist.max() <= tol and len(np.unique(idx)) == len(A))


def equivalent(P1, P2, tol=Tolerance.match):
    """
    Whether some translation t maps P2 onto P1 (points and support) within tol.

    t is tried for every pairing of P1's anchor with a candidate anchor of P2.
    """
    if tol <= 0:
        raise ValueError("Tolerance must be positive.")
    S1, S2 = P1.support, P2.support
    if S1.kind is not S2.kind or S1.d != S2.d or len(P1) != len(P2):
        return False
    if S1.is_box:
        if not np.allclose(S1.half_widths, S2.half_widths, rtol=0, atol=tol):
            return False
    elif abs(S1.radius - S2.radius) > tol:
        return False

    a1 = P1.anchor()
    for a2 in P2.candidate_anchors():
        t = a1 - a2
        if not np.allclose(S2.center + t, S1.center, rtol=0, atol=tol):
            continue
        if same_points(P1.points, P2.points + t, tol):
            return True
    return False


def _ordered(rel):
    return rel[lexicographic_order(rel)]


def _neighbourhoods(omega, idx, s, tol):
    """Relative, canonically ordered ball neighbourhoods B(x, s) ∧ ω for x = omega.points[idx]."""
    centers = omega.points[idx]
    if len(idx) == 0:
        return []
    lists = omega.tree.query_ball_point(centers, s + tol)
    return [_ordered(omega.points[nb] - c) for nb, c in zip(lists, centers)]


class _ClassTable:
    """
    Buckets ball neighbourhoods into translation classes.

    Lookup goes through a key quantised on a coarse grid; the exact tolerance
    check is done against the stored representative. A miss falls back to a
    scan of the representatives with the same number of points.
    """

    def __init__(self, tol):
        self.tol = tol
        self.by_key = {}
        self.by_size = {}
        self.representatives = []

    def _distance(self, rel, rep):
        return float(np.abs(rel - rep).max()) if len(rel) else 0.0

    def classify(self, rel):
        for label in self.by_key.get(canonical_key(rel), []):
            if self._distance(rel, self.representatives[label]) <= self.tol:
                return label
        closest = np.inf
        for label in self.by_size.get(len(rel), []):
            dist = self._distance(rel, self.representatives[label])
            if dist <= self.tol:
                return label
            closest = min(closest, dist)
        if closest < 10 * self.tol:
            logging.warning(f"Ill-conditioned pattern classification: classes only {closest:.3g} apart "
                            f"(tolerance {self.tol:.3g}).")
        label = len(self.representatives)
        self.representatives.append(rel)
        self.by_key.setdefault(canonical_key(rel), []).append(label)
        self.by_size.setdefault(len(rel), []).append(label)
        return label


def classify_sites(omega, idx, s, tol=Tolerance.match):
    """
    Label the sites omega.points[idx] by the class of B(x, s) ∧ ω.

    Returns:
        labels: class label per site, labels numbered by first appearance
        representatives: relative neighbourhood of each class
    """
    table = _ClassTable(tol)
    labels = np.array([table.classify(rel) for rel in _neighbourhoods(omega, idx, s, tol)], dtype=int)
    return labels, table.representatives


def occurrences(omega, P, Q, tol=Tolerance.match):
    """
    All t in omega ∩ Q with B(t, s(P)) ∧ ω equivalent to P, in lexicographic order.
    """
    if not P.is_ball:
        raise ValueError("Occurrences are only defined for ball-pattern classes.")
    s = P.radius
    omega.require_trusted(Q.expanded(s), f"occurrence scan with radius {s}")
    idx = omega.sites_in(Q, tol)
    ref = P.relative_points()
    hits = [i for i, rel in zip(idx, _neighbourhoods(omega, idx, s, tol))
            if rel.shape == ref.shape and (len(rel) == 0 or np.abs(rel - ref).max() <= tol)]
    return omega.points[np.array(hits, dtype=int)]


@dataclass(frozen=True)
class WindowCount:
    volume: float
    count: int
    ratio: float


@dataclass(frozen=True)
class FrequencyEstimate:
    """
    nu is the ratio on the largest window. convergence is the relative spread
    (max - min) / max of the ratios on the last three windows, 0 when all are 0.
    """
    per_window: tuple
    nu: float
    convergence: float


def frequency(omega, P, seq, tol=Tolerance.match):
    per_window = []
    for Q in seq:
        count = len(occurrences(omega, P, Q, tol))
        volume = Q.volume()
        per_window.append(WindowCount(volume, count, count / volume))
        logging.log(VERBOSE, f"Pattern {P.digest()}: {count} occurrences in {Q} (ratio {count / volume:.6g})")

    ratios = np.array([w.ratio for w in per_window[-3:]])
    top = ratios.max()
    convergence = float((ratios.max() - ratios.min()) / top) if top > 0 else 0.0
    return FrequencyEstimate(tuple(per_window), per_window[-1].ratio, convergence)


def enumerate_ball_classes(omega, s, Q, tol=Tolerance.match):
    """
    Partition the ball patterns of radius s around the sites in Q into classes.

    Returns:
        list of (PatternClass, count), in order of first appearance along the
        lexicographic site order
    """
    omega.require_trusted(Q.expanded(s), f"class enumeration with radius {s}")
    idx = omega.sites_in(Q, tol)
    labels, representatives = classify_sites(omega, idx, s, tol)
    counts = np.bincount(labels, minlength=len(representatives))
    classes = []
    for label, rel in enumerate(representatives):
        P = Pattern(rel, Window.ball(np.zeros(omega.d), s))
        classes.append((PatternClass(P), int(counts[label])))
    logging.debug(f"{len(classes)} ball classes of radius {s} among {len(idx)} sites")
    return classes


def max_disjoint(occ, diameter):
    """
    Greedy packing of the balls of the given diameter centered at `occ`.

    Occurrences are scanned in lexicographic order and kept when their ball is
    disjoint from every ball kept so far (closed balls: centers must be more
    than `diameter` apart).
    """
    if diameter <= 0:
        raise ValueError("Diameter must be positive.")
    occ = np.asarray(occ, dtype=float)
    if len(occ) == 0:
        return 0
    occ = occ.reshape(len(occ), -1)
    occ = occ[lexicographic_order(occ)]
    tree = cKDTree(occ)
    blocked = np.zeros(len(occ), dtype=bool)
    kept = 0
    for i in range(len(occ)):
        if blocked[i]:
            continue
        kept += 1
        blocked[tree.query_ball_point(occ[i], diameter)] = True
    return kept


def dominant_class(omega, s, tol=Tolerance.match):
    """The most frequent ball class of radius s in the sample; ties go to the first found."""
    inner = omega.window.eroded(s)
    if inner is None:
        raise ValueError(f"{omega.window} is too small for patterns of radius {s}.")
    classes = enumerate_ball_classes(omega, s, inner, tol)
    if not classes:
        raise ValueError(f"No sites farther than {s} from the boundary of {omega.window}.")
    return max(classes, key=lambda item: item[1])[0]
