#!/usr/bin/env python3
"""
Jump lower bound for decorated systems.

Every occurrence of the decorated pattern carries states at E that vanish
outside the cluster. Copies whose s(P)-balls are disjoint give independent
states, and a packing argument shows that at least 1/C of all occurrences can
be chosen disjoint, where C = ((3 s(P) + r) / r)^d bounds the number of
points of a set with packing radius r in a ball of radius 3 s(P). The jump of
the counting function at E is therefore at least nu(P) / C.

On a decorated sample the occurrences of P in the base set are counted as the
occurrences of the cluster class of G; the two coincide one to one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from delone_ids.Decoration.mld import cluster_class
from delone_ids.Geometry.patterns import frequency, max_disjoint, occurrences
from delone_ids.Spectral.spectra import counting, detect_jumps, ids_curve, jump_near
from delone_ids.Utilities.storage import table_text
from delone_ids.Utilities.utils import Tolerance, cluster_tolerance, format_float


def packing_constant(r_P, r_omega, d):
    """Ball volume ratio |B(0, 3 r_P + r_omega)| / |B(0, r_omega)|."""
    if r_P <= 0 or r_omega <= 0:
        raise ValueError(f"Radii must be positive, got r_P={r_P}, r_omega={r_omega}.")
    return float(((3 * r_P + r_omega) / r_omega) ** d)


def disjoint_inequality_check(count, disjoint, C):
    """Whether `disjoint` pairwise disjoint copies out of `count` occurrences reach count / C."""
    if disjoint > count:
        raise ValueError(f"Disjoint count {disjoint} exceeds the occurrence count {count}.")
    return disjoint >= count / C


@dataclass(frozen=True)
class BoundReport:
    C: float
    nu: float
    lower_bound: float
    observed_jump: float
    satisfied: bool
    E: float = 0.0
    window: str = ""

    def render(self):
        fields = [
            ("E", format_float(self.E)),
            ("window", self.window),
            ("C", format_float(self.C)),
            ("nu", format_float(self.nu)),
            ("lower_bound", format_float(self.lower_bound)),
            ("observed_jump", format_float(self.observed_jump)),
            ("satisfied", str(self.satisfied).lower()),
        ]
        return "# bound\n" + "\n".join(f"{key}={value}" for key, value in fields) + "\n"


def _observed_jump(ids, E, cluster_tol):
    """Weight of the eigenvalue cluster at E, 0 when no cluster sits there."""
    if ids.dimension == 0:
        return 0.0
    jump = jump_near(detect_jumps(ids, 1 / ids.volume, cluster_tol), E)
    return jump.weight if jump is not None else 0.0


def jump_bound_report(rule, omega, P, G, seq, E, cluster_tol=None):
    """
    Compare the observed jump at E on the largest window of `seq` with nu(P) / C.

    Args:
        omega: the decorated sample.
        P: pattern class the decoration was attached to; only s(P) enters C.
        G: decoration graph; its cluster class stands in for P on omega.
    """
    nu = frequency(omega, cluster_class(G), seq).nu
    C = packing_constant(P.radius, omega.r_pack, omega.d)
    lower_bound = nu / C

    largest = seq.largest
    ids = ids_curve(rule, omega, largest)
    observed = _observed_jump(ids, E, cluster_tol)
    satisfied = observed >= lower_bound - Tolerance.bound_slack
    logging.info(f"Jump bound at E={E}: observed {observed:.6g} vs nu/C = {nu:.6g}/{C:.6g} = {lower_bound:.6g}")
    return BoundReport(C, nu, lower_bound, observed, bool(satisfied), float(E), repr(largest))


@dataclass(frozen=True)
class PackingAudit:
    C: float
    max_count: int
    samples: int

    @property
    def ok(self):
        return self.max_count <= self.C


def packing_audit(omega, r_P, samples=100, seed=0):
    """Largest number of points in B(x, 3 r_P) over sampled sites x, against C."""
    C = packing_constant(r_P, omega.r_pack, omega.d)
    inner = omega.window.eroded(3 * r_P)
    sites = omega.sites_in(inner) if inner is not None else np.zeros(0, dtype=int)
    if len(sites) == 0:
        logging.warning(f"Packing audit skipped: {omega.window} is too small for radius {3 * r_P}.")
        return PackingAudit(C, 0, 0)
    rng = np.random.default_rng(seed)
    centers = omega.points[rng.choice(sites, samples)]
    counts = omega.tree.query_ball_point(centers, 3 * r_P, return_length=True)
    return PackingAudit(C, int(np.max(counts)), samples)


@dataclass(frozen=True)
class ChainRow:
    L: float
    epsilon: float
    below: float
    above: float
    occurrences: int
    disjoint: int
    holds: bool


def _cluster_gap(values, E, tol):
    """Half the distance between the eigenvalue cluster at E and the rest of the spectrum."""
    values = np.asarray(values)
    inside = np.abs(values - E) <= tol
    lo = values[inside].min() if inside.any() else E
    hi = values[inside].max() if inside.any() else E
    others = values[~inside]
    gaps = np.concatenate([lo - others[others < lo], others[others > hi] - hi])
    return float(gaps.min() / 2) if len(gaps) else 1.0


def inequality_chain(rule, omega, P, G, seq, E, cluster_tol=None):
    """
    Per window Q: N_Q(E - eps) <= N_Q(E + eps) - #occurrences / (C |Q|), with eps half
    the spectral gap around the cluster at E, together with the disjoint-copy count.
    """
    C = packing_constant(P.radius, omega.r_pack, omega.d)
    marker = cluster_class(G)
    rows = []
    for Q in seq:
        ids = ids_curve(rule, omega, Q)
        tol = cluster_tolerance(ids.eigenvalues) if cluster_tol is None else cluster_tol
        eps = _cluster_gap(ids.eigenvalues, E, tol)
        below, above = float(counting(ids, E - eps)), float(counting(ids, E + eps))
        occ = occurrences(omega, marker, Q)
        disjoint = max_disjoint(occ, 2 * P.radius)
        holds = (below <= above - len(occ) / (C * ids.volume) + Tolerance.bound_slack
                 and disjoint_inequality_check(len(occ), disjoint, C))
        L = float(Q.half_widths.min()) if Q.is_box else float(Q.radius)
        rows.append(ChainRow(L, eps, below, above, len(occ), disjoint, bool(holds)))
    return rows


def chain_text(rows):
    return table_text("inequality chain", ["L", "eps", "N(E-eps)", "N(E+eps)", "occurrences", "disjoint", "holds"],
                      [(r.L, r.epsilon, r.below, r.above, r.occurrences, r.disjoint, str(r.holds).lower())
                       for r in rows])
