#!/usr/bin/env python3
"""
Finite samples of Delone sets, the windows they live in and van Hove sequences.

A DeloneSet is always a finite sample: `window` is the region in which the
sample is complete. Queries that need points outside it raise
UntrustedRegionError instead of silently returning truncated answers.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.spatial import Voronoi, cKDTree
from scipy.special import gamma

from delone_ids.Utilities.storage import point_file_text, read_point_file, write_atomic
from delone_ids.Utilities.utils import Tolerance, format_float, format_vector, lexicographic_order


class UntrustedRegionError(ValueError):
    pass


class UnknownGeneratorError(ValueError):
    pass


class EmptyWindowError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Window:
    """
    Closed axis-parallel box or closed ball in R^d.

    Boxes are stored by center and per-axis half widths, balls by center and radius.
    A box may be flat along some axes (half width 0), which is useful for
    one-dimensional cuts through planar sets.
    """

    class Kind(enum.Enum):
        BOX = "box"
        BALL = "ball"

    kind: "Window.Kind"
    center: np.ndarray
    half_widths: np.ndarray = None
    radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        if self.kind is Window.Kind.BOX:
            half = np.asarray(self.half_widths, dtype=float).reshape(-1)
            if half.shape != self.center.shape:
                raise ValueError("Box center and half widths must have the same dimension.")
            if np.any(half < 0):
                raise ValueError(f"Box half widths must be nonnegative, got {half}.")
            object.__setattr__(self, "half_widths", half)
        elif self.radius <= 0:
            raise ValueError(f"Ball radius must be positive, got {self.radius}.")

    @classmethod
    def cube(cls, L, d=2, center=None):
        if L <= 0:
            raise ValueError(f"Cube half width must be positive, got {L}.")
        center = np.zeros(d) if center is None else center
        return cls(cls.Kind.BOX, center, np.full(d, float(L)))

    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if np.any(upper < lower):
            raise ValueError(f"Box upper corner {upper} lies below lower corner {lower}.")
        return cls(cls.Kind.BOX, (lower + upper) / 2, (upper - lower) / 2)

    @classmethod
    def ball(cls, center, radius):
        return cls(cls.Kind.BALL, center, radius=float(radius))

    @property
    def d(self):
        return len(self.center)

    @property
    def is_box(self):
        return self.kind is Window.Kind.BOX

    @property
    def lower(self):
        return self.center - (self.half_widths if self.is_box else self.radius)

    @property
    def upper(self):
        return self.center + (self.half_widths if self.is_box else self.radius)

    def volume(self):
        if self.is_box:
            return float(np.prod(2 * self.half_widths))
        return ball_volume(self.radius, self.d)

    def contains(self, points, tol=Tolerance.match):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.size == 0:
            return np.zeros(len(points), dtype=bool)
        if self.is_box:
            return np.all(np.abs(points - self.center) <= self.half_widths + tol, axis=1)
        return np.linalg.norm(points - self.center, axis=1) <= self.radius + tol

    def contains_window(self, other, tol=Tolerance.match):
        if self.is_box:
            return bool(np.all(other.lower >= self.lower - tol) and np.all(other.upper <= self.upper + tol))
        if other.is_box:
            corners = np.array(np.meshgrid(*zip(other.lower, other.upper), indexing='ij')).reshape(other.d, -1).T
            return bool(np.all(self.contains(corners, tol)))
        return bool(np.linalg.norm(other.center - self.center) + other.radius <= self.radius + tol)

    def distance_to_boundary(self, points):
        """Distance of points lying inside the window to its boundary."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if len(points) == 0:
            return np.zeros(0)
        if self.is_box:
            gaps = self.half_widths - np.abs(points - self.center)
            return np.maximum(gaps.min(axis=1), 0.0)
        return np.maximum(self.radius - np.linalg.norm(points - self.center, axis=1), 0.0)

    def expanded(self, margin):
        if self.is_box:
            return Window(Window.Kind.BOX, self.center, self.half_widths + margin)
        return Window.ball(self.center, self.radius + margin)

    def eroded(self, margin):
        """The window shrunk by `margin`, or None when nothing is left."""
        if self.is_box:
            half = self.half_widths - margin
            if np.any(half < -Tolerance.match):
                return None
            return Window(Window.Kind.BOX, self.center, np.maximum(half, 0.0))
        if self.radius - margin <= 0:
            return None
        return Window.ball(self.center, self.radius - margin)

    def translated(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_box:
            return Window(Window.Kind.BOX, self.center + t, self.half_widths)
        return Window.ball(self.center + t, self.radius)

    def same_as(self, other, tol=Tolerance.match):
        if self.kind is not other.kind or self.d != other.d:
            return False
        if not np.allclose(self.center, other.center, rtol=0, atol=tol):
            return False
        if self.is_box:
            return bool(np.allclose(self.half_widths, other.half_widths, rtol=0, atol=tol))
        return abs(self.radius - other.radius) <= tol

    def header_fields(self):
        if self.is_box:
            return {"kind": "box", "lower": format_vector(self.lower), "upper": format_vector(self.upper)}
        return {"kind": "ball", "center": format_vector(self.center), "r": format_float(self.radius)}

    @classmethod
    def from_header(cls, fields):
        if fields.get("kind") == "box":
            return cls.box(_parse_vector(fields["lower"]), _parse_vector(fields["upper"]))
        if fields.get("kind") == "ball":
            return cls.ball(_parse_vector(fields["center"]), float(fields["r"]))
        raise ValueError(f"Unknown window header {fields}.")

    def __repr__(self):
        if self.is_box:
            return f"Window(box {format_vector(self.lower)} .. {format_vector(self.upper)})"
        return f"Window(ball {format_vector(self.center)} r={format_float(self.radius)})"


def _parse_vector(text):
    return np.array([float(v) for v in text.split(",")])


def ball_volume(s, d):
    return float(np.pi ** (d / 2) / gamma(d / 2 + 1) * s ** d)


@dataclass(frozen=True, eq=False)
class VanHoveSequence:
    windows: tuple

    def __post_init__(self):
        windows = tuple(self.windows)
        if not windows:
            raise ValueError("A van Hove sequence needs at least one window.")
        sizes = [w.half_widths.min() if w.is_box else w.radius for w in windows]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"Window sizes must be strictly increasing, got {sizes}.")
        object.__setattr__(self, "windows", windows)

    @classmethod
    def cubes(cls, L_values, d=2):
        return cls(tuple(Window.cube(L, d) for L in L_values))

    def __iter__(self):
        return iter(self.windows)

    def __len__(self):
        return len(self.windows)

    def __getitem__(self, k):
        return self.windows[k]

    @property
    def largest(self):
        return self.windows[-1]

    def boundary_ratios(self, R):
        return np.array([boundary_volume(Q, R) / Q.volume() for Q in self.windows])

    def is_van_hove(self, R):
        ratios = self.boundary_ratios(R)
        return bool(np.all(np.diff(ratios) < 0))


@dataclass(frozen=True)
class GeneratorSpec:
    """
    Tagged description of where a point set comes from.

    `params` holds extra (name, value) pairs, e.g. the decoration scale and
    pattern digest of a decorated set. `base` is the spec of the set a
    decorated set was derived from.
    """

    class Kind(enum.Enum):
        SQUARE = "square"
        TRIANGULAR = "triangular"
        CUT_AND_PROJECT = "cutproject"
        DECORATED = "decorated"
        FILE = "file"

    kind: "GeneratorSpec.Kind"
    spacing: float = 1.0
    origin: tuple = None
    shift: tuple = None
    path: str = None
    params: tuple = ()
    base: "GeneratorSpec" = None

    def param(self, name, default=None):
        return dict(self.params).get(name, default)

    def tag(self):
        parts = [self.kind.value]
        if self.kind in (GeneratorSpec.Kind.SQUARE, GeneratorSpec.Kind.TRIANGULAR,
                         GeneratorSpec.Kind.CUT_AND_PROJECT):
            parts.append(f"a={format_float(self.spacing)}")
        if self.origin is not None:
            parts.append(f"origin={format_vector(self.origin)}")
        if self.shift is not None:
            parts.append(f"shift={format_vector(self.shift)}")
        if self.path is not None:
            parts.append(f"path={self.path}")
        for name, value in self.params:
            parts.append(f"{name}={format_float(value) if isinstance(value, float) else value}")
        return " ".join(parts)

    @classmethod
    def parse(cls, text):
        """
        Parse `square`, `square:a=0.5`, `cutproject:shift=0.1,0.2`, `file:path=points.txt`, ...
        """
        name, _, rest = text.strip().partition(":")
        aliases = {"lattice": "square", "ab": "cutproject", "octagonal": "cutproject"}
        name = aliases.get(name, name)
        try:
            kind = cls.Kind(name)
        except ValueError:
            raise UnknownGeneratorError(f"Unknown generator tag '{name}'.") from None

        fields = {}
        for item in filter(None, rest.split(";")):
            key, _, value = item.partition("=")
            fields[key.strip()] = value.strip()

        spec = cls(
            kind=kind,
            spacing=float(fields.pop("a", 1.0)),
            origin=tuple(_parse_vector(fields.pop("origin"))) if "origin" in fields else None,
            shift=tuple(_parse_vector(fields.pop("shift"))) if "shift" in fields else None,
            path=fields.pop("path", None),
        )
        if fields:
            raise UnknownGeneratorError(f"Unknown generator parameters {sorted(fields)} for '{name}'.")
        if spec.spacing <= 0:
            raise ValueError(f"Spacing must be positive, got {spec.spacing}.")
        return spec


@dataclass(frozen=True, eq=False)
class DeloneSet:
    points: np.ndarray
    generator: GeneratorSpec
    window: Window
    r_pack: float
    R_cover: float
    meta: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_points(cls, points, generator, window, R_cover=None, tol=Tolerance.match, meta=None):
        """
        Sort, validate and measure a finite sample.

        Args:
            R_cover: reuse a known covering radius instead of measuring it
                (subsets cut out of a larger sample).
        """
        points = np.asarray(points, dtype=float)
        if points.ndim != 2:
            points = points.reshape(-1, window.d)
        points = points[lexicographic_order(points)]
        if len(points) == 0:
            return cls(points, generator, window, np.inf, np.inf, dict(meta or {}))
        tree = cKDTree(points)
        r_pack = measure_packing_radius(points, tree)
        if 2 * r_pack <= tol:
            raise ValueError("Point set contains duplicate points.")
        if R_cover is None:
            R_cover = measure_covering_radius(points, window, tree)
        omega = cls(points, generator, window, r_pack, R_cover, dict(meta or {}))
        omega.__dict__["tree"] = tree
        return omega

    @property
    def d(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    @cached_property
    def tree(self):
        return cKDTree(self.points)

    def sites_in(self, Q, tol=Tolerance.match):
        """Indices (ascending, hence lexicographic) of the points inside Q."""
        if len(self.points) == 0:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(Q.contains(self.points, tol))

    def index_of(self, x, tol=Tolerance.match):
        dist, i = self.tree.query(np.asarray(x, dtype=float))
        if dist > tol:
            raise ValueError(f"{format_vector(x)} is not a point of the set.")
        return int(i)

    def require_trusted(self, Q, what="query"):
        if not self.window.contains_window(Q):
            raise UntrustedRegionError(
                f"The {what} needs {Q} but the sample is only complete in {self.window}."
            )

    def shifted(self, t):
        t = np.asarray(t, dtype=float)
        return DeloneSet(self.points + t, self.generator, self.window.translated(t),
                         self.r_pack, self.R_cover, dict(self.meta))

    def restricted(self, Q):
        """The sample cut down to Q, which becomes its window."""
        self.require_trusted(Q, "restriction")
        return DeloneSet.from_points(self.points[self.sites_in(Q)], self.generator, Q,
                                     R_cover=self.R_cover, meta=self.meta)

    def header(self):
        headers = [("window", self.window.header_fields())]
        headers.append(("generator", {"kind": self.generator.tag()}))
        if self.generator.kind is GeneratorSpec.Kind.DECORATED:
            headers.append(("decorated", {"r": format_float(self.generator.param("r")),
                                          "pattern": self.generator.param("pattern")}))
        return headers


def measure_packing_radius(points, tree=None):
    if len(points) < 2:
        return np.inf
    tree = cKDTree(points) if tree is None else tree
    dist, _ = tree.query(points, k=2)
    return float(dist[:, 1].min() / 2)


def measure_covering_radius(points, window, tree=None):
    """
    Largest distance from a point of the (eroded) window to the set.

    The farthest points from a finite set are Voronoi vertices, so only those
    are probed. Vertices close to the window boundary see the truncation and
    are excluded by eroding the window by a few nearest-neighbour spacings.
    """
    n, d = points.shape
    if n < 2:
        return np.inf
    tree = cKDTree(points) if tree is None else tree
    spacing = 2 * measure_packing_radius(points, tree)
    if window.is_box:
        positive = window.half_widths[window.half_widths > 0]
        size = positive.min() if len(positive) else 0.0
    else:
        size = window.radius
    inner = window.eroded(min(3 * spacing, size / 2))

    if d == 1:
        x = np.sort(points[:, 0])
        probes = ((x[1:] + x[:-1]) / 2)[:, None]
    else:
        try:
            probes = Voronoi(points).vertices
        except (RuntimeError, ValueError) as e:
            logging.warning(f"Could not measure the covering radius (degenerate point set): {e}")
            return np.inf

    mask = inner.contains(probes) if inner is not None else np.zeros(len(probes), dtype=bool)
    if not mask.any():
        mask = window.contains(probes)
    if not mask.any():
        return np.inf
    dist, _ = tree.query(probes[mask])
    return float(dist.max())


def _square_points(spec, window):
    d = window.d
    a = spec.spacing
    origin = np.zeros(d) if spec.origin is None else np.asarray(spec.origin, dtype=float)
    lo = np.ceil((window.lower - origin) / a - Tolerance.match).astype(int)
    hi = np.floor((window.upper - origin) / a + Tolerance.match).astype(int)
    axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, d)
    return grid * a + origin


def _triangular_points(spec, window):
    if window.d != 2:
        raise ValueError("The triangular lattice is only defined in d = 2.")
    a = spec.spacing
    origin = np.zeros(2) if spec.origin is None else np.asarray(spec.origin, dtype=float)
    basis = a * np.array([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    lo = window.lower - origin
    hi = window.upper - origin
    j = np.arange(np.floor(lo[1] / basis[1, 1]) - 1, np.ceil(hi[1] / basis[1, 1]) + 2)
    i = np.arange(np.floor(lo[0] / a - j.max() / 2) - 1, np.ceil(hi[0] / a - j.min() / 2) + 2)
    ij = np.stack(np.meshgrid(i, j, indexing='ij'), axis=-1).reshape(-1, 2)
    return ij @ basis + origin


# Octagonal (Ammann-Beenker) projection of Z^4: parallel and perpendicular star vectors.
_STAR_PARALLEL = np.array([[np.cos(k * np.pi / 4), np.sin(k * np.pi / 4)] for k in range(4)])
_STAR_PERPENDICULAR = np.array([[np.cos(3 * k * np.pi / 4), np.sin(3 * k * np.pi / 4)] for k in range(4)])
# Acceptance octagon = projection of the unit 4-cube: edge 1, inradius (1 + sqrt 2)/2.
_OCTAGON_NORMALS = _STAR_PARALLEL
_OCTAGON_INRADIUS = (1 + np.sqrt(2)) / 2
_OCTAGON_CIRCUMRADIUS = 1 / (2 * np.sin(np.pi / 8))


def _octagonal_points(spec, window):
    if window.d != 2:
        raise ValueError("The octagonal quasilattice is only defined in d = 2.")
    a = spec.spacing
    origin = np.zeros(2) if spec.origin is None else np.asarray(spec.origin, dtype=float)
    shift = np.asarray(spec.shift, dtype=float)

    reach = np.abs(np.stack([window.lower - origin, window.upper - origin])).max(axis=0)
    x_max = np.linalg.norm(reach) / a
    perp_max = _OCTAGON_CIRCUMRADIUS + np.linalg.norm(shift)
    # n_k = (e_k . x + e_k^perp . x^perp) / 2 for the orthogonal star matrix.
    N = int(np.ceil((x_max + perp_max) / 2)) + 1
    axis = np.arange(-N, N + 1)
    rest = np.stack(np.meshgrid(axis, axis, axis, indexing='ij'), axis=-1).reshape(-1, 3)

    chunks = []
    for n0 in axis:
        n = np.hstack([np.full((len(rest), 1), n0), rest])
        perp = n @ _STAR_PERPENDICULAR - shift
        accepted = np.all(np.abs(perp @ _OCTAGON_NORMALS.T) < _OCTAGON_INRADIUS, axis=1)
        if accepted.any():
            chunks.append(a * (n[accepted] @ _STAR_PARALLEL) + origin)
    points = np.vstack(chunks) if chunks else np.zeros((0, 2))
    logging.debug(f"Octagonal projection: |n_k| <= {N}, {len(points)} lifted points accepted")
    return points


def generate(spec, window, seed=0):
    """
    Generate the points of `spec` inside `window` and measure r_pack and R_cover.

    The seed only matters for the octagonal quasilattice, where it fixes the
    offset of the acceptance window when none is given.
    """
    rng = np.random.default_rng(seed)
    kind = spec.kind
    if kind is GeneratorSpec.Kind.SQUARE:
        points = _square_points(spec, window)
    elif kind is GeneratorSpec.Kind.TRIANGULAR:
        points = _triangular_points(spec, window)
    elif kind is GeneratorSpec.Kind.CUT_AND_PROJECT:
        if spec.shift is None:
            spec = replace(spec, shift=tuple(rng.uniform(-0.5, 0.5, size=2)))
        points = _octagonal_points(spec, window)
    elif kind is GeneratorSpec.Kind.FILE:
        if spec.path is None:
            raise ValueError("A file generator needs a path.")
        return load_point_set(spec.path).restricted(window)
    else:
        raise UnknownGeneratorError(f"Cannot generate '{kind.value}' sets directly.")

    points = points[window.contains(points)]
    if len(points) == 0:
        raise EmptyWindowError(f"No points of {spec.tag()} inside {window}.")
    omega = DeloneSet.from_points(points, spec, window)
    logging.debug(f"Generated {len(omega)} points ({spec.tag()}): "
                  f"r_pack={omega.r_pack:.6g}, R_cover={omega.R_cover:.6g}")
    return omega


def boundary_volume(Q, R):
    """
    Volume of the R-neighbourhood of the boundary of Q.

    When R reaches the inradius the inner part vanishes; the full outer volume
    is returned and a warning is logged.
    """
    if R <= 0:
        raise ValueError(f"Boundary thickness must be positive, got {R}.")
    if Q.is_box:
        sides = 2 * Q.half_widths
        outer = float(np.prod(sides + 2 * R))
        inner_sides = sides - 2 * R
        if np.any(inner_sides <= 0):
            logging.warning(f"Degenerate boundary volume: R={R} reaches the inradius of {Q}.")
            return outer
        return outer - float(np.prod(inner_sides))
    outer = ball_volume(Q.radius + R, Q.d)
    if R >= Q.radius:
        logging.warning(f"Degenerate boundary volume: R={R} reaches the radius of {Q}.")
        return outer
    return outer - ball_volume(Q.radius - R, Q.d)


def inner_boundary_sites(omega, Q, range_, tol=Tolerance.match):
    """
    Points of omega inside Q closer than `range_` to the boundary of Q.

    Distances within `tol` of `range_` count as being at distance `range_`.
    """
    if range_ <= 0:
        raise ValueError(f"Boundary range must be positive, got {range_}.")
    idx = omega.sites_in(Q, tol)
    inside = omega.points[idx]
    return inside[Q.distance_to_boundary(inside) < range_ - tol]


def load_point_set(path):
    points, headers = read_point_file(path)
    d = points.shape[1]
    if "window" in headers:
        window = Window.from_header(headers["window"])
    elif len(points):
        window = Window.box(points.min(axis=0), points.max(axis=0))
    else:
        raise EmptyWindowError(f"{path} holds no points and no window.")

    if "decorated" in headers:
        fields = headers["decorated"]
        spec = GeneratorSpec(GeneratorSpec.Kind.DECORATED,
                             params=(("r", float(fields["r"])), ("pattern", fields.get("pattern", ""))))
    else:
        spec = GeneratorSpec(GeneratorSpec.Kind.FILE, path=str(path))

    logging.debug(f"Loaded {len(points)} points (d={d}) from {path}")
    return DeloneSet.from_points(points, spec, window)


def point_set_text(omega):
    return point_file_text(omega.points, omega.header())


def save_point_set(omega, path):
    write_atomic(path, point_set_text(omega))
    logging.debug(f"Saved {len(omega)} points to {path}")
