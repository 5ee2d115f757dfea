#!/usr/bin/env python3
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from delone_ids.Decoration.mld import Hopping, build_gfin, decorate
from delone_ids.Geometry.geometry import (GeneratorSpec, VanHoveSequence, Window, generate, inner_boundary_sites,
                                          load_point_set, point_set_text)
from delone_ids.Geometry.patterns import dominant_class, pattern_class_text, singleton_class
from delone_ids.Spectral.bounds import chain_text, inequality_chain, jump_bound_report
from delone_ids.Spectral.operators import assemble, check_rule_axioms, decorated_rule, nn_adjacency_rule
from delone_ids.Spectral.spectra import (converse_diagnostic, detect_jumps, eigenvalues, extract_compact_eigenfunction,
                                         first_crossover, ids_curve, jump_near, jump_report_text, sup_distance,
                                         translate_sup_distances, zero_extension_residual)
from delone_ids.Utilities.storage import ResultStorage, curve_text, table_text
from delone_ids.Utilities.utils import Tolerance, format_float

CONFIG_DIR = Path(__file__).parent.parent.absolute() / "Utilities/config"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    generator: str = "square"
    spacing: float = 1.0
    dimension: int = 2
    point_file: str = None
    shift: list = None
    decorate: bool = False
    decoration_scale: float = 0.42
    pattern_radius: float = 0.4
    rule: str = "auto"
    hopping: str = "adjacency"
    threshold: float = 1.0
    L: list = field(default_factory=lambda: [4, 6, 8])
    converse_L: list = field(default_factory=lambda: [4, 8, 13])
    E: list = field(default_factory=lambda: [0.0])
    tol_match: float = Tolerance.match
    tol_cluster: float = None
    weight_floor: float = 0.25
    residual_tol: float = Tolerance.residual
    translates: int = 4
    axiom_samples: int = 1000
    seed: int = 0
    out: str = "results"

    @classmethod
    def load(cls, config_file=None):
        """
        Read a flat YAML map. Without an explicit file, custom_experiment.yaml next to the
        default configuration wins over default_experiment.yaml.
        """
        if config_file is None:
            config_file = CONFIG_DIR / "custom_experiment.yaml"
            if not config_file.exists():
                config_file = CONFIG_DIR / "default_experiment.yaml"
        try:
            with open(config_file) as stream:
                values = yaml.safe_load(stream) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot read configuration {config_file}: {e}") from e
        if not isinstance(values, dict):
            raise ConfigError(f"{config_file} must hold a key -> value map.")
        logging.debug(f"Configuration loaded from {config_file}")
        return cls().override(**values)

    def override(self, **values):
        known = {f.name for f in fields(self)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}.")
        for key, value in values.items():
            if value is not None or key in ("point_file", "shift", "tol_cluster"):
                setattr(self, key, value)
        return self

    @property
    def decorating(self):
        return bool(self.decorate)

    @property
    def rule_kind(self):
        if self.rule == "auto":
            return "decorated" if self.decorating else "nn"
        return self.rule

    def validate(self):
        def positive(name):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"'{name}' must be a positive number, got {value!r}.")

        if self.generator not in ("square", "triangular", "cutproject", "file"):
            raise ConfigError(f"Unknown generator '{self.generator}'.")
        if self.generator == "file" and not self.point_file:
            raise ConfigError("The file generator needs 'point_file'.")
        if self.rule not in ("nn", "decorated", "auto"):
            raise ConfigError(f"Unknown rule '{self.rule}'.")
        if self.hopping not in [h.value for h in Hopping]:
            raise ConfigError(f"Unknown hopping '{self.hopping}'.")
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise ConfigError(f"'dimension' must be a positive integer, got {self.dimension!r}.")
        if self.generator in ("triangular", "cutproject") and self.dimension != 2:
            raise ConfigError(f"The {self.generator} generator is planar; dimension must be 2.")
        for name in ("spacing", "decoration_scale", "pattern_radius", "threshold", "tol_match",
                     "weight_floor", "residual_tol"):
            positive(name)
        if self.tol_cluster is not None:
            positive("tol_cluster")
        for name in ("translates", "axiom_samples"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigError(f"'{name}' must be a positive integer.")
        for name in ("L", "converse_L", "E"):
            value = getattr(self, name)
            if not isinstance(value, (list, tuple)) or not value:
                raise ConfigError(f"'{name}' must be a nonempty list.")
        if any(not isinstance(L, (int, float)) or L <= 0 for L in list(self.L) + list(self.converse_L)):
            raise ConfigError("Window sizes must be positive.")
        if len(set(self.L)) != len(self.L) or len(set(self.converse_L)) != len(self.converse_L):
            raise ConfigError("Window sizes must not repeat.")
        if self.shift is not None and len(self.shift) != 2:
            raise ConfigError("'shift' needs two components.")
        if (self.decorating or self.rule_kind == "decorated") and self.dimension < 2:
            raise ConfigError("Decorations need dimension >= 2.")
        if self.rule_kind == "decorated" and not self.decorating:
            raise ConfigError("The decorated rule needs 'decorate: true'.")
        if self.rule_kind == "decorated" and self.threshold < 2 * self.decoration_scale:
            raise ConfigError(f"Host threshold {self.threshold} must be at least 2r = {2 * self.decoration_scale}.")
        return self


def _tag(L):
    return format_float(L)


class Experiment_Runner:
    """
    Runs one CLI command on the configured system and collects its artefacts.

    Every command returns an exit code; files are written only after all
    computation has finished.
    """

    def __init__(self, config):
        self.config = config
        self.storage = ResultStorage(config.out)
        self.d = config.dimension
        self.hopping = Hopping(config.hopping)
        self.graph = build_gfin(config.decoration_scale, self.d) if self.d >= 2 else None
        self.rule = self.build_rule()
        self.pattern = None

    def build_rule(self):
        if self.config.rule_kind == "decorated":
            return decorated_rule(self.graph, self.config.threshold, self.hopping)
        return nn_adjacency_rule(self.config.threshold, self.hopping)

    def generator_spec(self):
        c = self.config
        if c.generator == "file":
            return GeneratorSpec(GeneratorSpec.Kind.FILE, path=str(c.point_file))
        spec = GeneratorSpec.parse(c.generator)
        return replace(spec, spacing=float(c.spacing), shift=tuple(c.shift) if c.shift is not None else None)

    def decoration_margin(self):
        if not self.config.decorating:
            return 0.0
        return self.config.pattern_radius + 2 * self.graph.cluster_radius

    def sample(self, L, margin=0.0):
        """
        The configured (and possibly decorated) set, complete on [-L - margin, L + margin]^d.
        """
        base = generate(self.generator_spec(), Window.cube(L + margin + self.decoration_margin(), self.d),
                        self.config.seed)
        logging.info(f"Base set: {len(base)} points, r_pack={base.r_pack:.6g}, R_cover={base.R_cover:.6g}")
        if not self.config.decorating:
            return base
        return self.decorated(base)

    def decorated(self, base):
        self.pattern = dominant_class(base, self.config.pattern_radius, self.config.tol_match)
        omega = decorate(base, self.pattern, self.graph, self.config.tol_match)
        self.storage.add("pattern.txt", pattern_class_text(self.pattern))
        logging.info(f"Decorated {omega.meta['occurrences']} occurrences of pattern {self.pattern.digest()}: "
                     f"{len(omega)} points")
        return omega

    def spectral_sample(self, L_values):
        """Sample large enough for assembly, zero extension and shifted windows up to max(L_values)."""
        margin = 3 * self.rule.range + self.config.spacing
        return self.sample(max(L_values), margin)

    def windows(self, L_values):
        return VanHoveSequence.cubes(sorted(L_values), self.d)

    def run(self, command):
        code = getattr(self, command)()
        for path in self.storage.write():
            logging.info(f"Saved {path}")
        return code

    def generate(self):
        omega = self.sample(max(self.config.L))
        logging.info(f"Generated {len(omega)} points: r_pack={format_float(omega.r_pack)}, "
                     f"R_cover={format_float(omega.R_cover)}")
        self.storage.add("points.txt", point_set_text(omega))
        return 0

    def decorate(self):
        if not self.config.point_file:
            raise ConfigError("decorate needs an input point file (--in).")
        base = load_point_set(self.config.point_file)
        omega = self.decorated(base)
        self.storage.add("decorated.txt", point_set_text(omega))
        return 0

    def spectrum(self):
        omega = self.spectral_sample(self.config.L)
        for Q, L in zip(self.windows(self.config.L), sorted(self.config.L)):
            A = assemble(self.rule, omega, Q)
            values = eigenvalues(A)
            self.storage.add(f"spectrum_L{_tag(L)}.txt",
                             table_text(f"spectrum window={Q!r} n={A.dimension}", ["lambda"], [(v,) for v in values]))
            self.storage.add(f"matrix_L{_tag(L)}.txt", A.export())
        return 0

    def shifts(self):
        rng = np.random.default_rng(self.config.seed)
        extra = rng.uniform(-0.5, 0.5, (self.config.translates - 1, self.d)) * self.config.spacing
        return [np.zeros(self.d)] + list(extra)

    def ids(self):
        omega = self.spectral_sample(self.config.L)
        L_values = sorted(self.config.L)
        curves = []
        for Q, L in zip(self.windows(L_values), L_values):
            ids = ids_curve(self.rule, omega, Q)
            curves.append(ids)
            self.storage.add(f"ids_L{_tag(L)}.txt", curve_text(ids.eigenvalues, ids.volume, ids.label))

        rows = []
        shifts = self.shifts()
        for k in range(len(curves) - 1):
            distance = sup_distance(curves[k], curves[k + 1])
            _, sample_max = translate_sup_distances(self.rule, omega, L_values[k], L_values[k + 1], shifts)
            rows.append((float(L_values[k]), float(L_values[k + 1]), distance, sample_max))
            logging.info(f"sup|N_{_tag(L_values[k])} - N_{_tag(L_values[k + 1])}| = {distance:.6g} "
                         f"(max over {len(shifts)} translates {sample_max:.6g})")
        self.storage.add("convergence.txt",
                         table_text("convergence", ["L_small", "L_large", "sup_distance", "translate_max"], rows))
        return 0

    def jumps(self):
        omega = self.spectral_sample(self.config.L)
        for Q, L in zip(self.windows(self.config.L), sorted(self.config.L)):
            report = detect_jumps(ids_curve(self.rule, omega, Q), self.config.weight_floor, self.config.tol_cluster)
            logging.info(f"L={_tag(L)}: {len(report.jumps)} jumps above weight {self.config.weight_floor}")
            self.storage.add(f"jumps_L{_tag(L)}.txt", jump_report_text(report))
        return 0

    def verify(self):
        c = self.config
        if self.graph is None:
            raise ConfigError("verify needs dimension >= 2.")
        omega = self.spectral_sample(list(c.L) + list(c.converse_L))
        P = self.pattern or singleton_class(c.pattern_radius, self.d)
        seq = self.windows(c.L)

        sections = [f"# verify rule={self.rule.description} points={len(omega)} seed={c.seed}\n"]
        axioms = check_rule_axioms(self.rule, omega, samples=c.axiom_samples, seed=c.seed)
        sections.append(table_text("axioms", ["range", "symmetry", "equivariance", "translates"],
                                   [(axioms.range_violations, axioms.symmetry_violations,
                                     axioms.equivariance_violations, axioms.checked_translates)]))

        verdicts = []
        largest = ids_curve(self.rule, omega, seq.largest)
        report = detect_jumps(largest, c.weight_floor, c.tol_cluster)
        sections.append(jump_report_text(report))
        for E in c.E:
            E = float(E)
            jump = jump_near(report, E)
            found, residual, converse = self.converse(omega, E)
            sections.append(converse)
            bound = jump_bound_report(self.rule, omega, P, self.graph, seq, E, c.tol_cluster)
            sections.append(bound.render())
            chain = inequality_chain(self.rule, omega, P, self.graph, seq, E, c.tol_cluster)
            sections.append(chain_text(chain))

            residual_ok = residual is None or residual <= c.residual_tol
            passed = ((jump is not None) == found and bound.satisfied and residual_ok
                      and all(row.holds for row in chain) and axioms.ok)
            verdicts.append(passed)
            sections.append(self.verdict_line(E, passed, jump, found, residual, bound, chain, axioms))

        overall = all(verdicts)
        sections.append(f"verdict {'PASS' if overall else 'FAIL'}\n")
        self.storage.add("verify.txt", "".join(sections))
        (logging.info if overall else logging.error)(f"Verdict: {'PASS' if overall else 'FAIL'}")
        return 0 if overall else 1

    def converse(self, omega, E):
        """
        Converse diagnostic over converse_L and, at the first crossover window, the
        extracted eigenfunction and its zero-extension residual.

        Returns:
            found, residual (None when nothing was extracted), rendered section
        """
        c = self.config
        seq = self.windows(c.converse_L)
        diagnostics = converse_diagnostic(self.rule, omega, seq, E, c.tol_cluster)
        text = table_text(f"converse E={format_float(E)}", ["L", "multiplicity", "boundary", "c", "epsilon", "crossover"],
                          [(d.L, d.kernel_dimension, d.boundary_count, d.c, d.epsilon, str(d.crossover).lower())
                           for d in diagnostics])
        k = first_crossover(diagnostics)
        if k is None:
            return False, None, text + "# extraction none\n"

        Q = seq[k]
        A = assemble(self.rule, omega, Q)
        tol = c.tol_cluster or Tolerance.cluster * max(1.0, float(np.abs(A.matrix).sum(axis=1).max()))
        boundary = inner_boundary_sites(omega, Q, 2 * self.rule.range)
        f = extract_compact_eigenfunction(A, E, boundary, tol)
        if f is None:
            return False, None, text + "# extraction none\n"
        residual = zero_extension_residual(self.rule, omega, f.vector, A, E, 2 * self.rule.range)
        support = int(np.count_nonzero(np.abs(f.vector) > c.tol_match))
        logging.info(f"Extracted eigenfunction on {Q!r}: support {support}, zero-extension residual {residual:.3g}")
        return True, residual, text + (f"# extraction L={format_float(diagnostics[k].L)} support={support} "
                                       f"residual_ok={str(residual <= c.residual_tol).lower()}\n")

    @staticmethod
    def verdict_line(E, passed, jump, found, residual, bound, chain, axioms):
        if jump is None and not found:
            claims = ["no jump detected", "no compact eigenfunction found"]
        else:
            claims = [f"jump weight {format_float(jump.weight)} detected" if jump is not None else "no jump detected",
                      "compact eigenfunction found" if found else "no compact eigenfunction found"]
        if not bound.satisfied:
            claims.append("jump below nu/C")
        if not all(row.holds for row in chain):
            claims.append("inequality chain violated")
        if not axioms.ok:
            claims.append(f"{axioms.violations} axiom violations")
        return f"{'PASS' if passed else 'FAIL'} E={format_float(E)}: {'; '.join(claims)}\n"
