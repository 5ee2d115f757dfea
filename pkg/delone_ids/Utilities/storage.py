#!/usr/bin/env python3
import os
import logging
import tempfile
from pathlib import Path

import numpy as np

from delone_ids.Utilities.utils import format_float


def parse_header(line):
    """
    Split a `# key word a=1 b=2,3` line into ("key", {"kind": "word", "a": "1", "b": "2,3"}).
    """
    tokens = line.lstrip("#").split()
    if not tokens:
        return None, {}
    fields = {}
    for token in tokens[1:]:
        if "=" in token:
            key, value = token.split("=", 1)
            fields[key] = value
        else:
            fields.setdefault("kind", token)
    return tokens[0], fields


def render_header(key, fields):
    parts = [key]
    for name, value in fields.items():
        parts.append(str(value) if name == "kind" else f"{name}={value}")
    return "# " + " ".join(parts)


def point_file_text(points, headers):
    """
    Render a point set: `# delone d=<d>`, the extra headers in order, then one point per line.

    Args:
        points: array of shape (n, d).
        headers: list of (key, fields) pairs written after the `delone` line.
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[1] if points.ndim == 2 else 0
    lines = [f"# delone d={d}"]
    lines += [render_header(key, fields) for key, fields in headers]
    lines += [" ".join(format_float(c) for c in p) for p in points]
    return "\n".join(lines) + "\n"


def read_point_file(path):
    """
    Read a point-set file.

    Returns:
        points: array of shape (n, d)
        headers: dict mapping header key to its fields
    """
    headers = {}
    rows = []
    with open(path) as stream:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, fields = parse_header(line)
                if key is not None:
                    headers[key] = fields
                continue
            rows.append([float(token) for token in line.split()])

    if "delone" not in headers:
        raise ValueError(f"{path} is not a point-set file (missing '# delone d=<d>' header).")
    d = int(headers["delone"]["d"])
    points = np.array(rows, dtype=float).reshape(-1, d)
    if any(len(row) != d for row in rows):
        raise ValueError(f"{path}: every point must have {d} coordinates.")
    return points, headers


def matrix_text(matrix):
    """Coordinate list of a symmetric matrix, 0-based, one line per nonzero entry with i <= j."""
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    lines = [f"# symmetric n={n}"]
    rows, cols = np.nonzero(np.triu(matrix))
    for i, j in zip(rows, cols):
        lines.append(f"{i} {j} {format_float(matrix[i, j])}")
    return "\n".join(lines) + "\n"


def curve_text(eigenvalues, volume, label=""):
    """
    Two-column `E N(E)` rendering of a counting function: at every distinct eigenvalue
    the left limit and then the right value.
    """
    values = np.sort(np.asarray(eigenvalues, dtype=float))
    lines = [f"# ids window={label} volume={format_float(volume)} n={len(values)}", "# E N(E)"]
    if len(values):
        distinct = np.unique(values)
        below = np.searchsorted(values, distinct, side='left') / volume
        upto = np.searchsorted(values, distinct, side='right') / volume
        for E, left, right in zip(distinct, below, upto):
            lines.append(f"{format_float(E)} {format_float(left)}")
            lines.append(f"{format_float(E)} {format_float(right)}")
    return "\n".join(lines) + "\n"


def table_text(title, columns, rows):
    lines = [f"# {title}", "# " + " ".join(columns)]
    for row in rows:
        lines.append(" ".join(format_float(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as stream:
            stream.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class ResultStorage:
    """
    Collects the text artefacts of one command and writes them together at the end.
    """

    def __init__(self, file_path):
        self.file_path = Path(file_path)
        self.pending = {}

    def add(self, file_name, text):
        if file_name in self.pending:
            raise ValueError(f"Artefact {file_name} was produced twice.")
        self.pending[file_name] = text

    def write(self):
        self.file_path.mkdir(parents=True, exist_ok=True)
        written = []
        # Sorted so that the order of side effects is reproducible too.
        for file_name in sorted(self.pending):
            write_atomic(self.file_path / file_name, self.pending[file_name])
            written.append(self.file_path / file_name)
            logging.debug(f"Wrote {self.file_path / file_name}")
        self.pending = {}
        return written
