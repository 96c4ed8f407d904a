"""File formats: Matrix Market arrays, CSV, PGM patches, INI configs and
the JSON run report."""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import NegativeEntryError, ParseError, ValidationError
from .matcore import check_nonneg

SCHEMA_VERSION = 1
MATRIX_MARKET = "matrix-market-array"
CSV = "csv"
FORMATS = (MATRIX_MARKET, CSV)


def _version():
    from . import __version__

    return __version__


def guess_format(path):
    suffix = Path(path).suffix.lower()
    if suffix in (".mtx", ".mm"):
        return MATRIX_MARKET
    if suffix in (".csv", ".txt"):
        return CSV
    raise ValidationError(f"cannot infer matrix format from {str(path)!r}; pass format explicitly")


def _parse_float(tok, path, line):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", path, line) from None


def _check_values(M, path):
    if not np.isfinite(M).all():
        r, c = np.argwhere(~np.isfinite(M))[0]
        raise ParseError(f"non-finite entry at ({r}, {c})", path, None)
    neg = np.argwhere(M < 0)
    if neg.size:
        r, c = neg[0]
        raise NegativeEntryError(str(path), int(r), int(c), float(M[r, c]))
    return M


def _read_matrix_market(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise ParseError("missing %%MatrixMarket banner", path, 1)
    banner = lines[0].split()
    if len(banner) != 5:
        raise ParseError("malformed banner", path, 1)
    _, obj, fmt, field_, sym = (b.lower() for b in banner)
    if obj != "matrix" or fmt != "array":
        raise ParseError(f"only dense 'matrix array' files are supported, got {obj} {fmt}", path, 1)
    if field_ not in ("real", "integer", "double"):
        raise ParseError(f"unsupported field {field_!r}", path, 1)
    if sym != "general":
        raise ParseError(f"unsupported symmetry {sym!r}", path, 1)
    idx = 1
    while idx < len(lines) and (not lines[idx].strip() or lines[idx].lstrip().startswith("%")):
        idx += 1
    if idx >= len(lines):
        raise ParseError("missing size line", path, idx + 1)
    size = lines[idx].split()
    if len(size) != 2:
        raise ParseError("size line must hold two integers", path, idx + 1)
    try:
        rows, cols = int(size[0]), int(size[1])
    except ValueError:
        raise ParseError("size line must hold two integers", path, idx + 1) from None
    if rows < 1 or cols < 1:
        raise ParseError("dimensions must be positive", path, idx + 1)
    values = []
    for lineno in range(idx + 1, len(lines)):
        text = lines[lineno].strip()
        if not text or text.startswith("%"):
            continue
        for tok in text.split():
            values.append(_parse_float(tok, path, lineno + 1))
    if len(values) != rows * cols:
        raise ParseError(
            f"header declares {rows}x{cols} = {rows * cols} values, found {len(values)}", path, idx + 1
        )
    return np.array(values, dtype=np.float64).reshape((rows, cols), order="F")


def _read_csv(path):
    rows = []
    width = None
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not t.strip() for t in rec):
                continue
            vals = [_parse_float(t.strip(), path, lineno) for t in rec]
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"expected {width} fields, found {len(vals)}", path, lineno)
            rows.append(vals)
    if not rows:
        raise ParseError("empty CSV file", path, 1)
    return np.array(rows, dtype=np.float64)


def read_matrix(path, format=None):
    """Read a non-negative dense matrix.

    Parameters
    ----------
    path : str or Path
    format : {"matrix-market-array", "csv"}, optional
        Inferred from the suffix (``.mtx``/``.mm`` or ``.csv``/``.txt``)
        when omitted.

    Raises
    ------
    FileNotFoundError
    ParseError
        Malformed content, with the offending line number.
    NegativeEntryError
        Names the (row, col) of the first negative entry.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {str(path)!r}")
    format = format or guess_format(path)
    if format == MATRIX_MARKET:
        M = _read_matrix_market(path)
    elif format == CSV:
        M = _read_csv(path)
    else:
        raise ValidationError(f"format must be one of {FORMATS}, got {format!r}")
    return _check_values(M, path)


def write_matrix(M, path, format=None):
    """Write ``M`` so that :func:`read_matrix` returns it bit for bit."""
    M = check_nonneg(M, "matrix")
    path = Path(path)
    format = format or guess_format(path)
    buf = io.StringIO()
    if format == MATRIX_MARKET:
        buf.write("%%MatrixMarket matrix array real general\n")
        buf.write(f"{M.shape[0]} {M.shape[1]}\n")
        for v in M.ravel(order="F"):
            buf.write(repr(float(v)) + "\n")
    elif format == CSV:
        for row in M:
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
    else:
        raise ValidationError(f"format must be one of {FORMATS}, got {format!r}")
    path.write_text(buf.getvalue(), encoding="ascii")


def write_csv_rows(rows, path, columns=None):
    """Write dict rows as CSV with a fixed column order."""
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            for key in r:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_csv_cell(r.get(c)) for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _pgm_tokens(data, path):
    """Header tokens of a PGM file, skipping comments; returns (tokens, offset)."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ParseError("truncated PGM header", path, None)
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path):
    """Read an ASCII (P2) or binary (P5) PGM as floats in [0, 1]."""
    path = Path(path)
    data = path.read_bytes()
    tokens, pos = _pgm_tokens(data, path)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise ParseError(f"not a PGM file (magic {magic!r})", path, 1)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ParseError("malformed PGM header", path, 1) from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ParseError("invalid PGM dimensions or maxval", path, 1)
    count = width * height
    if magic == b"P5":
        body = data[pos + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(body) < count * dtype.itemsize:
            raise ParseError("truncated PGM pixel data", path, None)
        pix = np.frombuffer(body[: count * dtype.itemsize], dtype=dtype).astype(np.float64)
    else:
        parts = data[pos:].split()
        if len(parts) < count:
            raise ParseError("truncated PGM pixel data", path, None)
        try:
            pix = np.array([int(p) for p in parts[:count]], dtype=np.float64)
        except ValueError:
            raise ParseError("non-integer pixel value", path, None) from None
    if (pix > maxval).any():
        raise ParseError("pixel value exceeds maxval", path, None)
    return pix.reshape(height, width) / maxval


def image_patches(img, patch):
    """Non-overlapping ``patch x patch`` tiles, each flattened (row-major) to a column."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if patch < 1 or patch > h or patch > w:
        raise ValidationError(f"patch size {patch} does not fit a {h}x{w} image")
    cols = []
    for r in range(0, h - patch + 1, patch):
        for c in range(0, w - patch + 1, patch):
            cols.append(img[r:r + patch, c:c + patch].ravel())
    return np.column_stack(cols)


def read_pgm_patches(path, patch):
    """Patches of a PGM image as the columns of a ``(patch**2, count)`` matrix."""
    return image_patches(read_pgm(path), patch)


def write_pgm(img, path, maxval=255, binary=True):
    """Write a [0, 1] image as PGM (used for fixtures and dictionary dumps)."""
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    pix = np.rint(img * maxval).astype(int)
    h, w = pix.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n{maxval}\n".encode("ascii")
    if binary:
        body = pix.astype(">u2" if maxval > 255 else "u1").tobytes()
    else:
        body = ("\n".join(" ".join(str(v) for v in row) for row in pix) + "\n").encode("ascii")
    Path(path).write_bytes(header + body)


def read_config(path):
    """Parse an INI file into ``{section: {key: value}}``.

    Values are decoded as JSON when possible (numbers, lists, booleans,
    ``null``), otherwise kept as strings.  Block structures are written as
    JSON lists of lists, e.g. ``blocks = [[0, 1], [2, 3]]``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {str(path)!r}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ParseError(str(exc), path, getattr(exc, "lineno", None)) from None
    out = {}
    for section in parser.sections():
        out[section] = {key: _decode(val) for key, val in parser.items(section)}
    return out


def _decode(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _sanitize(obj, where, warnings):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v, f"{where}.{k}" if where else str(k), warnings) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v, f"{where}[{i}]", warnings) for i, v in enumerate(obj)]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist(), where, warnings)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            warnings.append(f"{where}: non-finite value {v!r} stored as null")
            return None
        return v
    return obj


@dataclass
class RunReport:
    """Serializable summary of a run.

    ``spec`` echoes the inputs, ``metrics`` holds results (nested dicts and
    lists).  Non-finite floats are stored as ``null`` and listed in
    ``warnings``.
    """

    command: str
    spec: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    seed: object = None
    version: str = field(default_factory=_version)
    schema_version: int = SCHEMA_VERSION
    warnings: list = field(default_factory=list)

    def to_dict(self):
        warnings = list(self.warnings)
        body = {
            "command": self.command,
            "spec": _sanitize(self.spec, "spec", warnings),
            "metrics": _sanitize(self.metrics, "metrics", warnings),
            "seed": _sanitize(self.seed, "seed", warnings),
            "version": self.version,
            "schema_version": self.schema_version,
        }
        body["warnings"] = sorted(set(warnings))
        return body

    @classmethod
    def from_dict(cls, data):
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValidationError(f"unsupported report schema_version {data.get('schema_version')!r}")
        return cls(
            command=data["command"],
            spec=data.get("spec", {}),
            metrics=data.get("metrics", {}),
            seed=data.get("seed"),
            version=data.get("version", ""),
            schema_version=data["schema_version"],
            warnings=list(data.get("warnings", [])),
        )


def dumps_report(report):
    """Canonical JSON text: sorted keys, 2-space indent, shortest float repr."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report, path):
    text = dumps_report(report)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def read_report(path):
    with open(path, "r", encoding="utf-8") as fh:
        return RunReport.from_dict(json.load(fh))
