"""Signal ingestion and matrix emission (CSV with metadata header, binary PGM)."""

import re
from pathlib import Path

import numpy as np

from .tfr import TFRMatrix


class DataError(ValueError):
    """Malformed or unusable input data."""


FORMATS = ("csv-1col", "raw-float64-le", "csv-with-header")


def _guess_format(path: Path, first_line: str) -> str:
    if path.suffix.lower() in (".bin", ".raw", ".f64"):
        return "raw-float64-le"
    s = first_line.strip().lstrip("#").strip().lower()
    return "csv-with-header" if s.startswith("fs") else "csv-1col"


def _parse_header(line: str, lineno: int) -> float:
    s = line.strip().lstrip("#").strip()
    key, sep, val = s.partition("=")
    if not sep or key.strip().lower() != "fs":
        raise DataError(f"line {lineno}: expected header 'fs=<rate>', got {line.strip()!r}")
    try:
        fs = float(val)
    except ValueError:
        raise DataError(f"line {lineno}: sample rate {val.strip()!r} is not a number") from None
    if not (np.isfinite(fs) and fs > 0):
        raise DataError(f"line {lineno}: sample rate must be positive")
    return fs


def ingest_signal(path, fmt: str = None, fs: float = None):
    """Read a one-channel signal; returns ``(x, fs)``.

    ``csv-1col`` has one number per line, ``csv-with-header`` adds a first
    line ``fs=<rate>`` (optionally after ``#``), ``raw-float64-le`` is bare
    little-endian doubles.  An explicit ``fs`` overrides the header.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if not raw:
        raise DataError(f"{path} is empty")
    header_fs = None
    if fmt is None:
        first = raw[:200].decode("ascii", errors="replace").splitlines()[0] if raw else ""
        fmt = _guess_format(path, first)
    if fmt not in FORMATS:
        raise DataError(f"unknown format {fmt!r}; use one of {', '.join(FORMATS)}")
    if fmt == "raw-float64-le":
        if len(raw) % 8:
            raise DataError(f"{path}: size {len(raw)} is not a multiple of 8 bytes")
        x = np.frombuffer(raw, dtype="<f8").astype(float)
        bad = np.flatnonzero(~np.isfinite(x))
        if bad.size:
            raise DataError(f"{path}: non-finite value at sample {bad[0]}")
    else:
        lines = raw.decode("utf-8", errors="strict").splitlines()
        start = 0
        if fmt == "csv-with-header":
            header_fs = _parse_header(lines[0], 1)
            start = 1
        vals = []
        for i in range(start, len(lines)):
            s = lines[i].strip()
            if not s:
                continue
            cell = s.split(",")[0].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {i + 1}: cannot parse {cell!r} as a number") from None
            if not np.isfinite(v):
                raise DataError(f"{path}: line {i + 1}: non-finite value {cell!r}")
            vals.append(v)
        x = np.array(vals, dtype=float)
    if x.size == 0:
        raise DataError(f"{path} contains no samples")
    rate = fs if fs is not None else header_fs
    if rate is None:
        raise DataError(f"{path}: no sample rate in the file; pass --fs")
    if not rate > 0:
        raise DataError("sample rate must be positive")
    return x, float(rate)


def write_signal(path, x, fs: float = None):
    """CSV, one value per line at full precision; ``fs=`` header when given."""
    x = np.asarray(x, dtype=float)
    with open(path, "w") as fh:
        if fs is not None:
            fh.write(f"# fs={float(fs)!r}\n")
        for v in x:
            fh.write(f"{float(v)!r}\n")
    return Path(path)


def _fmt(v) -> str:
    if isinstance(v, (complex, np.complexfloating)):
        return f"{v.real:.17g}{v.imag:+.17g}j"
    return f"{v:.17g}"


def _header(tfr: TFRMatrix):
    meta = {
        "kind": tfr.kind, "rows": tfr.values.shape[0], "cols": tfr.values.shape[1],
        "bin_width_hz": repr(float(tfr.bin_width_hz)), "m_bins": tfr.m_bins, "hop": tfr.hop,
        "sample_interval": repr(float(tfr.sample_interval)), "row_offset": tfr.row_offset,
    }
    meta.update({k: v for k, v in tfr.params.items() if np.isscalar(v) or isinstance(v, str)})
    return [f"# {k}={v}" for k, v in meta.items()]


def emit_matrix(tfr: TFRMatrix, path, fmt: str = "csv", mapping: str = "linear") -> Path:
    """Write ``tfr`` as ``csv``, ``pgm8`` or ``pgm16``.

    CSV rows follow matrix rows (lowest frequency first) and carry a ``#``
    metadata header.  PGM puts the lowest frequency at the bottom; values
    (magnitudes for complex input) are optionally raised to the power 0.1
    (``mapping='pow0.1'``) and then scaled linearly to the full gray range.
    """
    v = tfr.values
    if not np.all(np.isfinite(v)):
        raise DataError("matrix contains non-finite values")
    path = Path(path)
    try:
        if fmt == "csv":
            with open(path, "w") as fh:
                fh.write("\n".join(_header(tfr)) + "\n")
                for row in v:
                    fh.write(",".join(_fmt(a) for a in row) + "\n")
        elif fmt in ("pgm8", "pgm16"):
            path.write_bytes(pgm_bytes(v, 255 if fmt == "pgm8" else 65535, mapping))
        else:
            raise DataError(f"unknown matrix format {fmt!r}")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None
    return path


def gray_levels(values, maxval: int, mapping: str = "linear") -> np.ndarray:
    a = np.abs(values).astype(float)
    if mapping == "pow0.1":
        a = a**0.1
    elif mapping != "linear":
        raise DataError(f"unknown display mapping {mapping!r}")
    lo, hi = a.min(), a.max()
    if hi == lo:
        return np.full(a.shape, maxval // 2, dtype=np.int64)
    return np.rint((a - lo) / (hi - lo) * maxval).astype(np.int64)


def pgm_bytes(values, maxval: int = 255, mapping: str = "linear") -> bytes:
    g = gray_levels(values, maxval, mapping)[::-1]  # lowest frequency at the bottom
    h, w = g.shape
    head = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    body = g.astype(">u2" if maxval > 255 else "u1").tobytes()
    return head + body


def read_pgm(path) -> np.ndarray:
    """Gray levels of a binary PGM, top image row first."""
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise DataError("not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    body = data[m.end():]
    dt = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(body, dtype=dt, count=w * h).reshape(h, w).astype(np.int64)


def read_matrix_csv(path):
    """Inverse of the CSV writer: ``(values, metadata dict)``."""
    meta, rows = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line.strip():
            cells = line.split(",")
            if any(c.endswith("j") for c in cells):
                rows.append([complex(c) for c in cells])
            else:
                rows.append([float(c) for c in cells])
    return np.array(rows), meta
