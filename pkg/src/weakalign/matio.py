"""CSV and PGM readers/writers for sequences and matrices.

Sequence CSV: one row per time step, ``d`` comma-separated decimals, optional
leading lines starting with ``#``. Matrix CSV: ``n`` rows of ``m`` decimals.
Numbers are written with 17 significant digits so a write/read cycle is exact.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .seqcore import FeatureSequence


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def format_matrix(a: np.ndarray) -> str:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    return "".join(",".join(format(float(v), ".17g") for v in row) + "\n" for row in a)


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    rows = []
    width = None
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            row = [float(tok) for tok in s.split(",")]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: cannot parse row {s!r}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} fields, found {len(row)}")
        if not all(np.isfinite(row)):
            raise FormatError(f"{path}:{lineno}: non-finite value")
        rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return np.array(rows)


def write_matrix(path, a: np.ndarray) -> None:
    atomic_write_text(path, format_matrix(a))


def read_sequence(path, modality: str = "clip") -> FeatureSequence:
    return FeatureSequence(read_matrix(path), modality)


def write_sequence(path, X: FeatureSequence, header: str | None = None) -> None:
    text = format_matrix(X.items)
    if header:
        text = f"# {header}\n" + text
    atomic_write_text(path, text)


def to_pgm(a: np.ndarray) -> bytes:
    """8-bit binary PGM, linear min-max scaling, first row at the top."""
    a = np.asarray(a, dtype=np.float64)
    lo, hi = a.min(), a.max()
    scaled = np.zeros(a.shape) if hi == lo else (a - lo) / (hi - lo)
    pixels = np.round(scaled * 255).astype(np.uint8)
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes()


def write_pgm(path, a: np.ndarray) -> None:
    atomic_write_bytes(path, to_pgm(a))


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    # pixel bytes may themselves look like whitespace, so take them from the end
    return np.frombuffer(data[len(data) - w * h :], dtype=np.uint8).reshape(h, w)
