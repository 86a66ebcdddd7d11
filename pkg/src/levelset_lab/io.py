"""On-disk formats: field files, deterministic CSV, and hashing helpers.

Grid fields: one ASCII header line `levelset-lab grid v1 N_g=<int>` followed
by N_g^2 little-endian float64 values, row-major.  Spectral fields: header
`levelset-lab spec v1 N=<int> shape=<ball|square>` followed by binary
(k1, k2, coeff) triples (int32, int32, float64, little-endian) sorted
lexicographically by (k1, k2).

CSV output is deterministic byte-for-byte: floats are rendered with repr
(shortest round-trip form), rows are written with "\n" newlines, UTF-8.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .spectral import GridField, ModeIndexSet, SpectralField, mode_set

_GRID_MAGIC = "levelset-lab grid v1"
_SPEC_MAGIC = "levelset-lab spec v1"
_SHAPE_TO_TOKEN = {"euclidean_ball": "ball", "square": "square"}
_TOKEN_TO_SHAPE = {v: k for k, v in _SHAPE_TO_TOKEN.items()}
_TRIPLE_DTYPE = np.dtype([("k1", "<i4"), ("k2", "<i4"), ("coeff", "<f8")])


def write_grid(path, g: GridField) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"{_GRID_MAGIC} N_g={g.resolution}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(g.values, dtype="<f8").tobytes())


def read_grid(path) -> GridField:
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        prefix = f"{_GRID_MAGIC} N_g="
        if not header.startswith(prefix):
            raise ValueError(f"{path}: not a grid field file (header {header!r})")
        try:
            n = int(header[len(prefix):])
        except ValueError:
            raise ValueError(f"{path}: bad N_g in header {header!r}") from None
        data = fh.read()
    expected = n * n * 8
    if len(data) != expected:
        raise ValueError(
            f"{path}: payload is {len(data)} bytes, expected {expected} for N_g={n}"
        )
    values = np.frombuffer(data, dtype="<f8").reshape(n, n).astype(np.float64)
    return GridField(values)


def write_spectral(path, f: SpectralField) -> None:
    path = Path(path)
    token = _SHAPE_TO_TOKEN[f.modes.shape]
    triples = np.empty(len(f.modes), dtype=_TRIPLE_DTYPE)
    triples["k1"] = f.modes.k[:, 0]
    triples["k2"] = f.modes.k[:, 1]
    triples["coeff"] = f.coeffs
    with open(path, "wb") as fh:
        fh.write(
            f"{_SPEC_MAGIC} N={f.modes.radius} shape={token}\n".encode("ascii")
        )
        fh.write(triples.tobytes())


def read_spectral(path) -> SpectralField:
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        parts = header.split()
        if parts[: len(_SPEC_MAGIC.split())] != _SPEC_MAGIC.split() or len(parts) != 5:
            raise ValueError(f"{path}: not a spectral field file (header {header!r})")
        kv = dict(p.split("=", 1) for p in parts[3:])
        try:
            radius = int(kv["N"])
            shape = _TOKEN_TO_SHAPE[kv["shape"]]
        except (KeyError, ValueError):
            raise ValueError(f"{path}: bad header {header!r}") from None
        data = fh.read()
    modes = mode_set(radius, shape)
    if len(data) != len(modes) * _TRIPLE_DTYPE.itemsize:
        raise ValueError(
            f"{path}: payload holds {len(data) // _TRIPLE_DTYPE.itemsize} triples, "
            f"expected {len(modes)} for N={radius} shape={kv['shape']}"
        )
    triples = np.frombuffer(data, dtype=_TRIPLE_DTYPE)
    file_k = np.stack([triples["k1"], triples["k2"]], axis=1)
    if not np.array_equal(file_k, modes.k):
        raise ValueError(f"{path}: wavevector table does not match N={radius}")
    return SpectralField(modes, triples["coeff"].astype(np.float64))


def format_cell(value) -> str:
    """Deterministic text for one CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    text = str(value)
    if "," in text or "\n" in text:
        raise ValueError(f"CSV cell {text!r} needs quoting; use simpler values")
    return text


def write_csv(path, header, rows) -> None:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
