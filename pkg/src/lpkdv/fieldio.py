"""Lattice-field import/export: CSV (n,m,re,im) and JSON-header + binary float64.

Both formats round-trip exactly at float64 precision: CSV uses repr (shortest
round-tripping decimal), the binary format stores raw little-endian pairs.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .errors import DomainError
from .quad import LatticeField

_MAGIC = "lpkdv-field-v1"


def save_field_csv(field: LatticeField, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "m", "re", "im"])
        vals = np.asarray(field.values, dtype=np.complex128)
        for n in range(field.n_size):
            for m in range(field.m_size):
                z = vals[n, m]
                writer.writerow([n, m, repr(float(z.real)), repr(float(z.imag))])


def load_field_csv(path) -> LatticeField:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["n", "m", "re", "im"]:
            raise DomainError(f"unexpected CSV header {header}")
        for n, m, re, im in reader:
            rows.append((int(n), int(m), float(re), float(im)))
    if not rows:
        raise DomainError("empty field CSV")
    n_size = max(r[0] for r in rows) + 1
    m_size = max(r[1] for r in rows) + 1
    vals = np.zeros((n_size, m_size), dtype=np.complex128)
    for n, m, re, im in rows:
        vals[n, m] = re + 1j * im
    if np.all(vals.imag == 0.0):
        return LatticeField(vals.real)
    return LatticeField(vals)


def save_field_binary(field: LatticeField, path) -> None:
    header = {
        "magic": _MAGIC,
        "n_size": field.n_size,
        "m_size": field.m_size,
        "kind": field.kind,
    }
    vals = np.asarray(field.values, dtype=np.complex128)
    pairs = np.empty((field.n_size, field.m_size, 2), dtype="<f8")
    pairs[..., 0] = vals.real
    pairs[..., 1] = vals.imag
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii"))
        fh.write(b"\n")
        fh.write(pairs.tobytes())


def load_field_binary(path) -> LatticeField:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        raw = fh.read()
    header = json.loads(header_line)
    if header.get("magic") != _MAGIC:
        raise DomainError("not an lpkdv binary field file")
    n_size, m_size = header["n_size"], header["m_size"]
    pairs = np.frombuffer(raw, dtype="<f8").reshape(n_size, m_size, 2)
    vals = pairs[..., 0] + 1j * pairs[..., 1]
    if header["kind"] == "real":
        return LatticeField(vals.real)
    return LatticeField(vals)
