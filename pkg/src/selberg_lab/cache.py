"""On-disk coefficient cache.

File layout (UTF-8 text)::

    # selberg-lab coefficient cache
    version: 1
    form: delta
    limit: 1000
    degree: 2
    normalization: <provenance string>
    checksum: sha256:<hex digest of the body bytes>
    ---
    <one record per line: n value  (or n re im for complex tables)>

Values are written with 17 significant digits so doubles round-trip.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np

from .errors import LabError
from .forms import CoefficientTable

FORMAT_VERSION = 1
MAGIC = "# selberg-lab coefficient cache"


class CacheError(LabError):
    pass


def cache_path(cache_dir: str | os.PathLike, form_id: str, limit: int) -> Path:
    safe = form_id.replace(":", "-").replace("/", "_")
    return Path(cache_dir) / f"{safe}__{limit}.coef"


def _body(table: CoefficientTable) -> str:
    vals = table.values
    if np.iscomplexobj(vals):
        lines = [f"{n} {vals[n].real:.17g} {vals[n].imag:.17g}" for n in range(1, table.limit + 1)]
    else:
        lines = [f"{n} {vals[n]:.17g}" for n in range(1, table.limit + 1)]
    return "\n".join(lines) + "\n"


def encode(table: CoefficientTable) -> str:
    body = _body(table)
    digest = hashlib.sha256(body.encode()).hexdigest()
    header = [
        MAGIC,
        f"version: {FORMAT_VERSION}",
        f"form: {table.form_id}",
        f"limit: {table.limit}",
        f"degree: {table.degree}",
        f"normalization: {table.provenance}",
        f"checksum: sha256:{digest}",
        "---",
    ]
    return "\n".join(header) + "\n" + body


def write_table(path: str | os.PathLike, table: CoefficientTable) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(encode(table), encoding="utf-8")
    tmp.replace(path)
    return path


def read_header(text: str) -> tuple[dict[str, str], str]:
    head, sep, body = text.partition("\n---\n")
    if not sep:
        raise CacheError("missing header separator")
    lines = head.splitlines()
    if not lines or lines[0] != MAGIC:
        raise CacheError("not a coefficient cache file")
    fields = {}
    for line in lines[1:]:
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    return fields, body


def read_table(path: str | os.PathLike) -> CoefficientTable:
    text = Path(path).read_text(encoding="utf-8")
    fields, body = read_header(text)
    if fields.get("version") != str(FORMAT_VERSION):
        raise CacheError(f"cache format version {fields.get('version')!r} != {FORMAT_VERSION}")
    digest = hashlib.sha256(body.encode()).hexdigest()
    if fields.get("checksum") != f"sha256:{digest}":
        raise CacheError(f"checksum mismatch in {path}")
    limit = int(fields["limit"])
    rows = [line.split() for line in body.splitlines() if line]
    if len(rows) != limit:
        raise CacheError(f"expected {limit} records, found {len(rows)}")
    if rows and len(rows[0]) == 3:
        vals = np.zeros(limit + 1, dtype=complex)
        for r in rows:
            vals[int(r[0])] = complex(float(r[1]), float(r[2]))
    else:
        vals = np.zeros(limit + 1)
        for r in rows:
            vals[int(r[0])] = float(r[1])
    return CoefficientTable(fields["form"], limit, vals, fields.get("normalization", ""), int(fields.get("degree", 2)))


def verify(path: str | os.PathLike, table: CoefficientTable | None = None) -> bool:
    """True when the file parses, its checksum holds and (optionally) it matches ``table``."""
    stored = read_table(path)
    if table is None:
        return True
    return stored.limit == table.limit and np.array_equal(stored.values, table.values)
