"""CSV/JSON output plumbing: atomic writes, metadata headers, digests.

Every artifact the pipeline writes starts with `# key=value` comment lines
(tool version, seed, input digests) followed by a regular CSV header or a
JSON document with a "metadata" member. Readers here skip those comments,
so stage outputs can be fed back in as stage inputs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from ._version import __version__


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file + rename so failures never leave partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def standard_metadata(seed: int | None = None, inputs: dict[str, str] | None = None) -> dict[str, str]:
    """The metadata block every output carries (no timestamps: outputs must
    be byte-identical across reruns)."""
    meta = {"tool": f"admac {__version__}"}
    if seed is not None:
        meta["seed"] = str(seed)
    for name, digest in (inputs or {}).items():
        meta[f"input_{name}"] = digest
    return meta


def _comment_lines(meta: dict[str, str]) -> list[str]:
    return [f"# {key}={value}" for key, value in meta.items()]


def write_csv(
    path: str | Path,
    meta: dict[str, str],
    header: Sequence[str],
    rows: Iterable[Sequence],
) -> None:
    buf = io.StringIO()
    for line in _comment_lines(meta):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def read_csv(path: str | Path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Counterpart of write_csv; returns (metadata, header, rows)."""
    meta: dict[str, str] = {}
    data_lines: list[str] = []
    with open(path, encoding="utf-8", newline="") as handle:
        for line in handle:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            data_lines.append(line)
    rows = list(csv.reader(data_lines))
    if not rows:
        return meta, [], []
    return meta, rows[0], rows[1:]


def write_json(path: str | Path, meta: dict[str, str], payload: dict) -> None:
    document = {"metadata": meta, **payload}
    atomic_write_text(path, json.dumps(document, indent=2, sort_keys=True) + "\n")
