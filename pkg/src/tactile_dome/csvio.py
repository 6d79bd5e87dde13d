"""Dataset CSV reading and writing, plus atomic file output."""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .surrogate import Dataset

DATASET_COLUMNS = ("A", "B", "depth_mm", "contact", "r1", "r2", "r3", "r4", "r5")
MANIFEST_NAME = "manifest.json"


class IngestError(ValueError):
    """Malformed dataset file; the message names the line."""


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_json(path, data) -> None:
    atomic_write_text(path, dump_json(data))


def fmt(value: float) -> str:
    # shortest repr that round-trips exactly
    return repr(float(value))


def dataset_to_csv(dataset: Dataset) -> str:
    lines = [",".join(DATASET_COLUMNS)]
    for (a, b), d, c, r in zip(dataset.ab, dataset.depth, dataset.contact, dataset.readings):
        lines.append(",".join([fmt(a), fmt(b), fmt(d), "1" if c else "0", *map(fmt, r)]))
    return "\n".join(lines) + "\n"


def write_dataset_csv(path, dataset: Dataset) -> None:
    atomic_write_text(path, dataset_to_csv(dataset))


def read_manifest(directory) -> dict | None:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _manifest_entry(path: Path) -> dict | None:
    manifest = read_manifest(path.parent)
    if manifest is None:
        return None
    return manifest.get("files", {}).get(path.name)


def ingest_csv(path, tare: bool | None = None) -> Dataset:
    """Parse a dataset CSV.

    Rows of one location must be contiguous, with at most one non-touch
    row.  With taring, each location's non-touch readings are subtracted
    from all of that location's rows.  ``tare=None`` tares unless a
    ``manifest.json`` next to the file marks it as surrogate output.
    """
    path = Path(path)
    entry = _manifest_entry(path)
    provenance = entry.get("provenance", "ingested") if entry else "ingested"
    if tare is None:
        tare = provenance != "surrogate"

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}:1: missing header") from None
        header = [h.strip() for h in header]
        missing = [c for c in DATASET_COLUMNS if c not in header]
        if missing:
            raise IngestError(f"{path}:1: missing column(s) {', '.join(missing)}")
        col = [header.index(c) for c in DATASET_COLUMNS]
        rows, lines = [], []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) < len(header):
                raise IngestError(f"{path}:{line_no}: expected {len(header)} fields, got {len(raw)}")
            values = []
            for name, idx in zip(DATASET_COLUMNS, col):
                cell = raw[idx].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestError(
                        f"{path}:{line_no}: column {name}: non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise IngestError(f"{path}:{line_no}: column {name}: non-finite value {cell!r}")
                values.append(v)
            if values[3] not in (0.0, 1.0):
                raise IngestError(f"{path}:{line_no}: column contact must be 0 or 1")
            if values[2] < 0:
                raise IngestError(f"{path}:{line_no}: column depth_mm is negative")
            if values[3] == 0.0 and values[2] != 0.0:
                raise IngestError(f"{path}:{line_no}: non-touch row with nonzero depth_mm")
            rows.append(values)
            lines.append(line_no)
    if not rows:
        raise IngestError(f"{path}: empty dataset")

    data = np.array(rows)
    ab = data[:, :2]
    contact = data[:, 3] == 1.0
    readings = data[:, 4:].copy()

    groups = _location_groups(ab, contact, lines, path)
    if tare:
        for start, stop, nontouch in groups:
            if nontouch is not None:
                readings[start:stop] -= data[nontouch, 4:]

    return Dataset(
        ab, data[:, 2], contact, readings,
        config_ref=entry.get("case") if entry else None,
        provenance=provenance,
        tared=bool(tare),
        meta={"source": str(path)},
    )


def _location_groups(ab, contact, lines, path):
    """Contiguous (start, stop, non-touch row) runs of identical locations."""
    groups = []
    seen = set()
    start = 0
    for i in range(1, len(ab) + 1):
        if i < len(ab) and ab[i, 0] == ab[start, 0] and ab[i, 1] == ab[start, 1]:
            continue
        key = (ab[start, 0], ab[start, 1])
        if key in seen:
            raise IngestError(
                f"{path}:{lines[start]}: inconsistent location grouping, location "
                f"({key[0]}, {key[1]}) reappears after other locations"
            )
        seen.add(key)
        nontouch = [j for j in range(start, i) if not contact[j]]
        if len(nontouch) > 1:
            raise IngestError(
                f"{path}:{lines[nontouch[1]]}: inconsistent location grouping, second "
                f"non-touch row for location ({key[0]}, {key[1]})"
            )
        groups.append((start, i, nontouch[0] if nontouch else None))
        start = i
    return groups
