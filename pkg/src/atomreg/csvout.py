"""Self-describing CSV: ``# key: value`` parameter lines, a header row, then data rows."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Sequence, TextIO


def _format_meta(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value)


def write_csv(
    stream: TextIO,
    columns: Sequence[str],
    rows: Iterable[Sequence[float]],
    meta: dict[str, Any] | None = None,
) -> None:
    for key, value in (meta or {}).items():
        stream.write(f"# {key}: {_format_meta(value)}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def dump_csv(path: str | Path | None, columns, rows, meta=None) -> str:
    """Write to ``path`` (or just return the text when ``path`` is None)."""
    buf = io.StringIO()
    write_csv(buf, columns, rows, meta)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(source: str | Path | TextIO) -> tuple[dict[str, Any], list[str], list[list[float]]]:
    """Inverse of :func:`write_csv`: (meta, columns, rows as floats)."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    meta: dict[str, Any] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, raw = line[2:].partition(": ")
            try:
                meta[key] = json.loads(raw)
            except json.JSONDecodeError:
                meta[key] = raw
        elif line:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader, [])
    rows = [[float(v) for v in r] for r in reader]
    return meta, columns, rows
