"""Result tables and their delimited serializations.

CSV carries `#`-prefixed metadata lines (command, config hash, seed, tool
version) followed by a header row and the data; floats are printed with 17
significant digits so a written file is byte-identical across reruns of the
same seeded config and parses back to the same doubles.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

__all__ = ["format_value", "render_csv", "render_json", "write_result"]


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if v == 0.0:
            v = 0.0  # avoid the "-0" rendering
        return f"{v:.17g}"
    return str(v)


def render_csv(columns, rows, metadata: dict) -> str:
    buf = io.StringIO()
    for key, value in metadata.items():
        buf.write(f"# {key} = {value}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(format_value(v) for v in row) + "\n")
    return buf.getvalue()


def render_json(columns, rows, metadata: dict) -> str:
    payload = {
        "metadata": dict(metadata),
        "columns": list(columns),
        "rows": [list(row) for row in rows],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_result(path, columns, rows, metadata: dict, fmt: str = "csv") -> str:
    """Serialize and (if path is not None) write; returns the text."""
    if fmt == "csv":
        text = render_csv(columns, rows, metadata)
    elif fmt == "json":
        text = render_json(columns, rows, metadata)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text
