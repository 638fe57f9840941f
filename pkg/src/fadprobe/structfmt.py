"""Structured key-value tree documents (`.struct` files).

A struct document is canonical JSON: keys sorted, two-space indent, UTF-8,
trailing newline, NaN/Inf forbidden. Identical trees serialize to identical
bytes, which is what makes report bundles and cache stamps diffable.
Every document carries a `kind` key so files are self-describing.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any


def dumps_struct(doc: dict[str, Any]) -> str:
    if "kind" not in doc:
        raise ValueError("struct document requires a 'kind' key")
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def dump_struct(doc: dict[str, Any], path: str | Path) -> None:
    Path(path).write_text(dumps_struct(doc), encoding="utf-8")


def loads_struct(text: str) -> dict[str, Any]:
    doc = json.loads(text)
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError("not a struct document (missing 'kind')")
    return doc


def load_struct(path: str | Path) -> dict[str, Any]:
    return loads_struct(Path(path).read_text(encoding="utf-8"))
