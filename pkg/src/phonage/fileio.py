"""Deterministic text output: JSON with fixed float formatting, hashing.

Report numbers are printed with 17 significant digits so files
round-trip bit-exactly and byte-compare across runs; the stdlib encoder
cannot be coerced into that format, hence the small serializer here.
"""

from __future__ import annotations

import hashlib
import json
import math

from .errors import DataError

FLOAT_FORMAT = ".17g"


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise DataError(f"non-finite value {x!r} in output document")
    return format(float(x), FLOAT_FORMAT)


def dumps_stable(obj, indent: int = 2) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""

    def render(node, depth):
        pad = " " * (indent * depth)
        pad_in = " " * (indent * (depth + 1))
        if node is None:
            return "null"
        if isinstance(node, bool):
            return "true" if node else "false"
        if isinstance(node, int):
            return str(node)
        if isinstance(node, float):
            return format_float(node)
        if isinstance(node, str):
            return json.dumps(node)
        if isinstance(node, (list, tuple)):
            if not node:
                return "[]"
            items = [render(v, depth + 1) for v in node]
            return "[\n" + ",\n".join(pad_in + it for it in items) + "\n" + pad + "]"
        if isinstance(node, dict):
            if not node:
                return "{}"
            items = []
            for key in sorted(node):
                if not isinstance(key, str):
                    raise DataError(f"non-string JSON key {key!r}")
                items.append(pad_in + json.dumps(key) + ": " + render(node[key], depth + 1))
            return "{\n" + ",\n".join(items) + "\n" + pad + "}"
        raise DataError(f"unserializable value of type {type(node).__name__}")

    return render(obj, 0) + "\n"


def write_stable_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_stable(obj))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
