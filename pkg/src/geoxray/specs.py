"""Tiny parser for preset strings such as ``hyperbolic(1, 0.8)`` or ``generic_poly(3)``."""
from __future__ import annotations

import re

from .errors import ConfigError

_CALL = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def split_args(text: str) -> list[str]:
    """Split on top-level commas."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        out.append(tail)
    return out


def parse_call(spec: str) -> tuple[str, list[str]]:
    m = _CALL.match(spec)
    if not m:
        raise ConfigError(f"cannot parse preset {spec!r}")
    name, body = m.group(1), m.group(2)
    return name, split_args(body) if body else []


def parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"not a complex number: {text!r}") from exc
