# /utils/text.py
# Helpers for the line-oriented text formats: comment/blank detection, field splitting and
# a number format that round-trips floats exactly.
import math
import re


COMMENT_PREFIX = "#"

_KEY_VALUE_RE = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.*)$")


def is_skippable(line: str) -> bool:
    stripped = line.strip()
    return not stripped or stripped.startswith(COMMENT_PREFIX)


def split_fields(line: str, sep: str = ",") -> list[str]:
    return [part.strip() for part in line.strip().split(sep)]


def parse_key_value(line: str) -> tuple[str, str] | None:
    m = _KEY_VALUE_RE.match(line.strip())
    if not m:
        return None
    value = m.group("value")
    # trailing comments are allowed after the value
    if COMMENT_PREFIX in value:
        value = value.split(COMMENT_PREFIX, 1)[0]
    return m.group("key"), value.strip()


def format_number(value: float | int | None) -> str:
    """
    Render a number so that float(format_number(v)) == v exactly. Integral values drop the
    trailing ".0" to keep exported files readable; None becomes an empty field.
    """
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if math.isfinite(value) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))

