"""Plain-text key-value file format shared by material, campaign and stack files.

Syntax::

    # comment
    [section_name]
    key value
    other_key = also fine
    table            # opens a two-column numeric block
    0.1   12.0
    0.15  9.3
    end

Section names and keys are lower-cased.  A ``table`` block is stored under
the key ``"table"`` as a list of ``(float, float)`` rows.
"""

from __future__ import annotations

from .errors import ConfigError


def parse_kv_text(text: str) -> dict[str, dict]:
    sections: dict[str, dict] = {}
    current: dict | None = None
    table: list | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if table is not None:
            if line.lower() == "end":
                current["table"] = table
                table = None
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"line {lineno}: table rows need two columns, got {raw!r}")
            try:
                table.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad table row {raw!r}") from exc
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if not name:
                raise ConfigError(f"line {lineno}: empty section name")
            current = sections.setdefault(name, {})
            continue
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]: {raw!r}")
        if "=" in line:
            key, _, value = line.partition("=")
        else:
            key, _, value = line.partition(" ")
        key = key.strip().lower()
        value = value.strip()
        if key == "table" and not value:
            table = []
            continue
        if not key:
            raise ConfigError(f"line {lineno}: missing key in {raw!r}")
        current[key] = value
    if table is not None:
        raise ConfigError("unterminated table block (missing 'end')")
    return sections


def parse_kv_file(path) -> dict[str, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_text(fh.read())


def get_float(section: dict, key: str, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(section[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {key!r}: expected a number, got {section[key]!r}") from exc


def get_int(section: dict, key: str, default=None):
    value = get_float(section, key, default)
    if value != int(value):
        raise ConfigError(f"key {key!r}: expected an integer, got {value}")
    return int(value)


def get_str(section: dict, key: str, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    return str(section[key])


def get_bool(section: dict, key: str, default=False):
    if key not in section:
        return default
    value = str(section[key]).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"key {key!r}: expected a boolean, got {section[key]!r}")
