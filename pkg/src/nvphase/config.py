"""Plain-text ``key = value`` configuration files.

Lines starting with ``#`` or ``;`` are comments. Keys are case-sensitive.
Parsing goes through :mod:`configparser` with an implicit section header.
"""

from __future__ import annotations

import configparser

_SECTION = "settings"


class ConfigError(ValueError):
    pass


def parse_key_values(text: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if len(cp.sections()) != 1:
        raise ConfigError("section headers are not allowed in key-value config files")
    return dict(cp[_SECTION])


def parse_float_list(raw: str) -> list[float]:
    return [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
