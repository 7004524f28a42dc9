"""Flat ``key = value`` configuration with optional ``[section]`` headings.

Sections only group keys for readability: every key lives in one flat
namespace, so a key may appear in at most one section.  Command-line
``--key value`` pairs override file values.
"""

import configparser
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional

from .errors import InversiveError

_TOP = "__top__"


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    parser.optionxform = str
    try:
        parser.read_string(f"[{_TOP}]\n" + text, source=source)
    except configparser.Error as exc:
        raise InversiveError("CONFIG", f"{source}: {exc}".replace("\n", " ")) from None
    flat: Dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            key = normalize_key(key)
            if key in flat:
                raise InversiveError("CONFIG", f"{source}: key {key!r} defined twice")
            flat[key] = value.strip()
    return flat


def load_config(path) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise InversiveError("FILE_NOT_FOUND", f"config {path} does not exist")
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def parse_overrides(tokens: Iterable[str]) -> Dict[str, str]:
    """``["--rtol", "1e-9", "--scheme=ERK"]`` -> {"rtol": "1e-9", "scheme": "ERK"}."""
    tokens = list(tokens)
    out: Dict[str, str] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise InversiveError("CONFIG", f"unexpected argument {tok!r}")
        if "=" in tok:
            key, value = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise InversiveError("CONFIG", f"flag {tok} needs a value")
            key, value = tok[2:], tokens[i + 1]
            i += 2
        out[normalize_key(key)] = value
    return out


class Settings:
    """Typed read access to a flat string mapping, tracking which keys were used."""

    def __init__(self, values: Mapping[str, str]):
        self._values = dict(values)
        self._used = set()

    def __contains__(self, key: str) -> bool:
        return key in self._values

    def raw(self, key: str, default: Optional[str] = None) -> Optional[str]:
        self._used.add(key)
        return self._values.get(key, default)

    def _convert(self, key, default, fn, kind):
        value = self.raw(key)
        if value is None:
            return default
        try:
            return fn(value)
        except ValueError:
            raise InversiveError("CONFIG", f"{key} = {value!r} is not a valid {kind}") from None

    def str(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.raw(key, default)

    def float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        return self._convert(key, default, float, "number")

    def int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        return self._convert(key, default, lambda v: int(v, 0), "integer")

    def complex(self, key: str, default: Optional[complex] = None) -> Optional[complex]:
        return self._convert(key, default, lambda v: complex(v.replace(" ", "")), "complex number")

    def bool(self, key: str, default: bool = False) -> bool:
        value = self.raw(key)
        if value is None:
            return default
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise InversiveError("CONFIG", f"{key} = {value!r} is not a boolean")

    def floats(self, key: str, default: Optional[list] = None) -> Optional[list]:
        return self._convert(key, default, lambda v: [float(x) for x in v.split(",") if x.strip()],
                             "comma-separated list of numbers")

    def ints(self, key: str, default: Optional[list] = None) -> Optional[list]:
        return self._convert(key, default, lambda v: [int(x) for x in v.split(",") if x.strip()],
                             "comma-separated list of integers")

    def unused(self):
        """Keys supplied but never read (usually a typo)."""
        return sorted(set(self._values) - self._used)
