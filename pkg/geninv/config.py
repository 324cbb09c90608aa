"""Configuration files and flag precedence: flag > config file > built-in default."""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

from .errors import DataFileError, ValidationError


def _key(name: str) -> str:
    return name.replace("-", "_")


def load_config(path: Union[str, Path], section: Optional[str] = None) -> Dict[str, Any]:
    """
    Read a JSON object of flag values. Keys may use dashes or underscores.
    If `section` names a nested object (e.g. "sweep"), its keys override the
    top-level ones.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise DataFileError(str(path), e.strerror or str(e)) from e
    except json.JSONDecodeError as e:
        raise DataFileError(str(path), f"invalid JSON: {e.msg}", e.lineno) from None
    if not isinstance(data, dict):
        raise DataFileError(str(path), "config must be a JSON object")

    flat = {_key(k): v for k, v in data.items() if not isinstance(v, dict)}
    if section is not None:
        nested = data.get(section, {})
        if not isinstance(nested, dict):
            raise DataFileError(str(path), f"section '{section}' must be a JSON object")
        flat.update({_key(k): v for k, v in nested.items()})
    return flat


def resolve(args: Mapping[str, Any], config: Mapping[str, Any], defaults: Mapping[str, Any],
            allowed: Iterable[str]) -> Dict[str, Any]:
    """
    Merge settings for the names in `allowed`. A flag left at None falls back
    to the config file, then to the default.
    """
    allowed = set(allowed)
    unknown = sorted(set(config) - allowed)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    merged = {}
    for name in allowed:
        if args.get(name) is not None:
            merged[name] = args[name]
        elif name in config:
            merged[name] = config[name]
        else:
            merged[name] = defaults.get(name)
    return merged
