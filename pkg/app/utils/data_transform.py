"""
Data transformation and formatting utilities
"""

import math
from typing import Any, Dict, Tuple

import numpy as np
import yaml


def parse_override(text: str) -> Tuple[Tuple[str, ...], Any]:
    """
    Parse a ``section.key=value`` override.

    The value goes through YAML so ``4096`` stays an int, ``1e-6`` a float,
    ``[1, 2]`` a list and ``true`` a bool.

    Args:
        text: Raw override from the command line

    Returns:
        (key path, typed value)
    """
    if "=" not in text:
        raise ValueError(f"override must look like key=value: {text!r}")
    key, raw = text.split("=", 1)
    path = tuple(part.strip() for part in key.strip().split("."))
    if not path or any(not part for part in path):
        raise ValueError(f"empty key in override: {text!r}")
    value = yaml.safe_load(raw) if raw.strip() else None
    # YAML 1.1 reads 1e-6 as a string
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            pass
    return path, value


def apply_override(document: Dict[str, Any], path: Tuple[str, ...], value: Any) -> Dict[str, Any]:
    """Set ``document[path[0]][path[1]]... = value``, creating sections as needed"""
    node = document
    for part in path[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[path[-1]] = value
    return document


def to_builtin(value: Any) -> Any:
    """
    Convert numpy scalars/arrays and tuples to plain Python for JSON output.

    Non-finite floats become strings ("inf", "-inf", "nan") so the JSON stays
    standard.
    """
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def format_label(label: str) -> str:
    """
    Format a mechanism label for display.

    Args:
        label: Raw label such as "stable(1.5)"

    Returns:
        Label with whitespace collapsed, or "unnamed mechanism"
    """
    if not label:
        return "unnamed mechanism"
    return " ".join(label.split())
