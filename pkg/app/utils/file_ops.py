"""
File and directory operation utilities
"""

import os
import re
from typing import Dict

import xxhash


def ensure_directory(directory_path: str) -> str:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        directory_path: Path to directory to create

    Returns:
        Absolute path to the directory
    """
    abs_path = os.path.abspath(directory_path)
    os.makedirs(abs_path, exist_ok=True)
    return abs_path


def sanitize_filename(filename: str, max_length: int = 100) -> str:
    """
    Sanitize a string to be safe for use as a filename.

    Args:
        filename: Raw filename string (e.g. a mechanism label like "stable(1.5)")
        max_length: Maximum allowed filename length

    Returns:
        Sanitized filename safe for filesystem use
    """
    # Keep only alphanumeric, hyphens, underscores, and dots
    safe_filename = re.sub(r'[^a-zA-Z0-9\-_\.]', '_', filename)
    safe_filename = re.sub(r'_{2,}', '_', safe_filename)
    safe_filename = safe_filename.strip('_.')

    if len(safe_filename) > max_length:
        safe_filename = safe_filename[:max_length]

    if not safe_filename:
        safe_filename = "untitled"

    return safe_filename


def write_bytes(file_path: str, payload: bytes) -> str:
    """
    Write a payload through a temporary sibling and rename it into place.

    Returns:
        Absolute path of the written file
    """
    abs_path = os.path.abspath(file_path)
    ensure_directory(os.path.dirname(abs_path))
    tmp_path = abs_path + ".tmp"
    with open(tmp_path, "wb") as handle:
        handle.write(payload)
    os.replace(tmp_path, abs_path)
    return abs_path


def content_hash(payload: bytes) -> str:
    """xxh3-64 hex digest of a byte payload"""
    return xxhash.xxh3_64_hexdigest(payload)


def file_hash(file_path: str, chunk_size: int = 1 << 20) -> str:
    """xxh3-64 hex digest of a file, streamed"""
    digest = xxhash.xxh3_64()
    with open(file_path, "rb") as handle:
        for chunk in iter(lambda: handle.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def describe_file(file_path: str, root: str) -> Dict[str, object]:
    """
    Manifest entry for an emitted artifact.

    Args:
        file_path: Path to the artifact
        root: Output directory the manifest is relative to

    Returns:
        Dict with relative path, size in bytes and content hash
    """
    return {
        "path": os.path.relpath(file_path, root).replace(os.sep, "/"),
        "size": os.path.getsize(file_path),
        "xxh3_64": file_hash(file_path),
    }
