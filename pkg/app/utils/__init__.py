"""
Utility modules for the Lévy Tree Laboratory

Common utilities used across the application:
- numerics: Log-domain arithmetic, quadrature and bracketing root finders
- rng: Counter-based random streams
- file_ops: File and directory operations, content hashes
- data_transform: Config overrides and JSON-friendly conversion
"""

from .numerics import LOG2, log_sum_exp, neumaier_sum, stable_mean, adaptive_quad, bracketed_root
from .rng import stream, streams, chunk_bounds
from .file_ops import ensure_directory, sanitize_filename, write_bytes, content_hash, file_hash, describe_file
from .data_transform import parse_override, apply_override, to_builtin, format_label

__all__ = [
    'LOG2',
    'log_sum_exp',
    'neumaier_sum',
    'stable_mean',
    'adaptive_quad',
    'bracketed_root',
    'stream',
    'streams',
    'chunk_bounds',
    'ensure_directory',
    'sanitize_filename',
    'write_bytes',
    'content_hash',
    'file_hash',
    'describe_file',
    'parse_override',
    'apply_override',
    'to_builtin',
    'format_label'
]
