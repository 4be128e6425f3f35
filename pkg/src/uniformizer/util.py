"""Shared plumbing: deterministic JSON, atomic file writes, bounded parallel map.

Everything here is deliberately boring.  Reports must be byte-identical across
runs with the same inputs, so JSON serialization is centralized (sorted keys,
fixed indentation, non-finite floats turned into strings) and file writes go
through a temp-file-plus-rename so readers never observe partial output.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import tempfile
from typing import Any, Callable, Iterable, Sequence

import numpy as np

ENV_THREADS = "UNIFORMIZER_THREADS"


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if np.isnan(f):
            return "nan"
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and a trailing newline; stable across runs."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def config_hash(config: dict) -> str:
    """Short stable hash of a configuration mapping, for report traceability."""
    payload = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def atomic_write_text(path: str, text: str) -> None:
    """Write text to `path` via a same-directory temp file and atomic rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def thread_budget() -> int:
    """Worker cap from the environment; 1 (serial) when unset or invalid."""
    raw = os.environ.get(ENV_THREADS, "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def pmap(fn: Callable, items: Sequence) -> list:
    """Map preserving order; uses a thread pool only when the env cap allows it.

    Results are collected in input order, so output is deterministic regardless
    of the worker count.
    """
    items = list(items)
    workers = thread_budget()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
