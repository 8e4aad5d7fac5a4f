"""Output files are written to a temporary sibling and renamed into place."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Optional

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "ENTANGLER_OUTPUT_DIR"


def default_output_dir() -> Optional[Path]:
    value = os.getenv(OUTPUT_DIR_ENV)
    return Path(value) if value else None


def atomic_write_bytes(path: Path, payload: bytes) -> Path:
    """Write ``payload`` so that ``path`` is either absent/old or complete, never partial."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(handle, "wb") as stream:
            stream.write(payload)
            stream.flush()
            os.fsync(stream.fileno())
        os.replace(temporary, path)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise
    logger.info("Wrote %s", path)
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(document: Any) -> str:
    # allow_nan=False keeps the output strict JSON; callers map non-finite values to null.
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write_json(path: Path, document: Any) -> Path:
    return atomic_write_text(path, dump_json(document))
