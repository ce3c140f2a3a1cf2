from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Mapping


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


def write_outputs(outputs: Mapping[Path, str]) -> None:
    """Write several already-rendered files; each one lands atomically."""
    for path, text in outputs.items():
        atomic_write_text(path, text)
