"""Small file helpers shared by the CSV writers."""
from __future__ import annotations

import os
import tempfile


def atomic_write(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_sig(value: float, digits: int) -> str:
    """Fixed significant-digit formatting used by the CSV schemas."""
    return f"{value:.{digits}g}"
