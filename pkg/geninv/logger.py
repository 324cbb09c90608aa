"""Data logging: CSV result files and the process-wide logging setup."""

import csv
import io
import logging
import math
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

PathLike = Union[str, Path]


def configure_logging(verbosity: int = 0):
    """WARNING by default, INFO with -v, DEBUG with -vv; records go to stderr."""
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def format_float(x: Optional[float]) -> str:
    """17 significant digits; missing or non-finite values print as 'nan'."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return f"{x:.17g}"


@contextmanager
def atomic_writer(path: PathLike):
    """
    Write to a temp file next to `path` and rename it into place on success.
    On any error the temp file is removed and `path` is left untouched.
    """
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _write(f, header: Sequence[str], rows: Iterable[Sequence]):
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else format_float(v) for v in row])


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]):
    with atomic_writer(path) as f:
        _write(f, header, rows)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    _write(buf, header, rows)
    return buf.getvalue()
