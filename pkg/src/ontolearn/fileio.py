"""Small helpers for writing artifacts atomically."""

import os
import tempfile
from contextlib import contextmanager
from pathlib import Path


@contextmanager
def atomic_open(path, mode="w", encoding="utf-8"):
    """Open a temporary sibling of `path` and rename it into place on success.

    An exception inside the block removes the temporary file and leaves any
    previous version of `path` untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        kwargs = {} if "b" in mode else {"encoding": encoding, "newline": "\n"}
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def atomic_write_text(path, text):
    with atomic_open(path) as fh:
        fh.write(text)


def write_tsv(path, rows):
    with atomic_open(path) as fh:
        for row in rows:
            fh.write("\t".join(str(x) for x in row) + "\n")
