"""File emission with all-or-nothing semantics.

Outputs are written to a scratch directory next to the target and moved in
only once everything succeeded, so a failed run leaves no partial files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

__all__ = ["StagedDir", "staged", "dumps_json", "write_csv", "clean_number"]


def clean_number(v: Any) -> Any:
    """JSON has no NaN/inf; map them to null."""
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return clean_number(obj)


def dumps_json(obj: Any) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


class StagedDir:
    def __init__(self, scratch: Path):
        self.path = scratch
        self.files: list[str] = []

    def file(self, name: str) -> Path:
        self.files.append(name)
        return self.path / name


@contextmanager
def staged(target: Path) -> Iterator[StagedDir]:
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    stage = StagedDir(scratch)
    try:
        yield stage
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    try:
        target.mkdir(parents=True, exist_ok=True)
        for name in stage.files:
            os.replace(scratch / name, target / name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
