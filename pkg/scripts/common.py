"""Shared CSV output for the experiment scripts."""

from __future__ import annotations

import os
from pathlib import Path

from bsslab import __version__
from bsslab.cli import Output, render, write_atomic

RESULTS = Path(os.environ.get("BSL_RESULTS", Path(__file__).resolve().parent.parent / "results"))


def save(name: str, rows: list[dict], meta: dict | None = None) -> Path:
    RESULTS.mkdir(parents=True, exist_ok=True)
    path = RESULTS / f"{name}.csv"
    columns = list(rows[0].keys()) if rows else []
    write_atomic(str(path), render(Output(dict(meta or {}), columns, rows), "csv"))
    print(f"wrote {path} ({len(rows)} rows, bsslab {__version__})")
    return path
