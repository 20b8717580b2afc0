"""CSV tables and YAML metadata sidecars with full-precision number rendering."""

from __future__ import annotations

import csv
import io
import math
import platform
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__


def fmt(x) -> str:
    """Render one cell: floats in 17-significant-digit scientific notation, infinities as inf."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".16e")
    return str(x)


def table_text(header: list[str], rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if is_dataclass(r):
            r = list(asdict(r).values())
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return fmt(x) if not math.isfinite(x) else x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def versions() -> dict:
    return {
        "qdiscern": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_report(path: str | Path, header: list[str], rows: list, metadata: dict) -> Path:
    """Write ``path`` (CSV) and ``path.meta.yaml``; returns the sidecar path."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(table_text(header, rows))
    meta = dict(metadata)
    meta["versions"] = versions()
    side = path.with_name(path.name + ".meta.yaml")
    side.write_text(yaml.safe_dump(_plain(meta), sort_keys=False, default_flow_style=None))
    return side
