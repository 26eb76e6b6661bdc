"""Reading and writing snapshot matrices, bases and selection reports.

Two matrix formats are supported:

``csv``
    Comma separated, one matrix row per line, no header unless
    ``header=True`` (which skips exactly one line).
``rawf64``
    A 16 byte header (magic ``b"SSEL"``, then little-endian ``u32`` n, m,
    flags) followed by ``n*m`` little-endian float64 values in row-major
    order.

An optional validity mask lives in a sidecar file next to the matrix, one
ASCII ``0``/``1`` per row (``1`` = valid candidate). The sidecar name is the
matrix file name with ``.mask`` appended (``field.csv.mask``); a sidecar
named after the stem (``field.mask``) is also picked up when reading.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

MAGIC = b"SSEL"
_HEADER = struct.Struct("<4sIII")

FORMATS = ("csv", "rawf64")


@dataclass
class SnapshotMatrix:
    """n x m field data: rows are spatial candidate points, columns snapshots."""

    data: np.ndarray
    mask: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(f"snapshot data must be a non-empty 2D array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            bad = np.argwhere(~np.isfinite(data))[0]
            raise ValidationError(f"non-finite entry at row {bad[0]}, column {bad[1]}")
        self.data = data
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool).ravel()
            if mask.shape[0] != data.shape[0]:
                raise ValidationError(f"mask length {mask.shape[0]} does not match n={data.shape[0]}")
            self.mask = mask

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]

    @property
    def valid(self) -> np.ndarray:
        """Boolean vector of valid candidate rows (all true without a mask)."""
        if self.mask is None:
            return np.ones(self.n, dtype=bool)
        return self.mask

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    def columns(self, idx) -> "SnapshotMatrix":
        """Sub-matrix made of the given snapshot columns, sharing the mask."""
        return SnapshotMatrix(self.data[:, idx], self.mask, dict(self.meta))


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------

def _guess_format(path: Path) -> str:
    return "csv" if path.suffix.lower() in (".csv", ".txt") else "rawf64"


def _mask_sidecars(path: Path):
    return [Path(str(path) + ".mask"), path.with_suffix(".mask")]


def read_mask(path, n: int) -> np.ndarray:
    """Read an ASCII 0/1 mask with exactly ``n`` entries."""
    text = Path(path).read_text()
    tokens = text.split()
    if len(tokens) != n:
        raise ParseError(f"{path}: mask has {len(tokens)} entries, expected {n}")
    out = np.empty(n, dtype=bool)
    for i, tok in enumerate(tokens):
        if tok not in ("0", "1"):
            raise ParseError(f"{path}: row {i}: mask entry must be 0 or 1, got {tok!r}")
        out[i] = tok == "1"
    return out


def write_mask(path, mask) -> None:
    Path(path).write_text("".join("1\n" if v else "0\n" for v in np.asarray(mask, dtype=bool)))


def _read_csv(path: Path, header: bool) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, rec in enumerate(reader):
            if header and lineno == 0:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            row = []
            for j, cell in enumerate(rec):
                try:
                    row.append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}: row {len(rows)}, column {j}: cannot parse {cell!r}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"{path}: row {len(rows)} has {len(row)} columns, expected {width}")
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _read_raw(path: Path) -> tuple[np.ndarray, int]:
    buf = path.read_bytes()
    if len(buf) < _HEADER.size:
        raise ParseError(f"{path}: truncated header ({len(buf)} bytes)")
    magic, n, m, flags = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * n * m
    if len(buf) != expected:
        raise ParseError(f"{path}: expected {expected} bytes for {n}x{m}, found {len(buf)}")
    data = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size).reshape(n, m).astype(float)
    return data, flags


def load_matrix(path, format: str | None = None, *, header: bool = False) -> SnapshotMatrix:
    """Load a matrix file, plus its mask sidecar when one exists.

    Parameters
    ----------
    path : str or Path
        File to read.
    format : {"csv", "rawf64"}, optional
        Declared format. Guessed from the suffix when omitted (``.csv`` and
        ``.txt`` are CSV, anything else rawf64).
    header : bool
        Skip the first CSV line.

    Raises
    ------
    ParseError
        Malformed file; the message names the row and column.
    ValidationError
        A non-finite entry, or a mask of the wrong length.
    """
    path = Path(path)
    fmt = format or _guess_format(path)
    if fmt not in FORMATS:
        raise ValidationError(f"unknown matrix format {fmt!r}")
    meta = {"source": str(path), "format": fmt}
    if fmt == "csv":
        data = _read_csv(path, header)
    else:
        data, flags = _read_raw(path)
        meta["flags"] = str(flags)
    mask = None
    for side in _mask_sidecars(path):
        if side.exists() and side != path:
            mask = read_mask(side, data.shape[0])
            meta["mask"] = str(side)
            break
    return SnapshotMatrix(data, mask, meta)


def save_matrix(matrix, path, format: str | None = None, *, write_mask_file: bool = True) -> None:
    """Write a matrix; CSV floats carry 17 significant digits."""
    path = Path(path)
    fmt = format or _guess_format(path)
    if isinstance(matrix, SnapshotMatrix):
        data, mask = matrix.data, matrix.mask
    else:
        data, mask = np.atleast_2d(np.asarray(matrix, dtype=float)), None
    if fmt == "csv":
        with open(path, "w") as fh:
            for row in data:
                fh.write(",".join(format_float(v) for v in row) + "\n")
    elif fmt == "rawf64":
        n, m = data.shape
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, n, m, 0))
            fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    else:
        raise ValidationError(f"unknown matrix format {fmt!r}")
    if mask is not None and write_mask_file:
        write_mask(Path(str(path) + ".mask"), mask)


def save_basis(basis, path) -> None:
    """Persist a POD basis: modes as rawf64, singular values as ``<path>.sv.csv``.

    A temporal mean (centered bases) goes to ``<path>.mean.csv`` and the
    candidate mask to ``<path>.mask``.
    """
    path = Path(path)
    save_matrix(basis.modes, path, "rawf64")
    Path(str(path) + ".sv.csv").write_text("".join(format_float(s) + "\n" for s in basis.singular_values))
    if basis.mean is not None:
        Path(str(path) + ".mean.csv").write_text("".join(format_float(s) + "\n" for s in basis.mean))
    if basis.mask is not None:
        write_mask(Path(str(path) + ".mask"), basis.mask)


def load_basis(path, format: str | None = None):
    """Inverse of :func:`save_basis`; also accepts a bare modes matrix."""
    from .pod import PodBasis

    path = Path(path)
    mat = load_matrix(path, format)
    sv_file = Path(str(path) + ".sv.csv")
    sv = None
    if sv_file.exists():
        sv = np.array([float(t) for t in sv_file.read_text().split()])
    mean_file = Path(str(path) + ".mean.csv")
    mean = None
    if mean_file.exists():
        mean = np.array([float(t) for t in mean_file.read_text().split()])
    return PodBasis(mat.data, sv, mask=mat.mask, mean=mean)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _dump_json(obj) -> str:
    # json.dumps cannot be told to use a fixed float precision, so floats are
    # rendered here and everything else is delegated.
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_dump_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_dump_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass
class SelectionReport:
    """Result record for one selection run."""

    method: str
    indices: list
    step_values: list
    config: dict = field(default_factory=dict)
    det_mantissa: float = float("nan")
    det_exponent: int = 0
    logdet: float = float("nan")
    unified_logdet: float = float("nan")
    wall_time: float = 0.0
    timestamp: str = ""

    def to_dict(self) -> dict:
        # field order is part of the format
        return {
            "method": self.method,
            "config": dict(self.config),
            "indices": [int(i) for i in self.indices],
            "trace": [float(v) for v in self.step_values],
            "det_mantissa": float(self.det_mantissa),
            "det_exponent": int(self.det_exponent),
            "logdet": float(self.logdet),
            "unified_logdet": float(self.unified_logdet),
            "wall_time": float(self.wall_time),
            "timestamp": self.timestamp,
        }


def report_to_json(report: SelectionReport) -> str:
    return _dump_json(report.to_dict()) + "\n"


def save_report(report: SelectionReport, path, format: str | None = None) -> None:
    """Write a report as JSON (one object) or CSV (one row per selection step).

    Raises ``OSError`` when the path cannot be written.
    """
    path = Path(path)
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "json")
    if fmt == "json":
        text = report_to_json(report)
    elif fmt == "csv":
        lines = ["method,step,index,step_value"]
        for k, (i, v) in enumerate(zip(report.indices, report.step_values), start=1):
            lines.append(f"{report.method},{k},{int(i)},{format_float(v)}")
        text = "\n".join(lines) + "\n"
    else:
        raise ValidationError(f"unknown report format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)


def load_report(path) -> SelectionReport:
    """Read a JSON report written by :func:`save_report`."""
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    nan = float("nan")
    return SelectionReport(
        method=d["method"],
        indices=[int(i) for i in d["indices"]],
        step_values=[nan if v is None else float(v) for v in d.get("trace", [])],
        config=d.get("config", {}),
        det_mantissa=nan if d.get("det_mantissa") is None else d["det_mantissa"],
        det_exponent=int(d.get("det_exponent", 0)),
        logdet=nan if d.get("logdet") is None else d["logdet"],
        unified_logdet=nan if d.get("unified_logdet") is None else d["unified_logdet"],
        wall_time=float(d.get("wall_time", 0.0)),
        timestamp=d.get("timestamp", ""),
    )


def write_table(rows: list[dict], path=None, fmt: str = "csv") -> str:
    """Render a list of flat records as CSV (header row) or JSON; optionally write it."""
    if fmt == "json":
        text = _dump_json(rows) + "\n"
    else:
        if not rows:
            text = ""
        else:
            keys = list(rows[0].keys())
            out = [",".join(keys)]
            for row in rows:
                cells = []
                for k in keys:
                    v = row[k]
                    if isinstance(v, (float, np.floating)):
                        cells.append(format_float(v) if math.isfinite(v) else "nan")
                    else:
                        cells.append(str(v))
                out.append(",".join(cells))
            text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
