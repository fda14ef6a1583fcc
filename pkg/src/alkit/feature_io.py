"""Bit-exact array, results-log, and checkpoint I/O.

Two array formats are readable and writable:

``.alfeat`` (native)
    8-byte magic ``ALFEAT01``, one ``u8`` dtype code (1=float32, 2=float64,
    3=int64), one ``u8`` rank (1 or 2), ``rank`` little-endian ``u64`` dims,
    then the raw little-endian row-major payload. No padding, no footer.

``.npy``
    The array-interchange format beginning with ``\\x93NUMPY``, restricted
    to version 1.0, C order, and the three dtypes above, always little
    endian. Files produced by any mainstream deep-learning pipeline load
    without conversion.

A CSV fallback reader exists for hand-authored fixtures (optional header
row, ``.``-decimal). CSV is read-only: it cannot round-trip floats exactly.

Results logs are line-delimited JSON (one self-contained record per line,
extension ``.aljsonl``) so a crash loses at most the line being written.
Checkpoints are single JSON documents.
"""

from __future__ import annotations

import ast
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import FormatError, IntegrityError, SequencingError
from .records import RoundMetrics

ALFEAT_MAGIC = b"ALFEAT01"
NPY_MAGIC = b"\x93NUMPY"

_CODE_TO_DTYPE = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<i8")}
_DTYPE_TO_CODE = {v: k for k, v in _CODE_TO_DTYPE.items()}
_NPY_DESCRS = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}

SUPPORTED_DTYPES = tuple(str(d) for d in _CODE_TO_DTYPE.values())


def _check_shape(shape: tuple[int, ...], where: str) -> None:
    if len(shape) not in (1, 2):
        raise IntegrityError(f"{where}: rank must be 1 or 2, got {len(shape)}")
    if any(dim < 1 for dim in shape):
        raise IntegrityError(f"{where}: all dims must be >= 1, got {shape}")


def _validate_array(data: np.ndarray, where: str) -> np.ndarray:
    data = np.ascontiguousarray(data)
    canonical = data.dtype.newbyteorder("<")
    if canonical not in _DTYPE_TO_CODE:
        raise IntegrityError(
            f"{where}: unsupported dtype {data.dtype}; expected one of {SUPPORTED_DTYPES}"
        )
    _check_shape(data.shape, where)
    return data.astype(canonical, copy=False)


# ---------------------------------------------------------------------------
# native binary format


def _read_alfeat(raw: bytes, path: str) -> np.ndarray:
    if len(raw) < 10:
        raise FormatError(f"{path}: truncated header", offset=len(raw))
    code = raw[8]
    if code not in _CODE_TO_DTYPE:
        raise FormatError(f"{path}: unknown dtype code {code}", offset=8)
    rank = raw[9]
    if rank not in (1, 2):
        raise FormatError(f"{path}: rank must be 1 or 2, got {rank}", offset=9)
    dims_end = 10 + 8 * rank
    if len(raw) < dims_end:
        raise FormatError(f"{path}: truncated dims", offset=len(raw))
    shape = tuple(int(d) for d in np.frombuffer(raw, "<u8", count=rank, offset=10))
    _check_shape(shape, path)
    dtype = _CODE_TO_DTYPE[code]
    expected = math.prod(shape) * dtype.itemsize
    payload = raw[dims_end:]
    if len(payload) != expected:
        raise IntegrityError(
            f"{path}: declared shape {shape} needs {expected} payload bytes, "
            f"found {len(payload)}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def _write_alfeat(path: Path, data: np.ndarray) -> None:
    header = ALFEAT_MAGIC + bytes([_DTYPE_TO_CODE[data.dtype], data.ndim])
    dims = np.asarray(data.shape, dtype="<u8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dims)
        fh.write(data.tobytes(order="C"))


# ---------------------------------------------------------------------------
# npy 1.0 subset


def _read_npy(raw: bytes, path: str) -> np.ndarray:
    if len(raw) < 10:
        raise FormatError(f"{path}: truncated header", offset=len(raw))
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise FormatError(f"{path}: unsupported version {major}.{minor}", offset=6)
    header_len = int(np.frombuffer(raw, "<u2", count=1, offset=8)[0])
    header_end = 10 + header_len
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated header dict", offset=len(raw))
    try:
        header = ast.literal_eval(raw[10:header_end].decode("latin1").strip())
        descr, fortran, shape = header["descr"], header["fortran_order"], header["shape"]
    except Exception as exc:
        raise FormatError(f"{path}: unparseable header dict ({exc})", offset=10)
    if fortran:
        raise FormatError(f"{path}: fortran-order files are not supported", offset=10)
    if descr not in _NPY_DESCRS:
        raise FormatError(
            f"{path}: dtype {descr!r} not in supported set {sorted(_NPY_DESCRS)}",
            offset=10,
        )
    shape = tuple(int(d) for d in shape)
    _check_shape(shape, path)
    dtype = _NPY_DESCRS[descr]
    expected = math.prod(shape) * dtype.itemsize
    payload = raw[header_end:]
    if len(payload) != expected:
        raise IntegrityError(
            f"{path}: declared shape {shape} needs {expected} payload bytes, "
            f"found {len(payload)}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def _write_npy(path: Path, data: np.ndarray) -> None:
    descr = data.dtype.str  # '<f4' etc. on every platform after canonicalization
    header = (
        "{'descr': '%s', 'fortran_order': False, 'shape': %s, }"
        % (descr, repr(data.shape))
    )
    # Pad so that the payload starts on a 64-byte boundary, ending in '\n'.
    unpadded = 10 + len(header) + 1
    header = header + " " * (-unpadded % 64) + "\n"
    with open(path, "wb") as fh:
        fh.write(NPY_MAGIC)
        fh.write(bytes([1, 0]))
        fh.write(np.asarray([len(header)], dtype="<u2").tobytes())
        fh.write(header.encode("latin1"))
        fh.write(data.tobytes(order="C"))


# ---------------------------------------------------------------------------
# csv fallback (read-only)


def read_csv_array(path: str | Path, dtype: str = "float32") -> np.ndarray:
    """Read a CSV of numbers; a non-numeric first row is treated as a header."""
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([cell.strip() for cell in line.split(",")])
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
        if not rows:
            raise FormatError(f"{path}: CSV has a header but no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise IntegrityError(f"{path}: ragged CSV rows")
    try:
        values = [[float(c) for c in r] for r in rows]
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric cell ({exc})")
    arr = np.asarray(values, dtype=np.dtype(dtype).newbyteorder("<"))
    if width == 1:
        arr = arr.reshape(-1)
    return _validate_array(arr, str(path))


# ---------------------------------------------------------------------------
# public array api


def read_array(path: str | Path) -> np.ndarray:
    """Read an array file, sniffing the format from its magic bytes."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv_array(path)
    raw = path.read_bytes()
    if raw[:8] == ALFEAT_MAGIC:
        return _read_alfeat(raw, str(path))
    if raw[:6] == NPY_MAGIC:
        return _read_npy(raw, str(path))
    raise FormatError(f"{path}: unrecognized magic {raw[:8]!r}", offset=0)


def write_array(path: str | Path, data: np.ndarray) -> None:
    """Write an array in canonical form; ``read_array`` inverts it exactly.

    The extension picks the format: ``.npy`` for interchange, anything else
    (conventionally ``.alfeat``) for the native format.
    """
    path = Path(path)
    data = _validate_array(np.asarray(data), str(path))
    if path.suffix.lower() == ".npy":
        _write_npy(path, data)
    else:
        _write_alfeat(path, data)


# ---------------------------------------------------------------------------
# results log


class ResultsLog:
    """Append-only sequence of round records backed by a ``.aljsonl`` file.

    Single-writer. Each line is one self-contained JSON object; a torn final
    line (crash mid-write) is detected on read and never counted as a record.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def read(self) -> list[RoundMetrics]:
        records, _ = self._read_valid()
        return records

    def valid_byte_length(self) -> int:
        """Length of the longest prefix of complete, parseable records."""
        _, offset = self._read_valid()
        return offset

    def _read_valid(self) -> tuple[list[RoundMetrics], int]:
        if not self.path.exists():
            return [], 0
        raw = self.path.read_bytes()
        records: list[RoundMetrics] = []
        offset = 0
        start = 0
        while start < len(raw):
            nl = raw.find(b"\n", start)
            if nl < 0:
                break  # torn trailing line: ignore
            line = raw[start:nl]
            try:
                records.append(RoundMetrics.from_record(json.loads(line)))
            except Exception as exc:
                if raw.find(b"\n", nl + 1) >= 0 or nl + 1 < len(raw):
                    raise IntegrityError(
                        f"{self.path}: corrupt interior record at byte {start}: {exc}"
                    )
                break  # corrupt final line: treat as torn
            offset = nl + 1
            start = nl + 1
        return records, offset

    def truncate_to_valid(self) -> None:
        """Drop a torn trailing line so the next append starts clean."""
        if not self.path.exists():
            return
        offset = self.valid_byte_length()
        if offset != self.path.stat().st_size:
            with open(self.path, "r+b") as fh:
                fh.truncate(offset)

    def last_round(self) -> int | None:
        records = self.read()
        return records[-1].round if records else None

    def append(self, metrics: RoundMetrics) -> None:
        last = self.last_round()
        expected = 0 if last is None else last + 1
        if metrics.round != expected:
            raise SequencingError(
                f"{self.path}: expected round {expected}, got {metrics.round}"
            )
        line = json.dumps(metrics.to_record(), separators=(", ", ": ")) + "\n"
        with open(self.path, "ab") as fh:
            fh.write(line.encode("utf-8"))
            fh.flush()
            os.fsync(fh.fileno())


def append_round(log: ResultsLog, metrics: RoundMetrics) -> ResultsLog:
    """Durably append one round record; rejects out-of-order rounds."""
    log.append(metrics)
    return log


# ---------------------------------------------------------------------------
# checkpoints


def write_checkpoint(path: str | Path, doc: dict) -> None:
    """Atomically write a checkpoint document (write temp, then rename)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, separators=(", ", ": ")) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_checkpoint(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid checkpoint document ({exc})")
