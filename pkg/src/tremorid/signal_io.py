"""Inertial-sensor recordings: parsing, validation, trimming and windowing.

Two on-disk formats are supported.

CSV::

    # subject=S01;session=s1;date=2016-03-01;device=nexus6;sensor=accelerometer;rate_hz=100
    t_ms,x,y,z
    0,0.012,-0.031,9.807
    10,0.015,-0.029,9.811

The ``t_ms,x,y,z`` column line is optional on input and always written on
output.

JSONL: a leading metadata object with the same keys as the CSV comment line,
followed by one ``{"t_ms": ..., "x": ..., "y": ..., "z": ...}`` object per
sample.

Values are written with ``repr`` so a parse/serialize round trip is bit-exact.
"""

from __future__ import annotations

import dataclasses
import datetime
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ParseError, TooShort, ValidationError

SENSORS = ("accelerometer", "gyroscope")
_SENSOR_ALIASES = {"acc": "accelerometer", "accel": "accelerometer", "gyro": "gyroscope"}
_META_KEYS = ("subject", "session", "date", "device", "sensor", "rate_hz")


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SensorRecording:
    """One sensor stream from one session, validated on construction."""

    subject_id: str
    session_id: str
    session_date: datetime.date
    device_id: str
    sensor: str
    sample_rate_hz: float
    t_ms: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        sensor = _SENSOR_ALIASES.get(self.sensor, self.sensor)
        if sensor not in SENSORS:
            raise ValidationError("sensor kind", repr(self.sensor))
        object.__setattr__(self, "sensor", sensor)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.float64))
        object.__setattr__(self, "t_ms", _frozen(self.t_ms, np.int64))

        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValidationError("sample_rate_hz > 0", str(self.sample_rate_hz))
        n = len(self.t_ms)
        if not all(a.ndim == 1 and len(a) == n for a in (self.x, self.y, self.z)):
            raise ValidationError("equal-length axes")
        if n < 2:
            raise ValidationError("at least 2 samples", f"got {n}")
        if np.any(np.diff(self.t_ms) <= 0):
            raise ValidationError("timestamps strictly increasing")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))
                and np.all(np.isfinite(self.z))):
            raise ValidationError("finite samples")

    def __len__(self):
        return len(self.t_ms)

    @property
    def duration_ms(self) -> int:
        return int(self.t_ms[-1] - self.t_ms[0])

    def metadata(self) -> dict:
        return {
            "subject": self.subject_id,
            "session": self.session_id,
            "date": self.session_date.isoformat(),
            "device": self.device_id,
            "sensor": self.sensor,
            "rate_hz": self.sample_rate_hz,
        }

    def replace(self, **changes) -> "SensorRecording":
        return dataclasses.replace(self, **changes)

    def with_axes(self, x, y, z) -> "SensorRecording":
        return dataclasses.replace(self, x=x, y=y, z=z)


@dataclass(frozen=True, eq=False)
class Window:
    """A fixed-length slice of one recording plus its magnitude series."""

    subject_id: str
    session_id: str
    session_date: datetime.date
    device_id: str
    sensor: str
    sample_rate_hz: float
    start_index: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    mag: np.ndarray

    def __len__(self):
        return len(self.x)

    @property
    def duration_s(self) -> float:
        return len(self.x) / self.sample_rate_hz

    def series(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.x, self.y, self.z, self.mag


def magnitude(x: float, y: float, z: float) -> float:
    """Euclidean norm of one 3-axis sample."""
    return math.sqrt(x * x + y * y + z * z)


def magnitude_series(x, y, z) -> np.ndarray:
    x, y, z = (np.asarray(a, dtype=np.float64) for a in (x, y, z))
    return np.sqrt(x * x + y * y + z * z)


# --------------------------------------------------------------------- parsing


def _meta_from_mapping(meta: dict, line: int) -> dict:
    missing = [k for k in _META_KEYS if k not in meta]
    if missing:
        raise ParseError(line, f"missing metadata keys: {', '.join(missing)}")
    try:
        date = datetime.date.fromisoformat(str(meta["date"]).strip())
    except ValueError:
        raise ParseError(line, f"bad date {meta['date']!r}") from None
    try:
        rate = float(meta["rate_hz"])
    except (TypeError, ValueError):
        raise ParseError(line, f"bad rate_hz {meta['rate_hz']!r}") from None
    return dict(
        subject_id=str(meta["subject"]).strip(),
        session_id=str(meta["session"]).strip(),
        session_date=date,
        device_id=str(meta["device"]).strip(),
        sensor=str(meta["sensor"]).strip(),
        sample_rate_hz=rate,
    )


def _parse_t(value, line):
    if isinstance(value, bool):
        raise ParseError(line, f"t_ms must be an integer, got {value!r}")
    if isinstance(value, int):
        return value
    try:
        return int(str(value).strip())
    except ValueError:
        raise ParseError(line, f"t_ms must be an integer, got {value!r}") from None


def _parse_float(value, line, name):
    if isinstance(value, bool) or value is None:
        raise ParseError(line, f"{name} is not a number: {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(line, f"{name} is not a number: {value!r}") from None


def _as_text(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        return bytes(data).decode("utf-8")
    if isinstance(data, str):
        return data
    content = data.read()
    return content.decode("utf-8") if isinstance(content, bytes) else content


def _parse_csv(text: str) -> SensorRecording:
    meta = None
    t, xs, ys, zs = [], [], [], []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if meta is not None:
                raise ParseError(lineno, "duplicate metadata line")
            fields = {}
            for item in line.lstrip("#").split(";"):
                item = item.strip()
                if not item:
                    continue
                if "=" not in item:
                    raise ParseError(lineno, f"metadata item without '=': {item!r}")
                k, v = item.split("=", 1)
                fields[k.strip()] = v.strip()
            meta = _meta_from_mapping(fields, lineno)
            continue
        if meta is None:
            raise ParseError(lineno, "metadata comment line must come first")
        cells = [c.strip() for c in line.split(",")]
        if cells == ["t_ms", "x", "y", "z"]:
            continue
        if len(cells) != 4:
            raise ParseError(lineno, f"expected 4 columns, got {len(cells)}")
        t.append(_parse_t(cells[0], lineno))
        xs.append(_parse_float(cells[1], lineno, "x"))
        ys.append(_parse_float(cells[2], lineno, "y"))
        zs.append(_parse_float(cells[3], lineno, "z"))
    if meta is None:
        raise ParseError(1, "empty input")
    return SensorRecording(**meta, t_ms=t, x=xs, y=ys, z=zs)


def _parse_jsonl(text: str) -> SensorRecording:
    meta = None
    t, xs, ys, zs = [], [], [], []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(lineno, "expected a JSON object")
        if meta is None:
            meta = _meta_from_mapping(obj, lineno)
            continue
        for key in ("t_ms", "x", "y", "z"):
            if key not in obj:
                raise ParseError(lineno, f"missing field {key!r}")
        t.append(_parse_t(obj["t_ms"], lineno))
        xs.append(_parse_float(obj["x"], lineno, "x"))
        ys.append(_parse_float(obj["y"], lineno, "y"))
        zs.append(_parse_float(obj["z"], lineno, "z"))
    if meta is None:
        raise ParseError(1, "empty input")
    return SensorRecording(**meta, t_ms=t, x=xs, y=ys, z=zs)


def parse_recording(data, format: str = "csv") -> SensorRecording:
    """Parse a recording from bytes, text or a file object.

    Raises :class:`ParseError` for malformed input and
    :class:`ValidationError` when the decoded samples break an invariant
    (non-monotone timestamps, NaN/Inf values).
    """
    text = _as_text(data)
    if format == "csv":
        return _parse_csv(text)
    if format == "jsonl":
        return _parse_jsonl(text)
    raise ValueError(f"unknown format {format!r}")


def format_for_path(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson"):
        return "jsonl"
    return "csv"


def read_recording(path) -> SensorRecording:
    with open(path, "rb") as fh:
        return parse_recording(fh.read(), format_for_path(path))


def serialize_recording(rec: SensorRecording, format: str = "csv") -> str:
    meta = rec.metadata()
    meta["rate_hz"] = _fmt_rate(rec.sample_rate_hz)
    out = io.StringIO()
    if format == "csv":
        out.write("# " + ";".join(f"{k}={meta[k]}" for k in _META_KEYS) + "\n")
        out.write("t_ms,x,y,z\n")
        for t, x, y, z in zip(rec.t_ms.tolist(), rec.x.tolist(), rec.y.tolist(), rec.z.tolist()):
            out.write(f"{t},{x!r},{y!r},{z!r}\n")
    elif format == "jsonl":
        out.write(json.dumps({k: meta[k] for k in _META_KEYS}) + "\n")
        for t, x, y, z in zip(rec.t_ms.tolist(), rec.x.tolist(), rec.y.tolist(), rec.z.tolist()):
            out.write(json.dumps({"t_ms": t, "x": x, "y": y, "z": z}) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")
    return out.getvalue()


def _fmt_rate(rate: float):
    return int(rate) if float(rate).is_integer() else rate


def write_recording(rec: SensorRecording, path, format: str | None = None) -> None:
    fmt = format or format_for_path(path)
    Path(path).write_text(serialize_recording(rec, fmt), encoding="utf-8")


# ----------------------------------------------------------- trim and window


def trim_edges(rec: SensorRecording, trim_ms: int) -> SensorRecording:
    """Drop samples within ``trim_ms`` of either end of the recording."""
    if trim_ms < 0:
        raise ValueError("trim_ms must be non-negative")
    if trim_ms == 0:
        return rec
    lo = rec.t_ms[0] + trim_ms
    hi = rec.t_ms[-1] - trim_ms
    keep = (rec.t_ms >= lo) & (rec.t_ms <= hi)
    if np.count_nonzero(keep) < 2:
        raise TooShort(
            f"{rec.duration_ms} ms recording leaves fewer than 2 samples after "
            f"trimming {trim_ms} ms from each end"
        )
    return rec.replace(t_ms=rec.t_ms[keep], x=rec.x[keep], y=rec.y[keep], z=rec.z[keep])


def window_length(window_s: float, sample_rate_hz: float) -> int:
    return int(round(window_s * sample_rate_hz))


def window_starts(n_samples: int, length: int, overlap_fraction: float) -> range:
    hop = max(1, int(round(length * (1.0 - overlap_fraction))))
    return range(0, n_samples - length + 1, hop)


def segment_windows(rec: SensorRecording, window_s: float,
                    overlap_fraction: float = 0.0) -> list[Window]:
    """Cut a recording into fixed-length windows.

    Window length is ``round(window_s * sample_rate_hz)`` samples and the hop is
    ``length * (1 - overlap_fraction)``. A trailing partial window is dropped.
    """
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError("overlap_fraction must lie in [0, 1)")
    length = window_length(window_s, rec.sample_rate_hz)
    if length < 2:
        raise ValueError(f"window of {window_s} s at {rec.sample_rate_hz} Hz has fewer than 2 samples")
    if len(rec) < length:
        raise TooShort(f"{len(rec)} samples cannot hold one {length}-sample window")

    mag = magnitude_series(rec.x, rec.y, rec.z)
    windows = []
    for start in window_starts(len(rec), length, overlap_fraction):
        sl = slice(start, start + length)
        windows.append(Window(
            subject_id=rec.subject_id,
            session_id=rec.session_id,
            session_date=rec.session_date,
            device_id=rec.device_id,
            sensor=rec.sensor,
            sample_rate_hz=rec.sample_rate_hz,
            start_index=start,
            x=rec.x[sl], y=rec.y[sl], z=rec.z[sl], mag=mag[sl],
        ))
    return windows


def iter_recording_files(root) -> Iterable[Path]:
    root = Path(root)
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.suffix.lower() in (".csv", ".jsonl", ".ndjson"):
            yield path
