"""End-to-end processing of recording pairs into feature vectors.

The WFLC runs over each whole trimmed recording (it needs more than one
window to settle); windows are then cut from the selected trace and the
magnitude is recomputed from the filtered axes.
"""

from __future__ import annotations

import json
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import MetadataMismatch, TremorError, with_context
from .features import FeatureVector, extract_window
from .forest import ForestConfig
from .signal_io import SensorRecording, iter_recording_files, read_recording, segment_windows, trim_edges
from .wflc import WflcParams, filter_signal

SOURCES = ("tremor", "residual", "raw")
SessionPair = tuple[SensorRecording, SensorRecording]


def _default_wflc():
    return WflcParams(bias_prime_samples=100)


@dataclass(frozen=True)
class PipelineConfig:
    trim_ms: int = 100
    window_s: float = 1.0
    overlap: float = 0.0
    rate_hz: float = 100.0
    source: str = "tremor"
    include_dc: bool = True
    literal_features: bool = False
    test_fraction: float = 0.25
    seed: int = 0
    jobs: int = 1
    wflc: WflcParams = field(default_factory=_default_wflc)
    forest: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self):
        if self.trim_ms < 0:
            raise ValueError("trim_ms must be non-negative")
        if self.window_s <= 0:
            raise ValueError("window_s must be positive")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError("overlap must lie in [0, 1)")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in [0, 1)")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wflc"] = self.wflc.to_dict()
        d["forest"] = self.forest.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "wflc" in d:
            d["wflc"] = WflcParams(**{**_default_wflc().to_dict(), **d["wflc"]})
        if "forest" in d:
            d["forest"] = ForestConfig(**{**ForestConfig().to_dict(), **d["forest"]})
        return cls(**d)

    def report_echo(self) -> dict:
        """Config as embedded in reports: ``jobs`` never changes a result, so
        serial and parallel runs produce identical reports."""
        d = self.to_dict()
        del d["jobs"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def with_overrides(self, **changes) -> "PipelineConfig":
        wflc = changes.pop("wflc", {})
        forest = changes.pop("forest", {})
        cfg = replace(self, **changes)
        if wflc:
            cfg = replace(cfg, wflc=replace(cfg.wflc, **wflc))
        if forest:
            cfg = replace(cfg, forest=replace(cfg.forest, **forest))
        return cfg


def filter_recording(rec: SensorRecording, params: WflcParams, source: str = "tremor") -> SensorRecording:
    """Replace each axis by the chosen WFLC output (or leave it raw)."""
    if source == "raw":
        return rec
    traces = []
    for axis in ("x", "y", "z"):
        try:
            out = filter_signal(getattr(rec, axis), params)
        except TremorError as exc:
            raise with_context(exc, f"wflc {rec.sensor} {axis}") from exc
        traces.append(out.tremor if source == "tremor" else out.residual)
    return rec.with_axes(*traces)


def prepare_pair(acc: SensorRecording, gyro: SensorRecording, cfg: PipelineConfig) -> SessionPair:
    """Trim and filter both recordings of a session."""
    return (filter_recording(trim_edges(acc, cfg.trim_ms), cfg.wflc, cfg.source),
            filter_recording(trim_edges(gyro, cfg.trim_ms), cfg.wflc, cfg.source))


def pair_features(acc: SensorRecording, gyro: SensorRecording, cfg: PipelineConfig) -> list[FeatureVector]:
    """Feature vectors for an already trimmed and filtered session pair."""
    aw = segment_windows(acc, cfg.window_s, cfg.overlap)
    gw = segment_windows(gyro, cfg.window_s, cfg.overlap)
    return [extract_window(a, g, cfg.include_dc, cfg.literal_features) for a, g in zip(aw, gw)]


def session_features(acc: SensorRecording, gyro: SensorRecording, cfg: PipelineConfig) -> list[FeatureVector]:
    return pair_features(*prepare_pair(acc, gyro, cfg), cfg)


def _session_features_task(args):
    return session_features(*args)


def _prepare_task(args):
    return prepare_pair(*args)


def _map(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def dataset_features(sessions: Sequence[SessionPair], cfg: PipelineConfig) -> list[FeatureVector]:
    tasks = [(acc, gyro, cfg) for acc, gyro in sessions]
    return [fv for chunk in _map(_session_features_task, tasks, cfg.jobs) for fv in chunk]


def prepare_sessions(sessions: Sequence[SessionPair], cfg: PipelineConfig) -> list[SessionPair]:
    tasks = [(acc, gyro, cfg) for acc, gyro in sessions]
    return _map(_prepare_task, tasks, cfg.jobs)


def pair_recordings(recordings: Iterable[SensorRecording]) -> list[SessionPair]:
    """Match accelerometer and gyroscope recordings of the same session."""
    groups = defaultdict(dict)
    for rec in recordings:
        key = (rec.subject_id, rec.session_date, rec.session_id, rec.device_id)
        if rec.sensor in groups[key]:
            raise MetadataMismatch(f"duplicate {rec.sensor} recording for session {key}")
        groups[key][rec.sensor] = rec
    pairs = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
        g = groups[key]
        if set(g) != {"accelerometer", "gyroscope"}:
            missing = {"accelerometer", "gyroscope"} - set(g)
            raise MetadataMismatch(f"session {key} lacks a {', '.join(sorted(missing))} recording")
        pairs.append((g["accelerometer"], g["gyroscope"]))
    return pairs


def load_sessions(root) -> list[SessionPair]:
    return pair_recordings(read_recording(p) for p in iter_recording_files(root))
