"""Per-window feature extraction.

Every one of the eight signals in a window pair (accelerometer and gyroscope,
each as X, Y, Z and magnitude) contributes 22 values:

* time domain: mean, std (N-1), average deviation, RMS, highest value;
* magnitude spectrum: std, centroid, skewness, kurtosis, crest,
  irregularity K, irregularity J;
* periodogram: the same seven shape statistics plus the peak frequency in
  each third of the one-sided band.

The spectral shape statistics follow the printed table formulas, including
their quirks: "std" is the root of the second *raw* frequency moment, and the
skewness/kurtosis sums run over ``(magnitude - centroid)`` with no 1/N.
Irregularity K is summed over interior bins only.

Zero conventions keep extraction total: an all-zero spectrum yields all-zero
statistics, and any ratio whose denominator is exactly zero is reported as 0.
"""

from __future__ import annotations

import csv
import datetime
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateSpectrum, LengthError, MetadataMismatch, TremorError, with_context
from .signal_io import Window

TIME_FEATURES = ("mean", "std", "avg_dev", "rms", "highest")
SPECTRAL_FEATURES = ("spec_std", "spec_centroid", "spec_skewness", "spec_kurtosis",
                     "spec_crest", "spec_irregularity_k", "spec_irregularity_j")
PSD_FEATURES = ("psd_std", "psd_centroid", "psd_skewness", "psd_kurtosis", "psd_crest",
                "psd_irregularity_k", "psd_irregularity_j", "psd_top1", "psd_top2", "psd_top3")
SIGNAL_FEATURES = TIME_FEATURES + SPECTRAL_FEATURES + PSD_FEATURES

SENSOR_PREFIXES = ("acc", "gyro")
SIGNALS = ("x", "y", "z", "mag")
FEATURE_NAMES = tuple(
    f"{sensor}_{signal}_{feat}"
    for sensor in SENSOR_PREFIXES
    for signal in SIGNALS
    for feat in SIGNAL_FEATURES
)
N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}
META_COLUMNS = ("subject", "session", "date", "device")


class TimeFeatures(NamedTuple):
    mean: float
    std: float
    avg_dev: float
    rms: float
    highest: float


class ShapeFeatures(NamedTuple):
    std: float
    centroid: float
    skewness: float
    kurtosis: float
    crest: float
    irregularity_k: float
    irregularity_j: float


class PsdFeatures(NamedTuple):
    std: float
    centroid: float
    skewness: float
    kurtosis: float
    crest: float
    irregularity_k: float
    irregularity_j: float
    top1: float
    top2: float
    top3: float


@dataclass(frozen=True, eq=False)
class Spectrum:
    magnitudes: np.ndarray
    freqs: np.ndarray

    def __post_init__(self):
        if len(self.magnitudes) != len(self.freqs):
            raise ValueError("magnitudes and freqs differ in length")


@dataclass(frozen=True, eq=False)
class Periodogram:
    magnitudes: np.ndarray
    freqs: np.ndarray
    band_splits: tuple[int, int]

    def __post_init__(self):
        n = len(self.magnitudes)
        if n != len(self.freqs):
            raise ValueError("magnitudes and freqs differ in length")
        n1, n2 = self.band_splits
        if not 1 <= n1 < n2 < n:
            raise ValueError(f"band splits {self.band_splits} invalid for {n} bins")


# ------------------------------------------------------------------ time domain


def time_features(x) -> TimeFeatures:
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise LengthError("time features need at least 2 samples")
    mean = float(np.sum(x) / n)
    dev = x - mean
    return TimeFeatures(
        mean=mean,
        std=float(np.sqrt(np.sum(dev * dev) / (n - 1))),
        avg_dev=float(np.sum(np.abs(dev)) / n),
        rms=float(np.sqrt(np.sum(x * x) / n)),
        highest=float(np.max(x)),
    )


# -------------------------------------------------------------------- spectra


def _bins(n: int, rate: float, include_dc: bool) -> tuple[slice, np.ndarray]:
    nb = n // 2 + 1
    start = 0 if include_dc else 1
    return slice(start, nb), np.arange(start, nb) * (rate / n)


def dft_spectrum(x, sample_rate_hz: float, include_dc: bool = True) -> Spectrum:
    """One-sided DFT magnitude spectrum, no window function or zero padding."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 2:
        raise LengthError("spectrum needs at least 2 samples")
    sl, freqs = _bins(len(x), sample_rate_hz, include_dc)
    return Spectrum(np.abs(np.fft.rfft(x))[sl], freqs)


def default_band_splits(n_bins: int) -> tuple[int, int]:
    return n_bins // 3, (2 * n_bins) // 3


def periodogram(x, sample_rate_hz: float, include_dc: bool = True,
                band_splits: tuple[int, int] | None = None) -> Periodogram:
    """One-sided periodogram ``|DFT|^2 / N`` with its three-band split."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    sl, freqs = _bins(n, sample_rate_hz, include_dc)
    if len(freqs) < 3:
        raise LengthError(f"periodogram of {n} samples has fewer than 3 bins to split")
    spec = np.fft.rfft(x)[sl]
    power = (spec.real ** 2 + spec.imag ** 2) / n
    return Periodogram(power, freqs, band_splits or default_band_splits(len(freqs)))


def two_sided_periodogram(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.abs(np.fft.fft(x)) ** 2 / len(x)


def _ratio(num: float, den: float) -> float:
    return num / den if den != 0.0 else 0.0


def _shape(m: np.ndarray, f: np.ndarray, centroid_for_tails: float | None = None,
           strict: bool = False) -> ShapeFeatures:
    total = float(np.sum(m))
    if total == 0.0:
        if strict:
            raise DegenerateSpectrum("spectrum has zero total magnitude")
        return ShapeFeatures(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    sigma = math.sqrt(float(np.sum(f * f * m)) / total)
    centroid = float(np.sum(f * m)) / total
    c_tail = centroid if centroid_for_tails is None else centroid_for_tails

    skew = _ratio(float(np.sum((m - centroid) ** 3)), sigma ** 3)
    kurt = float(np.sum((m - c_tail) ** 4)) / sigma ** 4 - 3.0 if sigma != 0.0 else 0.0
    crest = _ratio(float(np.max(m)), c_tail)

    if len(m) >= 3:
        local = (m[:-2] + m[1:-1] + m[2:]) / 3.0
        irr_k = float(np.sum(np.abs(m[1:-1] - local)))
    else:
        irr_k = 0.0
    d = m[:-1] - m[1:]
    irr_j = _ratio(float(np.sum(d * d)), float(np.sum(m[:-1] * m[:-1])))
    return ShapeFeatures(sigma, centroid, skew, kurt, crest, irr_k, irr_j)


def spectral_features(s: Spectrum, strict: bool = False) -> ShapeFeatures:
    """Shape statistics of a magnitude spectrum.

    With ``strict=True`` an all-zero spectrum raises
    :class:`DegenerateSpectrum` instead of returning zeros.
    """
    return _shape(np.asarray(s.magnitudes, dtype=np.float64),
                  np.asarray(s.freqs, dtype=np.float64), strict=strict)


def top_frequencies(p: Periodogram) -> tuple[float, float, float]:
    """Bin frequency of the largest periodogram value in each band.

    An all-zero band reports its first bin.
    """
    n1, n2 = p.band_splits
    m = np.asarray(p.magnitudes)
    out = []
    for lo, hi in ((0, n1), (n1, n2), (n2, len(m))):
        out.append(float(p.freqs[lo + int(np.argmax(m[lo:hi]))]))
    return tuple(out)


def psd_features(p: Periodogram, strict: bool = False,
                 literal_centroid: float | None = None) -> PsdFeatures:
    """Periodogram shape statistics plus the three band peak frequencies.

    Kurtosis and crest use the periodogram's own centroid. Passing
    ``literal_centroid`` (the magnitude-spectrum centroid) reproduces the
    printed table, where those two entries reference the spectral centroid.
    An all-zero periodogram gives all-zero features, band peaks included.
    """
    m = np.asarray(p.magnitudes, dtype=np.float64)
    shape = _shape(m, np.asarray(p.freqs, dtype=np.float64),
                   centroid_for_tails=literal_centroid, strict=strict)
    # the zero-spectrum convention outranks the empty-band fallback
    tops = top_frequencies(p) if m.any() else (0.0, 0.0, 0.0)
    return PsdFeatures(*shape, *tops)


def signal_features(x, sample_rate_hz: float, include_dc: bool = True,
                    literal: bool = False) -> np.ndarray:
    """All 22 features for one series, in ``SIGNAL_FEATURES`` order."""
    tf = time_features(x)
    spec = dft_spectrum(x, sample_rate_hz, include_dc)
    sf = spectral_features(spec)
    pf = psd_features(periodogram(x, sample_rate_hz, include_dc),
                      literal_centroid=sf.centroid if literal else None)
    return np.array((*tf, *sf, *pf), dtype=np.float64)


# ------------------------------------------------------------- feature vectors


@dataclass(frozen=True, eq=False)
class FeatureVector:
    subject_id: str
    session_id: str
    session_date: datetime.date
    device_id: str
    values: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} values, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def extract_window(acc_window: Window, gyro_window: Window, include_dc: bool = True,
                   literal: bool = False) -> FeatureVector:
    """Build the 176-value vector for one accelerometer/gyroscope window pair."""
    for attr in ("subject_id", "session_id", "session_date", "device_id"):
        if getattr(acc_window, attr) != getattr(gyro_window, attr):
            raise MetadataMismatch(
                f"{attr}: {getattr(acc_window, attr)!r} != {getattr(gyro_window, attr)!r}")
    if len(acc_window) != len(gyro_window):
        raise MetadataMismatch(f"window lengths differ: {len(acc_window)} != {len(gyro_window)}")

    parts = []
    for prefix, win in zip(SENSOR_PREFIXES, (acc_window, gyro_window)):
        for name, series in zip(SIGNALS, win.series()):
            try:
                parts.append(signal_features(series, win.sample_rate_hz, include_dc, literal))
            except TremorError as exc:
                raise with_context(exc, f"{prefix}_{name}") from exc
    return FeatureVector(
        subject_id=acc_window.subject_id,
        session_id=acc_window.session_id,
        session_date=acc_window.session_date,
        device_id=acc_window.device_id,
        values=np.concatenate(parts),
        start_index=acc_window.start_index,
    )


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    if not vectors:
        return np.empty((0, N_FEATURES))
    return np.vstack([v.values for v in vectors])


def write_feature_csv(path, vectors: Sequence[FeatureVector]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(META_COLUMNS + FEATURE_NAMES)
        for v in vectors:
            writer.writerow([v.subject_id, v.session_id, v.session_date.isoformat(),
                             v.device_id] + [repr(x) for x in v.values.tolist()])


def read_feature_csv(path) -> list[FeatureVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != META_COLUMNS + FEATURE_NAMES:
            raise ValueError(f"{path}: header does not match the feature CSV layout")
        out = []
        for row in reader:
            if not row:
                continue
            subject, session, date, device = row[:4]
            out.append(FeatureVector(subject, session, datetime.date.fromisoformat(date),
                                     device, [float(x) for x in row[4:]]))
    return out
