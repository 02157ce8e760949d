"""Synthetic multi-subject tremor recordings.

Each subject gets a dominant tremor frequency, a weaker secondary component,
per-axis amplitude mixes for both sensors and a frequency-jitter level. A
session adds a small frequency shift and amplitude change, slow voluntary
drift, white sensor noise and (for the accelerometer) a gravity offset.

Separating subjects by frequency, axis mix and jitter is an assumption made
for testing, not a claim about real tremor.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, replace

import numpy as np

from .signal_io import SensorRecording

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
GRAVITY = 9.80665
BASE_DATE = datetime.date(2016, 3, 1)


@dataclass(frozen=True)
class TremorComponent:
    freq_hz: float
    amplitude: float
    phase: float


@dataclass(frozen=True)
class SensorProfile:
    # components[axis] is the tuple of sinusoids summed on that axis
    components: tuple[tuple[TremorComponent, ...], ...]
    drift_amp: float
    drift_bw_hz: float
    noise_std: float
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    dominant_hz: float
    jitter_std_hz: float
    acc: SensorProfile
    gyro: SensorProfile
    session_freq_std_hz: float = 0.0
    session_amp_std: float = 0.0

    def sensor(self, name: str) -> SensorProfile:
        return self.acc if name == "accelerometer" else self.gyro

    def validate(self, rate_hz: float) -> None:
        for sp in (self.acc, self.gyro):
            for axis in sp.components:
                for c in axis:
                    if not 0.0 < c.freq_hz < rate_hz / 2:
                        raise ValueError(f"component at {c.freq_hz} Hz outside (0, {rate_hz / 2})")
                    if c.amplitude < 0:
                        raise ValueError("negative component amplitude")


def subject_id_for(index: int) -> str:
    return f"S{index + 1:02d}"


def dominant_frequency(subject_index: int, band=(4.0, 12.0), margin: float = 0.25) -> float:
    """Low-discrepancy placement of subject frequencies inside ``band``.

    Consecutive indices land about 0.38 band-widths apart.
    """
    lo, hi = band
    u = (0.5 + subject_index * GOLDEN) % 1.0
    return lo + margin + u * (hi - lo - 2 * margin)


def _sensor_profile(rng, dominant, secondary, scale, noise_std, drift_amp, offset,
                    frequency_only=False):
    mix = rng.dirichlet([3.0, 3.0, 3.0]) * 3.0
    sec_ratio = rng.uniform(0.2, 0.45)
    if frequency_only:
        mix, sec_ratio = np.ones(3), 0.3
    axes = []
    for a in range(3):
        amp = scale * mix[a]
        axes.append((
            TremorComponent(dominant, amp, rng.uniform(0, 2 * math.pi)),
            TremorComponent(secondary, amp * sec_ratio, rng.uniform(0, 2 * math.pi)),
        ))
    return SensorProfile(tuple(axes), drift_amp=drift_amp, drift_bw_hz=1.5,
                         noise_std=noise_std, offset=offset)


def gen_profile(seed: int, subject_index: int, band=(4.0, 12.0), noise_scale: float = 1.0,
                drift_scale: float = 1.0, session_variability: float = 1.0,
                frequency_only: bool = False) -> SubjectProfile:
    """Deterministic profile for subject ``subject_index`` under ``seed``.

    With ``frequency_only`` every subject shares the same amplitudes, axis mix
    and jitter, so only the tremor frequencies tell them apart.
    """
    rng = np.random.default_rng([seed, subject_index])
    lo, hi = band
    dominant = dominant_frequency(subject_index, band)
    # secondary sits half a band away from the dominant one (wrapped)
    u2 = ((dominant - lo - 0.25) / (hi - lo - 0.5) + 0.5 + rng.uniform(-0.1, 0.1)) % 1.0
    secondary = lo + 0.25 + u2 * (hi - lo - 0.5)

    tilt = rng.uniform(0.2, 0.8)
    acc_scale, gyro_scale = rng.uniform(0.06, 0.12), rng.uniform(0.02, 0.04)
    jitter = float(rng.uniform(0.05, 0.2))
    if frequency_only:
        acc_scale, gyro_scale, jitter = 0.09, 0.03, 0.1
    acc = _sensor_profile(rng, dominant, secondary, acc_scale,
                          noise_std=0.008 * noise_scale, drift_amp=0.05 * drift_scale,
                          offset=(0.0, GRAVITY * math.sin(tilt), GRAVITY * math.cos(tilt)),
                          frequency_only=frequency_only)
    gyro = _sensor_profile(rng, dominant, secondary, gyro_scale,
                           noise_std=0.003 * noise_scale, drift_amp=0.015 * drift_scale,
                           offset=(0.0, 0.0, 0.0), frequency_only=frequency_only)
    return SubjectProfile(
        subject_id=subject_id_for(subject_index),
        dominant_hz=dominant,
        jitter_std_hz=jitter,
        acc=acc,
        gyro=gyro,
        session_freq_std_hz=0.05 * session_variability,
        session_amp_std=0.04 * session_variability,
    )


def _lowpass_noise(rng, n, std, rate_hz, tau_s=0.5):
    if std == 0.0:
        return np.zeros(n)
    a = math.exp(-1.0 / (tau_s * rate_hz))
    e = rng.standard_normal(n) * std * math.sqrt(1 - a * a)
    out = np.empty(n)
    prev = rng.standard_normal() * std
    for k in range(n):
        prev = a * prev + e[k]
        out[k] = prev
    return out


def _drift(rng, n, amp, bw_hz, rate_hz, n_terms=3):
    if amp == 0.0:
        return np.zeros(n)
    t = np.arange(n) / rate_hz
    out = np.zeros(n)
    for _ in range(n_terms):
        f = rng.uniform(0.05, bw_hz)
        out += np.sin(2 * math.pi * f * t + rng.uniform(0, 2 * math.pi))
    return out * (amp / math.sqrt(n_terms / 2.0))


def gen_recording(profile: SubjectProfile, session_id: str, date: datetime.date,
                  duration_s: float = 60.0, rate_hz: float = 100.0, seed: int = 0,
                  device_id: str = "synthetic") -> tuple[SensorRecording, SensorRecording]:
    """Render one session as an (accelerometer, gyroscope) recording pair."""
    n = int(round(duration_s * rate_hz))
    if n < 2:
        raise ValueError("duration_s * rate_hz must give at least 2 samples")
    profile.validate(rate_hz)
    rng = np.random.default_rng(seed)
    t_ms = np.round(np.arange(n) * (1000.0 / rate_hz)).astype(np.int64)

    freq_shift = rng.normal(0.0, profile.session_freq_std_hz) if profile.session_freq_std_hz else 0.0
    amp_factor = 1.0 + (rng.normal(0.0, profile.session_amp_std) if profile.session_amp_std else 0.0)
    amp_factor = max(amp_factor, 0.1)

    # One jitter process per component, shared by every axis and both sensors.
    n_comp = len(profile.acc.components[0])
    jitter = [_lowpass_noise(rng, n, profile.jitter_std_hz, rate_hz) for _ in range(n_comp)]

    out = []
    for sensor in ("accelerometer", "gyroscope"):
        sp = profile.sensor(sensor)
        axes = []
        for a in range(3):
            sig = np.full(n, float(sp.offset[a]))
            for ci, comp in enumerate(sp.components[a]):
                inst = comp.freq_hz + freq_shift + (jitter[ci] if ci < len(jitter) else 0.0)
                phase = comp.phase + 2 * math.pi * np.cumsum(inst) / rate_hz
                # cumsum starts one step in; shift so sample 0 sits at comp.phase
                phase -= 2 * math.pi * inst[0] / rate_hz
                sig += comp.amplitude * amp_factor * np.sin(phase)
            sig += _drift(rng, n, sp.drift_amp, sp.drift_bw_hz, rate_hz)
            if sp.noise_std:
                sig += rng.normal(0.0, sp.noise_std, n)
            axes.append(sig)
        out.append(SensorRecording(
            subject_id=profile.subject_id, session_id=session_id, session_date=date,
            device_id=device_id, sensor=sensor, sample_rate_hz=rate_hz,
            t_ms=t_ms, x=axes[0], y=axes[1], z=axes[2],
        ))
    return out[0], out[1]


def session_seed(seed: int, subject_index: int, session_index: int) -> int:
    ss = np.random.SeedSequence([seed, subject_index, session_index, 0x7E])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate_dataset(n_subjects: int, n_sessions: int, seed: int = 0, duration_s: float = 60.0,
                     rate_hz: float = 100.0, band=(4.0, 12.0), noise_scale: float = 1.0,
                     drift_scale: float = 1.0, session_variability: float = 1.0,
                     frequency_only: bool = False, device_id: str = "synthetic"):
    """Profiles plus ``n_sessions`` recording pairs per subject, one date each."""
    profiles = [gen_profile(seed, i, band, noise_scale, drift_scale, session_variability,
                            frequency_only) for i in range(n_subjects)]
    sessions = []
    for i, prof in enumerate(profiles):
        for j in range(n_sessions):
            date = BASE_DATE + datetime.timedelta(days=3 * j + i % 3)
            sessions.append(gen_recording(prof, f"s{j + 1}", date, duration_s, rate_hz,
                                          session_seed(seed, i, j), device_id))
    return profiles, sessions


def clean_profile(profile: SubjectProfile) -> SubjectProfile:
    """Strip noise, drift, offsets, jitter and session variation."""
    def strip(sp):
        return replace(sp, drift_amp=0.0, noise_std=0.0, offset=(0.0, 0.0, 0.0))
    return replace(profile, jitter_std_hz=0.0, acc=strip(profile.acc), gyro=strip(profile.gyro),
                   session_freq_std_hz=0.0, session_amp_std=0.0)
