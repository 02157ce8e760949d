"""Weighted-frequency Fourier linear combiner (WFLC).

The filter models a signal as a bias plus an M-harmonic Fourier series whose
fundamental frequency is itself adapted::

    x_k      = [sin(r * phi_k) for r in 1..M] + [cos(r * phi_k) for r in 1..M]
    eps_k    = s_k - w_k . x_k - wb_k
    w0_{k+1} = w0_k + 2 mu0 eps_k sum_r r (w_r x_{M+r} - w_{M+r} x_r)
    w_{k+1}  = w_k + 2 mu x_k eps_k
    wb_{k+1} = wb_k + 2 mub eps_k
    phi_{k+1} = phi_k + w0_{k+1}

``w . x`` is reported as the tremor estimate, ``wb`` as the voluntary/bias
estimate and ``eps`` as the residual, so ``s = tremor + voluntary + residual``
at every step.

Two points differ from a naive transcription of the usual textbook form:

* ``bias_sign="subtract"`` (default) removes the bias weight in the error
  term. With ``"add"`` the bias update is positive feedback and runs away on
  any DC input; it is kept only for comparison.
* ``normalize_gain=True`` (default) divides the amplitude gain by the
  reference power ``||x||^2 = M``. Plain LMS with ``mu=0.3`` and ``M=5``
  has ``2 mu M = 3 > 2`` and diverges within about a hundred samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, LengthError

DEFAULT_OMEGA0 = 2.0 * math.pi * 8.0 / 100.0


@dataclass(frozen=True)
class WflcParams:
    M: int = 5
    mu0: float = 1e-5
    mu: float = 0.3
    mub: float = 2.5e-8
    omega0_init: float = DEFAULT_OMEGA0
    normalize_gain: bool = True
    bias_sign: str = "subtract"
    # Bias weight starts at the mean of this many leading samples (0: start at 0).
    bias_prime_samples: int = 0
    divergence_bound: float = 1e6

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        for name in ("mu0", "mu", "mub"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 < self.omega0_init < math.pi:
            raise ValueError("omega0_init must lie in (0, pi) rad/sample")
        if self.bias_sign not in ("subtract", "add"):
            raise ValueError("bias_sign must be 'subtract' or 'add'")
        if self.bias_prime_samples < 0:
            raise ValueError("bias_prime_samples must be non-negative")
        if not self.divergence_bound > 0:
            raise ValueError("divergence_bound must be positive")

    @property
    def amplitude_gain(self) -> float:
        return self.mu / self.M if self.normalize_gain else self.mu

    @classmethod
    def from_dict(cls, d: dict) -> "WflcParams":
        return cls(**d)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass(frozen=True)
class WflcState:
    w: tuple
    omega0: float
    omega_b: float = 0.0
    phase_accum: float = 0.0

    @classmethod
    def initial(cls, params: WflcParams, omega_b: float = 0.0) -> "WflcState":
        return cls(w=(0.0,) * (2 * params.M), omega0=params.omega0_init,
                   omega_b=float(omega_b), phase_accum=0.0)


@dataclass(frozen=True, eq=False)
class FilterOutput:
    input: np.ndarray
    tremor: np.ndarray
    voluntary: np.ndarray
    residual: np.ndarray
    omega0_trace: np.ndarray
    final_state: WflcState = field(repr=False, default=None)

    def __len__(self):
        return len(self.input)

    def to_csv(self) -> str:
        lines = ["k,input,tremor,voluntary,residual,omega0"]
        cols = (self.input, self.tremor, self.voluntary, self.residual, self.omega0_trace)
        for k, row in enumerate(zip(*(c.tolist() for c in cols))):
            lines.append(f"{k}," + ",".join(repr(v) for v in row))
        return "\n".join(lines) + "\n"


def reference_vector(phase_accum: float, M: int) -> list[float]:
    """Sine terms for harmonics 1..M followed by cosine terms for 1..M."""
    return ([math.sin(r * phase_accum) for r in range(1, M + 1)]
            + [math.cos(r * phase_accum) for r in range(1, M + 1)])


def _step(w, omega0, omega_b, phase, s, M, mu0, mu_amp, mub, bias_sign):
    # Operates on plain floats/lists; shared by wflc_step and filter_signal so
    # both paths are bit-identical.
    x = reference_vector(phase, M)
    tremor = 0.0
    for wi, xi in zip(w, x):
        tremor += wi * xi
    bias = omega_b if bias_sign == "subtract" else -omega_b
    eps = s - tremor - bias

    acc = 0.0
    for r in range(1, M + 1):
        acc += r * (w[r - 1] * x[M + r - 1] - w[M + r - 1] * x[r - 1])
    new_omega0 = omega0 + 2.0 * mu0 * eps * acc
    g = 2.0 * mu_amp * eps
    new_w = [wi + g * xi for wi, xi in zip(w, x)]
    new_omega_b = omega_b + 2.0 * mub * eps
    return new_w, new_omega0, new_omega_b, phase + new_omega0, tremor, bias, eps


def _check(w, omega0, omega_b, bound, step):
    for v in (omega0, omega_b, *w):
        if not abs(v) <= bound:
            raise DivergenceError("WFLC state left the finite bound", step)


def wflc_step(state: WflcState, params: WflcParams, s_k: float):
    """Advance the filter by one sample.

    Returns ``(new_state, tremor, voluntary, residual)`` where tremor and
    voluntary are evaluated with the weights held *before* the update.
    """
    if not math.isfinite(s_k):
        raise ValueError("input sample must be finite")
    w, om, ob, ph, tremor, bias, eps = _step(
        list(state.w), state.omega0, state.omega_b, state.phase_accum, float(s_k),
        params.M, params.mu0, params.amplitude_gain, params.mub, params.bias_sign)
    _check(w, om, ob, params.divergence_bound, None)
    if not math.isfinite(ph):
        raise DivergenceError("WFLC phase is not finite")
    return WflcState(tuple(w), om, ob, ph), tremor, bias, eps


def filter_signal(series, params: WflcParams | None = None) -> FilterOutput:
    """Run the WFLC over a whole series starting from zero weights."""
    params = params or WflcParams()
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 1 or len(s) < 2:
        raise LengthError("filter_signal needs a 1-D series of at least 2 samples")
    if not np.all(np.isfinite(s)):
        raise ValueError("series must be finite")

    n = len(s)
    prime = params.bias_prime_samples
    omega_b = float(np.mean(s[:prime])) if prime > 0 else 0.0
    state = WflcState.initial(params, omega_b)

    w = list(state.w)
    om, ob, ph = state.omega0, state.omega_b, state.phase_accum
    M, mu0, mu_amp, mub, sign = (params.M, params.mu0, params.amplitude_gain,
                                 params.mub, params.bias_sign)
    bound = params.divergence_bound
    tremor = np.empty(n)
    voluntary = np.empty(n)
    residual = np.empty(n)
    omega = np.empty(n)
    values = s.tolist()
    for k in range(n):
        w, om, ob, ph, tr, vol, eps = _step(w, om, ob, ph, values[k], M, mu0, mu_amp, mub, sign)
        tremor[k] = tr
        voluntary[k] = vol
        residual[k] = eps
        omega[k] = om
        if not (abs(eps) <= bound and abs(om) <= bound and abs(ob) <= bound):
            raise DivergenceError("WFLC state left the finite bound", k)
        if k % 16 == 0 or k == n - 1:
            _check(w, om, ob, bound, k)
    return FilterOutput(s, tremor, voluntary, residual, omega,
                        final_state=WflcState(tuple(w), om, ob, ph))
