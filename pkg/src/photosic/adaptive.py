"""
Residual digital cancellation with transversal adaptive filters.

The filter sees the known transmitted waveform as its reference input and
the post-analog capture as the desired signal; its error output is the
cancelled signal. Tap vector convention: u(n) = [x(n), x(n-1), ..., x(n-L+1)].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numba import njit
from pydantic import BaseModel, ConfigDict, Field

from .errors import ConfigurationError
from .signals import SampledSignal


class AdaptiveConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    algorithm: Literal["NLMS", "RLS"] = "NLMS"
    filter_length: int = Field(default=64, ge=1)
    mu: float = Field(default=0.5, gt=0, lt=2)
    eps: float = Field(default=1e-8, gt=0)
    lam: float = Field(default=0.9999, gt=0, le=1, alias="lambda")
    delta: float = Field(default=0.01, gt=0)


@dataclass(frozen=True)
class CancellerResult:
    output: SampledSignal
    weights: np.ndarray
    learning_curve: np.ndarray

    def steady_state_db(self, fraction: float = 0.1) -> float:
        """Mean squared error over the trailing ``fraction`` of samples, in dB."""
        n = max(1, int(len(self.learning_curve) * fraction))
        return float(10 * np.log10(np.mean(self.learning_curve[-n:]) + 1e-300))


@njit(cache=True)
def _nlms(d, x, L, mu, eps):
    N = d.size
    w = np.zeros(L)
    u = np.zeros(L)
    e = np.empty(N)
    for n in range(N):
        for k in range(L - 1, 0, -1):
            u[k] = u[k - 1]
        u[0] = x[n]
        y = 0.0
        energy = 0.0
        for k in range(L):
            y += w[k] * u[k]
            energy += u[k] * u[k]
        err = d[n] - y
        e[n] = err
        g = mu * err / (eps + energy)
        for k in range(L):
            w[k] += g * u[k]
    return e, w


@njit(cache=True)
def _rls(d, x, L, lam, delta):
    N = d.size
    w = np.zeros(L)
    u = np.zeros(L)
    P = np.eye(L) / delta
    Pu = np.zeros(L)
    e = np.empty(N)
    inv_lam = 1.0 / lam
    for n in range(N):
        for k in range(L - 1, 0, -1):
            u[k] = u[k - 1]
        u[0] = x[n]
        denom = lam
        for i in range(L):
            s = 0.0
            for j in range(L):
                s += P[i, j] * u[j]
            Pu[i] = s
            denom += u[i] * s
        y = 0.0
        for k in range(L):
            y += w[k] * u[k]
        err = d[n] - y
        e[n] = err
        for i in range(L):
            w[i] += Pu[i] / denom * err
        # P <- (P - k u^T P) / lam with k = Pu / denom; P stays symmetric
        for i in range(L):
            ki = Pu[i] / denom
            for j in range(i, L):
                v = (P[i, j] - ki * Pu[j]) * inv_lam
                P[i, j] = v
                P[j, i] = v
    return e, w


def _check_inputs(desired: SampledSignal, reference: SampledSignal):
    if desired.sample_rate != reference.sample_rate:
        raise ValueError("desired and reference sample rates differ")
    if len(desired) != len(reference):
        raise ValueError("desired and reference lengths differ")


def nlms_cancel(desired: SampledSignal, reference: SampledSignal,
                cfg: AdaptiveConfig) -> CancellerResult:
    """NLMS: w <- w + mu e(n) u(n) / (eps + |u(n)|^2); output is e(n)."""
    if cfg.algorithm != "NLMS":
        raise ConfigurationError(f"nlms_cancel got algorithm={cfg.algorithm}")
    _check_inputs(desired, reference)
    e, w = _nlms(desired.samples, reference.samples, cfg.filter_length, cfg.mu, cfg.eps)
    return CancellerResult(desired.replace(e), w, e**2)


def rls_cancel(desired: SampledSignal, reference: SampledSignal,
               cfg: AdaptiveConfig) -> CancellerResult:
    """Exponentially weighted RLS with P(0) = I / delta; output is the a-priori error."""
    if cfg.algorithm != "RLS":
        raise ConfigurationError(f"rls_cancel got algorithm={cfg.algorithm}")
    _check_inputs(desired, reference)
    e, w = _rls(desired.samples, reference.samples, cfg.filter_length, cfg.lam, cfg.delta)
    return CancellerResult(desired.replace(e), w, e**2)


def cancel(desired: SampledSignal, reference: SampledSignal,
           cfg: AdaptiveConfig) -> CancellerResult:
    if cfg.algorithm == "NLMS":
        return nlms_cancel(desired, reference, cfg)
    return rls_cancel(desired, reference, cfg)


@dataclass(frozen=True)
class WienerSolution:
    weights: np.ndarray
    regularized: bool


def tap_matrix(x: np.ndarray, L: int) -> np.ndarray:
    """Rows are u(n) for n = 0..N-1 with zeros before the record starts."""
    padded = np.concatenate([np.zeros(L - 1), x])
    return np.lib.stride_tricks.sliding_window_view(padded, L)[:, ::-1]


def wiener_oracle(desired: SampledSignal, reference: SampledSignal,
                  filter_length: int) -> WienerSolution:
    """MMSE taps from the time-averaged normal equations R w = p."""
    _check_inputs(desired, reference)
    L = int(filter_length)
    if len(desired) < 10 * L:
        raise ValueError(f"need at least {10 * L} samples for {L} taps")
    X = tap_matrix(reference.samples, L)
    N = X.shape[0]
    R = X.T @ X / N
    p = X.T @ desired.samples / N
    regularized = bool(np.linalg.cond(R) > 1e12)
    if regularized:
        ridge = 1e-10 * np.trace(R) / L
        if ridge == 0:
            # all-zero reference: nothing to fit
            return WienerSolution(np.zeros(L), True)
        R = R + ridge * np.eye(L)
    return WienerSolution(np.linalg.solve(R, p), regularized)
