"""
Digital-domain amplitude and delay pre-matching of the cancellation reference.

Three steps, in order:

1. gain: square root of the power ratio between a capture with only the
   received signal applied and a capture with only the reference applied;
2. coarse delay: cross-correlation of the transmitted waveform against the
   capture, resolved to one capture-rate sample;
3. fine delay: a discrete minimum search over integer generation-rate points
   around the coarse estimate, scoring each candidate by the residual power
   left after analog cancellation.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import signal as sps

from .errors import NoLockError, StageError
from .signals import SampledSignal

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrematchSolution:
    gain_factor: float
    coarse_delay_samples: int
    fine_delay_points: int
    residual_power_db: float

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_gain(capture_rx_only: SampledSignal, capture_ref_only: SampledSignal) -> float:
    """sqrt(P_rx / P_ref), powers as mean squares over each full capture."""
    p_ref = capture_ref_only.power
    if p_ref == 0:
        raise ValueError("reference-only capture has zero power")
    return math.sqrt(capture_rx_only.power / p_ref)


def coarse_delay_xcorr(tx_digital: SampledSignal, capture: SampledSignal, *,
                       min_lag: int = 0, max_lag: int | None = None,
                       threshold: float = 3.0) -> int:
    """Lag (capture samples) of the strongest cross-correlation peak.

    The correlation is taken between analytic signals, so its magnitude is the
    envelope and the peak does not jump between carrier cycles when the
    capture went through a mixer. Raises :class:`NoLockError` when the peak is
    less than ``threshold`` times the RMS of the off-peak correlation.
    """
    if tx_digital.sample_rate != capture.sample_rate:
        raise ValueError("tx_digital must be represented at the capture rate")
    n = min(len(tx_digital), len(capture))
    if max_lag is None:
        max_lag = n // 2
    a = sps.hilbert(tx_digital.samples[:n])
    b = sps.hilbert(capture.samples[:n])
    c = sps.correlate(b, a, mode="full", method="fft")
    lags = sps.correlation_lags(n, n, mode="full")
    sel = (lags >= min_lag) & (lags <= max_lag)
    mag = np.abs(c[sel]) / (np.linalg.norm(a) * np.linalg.norm(b) + 1e-300)
    lags = lags[sel]
    peak = int(np.argmax(mag))
    # off-peak statistics skip the main lobe
    guard = max(5, len(mag) // 200)
    off = np.concatenate([mag[:max(0, peak - guard)], mag[peak + guard + 1:]])
    rms = float(np.sqrt(np.mean(off**2))) if off.size else 0.0
    if off.size and mag[peak] < threshold * rms:
        raise NoLockError(
            f"correlation peak {mag[peak]:.3g} is below {threshold} x off-peak RMS {rms:.3g}")
    return int(lags[peak])


class _Memo:
    def __init__(self, evaluate):
        self.evaluate = evaluate
        self.values: dict[int, float] = {}

    def __call__(self, k: int) -> float:
        if k not in self.values:
            self.values[k] = float(self.evaluate(k))
        return self.values[k]


def exhaustive_delay_search(evaluate: Callable[[int], float], coarse_center: int,
                            half_window: int, workers: int = 1) -> int:
    """Argmin of ``evaluate`` over every point of the window (first on ties)."""
    lo = max(0, coarse_center - half_window)
    ks = list(range(lo, coarse_center + half_window + 1))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = list(pool.map(evaluate, ks))
    else:
        vals = [evaluate(k) for k in ks]
    return ks[int(np.argmin(vals))]


def fine_delay_bisection(evaluate: Callable[[int], float], coarse_center: int,
                         half_window: int = 7) -> int:
    """Integer fine delay minimising ``evaluate`` within the window.

    Interval-shrinking (ternary) search on the discrete objective, followed by
    a +/-1 scan around the result as a certificate. If a neighbour scores lower
    the objective is not unimodal on this window and we fall back to an
    exhaustive scan.
    """
    f = evaluate if isinstance(evaluate, _Memo) else _Memo(evaluate)
    lo = max(0, coarse_center - half_window)
    hi = coarse_center + half_window
    a, b = lo, hi
    while b - a > 2:
        m1 = a + (b - a) // 3
        m2 = b - (b - a) // 3
        f1, f2 = f(m1), f(m2)
        if f1 < f2:
            b = m2 - 1
        elif f1 > f2:
            a = m1 + 1
        else:
            a, b = m1, m2
    best = min(range(a, b + 1), key=f)
    for k in (best - 1, best + 1):
        if lo <= k <= hi:
            f(k)
    # any probed point (neighbours included) beating the result means the
    # objective is not unimodal here
    if any(lo <= k <= hi and v < f(best) for k, v in f.values.items()):
        warnings.warn("residual power is not unimodal over the search window; "
                      "falling back to exhaustive scan", RuntimeWarning, stacklevel=2)
        return exhaustive_delay_search(f, coarse_center, half_window)
    return best


@dataclass
class PrematchContext:
    """Everything :func:`prematch` needs from the measurement setup.

    ``residual_db(gain, fine_points)`` runs one analog-cancellation capture with
    the reference scaled by ``gain`` and delayed by ``fine_points`` on the
    generation grid, and returns the in-band residual power in dB.
    """

    capture_rx_only: SampledSignal
    capture_ref_only: SampledSignal
    tx_digital: SampledSignal
    residual_db: Callable[[float, int], float]
    rate_ratio: float
    half_window: int = 7
    search: str = "bisection"
    max_lag: int | None = None
    threshold: float = 3.0
    max_recenter: int = 8
    evaluations: dict = field(default_factory=dict)


def prematch(ctx: PrematchContext) -> PrematchSolution:
    """Gain estimate, coarse correlation delay, then fine residual-power search.

    The coarse lag is taken from the received-only capture, where the only
    correlated component is the self-interference itself. If the fine minimum
    lands on the edge of the window, the window is re-centred there (at most
    ``max_recenter`` times), which covers the rare one-sample coarse miss.
    """
    try:
        gain = estimate_gain(ctx.capture_rx_only, ctx.capture_ref_only)
    except Exception as exc:
        raise StageError("estimate_gain", exc) from exc
    try:
        coarse = coarse_delay_xcorr(ctx.tx_digital, ctx.capture_rx_only,
                                    max_lag=ctx.max_lag, threshold=ctx.threshold)
    except Exception as exc:
        raise StageError("coarse_delay_xcorr", exc) from exc

    memo = _Memo(lambda k: ctx.residual_db(gain, k))
    center = int(round(coarse * ctx.rate_ratio))
    try:
        for _ in range(ctx.max_recenter + 1):
            if ctx.search == "exhaustive":
                fine = exhaustive_delay_search(memo, center, ctx.half_window)
            else:
                fine = fine_delay_bisection(memo, center, ctx.half_window)
            lo = max(0, center - ctx.half_window)
            if (fine == lo and lo > 0) or fine == center + ctx.half_window:
                log.info("fine delay %d on window edge, re-centring", fine)
                center = fine
                continue
            break
    except Exception as exc:
        raise StageError("fine_delay_bisection", exc) from exc
    ctx.evaluations.update(memo.values)
    return PrematchSolution(gain_factor=gain, coarse_delay_samples=coarse,
                            fine_delay_points=fine, residual_power_db=memo(fine))
