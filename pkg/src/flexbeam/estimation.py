"""Modal parameter identification from free-decay vibration records.

Given a time series of a damped oscillation (an emulated joint angle or
torque after the arm has stopped), the logarithmic decrement between
successive response peaks yields the damping ratio and the damped period
yields the natural frequency.  Peak times and amplitudes are refined by a
three-point parabolic fit around each sampled maximum, which removes most
of the grid-quantization bias at realistic sample rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .kinematics import ChainModel, forward_kinematics

__all__ = [
    "EstimationError",
    "EstimationResult",
    "TimeSeries",
    "aggregate_estimates",
    "design_excitation",
    "detect_peaks",
    "identify",
    "log_decrement",
    "with_noise",
]


class EstimationError(RuntimeError):
    """The record does not support a modal estimate."""


@dataclass(frozen=True)
class TimeSeries:
    """A uniformly sampled scalar signal."""

    t: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        if t.ndim != 1 or t.shape != y.shape:
            raise ValueError(f"t and y must be equal-length 1-d arrays, got {t.shape} and {y.shape}")
        if t.size < 3:
            raise ValueError("need at least three samples")
        dt = np.diff(t)
        if dt.min() <= 0 or np.abs(dt - dt[0]).max() > 1e-9 * max(1.0, abs(dt[0])):
            raise ValueError("time grid must be uniform and increasing")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


@dataclass(frozen=True)
class EstimationResult:
    """Identified first-mode parameters and the evidence behind them."""

    wn: float
    zeta: float
    damped_period: float
    peak_times: np.ndarray
    peak_values: np.ndarray
    n_peaks_used: int


def _refine_peak(t: np.ndarray, y: np.ndarray, k: int) -> tuple[float, float]:
    """Parabolic refinement of a sampled local maximum at index k."""
    if k == 0 or k == len(y) - 1:
        return float(t[k]), float(y[k])
    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0 or abs(denom) < 1e-300:
        return float(t[k]), float(y[k])
    delta = 0.5 * (y0 - y2) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    dt = t[1] - t[0]
    t_hat = float(t[k] + delta * dt)
    y_hat = float(y1 - 0.25 * (y0 - y2) * delta)
    return t_hat, y_hat


def _leading_peak(t: np.ndarray, y: np.ndarray) -> tuple[float, float] | None:
    """The first sample, if it is a genuine local maximum of the signal.

    A record that starts exactly at a release (zero slope, concave down)
    has its largest peak at the boundary, where the sliding-window detector
    cannot see it.  A parabola through the first three samples decides:
    the vertex must lie within half a sample of t[0].  A window that opens
    mid-slope places the vertex elsewhere and is rejected.
    """
    if y[0] <= y[1]:
        return None
    y0, y1, y2 = y[0], y[1], y[2]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0 or abs(denom) < 1e-300:
        return None
    delta1 = 0.5 * (y0 - y2) / denom  # vertex offset from sample 1
    if not -1.5 <= delta1 <= -0.5:
        return None
    dt = t[1] - t[0]
    t_hat = float(t[1] + delta1 * dt)
    y_hat = float(y1 - 0.25 * (y0 - y2) * delta1)
    return t_hat, y_hat


def detect_peaks(
    series: TimeSeries,
    min_rel_prominence: float = 0.05,
    remove_mean: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Locate positive peaks of an oscillatory decay, subsample-refined.

    The record mean is removed first (a clamp torque oscillates about its
    static value, and decrement ratios need amplitudes about that offset);
    pass remove_mean=False for pre-centered data.  Peaks must stand out by
    at least min_rel_prominence of the first peak's amplitude, which keeps
    late-record noise wiggles out of the decrement estimate.  Returns
    (times, values) with values measured from the removed mean.
    """
    y = series.y - series.y.mean() if remove_mean else series.y
    idx, _ = find_peaks(y)
    lead = _leading_peak(series.t, y)
    if idx.size == 0 and lead is None:
        raise EstimationError("no local maxima found in record")
    first_amp = abs(lead[1]) if lead is not None else abs(y[idx[0]])
    if first_amp <= 0:
        raise EstimationError("first peak has nonpositive amplitude")
    idx, _ = find_peaks(y, prominence=min_rel_prominence * first_amp)
    refined = [_refine_peak(series.t, y, int(k)) for k in idx]
    if lead is not None:
        refined.insert(0, lead)
    if not refined:
        raise EstimationError("no sufficiently prominent peaks in record")
    times = np.array([r[0] for r in refined])
    values = np.array([r[1] for r in refined])
    keep = values > 0
    if not keep.any():
        raise EstimationError("all detected peaks are nonpositive")
    times, values = times[keep], values[keep]
    if times.size < 2:
        raise EstimationError(
            "fewer than two peaks: signal too damped or too short")
    return times, values


def log_decrement(
    peak_times: np.ndarray,
    peak_values: np.ndarray,
    max_ratios: int = 8,
) -> tuple[float, float, float]:
    """Averaged log-decrement estimate from a list of successive peaks.

    Uses up to max_ratios peaks after the first.  For peak k (1-based), the
    k-cycle decrement is ln(A_0/A_k)/k and the k-cycle period estimate is
    (t_k - t_0)/k; both are averaged across k.  Returns (wn, zeta, Td).
    """
    times = np.asarray(peak_times, dtype=float)
    amps = np.asarray(peak_values, dtype=float)
    if times.ndim != 1 or times.shape != amps.shape:
        raise ValueError("peak arrays must be equal-length 1-d")
    if times.size < 2:
        raise EstimationError("need at least two peaks for a decrement")
    if np.any(amps <= 0):
        raise EstimationError("peak amplitudes must be positive")
    n_use = min(times.size - 1, max_ratios)
    k = np.arange(1, n_use + 1, dtype=float)
    periods = (times[1 : n_use + 1] - times[0]) / k
    decs = np.log(amps[0] / amps[1 : n_use + 1]) / k
    Td = float(periods.mean())
    delta = float(decs.mean())
    if Td <= 0:
        raise EstimationError("nonpositive damped period estimate")
    if delta <= 0:
        raise EstimationError("amplitudes do not decay; cannot form a decrement")
    zeta = delta / np.sqrt(4.0 * np.pi**2 + delta**2)
    wd = 2.0 * np.pi / Td
    wn = wd / np.sqrt(1.0 - zeta**2)
    return float(wn), float(zeta), Td


def identify(
    series: TimeSeries,
    min_rel_prominence: float = 0.05,
    max_ratios: int = 8,
    remove_mean: bool = True,
) -> EstimationResult:
    """Identify (wn, zeta) from one free-decay record."""
    times, values = detect_peaks(series, min_rel_prominence, remove_mean)
    wn, zeta, Td = log_decrement(times, values, max_ratios)
    n_used = min(times.size - 1, max_ratios) + 1
    return EstimationResult(
        wn=wn,
        zeta=zeta,
        damped_period=Td,
        peak_times=times,
        peak_values=values,
        n_peaks_used=n_used,
    )


def design_excitation(
    chain: ChainModel,
    q0: np.ndarray,
    displacement: np.ndarray,
    tf: float,
    N: int = 50,
    config=None,
):
    """Fast step-like rest-to-rest move that rings up the payload.

    Plans the tool displacement with the payload dynamics deliberately
    omitted (the arm-only program): the resulting motion is as aggressive
    as the limits allow, which is exactly what a modal test wants.  The
    final orientation is held at the start orientation.  Returns a
    JointTrajectory; a failed solve raises.
    """
    from .nlp_solver import solve_ocp
    from .transcription import OcpSpec

    q0 = np.asarray(q0, dtype=float)
    displacement = np.asarray(displacement, dtype=float)
    if displacement.shape != (3,):
        raise ValueError("displacement must have 3 entries")
    p0, R0 = forward_kinematics(chain, q0)
    spec = OcpSpec(chain=chain, params=None, q0=q0, p_target=p0 + displacement,
                   R_target=R0, tf=tf, N=N)
    solution, report = solve_ocp(spec, kind="arm_only", config=config, warm="line")
    if report.status != "converged":
        raise EstimationError(
            f"excitation plan failed: solver status {report.status}")
    return solution.trajectory()


def aggregate_estimates(
    results, policy: str = "min"
) -> tuple[float, float]:
    """Combine per-repetition estimates into one (wn, zeta) pair.

    policy="min" keeps the smallest damping ratio seen (underestimating
    damping is the safe direction for shaper design) with the mean
    frequency; policy="mean" averages both.
    """
    results = list(results)
    if not results:
        raise EstimationError("no estimates to aggregate")
    wn = float(np.mean([r.wn for r in results]))
    if policy == "min":
        zeta = float(min(r.zeta for r in results))
    elif policy == "mean":
        zeta = float(np.mean([r.zeta for r in results]))
    else:
        raise ValueError(f"policy must be 'min' or 'mean', got {policy!r}")
    return wn, zeta


def with_noise(series: TimeSeries, snr_db: float, rng: np.random.Generator) -> TimeSeries:
    """Add white measurement noise at a given SNR (dB) about the AC power.

    The noise standard deviation is set from the root-mean-square of the
    mean-removed signal, so the static offset of a clamp-torque record does
    not inflate the nominal signal power.
    """
    ac = series.y - series.y.mean()
    rms = float(np.sqrt(np.mean(ac**2)))
    if rms <= 0:
        raise ValueError("series has no AC content to set an SNR against")
    sigma = rms * 10.0 ** (-snr_db / 20.0)
    return TimeSeries(series.t, series.y + sigma * rng.standard_normal(series.y.shape))
