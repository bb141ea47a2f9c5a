"""Zero-vibration input shaping for joint-space trajectories.

A shaper is a short sequence of impulses (amplitudes summing to one) that is
convolved with the commanded acceleration signal.  For a second-order mode
with natural frequency wn and damping ratio zeta, the two-impulse ZV shaper
places its second impulse half a damped period after the first, scaled so the
residual oscillation excited by the pair cancels exactly at the design
frequency.  Shaping stretches the trajectory by the shaper duration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trajectory import JointTrajectory

__all__ = [
    "Shaper",
    "residual_vibration_pct",
    "shape_trajectory",
    "zv_shaper",
]


@dataclass(frozen=True)
class Shaper:
    """Impulse sequence (times from zero, amplitudes summing to one)."""

    times: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        a = np.asarray(self.amplitudes, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "amplitudes", a)
        if t.ndim != 1 or t.shape != a.shape or t.size == 0:
            raise ValueError("times and amplitudes must be equal-length 1-d arrays")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("impulse times must start at 0 and increase")
        if abs(a.sum() - 1.0) > 1e-12:
            raise ValueError(f"impulse amplitudes must sum to 1, got {a.sum()}")

    @property
    def duration(self) -> float:
        return float(self.times[-1])


def zv_shaper(wn: float, zeta: float) -> Shaper:
    """Two-impulse zero-vibration shaper for a (wn, zeta) mode."""
    if wn <= 0:
        raise ValueError(f"natural frequency must be positive, got {wn}")
    if not 0.0 <= zeta < 1.0:
        raise ValueError(f"damping ratio must be in [0, 1), got {zeta}")
    K = np.exp(-np.pi * zeta / np.sqrt(1.0 - zeta**2))
    Td = 2.0 * np.pi / (wn * np.sqrt(1.0 - zeta**2))
    amps = np.array([1.0, K]) / (1.0 + K)
    times = np.array([0.0, 0.5 * Td])
    return Shaper(times=times, amplitudes=amps)


def residual_vibration_pct(shaper: Shaper, wn: float, zeta: float) -> float:
    """Residual vibration of the impulse sequence at a test mode, in percent.

    This is the amplitude of the decaying oscillation left after the final
    impulse, normalized by the response to a single unit impulse.  Zero means
    perfect cancellation at (wn, zeta).
    """
    if wn <= 0:
        raise ValueError(f"natural frequency must be positive, got {wn}")
    if not 0.0 <= zeta < 1.0:
        raise ValueError(f"damping ratio must be in [0, 1), got {zeta}")
    wd = wn * np.sqrt(1.0 - zeta**2)
    t = shaper.times
    a = shaper.amplitudes
    w = a * np.exp(zeta * wn * t)
    C = float(np.sum(w * np.cos(wd * t)))
    S = float(np.sum(w * np.sin(wd * t)))
    return 100.0 * float(np.exp(-zeta * wn * t[-1]) * np.hypot(C, S))


def shape_trajectory(traj: JointTrajectory, shaper: Shaper) -> JointTrajectory:
    """Convolve a trajectory's acceleration signal with a shaper.

    Each impulse delay is rounded to the trajectory grid (a warning-free
    design choice: pick ts so the delays are exact grid multiples when exact
    cancellation matters).  The shaped accelerations are re-integrated from
    the original initial state, so the result is grid-consistent; the total
    displacement is preserved because the amplitudes sum to one and each
    joint's original acceleration integrates to zero net velocity.
    """
    qdd = traj.qdd[:-1]
    n_int, n = qdd.shape
    shifts = np.round(shaper.times / traj.ts).astype(int)
    out = np.zeros((n_int + shifts[-1], n))
    for s, a in zip(shifts, shaper.amplitudes):
        out[s : s + n_int] += a * qdd
    return JointTrajectory.from_accelerations(traj.q[0], traj.qd[0], out, traj.ts)
