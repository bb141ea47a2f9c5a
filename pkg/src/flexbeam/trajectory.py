"""Sampled joint trajectories with piecewise-constant acceleration.

A trajectory is stored on a uniform time grid t_k = k*ts.  The commanded
acceleration is zero-order-hold on each interval [t_k, t_{k+1}), and the
position/velocity samples are the exact integrals of that hold:

    qd_{k+1} = qd_k + ts*qdd_k
    q_{k+1}  = q_k + ts*qd_k + ts^2/2 * qdd_k

This convention keeps resampling, convolution-based shaping, and simulation
rollouts consistent with each other: all of them see the same continuous-time
acceleration signal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .kinematics import ChainModel

__all__ = [
    "JointTrajectory",
    "TrajectoryError",
    "integrate_accelerations",
    "load_trajectory_csv",
]


class TrajectoryError(ValueError):
    """Malformed or inconsistent trajectory data."""


def integrate_accelerations(
    q0: np.ndarray,
    qd0: np.ndarray,
    qdd: np.ndarray,
    ts: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate a ZOH acceleration table from initial state (q0, qd0).

    qdd has shape (N, n): one row per interval.  Returns (q, qd), each of
    shape (N+1, n), sampled at the interval boundaries.
    """
    qdd = np.atleast_2d(np.asarray(qdd, dtype=float))
    n_int, n = qdd.shape
    q = np.empty((n_int + 1, n))
    qd = np.empty((n_int + 1, n))
    q[0] = np.asarray(q0, dtype=float)
    qd[0] = np.asarray(qd0, dtype=float)
    for k in range(n_int):
        q[k + 1] = q[k] + ts * qd[k] + 0.5 * ts * ts * qdd[k]
        qd[k + 1] = qd[k] + ts * qdd[k]
    return q, qd


@dataclass
class JointTrajectory:
    """Uniformly sampled joint trajectory.

    q, qd have shape (N+1, n).  qdd also has shape (N+1, n): rows 0..N-1 are
    the interval holds, and row N repeats zero (the arm is at rest after the
    final node in every trajectory this package produces; keeping the array
    rectangular simplifies file round-trips).
    """

    ts: float
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray

    def __post_init__(self) -> None:
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        self.qd = np.atleast_2d(np.asarray(self.qd, dtype=float))
        self.qdd = np.atleast_2d(np.asarray(self.qdd, dtype=float))
        if not (self.q.shape == self.qd.shape == self.qdd.shape):
            raise TrajectoryError(
                f"q/qd/qdd shapes differ: {self.q.shape}, {self.qd.shape}, {self.qdd.shape}"
            )
        if self.q.shape[0] < 2:
            raise TrajectoryError("trajectory needs at least two samples")
        if not (np.isfinite(self.ts) and self.ts > 0):
            raise TrajectoryError(f"sample time must be positive, got {self.ts}")

    @property
    def n_dof(self) -> int:
        return self.q.shape[1]

    @property
    def n_samples(self) -> int:
        return self.q.shape[0]

    @property
    def duration(self) -> float:
        return self.ts * (self.n_samples - 1)

    @property
    def t(self) -> np.ndarray:
        return self.ts * np.arange(self.n_samples)

    @classmethod
    def from_accelerations(
        cls, q0: np.ndarray, qd0: np.ndarray, qdd: np.ndarray, ts: float
    ) -> "JointTrajectory":
        """Build a trajectory from interval accelerations, shape (N, n)."""
        q, qd = integrate_accelerations(q0, qd0, qdd, ts)
        qdd_full = np.vstack([np.atleast_2d(qdd), np.zeros((1, q.shape[1]))])
        return cls(ts=ts, q=q, qd=qd, qdd=qdd_full)

    def consistency_error(self) -> float:
        """Max deviation of stored q/qd from re-integrating the stored qdd."""
        q, qd = integrate_accelerations(self.q[0], self.qd[0], self.qdd[:-1], self.ts)
        return max(np.abs(q - self.q).max(), np.abs(qd - self.qd).max())

    def resample(self, ts_new: float) -> "JointTrajectory":
        """Resample onto a finer grid that subdivides every interval.

        ts must be an integer multiple of ts_new (within 1e-9 relative); the
        held acceleration is replicated so the resampled trajectory traces the
        same continuous motion exactly.
        """
        ratio = self.ts / ts_new
        m = int(round(ratio))
        if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
            raise TrajectoryError(
                f"new sample time {ts_new} does not evenly divide {self.ts}"
            )
        if m == 1:
            return JointTrajectory(self.ts, self.q.copy(), self.qd.copy(), self.qdd.copy())
        qdd_fine = np.repeat(self.qdd[:-1], m, axis=0)
        traj = JointTrajectory.from_accelerations(self.q[0], self.qd[0], qdd_fine, ts_new)
        # the coarse samples land exactly on the fine grid
        return traj

    def check_limits(self, chain: ChainModel, jerk: bool = True) -> list[str]:
        """Return a list of limit-violation descriptions (empty when clean).

        Velocity and acceleration samples are compared against the chain's
        bounds with a 1e-9 absolute slack for round-off.  Jerk is evaluated as
        the difference quotient of consecutive acceleration holds.
        """
        lim = chain.limits
        slack = 1e-9
        problems: list[str] = []
        if self.n_dof != chain.n_dof:
            raise TrajectoryError(
                f"trajectory has {self.n_dof} joints, chain has {chain.n_dof}"
            )

        def scan(values: np.ndarray, lo: np.ndarray, hi: np.ndarray, label: str) -> None:
            over = (values > hi + slack) | (values < lo - slack)
            if over.any():
                k, j = np.argwhere(over)[0]
                problems.append(
                    f"{label} joint {j} at sample {k}: {values[k, j]:.6g} "
                    f"outside [{lo[j]:.6g}, {hi[j]:.6g}]"
                )

        scan(self.q, lim.q_min, lim.q_max, "position")
        scan(self.qd, -lim.dq_max, lim.dq_max, "velocity")
        scan(self.qdd[:-1], -lim.ddq_max, lim.ddq_max, "acceleration")
        if jerk and self.n_samples > 2:
            dj = np.diff(self.qdd[:-1], axis=0) / self.ts
            scan(dj, -lim.jerk_max, lim.jerk_max, "jerk")
        return problems

    def save_csv(self, path: str) -> None:
        """Write t, q, qd, qdd columns to a CSV file."""
        n = self.n_dof
        header = (
            ["t"]
            + [f"q{j}" for j in range(n)]
            + [f"qd{j}" for j in range(n)]
            + [f"qdd{j}" for j in range(n)]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            t = self.t
            for k in range(self.n_samples):
                row = [f"{t[k]:.9f}"]
                row += [f"{v:.17g}" for v in self.q[k]]
                row += [f"{v:.17g}" for v in self.qd[k]]
                row += [f"{v:.17g}" for v in self.qdd[k]]
                writer.writerow(row)


def load_trajectory_csv(path: str) -> JointTrajectory:
    """Read a trajectory written by JointTrajectory.save_csv."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TrajectoryError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise TrajectoryError(f"{path}: no samples")
    if (len(header) - 1) % 3 != 0 or header[0] != "t":
        raise TrajectoryError(f"{path}: unrecognized column layout {header[:4]}")
    n = (len(header) - 1) // 3
    expected = (
        ["t"]
        + [f"q{j}" for j in range(n)]
        + [f"qd{j}" for j in range(n)]
        + [f"qdd{j}" for j in range(n)]
    )
    if header != expected:
        raise TrajectoryError(f"{path}: unexpected header {header}")
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != 1 + 3 * n:
        raise TrajectoryError(f"{path}: ragged rows")
    t = data[:, 0]
    dt = np.diff(t)
    if len(dt) == 0 or dt.min() <= 0 or np.abs(dt - dt[0]).max() > 1e-8:
        raise TrajectoryError(f"{path}: time column is not a uniform grid")
    ts = float(np.round(dt.mean(), 12))
    q = data[:, 1 : 1 + n]
    qd = data[:, 1 + n : 1 + 2 * n]
    qdd = data[:, 1 + 2 * n :]
    return JointTrajectory(ts=ts, q=q, qd=qd, qdd=qdd)
