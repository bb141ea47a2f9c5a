"""Open-loop execution of joint trajectories on the coupled payload model.

The arm follows the commanded trajectory exactly (piecewise-constant
acceleration); the pendulum coordinate is integrated by fixed-step RK4 at
simulation rate.  After the trajectory ends the arm freezes and the payload
rings down freely for a fixed window, over which the residual-vibration
metric is integrated from the emulated clamp torque.

For speed the pendulum forcing is reduced per stage time to five scalars:
with j(theta) = R_b Rz'(theta) e_x expanded in sin/cos, the forced equation
becomes

    thetadd = -2 zeta wn thetad - wn^2 theta
              + a1 sin(theta) + a2 cos(theta) + a3
              - a4 cos(2 theta) - a5 sin(2 theta)

where a1..a5 collect gravity/linear-acceleration, angular-acceleration and
centrifugal projections of the tool frame.  The reduction is validated
against the direct vector form in the test suite.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import beam_model as bm
from .beam_model import GRAVITY, PendulumParams
from .input_shaping import shape_trajectory, zv_shaper
from .kinematics import ChainModel, forward_kinematics, frame_pva_batch
from .nlp_solver import SolverConfig, SolverError, solve_ocp
from .trajectory import JointTrajectory, TrajectoryError

__all__ = [
    "ReportRow",
    "RolloutResult",
    "SimulationError",
    "VibrationReport",
    "compare_controllers",
    "residual_metric",
    "rollout",
]


class SimulationError(RuntimeError):
    """The integration produced non-finite states."""


@dataclass
class RolloutResult:
    """Simulated run: arm samples, pendulum states, emulated clamp torque."""

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    tau: np.ndarray
    t_f: float
    t_r: float


def _zoh_arm_states(traj: JointTrajectory, times: np.ndarray):
    """Exact (q, qd, qdd) of the held-acceleration profile at given times.

    Times past the end of the trajectory return the frozen final pose.
    """
    ts = traj.ts
    n_int = traj.n_samples - 1
    k = np.floor(times / ts + 1e-12).astype(int)
    k = np.clip(k, 0, n_int - 1)
    tau = times - k * ts
    inside = times <= traj.duration + 1e-12
    tau = np.where(inside, tau, 0.0)
    qdd = np.where(inside[:, None], traj.qdd[k], 0.0)
    q = traj.q[k] + tau[:, None] * traj.qd[k] + 0.5 * tau[:, None] ** 2 * traj.qdd[k]
    qd = traj.qd[k] + tau[:, None] * traj.qdd[k]
    q = np.where(inside[:, None], q, traj.q[-1])
    qd = np.where(inside[:, None], qd, 0.0)
    return q, qd, qdd


def _stage_coeffs(params: PendulumParams, frames: dict, g: np.ndarray):
    """Reduce batched tool-frame motion to the five forcing scalars."""
    R = frames["R"]
    a = frames["a"]
    w = frames["omega"]
    al = frames["alpha"]
    Rx, Ry, Rz = R[:, :, 0], R[:, :, 1], R[:, :, 2]
    ga = g[None, :] - a
    a1 = -np.einsum("bi,bi->b", Rx, ga) / params.l
    a2 = np.einsum("bi,bi->b", Ry, ga) / params.l
    a3 = -np.einsum("bi,bi->b", al, Rz)
    wx = np.einsum("bi,bi->b", w, Rx)
    wy = np.einsum("bi,bi->b", w, Ry)
    a4 = wx * wy
    a5 = 0.5 * (wy * wy - wx * wx)
    return np.stack([a1, a2, a3, a4, a5], axis=1)


def _linearize_coeffs(coeffs: np.ndarray, params: PendulumParams,
                      theta_bar: float) -> tuple[np.ndarray, float]:
    """Freeze the forcing shape at theta_bar: affine-in-theta plant.

    Returns per-time forcing values f(t) = F(theta_bar, t) and the constant
    stiffness increment so that thetadd = -2 zeta wn thetad
    - wn^2 theta + f(t) - dk (theta - theta_bar).
    """
    s, c = math.sin(theta_bar), math.cos(theta_bar)
    s2, c2 = math.sin(2 * theta_bar), math.cos(2 * theta_bar)
    f = (coeffs[:, 0] * s + coeffs[:, 1] * c + coeffs[:, 2]
         - coeffs[:, 3] * c2 - coeffs[:, 4] * s2)
    # stiffness increment: -d/dtheta of the static gravity forcing
    dk = -(coeffs[0, 0] * c - coeffs[0, 1] * s)
    return f, dk


def rollout(
    chain: ChainModel,
    params: PendulumParams,
    traj: JointTrajectory,
    t_r: float = 5.0,
    h: float = 1e-3,
    plant: str = "nonlinear",
    freq_scale: float = 1.0,
    zeta_scale: float = 1.0,
    g=GRAVITY,
    warn_limits: bool = True,
    theta0: float | None = None,
) -> RolloutResult:
    """Integrate the pendulum along a trajectory plus a free ring-down.

    plant="nonlinear" runs the full forced pendulum; plant="linear" freezes
    the forcing shape at the initial equilibrium (a time-invariant mode, the
    setting where an ideal input shaper cancels exactly).  freq_scale and
    zeta_scale perturb the simulated plant away from the design model.
    theta0 overrides the initial angle (default: static equilibrium), for
    free-decay experiments.
    """
    if plant not in ("nonlinear", "linear"):
        raise ValueError(f"plant must be 'nonlinear' or 'linear', got {plant!r}")
    if traj.n_dof != chain.n_dof:
        raise ValueError(f"trajectory has {traj.n_dof} joints, chain has {chain.n_dof}")
    if t_r <= 0 or h <= 0:
        raise ValueError("t_r and h must be positive")
    if warn_limits:
        problems = traj.check_limits(chain)
        if problems:
            warnings.warn("trajectory exceeds chain limits: " + problems[0],
                          stacklevel=2)

    plant_params = PendulumParams.from_modal(
        wn=params.wn * freq_scale,
        zeta=min(params.zeta * zeta_scale, 0.999),
        l=params.l,
        m=params.m,
    )
    g = np.asarray(g, dtype=float)
    t_f = traj.duration
    n_move = int(math.ceil(t_f / h - 1e-9))
    n_ring = int(math.ceil(t_r / h - 1e-9))
    # step edges: move phase lands exactly on t_f, ring-down on t_f + t_r
    t_move = np.minimum(np.arange(n_move + 1) * h, t_f)
    t_ring = np.minimum(t_f + np.arange(1, n_ring + 1) * h, t_f + t_r)
    t_grid = np.concatenate([t_move, t_ring])

    # tool-frame forcing at every move step edge and midpoint
    t_mid = 0.5 * (t_move[:-1] + t_move[1:])
    t_stages = np.unique(np.concatenate([t_move, t_mid]))
    # the same float expressions appear in both arrays, so lookups are exact
    i_lo = np.searchsorted(t_stages, t_move[:-1])
    i_mid = np.searchsorted(t_stages, t_mid)
    i_hi = np.searchsorted(t_stages, t_move[1:])
    q_s, qd_s, qdd_s = _zoh_arm_states(traj, t_stages)
    frames = frame_pva_batch(chain, q_s, qd_s, qdd_s)
    coeffs = _stage_coeffs(plant_params, frames, g)

    # initial state: equilibrium under the starting pose
    R0 = frames["R"][0]
    theta_bar0 = bm.equilibrium_theta(plant_params, R0, g)

    zw = 2.0 * plant_params.zeta * plant_params.wn
    wn2 = plant_params.wn**2
    if plant == "linear":
        f_stage, dk = _linearize_coeffs(coeffs, plant_params, theta_bar0)
        k_lin = wn2 + dk

        def accel_at(idx, th, thd):
            return -zw * thd - k_lin * th + f_stage[idx] + dk * theta_bar0
    else:
        def accel_at(idx, th, thd):
            a1, a2, a3, a4, a5 = coeffs[idx]
            return (-zw * thd - wn2 * th + a1 * math.sin(th) + a2 * math.cos(th)
                    + a3 - a4 * math.cos(2 * th) - a5 * math.sin(2 * th))

    th0 = theta_bar0 if theta0 is None else float(theta0)
    theta = np.empty(t_grid.size)
    dtheta = np.empty(t_grid.size)
    theta[0], dtheta[0] = th0, 0.0
    th, thd = th0, 0.0

    for k in range(n_move):
        hk = t_move[k + 1] - t_move[k]
        if hk <= 0:
            theta[k + 1], dtheta[k + 1] = th, thd
            continue
        i0 = i_lo[k]
        im = i_mid[k]
        i1 = i_hi[k]
        k1v = thd
        k1a = accel_at(i0, th, thd)
        k2v = thd + 0.5 * hk * k1a
        k2a = accel_at(im, th + 0.5 * hk * k1v, k2v)
        k3v = thd + 0.5 * hk * k2a
        k3a = accel_at(im, th + 0.5 * hk * k2v, k3v)
        k4v = thd + hk * k3a
        k4a = accel_at(i1, th + hk * k3v, k4v)
        th += (hk / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        thd += (hk / 6.0) * (k1a + 2 * k2a + 2 * k3a + k4a)
        theta[k + 1], dtheta[k + 1] = th, thd

    # ring-down: static frame, coefficients of the final pose
    q_f, qd_f, qdd_f = _zoh_arm_states(traj, np.array([t_f + 10.0]))
    frames_f = frame_pva_batch(chain, q_f, qd_f, qdd_f)
    cf = _stage_coeffs(plant_params, frames_f, g)[0]
    if plant == "linear":
        f_end, dk_end = _linearize_coeffs(cf[None, :], plant_params, theta_bar0)

        def accel_ring(th, thd):
            return (-zw * thd - (wn2 + dk_end) * th + f_end[0]
                    + dk_end * theta_bar0)
    else:
        a1, a2, a3, a4, a5 = cf

        def accel_ring(th, thd):
            return (-zw * thd - wn2 * th + a1 * math.sin(th) + a2 * math.cos(th)
                    + a3 - a4 * math.cos(2 * th) - a5 * math.sin(2 * th))

    base = n_move
    t_prev = t_f
    for k in range(n_ring):
        t1 = t_ring[k]
        hk = t1 - t_prev
        t_prev = t1
        if hk <= 0:
            theta[base + k + 1], dtheta[base + k + 1] = th, thd
            continue
        k1v = thd
        k1a = accel_ring(th, thd)
        k2v = thd + 0.5 * hk * k1a
        k2a = accel_ring(th + 0.5 * hk * k1v, k2v)
        k3v = thd + 0.5 * hk * k2a
        k3a = accel_ring(th + 0.5 * hk * k2v, k3v)
        k4v = thd + hk * k3a
        k4a = accel_ring(th + hk * k3v, k4v)
        th += (hk / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        thd += (hk / 6.0) * (k1a + 2 * k2a + 2 * k3a + k4a)
        theta[base + k + 1], dtheta[base + k + 1] = th, thd
        if not (math.isfinite(th) and math.isfinite(thd)):
            raise SimulationError(f"pendulum state became non-finite at t = {t1:.4f} s")

    if not np.all(np.isfinite(theta)):
        bad = int(np.argmax(~np.isfinite(theta)))
        raise SimulationError(f"pendulum state became non-finite at t = {t_grid[bad]:.4f} s")

    q_out, qd_out, qdd_out = _zoh_arm_states(traj, t_grid)
    tau = bm.emulated_joint_torque(plant_params, theta, dtheta)
    return RolloutResult(t=t_grid, q=q_out, qd=qd_out, qdd=qdd_out,
                         theta=theta, dtheta=dtheta, tau=tau, t_f=t_f, t_r=t_r)


def residual_metric(result: RolloutResult) -> float:
    """Integrated absolute deviation of the clamp torque from its windowed
    mean, over the ring-down window."""
    sel = result.t >= result.t_f - 1e-12
    t = result.t[sel]
    tau = result.tau[sel]
    if t.size < 2:
        raise ValueError("ring-down window is empty")
    span = t[-1] - t[0]
    mean = np.trapezoid(tau, t) / span
    return float(np.trapezoid(np.abs(tau - mean), t))


# --- controller comparison harness ------------------------------------------

_ROW_ORDER = ("aocp", "ocp1", "ocp2", "ocp3", "zv")
_GROUP_OF = {"aocp": "aocp", "ocp1": "ocp", "ocp2": "ocp", "ocp3": "ocp",
             "zv": "zv"}
_LABELS = {"aocp": "aOCP", "ocp1": "OCP", "ocp2": "OCP", "ocp3": "OCP",
           "zv": "ZV-IS"}


@dataclass
class ReportRow:
    """One controller entry of a comparison run."""

    key: str
    label: str
    travel_time: float
    V: float | None
    ratio_pct: float | None
    iterations: int
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class VibrationReport:
    """Residual-vibration comparison across planners on one task.

    Ratios are percentages against the arm-only baseline row of the same
    run; they are left blank when that row is absent or failed.  The raw
    rollouts, trajectories and solver outputs are kept for export.
    """

    task_name: str
    rows: list[ReportRow]
    plant: str
    freq_scale: float
    zeta_scale: float
    t_r: float
    h: float
    rollouts: dict = field(default_factory=dict, repr=False)
    trajectories: dict = field(default_factory=dict, repr=False)
    solutions: dict = field(default_factory=dict, repr=False)

    def as_csv(self) -> str:
        lines = ["controller,travel_time,V,ratio_pct,iterations,status"]
        for r in self.rows:
            v = "" if r.V is None else f"{r.V:.17g}"
            ratio = "" if r.ratio_pct is None else f"{r.ratio_pct:.17g}"
            status = r.status.replace(",", ";")
            lines.append(
                f"{r.label},{r.travel_time:.17g},{v},{ratio},{r.iterations},{status}"
            )
        return "\n".join(lines) + "\n"

    def as_table(self) -> str:
        head = (f"task {self.task_name}  plant={self.plant}"
                f"  freq_scale={self.freq_scale:g}  zeta_scale={self.zeta_scale:g}"
                f"  t_r={self.t_r:g} s  h={self.h:g} s")
        cols = ["controller", "t_f [s]", "V [N m s]", "V/V_aOCP [%]",
                "iters", "status"]
        body = []
        for r in self.rows:
            body.append([
                r.label,
                f"{r.travel_time:.3f}",
                "-" if r.V is None else f"{r.V:.6e}",
                "-" if r.ratio_pct is None else f"{r.ratio_pct:.2f}",
                str(r.iterations),
                r.status,
            ])
        widths = [max(len(c), *(len(row[i]) for row in body)) if body else len(c)
                  for i, c in enumerate(cols)]
        def fmt(cells):
            return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        lines = [head, fmt(cols), fmt(["-" * w for w in widths])]
        lines.extend(fmt(row) for row in body)
        return "\n".join(lines) + "\n"


def _selected_keys(only) -> tuple[str, ...]:
    if only is None or only == "all":
        return _ROW_ORDER
    groups = {only} if isinstance(only, str) else set(only)
    unknown = groups - {"aocp", "ocp", "zv"}
    if unknown:
        raise ValueError(f"unknown controller group(s) {sorted(unknown)}")
    return tuple(k for k in _ROW_ORDER if _GROUP_OF[k] in groups)


def compare_controllers(
    task,
    travel_times=None,
    *,
    config: SolverConfig | None = None,
    plant: str = "nonlinear",
    freq_scale: float = 1.0,
    zeta_scale: float = 1.0,
    t_r: float = 5.0,
    h: float = 1e-3,
    only=None,
    workers: int = 1,
) -> VibrationReport:
    """Plan and roll out the comparison set on one task.

    Rows: arm-only plan at the shortest time, the coupled plan at all three
    times, and the arm-only plan convolved with a two-impulse shaper tuned
    to the linearized mode at the start pose (its delay stretches the move
    by half a damped period, landing near the third travel time).  A failed
    plan or rollout marks its row and leaves the others standing.  workers
    parallelizes the independent coupled solves.
    """
    from .tasks import derive_travel_times

    if travel_times is None:
        tf1, tf2, tf3 = derive_travel_times(task)
    else:
        tf1, tf2, tf3 = (float(v) for v in travel_times)
        if not (0 < tf1 < tf2 < tf3):
            raise ValueError(f"travel times must increase, got {travel_times}")
    keys = _selected_keys(only)
    cfg = config or SolverConfig()

    tf_of = {"aocp": tf1, "ocp1": tf1, "ocp2": tf2, "ocp3": tf3}
    solutions: dict = {}
    iters: dict = {}
    status: dict = {}

    def plan(key, kind, warm):
        try:
            sol, rep = solve_ocp(task.ocp_spec(tf_of[key]), kind, cfg, warm=warm)
        except (SolverError, ValueError) as exc:
            status[key] = f"failed: {exc}"
            return
        iters[key] = sol.iterations
        if rep.status != "converged":
            status[key] = f"failed: solver status {rep.status}"
        else:
            solutions[key] = sol
            status[key] = "ok"

    need_aocp = "aocp" in keys or "zv" in keys
    if need_aocp:
        plan("aocp", "arm_only", "line")

    ocp_keys = [k for k in keys if _GROUP_OF[k] == "ocp"]
    if workers > 1 and len(ocp_keys) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = []
            for k in ocp_keys:
                warm = solutions.get("aocp", "auto") if k == "ocp1" else "auto"
                futs.append(pool.submit(plan, k, "full", warm))
            for f in futs:
                f.result()
    else:
        for k in ocp_keys:
            warm = solutions.get("aocp", "auto") if k == "ocp1" else "auto"
            plan(k, "full", warm)

    trajectories: dict = {}
    for key, sol in solutions.items():
        trajectories[key] = sol.trajectory()

    if "zv" in keys:
        if "aocp" in solutions:
            try:
                _, R0 = forward_kinematics(task.chain, task.q0)
                w_eff, zeta_eff, _ = bm.linearized_mode(task.params, R0)
                shaper = zv_shaper(w_eff, zeta_eff)
                trajectories["zv"] = shape_trajectory(trajectories["aocp"], shaper)
                iters["zv"] = 0
                status["zv"] = "ok"
            except (ValueError, bm.EquilibriumError, TrajectoryError) as exc:
                status["zv"] = f"failed: {exc}"
        else:
            status["zv"] = "failed: arm-only baseline unavailable"

    rollouts: dict = {}
    values: dict = {}
    for key in keys:
        if status.get(key) != "ok":
            continue
        try:
            res = rollout(task.chain, task.params, trajectories[key], t_r=t_r,
                          h=h, plant=plant, freq_scale=freq_scale,
                          zeta_scale=zeta_scale)
            rollouts[key] = res
            values[key] = residual_metric(res)
        except (SimulationError, ValueError) as exc:
            status[key] = f"failed: {exc}"

    base = values.get("aocp") if "aocp" in keys else None
    rows = []
    for key in keys:
        tf = trajectories["zv"].duration if key == "zv" and "zv" in trajectories \
            else tf_of.get(key, tf3)
        V = values.get(key)
        ratio = None
        if V is not None and base is not None and base > 0:
            ratio = 100.0 * V / base
        rows.append(ReportRow(
            key=key,
            label=_LABELS[key],
            travel_time=float(tf),
            V=V,
            ratio_pct=ratio,
            iterations=iters.get(key, 0),
            status=status.get(key, "skipped"),
        ))
    return VibrationReport(
        task_name=task.name,
        rows=rows,
        plant=plant,
        freq_scale=freq_scale,
        zeta_scale=zeta_scale,
        t_r=t_r,
        h=h,
        rollouts=rollouts,
        trajectories=trajectories,
        solutions=solutions,
    )
