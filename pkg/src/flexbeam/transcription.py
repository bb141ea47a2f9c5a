"""Direct multiple-shooting transcription of point-to-point arm motions.

The continuous problem: drive the joints from rest at q0 to rest at a target
tool pose within a fixed travel time, while the attached payload pendulum
also starts and ends at its local equilibrium.  States at the N+1 grid nodes
and the piecewise-constant joint accelerations are all decision variables;
RK4 "defect" equalities tie consecutive nodes together.

Two problem kinds share the machinery:

* ``full``      state x = [q, theta, dq, dtheta], pendulum dynamics included,
                terminal pendulum rest enforced.
* ``arm_only``  state x = [q, dq]; the payload is ignored.  The defects are
                exact (the arm is a chain of double integrators), so the
                constraint Jacobian blocks are constant.

The decision vector is z = [x_0, u_0, r_0, ..., x_N, u_N, r_N] where r_k is
a slack pinned to the smoothed control-rate norm of interval k by an
equality row (the rate penalty enters the cost linearly through it, keeping
the NLP's curvature bounded); r_N is structurally zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import beam_model as bm
from .beam_model import PendulumParams, equilibrium_theta
from .kinematics import ChainModel, forward_kinematics, pose_jets, so3_log_jet

__all__ = [
    "Nlp",
    "OcpLayout",
    "OcpSolution",
    "OcpSpec",
    "build_nlp",
    "nlp_gradients",
    "rk4_step",
]

#: smoothing floor for the 2-norm terms, sqrt(s + eps^2) - eps
_SMOOTH_EPS = 1e-6


def rk4_step(f, x, u, h: float):
    """One classical Runge-Kutta step of xdot = f(x, u) with u held fixed."""
    k1 = f(x, u)
    k2 = f(x + 0.5 * h * k1, u)
    k3 = f(x + 0.5 * h * k2, u)
    k4 = f(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class OcpLayout:
    """Index bookkeeping for the interleaved decision vector.

    Each stage block is [x_k, u_k, r_k]: nx states, n_dof held joint
    accelerations, and one slack carrying the control-rate norm of the
    interval that starts at the stage (pinned to zero at stage N and
    whenever the rate penalty is off).
    """

    n_dof: int
    nx: int
    N: int

    @property
    def nu(self) -> int:
        return self.n_dof + 1

    @property
    def stride(self) -> int:
        return self.nx + self.nu

    @property
    def dim(self) -> int:
        return (self.N + 1) * self.stride

    def x_slice(self, k: int) -> slice:
        base = k * self.stride
        return slice(base, base + self.nx)

    def u_slice(self, k: int) -> slice:
        base = k * self.stride + self.nx
        return slice(base, base + self.nu)

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """View z as (X, U) with shapes (N+1, nx) and (N+1, nu)."""
        zz = z.reshape(self.N + 1, self.stride)
        return zz[:, : self.nx], zz[:, self.nx :]

    def join(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        z = np.empty((self.N + 1, self.stride))
        z[:, : self.nx] = X
        z[:, self.nx :] = U
        return z.ravel()


@dataclass
class OcpSpec:
    """Everything that defines one point-to-point planning problem.

    Weights are diagonal: w_x has one entry per state (length 2n+2 in the
    order q, theta, dq, dtheta; arm-only problems use the q and dq entries),
    w_u one entry per joint.  Bounds default to the chain's limit set.
    norm selects how the weighted state/control terms enter the running
    cost: "quadratic" uses v^T W v, "l2" uses the smoothed sqrt(v^T W v).
    """

    chain: ChainModel
    params: PendulumParams | None
    q0: np.ndarray
    p_target: np.ndarray
    R_target: np.ndarray
    tf: float
    N: int = 100
    w_x: np.ndarray | None = None
    w_u: np.ndarray | None = None
    rho_jerk: float = 1e-3
    norm: str = "quadratic"

    def __post_init__(self) -> None:
        n = self.chain.n_dof
        self.q0 = np.asarray(self.q0, dtype=float).reshape(n)
        self.p_target = np.asarray(self.p_target, dtype=float).reshape(3)
        self.R_target = np.asarray(self.R_target, dtype=float).reshape(3, 3)
        if self.w_x is None:
            self.w_x = default_state_weights(n)
        self.w_x = np.asarray(self.w_x, dtype=float).reshape(2 * n + 2)
        if self.w_u is None:
            self.w_u = np.full(n, 1e-3)
        self.w_u = np.asarray(self.w_u, dtype=float).reshape(n)
        if not self.tf > 0:
            raise ValueError(f"travel time must be positive, got {self.tf}")
        if self.N < 10:
            raise ValueError(f"need at least 10 shooting intervals, got {self.N}")
        if np.any(self.w_x < 0) or np.any(self.w_u < 0) or self.rho_jerk < 0:
            raise ValueError("cost weights must be nonnegative")
        if self.norm not in ("quadratic", "l2"):
            raise ValueError(f"norm must be 'quadratic' or 'l2', got {self.norm!r}")
        lim = self.chain.limits
        if np.any(lim.q_min > lim.q_max):
            raise ValueError("inconsistent joint position bounds")

    @property
    def ts(self) -> float:
        return self.tf / self.N


def default_state_weights(n_dof: int) -> np.ndarray:
    """Running-cost state weights: swing heavily, joint rates lightly."""
    w = np.zeros(2 * n_dof + 2)
    w[n_dof] = 10.0  # theta
    w[n_dof + 1 : 2 * n_dof + 1] = 1e-2  # dq
    w[2 * n_dof + 1] = 1.0  # dtheta
    return w


@dataclass
class OcpSolution:
    """A solved trajectory plus solve bookkeeping."""

    ts: float
    X: np.ndarray
    U: np.ndarray
    objective: float
    violation: float
    iterations: int
    wall_time: float
    kind: str

    @property
    def n_dof(self) -> int:
        return self.U.shape[1]

    def theta_profile(self) -> tuple[np.ndarray, np.ndarray]:
        """Planned pendulum angle and rate at the grid nodes (full kind)."""
        if self.kind != "full":
            raise ValueError("arm-only solutions carry no pendulum state")
        n = self.n_dof
        return self.X[:, n].copy(), self.X[:, 2 * n + 1].copy()

    def trajectory(self):
        """Commanded motion as a JointTrajectory (held accelerations)."""
        from .trajectory import JointTrajectory

        n = self.n_dof
        q0 = self.X[0, :n]
        dq0 = self.X[0, n + 1 : 2 * n + 1] if self.kind == "full" else self.X[0, n : 2 * n]
        return JointTrajectory.from_accelerations(q0, dq0, self.U[:-1], self.ts)


# --- x-component index helpers ----------------------------------------------


def _state_indices(n: int, kind: str) -> dict:
    """Slices of q/theta/dq/dtheta inside one state vector."""
    if kind == "full":
        return {
            "q": slice(0, n),
            "theta": n,
            "dq": slice(n + 1, 2 * n + 1),
            "dtheta": 2 * n + 1,
            "nx": 2 * n + 2,
        }
    if kind == "arm_only":
        return {"q": slice(0, n), "dq": slice(n, 2 * n), "nx": 2 * n}
    raise ValueError(f"unknown problem kind {kind!r}")


# --- constraint Jacobian as a block operator ---------------------------------


class ConstraintJacobian:
    """Equality-constraint Jacobian stored as multiple-shooting blocks.

    Defect row block k depends only on (x_k, u_k, x_{k+1}); boundary rows sit
    after the defects, and when the rate penalty is on the stage-slack rows
    r_k = smoothed rate norm close the vector.  Provides matvec (J v) and
    rmatvec (J^T y) without ever forming the dense matrix.
    """

    def __init__(self, nlp: "Nlp", Phix: np.ndarray, Phiu: np.ndarray,
                 Bp: np.ndarray, Be: np.ndarray,
                 dn: np.ndarray | None = None,
                 root: np.ndarray | None = None) -> None:
        self._nlp = nlp
        self.Phix = Phix  # (N, nx, nx)
        self.Phiu = Phiu  # (N, nx, nu)
        self.Bp = Bp      # (3, n) terminal position rows wrt q_N
        self.Be = Be      # (3, n) terminal orientation rows wrt q_N
        self.dn = dn      # (N, n) rates over smoothed norm, or None
        self.root = root  # (N,) smoothed rate norms, or None

    @property
    def shape(self) -> tuple[int, int]:
        return (self._nlp.n_eq, self._nlp.layout.dim)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        nlp = self._nlp
        lay = nlp.layout
        ix = nlp.ix
        n, N, nx = lay.n_dof, lay.N, lay.nx
        Vx, Vu = lay.split(np.asarray(v, dtype=float))
        out = np.empty(nlp.n_eq)
        d = (Vx[1:]
             - np.einsum("kij,kj->ki", self.Phix, Vx[:-1])
             - np.einsum("kij,kj->ki", self.Phiu, Vu[:-1, :n]))
        out[: N * nx] = d.ravel()
        off = N * nx
        out[off : off + nx] = Vx[0]
        off += nx
        out[off : off + n] = Vu[0, :n]
        off += n
        out[off : off + 3] = self.Bp @ Vx[N, ix["q"]]
        off += 3
        out[off : off + 3] = self.Be @ Vx[N, ix["q"]]
        off += 3
        out[off : off + n] = Vx[N, ix["dq"]]
        off += n
        out[off : off + n] = Vu[N, :n]
        off += n
        if nlp.kind == "full":
            out[off] = Vx[N, ix["theta"]]
            out[off + 1] = Vx[N, ix["dtheta"]]
            off += 2
        if self.dn is not None:
            dv = np.diff(Vu[:, :n], axis=0) / nlp.ts
            out[off : off + N] = (np.einsum("ki,ki->k", self.dn, dv)
                                  - Vu[:-1, n]) / nlp.epi_scale
            off += N
        assert off == nlp.n_eq
        return out

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        nlp = self._nlp
        lay = nlp.layout
        ix = nlp.ix
        n, N, nx = lay.n_dof, lay.N, lay.nx
        y = np.asarray(y, dtype=float)
        Gx = np.zeros((N + 1, nx))
        Gu = np.zeros((N + 1, lay.nu))
        Yd = y[: N * nx].reshape(N, nx)
        Gx[1:] += Yd
        Gx[:-1] -= np.einsum("kij,ki->kj", self.Phix, Yd)
        Gu[:-1, :n] -= np.einsum("kij,ki->kj", self.Phiu, Yd)
        off = N * nx
        Gx[0] += y[off : off + nx]
        off += nx
        Gu[0, :n] += y[off : off + n]
        off += n
        Gx[N, ix["q"]] += self.Bp.T @ y[off : off + 3]
        off += 3
        Gx[N, ix["q"]] += self.Be.T @ y[off : off + 3]
        off += 3
        Gx[N, ix["dq"]] += y[off : off + n]
        off += n
        Gu[N, :n] += y[off : off + n]
        off += n
        if nlp.kind == "full":
            Gx[N, ix["theta"]] += y[off]
            Gx[N, ix["dtheta"]] += y[off + 1]
            off += 2
        if self.dn is not None:
            ye = y[off : off + N]
            W = ye[:, None] * self.dn / (nlp.ts * nlp.epi_scale)
            Gu[1:, :n] += W
            Gu[:-1, :n] -= W
            Gu[:-1, n] -= ye / nlp.epi_scale
            off += N
        assert off == nlp.n_eq
        return lay.join(Gx, Gu)

    def col_sq(self) -> np.ndarray:
        """Per-column sum of squared entries, diag(J^T J), for
        preconditioning."""
        nlp = self._nlp
        lay = nlp.layout
        ix = nlp.ix
        n, N = lay.n_dof, lay.N
        Cx = np.zeros((N + 1, lay.nx))
        Cu = np.zeros((N + 1, lay.nu))
        Cx[:-1] += np.einsum("kij,kij->kj", self.Phix, self.Phix)
        Cu[:-1, :n] += np.einsum("kij,kij->kj", self.Phiu, self.Phiu)
        Cx[1:] += 1.0  # identity rows of each defect block
        Cx[0] += 1.0   # initial-state rows
        Cu[0, :n] += 1.0  # initial-control rows
        Cx[N, ix["q"]] += (self.Bp**2).sum(axis=0) + (self.Be**2).sum(axis=0)
        Cx[N, ix["dq"]] += 1.0
        Cu[N, :n] += 1.0
        if nlp.kind == "full":
            Cx[N, ix["theta"]] += 1.0
            Cx[N, ix["dtheta"]] += 1.0
        if self.dn is not None:
            Wd = (self.dn / (nlp.ts * nlp.epi_scale)) ** 2
            Cu[1:, :n] += Wd
            Cu[:-1, :n] += Wd
            Cu[:-1, n] += 1.0 / nlp.epi_scale**2
        return lay.join(Cx, Cu)

    def hess_vec(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Action of sum_i w_i hess(c_i), slack-norm rows only.

        The smoothed rate norm curves as (I - dn dn^T)/root; defect and
        pose rows contribute nothing here, matching the Gauss-Newton use.
        """
        nlp = self._nlp
        lay = nlp.layout
        N, n = lay.N, lay.n_dof
        if self.dn is None:
            return np.zeros(lay.dim)
        we = np.asarray(w, dtype=float)[-N:]
        _, Vu = lay.split(np.asarray(v, dtype=float))
        dv = np.diff(Vu[:, :n], axis=0) / nlp.ts
        proj = dv - self.dn * np.einsum("ki,ki->k", self.dn, dv)[:, None]
        W = (we / (self.root * nlp.ts * nlp.epi_scale))[:, None] * proj
        Gu = np.zeros((N + 1, lay.nu))
        Gu[1:, :n] += W
        Gu[:-1, :n] -= W
        return lay.join(np.zeros((N + 1, lay.nx)), Gu)

    def hess_diag(self, w: np.ndarray) -> np.ndarray:
        """Diagonal of sum_i w_i hess(c_i), slack-norm rows only."""
        nlp = self._nlp
        lay = nlp.layout
        N, n = lay.N, lay.n_dof
        if self.dn is None:
            return np.zeros(lay.dim)
        we = np.asarray(w, dtype=float)[-N:]
        coef = we / (self.root * nlp.ts**2 * nlp.epi_scale)
        Wd = coef[:, None] * (1.0 - self.dn**2)
        Cu = np.zeros((N + 1, lay.nu))
        Cu[1:, :n] += Wd
        Cu[:-1, :n] += Wd
        return lay.join(np.zeros((N + 1, lay.nx)), Cu)


class JerkRows:
    """One-sided jerk rows g(z) <= 0: (u_{k+1}-u_k)/ts within +-j_max.

    Upper rows come first, mirrored lower rows second, each normalized by
    j_max so a row value reads as relative excess.  The rows are linear, so
    the instance doubles as its own Jacobian operator and with_jac returns
    it directly.
    """

    def __init__(self, nlp: "Nlp") -> None:
        self.nlp = nlp
        lay = nlp.layout
        self.n_rows = 2 * lay.N * lay.n_dof
        self.jm = nlp.spec.chain.limits.jerk_max.astype(float)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        nlp = self.nlp
        _, U = nlp.layout.split(np.asarray(z, dtype=float))
        d = nlp._rates(U)
        return np.concatenate([(d / self.jm - 1.0).ravel(),
                               (-d / self.jm - 1.0).ravel()])

    def with_jac(self, z: np.ndarray) -> tuple[np.ndarray, "JerkRows"]:
        return self(z), self

    def matvec(self, v: np.ndarray) -> np.ndarray:
        nlp = self.nlp
        _, Vu = nlp.layout.split(np.asarray(v, dtype=float))
        dv = nlp._rates(Vu)
        return np.concatenate([(dv / self.jm).ravel(),
                               (-dv / self.jm).ravel()])

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        nlp = self.nlp
        lay = nlp.layout
        N, n = lay.N, lay.n_dof
        y = np.asarray(y, dtype=float)
        Yp = y[: N * n].reshape(N, n)
        Ym = y[N * n :].reshape(N, n)
        W = (Yp - Ym) / (nlp.ts * self.jm)  # weight per rate row
        Gu = np.zeros((N + 1, lay.nu))
        Gu[1:, :n] += W
        Gu[:-1, :n] -= W
        return lay.join(np.zeros((N + 1, lay.nx)), Gu)

    def col_sq(self, w: np.ndarray) -> np.ndarray:
        """Per-column weighted squared entries, diag(J^T diag(w) J)."""
        nlp = self.nlp
        lay = nlp.layout
        N, n = lay.N, lay.n_dof
        w = np.asarray(w, dtype=float)
        Wd = (w[: N * n].reshape(N, n)
              + w[N * n :].reshape(N, n)) / (nlp.ts * self.jm) ** 2
        Cu = np.zeros((N + 1, lay.nu))
        Cu[1:, :n] += Wd
        Cu[:-1, :n] += Wd
        return lay.join(np.zeros((N + 1, lay.nx)), Cu)


# --- the NLP ------------------------------------------------------------------


class Nlp:
    """Smooth equality/bound-constrained program built from an OcpSpec.

    Callables: objective(z), objective_grad(z), constraints(z),
    constraints_with_jac(z) -> (c, ConstraintJacobian), plus one-sided
    jerk rows `ineq`.  When the rate penalty is on, the equalities also
    pin each stage slack to the smoothed rate norm of its interval,

        sqrt(||(u_{k+1}-u_k)/ts||^2 + eps^2) - eps - r_k = 0,

    so the cost stays linear in r_k while the objective value equals the
    smoothed-norm penalty exactly; a direct penalty term would put 1/eps
    curvature into the objective near zero rates, while here the slack
    gradient is a constant -1 and the row stays well posed everywhere.
    Rows are divided by the slack scale to keep their multipliers O(1).
    lb/ub bound the decision vector; the slack column is boxed to
    [0, inf) on active intervals and pinned to zero elsewhere.
    """

    def __init__(self, spec: OcpSpec, kind: str) -> None:
        if kind not in ("full", "arm_only"):
            raise ValueError(f"unknown problem kind {kind!r}")
        if kind == "full" and spec.params is None:
            raise ValueError("full problem needs pendulum parameters")
        self.spec = spec
        self.kind = kind
        self.smooth_eps = _SMOOTH_EPS
        n = spec.chain.n_dof
        self.ix = _state_indices(n, kind)
        self.layout = OcpLayout(n_dof=n, nx=self.ix["nx"], N=spec.N)
        self.ts = spec.ts

        # boundary values
        p0, R0 = forward_kinematics(spec.chain, spec.q0)
        self.p0, self.R0 = p0, R0
        if kind == "full":
            self.theta0 = equilibrium_theta(spec.params, R0)
            self.theta_tf = equilibrium_theta(spec.params, spec.R_target)
        else:
            self.theta0 = self.theta_tf = 0.0
        self.x0 = self._make_x0()

        # state/control boxes
        lim = spec.chain.limits
        nx, N = self.layout.nx, spec.N
        xlo = np.full(nx, -np.inf)
        xhi = np.full(nx, np.inf)
        xlo[self.ix["q"]] = lim.q_min
        xhi[self.ix["q"]] = lim.q_max
        xlo[self.ix["dq"]] = -lim.dq_max
        xhi[self.ix["dq"]] = lim.dq_max
        ulo = np.zeros((N + 1, self.layout.nu))
        uhi = np.zeros((N + 1, self.layout.nu))
        ulo[:, :n] = -lim.ddq_max
        uhi[:, :n] = lim.ddq_max
        if spec.rho_jerk > 0.0:
            uhi[:-1, n] = np.inf  # r_N stays pinned at zero
        self.lb = self.layout.join(np.tile(xlo, (N + 1, 1)), ulo)
        self.ub = self.layout.join(np.tile(xhi, (N + 1, 1)), uhi)

        # equality row count: defects + [x0, u0, p, eO, dq_N, u_N (+ theta
        # rows)] + one slack row per interval when the rate penalty is on
        self.has_slack = spec.rho_jerk > 0.0
        self.epi_scale = max(1.0, float(lim.jerk_max.mean()))
        self.n_eq = (N * nx + nx + n + 3 + 3 + n + n
                     + (2 if kind == "full" else 0)
                     + (N if self.has_slack else 0))
        self.ineq = JerkRows(self)

        # weights as vectors aligned with the state layout of this kind
        if kind == "full":
            self._wx = spec.w_x.copy()
        else:
            self._wx = np.concatenate([spec.w_x[:n], spec.w_x[n + 1 : 2 * n + 1]])
        self._wu = spec.w_u.copy()

        if kind == "arm_only":
            self._const_blocks = self._arm_defect_blocks()
        else:
            self._const_blocks = None

        # suggested per-variable scaling for solvers (magnitude equalization)
        sx = np.ones(nx)
        sx[self.ix["dq"]] = np.maximum(1.0, lim.dq_max)
        su = np.append(np.maximum(1.0, lim.ddq_max),
                       max(1.0, float(lim.jerk_max.mean())))
        self.scale = self.layout.join(np.tile(sx, (N + 1, 1)), np.tile(su, (N + 1, 1)))

    # -- construction helpers

    def _make_x0(self) -> np.ndarray:
        nx = self.ix["nx"]
        x0 = np.zeros(nx)
        x0[self.ix["q"]] = self.spec.q0
        if self.kind == "full":
            x0[self.ix["theta"]] = self.theta0
        return x0

    def _arm_defect_blocks(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact one-step map of the double-integrator arm (constant)."""
        n = self.layout.n_dof
        h = self.ts
        Phix = np.eye(2 * n)
        Phix[:n, n:] = h * np.eye(n)
        Phiu = np.vstack([0.5 * h * h * np.eye(n), h * np.eye(n)])
        N = self.layout.N
        return (np.broadcast_to(Phix, (N, 2 * n, 2 * n)),
                np.broadcast_to(Phiu, (N, 2 * n, n)))

    # -- dynamics propagation

    def _rates(self, U: np.ndarray) -> np.ndarray:
        """Control rates (u_{k+1}-u_k)/ts, shape (N, n_dof)."""
        return np.diff(U[:, : self.layout.n_dof], axis=0) / self.ts

    def _propagate(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        """RK4 end states Phi(x_k, u_k) for all intervals, values only."""
        h = self.ts
        Xk, Uk = X[:-1], U[:-1, : self.layout.n_dof]
        if self.kind == "arm_only":
            Phix, Phiu = self._const_blocks
            return (np.einsum("kij,kj->ki", Phix, Xk)
                    + np.einsum("kij,kj->ki", Phiu, Uk))
        spec = self.spec
        f = lambda x, u: bm.setup_dynamics_batch(spec.chain, spec.params, x, u)
        k1 = f(Xk, Uk)
        k2 = f(Xk + 0.5 * h * k1, Uk)
        k3 = f(Xk + 0.5 * h * k2, Uk)
        k4 = f(Xk + h * k3, Uk)
        return Xk + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def _propagate_with_jac(self, X, U):
        """RK4 end states plus dPhi/dx, dPhi/du for all intervals."""
        h = self.ts
        Xk, Uk = X[:-1], U[:-1, : self.layout.n_dof]
        if self.kind == "arm_only":
            Phix, Phiu = self._const_blocks
            Phi = (np.einsum("kij,kj->ki", Phix, Xk)
                   + np.einsum("kij,kj->ki", Phiu, Uk))
            return Phi, Phix, Phiu
        spec = self.spec
        nxd = self.layout.nx
        B = Xk.shape[0]
        eye = np.broadcast_to(np.eye(nxd), (B, nxd, nxd))

        def fj(x, u):
            return bm.setup_dynamics_with_jac(spec.chain, spec.params, x, u)

        k1, A1, B1 = fj(Xk, Uk)
        D1x, D1u = A1, B1
        x2 = Xk + 0.5 * h * k1
        k2, A2, B2 = fj(x2, Uk)
        D2x = A2 @ (eye + 0.5 * h * D1x)
        D2u = A2 @ (0.5 * h * D1u) + B2
        x3 = Xk + 0.5 * h * k2
        k3, A3, B3 = fj(x3, Uk)
        D3x = A3 @ (eye + 0.5 * h * D2x)
        D3u = A3 @ (0.5 * h * D2u) + B3
        x4 = Xk + h * k3
        k4, A4, B4 = fj(x4, Uk)
        D4x = A4 @ (eye + h * D3x)
        D4u = A4 @ (h * D3u) + B4
        Phi = Xk + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        Phix = eye + (h / 6.0) * (D1x + 2.0 * D2x + 2.0 * D3x + D4x)
        Phiu = (h / 6.0) * (D1u + 2.0 * D2u + 2.0 * D3u + D4u)
        return Phi, Phix, Phiu

    # -- constraints

    def _boundary_rows(self, X: np.ndarray, U: np.ndarray,
                       with_jac: bool) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
        spec = self.spec
        n = self.layout.n_dof
        qN = X[-1, self.ix["q"]]
        if with_jac:
            pjet, Rjet = pose_jets(spec.chain, qN)
            pN, dp = pjet[0][0], pjet[1][0]  # (3,), (n, 3)
            Ev = Rjet[0] @ spec.R_target.T
            Ed = Rjet[1] @ spec.R_target.T
            e, de = so3_log_jet((Ev, Ed))
            e, de = e[0], de[0]  # (3,), (n, 3)
            Bp, Be = dp.T, de.T
        else:
            pN, RN = forward_kinematics(spec.chain, qN)
            Ev = RN @ spec.R_target.T
            e, _ = so3_log_jet((Ev[None], None))
            e = e[0]
            Bp = Be = None
        rows = [X[0] - self.x0, U[0, :n], pN - spec.p_target, e,
                X[-1, self.ix["dq"]], U[-1, :n]]
        if self.kind == "full":
            rows.append(np.array([X[-1, self.ix["theta"]] - self.theta_tf,
                                  X[-1, self.ix["dtheta"]]]))
        return np.concatenate(rows), Bp, Be

    def _slack_rows(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Residual of smoothed rate norm minus r_k, with norms and units."""
        d = self._rates(U)
        eps = self.smooth_eps
        root = np.sqrt(np.einsum("ki,ki->k", d, d) + eps**2)
        h = (root - eps - U[:-1, self.layout.n_dof]) / self.epi_scale
        return h, d / root[:, None], root

    def constraints(self, z: np.ndarray) -> np.ndarray:
        X, U = self.layout.split(np.asarray(z, dtype=float))
        defects = (X[1:] - self._propagate(X, U)).ravel()
        bnd, _, _ = self._boundary_rows(X, U, with_jac=False)
        parts = [defects, bnd]
        if self.has_slack:
            parts.append(self._slack_rows(U)[0])
        return np.concatenate(parts)

    def constraints_with_jac(self, z: np.ndarray) -> tuple[np.ndarray, ConstraintJacobian]:
        X, U = self.layout.split(np.asarray(z, dtype=float))
        Phi, Phix, Phiu = self._propagate_with_jac(X, U)
        defects = (X[1:] - Phi).ravel()
        bnd, Bp, Be = self._boundary_rows(X, U, with_jac=True)
        parts = [defects, bnd]
        dn = root = None
        if self.has_slack:
            h, dn, root = self._slack_rows(U)
            parts.append(h)
        return (np.concatenate(parts),
                ConstraintJacobian(self, Phix, Phiu, Bp, Be, dn, root))

    # -- cost

    def _norm_term(self, s: np.ndarray) -> np.ndarray:
        """Map squared weighted norms through the configured norm type."""
        if self.spec.norm == "quadratic":
            return s
        eps = self.smooth_eps
        return np.sqrt(s + eps**2) - eps

    def _norm_term_dscale(self, s: np.ndarray) -> np.ndarray:
        """d(norm_term)/ds, used to chain gradients of s."""
        if self.spec.norm == "quadratic":
            return np.ones_like(s)
        return 0.5 / np.sqrt(s + self.smooth_eps**2)

    def objective(self, z: np.ndarray) -> float:
        """Trapezoidal running cost plus the linear stage-slack term.

        At a feasible point with active epigraph rows the slack sum equals
        the smoothed control-rate norm integral, so the reported value
        matches the original rate-penalized cost.
        """
        n = self.layout.n_dof
        X, U = self.layout.split(np.asarray(z, dtype=float))
        Uc = U[:, :n]
        dx = X - self.x0
        sx = np.einsum("ki,i,ki->k", dx, self._wx, dx)
        su = np.einsum("ki,i,ki->k", Uc, self._wu, Uc)
        tw = np.ones(self.layout.N + 1)
        tw[0] = tw[-1] = 0.5
        run = float(np.sum(tw * (self._norm_term(sx) + self._norm_term(su)))) * self.ts
        return run + self.spec.rho_jerk * self.ts * float(U[:-1, n].sum())

    def objective_grad(self, z: np.ndarray) -> np.ndarray:
        n = self.layout.n_dof
        X, U = self.layout.split(np.asarray(z, dtype=float))
        Uc = U[:, :n]
        dx = X - self.x0
        sx = np.einsum("ki,i,ki->k", dx, self._wx, dx)
        su = np.einsum("ki,i,ki->k", Uc, self._wu, Uc)
        tw = np.ones(self.layout.N + 1)
        tw[0] = tw[-1] = 0.5
        cx = (tw * self._norm_term_dscale(sx))[:, None] * (2.0 * dx * self._wx) * self.ts
        cu = np.zeros_like(U)
        cu[:, :n] = (tw * self._norm_term_dscale(su))[:, None] * (2.0 * Uc * self._wu) * self.ts
        cu[:-1, n] = self.spec.rho_jerk * self.ts
        return self.layout.join(cx, cu)

    def objective_diag(self, z: np.ndarray) -> np.ndarray:
        """Approximate diagonal of the objective Hessian at z.

        Rank-one corrections of the non-quadratic terms are dropped; the
        result is meant for curvature-matched preconditioning, not for
        Newton steps.  The slack columns are linear in the cost and
        contribute nothing.
        """
        n = self.layout.n_dof
        X, U = self.layout.split(np.asarray(z, dtype=float))
        Uc = U[:, :n]
        dx = X - self.x0
        sx = np.einsum("ki,i,ki->k", dx, self._wx, dx)
        su = np.einsum("ki,i,ki->k", Uc, self._wu, Uc)
        tw = np.ones(self.layout.N + 1)
        tw[0] = tw[-1] = 0.5
        hx = (tw * self._norm_term_dscale(sx))[:, None] * (2.0 * self._wx) * self.ts
        hu = np.zeros_like(U)
        hu[:, :n] = (tw * self._norm_term_dscale(su))[:, None] * (2.0 * self._wu) * self.ts
        return self.layout.join(hx, hu)

    def objective_hess_vec(self, z: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Exact objective Hessian-vector product at z."""
        n = self.layout.n_dof
        X, U = self.layout.split(np.asarray(z, dtype=float))
        Vx, Vu = self.layout.split(np.asarray(v, dtype=float))
        Uc, Vc = U[:, :n], Vu[:, :n]
        tw = np.ones(self.layout.N + 1)
        tw[0] = tw[-1] = 0.5
        hu = np.zeros_like(U)
        if self.spec.norm == "quadratic":
            hx = (tw[:, None] * (2.0 * self._wx) * self.ts) * Vx
            hu[:, :n] = (tw[:, None] * (2.0 * self._wu) * self.ts) * Vc
        else:
            dx = X - self.x0
            sx = np.einsum("ki,i,ki->k", dx, self._wx, dx)
            su = np.einsum("ki,i,ki->k", Uc, self._wu, Uc)
            gx = 2.0 * dx * self._wx  # ds/dx per stage
            gu = 2.0 * Uc * self._wu
            d1x = self._norm_term_dscale(sx)
            d1u = self._norm_term_dscale(su)
            d2x = -0.25 * (sx + self.smooth_eps**2) ** -1.5
            d2u = -0.25 * (su + self.smooth_eps**2) ** -1.5
            hx = self.ts * tw[:, None] * (
                d1x[:, None] * (2.0 * self._wx) * Vx
                + (d2x * np.einsum("ki,ki->k", gx, Vx))[:, None] * gx)
            hu[:, :n] = self.ts * tw[:, None] * (
                d1u[:, None] * (2.0 * self._wu) * Vc
                + (d2u * np.einsum("ki,ki->k", gu, Vc))[:, None] * gu)
        return self.layout.join(hx, hu)


def build_nlp(spec: OcpSpec, kind: str = "full") -> Nlp:
    """Transcribe a planning problem into a smooth NLP."""
    return Nlp(spec, kind)


def nlp_gradients(nlp: Nlp, z: np.ndarray):
    """Objective gradient and equality-Jacobian action pair at z.

    Returns (grad, matvec, rmatvec) where matvec(v) = J v and
    rmatvec(y) = J^T y for the equality constraints.
    """
    g = nlp.objective_grad(z)
    _, jac = nlp.constraints_with_jac(z)
    return g, jac.matvec, jac.rmatvec
