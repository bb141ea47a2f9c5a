"""Augmented-Lagrangian solver for smooth equality/box NLPs.

The outer loop dualizes the equality rows (and any one-sided linear rows)
with first-order multiplier updates and a penalty that grows tenfold
whenever feasibility stalls.  Each subproblem - minimize the augmented
Lagrangian over the box - is handled by a limited-memory BFGS iteration
with projection onto the bounds and an Armijo backtracking search along
the projection arc.

Everything is deterministic: no randomness, no wall-clock dependence in
the iterate path.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .kinematics import ChainModel, forward_kinematics, orientation_error
from .trajectory import integrate_accelerations
from .transcription import Nlp, OcpSolution, OcpSpec, build_nlp

_DEBUG_INNER = False  # per-sweep prints from the Newton-CG inner loop

__all__ = [
    "BasicNlp",
    "SolveReport",
    "SolverConfig",
    "SolverError",
    "solve",
    "solve_ocp",
    "warm_start",
]


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and loop limits, all strictly positive."""

    tol_constraint: float = 1e-6
    tol_stationarity: float = 1e-5
    max_outer: int = 50
    max_inner: int = 500
    lbfgs_memory: int = 20
    mu0: float = 10.0
    mu_growth: float = 10.0
    viol_target_ratio: float = 0.25
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    mu_max: float = 1e12
    cg_max: int = 200
    use_scaling: bool = True
    trace_path: str | None = None

    def __post_init__(self) -> None:
        for name in ("tol_constraint", "tol_stationarity", "mu0", "mu_growth",
                     "viol_target_ratio", "armijo_c", "backtrack"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.tol_constraint >= 1 or self.tol_stationarity >= 1:
            raise ValueError("tolerances must be < 1")
        if self.max_outer <= 0 or self.max_inner <= 0 or self.lbfgs_memory <= 0 \
                or self.cg_max <= 0:
            raise ValueError("iteration limits must be positive")


@dataclass
class SolveReport:
    """Outcome of one solve."""

    status: str  # converged | max_iter | infeasible-stall
    violation: float
    stationarity: float
    outer_iterations: int
    inner_iterations: int
    objective: float
    wall_time: float


class SolverError(RuntimeError):
    """Divergence (non-finite objective); carries the offending iterate."""

    def __init__(self, message: str, iterate: np.ndarray | None = None) -> None:
        super().__init__(message)
        self.iterate = iterate


class BasicNlp:
    """Adapter giving plain functions the interface the solver expects.

    constraints/jac may be omitted for unconstrained or box-only problems.
    jac(z) must return an object with rmatvec(y) (dense matrices work via a
    thin wrapper here).
    """

    def __init__(self, dim, objective, gradient, constraints=None, jacobian=None,
                 lb=None, ub=None):
        self.dim = dim
        self._f = objective
        self._g = gradient
        self._c = constraints
        self._J = jacobian
        self.lb = np.full(dim, -np.inf) if lb is None else np.asarray(lb, dtype=float)
        self.ub = np.full(dim, np.inf) if ub is None else np.asarray(ub, dtype=float)
        self.ineq = None
        self.scale = None

    def objective(self, z):
        return float(self._f(z))

    def objective_grad(self, z):
        return np.asarray(self._g(z), dtype=float)

    def constraints(self, z):
        if self._c is None:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self._c(z), dtype=float))

    def constraints_with_jac(self, z):
        c = self.constraints(z)
        if self._J is None:
            if c.size:
                raise ValueError("constraints supplied without a jacobian")
            dim = self.dim

            class _Zero:
                def matvec(self, v):
                    return np.zeros(0)

                def rmatvec(self, y):
                    return np.zeros(dim)

            return c, _Zero()
        J = np.atleast_2d(np.asarray(self._J(z), dtype=float))

        class _Dense:
            def matvec(self, v, _J=J):
                return _J @ v

            def rmatvec(self, y, _J=J):
                return _J.T @ y

        return c, _Dense()


def _nlp_dim(nlp) -> int:
    return nlp.dim if hasattr(nlp, "dim") else nlp.layout.dim


class _ScaledView:
    """The solver's working frame: z = s * y with y the scaled variable."""

    def __init__(self, nlp, use_scaling: bool) -> None:
        self.nlp = nlp
        dim = _nlp_dim(nlp)
        s = getattr(nlp, "scale", None)
        if not use_scaling or s is None:
            s = np.ones(dim)
        self.s = np.asarray(s, dtype=float)
        self.lb = nlp.lb / self.s
        self.ub = nlp.ub / self.s

    def to_z(self, y):
        return self.s * y

    def from_z(self, z):
        return z / self.s


def _al_terms(lam_eq, mu, c):
    return float(lam_eq @ c + 0.5 * mu * (c @ c))


def _ineq_al_value(lam_in, mu, g):
    t = np.maximum(0.0, lam_in + mu * g)
    return float((t @ t - lam_in @ lam_in) / (2.0 * mu))


def solve(nlp, z0: np.ndarray, config: SolverConfig | None = None):
    """Minimize nlp.objective subject to equality rows, bounds, and any
    one-sided rows, starting from z0 (projected into the box).

    Returns (z, SolveReport).  Raises SolverError on a non-finite objective.
    """
    cfg = config or SolverConfig()
    t_start = time.perf_counter()
    view = _ScaledView(nlp, cfg.use_scaling)
    has_ineq = getattr(nlp, "ineq", None) is not None

    y = np.clip(view.from_z(np.asarray(z0, dtype=float)), view.lb, view.ub)
    z = view.to_z(y)
    c = nlp.constraints(z)
    g_in = nlp.ineq(z) if has_ineq else np.zeros(0)
    lam_eq = np.zeros(c.size)
    lam_in = np.zeros(g_in.size)
    mu = cfg.mu0

    trace_rows: list[str] = []

    def al_value(y_val):
        z_val = view.to_z(y_val)
        f = nlp.objective(z_val)
        cc = nlp.constraints(z_val)
        val = f + _al_terms(lam_eq, mu, cc)
        if has_ineq:
            val += _ineq_al_value(lam_in, mu, nlp.ineq(z_val))
        return val, f, cc

    def al_value_grad(y_val):
        z_val = view.to_z(y_val)
        f = nlp.objective(z_val)
        grad = nlp.objective_grad(z_val)
        cc, jac = nlp.constraints_with_jac(z_val)
        val = f + _al_terms(lam_eq, mu, cc)
        grad = grad + jac.rmatvec(lam_eq + mu * cc)
        if has_ineq:
            gg, jin = nlp.ineq.with_jac(z_val)
            val += _ineq_al_value(lam_in, mu, gg)
            grad = grad + jin.rmatvec(np.maximum(0.0, lam_in + mu * gg))
        return val, view.s * grad, f, cc

    can_hvp = hasattr(nlp, "objective_hess_vec")

    def al_full(y_val):
        """Value, gradient, Hessian action, and curvature diagonal at y_val.

        The Hessian action is Gauss-Newton in the dynamics and pose rows
        (their second derivatives are dropped; those rows are mild), but
        keeps the exact curvature of the slack-norm rows when the problem
        exposes it: there the dropped term would dominate the retained one
        in the directions orthogonal to the current rate.
        """
        z_val = view.to_z(y_val)
        f = nlp.objective(z_val)
        grad = nlp.objective_grad(z_val)
        cc, jac = nlp.constraints_with_jac(z_val)
        val = f + _al_terms(lam_eq, mu, cc)
        w_eq = lam_eq + mu * cc
        grad = grad + jac.rmatvec(w_eq)
        row_hess = getattr(jac, "hess_vec", None)
        act = None
        jin = None
        if has_ineq:
            gg, jin = nlp.ineq.with_jac(z_val)
            val += _ineq_al_value(lam_in, mu, gg)
            mult = np.maximum(0.0, lam_in + mu * gg)
            grad = grad + jin.rmatvec(mult)
            act = mult > 0.0

        def hvp(v_y):
            v_z = view.s * v_y
            hv = nlp.objective_hess_vec(z_val, v_z)
            hv = hv + mu * jac.rmatvec(jac.matvec(v_z))
            if row_hess is not None:
                hv = hv + row_hess(w_eq, v_z)
            if act is not None and act.any():
                hv = hv + mu * jin.rmatvec(act * jin.matvec(v_z))
            return view.s * hv

        h0 = None
        col_sq = getattr(jac, "col_sq", None)
        diag_fn = getattr(nlp, "objective_diag", None)
        if col_sq is not None and diag_fn is not None:
            d_z = diag_fn(z_val) + mu * col_sq()
            if row_hess is not None:
                d_z = d_z + jac.hess_diag(w_eq)
            if act is not None and act.any():
                d_z = d_z + mu * jin.col_sq(act.astype(float))
            d_y = view.s**2 * d_z
            top = d_y.max()
            if np.isfinite(top) and top > 0.0:
                h0 = 1.0 / np.maximum(d_y, 1e-10 * top)
        return val, view.s * grad, f, hvp, h0

    def violation(cc, gg):
        v = float(np.abs(cc).max()) if cc.size else 0.0
        if gg.size:
            v = max(v, float(np.maximum(gg, 0.0).max()))
        return v

    def preconditioner(z_cur):
        # Gauss-Newton diagonal of the augmented objective, mapped to the
        # scaled coordinates; None when the problem cannot supply one.
        diag_fn = getattr(nlp, "objective_diag", None)
        if diag_fn is None:
            return None
        _, jac = nlp.constraints_with_jac(z_cur)
        col_sq = getattr(jac, "col_sq", None)
        if col_sq is None:
            return None
        d_y = view.s**2 * (diag_fn(z_cur) + mu * col_sq())
        top = d_y.max()
        if not np.isfinite(top) or top <= 0.0:
            return None
        return 1.0 / np.maximum(d_y, 1e-10 * top)

    v_prev = np.inf
    omega = 1e-1  # inner stationarity target, tightened as the outers proceed
    status = "max_iter"
    total_inner = 0
    outer_done = 0
    stat = np.inf
    f_val = nlp.objective(z)
    if not np.isfinite(f_val):
        raise SolverError("objective is not finite at the initial point", z)

    for outer in range(cfg.max_outer):
        inner_tol = max(omega, cfg.tol_stationarity)
        if can_hvp:
            y, n_inner, stat = _newton_cg_box(al_value, al_full, y,
                                              view.lb, view.ub,
                                              tol=inner_tol, cfg=cfg)
        else:
            y, n_inner, stat = _lbfgs_box(al_value, al_value_grad, y,
                                          view.lb, view.ub,
                                          tol=inner_tol, cfg=cfg,
                                          h0=preconditioner(z))
        total_inner += n_inner
        outer_done = outer + 1
        z = view.to_z(y)
        f_val = nlp.objective(z)
        c = nlp.constraints(z)
        g_in = nlp.ineq(z) if has_ineq else np.zeros(0)
        v = violation(c, g_in)
        if cfg.trace_path is not None:
            trace_rows.append(f"{outer},{total_inner},{f_val:.12e},{v:.6e},{stat:.6e},{mu:.3e}")
            with open(cfg.trace_path, "w") as fh:
                fh.write("outer,inner_total,objective,violation,stationarity,mu\n")
                fh.write("\n".join(trace_rows) + "\n")
        if v <= cfg.tol_constraint and stat <= cfg.tol_stationarity:
            status = "converged"
            break
        if v <= max(cfg.viol_target_ratio * v_prev, cfg.tol_constraint):
            # accepted outers never increase the violation above its floor
            assert v <= max(v_prev, cfg.tol_constraint) * (1.0 + 1e-12)
            # good feasibility progress: first-order multiplier update
            lam_eq = lam_eq + mu * c
            if has_ineq:
                lam_in = np.maximum(0.0, lam_in + mu * g_in)
            v_prev = v
            omega = max(cfg.tol_stationarity, 0.2 * omega)
        else:
            mu *= cfg.mu_growth
            omega = max(cfg.tol_stationarity, 0.5 * omega)
            v_prev = min(v_prev, v)
            if mu > cfg.mu_max:
                status = "infeasible-stall"
                break

    if cfg.trace_path is not None:
        with open(cfg.trace_path, "w") as fh:
            fh.write("outer,inner_total,objective,violation,stationarity,mu\n")
            fh.write("\n".join(trace_rows) + "\n")

    report = SolveReport(
        status=status,
        violation=violation(c, g_in),
        stationarity=stat,
        outer_iterations=outer_done,
        inner_iterations=total_inner,
        objective=f_val,
        wall_time=time.perf_counter() - t_start,
    )
    return z, report


def _lbfgs_box(value_fn, value_grad_fn, y0, lb, ub, tol, cfg: SolverConfig, h0=None):
    """Projected L-BFGS on a box: returns (y, iterations, final stationarity).

    Stationarity is the infinity norm of the projected gradient step
    P(y - grad) - y, scaled by 1/(1 + |f|) with f the plain objective.
    Scaling by the augmented value instead would deflate the test as the
    penalty grows and stall the outer loop.  h0, when given, is a positive
    diagonal seed for the inverse Hessian (two-loop initialization and
    gradient-descent fallback direction).
    """
    y = np.clip(y0, lb, ub)
    val, grad, f_plain, _ = value_grad_fn(y)
    if not np.isfinite(val):
        raise SolverError("augmented objective is not finite at the start point", y)
    S: list[np.ndarray] = []
    Y: list[np.ndarray] = []
    rho: list[float] = []

    def stationarity(yv, gv, fv):
        pg = np.clip(yv - gv, lb, ub) - yv
        return float(np.abs(pg).max()) / (1.0 + abs(fv))

    def fallback(gv):
        return -h0 * gv if h0 is not None else -gv

    stat = stationarity(y, grad, f_plain)
    it = 0
    while it < cfg.max_inner and stat > tol:
        d = _two_loop(grad, S, Y, rho, h0)
        steepest = not S or d @ grad >= 0.0
        if d @ grad >= 0.0:
            d = fallback(grad)
        accepted = False
        for d_try in (d,) if steepest else (d, fallback(grad)):
            alpha = 1.0
            for _ in range(40):
                y_new = np.clip(y + alpha * d_try, lb, ub)
                step = y_new - y
                if not step.any():
                    break
                val_new, _, _ = value_fn(y_new)
                if np.isfinite(val_new) and val_new <= val + cfg.armijo_c * (grad @ step):
                    accepted = True
                    break
                alpha *= cfg.backtrack
            if accepted:
                break
        if not accepted:
            break  # no progress possible at this resolution
        val_new, grad_new, f_plain, _ = value_grad_fn(y_new)
        if not np.isfinite(val_new) or not np.all(np.isfinite(grad_new)):
            raise SolverError("augmented objective diverged during the inner solve", y_new)
        s = y_new - y
        yk = grad_new - grad
        sy = s @ yk
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yk):
            S.append(s)
            Y.append(yk)
            rho.append(1.0 / sy)
            if len(S) > cfg.lbfgs_memory:
                S.pop(0)
                Y.pop(0)
                rho.pop(0)
        y, val, grad = y_new, val_new, grad_new
        stat = stationarity(y, grad, f_plain)
        it += 1
    return y, it, stat


def _two_loop(grad, S, Y, rho, h0=None):
    """Standard two-loop recursion; falls back to (scaled) steepest descent.

    With h0 the center step is gamma * diag(h0) with gamma matched to the
    latest curvature pair, otherwise the usual scalar Barzilai-Borwein seed.
    """
    if not S:
        return -h0 * grad if h0 is not None else -grad
    q = grad.copy()
    alphas = []
    for s, yk, r in zip(reversed(S), reversed(Y), reversed(rho)):
        a = r * (s @ q)
        alphas.append(a)
        q -= a * yk
    if h0 is None:
        q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
    else:
        hy = h0 * Y[-1]
        q *= ((S[-1] @ Y[-1]) / (Y[-1] @ hy)) * h0
    for (s, yk, r), a in zip(zip(S, Y, rho), reversed(alphas)):
        b = r * (yk @ q)
        q += (a - b) * s
    return -q


def _newton_cg_box(value_fn, full_fn, y0, lb, ub, tol, cfg: SolverConfig):
    """Projected Newton on a box with CG-solved, damped Gauss-Newton steps.

    full_fn(y) -> (val, grad, f_plain, hvp, h0): augmented value, gradient,
    Hessian action, and inverse-curvature diagonal at y.  Each sweep freezes
    the coordinates pressed against their bound by the gradient, solves
    (H + nu D) d = -g on the rest with preconditioned CG (D the curvature
    diagonal), and backtracks along the projected arc.  The damping nu is
    steered by the accepted step length so that full steps become acceptable,
    which is what makes the CG work pay off on nonlinear stretches.  Returns
    (y, sweeps, stationarity); the stationarity measure matches _lbfgs_box.
    """
    y = np.clip(y0, lb, ub)
    val, grad, f_plain, hvp, h0 = full_fn(y)
    if not np.isfinite(val):
        raise SolverError("augmented objective is not finite at the start point", y)

    def stationarity(yv, gv, fv):
        pg = np.clip(yv - gv, lb, ub) - yv
        return float(np.abs(pg).max()) / (1.0 + abs(fv))

    stat = stationarity(y, grad, f_plain)
    it = 0
    nu = 1e-3
    fails = 0
    while it < cfg.max_inner and stat > tol:
        cg_n = 0
        at_lb = (y <= lb + 1e-11) & (grad > 0.0)
        at_ub = (y >= ub - 1e-11) & (grad < 0.0)
        free = ~(at_lb | at_ub)
        if not free.any():
            break
        dd = 1.0 / h0[free] if h0 is not None else np.ones(int(free.sum()))
        pre = 1.0 / (dd * (1.0 + nu))
        d = np.zeros_like(y)
        r = -grad[free]
        zv = pre * r
        p = zv.copy()
        rz = float(r @ zv)
        rn0 = float(np.linalg.norm(r))
        target = min(0.5, np.sqrt(rn0)) * rn0
        buf = np.zeros_like(y)
        df = np.zeros_like(r)
        for _ in range(cfg.cg_max):
            cg_n += 1
            buf[:] = 0.0
            buf[free] = p
            Hp = hvp(buf)[free] + nu * (dd * p)
            pHp = float(p @ Hp)
            if pHp <= 1e-14 * float(p @ p):
                break  # flat/negative curvature: stop with the current step
            a = rz / pHp
            df += a * p
            r -= a * Hp
            if np.linalg.norm(r) <= target:
                break
            zv = pre * r
            rz_new = float(r @ zv)
            p = zv + (rz_new / rz) * p
            rz = rz_new
        d[free] = df
        if not d.any() or float(d @ grad) >= 0.0:
            d = -h0 * grad if h0 is not None else -grad
        accepted = False
        alpha = 1.0
        for _ in range(40):
            y_new = np.clip(y + alpha * d, lb, ub)
            step = y_new - y
            if not step.any():
                break
            val_new, _, _ = value_fn(y_new)
            if np.isfinite(val_new) and val_new <= val + cfg.armijo_c * (grad @ step):
                accepted = True
                break
            alpha *= cfg.backtrack
        if not accepted:
            nu = min(nu * 10.0, 1e10)
            fails += 1
            if fails >= 12:
                break  # no progress possible at this resolution
            continue
        fails = 0
        if alpha >= 0.99:
            nu = max(nu / 3.0, 1e-10)
        elif alpha <= 0.26:
            nu = min(nu * 5.0, 1e10)
        val, grad, f_plain, hvp, h0 = full_fn(y_new)
        if not np.isfinite(val) or not np.all(np.isfinite(grad)):
            raise SolverError("augmented objective diverged during the inner solve", y_new)
        y = y_new
        stat = stationarity(y, grad, f_plain)
        it += 1
        if _DEBUG_INNER:
            print(f"    it {it:4d} val {val: .9e} stat {stat:.3e} "
                  f"alpha {alpha:.3e} nu {nu:.1e} cg {cg_n}")
    return y, it, stat


# --- planning-problem front ends ---------------------------------------------


def _ik_pose(chain: ChainModel, p_target, R_target, q_seed) -> np.ndarray:
    """Deterministic damped least-squares fit of a terminal joint vector."""
    lim = chain.limits
    lb = lim.q_min
    ub = lim.q_max

    def resid(q):
        p, R = forward_kinematics(chain, q)
        return np.concatenate([p - p_target, orientation_error(R, R_target),
                               1e-3 * (q - q_seed)])

    sol = least_squares(resid, np.clip(q_seed, lb, ub), bounds=(lb, ub))
    return sol.x


def warm_start(spec: OcpSpec, kind: str = "full") -> np.ndarray:
    """Initial decision vector: smooth joint-space sweep toward the target.

    The terminal joint vector comes from a damped pose fit seeded at q0; the
    sweep uses a rest-to-rest quintic profile, controls from velocity
    differences, and the pendulum coordinate interpolating between its two
    equilibria.  The result is clipped to the variable bounds.
    """
    nlp = build_nlp(spec, kind)
    return _warm_start_for(nlp)


def _warm_start_for(nlp: Nlp, arm_solution: OcpSolution | None = None) -> np.ndarray:
    spec = nlp.spec
    lay = nlp.layout
    N, n = lay.N, lay.n_dof
    tau = np.linspace(0.0, 1.0, N + 1)
    s = 10 * tau**3 - 15 * tau**4 + 6 * tau**5
    ds = (30 * tau**2 - 60 * tau**3 + 30 * tau**4) / spec.tf

    X = np.zeros((N + 1, lay.nx))
    U = np.zeros((N + 1, lay.nu))
    if arm_solution is not None:
        Xa, Ua = arm_solution.X, arm_solution.U
        X[:, nlp.ix["q"]] = Xa[:, :n]
        X[:, nlp.ix["dq"]] = Xa[:, n:]
        U[:, :n] = Ua
    else:
        # quintic accelerations, clipped to bounds, integrated through the
        # same discrete map as the defects: the sweep starts on the shooting
        # manifold and only the boundary rows carry the initial violation
        q_end = _ik_pose(spec.chain, spec.p_target, spec.R_target, spec.q0)
        dq_span = q_end - spec.q0
        dds = (60 * tau - 180 * tau**2 + 120 * tau**3) / spec.tf**2
        lim = spec.chain.limits
        Uq = np.clip(dds[:, None] * dq_span, -lim.ddq_max, lim.ddq_max)
        Uq[0] = 0.0
        Uq[-1] = 0.0
        q_sw, dq_sw = integrate_accelerations(spec.q0, np.zeros(n), Uq[:-1], nlp.ts)
        X[:, nlp.ix["q"]] = q_sw
        X[:, nlp.ix["dq"]] = dq_sw
        U[:, :n] = Uq
    if spec.rho_jerk > 0.0:
        # stage slacks start on their epigraph rows
        du = np.diff(U[:, :n], axis=0) / nlp.ts
        sj = np.einsum("ki,ki->k", du, du)
        U[:-1, n] = np.sqrt(sj + nlp.smooth_eps**2) - nlp.smooth_eps
    if nlp.kind == "full":
        X[:, nlp.ix["theta"]] = nlp.theta0 + s * (nlp.theta_tf - nlp.theta0)
        X[:, nlp.ix["dtheta"]] = ds * (nlp.theta_tf - nlp.theta0)
    z0 = lay.join(X, U)
    return np.clip(z0, nlp.lb, nlp.ub)


def _smoothing_continuation(nlp: Nlp, z0: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Improve a warm start by solving under coarser cost smoothing.

    The unsquared running-norm terms have curvature 1/eps near their kinks,
    which throttles Newton steps.  Solving a loosened problem at eps = 1e-2
    then 1e-4 walks the iterate into the kink structure cheaply; the caller
    then runs the real solve at the final smoothing.  Returns the improved
    start point; the nlp smoothing is restored on exit.  Quadratic-norm
    problems have no kinks (the rate term enters through epigraph slacks)
    and pass through untouched.
    """
    if nlp.spec.norm == "quadratic":
        return z0
    final_eps = nlp.smooth_eps
    loose = dataclasses.replace(
        cfg,
        tol_constraint=max(cfg.tol_constraint, 1e-5),
        tol_stationarity=max(cfg.tol_stationarity, 1e-4),
        max_outer=min(cfg.max_outer, 15),
        trace_path=None,
    )
    z = z0
    try:
        for eps in (1e-2, 1e-4):
            if eps <= final_eps:
                break
            nlp.smooth_eps = eps
            z, _ = solve(nlp, z, loose)
    finally:
        nlp.smooth_eps = final_eps
    return z


def solve_ocp(
    spec: OcpSpec,
    kind: str = "full",
    config: SolverConfig | None = None,
    warm: str | OcpSolution = "auto",
):
    """Transcribe and solve one planning problem.

    warm: "auto" seeds a full solve with an arm-only solution (and seeds the
    arm-only solve with the quintic sweep); "line" always uses the sweep; an
    arm-only OcpSolution on the same grid is used directly as the seed.
    Returns (OcpSolution, SolveReport).
    """
    if isinstance(warm, str) and warm not in ("auto", "line"):
        raise ValueError(f"warm must be 'auto', 'line' or a solution, got {warm!r}")
    cfg = config or SolverConfig()
    t0 = time.perf_counter()
    nlp = build_nlp(spec, kind)
    arm_sol = None
    if isinstance(warm, OcpSolution):
        if warm.kind != "arm_only":
            raise ValueError("warm-start solution must have kind='arm_only'")
        if warm.U.shape != (spec.N + 1, spec.chain.n_dof):
            raise ValueError(
                f"warm-start solution grid {warm.U.shape} does not match "
                f"problem grid {(spec.N + 1, spec.chain.n_dof)}"
            )
        arm_sol = warm
    elif kind == "full" and warm == "auto":
        arm_nlp = build_nlp(spec, "arm_only")
        za0 = _smoothing_continuation(arm_nlp, _warm_start_for(arm_nlp), cfg)
        za, _ = solve(arm_nlp, za0, cfg)
        Xa, Ua = arm_nlp.layout.split(za)
        arm_sol = OcpSolution(ts=nlp.ts, X=Xa, U=Ua[:, : spec.chain.n_dof].copy(),
                              objective=0.0, violation=0.0,
                              iterations=0, wall_time=0.0, kind="arm_only")
    z0 = _warm_start_for(nlp, arm_sol)
    z0 = _smoothing_continuation(nlp, z0, cfg)
    z, report = solve(nlp, z0, cfg)
    X, U = nlp.layout.split(z)
    U = U[:, : nlp.layout.n_dof]
    solution = OcpSolution(
        ts=nlp.ts,
        X=X.copy(),
        U=U.copy(),
        objective=report.objective,
        violation=report.violation,
        iterations=report.inner_iterations,
        wall_time=time.perf_counter() - t0,
        kind=kind,
    )
    return solution, report
