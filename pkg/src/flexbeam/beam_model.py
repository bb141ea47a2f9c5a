"""Pendulum approximation of a clamped flexible beam carried by a robot arm.

The beam is reduced to a point mass m on a rigid rod of length l, attached
to the tool frame {b} through a passive revolute joint with torsional
stiffness k and damping c.  The pendulum angle theta is measured about the
z-axis of {b}; at theta = 0 the rod extends along the x-axis of {b}:

    p_m = p_b + l * R_b * Rz(theta) * [1, 0, 0]^T

Modal and joint-side parameters are tied together by

    wn = sqrt(k / (m l^2)),     zeta = c / (2 m wn)

and the equation of motion follows from the Lagrangian of the point mass,
giving a forced, damped pendulum driven by the motion of {b}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from . import _jets as J
from .kinematics import ChainModel, FramePVA, frame_pva, frame_pva_batch, frame_pva_jets

GRAVITY = np.array([0.0, 0.0, -9.81])

_CONSISTENCY_TOL = 1e-9

O1, O2, O3 = "O1", "O2", "O3"


class BeamFileError(ValueError):
    """Raised when a beam parameter file fails validation."""


class EquilibriumError(RuntimeError):
    """Raised when the pendulum equilibrium solve does not converge."""


@dataclass(frozen=True)
class PendulumParams:
    """Consistent lumped-pendulum parameter set."""

    wn: float
    zeta: float
    l: float
    m: float
    k: float
    c: float

    def __post_init__(self):
        for name in ("wn", "l", "m", "k"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.zeta < 1:
            raise ValueError("zeta must lie in [0, 1)")
        wn_chk = math.sqrt(self.k / (self.m * self.l**2))
        if abs(wn_chk - self.wn) > _CONSISTENCY_TOL * max(1.0, self.wn):
            raise ValueError("wn inconsistent with (k, m, l)")
        zeta_chk = self.c / (2.0 * self.m * self.wn)
        if abs(zeta_chk - self.zeta) > _CONSISTENCY_TOL * max(1.0, self.zeta):
            raise ValueError("zeta inconsistent with (c, m, wn)")

    @classmethod
    def from_modal(cls, wn: float, zeta: float, l: float, m: float = 1.0):
        """Build from (wn, zeta, l, m), deriving the joint-side (k, c)."""
        k = m * l**2 * wn**2
        c = 2.0 * m * wn * zeta
        return cls(wn=wn, zeta=zeta, l=l, m=m, k=k, c=c)

    @classmethod
    def from_joint(cls, k: float, c: float, l: float, m: float):
        """Build from joint-side (k, c, l, m), deriving (wn, zeta)."""
        wn = math.sqrt(k / (m * l**2))
        zeta = c / (2.0 * m * wn)
        return cls(wn=wn, zeta=zeta, l=l, m=m, k=k, c=c)


@dataclass(frozen=True)
class BeamSpec:
    """Uniform cantilever: linear density rho (kg/m), bending stiffness EI
    (N m^2), length L (m)."""

    rho: float
    EI: float
    L: float

    def __post_init__(self):
        for name in ("rho", "EI", "L"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SetupState:
    """Arm plus pendulum state; packs to x = [q, theta, dq, dtheta]."""

    q: np.ndarray
    theta: float
    dq: np.ndarray
    dtheta: float

    def pack(self) -> np.ndarray:
        return np.concatenate([self.q, [self.theta], self.dq, [self.dtheta]])

    @classmethod
    def unpack(cls, x: np.ndarray, n_dof: int):
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * n_dof + 2,):
            raise ValueError("state vector has wrong length")
        return cls(q=x[:n_dof].copy(), theta=float(x[n_dof]),
                   dq=x[n_dof + 1:2 * n_dof + 1].copy(), dtheta=float(x[2 * n_dof + 1]))


def state_dim(n_dof: int) -> int:
    return 2 * n_dof + 2


# --- pendulum dynamics ------------------------------------------------------

def _pendulum_accel_jets(params: PendulumParams, Rj, aj, wj, alj, thj, dthj, g):
    """theta-ddot as a scalar jet from frame jets and pendulum state jets."""
    B = thj[0].shape[0]
    s, c = J.jsin(thj), J.jcos(thj)
    # rod direction r = Rz(theta) e_x and its theta-derivative j = Rz'(theta) e_x
    rvec = J.jvec3(c, s, J.zero_scalar(B))
    jvec = J.jvec3(J.jneg(s), c, J.zero_scalar(B))
    Rj_w = J.jmv(Rj, jvec)   # world-frame image of j
    Rr_w = J.jmv(Rj, rvec)   # world-frame rod direction
    gj = J.const_vec(g, B)
    grav = J.jscale(J.jdotv(Rj_w, J.jsub(gj, aj)), 1.0 / params.l)
    ang = J.jneg(J.jdotv(Rj_w, J.jcross(alj, Rr_w)))
    cent = J.jdotv(J.jcross(wj, Rj_w), J.jcross(wj, Rr_w))
    out = J.jadd(J.jadd(grav, ang), cent)
    out = J.jadd(out, J.jscale(dthj, -2.0 * params.zeta * params.wn))
    out = J.jadd(out, J.jscale(thj, -params.wn**2))
    return out


def pendulum_accel(params: PendulumParams, frame: FramePVA, theta: float,
                   dtheta: float, g=GRAVITY) -> float:
    """Angular acceleration of the pendulum for a given tool-frame motion."""
    Rj = (frame.R[None], None)
    aj = (frame.a[None], None)
    wj = (frame.omega[None], None)
    alj = (frame.alpha[None], None)
    thj = (np.array([float(theta)]), None)
    dthj = (np.array([float(dtheta)]), None)
    out = _pendulum_accel_jets(params, Rj, aj, wj, alj, thj, dthj, np.asarray(g, dtype=float))
    return float(out[0][0])


def pendulum_accel_batch(params: PendulumParams, frames: dict, theta, dtheta,
                         g=GRAVITY) -> np.ndarray:
    """Batched variant; frames is the dict from frame_pva_batch."""
    theta = np.asarray(theta, dtype=float)
    dtheta = np.asarray(dtheta, dtype=float)
    out = _pendulum_accel_jets(params, (frames["R"], None), (frames["a"], None),
                               (frames["omega"], None), (frames["alpha"], None),
                               (theta, None), (dtheta, None), np.asarray(g, dtype=float))
    return out[0]


# --- stationary-frame specializations --------------------------------------

_ORIENTATIONS = {
    # columns are the base-frame directions of (x_b, y_b, z_b)
    O1: np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]).T,
    O2: np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]).T,
    O3: np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]).T,
}


def orientation_rotation(which: str) -> np.ndarray:
    """Canonical {b} rotation for the named stationary orientation.

    O1: beam axis horizontal, swing plane vertical (gravity acts laterally).
    O2: beam axis straight up (gravity compresses).
    O3: beam axis straight down (gravity extends).
    """
    if which not in _ORIENTATIONS:
        raise ValueError(f"unknown orientation {which!r}")
    return _ORIENTATIONS[which].copy()


def specialize_orientation(params: PendulumParams, which: str, theta, dtheta,
                           g_z: float = GRAVITY[2]):
    """Closed-form theta-ddot for a stationary frame in orientation O1/O2/O3."""
    theta = np.asarray(theta, dtype=float)
    dtheta = np.asarray(dtheta, dtype=float)
    damp = -2.0 * params.zeta * params.wn * dtheta - params.wn**2 * theta
    if which == O1:
        return damp + g_z * np.cos(theta) / params.l
    if which == O2:
        return damp - g_z * np.sin(theta) / params.l
    if which == O3:
        return damp + g_z * np.sin(theta) / params.l
    raise ValueError(f"unknown orientation {which!r}")


def linearized_frequency(params: PendulumParams, which: str,
                         g_z: float = GRAVITY[2]) -> float:
    """Small-angle natural frequency about theta = 0 for O1/O2/O3.

    Gravity leaves O1 unchanged, softens O2 and stiffens O3 (g_z < 0):

        w_O2 = sqrt(wn^2 + g_z / l),  w_O3 = sqrt(wn^2 - g_z / l)
    """
    if which == O1:
        return params.wn
    if which == O2:
        w2 = params.wn**2 + g_z / params.l
    elif which == O3:
        w2 = params.wn**2 - g_z / params.l
    else:
        raise ValueError(f"unknown orientation {which!r}")
    if w2 <= 0:
        raise ValueError("gravity load exceeds pendulum stiffness (buckling)")
    return math.sqrt(w2)


def _equilibrium_residual(params: PendulumParams, R_b: np.ndarray, g: np.ndarray, theta):
    s, c = math.sin(theta), math.cos(theta)
    jw = R_b @ np.array([-s, c, 0.0])
    return -params.wn**2 * theta + float(jw @ g) / params.l


def equilibrium_theta(params: PendulumParams, R_b: np.ndarray, g=GRAVITY) -> float:
    """Static pendulum angle for a stationary frame with rotation R_b.

    Safeguarded Newton iteration on the stationary equation of motion,
    bracketed on [-pi/2, pi/2].
    """
    g = np.asarray(g, dtype=float)
    lo, hi = -math.pi / 2, math.pi / 2
    f_lo = _equilibrium_residual(params, R_b, g, lo)
    f_hi = _equilibrium_residual(params, R_b, g, hi)
    if f_lo * f_hi > 0:
        raise EquilibriumError("no equilibrium bracketed in [-pi/2, pi/2]")
    theta = 0.0
    for _ in range(50):
        f = _equilibrium_residual(params, R_b, g, theta)
        if abs(f) < 1e-12:
            return theta
        if f * f_lo < 0:
            hi = theta
        else:
            lo, f_lo = theta, f
        s, c = math.sin(theta), math.cos(theta)
        fp = -params.wn**2 - float((R_b @ np.array([c, s, 0.0])) @ g) / params.l
        step = -f / fp if fp != 0 else 0.0
        theta_new = theta + step
        if not (lo < theta_new < hi):
            theta_new = 0.5 * (lo + hi)
        theta = theta_new
    raise EquilibriumError("equilibrium iteration failed to converge in 50 steps")


def linearized_mode(params: PendulumParams, R_b: np.ndarray,
                    g=GRAVITY) -> tuple[float, float, float]:
    """Effective (frequency, damping ratio, equilibrium angle) for a
    stationary frame with rotation R_b.

    Linearizes the gravity forcing about the static angle; the damping
    coefficient is unchanged, so the effective ratio is zeta * wn / w_eff.
    """
    g = np.asarray(g, dtype=float)
    theta_bar = equilibrium_theta(params, R_b, g)
    s, c = math.sin(theta_bar), math.cos(theta_bar)
    w2 = params.wn**2 + float((R_b @ np.array([c, s, 0.0])) @ g) / params.l
    if w2 <= 0:
        raise EquilibriumError("gravity load exceeds pendulum stiffness (buckling)")
    w_eff = math.sqrt(w2)
    return w_eff, params.zeta * params.wn / w_eff, theta_bar


# --- coupled arm + pendulum dynamics ----------------------------------------

def setup_dynamics(model: ChainModel, params: PendulumParams, x, u,
                   g=GRAVITY) -> np.ndarray:
    """State derivative of the joint-space setup model.

    x = [q, theta, dq, dtheta], u = ddq.  The arm is a double integrator;
    the pendulum is forced by the resulting tool-frame motion.
    """
    n = model.n_dof
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (state_dim(n),):
        raise ValueError("state vector has wrong length")
    if u.shape != (n,):
        raise ValueError("control vector has wrong length")
    q, theta = x[:n], x[n]
    dq, dtheta = x[n + 1:2 * n + 1], x[2 * n + 1]
    frame = frame_pva(model, q, dq, u)
    tdd = pendulum_accel(params, frame, theta, dtheta, g)
    out = np.empty_like(x)
    out[:n] = dq
    out[n] = dtheta
    out[n + 1:2 * n + 1] = u
    out[2 * n + 1] = tdd
    return out


def setup_dynamics_batch(model: ChainModel, params: PendulumParams, X, U,
                         g=GRAVITY) -> np.ndarray:
    """Batched state derivative: X (B, n_x), U (B, n_u)."""
    n = model.n_dof
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    B = X.shape[0]
    q, theta = X[:, :n], X[:, n]
    dq, dtheta = X[:, n + 1:2 * n + 1], X[:, 2 * n + 1]
    frames = frame_pva_batch(model, q, dq, U)
    tdd = pendulum_accel_batch(params, frames, theta, dtheta, g)
    out = np.empty_like(X)
    out[:, :n] = dq
    out[:, n] = dtheta
    out[:, n + 1:2 * n + 1] = U
    out[:, 2 * n + 1] = tdd
    return out


def setup_dynamics_with_jac(model: ChainModel, params: PendulumParams, X, U,
                            g=GRAVITY):
    """Batched state derivative plus exact Jacobians.

    Returns (f, A, B_mat) with f (B, n_x), A = df/dx (B, n_x, n_x) and
    B_mat = df/du (B, n_x, n_u).  Derivatives are propagated forward-mode
    through the kinematic recursion and the pendulum equation.
    """
    n = model.n_dof
    nx = state_dim(n)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    B = X.shape[0]
    m = nx + n  # directions: full state then controls
    q, theta = X[:, :n], X[:, n]
    dq, dtheta = X[:, n + 1:2 * n + 1], X[:, 2 * n + 1]
    jets = frame_pva_jets(model, q, dq, U, m=m, dirs=(0, n + 1, nx))
    thj = J.seed_scalar(theta, n, m)
    dthj = J.seed_scalar(dtheta, 2 * n + 1, m)
    tdd, dtdd = _pendulum_accel_jets(params, jets["R"], jets["a"], jets["omega"],
                                     jets["alpha"], thj, dthj,
                                     np.asarray(g, dtype=float))
    f = np.empty((B, nx))
    f[:, :n] = dq
    f[:, n] = dtheta
    f[:, n + 1:2 * n + 1] = U
    f[:, 2 * n + 1] = tdd
    A = np.zeros((B, nx, nx))
    A[:, :n, n + 1:2 * n + 1] = np.eye(n)
    A[:, n, 2 * n + 1] = 1.0
    A[:, 2 * n + 1, :] = dtdd[:, :nx]
    Bm = np.zeros((B, nx, n))
    Bm[:, n + 1:2 * n + 1, :] = np.eye(n)
    Bm[:, 2 * n + 1, :] = dtdd[:, nx:]
    return f, A, Bm


def emulated_joint_torque(params: PendulumParams, theta, dtheta) -> np.ndarray:
    """Clamp-side torque the beam would exert: k theta + c theta-dot."""
    return params.k * np.asarray(theta, dtype=float) + params.c * np.asarray(dtheta, dtype=float)


# --- analytical lumping of a uniform cantilever -----------------------------

#: first clamped-free bending root beta_1 * L
BETA1L = 1.8751040687119611


def first_mode_shape(beam: BeamSpec, x: np.ndarray) -> np.ndarray:
    """First clamped-free mode shape, normalized so phi(L) = L."""
    b = BETA1L / beam.L
    bx = b * np.asarray(x, dtype=float)
    bl = BETA1L
    sigma = (math.cosh(bl) + math.cos(bl)) / (math.sinh(bl) + math.sin(bl))
    phi = np.cosh(bx) - np.cos(bx) - sigma * (np.sinh(bx) - np.sin(bx))
    tip = math.cosh(bl) - math.cos(bl) - sigma * (math.sinh(bl) - math.sin(bl))
    return beam.L * phi / tip


def lump_analytical(beam: BeamSpec, n_quad: int = 10_000):
    """Equivalent pendulum (m_a, k_a, w_a) of the beam's first bending mode.

    The pendulum length equals the beam length; kinetic and strain energy of
    the first mode are matched:

        m_a = rho / L^2 * int phi^2 dx,   k_a = EI * int (phi'')^2 dx
        w_a = sqrt(k_a / (m_a L^2))
    """
    b = BETA1L / beam.L
    x = np.linspace(0.0, beam.L, n_quad)
    phi = first_mode_shape(beam, x)
    bx = b * x
    bl = BETA1L
    sigma = (math.cosh(bl) + math.cos(bl)) / (math.sinh(bl) + math.sin(bl))
    tip = math.cosh(bl) - math.cos(bl) - sigma * (math.sinh(bl) - math.sin(bl))
    # second spatial derivative of the normalized shape
    phi_dd = beam.L / tip * b**2 * (np.cosh(bx) + np.cos(bx)
                                    - sigma * (np.sinh(bx) + np.sin(bx)))
    m_a = beam.rho / beam.L**2 * np.trapezoid(phi**2, x)
    k_a = beam.EI * np.trapezoid(phi_dd**2, x)
    w_a = math.sqrt(k_a / (m_a * beam.L**2))
    return m_a, k_a, w_a


def params_from_beam(beam: BeamSpec, zeta: float = 0.007,
                     n_quad: int = 10_000) -> PendulumParams:
    """PendulumParams from the analytical lumping, with a catalog damping."""
    m_a, k_a, wn = lump_analytical(beam, n_quad)
    c = 2.0 * m_a * wn * zeta
    return PendulumParams(wn=wn, zeta=zeta, l=beam.L, m=m_a, k=k_a, c=c)


# --- beam parameter files ---------------------------------------------------

_BEAM_SCHEMA = "flexbeam/beam-v1"
_BEAM_TOP = {"schema", "name", "pendulum", "beam"}
_PEND_KEYS = {"wn", "zeta", "l", "m"}
_BEAM_KEYS = {"rho", "EI", "L", "zeta"}


def _require_keys(mapping, allowed: set, where: str):
    if not isinstance(mapping, dict):
        raise BeamFileError(f"{where} must be a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise BeamFileError(f"unknown keys in {where}: {sorted(unknown)}")


def params_from_dict(doc: dict) -> PendulumParams:
    _require_keys(doc, _BEAM_TOP, "beam file")
    if doc.get("schema") != _BEAM_SCHEMA:
        raise BeamFileError(f"expected schema {_BEAM_SCHEMA!r}, got {doc.get('schema')!r}")
    pend = doc.get("pendulum")
    beam = doc.get("beam")
    if pend is None and beam is None:
        raise BeamFileError("beam file needs a pendulum or beam section")
    derived = None
    if beam is not None:
        _require_keys(beam, _BEAM_KEYS, "beam section")
        spec = BeamSpec(rho=float(beam["rho"]), EI=float(beam["EI"]), L=float(beam["L"]))
        derived = params_from_beam(spec, zeta=float(beam.get("zeta", 0.007)))
    if pend is not None:
        _require_keys(pend, _PEND_KEYS, "pendulum section")
        given = PendulumParams.from_modal(wn=float(pend["wn"]), zeta=float(pend["zeta"]),
                                          l=float(pend["l"]), m=float(pend.get("m", 1.0)))
        if derived is not None:
            if (abs(given.wn - derived.wn) > 1e-6 * derived.wn
                    or abs(given.l - derived.l) > 1e-6 * derived.l):
                raise BeamFileError(
                    "pendulum and beam sections disagree: beam lumps to "
                    f"wn = {derived.wn:.6g}, l = {derived.l:.6g}")
        return given
    return derived


def load_beam_params(path) -> PendulumParams:
    """Parse a beam parameter file.  Unknown keys are rejected."""
    with open(path, "r") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise BeamFileError(f"{path}: not a mapping")
    return params_from_dict(doc)


def bundled_beam(name: str) -> PendulumParams:
    """Load one of the beam parameter files shipped with the package."""
    ref = resources.files("flexbeam").joinpath(f"data/beams/{name}.yaml")
    if not ref.is_file():
        raise KeyError(f"no bundled beam named {name!r}")
    with resources.as_file(ref) as path:
        return load_beam_params(path)
