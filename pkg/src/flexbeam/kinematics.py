"""Serial-chain kinematics: poses, twists and accelerations of the tool frame.

The chain is described in modified Denavit-Hartenberg form: joint i carries
(alpha_{i-1}, a_{i-1}, d_i, offset_i) and the link transform

    T_i = Rot(x, alpha) Trans(x, a) Rot(z, q + offset) Trans(z, d)

for revolute joints (d varies instead of theta for prismatic ones).  All
frame quantities (position, rotation, linear/angular velocity and
acceleration) are propagated recursively in the base frame, which makes the
second-order quantities exact rather than finite-differenced.

The same recursion also propagates forward-mode derivatives with respect to
(q, dq, ddq), which downstream trajectory optimization uses for exact
constraint Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from . import _jets as J

_EPS_ORTHO = 1e-10

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


class ChainFileError(ValueError):
    """Raised when a chain description file fails validation."""


@dataclass(frozen=True)
class DhJoint:
    """One modified-DH row plus its motion limits."""

    kind: str = REVOLUTE
    alpha: float = 0.0
    a: float = 0.0
    d: float = 0.0
    offset: float = 0.0
    q_min: float = -np.inf
    q_max: float = np.inf
    dq_max: float = np.inf
    ddq_max: float = np.inf
    jerk_max: float = np.inf

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise ChainFileError(f"unknown joint kind {self.kind!r}")
        if not self.q_min <= self.q_max:
            raise ChainFileError("q_min must not exceed q_max")
        for name in ("dq_max", "ddq_max", "jerk_max"):
            if getattr(self, name) <= 0:
                raise ChainFileError(f"{name} must be positive")


@dataclass(frozen=True)
class Limits:
    q_min: np.ndarray
    q_max: np.ndarray
    dq_max: np.ndarray
    ddq_max: np.ndarray
    jerk_max: np.ndarray


@dataclass
class FramePVA:
    """Tool-frame pose, velocity and acceleration, all in base coordinates."""

    p: np.ndarray
    R: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    a: np.ndarray
    alpha: np.ndarray


def _check_rotation(R: np.ndarray, what: str) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"{what} must be a 3x3 matrix")
    if np.max(np.abs(R @ R.T - np.eye(3))) > _EPS_ORTHO or np.linalg.det(R) < 0:
        raise ValueError(f"{what} is not a proper rotation matrix")
    return R


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Fixed-axis XYZ convention: R = Rz(yaw) Ry(pitch) Rx(roll)."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


class ChainModel:
    """Rigid serial chain with a fixed base and tool transform."""

    def __init__(self, joints, tool_p=None, tool_R=None, base_p=None, base_R=None,
                 name: str = "", configurations: dict | None = None):
        self.joints = list(joints)
        if not self.joints:
            raise ChainFileError("chain needs at least one joint")
        self.name = name
        self.tool_p = np.zeros(3) if tool_p is None else np.asarray(tool_p, dtype=float)
        self.tool_R = np.eye(3) if tool_R is None else _check_rotation(tool_R, "tool rotation")
        self.base_p = np.zeros(3) if base_p is None else np.asarray(base_p, dtype=float)
        self.base_R = np.eye(3) if base_R is None else _check_rotation(base_R, "base rotation")
        self.configurations = {}
        for key, q in (configurations or {}).items():
            q = np.asarray(q, dtype=float)
            if q.shape != (self.n_dof,):
                raise ChainFileError(f"configuration {key!r} has wrong length")
            self.configurations[key] = q
        # per-joint constants of the modified-DH transform
        self._C = [rot_x(j.alpha) for j in self.joints]

    @property
    def n_dof(self) -> int:
        return len(self.joints)

    @property
    def limits(self) -> Limits:
        js = self.joints
        return Limits(
            q_min=np.array([j.q_min for j in js]),
            q_max=np.array([j.q_max for j in js]),
            dq_max=np.array([j.dq_max for j in js]),
            ddq_max=np.array([j.ddq_max for j in js]),
            jerk_max=np.array([j.jerk_max for j in js]),
        )

    def named_configuration(self, key: str) -> np.ndarray:
        if key not in self.configurations:
            raise KeyError(f"chain {self.name!r} has no configuration {key!r}")
        return self.configurations[key].copy()

    def _check_q(self, q) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=float))
        if q.shape[-1] != self.n_dof:
            raise ValueError(f"expected {self.n_dof} joint values, got {q.shape[-1]}")
        return q


def _chain_pass(model: ChainModel, Q, dQ, ddQ, m=None, dirs=(None, None, None)):
    """One forward recursion over the chain, batched over the leading axis.

    Q, dQ, ddQ: (B, n) arrays.  When m is given, dirs = (i_q, i_dq, i_ddq)
    holds the first direction index of each input block and derivative dots
    are propagated alongside the values.  Returns a dict of jets.
    """
    B, n = Q.shape
    iq, idq, iddq = dirs

    R = J.const_mat(model.base_R, B)
    o = J.const_vec(model.base_p, B)
    w = J.zero_vec(B)
    al = J.zero_vec(B)
    v = J.zero_vec(B)
    acc = J.zero_vec(B)

    for i, joint in enumerate(model.joints):
        C = model._C[i]
        qi = J.seed_scalar(Q[:, i], None if iq is None else iq + i, m)
        qdi = J.seed_scalar(dQ[:, i], None if idq is None else idq + i, m)
        qddi = J.seed_scalar(ddQ[:, i], None if iddq is None else iddq + i, m)

        if joint.kind == REVOLUTE:
            theta = (qi[0] + joint.offset, qi[1])
            sa, ca = math.sin(joint.alpha), math.cos(joint.alpha)
            p_loc = np.array([joint.a, -joint.d * sa, joint.d * ca])
            r = J.jmv(R, J.const_vec(p_loc, B))
            o = J.jadd(o, r)
            # translational terms see the parent link's rates
            acc = J.jadd(acc, J.jadd(J.jcross(al, r), J.jcross(w, J.jcross(w, r))))
            v = J.jadd(v, J.jcross(w, r))
            R = J.jmm(R, J.jmm_const_left(C, J.jrotz(theta)))
            z = (R[0][..., :, 2], None if R[1] is None else R[1][..., :, :, 2])
            wxz = J.jcross(w, z)
            al = J.jadd(al, J.jadd(J.jsv(qddi, z), J.jsv(qdi, wxz)))
            w = J.jadd(w, J.jsv(qdi, z))
        else:  # prismatic: translation along z is q + d, theta fixed at offset
            dtot = (qi[0] + joint.d, qi[1])
            sa, ca = math.sin(joint.alpha), math.cos(joint.alpha)
            p_loc = J.jvec3((np.full(B, joint.a), None),
                            J.jscale(dtot, -sa), J.jscale(dtot, ca))
            r = J.jmv(R, p_loc)
            o = J.jadd(o, r)
            R = J.jmm_const_right(R, C @ rot_z(joint.offset))
            z = (R[0][..., :, 2], None if R[1] is None else R[1][..., :, :, 2])
            wxz = J.jcross(w, z)
            v = J.jadd(v, J.jadd(J.jcross(w, r), J.jsv(qdi, z)))
            acc = J.jadd(acc, J.jadd(J.jcross(al, r), J.jcross(w, J.jcross(w, r))))
            acc = J.jadd(acc, J.jadd(J.jsv(qddi, z), J.jscale(J.jsv(qdi, wxz), 2.0)))

    # fixed tool transform
    rt = J.jmv(R, J.const_vec(model.tool_p, B))
    o = J.jadd(o, rt)
    v = J.jadd(v, J.jcross(w, rt))
    acc = J.jadd(acc, J.jadd(J.jcross(al, rt), J.jcross(w, J.jcross(w, rt))))
    R = J.jmm_const_right(R, model.tool_R)
    return {"p": o, "R": R, "v": v, "omega": w, "a": acc, "alpha": al}


def forward_kinematics(model: ChainModel, q) -> tuple[np.ndarray, np.ndarray]:
    """Tool-frame position and rotation for a single configuration."""
    Q = model._check_q(q)
    out = _chain_pass(model, Q, np.zeros_like(Q), np.zeros_like(Q))
    return out["p"][0][0], out["R"][0][0]


def frame_pva(model: ChainModel, q, dq, ddq) -> FramePVA:
    """Tool-frame pose, velocity and acceleration for one sample."""
    Q = model._check_q(q)
    dQ = model._check_q(dq)
    ddQ = model._check_q(ddq)
    out = _chain_pass(model, Q, dQ, ddQ)
    return FramePVA(p=out["p"][0][0], R=out["R"][0][0], v=out["v"][0][0],
                    omega=out["omega"][0][0], a=out["a"][0][0], alpha=out["alpha"][0][0])


def frame_pva_batch(model: ChainModel, Q, dQ, ddQ) -> dict:
    """Batched frame quantities; returns arrays keyed like FramePVA fields."""
    Q = model._check_q(Q)
    dQ = model._check_q(dQ)
    ddQ = model._check_q(ddQ)
    out = _chain_pass(model, Q, dQ, ddQ)
    return {k: v[0] for k, v in out.items()}


def frame_pva_jets(model: ChainModel, Q, dQ, ddQ, m: int, dirs) -> dict:
    """Batched frame quantities with forward-mode dots.

    m is the total number of seeded directions, dirs = (i_q, i_dq, i_ddq)
    the direction offsets of the three input blocks (None to skip a block).
    """
    Q = model._check_q(Q)
    dQ = model._check_q(dQ)
    ddQ = model._check_q(ddQ)
    return _chain_pass(model, Q, dQ, ddQ, m=m, dirs=dirs)


def pose_jets(model: ChainModel, q) -> tuple:
    """Position and rotation jets with respect to q alone, single sample."""
    Q = model._check_q(q)
    n = model.n_dof
    out = _chain_pass(model, Q, np.zeros_like(Q), np.zeros_like(Q),
                      m=n, dirs=(0, None, None))
    return out["p"], out["R"]


# --- orientation error (rotation log map) ---------------------------------

_SERIES_CUT = 1e-4


def _log_coeff(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """g(c) = phi / (2 sin phi) and g'(c), with c = cos phi, series near c=1."""
    c = np.clip(c, -1.0, 1.0)
    eps = 1.0 - c
    small = eps < _SERIES_CUT
    # series: g = 1/2 + eps/6 + eps^2/15 + eps^3/35
    g_ser = 0.5 + eps / 6.0 + eps**2 / 15.0 + eps**3 / 35.0
    gp_ser = -(1.0 / 6.0 + 2.0 * eps / 15.0 + 3.0 * eps**2 / 35.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.arccos(c)
        s = np.sqrt(np.maximum(1.0 - c * c, 1e-300))
        g_dir = phi / (2.0 * s)
        gp_dir = (c * phi - s) / (2.0 * s**3)
    g = np.where(small, g_ser, g_dir)
    gp = np.where(small, gp_ser, gp_dir)
    return g, gp


def orientation_error(R_a: np.ndarray, R_b: np.ndarray) -> np.ndarray:
    """Axis-angle vector of R_a relative to R_b, expressed in the base frame.

    Zero iff the rotations coincide; the norm is the geodesic angle.  For
    antipodal rotations (angle pi) an arbitrary valid axis is returned.
    """
    R_a = _check_rotation(R_a, "R_a")
    R_b = _check_rotation(R_b, "R_b")
    R = R_a @ R_b.T
    c = (np.trace(R) - 1.0) / 2.0
    c = min(1.0, max(-1.0, c))
    vee = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if c <= -1.0 + 1e-8:
        # angle near pi: extract the axis from the symmetric part
        phi = math.acos(c)
        Bm = (R + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(Bm)))
        axis = Bm[:, k]
        nrm = np.linalg.norm(axis)
        if nrm < 1e-12:
            raise ValueError("degenerate rotation matrix in orientation_error")
        axis = axis / nrm
        # fix the sign so the skew part (if any) agrees
        if np.dot(axis, vee) < 0:
            axis = -axis
        return phi * axis
    g, _ = _log_coeff(np.array([c]))
    return g[0] * vee


def so3_log_jet(Rjet) -> tuple:
    """Log map applied to a batched rotation jet; valid away from angle pi."""
    Rv, Rd = Rjet
    c = (np.einsum("bii->b", Rv) - 1.0) / 2.0
    if np.any(c <= -1.0 + 1e-6):
        raise ValueError("rotation angle too close to pi for the log-map jet")
    g, gp = _log_coeff(c)
    vee = np.stack([Rv[:, 2, 1] - Rv[:, 1, 2],
                    Rv[:, 0, 2] - Rv[:, 2, 0],
                    Rv[:, 1, 0] - Rv[:, 0, 1]], axis=-1)
    e = g[:, None] * vee
    if Rd is None:
        return e, None
    dc = np.einsum("bmii->bm", Rd) / 2.0
    dvee = np.stack([Rd[:, :, 2, 1] - Rd[:, :, 1, 2],
                     Rd[:, :, 0, 2] - Rd[:, :, 2, 0],
                     Rd[:, :, 1, 0] - Rd[:, :, 0, 1]], axis=-1)
    de = gp[:, None, None] * dc[..., None] * vee[:, None, :] + g[:, None, None] * dvee
    return e, de


# --- chain description files ----------------------------------------------

_JOINT_KEYS = {"type", "alpha", "a", "d", "offset",
               "q_min", "q_max", "dq_max", "ddq_max", "jerk_max"}
_TOP_KEYS = {"schema", "name", "base", "tool", "joints", "configurations"}
_FRAME_KEYS = {"xyz", "rpy"}

_CHAIN_SCHEMA = "flexbeam/chain-v1"


def _require_keys(mapping: dict, allowed: set, where: str):
    if not isinstance(mapping, dict):
        raise ChainFileError(f"{where} must be a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise ChainFileError(f"unknown keys in {where}: {sorted(unknown)}")


def _parse_frame(node, where: str) -> tuple[np.ndarray, np.ndarray]:
    if node is None:
        return np.zeros(3), np.eye(3)
    _require_keys(node, _FRAME_KEYS, where)
    xyz = np.asarray(node.get("xyz", [0.0, 0.0, 0.0]), dtype=float)
    rpy = np.asarray(node.get("rpy", [0.0, 0.0, 0.0]), dtype=float)
    if xyz.shape != (3,) or rpy.shape != (3,):
        raise ChainFileError(f"{where}: xyz and rpy must have three entries")
    return xyz, rpy_matrix(*rpy)


def chain_from_dict(doc: dict, name_hint: str = "") -> ChainModel:
    _require_keys(doc, _TOP_KEYS, "chain file")
    if doc.get("schema") != _CHAIN_SCHEMA:
        raise ChainFileError(f"expected schema {_CHAIN_SCHEMA!r}, got {doc.get('schema')!r}")
    rows = doc.get("joints")
    if not isinstance(rows, list) or not rows:
        raise ChainFileError("chain file needs a non-empty joints list")
    joints = []
    for i, row in enumerate(rows):
        _require_keys(row, _JOINT_KEYS, f"joint {i}")
        kw = dict(row)
        kind = kw.pop("type", REVOLUTE)
        try:
            joints.append(DhJoint(kind=kind, **{k: float(v) for k, v in kw.items()}))
        except TypeError as exc:
            raise ChainFileError(f"joint {i}: {exc}") from exc
    base_p, base_R = _parse_frame(doc.get("base"), "base")
    tool_p, tool_R = _parse_frame(doc.get("tool"), "tool")
    return ChainModel(joints, tool_p=tool_p, tool_R=tool_R, base_p=base_p,
                      base_R=base_R, name=doc.get("name", name_hint),
                      configurations=doc.get("configurations"))


def load_chain(path) -> ChainModel:
    """Parse a chain description file.  Unknown keys are rejected."""
    with open(path, "r") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ChainFileError(f"{path}: not a mapping")
    return chain_from_dict(doc, name_hint=str(path))


def bundled_chain(name: str) -> ChainModel:
    """Load one of the chain files shipped with the package."""
    ref = resources.files("flexbeam").joinpath(f"data/chains/{name}.yaml")
    if not ref.is_file():
        raise KeyError(f"no bundled chain named {name!r}")
    with resources.as_file(ref) as path:
        return load_chain(path)
