"""Task definitions: start pose, goal pose, travel times, planner options.

A task file names a chain and a beam (bundled name or path), a start
configuration, a Cartesian goal (displacement of the tool frame plus an
orientation rule), and two or three travel times.  When only two are given
the third is derived as the shortest time plus half the damped swing period
at the start pose - exactly the stretch a two-impulse shaper adds - so the
shaped baseline and the slowest planned motion are directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import beam_model as bm
from .beam_model import PendulumParams
from .kinematics import ChainModel, forward_kinematics, load_chain, rot_z, rpy_matrix
from .transcription import OcpSpec, default_state_weights

__all__ = [
    "TaskFileError",
    "TaskSpec",
    "bundled_task",
    "derive_travel_times",
    "load_task",
]

_TASK_SCHEMA = "flexbeam/task-v1"
_TOP_KEYS = {"schema", "name", "chain", "beam", "start", "goal",
             "travel_times", "ocp", "excitation", "seed"}
_START_KEYS = {"configuration", "q"}
_GOAL_KEYS = {"displacement", "orientation"}
_ORIENT_KEYS = {"rpy", "pattern", "yaw"}
_OCP_KEYS = {"N", "w_q", "w_theta", "w_dq", "w_dtheta", "w_u", "rho_jerk", "norm"}
_EXC_KEYS = {"joint", "amplitude", "pulse_time"}


class TaskFileError(ValueError):
    """Malformed or inconsistent task description."""


def _require_keys(mapping: dict, allowed: set, where: str) -> None:
    if not isinstance(mapping, dict):
        raise TaskFileError(f"{where}: expected a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise TaskFileError(f"{where}: unknown keys {sorted(unknown)}")


@dataclass
class TaskSpec:
    """A fully resolved task: models loaded, poses computed."""

    name: str
    chain: ChainModel
    params: PendulumParams
    q0: np.ndarray
    start_name: str
    displacement: np.ndarray | None
    R_target: np.ndarray | None
    travel_times: tuple[float, ...]
    ocp_options: dict = field(default_factory=dict)
    excitation: dict = field(default_factory=dict)
    seed: int = 0
    chain_ref: str = ""
    beam_ref: str = ""

    @property
    def has_goal(self) -> bool:
        return self.displacement is not None

    def p_target(self) -> np.ndarray:
        p0, _ = forward_kinematics(self.chain, self.q0)
        return p0 + self.displacement

    def state_weights(self) -> np.ndarray:
        n = self.chain.n_dof
        opt = self.ocp_options
        w = default_state_weights(n)
        if "w_q" in opt:
            w[:n] = opt["w_q"]
        if "w_theta" in opt:
            w[n] = opt["w_theta"]
        if "w_dq" in opt:
            w[n + 1 : 2 * n + 1] = opt["w_dq"]
        if "w_dtheta" in opt:
            w[2 * n + 1] = opt["w_dtheta"]
        return w

    def ocp_spec(self, tf: float) -> OcpSpec:
        if not self.has_goal:
            raise TaskFileError(f"task {self.name!r} has no goal section")
        n = self.chain.n_dof
        opt = self.ocp_options
        return OcpSpec(
            chain=self.chain,
            params=self.params,
            q0=self.q0,
            p_target=self.p_target(),
            R_target=self.R_target,
            tf=tf,
            N=int(opt.get("N", 100)),
            w_x=self.state_weights(),
            w_u=np.full(n, float(opt.get("w_u", 1e-3))),
            rho_jerk=float(opt.get("rho_jerk", 1e-3)),
            norm=opt.get("norm", "quadratic"),
        )


def derive_travel_times(task: TaskSpec) -> tuple[float, float, float]:
    """Return (t_f1, t_f2, t_f3), deriving the third when absent.

    t_f3 = t_f1 + T_d/2 rounded to the millisecond, with T_d the damped
    period of the linearized mode at the start pose.
    """
    times = task.travel_times
    if len(times) == 3:
        t1, t2, t3 = times
    elif len(times) == 2:
        t1, t2 = times
        _, R0 = forward_kinematics(task.chain, task.q0)
        w_eff, zeta_eff, _ = bm.linearized_mode(task.params, R0)
        Td = 2.0 * math.pi / (w_eff * math.sqrt(1.0 - zeta_eff**2))
        t3 = round((t1 + 0.5 * Td) * 1000.0) / 1000.0
    else:
        raise TaskFileError(
            f"task {task.name!r}: need two or three travel times, got {len(times)}"
        )
    if not (0 < t1 < t2 < t3):
        raise TaskFileError(
            f"task {task.name!r}: travel times must increase, got {t1}, {t2}, {t3}"
        )
    return t1, t2, t3


def _resolve_chain(ref: str, base_dir: Path | None) -> ChainModel:
    if ref.endswith((".yaml", ".yml")) or "/" in ref:
        path = Path(ref)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return load_chain(path)
    from .kinematics import bundled_chain

    return bundled_chain(ref)


def _resolve_beam(ref: str, base_dir: Path | None) -> PendulumParams:
    if ref.endswith((".yaml", ".yml")) or "/" in ref:
        path = Path(ref)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return bm.load_beam_params(path)
    return bm.bundled_beam(ref)


def _parse_orientation(node, chain: ChainModel, q0: np.ndarray, where: str) -> np.ndarray:
    if node == "same" or node is None:
        _, R0 = forward_kinematics(chain, q0)
        return R0
    _require_keys(node, _ORIENT_KEYS, where)
    if "rpy" in node:
        if "pattern" in node or "yaw" in node:
            raise TaskFileError(f"{where}: rpy excludes pattern/yaw")
        r, p, y = (float(v) for v in node["rpy"])
        return rpy_matrix(r, p, y)
    if "pattern" not in node:
        raise TaskFileError(f"{where}: need 'rpy' or 'pattern'")
    R = bm.orientation_rotation(str(node["pattern"]))
    yaw = float(node.get("yaw", 0.0))
    return rot_z(yaw) @ R


def task_from_dict(doc: dict, name_hint: str = "", base_dir: Path | None = None) -> TaskSpec:
    """Build a TaskSpec from a parsed task mapping (strict keys)."""
    _require_keys(doc, _TOP_KEYS, "task")
    if doc.get("schema") != _TASK_SCHEMA:
        raise TaskFileError(
            f"task: expected schema {_TASK_SCHEMA!r}, got {doc.get('schema')!r}"
        )
    name = str(doc.get("name", name_hint or "task"))
    for key in ("chain", "beam", "start"):
        if key not in doc:
            raise TaskFileError(f"task {name!r}: missing {key!r}")
    chain = _resolve_chain(str(doc["chain"]), base_dir)
    params = _resolve_beam(str(doc["beam"]), base_dir)

    start = doc["start"]
    _require_keys(start, _START_KEYS, f"task {name!r}: start")
    if ("configuration" in start) == ("q" in start):
        raise TaskFileError(
            f"task {name!r}: start needs exactly one of 'configuration' or 'q'"
        )
    if "configuration" in start:
        start_name = str(start["configuration"])
        q0 = chain.named_configuration(start_name)
    else:
        start_name = "explicit"
        q0 = np.asarray([float(v) for v in start["q"]], dtype=float)
        if q0.shape != (chain.n_dof,):
            raise TaskFileError(
                f"task {name!r}: start q has {q0.size} entries, chain has {chain.n_dof}"
            )

    displacement = None
    R_target = None
    if "goal" in doc:
        goal = doc["goal"]
        _require_keys(goal, _GOAL_KEYS, f"task {name!r}: goal")
        if "displacement" not in goal:
            raise TaskFileError(f"task {name!r}: goal needs a displacement")
        displacement = np.asarray([float(v) for v in goal["displacement"]], dtype=float)
        if displacement.shape != (3,):
            raise TaskFileError(f"task {name!r}: displacement must have 3 entries")
        R_target = _parse_orientation(goal.get("orientation"), chain, q0,
                                      f"task {name!r}: goal orientation")

    times = doc.get("travel_times", [])
    travel_times = tuple(float(v) for v in times)
    if travel_times and len(travel_times) not in (2, 3):
        raise TaskFileError(
            f"task {name!r}: travel_times needs 2 or 3 entries, got {len(travel_times)}"
        )

    ocp_options = dict(doc.get("ocp", {}))
    _require_keys(ocp_options, _OCP_KEYS, f"task {name!r}: ocp")
    if "norm" in ocp_options and ocp_options["norm"] not in ("quadratic", "l2"):
        raise TaskFileError(f"task {name!r}: ocp norm must be 'quadratic' or 'l2'")

    excitation = dict(doc.get("excitation", {}))
    _require_keys(excitation, _EXC_KEYS, f"task {name!r}: excitation")

    seed = int(doc.get("seed", 0))
    return TaskSpec(
        name=name,
        chain=chain,
        params=params,
        q0=q0,
        start_name=start_name,
        displacement=displacement,
        R_target=R_target,
        travel_times=travel_times,
        ocp_options=ocp_options,
        excitation=excitation,
        seed=seed,
        chain_ref=str(doc["chain"]),
        beam_ref=str(doc["beam"]),
    )


def load_task(path) -> TaskSpec:
    """Load a task file; relative chain/beam paths resolve beside it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TaskFileError(f"cannot read task file {path}: {exc}") from exc
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise TaskFileError(f"{path}: task file must hold a mapping")
    return task_from_dict(doc, name_hint=path.stem, base_dir=path.parent)


def bundled_task(name: str) -> TaskSpec:
    """Load one of the packaged tasks by name (e.g. 'T1')."""
    root = resources.files("flexbeam") / "data" / "tasks" / f"{name}.yaml"
    try:
        text = root.read_text()
    except (FileNotFoundError, OSError) as exc:
        raise TaskFileError(f"no bundled task named {name!r}") from exc
    doc = yaml.safe_load(text)
    return task_from_dict(doc, name_hint=name)
