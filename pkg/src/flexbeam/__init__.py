"""flexbeam: vibration-free point-to-point planning for arms carrying flexible beams.

The package models the beam as a damped pendulum attached to the robot tool
frame, estimates its parameters from ring-down data or beam theory, and
plans joint trajectories that arrive with the pendulum at rest.  A zero
vibration input-shaping baseline and a rollout simulator with a residual
vibration metric round out the toolkit.
"""

__version__ = "0.1.0"

from .beam_model import (  # noqa: F401
    BeamSpec,
    PendulumParams,
    SetupState,
    equilibrium_theta,
    lump_analytical,
    linearized_frequency,
    pendulum_accel,
    setup_dynamics,
    specialize_orientation,
)
from .kinematics import (  # noqa: F401
    ChainModel,
    DhJoint,
    FramePVA,
    bundled_chain,
    forward_kinematics,
    frame_pva,
    load_chain,
    orientation_error,
)
