from .rig import (
    MENTALIS_SENSOR,
    ZONES,
    Anchor,
    BlendshapeRig,
    DegenerateAnchorError,
    default_rig,
    load_rig,
    save_rig,
)
from .simulate import (
    MeshTrajectory,
    NoiseConfig,
    boundary_mask,
    evaluate_mesh,
    neutral_profile,
    random_head_motion,
    simulate_acceleration,
    simulate_accelerations,
    simulate_orientation,
    simulate_sequence,
    smile_clip,
    trajectory_from_weights,
)
from .weights import generate_synthetic_weights, load_weights, save_weights

__all__ = [
    "MENTALIS_SENSOR",
    "ZONES",
    "Anchor",
    "BlendshapeRig",
    "DegenerateAnchorError",
    "MeshTrajectory",
    "NoiseConfig",
    "boundary_mask",
    "default_rig",
    "evaluate_mesh",
    "generate_synthetic_weights",
    "load_rig",
    "load_weights",
    "neutral_profile",
    "random_head_motion",
    "save_rig",
    "save_weights",
    "simulate_acceleration",
    "simulate_accelerations",
    "simulate_orientation",
    "simulate_sequence",
    "smile_clip",
    "trajectory_from_weights",
]
