"""Online friction estimation and contact-coefficient grasp control for tactile grippers."""
from .contact import (
    ContactPatch,
    FlatPlane,
    HeightField,
    MerForces,
    SlipState,
    Sphere,
    TactileElement,
    contact_coefficient,
    decompose_force,
    mer_forces,
    slip_state,
    surface_normal,
)
from .controller import ControllerConfig, GraspPhase, GraspState, GripperCommand, PhaseSchedule
from .estimator import MerTransformer, ParticleFrictionEstimator
from .particle_filter import EstimatorConfig, FrictionEstimate, Observation, ParticleSet
from .scenario import load_preset, load_scenario
from .simulator import Scenario, run_episode
from .telemetry import EpisodeReport, TelemetryRecord, Verdict

__version__ = "0.1.0"
