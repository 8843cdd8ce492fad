"""UAV/UGV formation-tracking simulator, safety net, and imitation pipeline."""

from .camera import CameraModel, enclosing_circle, project_to_image
from .config import ScenarioConfig, load_scenario
from .dataset import DemoSet, Sample, SubTaskSpec, f_action, f_state, fuse, split
from .episode import Trajectory, run_episode
from .evaluator import MetricsReport, SetupId, distance_error, radius_error
from .manoeuvre import ManoeuvreKind, ManoeuvreSpec, build_manoeuvre, formation_positions
from .network import MLPModel, TrainConfig, forward, load_model, save_model, train
from .observation import Observation, build_observation
from .safety import Obstacle, OverrideCommand, SafetyConfig, Verdict, arbitrate, check_unsafe
from .world import Action, DynamicsParams, WorldState, step_world

__version__ = "0.1.0"
