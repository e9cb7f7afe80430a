"""Online multi-target multi-camera tracking via joint spatial-temporal clustering.

Per frame, current detections from every camera and all live tracks become
nodes of one weighted graph; a single minimum-cost multicut partitions them
into identity clusters, so cross-camera association and temporal
association happen in the same solver step.
"""

from .config import PROFILES, ConfigError, TrackerConfig, load_config, save_config
from .core import Detection, SuperBox, Track, TrackState, ema_merge
from .metrics import clear_mota, id_metrics, iou_matcher, radius_matcher
from .multicut import WeightedGraph, clusters_of, cut_cost, solve_exact, solve_heuristic
from .simulator import ScenarioSpec, generate
from .tracker import FrameResult, TrackOutput, Tracker

__version__ = "0.1.0"

__all__ = [
    "PROFILES",
    "ConfigError",
    "TrackerConfig",
    "load_config",
    "save_config",
    "Detection",
    "SuperBox",
    "Track",
    "TrackState",
    "ema_merge",
    "clear_mota",
    "id_metrics",
    "iou_matcher",
    "radius_matcher",
    "WeightedGraph",
    "clusters_of",
    "cut_cost",
    "solve_exact",
    "solve_heuristic",
    "ScenarioSpec",
    "generate",
    "FrameResult",
    "TrackOutput",
    "Tracker",
    "__version__",
]
