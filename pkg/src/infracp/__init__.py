"""Multi-agent collaborative-perception simulator and experiment harness.

LiDAR ray casting over procedural traffic scenes, noisy sharing between
vehicle and infrastructure agents, BEV fusion with a geometric detector, and
AP evaluation of V2V, V2X and I2X collaboration.
"""

from __future__ import annotations

from .channel import ChannelConfig, Message, NoiseSetting, compress, perturb_pose, share
from .evaluation import EvalReport, MatchResult, average_precision, match, report
from .fusion import (BevGrid, DetectionRange, FusionMethod, FusionVariant, RangeShape, detect, extract, fuse,
                     late_fuse)
from .geometry import OrientedBox3D, Pose, Ray, bev_iou, nms, ray_box_intersect, transform_box, transform_to_frame
from .harness import CPMode, ConfigError, ExperimentConfig, run_experiment, select_agents_for
from .kernels import BACKEND
from .scene import AgentKind, AgentSpec, Archetype, Scene, ScenarioSpec, generate, ground_truth
from .sensing import LidarConfig, PointCloud, raycast

__version__ = "0.1.0"

__all__ = [
    "AgentKind", "AgentSpec", "Archetype", "BACKEND", "BevGrid", "CPMode", "ChannelConfig", "ConfigError",
    "DetectionRange", "EvalReport", "ExperimentConfig", "FusionMethod", "FusionVariant", "LidarConfig",
    "MatchResult", "Message", "NoiseSetting", "OrientedBox3D", "PointCloud", "Pose", "RangeShape", "Ray",
    "Scene", "ScenarioSpec", "average_precision", "bev_iou", "compress", "detect", "extract", "fuse",
    "generate", "ground_truth", "late_fuse", "match", "nms", "perturb_pose", "ray_box_intersect", "raycast",
    "report", "run_experiment", "select_agents_for", "share", "transform_box", "transform_to_frame",
]
