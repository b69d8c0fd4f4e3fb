"""Wearable RGB-D travel aid: ground detection, walkable-direction search and 2.5-D objects."""
from .config import PipelineConfig, load_config, parse_config
from .dataset import Dataset
from .direction import Action, DirectionConfig, DirectionDecision, search_direction
from .feedback import EventKind, FeedbackEvent, FeedbackState, describe_objects, navigation_feedback
from .fusion import Detection2D, Extrinsics, FusedObject, FusionConfig, fuse_detections
from .geometry import (Attitude, CameraIntrinsics, DepthFrame, PointCloud, RgbFrame,
                       project_pixel, reconstruct_pointcloud)
from .ground import GroundClass, GroundConfig, GroundPlane, GroundResult, GroundState, detect_ground
from .metrics import ground_iou
from .pipeline import Navigator, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Action", "Attitude", "CameraIntrinsics", "Dataset", "DepthFrame", "Detection2D", "DirectionConfig",
    "DirectionDecision", "EventKind", "Extrinsics", "FeedbackEvent", "FeedbackState",
    "FusedObject", "FusionConfig", "GroundClass", "GroundConfig", "GroundPlane", "GroundResult",
    "GroundState", "Navigator", "PipelineConfig", "PointCloud", "RgbFrame", "describe_objects",
    "detect_ground", "fuse_detections", "ground_iou", "load_config", "navigation_feedback",
    "parse_config", "project_pixel", "reconstruct_pointcloud", "run_pipeline", "search_direction",
]
