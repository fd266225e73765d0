"""People and mobility-aid detection in 2D laser range data.

Pipeline: depth windows around every beam (stacked over a short temporal
window, rotation-corrected via odometry) feed a small 1D convolutional
network that classifies each beam and votes for its object center; votes
accumulate in a smoothed grid whose maxima, together with their assigned
votes, become continuous-coordinate multi-class detections.
"""
from .core import (Annotation, ClassId, Detection, FOREGROUND_CLASSES, LaserScan,
                   OdometryFrame, ScanGeometry, cart_to_polar, normalize_angle,
                   polar_to_cart)
from .preproc import (Cutout, CutoutAnchor, PreprocConfig, TemporalCutout,
                      build_temporal_cutout, cut, cutout_batch, make_training_targets,
                      opening_angle)
from .net import (ModelConfig, ModelParams, TrainConfig, forward, init_params,
                  load_params, save_params, train)
from .vote import (VoteGrid, VoteSet, VotingConfig, cast_and_smooth, collect_votes,
                   find_maxima, joint_vote, read_detections, split_vote,
                   write_detections)
from .evaluation import (MatchResult, PrCurve, curve_summaries, distance_histogram,
                         match_frame, pr_curve)
from .data import (ScanSequence, load_sequence, load_sequence_auto, temporal_window)
from .sim import Agent, Scene, Trajectory, default_scene, generate_dataset, render_scan
from .pipeline import Detector
from .config import RunConfig

__version__ = "0.1.0"
