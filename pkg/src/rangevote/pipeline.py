"""End-to-end detection: preprocessing, network, voting for whole frames."""
from __future__ import annotations

import numpy as np

from .core import Detection, LaserScan, OdometryFrame, ScanGeometry
from .data import ScanSequence, temporal_window
from .net import ModelConfig, ModelParams, forward, load_params
from .preproc import PreprocConfig, cutout_batch
from .vote import VotingConfig, cast_and_smooth, collect_votes, find_maxima, joint_vote, split_vote

VOTING_MODES = ("joint", "split")


class Detector:
    """Frozen-weight detector over temporal scan windows.

    forward runs in evaluation mode (batch-norm running statistics, no
    dropout), so detection is deterministic and safe to share across
    concurrent readers.
    """

    def __init__(self, params: ModelParams, model_config: ModelConfig,
                 preproc_config: PreprocConfig | None = None,
                 voting_config: VotingConfig | None = None,
                 geometry: ScanGeometry | None = None,
                 voting_mode: str = "joint"):
        preproc_config = preproc_config or PreprocConfig(
            time_window=model_config.input_frames - 1,
            num_cutout_points=model_config.input_points)
        if model_config.input_frames != preproc_config.time_window + 1:
            raise ValueError("model input_frames must equal preproc time_window + 1")
        if model_config.input_points != preproc_config.num_cutout_points:
            raise ValueError("model input_points must equal preproc num_cutout_points")
        if voting_mode not in VOTING_MODES:
            raise ValueError(f"voting_mode must be one of {VOTING_MODES}")
        self.params = params
        self.model_config = model_config
        self.preproc_config = preproc_config
        self.voting_config = voting_config or VotingConfig()
        self.geometry = geometry or ScanGeometry()
        self.voting_mode = voting_mode

    @classmethod
    def from_weights(cls, path, preproc_config=None, voting_config=None,
                     geometry=None, voting_mode="joint") -> "Detector":
        params, model_config = load_params(path)
        return cls(params, model_config, preproc_config, voting_config,
                   geometry, voting_mode)

    def predict_frame(self, scans: list[LaserScan],
                      odometry: list[OdometryFrame] | None = None):
        """Per-beam class probabilities and beam-frame votes for one window."""
        beams = np.arange(self.geometry.num_beams)
        batch = cutout_batch(scans, odometry, beams, self.preproc_config, self.geometry)
        probs, votes, _ = forward(self.params, self.model_config, batch, train_mode=False)
        return probs, votes

    def detect_frame(self, scans: list[LaserScan],
                     odometry: list[OdometryFrame] | None = None) -> list[Detection]:
        """Detections for the newest scan of the window (oldest first)."""
        probs, votes = self.predict_frame(scans, odometry)
        if self.voting_mode == "split":
            return split_vote(probs, votes, scans[-1], self.geometry, self.voting_config)
        vs = collect_votes(probs, votes, scans[-1], self.geometry, self.voting_config)
        grid = cast_and_smooth(vs, self.voting_config)
        peaks, _ = find_maxima(grid, self.voting_config)
        return joint_vote(vs, peaks, self.voting_config)

    def detect_sequence(self, sequence: ScanSequence, annotated_only: bool = False,
                        progress=None) -> dict[int, list[Detection]]:
        """Detections per seq, in seq order."""
        seqs = sequence.annotated_seqs if annotated_only else [s.seq for s in sequence.scans]
        out: dict[int, list[Detection]] = {}
        for n, seq in enumerate(seqs):
            scans, odom = temporal_window(sequence, seq, self.preproc_config.time_window)
            out[seq] = self.detect_frame(scans, odom)
            if progress is not None:
                progress(n + 1, len(seqs))
        return out
