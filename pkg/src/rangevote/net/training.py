"""Training loop: balanced per-frame sampling, scheduled Adam updates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import ScanSequence, temporal_window
from ..preproc import PreprocConfig, cutout_batch, target_arrays
from .model import ModelConfig, ModelParams, backward, detection_loss, forward, init_params
from .optim import AdamState, adam_step, init_adam, lr_schedule


@dataclass
class TrainConfig:
    """Knobs of the training loop (not of the network architecture)."""

    epochs: int = 50
    flat_epochs: int | None = None
    base_lr: float = 1e-3
    final_lr: float = 1e-6
    vote_weight: float = 1.0
    fg_quota: int = 24
    bg_quota: int = 24
    label_radius: float = 0.35


@dataclass
class TrainState:
    """Everything the loop mutates: parameters, moments, progress, seed."""

    params: ModelParams
    adam: AdamState
    epoch: int
    rng_seed: int


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training diverged (non-finite loss) in epoch {epoch}")
        self.epoch = epoch


def _sample_beams(rng, fg_idx, bg_idx, fg_quota, bg_quota):
    parts = []
    if fg_idx.size:
        parts.append(rng.choice(fg_idx, size=fg_quota, replace=fg_idx.size < fg_quota))
    if bg_idx.size:
        parts.append(rng.choice(bg_idx, size=bg_quota, replace=bg_idx.size < bg_quota))
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def train(sequences: list[ScanSequence], preproc_config: PreprocConfig,
          model_config: ModelConfig, seed: int,
          train_config: TrainConfig | None = None, log=None):
    """Train on the annotated frames of the given sequences.

    One optimizer step per annotated frame, sampling fg_quota foreground and
    bg_quota background beams from it (with replacement when a frame has
    fewer). Deterministic for a fixed seed. Returns (params, history) where
    history holds one {"epoch", "lr", "loss"} record per epoch.
    """
    tc = train_config or TrainConfig()
    if model_config.input_frames != preproc_config.time_window + 1:
        raise ValueError("model input_frames must equal preproc time_window + 1")
    samples = [(s, seq) for s in sequences for seq in s.annotated_seqs]
    if not samples:
        raise ValueError("no annotated frames to train on")
    geometry = sequences[0].geometry
    for s in sequences[1:]:
        if s.geometry != geometry:
            raise ValueError("all training sequences must share one scan geometry")

    rng = np.random.default_rng(seed)
    params = init_params(model_config, rng)
    state = TrainState(params=params, adam=init_adam(params), epoch=0, rng_seed=seed)
    history = []
    for epoch in range(tc.epochs):
        state.epoch = epoch
        lr = lr_schedule(epoch, tc.epochs, tc.base_lr, tc.final_lr, tc.flat_epochs)
        losses = []
        for si in rng.permutation(len(samples)):
            seq_obj, seq = samples[int(si)]
            scans, odom = temporal_window(seq_obj, seq, preproc_config.time_window)
            labels, offsets, fg_mask = target_arrays(
                scans[-1], seq_obj.annotations_for_seq(seq), geometry, tc.label_radius)
            beams = _sample_beams(rng, np.flatnonzero(fg_mask), np.flatnonzero(~fg_mask),
                                  tc.fg_quota, tc.bg_quota)
            if beams.size == 0:
                continue
            batch = cutout_batch(scans, odom, beams, preproc_config, geometry)
            probs, votes, cache = forward(state.params, model_config, batch,
                                          train_mode=True, rng=rng)
            loss, dlogits, dvotes = detection_loss(probs, votes, labels[beams],
                                                   offsets[beams], fg_mask[beams],
                                                   tc.vote_weight)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            grads = backward(state.params, model_config, cache, dlogits, dvotes)
            adam_step(state.params, grads, state.adam, lr)
            losses.append(loss)
        record = {"epoch": epoch, "lr": lr, "loss": float(np.mean(losses))}
        history.append(record)
        if log is not None:
            log(record)
    return state.params, history
