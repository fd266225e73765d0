"""The voting network: per-window class distribution plus a center vote.

Four stages of kernel-3 zero-padded convolutions (3+3+3+2 layers), each
convolution followed by batch-norm and leaky ReLU; stages 1-3 end in
max-pool(2) and dropout; stage 4 ends in global average pooling and a
single fully-connected layer emitting 4 class logits and 2 vote values.

Temporal input handling:
  none  - single current frame, one input channel.
  early - the T+1 frames enter as input channels of the first convolution.
  late  - stages 1-2 run per frame with tied weights; the per-frame outputs
          are summed and fed to stage 3, leaving the parameter count equal
          to the single-frame model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import (batchnorm_backward, batchnorm_forward, conv1d_backward,
                     conv1d_forward, dropout_backward, dropout_forward,
                     global_avg_pool_backward, global_avg_pool_forward,
                     leaky_relu_backward, leaky_relu_forward, linear_backward,
                     linear_forward, maxpool2_backward, maxpool2_forward,
                     softmax)

FUSION_MODES = ("none", "early", "late")

# (stage name, conv layers, followed by pool+dropout)
STAGES = (("s1", 3, True), ("s2", 3, True), ("s3", 3, True), ("s4", 2, False))


@dataclass(frozen=True)
class ModelConfig:
    stage_channels: tuple[int, int, int, int] = (64, 64, 128, 128)
    dropout_rate: float = 0.25
    leak: float = 0.1
    fusion: str = "late"
    num_classes: int = 4
    vote_dims: int = 2
    input_points: int = 48
    input_frames: int = 6
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "stage_channels", tuple(int(c) for c in self.stage_channels))
        if len(self.stage_channels) != 4 or any(c < 1 for c in self.stage_channels):
            raise ValueError("stage_channels must be 4 positive integers")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.fusion not in FUSION_MODES:
            raise ValueError(f"fusion must be one of {FUSION_MODES}")
        if self.num_classes != 4:
            raise ValueError("the detector always predicts background plus 3 foreground classes")
        if self.vote_dims != 2:
            raise ValueError("votes are 2-D offsets")
        if self.input_points < 4:
            raise ValueError("input_points must be >= 4")
        if self.input_frames < 1:
            raise ValueError("input_frames must be >= 1")
        if self.fusion == "none" and self.input_frames != 1:
            raise ValueError("fusion 'none' takes exactly one input frame")


def conv_layer_plan(config: ModelConfig):
    """(name, in_channels, out_channels) for every convolution layer."""
    c1, c2, c3, c4 = config.stage_channels
    first_in = config.input_frames if config.fusion == "early" else 1
    outs = {"s1": c1, "s2": c2, "s3": c3, "s4": c4}
    plan = []
    prev = first_in
    for stage, n_convs, _ in STAGES:
        for i in range(n_convs):
            plan.append((f"{stage}c{i + 1}", prev, outs[stage]))
            prev = outs[stage]
    return plan


class ModelParams:
    """Named weight, bias, and batch-norm tensors of one network."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        self.tensors = dict(tensors)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray):
        self.tensors[name] = value

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    @property
    def names(self):
        return list(self.tensors)

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    def trainable_names(self):
        return [n for n in self.tensors
                if not n.endswith(("running_mean", "running_var"))]

    @property
    def parameter_count(self) -> int:
        return int(sum(self.tensors[n].size for n in self.trainable_names()))

    def copy(self) -> "ModelParams":
        return ModelParams({n: v.copy() for n, v in self.tensors.items()})

    def astype(self, dtype) -> "ModelParams":
        return ModelParams({n: v.astype(dtype) for n, v in self.tensors.items()})

    def allfinite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.tensors.values())


def init_params(config: ModelConfig, rng: np.random.Generator,
                dtype=np.float32) -> ModelParams:
    """He fan-in initialization; batch-norm starts at identity."""
    tensors = {}
    for name, c_in, c_out in conv_layer_plan(config):
        std = np.sqrt(2.0 / (c_in * 3))
        tensors[f"{name}.w"] = (rng.standard_normal((c_out, c_in, 3)) * std).astype(dtype)
        tensors[f"{name}.b"] = np.zeros(c_out, dtype=dtype)
        tensors[f"{name}.gamma"] = np.ones(c_out, dtype=dtype)
        tensors[f"{name}.beta"] = np.zeros(c_out, dtype=dtype)
        tensors[f"{name}.running_mean"] = np.zeros(c_out, dtype=dtype)
        tensors[f"{name}.running_var"] = np.ones(c_out, dtype=dtype)
    c4 = config.stage_channels[3]
    n_out = config.num_classes + config.vote_dims
    std = np.sqrt(2.0 / c4)
    tensors["fc.w"] = (rng.standard_normal((n_out, c4)) * std).astype(dtype)
    tensors["fc.b"] = np.zeros(n_out, dtype=dtype)
    return ModelParams(tensors)


def _block_forward(h, name, params, config, train, caches):
    h, c_conv = conv1d_forward(h, params[f"{name}.w"], params[f"{name}.b"])
    h, c_bn = batchnorm_forward(h, params[f"{name}.gamma"], params[f"{name}.beta"],
                                params[f"{name}.running_mean"], params[f"{name}.running_var"],
                                train, config.bn_momentum, config.bn_eps)
    h, c_relu = leaky_relu_forward(h, config.leak)
    if caches is not None:
        caches[name] = (c_conv, c_bn, c_relu)
    return h


def _stage_forward(h, stage, n_convs, pooled, params, config, train, rng, caches):
    for i in range(n_convs):
        h = _block_forward(h, f"{stage}c{i + 1}", params, config, train, caches)
    if pooled:
        h, c_pool = maxpool2_forward(h)
        h, c_drop = dropout_forward(h, config.dropout_rate, rng, train)
        if caches is not None:
            caches[f"{stage}.pool"] = c_pool
            caches[f"{stage}.drop"] = c_drop
    return h


def forward(params: ModelParams, config: ModelConfig, batch: np.ndarray,
            train_mode: bool = False, rng: np.random.Generator | None = None):
    """Run the network on a batch of temporal cutouts.

    batch has shape (B, input_frames, input_points), frames current-first.
    Returns (class_probs, votes, cache); cache is None unless train_mode.
    In train mode batch statistics are used and running statistics updated;
    dropout requires rng.
    """
    x = np.ascontiguousarray(batch, dtype=params.dtype)
    if x.ndim != 3 or x.shape[1] != config.input_frames or x.shape[2] != config.input_points:
        raise ValueError(f"expected batch shaped (B, {config.input_frames}, "
                         f"{config.input_points}), got {x.shape}")
    if train_mode and config.dropout_rate > 0.0 and rng is None:
        raise ValueError("train_mode with dropout needs an rng")
    B, F, P = x.shape
    caches: dict | None = {} if train_mode else None

    late = config.fusion == "late"
    if config.fusion == "early":
        h = x
    elif late:
        h = x.reshape(B * F, 1, P)
    else:
        h = x  # fusion "none": F == 1, a single input channel

    h = _stage_forward(h, "s1", 3, True, params, config, train_mode, rng, caches)
    h = _stage_forward(h, "s2", 3, True, params, config, train_mode, rng, caches)
    if late:
        h = h.reshape(B, F, h.shape[1], h.shape[2]).sum(axis=1)
    h = _stage_forward(h, "s3", 3, True, params, config, train_mode, rng, caches)
    h = _stage_forward(h, "s4", 2, False, params, config, train_mode, rng, caches)

    feat, gap_len = global_avg_pool_forward(h)
    out, c_fc = linear_forward(feat, params["fc.w"], params["fc.b"])
    if not np.isfinite(out).all():
        raise FloatingPointError("non-finite network outputs (training diverged?)")
    probs = softmax(out[:, :config.num_classes])
    votes = out[:, config.num_classes:]
    if caches is not None:
        caches["gap_len"] = gap_len
        caches["fc"] = c_fc
        caches["fold"] = (B, F) if late else None
    return probs, votes, caches


def _block_backward(dh, name, caches, grads):
    c_conv, c_bn, c_relu = caches[name]
    dh = leaky_relu_backward(dh, c_relu)
    dh, dgamma, dbeta = batchnorm_backward(dh, c_bn)
    dh, dw, db = conv1d_backward(dh, c_conv)
    grads[f"{name}.w"] = dw
    grads[f"{name}.b"] = db
    grads[f"{name}.gamma"] = dgamma
    grads[f"{name}.beta"] = dbeta
    return dh


def _stage_backward(dh, stage, n_convs, pooled, caches, grads):
    if pooled:
        dh = dropout_backward(dh, caches[f"{stage}.drop"])
        dh = maxpool2_backward(dh, caches[f"{stage}.pool"])
    for i in reversed(range(n_convs)):
        dh = _block_backward(dh, f"{stage}c{i + 1}", caches, grads)
    return dh


def backward(params: ModelParams, config: ModelConfig, caches: dict,
             dlogits: np.ndarray, dvotes: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the loss for every trainable tensor.

    dlogits is the loss gradient w.r.t. the pre-softmax class logits and
    dvotes w.r.t. the raw vote outputs, both shaped like the corresponding
    forward outputs. Requires the cache of a train_mode forward pass.
    """
    if caches is None:
        raise ValueError("backward requires the cache returned by a train_mode forward pass")
    grads: dict[str, np.ndarray] = {}
    dtype = params.dtype
    dout = np.concatenate([dlogits, dvotes], axis=1).astype(dtype)
    dfeat, dw_fc, db_fc = linear_backward(dout, caches["fc"], params["fc.w"])
    grads["fc.w"] = dw_fc
    grads["fc.b"] = db_fc
    dh = global_avg_pool_backward(dfeat, caches["gap_len"])

    dh = _stage_backward(dh, "s4", 2, False, caches, grads)
    dh = _stage_backward(dh, "s3", 3, True, caches, grads)
    if caches["fold"] is not None:
        B, F = caches["fold"]
        dh = np.repeat(dh[:, None], F, axis=1).reshape(B * F, dh.shape[1], dh.shape[2])
    dh = _stage_backward(dh, "s2", 3, True, caches, grads)
    _stage_backward(dh, "s1", 3, True, caches, grads)
    return grads


def detection_loss(probs: np.ndarray, votes: np.ndarray, labels: np.ndarray,
                   vote_targets: np.ndarray, has_vote: np.ndarray,
                   vote_weight: float = 1.0):
    """Classification plus vote-regression loss and its output gradients.

    Mean cross-entropy over all points plus vote_weight times the mean
    squared vote error over foreground points (points with has_vote). The
    returned gradients are exact: dlogits w.r.t. the pre-softmax logits,
    dvotes w.r.t. the raw vote outputs.
    """
    B = probs.shape[0]
    if B == 0:
        raise ValueError("empty batch")
    labels = np.asarray(labels)
    idx = np.arange(B)
    picked = np.clip(probs[idx, labels], 1e-30, None)
    ce = float(-np.log(picked).mean())
    onehot = np.zeros_like(probs)
    onehot[idx, labels] = 1.0
    dlogits = (probs - onehot) / B

    fg = np.asarray(has_vote, dtype=bool)
    n_fg = int(fg.sum())
    if n_fg:
        err = votes - np.asarray(vote_targets, dtype=votes.dtype)
        err[~fg] = 0.0
        reg = vote_weight * float((err ** 2).sum()) / n_fg
        dvotes = (2.0 * vote_weight / n_fg) * err
    else:
        reg = 0.0
        dvotes = np.zeros_like(votes)
    return ce + reg, dlogits, dvotes


@dataclass(frozen=True)
class PointPrediction:
    """Network output for one beam: class distribution and beam-frame vote."""

    class_probs: np.ndarray
    vote: tuple[float, float]

    @classmethod
    def from_arrays(cls, probs_row, vote_row) -> "PointPrediction":
        return cls(np.asarray(probs_row, dtype=np.float64),
                   (float(vote_row[0]), float(vote_row[1])))
