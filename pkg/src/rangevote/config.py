"""Run configuration: one JSON-loadable view over all component configs."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

from .core import ScanGeometry
from .net import ModelConfig, TrainConfig
from .preproc import PreprocConfig
from .vote import VotingConfig


@dataclass
class RunConfig:
    """Everything a command needs, validated up front.

    Loadable from a JSON file with per-section objects; command-line flags
    override individual fields. Commands echo the effective configuration
    so runs are reproducible from their artifacts alone.
    """

    geometry: ScanGeometry = field(default_factory=ScanGeometry)
    preproc: PreprocConfig = field(default_factory=PreprocConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    voting: VotingConfig = field(default_factory=VotingConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval_radii: tuple[float, ...] = (0.5, 0.3)
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        self.eval_radii = tuple(float(r) for r in self.eval_radii)
        if not self.eval_radii or any(r <= 0 for r in self.eval_radii):
            raise ValueError("eval_radii must be positive")
        if self.model.input_frames != self.preproc.time_window + 1:
            raise ValueError("model.input_frames must equal preproc.time_window + 1")
        if self.model.input_points != self.preproc.num_cutout_points:
            raise ValueError("model.input_points must equal preproc.num_cutout_points")

    def to_dict(self) -> dict:
        d = {
            "geometry": dataclasses.asdict(self.geometry),
            "preproc": dataclasses.asdict(self.preproc),
            "model": dataclasses.asdict(self.model),
            "voting": dataclasses.asdict(self.voting),
            "train": dataclasses.asdict(self.train),
            "eval_radii": list(self.eval_radii),
            "seed": self.seed,
            "jobs": self.jobs,
        }
        d["model"]["stage_channels"] = list(self.model.stage_channels)
        d["voting"]["class_blur_sigmas"] = list(self.voting.class_blur_sigmas)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        def build(section_cls, key, tuple_fields=()):
            section = dict(d.get(key, {}))
            for tf in tuple_fields:
                if tf in section:
                    section[tf] = tuple(section[tf])
            return section_cls(**section)

        return cls(
            geometry=build(ScanGeometry, "geometry"),
            preproc=build(PreprocConfig, "preproc"),
            model=build(ModelConfig, "model", ("stage_channels",)),
            voting=build(VotingConfig, "voting", ("class_blur_sigmas",)),
            train=build(TrainConfig, "train"),
            eval_radii=tuple(d.get("eval_radii", (0.5, 0.3))),
            seed=int(d.get("seed", 0)),
            jobs=int(d.get("jobs", 1)),
        )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json() + "\n")


def derive_time_settings(config: RunConfig, fusion: str | None,
                         time_window: int | None) -> RunConfig:
    """Rebuild a RunConfig with a different fusion mode or window length.

    Keeps model.input_frames, preproc.time_window, and the fusion mode
    mutually consistent (fusion "none" forces a single frame).
    """
    fusion = fusion if fusion is not None else config.model.fusion
    if fusion == "none":
        time_window = 0
    elif time_window is None:
        time_window = config.preproc.time_window
    preproc = dataclasses.replace(config.preproc, time_window=time_window)
    model = dataclasses.replace(config.model, fusion=fusion,
                                input_frames=time_window + 1)
    return dataclasses.replace(config, preproc=preproc, model=model)
