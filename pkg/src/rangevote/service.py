"""HTTP detection service: load weights once, detect per request.

The batch tools (training, dataset generation, evaluation) stay in the
CLI; this service covers the long-running use, where a robot or several
clients stream scan windows to one resident model.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .core import CLASS_NAMES, FOREGROUND_CLASSES, LaserScan, OdometryFrame
from .pipeline import Detector


class ScanIn(BaseModel):
    ranges: list[float]
    timestamp: float = 0.0


class OdometryIn(BaseModel):
    x: float
    y: float
    yaw: float


class DetectRequest(BaseModel):
    """A window of scans, oldest first; the newest scan is detected on.

    Windows shorter than the model's temporal extent are padded by
    repeating the oldest frame. Odometry (one pose per scan) is required
    whenever the detector corrects for sensor rotation.
    """

    scans: list[ScanIn] = Field(min_length=1)
    odometry: list[OdometryIn] | None = None


class DetectionOut(BaseModel):
    x: float
    y: float
    confidence: float
    class_probs: dict[str, float]
    supporting_votes: int


class DetectResponse(BaseModel):
    detections: list[DetectionOut]


class ModelInfo(BaseModel):
    fusion: str
    time_window: int
    input_points: int
    stage_channels: list[int]
    parameter_count: int
    num_beams: int
    voting_mode: str


def create_app(detector: Detector) -> FastAPI:
    app = FastAPI(title="rangevote", version="0.1.0")
    geometry = detector.geometry
    window = detector.preproc_config.time_window + 1
    needs_odometry = (detector.preproc_config.odometry_mode == "rotation" and window > 1)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/model", response_model=ModelInfo)
    def model_info():
        return ModelInfo(
            fusion=detector.model_config.fusion,
            time_window=detector.preproc_config.time_window,
            input_points=detector.model_config.input_points,
            stage_channels=list(detector.model_config.stage_channels),
            parameter_count=detector.params.parameter_count,
            num_beams=geometry.num_beams,
            voting_mode=detector.voting_mode,
        )

    @app.post("/detect", response_model=DetectResponse)
    def detect(request: DetectRequest):
        for k, scan in enumerate(request.scans):
            if len(scan.ranges) != geometry.num_beams:
                raise HTTPException(status_code=400, detail=(
                    f"scan {k} has {len(scan.ranges)} ranges, "
                    f"the model expects {geometry.num_beams}"))
        if request.odometry is not None and len(request.odometry) != len(request.scans):
            raise HTTPException(status_code=400,
                                detail="odometry must have one pose per scan")
        if needs_odometry and request.odometry is None:
            raise HTTPException(status_code=400, detail=(
                "this detector corrects for sensor rotation and needs odometry"))

        scans = [LaserScan(seq=k, timestamp=s.timestamp, ranges=s.ranges)
                 for k, s in enumerate(request.scans)]
        odometry = None
        if request.odometry is not None:
            odometry = [OdometryFrame(seq=k, timestamp=scans[k].timestamp,
                                      x=o.x, y=o.y, yaw=o.yaw)
                        for k, o in enumerate(request.odometry)]
        # pad short windows by repeating the oldest frame
        while len(scans) < window:
            scans.insert(0, scans[0])
            if odometry is not None:
                odometry.insert(0, odometry[0])
        scans = scans[-window:]
        odometry = odometry[-window:] if odometry is not None else None

        detections = detector.detect_frame(scans, odometry)
        return DetectResponse(detections=[
            DetectionOut(x=d.x, y=d.y, confidence=d.confidence,
                         class_probs={CLASS_NAMES[c]: float(p) for c, p in
                                      zip(FOREGROUND_CLASSES, d.class_probs)},
                         supporting_votes=d.supporting_vote_count)
            for d in detections])

    return app


def app_from_weights(weights_path, **detector_kwargs) -> FastAPI:
    return create_app(Detector.from_weights(weights_path, **detector_kwargs))
