"""Command-line interface.

Subcommands: synth (render a dataset), train, detect, eval, stats
(annotation distance histograms), serve (HTTP detection service). Every
command echoes its effective configuration and writes it next to its
artifacts, so equal configs and seeds reproduce runs byte for byte.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .config import RunConfig, derive_time_settings
from .core import CLASS_NAMES, FOREGROUND_CLASSES
from .data import (DataFormatError, load_sequence_auto)
from .evaluation import EVAL_MODES, curve_summaries, distance_histogram, pr_curve, write_curve_file
from .net import TrainingDivergedError, WeightsFormatError, load_params, save_params, train
from .pipeline import Detector
from .sim import default_scene, generate_dataset, scene_from_dict
from .vote import read_detections, write_detections


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run-config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--jobs", type=int, help="worker budget (reserved; runs are single-process)")


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        config.jobs = args.jobs
    fusion = getattr(args, "fusion", None)
    time_window = getattr(args, "time_window", None)
    if fusion is not None or time_window is not None:
        config = derive_time_settings(config, fusion, time_window)
    channels = getattr(args, "stage_channels", None)
    if channels is not None:
        widths = tuple(int(c) for c in channels.split(","))
        config = dataclasses.replace(
            config, model=dataclasses.replace(config.model, stage_channels=widths))
    epochs = getattr(args, "epochs", None)
    if epochs is not None:
        config = dataclasses.replace(
            config, train=dataclasses.replace(config.train, epochs=epochs))
    return config


def _echo_config(config: RunConfig, path=None):
    print(f"config: {config.to_json()}")
    if path is not None:
        config.save(path)


def cmd_synth(args) -> int:
    config = _load_config(args)
    if args.scene:
        with open(args.scene) as f:
            scene = scene_from_dict(json.load(f))
    else:
        scene = default_scene()
    os.makedirs(args.out, exist_ok=True)
    _echo_config(config, os.path.join(args.out, f"{args.name}.run.json"))
    paths = generate_dataset(scene, args.frames, args.out, basename=args.name,
                             geometry=config.geometry, noise_sigma=args.noise,
                             seed=config.seed)
    print(f"wrote {paths['scans']}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    sequences = [load_sequence_auto(path, config.geometry) for path in args.data]
    _echo_config(config, args.out + ".run.json")
    params, history = train(sequences, config.preproc, config.model, config.seed,
                            config.train,
                            log=lambda r: print(f"epoch {r['epoch']}: "
                                                f"lr={r['lr']:.2e} loss={r['loss']:.4f}"))
    save_params(args.out, params, config.model)
    loss_path = args.out + ".losses.tsv"
    with open(loss_path, "w") as f:
        f.write("epoch\tlr\tloss\n")
        for r in history:
            f.write(f"{r['epoch']}\t{r['lr']!r}\t{r['loss']!r}\n")
    print(f"wrote {args.out} and {loss_path}")
    return 0


def _detector_from_args(args, config: RunConfig) -> Detector:
    params, model_config = load_params(args.weights)
    stored_window = model_config.input_frames - 1
    if getattr(args, "time_window", None) is not None and args.time_window != stored_window:
        raise ValueError(f"weights were trained with a time window of {stored_window}, "
                         f"--time-window {args.time_window} does not match")
    preproc = dataclasses.replace(config.preproc, time_window=stored_window,
                                  num_cutout_points=model_config.input_points)
    mode = "split" if getattr(args, "split_voting", False) else "joint"
    return Detector(params, model_config, preproc, config.voting,
                    config.geometry, voting_mode=mode)


def cmd_detect(args) -> int:
    config = _load_config(args)
    detector = _detector_from_args(args, config)
    sequence = load_sequence_auto(args.data, config.geometry)
    _echo_config(config, args.out + ".run.json")
    detections = detector.detect_sequence(sequence, annotated_only=args.annotated_only)
    write_detections(args.out, detections)
    total = sum(len(d) for d in detections.values())
    print(f"wrote {args.out} ({total} detections over {len(detections)} frames)")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args)
    detections = read_detections(args.detections)
    sequence = load_sequence_auto(args.data, config.geometry)
    known = {s.seq for s in sequence.scans}
    unknown = sorted(set(detections) - known)
    if unknown:
        raise ValueError(f"detections reference seq {unknown[0]} not present in the data")
    annotations = sequence.annotations_by_seq()
    radii = [float(r) for r in args.radii.split(",")] if args.radii else list(config.eval_radii)
    modes = list(EVAL_MODES) if args.mode == "all" else [args.mode]
    os.makedirs(args.out_dir, exist_ok=True)
    _echo_config(config, os.path.join(args.out_dir, "eval.run.json"))

    rows = []
    for mode in modes:
        for radius in radii:
            try:
                curve = pr_curve(detections, annotations, sequence.annotated_seqs,
                                 radius, mode)
            except ValueError:
                rows.append((mode, radius, None))
                continue
            s = curve_summaries(curve)
            name = f"{mode}_r{radius:g}.tsv"
            write_curve_file(os.path.join(args.out_dir, name), curve, s)
            rows.append((mode, radius, s))

    summary_path = os.path.join(args.out_dir, "summary.tsv")
    with open(summary_path, "w") as f:
        f.write("mode\tradius\tauc\tpeak_f1\teer\n")
        for mode, radius, s in rows:
            if s is None:
                continue
            f.write(f"{mode}\t{radius!r}\t{s['auc']!r}\t{s['peak_f1']!r}\t{s['eer']!r}\n")
    print(f"{'mode':<12}{'radius':>8}{'AUC%':>8}{'pF1%':>8}{'EER%':>8}")
    for mode, radius, s in rows:
        if s is None:
            print(f"{mode:<12}{radius:>8.2f}{'-':>8}{'-':>8}{'-':>8}")
        else:
            print(f"{mode:<12}{radius:>8.2f}{100 * s['auc']:>8.1f}"
                  f"{100 * s['peak_f1']:>8.1f}{100 * s['eer']:>8.1f}")
    print(f"wrote {summary_path}")
    return 0


def cmd_stats(args) -> int:
    config = _load_config(args)
    sequence = load_sequence_auto(args.data, config.geometry)
    annotations = [a for seq in sequence.annotated_seqs
                   for a in sequence.annotations_for_seq(seq)]
    hist = distance_histogram(annotations)
    _echo_config(config)
    print(f"scans: {len(sequence)}  annotated: {len(sequence.annotated_seqs)}")
    print("class\ttotal\t" + "\t".join(f"{i}-{i + 1}m" for i in range(hist.n_bins))
          + "\toverflow")
    for cls in FOREGROUND_CLASSES:
        bins = "\t".join(str(int(b)) for b in hist.bins[cls])
        print(f"{CLASS_NAMES[cls]}\t{hist.total(cls)}\t{bins}\t{hist.overflow[cls]}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load_config(args)
    detector = _detector_from_args(args, config)
    _echo_config(config)
    app = create_app(detector)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rangevote",
        description="People and mobility-aid detection in 2D laser range data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic dataset")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--name", default="synth", help="dataset basename")
    p.add_argument("--scene", help="scene spec JSON (defaults to a built-in world)")
    p.add_argument("--noise", type=float, default=0.01, help="range noise sigma, meters")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a detector")
    _add_common(p)
    p.add_argument("--data", nargs="+", required=True, help="scan CSV file(s)")
    p.add_argument("--out", required=True, help="output weight file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--fusion", choices=("none", "early", "late"))
    p.add_argument("--time-window", "-T", dest="time_window", type=int)
    p.add_argument("--stage-channels", dest="stage_channels",
                   help="comma-separated widths, e.g. 64,64,128,128")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="run detection over a sequence")
    _add_common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True, help="scan CSV file")
    p.add_argument("--out", required=True, help="output detections file")
    p.add_argument("--annotated-only", action="store_true",
                   help="detect only on annotated frames")
    p.add_argument("--split-voting", action="store_true",
                   help="class-specific grids plus cross-class NMS")
    p.add_argument("--time-window", dest="time_window", type=int,
                   help="must match the weights (sanity check)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="precision-recall evaluation")
    _add_common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--data", required=True, help="scan CSV file with annotations")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--radii", help="comma-separated matching radii, meters")
    p.add_argument("--mode", default="all", choices=("all",) + EVAL_MODES)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="annotation distance histograms")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the HTTP detection service")
    _add_common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--split-voting", action="store_true")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, DataFormatError, WeightsFormatError,
            TrainingDivergedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
