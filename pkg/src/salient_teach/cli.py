"""Headless command-line front end.

Four subcommands cover the whole engine without a browser:

    teach   train a session from a directory of labeled images
    eval    score one image against a saved session, optionally writing
            an overlay PNG
    bench   time the per-frame pipeline over synthetic or supplied frames
    serve   run the WebSocket session server

All commands print JSON lines on stdout (diagnostics go to stderr) and
exit nonzero on error. Everything is deterministic under a fixed --seed
and fixed inputs.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .backbone import crop_box, load_backbone
from .errors import EngineError, InvalidArgumentError
from .imgio import frame_from_image_file, save_png
from .saliency import compute_cam, composite_overlay, render_overlay
from .service import bench, create_app, evaluate_frame
from .session import create_session, load_session, save_session
from .trainer import TrainConfig


def _emit(doc: dict) -> None:
    print(json.dumps(doc), flush=True)


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _config_from_args(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr
    )


def _label_dirs(data_dir: Path, manifest: str | None) -> list[Path]:
    """Label subdirectories in id order: manifest order when given,
    otherwise lexicographic by directory name."""
    if manifest is not None:
        names = [
            line.strip()
            for line in Path(manifest).read_text().splitlines()
            if line.strip()
        ]
        dirs = [data_dir / name for name in names]
        for d in dirs:
            if not d.is_dir():
                raise InvalidArgumentError(
                    f"manifest names {d.name!r} but {d} is not a directory"
                )
        return dirs
    return sorted(
        (p for p in data_dir.iterdir() if p.is_dir()), key=lambda p: p.name
    )


def cmd_teach(args) -> int:
    backbone = load_backbone(args.backbone)
    data_dir = Path(args.data_dir)
    if not data_dir.is_dir():
        return _fail(f"{data_dir} is not a directory")
    label_dirs = _label_dirs(data_dir, args.labels)
    if len(label_dirs) < 2:
        return _fail(
            f"{data_dir} has {len(label_dirs)} label directories; need >= 2"
        )

    session = create_session(
        backbone, config=_config_from_args(args), seed=args.seed
    )
    for label_dir in label_dirs:
        label_id = session.add_label(label_dir.name)
        for path in sorted(
            (p for p in label_dir.iterdir() if p.is_file()),
            key=lambda p: p.name,
        ):
            try:
                frame = frame_from_image_file(str(path))
            except InvalidArgumentError as exc:
                _warn(f"skipping {path}: {exc}")
                continue
            session.add_sample(label_id, frame, backbone)

    def progress(epoch: int, loss: float) -> None:
        _emit({"type": "train_progress", "epoch": epoch, "loss": loss})

    report = session.train_now(progress=progress)
    save_session(session, args.out)
    _emit({
        "type": "trained",
        "report": report.to_dict(),
        "labels": [label.name for label in session.labels],
        "counts": session.counts(),
        "session": args.out,
    })
    return 0


def cmd_eval(args) -> int:
    backbone = load_backbone(args.backbone)
    session = load_session(args.session, backbone)
    frame = frame_from_image_file(args.image)

    selected = None
    if args.class_name is not None:
        names = [label.name for label in session.labels]
        if args.class_name not in names:
            return _fail(
                f"unknown class {args.class_name!r}; valid labels: "
                + ", ".join(names)
            )
        selected = names.index(args.class_name)

    result = evaluate_frame(session, backbone, frame, selected_class=selected)
    _emit({
        "scores": result.scores,
        "saliency_class": result.saliency_class,
        "latency": result.latency.to_dict(),
    })

    if args.overlay is not None:
        features = backbone.extract_frame(frame)
        cam = compute_cam(features, session.head, result.saliency_class)
        crop = crop_box(frame.width, frame.height)
        overlay = render_overlay(
            cam, crop[2], clip_negative=args.clip_negative
        )
        save_png(composite_overlay(frame.pixels, overlay, crop), args.overlay)
    return 0


def cmd_bench(args) -> int:
    backbone = load_backbone(args.backbone)
    session = load_session(args.session, backbone)
    # Retrain from the stored samples to measure training wall-clock on this
    # machine; with the session's own seed and config the resulting head is
    # bit-identical to the saved one.
    session.reopen_teaching()
    session.train_now()

    frame_source = None
    if args.frames is not None:
        frames_dir = Path(args.frames)
        frames = [
            frame_from_image_file(str(p))
            for p in sorted(
                (p for p in frames_dir.iterdir() if p.is_file()),
                key=lambda p: p.name,
            )
        ]
        if not frames:
            return _fail(f"{frames_dir} holds no readable frames")
        frame_source = lambda i: frames[i % len(frames)]

    stats = bench(
        session, backbone, args.n, frame_source=frame_source, seed=args.seed
    )
    _emit(stats)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    level = os.environ.get("SALIENT_TEACH_LOG", "info").lower()
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO))
    backbone = load_backbone(args.backbone)
    app = create_app(
        backbone, max_sessions=args.max_sessions, ui_dir=args.ui
    )
    host, _, port = args.listen.rpartition(":")
    if not host or not port.isdigit():
        return _fail(f"--listen must be addr:port, got {args.listen!r}")
    uvicorn.run(app, host=host, port=int(port), log_level=level)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salient-teach",
        description="Teach an image classifier interactively and inspect "
        "what it attends to.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--backbone",
            required=True,
            help="feature extractor: an .onnx file path or test:<seed>:<k>:<h>:<w>",
        )
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epochs", type=int, default=10)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--lr", type=float, default=0.001)

    teach = sub.add_parser(
        "teach", help="train a session from labeled image directories"
    )
    add_shared(teach)
    teach.add_argument(
        "data_dir",
        help="directory whose subdirectories are labels full of images",
    )
    teach.add_argument("--out", required=True, help="session file to write")
    teach.add_argument(
        "--labels",
        default=None,
        help="manifest file (one label directory name per line) overriding "
        "lexicographic label order",
    )
    teach.set_defaults(func=cmd_teach)

    ev = sub.add_parser("eval", help="score one image against a session")
    add_shared(ev)
    ev.add_argument("image", help="PNG or JPEG to evaluate")
    ev.add_argument("--session", required=True, help="session file to load")
    ev.add_argument(
        "--class",
        dest="class_name",
        default=None,
        help="label name whose saliency to show (default: the top class)",
    )
    ev.add_argument(
        "--overlay", default=None, help="write the composited overlay PNG here"
    )
    ev.add_argument(
        "--clip-negative",
        action="store_true",
        help="floor negative activations at zero before display",
    )
    ev.set_defaults(func=cmd_eval)

    be = sub.add_parser("bench", help="time the per-frame pipeline")
    add_shared(be)
    be.add_argument("--session", required=True, help="session file to load")
    be.add_argument("--n", type=int, default=100, help="number of frames")
    be.add_argument(
        "--frames",
        default=None,
        help="directory of images to cycle through instead of synthetic noise",
    )
    be.set_defaults(func=cmd_bench)

    sv = sub.add_parser("serve", help="run the WebSocket session server")
    add_shared(sv)
    sv.add_argument("--listen", default="127.0.0.1:8765", help="addr:port")
    sv.add_argument("--max-sessions", type=int, default=8)
    sv.add_argument(
        "--ui", default=None, help="static directory to serve under /ui"
    )
    sv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
