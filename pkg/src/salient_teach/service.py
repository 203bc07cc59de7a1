"""Streaming session server and the per-frame evaluation pipeline.

The engine half (:func:`evaluate_frame`, :func:`bench`) is plain synchronous
code: preprocess -> extract -> forward -> softmax -> pick saliency class ->
CAM, then the render stage (optional upsample, normalize, 8-bit encode).
Latency is probed per the two-stage breakdown: "inference" covers through
the CAM computation, "render" the rest.

The server half exposes that engine over a WebSocket (text frames, UTF-8
JSON), one session per connection. Client -> server message types:

    create_session {config?, seed?}        add_label {name}
    add_sample {label_id, frame}           clear_label {label_id}
    train {}                               frame {frame, selected_class?}
    select_class {class_id | null}         reopen {}
    save {}                                load {blob}

``frame`` payloads are base64 JPEG or PNG. Server -> client:

    session_created {labels}               label_added {label_id, name}
    sample_added {label_id, count}         label_cleared {label_id}
    train_progress {epoch, loss}           trained {report}
    prediction {scores, saliency, latency} class_selected {class_id}
    reopened {counts}                      saved {blob}
    loaded {labels, counts, state}         error {code, detail}

Saliency travels as the min-max-normalized grid at backbone resolution,
quantized to 8 bits and base64-encoded, plus the crop square the overlay
belongs to; the client colorizes. Malformed input of any kind yields
exactly one ``error`` message and leaves the connection open. Training runs
in a worker thread so the connection keeps answering (frames sent while
training are rejected with ``wrong_state``); it is cancelled between
batches if the connection drops.
"""

import asyncio
import json
import logging
import threading
import time
from dataclasses import dataclass

import numpy as np

from .backbone import Backbone, Frame, crop_box
from .errors import EngineError, StateError, TrainCancelled
from .imgio import frame_from_b64
from .saliency import compute_cam, encode_grid_b64, select_saliency_class
from .session import SessionState, TeachingSession, dumps_session, loads_session
from .tensor_core import bilinear_resize, minmax_normalize, softmax
from .trainer import TrainConfig, train
from .trainer import forward as head_forward

logger = logging.getLogger("salient_teach.service")


@dataclass
class LatencyBreakdown:
    inference_ms: float
    render_ms: float
    total_ms: float

    def to_dict(self) -> dict:
        return {
            "inference_ms": self.inference_ms,
            "render_ms": self.render_ms,
            "total_ms": self.total_ms,
        }


@dataclass
class PredictionResult:
    scores: list           # [{label_id, name, p}] in label order
    saliency_class: int
    grid: np.ndarray       # normalized grid as shipped (float64)
    crop: tuple            # (x, y, side) in source-frame pixels
    latency: LatencyBreakdown

    def saliency_message(self) -> dict:
        h, w = self.grid.shape
        x, y, side = self.crop
        return {
            "h": h,
            "w": w,
            "q8": encode_grid_b64(self.grid),
            "crop": {"x": x, "y": y, "side": side},
            "class_id": self.saliency_class,
        }

    def to_message(self) -> dict:
        return {
            "type": "prediction",
            "scores": self.scores,
            "saliency": self.saliency_message(),
            "latency": self.latency.to_dict(),
        }


def evaluate_frame(
    session: TeachingSession,
    backbone: Backbone,
    frame: Frame,
    selected_class: int | None = None,
    render_side: int | None = None,
) -> PredictionResult:
    """Run one frame through the trained session.

    Read-only with respect to the session. ``render_side`` of None ships the
    saliency grid at backbone resolution (the wire default); an integer
    upsamples server-side to that square size first (the CLI/bench path).
    """
    if session.state is not SessionState.EVALUATING:
        if session.head is not None and session.head_stale:
            raise StateError(
                "trained head is stale after reopening; retrain before "
                "evaluating"
            )
        raise StateError("session has no trained head; train before evaluating")

    t0 = time.perf_counter()
    features = backbone.extract(backbone.preprocess(frame))
    probs = softmax(head_forward(session.head, features.gap))
    saliency_class = select_saliency_class(probs, selected_class)
    cam = compute_cam(features, session.head, saliency_class)
    t1 = time.perf_counter()

    grid = cam.grid
    if render_side is not None:
        grid = bilinear_resize(grid, render_side, render_side)
    normalized = minmax_normalize(grid)
    encode_grid_b64(normalized)  # encoding cost belongs to the render stage
    t2 = time.perf_counter()

    return PredictionResult(
        scores=[
            {"label_id": label.id, "name": label.name, "p": float(probs[label.id])}
            for label in session.labels
        ],
        saliency_class=saliency_class,
        grid=normalized,
        crop=crop_box(frame.width, frame.height),
        latency=LatencyBreakdown(
            inference_ms=(t1 - t0) * 1000.0,
            render_ms=(t2 - t1) * 1000.0,
            total_ms=(t2 - t0) * 1000.0,
        ),
    )


def synthetic_frame(seed: int, index: int, width: int = 640,
                    height: int = 480) -> Frame:
    """Deterministic noise frame at the nominal webcam resolution."""
    rng = np.random.default_rng([seed, index])
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return Frame.from_array(pixels, timestamp_ms=index)


def _stage_stats(values: np.ndarray) -> dict:
    return {
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "p95": float(np.percentile(values, 95)),
    }


def bench(
    session: TeachingSession,
    backbone: Backbone,
    n_frames: int,
    frame_source=None,
    render_side: int | None = None,
    seed: int = 0,
    training_ms: float | None = None,
) -> dict:
    """Time evaluate_frame over n synthetic (or supplied) frames.

    ``render_side`` defaults to the backbone input side so the render stage
    includes a display-scale upsample, mirroring what a visualization pays.
    """
    if session.state is not SessionState.EVALUATING:
        raise StateError("bench needs a trained session")
    if n_frames < 1:
        raise StateError("bench needs at least one frame")
    if frame_source is None:
        frame_source = lambda i: synthetic_frame(seed, i)
    if render_side is None:
        render_side = backbone.input_side

    per_frame = []
    for i in range(n_frames):
        result = evaluate_frame(
            session, backbone, frame_source(i), render_side=render_side
        )
        per_frame.append(result.latency)

    inference = np.array([p.inference_ms for p in per_frame])
    render = np.array([p.render_ms for p in per_frame])
    total = np.array([p.total_ms for p in per_frame])
    if training_ms is None and session.last_report is not None:
        training_ms = session.last_report.train_ms
    return {
        "n": n_frames,
        "inference_ms": _stage_stats(inference),
        "render_ms": _stage_stats(render),
        "total_ms": _stage_stats(total),
        "training_ms": training_ms,
        "per_frame": [p.to_dict() for p in per_frame],
    }


# ---------------------------------------------------------------------------
# WebSocket server
# ---------------------------------------------------------------------------

def _error(code: str, detail: str) -> dict:
    return {"type": "error", "code": code, "detail": detail}


class _BadMessage(Exception):
    """Message violates the protocol shape (not a session-domain error)."""


def _field(msg: dict, name: str, kind, required: bool = True):
    value = msg.get(name)
    if value is None:
        if required:
            raise _BadMessage(f"message requires field {name!r}")
        return None
    if kind is int and isinstance(value, bool):
        raise _BadMessage(f"field {name!r} must be an integer")
    if not isinstance(value, kind):
        raise _BadMessage(f"field {name!r} has the wrong type")
    return value


class _ServiceState:
    def __init__(self, backbone: Backbone, max_sessions: int):
        self.backbone = backbone
        self.max_sessions = max_sessions
        self.active_sessions = 0


class _Connection:
    """One WebSocket client: owns at most one session, processes messages
    strictly in arrival order, and streams training progress."""

    def __init__(self, state: _ServiceState, websocket):
        self.state = state
        self.ws = websocket
        self.session: TeachingSession | None = None
        self.selected_class: int | None = None
        self.outbox: asyncio.Queue = asyncio.Queue()
        self.cancel_event = threading.Event()
        self.train_task: asyncio.Task | None = None

    # -- plumbing ----------------------------------------------------------

    def _send(self, message: dict) -> None:
        self.outbox.put_nowait(message)

    async def _writer(self) -> None:
        while True:
            message = await self.outbox.get()
            try:
                await self.ws.send_text(json.dumps(message))
            except Exception:
                return  # peer is gone; let shutdown proceed

    async def run(self) -> None:
        writer = asyncio.create_task(self._writer())
        try:
            while True:
                packet = await self.ws.receive()
                if packet["type"] == "websocket.disconnect":
                    break
                text = packet.get("text")
                if text is None:
                    self._send(_error("protocol", "binary frames are not supported"))
                    continue
                for message in self.handle_text(text):
                    self._send(message)
                # Let the writer drain before reading the next packet so
                # responses stay interleaved with their requests.
                await asyncio.sleep(0)
        finally:
            self.cancel_event.set()
            try:
                if self.train_task is not None:
                    try:
                        await self.train_task
                    except asyncio.CancelledError:
                        pass
                while not self.outbox.empty() and not writer.done():
                    await asyncio.sleep(0)
            finally:
                writer.cancel()
                if self.session is not None:
                    self.state.active_sessions -= 1
                    self.session = None

    # -- dispatch ----------------------------------------------------------

    def handle_text(self, text: str) -> list:
        """Parse and dispatch one inbound message; never raises."""
        try:
            msg = json.loads(text)
        except (json.JSONDecodeError, ValueError) as exc:
            return [_error("protocol", f"invalid JSON: {exc}")]
        if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
            return [_error("protocol", "message must be an object with a string 'type'")]
        handler = getattr(self, f"_cmd_{msg['type']}", None)
        if handler is None:
            return [_error("protocol", f"unknown message type {msg['type']!r}")]
        try:
            return handler(msg)
        except _BadMessage as exc:
            return [_error("protocol", str(exc))]
        except EngineError as exc:
            return [_error(exc.code, str(exc))]
        except Exception as exc:  # never let a message kill the connection
            logger.exception("unexpected failure handling %r", msg.get("type"))
            return [_error("internal", f"{type(exc).__name__}: {exc}")]

    def _require_session(self) -> TeachingSession:
        if self.session is None:
            raise _BadMessage("no session; send create_session first")
        return self.session

    # -- commands ----------------------------------------------------------

    def _cmd_create_session(self, msg: dict) -> list:
        if self.session is not None:
            raise _BadMessage("this connection already has a session")
        if self.state.active_sessions >= self.state.max_sessions:
            return [_error("capacity", "server is at its session limit")]
        config_doc = _field(msg, "config", dict, required=False)
        config = TrainConfig.from_dict(config_doc) if config_doc else TrainConfig()
        seed = _field(msg, "seed", int, required=False) or 0
        self.session = TeachingSession(self.state.backbone, config=config, seed=seed)
        self.state.active_sessions += 1
        return [{"type": "session_created", "labels": []}]

    def _cmd_add_label(self, msg: dict) -> list:
        session = self._require_session()
        name = _field(msg, "name", str)
        label_id = session.add_label(name)
        return [{"type": "label_added", "label_id": label_id, "name": name}]

    def _cmd_add_sample(self, msg: dict) -> list:
        session = self._require_session()
        label_id = _field(msg, "label_id", int)
        frame = frame_from_b64(_field(msg, "frame", str))
        count = session.add_sample(label_id, frame, self.state.backbone)
        return [{"type": "sample_added", "label_id": label_id, "count": count}]

    def _cmd_clear_label(self, msg: dict) -> list:
        session = self._require_session()
        label_id = _field(msg, "label_id", int)
        session.clear_label(label_id)
        return [{"type": "label_cleared", "label_id": label_id}]

    def _cmd_train(self, msg: dict) -> list:
        session = self._require_session()
        session.begin_training()
        x, y = session.training_data()
        n_classes = len(session.labels)
        loop = asyncio.get_running_loop()
        self.cancel_event = threading.Event()
        cancel = self.cancel_event

        def progress(epoch: int, loss: float) -> None:
            loop.call_soon_threadsafe(
                self._send,
                {"type": "train_progress", "epoch": epoch, "loss": loss},
            )

        def work():
            return train(
                x, y, n_classes, session.config, session.seed,
                progress=progress, should_cancel=cancel.is_set,
            )

        async def runner():
            try:
                head, report = await loop.run_in_executor(None, work)
            except TrainCancelled:
                session.cancel_training()
                return
            except EngineError as exc:
                session.cancel_training()
                self._send(_error(exc.code, str(exc)))
                return
            except Exception as exc:
                session.cancel_training()
                logger.exception("training failed")
                self._send(_error("internal", f"{type(exc).__name__}: {exc}"))
                return
            session.complete_training(head, report)
            self._send({"type": "trained", "report": report.to_dict()})

        self.train_task = asyncio.create_task(runner())
        return []

    def _cmd_frame(self, msg: dict) -> list:
        session = self._require_session()
        frame = frame_from_b64(_field(msg, "frame", str))
        selected = _field(msg, "selected_class", int, required=False)
        if selected is None:
            selected = self.selected_class
        result = evaluate_frame(session, self.state.backbone, frame, selected)
        return [result.to_message()]

    def _cmd_select_class(self, msg: dict) -> list:
        session = self._require_session()
        class_id = _field(msg, "class_id", int, required=False)
        if class_id is not None and not 0 <= class_id < len(session.labels):
            raise _BadMessage(f"class_id {class_id} out of range")
        self.selected_class = class_id
        return [{"type": "class_selected", "class_id": class_id}]

    def _cmd_reopen(self, msg: dict) -> list:
        session = self._require_session()
        session.reopen_teaching()
        return [{"type": "reopened", "counts": session.counts()}]

    def _cmd_save(self, msg: dict) -> list:
        session = self._require_session()
        return [{"type": "saved", "blob": dumps_session(session)}]

    def _cmd_load(self, msg: dict) -> list:
        blob = _field(msg, "blob", str)
        loaded = loads_session(blob, self.state.backbone)
        if self.session is None:
            if self.state.active_sessions >= self.state.max_sessions:
                return [_error("capacity", "server is at its session limit")]
            self.state.active_sessions += 1
        self.session = loaded
        self.selected_class = None
        return [{
            "type": "loaded",
            "labels": [{"id": l.id, "name": l.name} for l in loaded.labels],
            "counts": loaded.counts(),
            "state": loaded.state.value,
        }]


def create_app(backbone: Backbone, max_sessions: int = 8, ui_dir: str | None = None):
    """Build the FastAPI application serving /ws (and optionally /ui)."""
    from fastapi import FastAPI, WebSocket
    from starlette.websockets import WebSocketDisconnect

    app = FastAPI(title="salient-teach")
    state = _ServiceState(backbone, max_sessions)
    app.state.service = state

    @app.get("/healthz")
    async def healthz():
        return {
            "status": "ok",
            "backbone": backbone.identity,
            "active_sessions": state.active_sessions,
        }

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        connection = _Connection(state, websocket)
        try:
            await connection.run()
        except WebSocketDisconnect:
            pass

    if ui_dir is not None:
        from starlette.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app
