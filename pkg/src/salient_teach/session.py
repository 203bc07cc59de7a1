"""Teaching-session lifecycle: labels, sample stores, state machine,
persistence.

A session stores extracted features, not raw frames, which keeps session
files small but binds them to the backbone that produced the features;
save/load therefore carry and verify the backbone identity.

State machine: Teaching -> Training -> Evaluating -> Teaching. Reopening
for more teaching keeps the trained head but marks it stale, so assessment
is refused until the model reflects the current data again.

File format (UTF-8 JSON, version 1):

    {
      "version": 1,
      "seed": <u64>,
      "backbone_id": "<identity string>",
      "labels": [{"id": 0, "name": "cup"}, ...],
      "config": {"epochs": ..., "batch_size": ..., "learning_rate": ...,
                  "beta1": ..., "beta2": ..., "epsilon": ...},
      "feature_shape": {"h": ..., "w": ..., "k": ...},
      "samples": [[<b64 of little-endian float32, row-major (K, h, w)>,
                    ...], ...],          # one array per label id
      "head": {"weights": <b64 little-endian float64, row-major C*K>,
                "bias": <b64 little-endian float64, C>} | null,
      "head_stale": true                  # present only when true
    }

Wall-clock timings are never written: identical teaching inputs must
produce byte-identical files.
"""

import base64
import binascii
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .backbone import Backbone, FeatureTensor, Frame
from .errors import (
    CompatibilityError,
    ConflictError,
    InvalidArgumentError,
    NotFoundError,
    PreconditionError,
    SessionParseError,
    StateError,
)
from .trainer import LinearHead, TrainConfig, TrainReport, train

SESSION_FILE_VERSION = 1


class SessionState(Enum):
    TEACHING = "teaching"
    TRAINING = "training"
    EVALUATING = "evaluating"


@dataclass(frozen=True)
class LabelDef:
    id: int
    name: str


class TeachingSession:
    """Single-writer container for one user's teaching run.

    Mutating calls must be serialized by the owner; snapshots handed out by
    ``labels``, ``counts`` and ``head`` are safe to read concurrently.
    """

    def __init__(self, backbone: Backbone, config: TrainConfig | None = None,
                 seed: int = 0):
        self.labels: list[LabelDef] = []
        self.samples: list[list[FeatureTensor]] = []
        self.state = SessionState.TEACHING
        self.head: LinearHead | None = None
        self.head_stale = False
        self.config = (config or TrainConfig()).validate()
        self.seed = int(seed)
        self.backbone_id = backbone.identity
        self.feature_shape = (backbone.out_h, backbone.out_w, backbone.out_k)
        self.last_report: TrainReport | None = None

    # -- teaching ----------------------------------------------------------

    def add_label(self, name: str) -> int:
        self._require(SessionState.TEACHING)
        if not name:
            raise InvalidArgumentError("label name must be non-empty")
        if any(label.name == name for label in self.labels):
            raise ConflictError(f"label {name!r} already exists")
        label_id = len(self.labels)
        self.labels.append(LabelDef(id=label_id, name=name))
        self.samples.append([])
        return label_id

    def add_sample(self, label_id: int, frame: Frame, backbone: Backbone) -> int:
        self._require(SessionState.TEACHING)
        self._check_label(label_id)
        if backbone.identity != self.backbone_id:
            raise CompatibilityError(
                f"backbone {backbone.identity!r} does not match session "
                f"backbone {self.backbone_id!r}"
            )
        self.samples[label_id].append(backbone.extract_frame(frame))
        return len(self.samples[label_id])

    def add_feature(self, label_id: int, features: FeatureTensor) -> int:
        """Append an already-extracted feature tensor (load path)."""
        self._require(SessionState.TEACHING)
        self._check_label(label_id)
        h, w, k = self.feature_shape
        if (features.h, features.w, features.k) != (h, w, k):
            raise InvalidArgumentError(
                f"feature shape ({features.h}, {features.w}, {features.k}) "
                f"does not match backbone output ({h}, {w}, {k})"
            )
        self.samples[label_id].append(features)
        return len(self.samples[label_id])

    def clear_label(self, label_id: int) -> None:
        self._require(SessionState.TEACHING)
        self._check_label(label_id)
        self.samples[label_id] = []

    def counts(self) -> list[int]:
        return [len(store) for store in self.samples]

    # -- lifecycle ---------------------------------------------------------

    def begin_training(self) -> None:
        self._require(SessionState.TEACHING)
        if len(self.labels) < 2:
            raise PreconditionError(
                f"training needs at least 2 labels, session has "
                f"{len(self.labels)}"
            )
        for label, store in zip(self.labels, self.samples):
            if not store:
                raise PreconditionError(
                    f"label {label.name!r} has no samples"
                )
        self.state = SessionState.TRAINING

    def complete_training(self, head: LinearHead,
                          report: TrainReport | None = None) -> None:
        self._require(SessionState.TRAINING)
        h, w, k = self.feature_shape
        if head.weights.shape != (len(self.labels), k):
            raise InvalidArgumentError(
                f"head shape {head.weights.shape} does not match "
                f"({len(self.labels)}, {k})"
            )
        self.head = head
        self.head_stale = False
        self.last_report = report
        self.state = SessionState.EVALUATING

    def cancel_training(self) -> None:
        self._require(SessionState.TRAINING)
        self.state = SessionState.TEACHING

    def reopen_teaching(self) -> None:
        self._require(SessionState.EVALUATING)
        self.state = SessionState.TEACHING
        self.head_stale = True

    def training_data(self):
        """Stack stored GAP vectors into (X, y) in insertion order."""
        rows, targets = [], []
        for label, store in zip(self.labels, self.samples):
            for features in store:
                rows.append(features.gap)
                targets.append(label.id)
        x = np.asarray(rows, dtype=np.float64)
        y = np.asarray(targets, dtype=np.int64)
        return x, y

    def train_now(self, progress=None, should_cancel=None) -> TrainReport:
        """Run the full Teaching -> Training -> Evaluating cycle inline."""
        self.begin_training()
        try:
            x, y = self.training_data()
            head, report = train(
                x, y, len(self.labels), self.config, self.seed,
                progress=progress, should_cancel=should_cancel,
            )
        except BaseException:
            self.cancel_training()
            raise
        self.complete_training(head, report)
        return report

    # -- helpers -----------------------------------------------------------

    def _require(self, state: SessionState) -> None:
        if self.state is not state:
            raise StateError(
                f"operation requires the {state.value} state, session is "
                f"{self.state.value}"
            )

    def _check_label(self, label_id: int) -> None:
        if not 0 <= label_id < len(self.labels):
            raise NotFoundError(f"no label with id {label_id}")


def create_session(backbone: Backbone, config: TrainConfig | None = None,
                   seed: int = 0) -> TeachingSession:
    return TeachingSession(backbone, config=config, seed=seed)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _b64(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def _unb64(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise SessionParseError(f"bad base64 in {what}: {exc}") from exc


def dumps_session(session: TeachingSession) -> str:
    if session.state is SessionState.TRAINING:
        raise StateError("cannot save while training is in progress")
    h, w, k = session.feature_shape
    doc = {
        "version": SESSION_FILE_VERSION,
        "seed": session.seed,
        "backbone_id": session.backbone_id,
        "labels": [{"id": l.id, "name": l.name} for l in session.labels],
        "config": session.config.to_dict(),
        "feature_shape": {"h": h, "w": w, "k": k},
        "samples": [
            [_b64(f.maps.astype("<f4").tobytes()) for f in store]
            for store in session.samples
        ],
        "head": None,
    }
    if session.head is not None:
        doc["head"] = {
            "weights": _b64(session.head.weights.astype("<f8").tobytes()),
            "bias": _b64(session.head.bias.astype("<f8").tobytes()),
        }
        if session.head_stale:
            doc["head_stale"] = True
    return json.dumps(doc, separators=(",", ":"))


def save_session(session: TeachingSession, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_session(session))


def loads_session(text: str, backbone: Backbone) -> TeachingSession:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SessionParseError(
            f"invalid session JSON at offset {exc.pos}: {exc.msg}",
            offset=exc.pos,
        ) from exc
    if not isinstance(doc, dict):
        raise SessionParseError("session document must be a JSON object")
    if doc.get("version") != SESSION_FILE_VERSION:
        raise SessionParseError(
            f"unsupported session version {doc.get('version')!r}"
        )
    backbone_id = doc.get("backbone_id")
    if backbone_id != backbone.identity:
        raise CompatibilityError(
            f"session was taught with backbone {backbone_id!r}, "
            f"got {backbone.identity!r}"
        )

    try:
        config = TrainConfig.from_dict(doc.get("config", {}))
        seed = int(doc["seed"])
        shape = doc["feature_shape"]
        h, w, k = int(shape["h"]), int(shape["w"]), int(shape["k"])
        label_docs = doc["labels"]
        sample_docs = doc["samples"]
    except (KeyError, TypeError, ValueError, InvalidArgumentError) as exc:
        raise SessionParseError(f"malformed session document: {exc}") from exc

    session = TeachingSession(backbone, config=config, seed=seed)
    if (h, w, k) != session.feature_shape:
        raise CompatibilityError(
            f"stored feature shape ({h}, {w}, {k}) does not match backbone "
            f"output {session.feature_shape}"
        )
    if len(sample_docs) != len(label_docs):
        raise SessionParseError("samples and labels arrays disagree in length")
    for i, label_doc in enumerate(label_docs):
        try:
            name = label_doc["name"]
            declared = int(label_doc["id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SessionParseError(f"malformed label entry: {exc}") from exc
        if declared != i:
            raise SessionParseError(
                f"label ids must be dense; expected {i}, found {declared}"
            )
        session.add_label(name)
        for j, blob in enumerate(sample_docs[i]):
            raw = _unb64(blob, f"sample {j} of label {name!r}")
            expected = k * h * w * 4
            if len(raw) != expected:
                raise SessionParseError(
                    f"sample {j} of label {name!r} has {len(raw)} bytes, "
                    f"expected {expected}"
                )
            maps = np.frombuffer(raw, dtype="<f4").reshape(k, h, w)
            session.add_feature(i, FeatureTensor.from_maps(maps))

    head_doc = doc.get("head")
    if head_doc is not None:
        n_classes = len(session.labels)
        weights_raw = _unb64(head_doc.get("weights", ""), "head weights")
        bias_raw = _unb64(head_doc.get("bias", ""), "head bias")
        if len(weights_raw) != n_classes * k * 8 or len(bias_raw) != n_classes * 8:
            raise SessionParseError("head payload size mismatch")
        head = LinearHead(
            weights=np.frombuffer(weights_raw, dtype="<f8")
            .reshape(n_classes, k)
            .copy(),
            bias=np.frombuffer(bias_raw, dtype="<f8").copy(),
        )
        stale = bool(doc.get("head_stale", False))
        session.head = head
        session.head_stale = stale
        if not stale:
            session.state = SessionState.EVALUATING
    return session


def load_session(path: str, backbone: Backbone) -> TeachingSession:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SessionParseError(f"cannot read session file {path}: {exc}") from exc
    return loads_session(text, backbone)
