"""Interactive machine teaching for image classifiers.

Teach a lightweight classifier on top of a frozen convolutional feature
extractor from a handful of example frames, then evaluate new frames in
real time: per-class confidence scores plus a class activation map showing
where the evidence sits, with latency accounted per pipeline stage.

The usual flow::

    from salient_teach import make_test_backbone, create_session
    from salient_teach.service import evaluate_frame

    backbone = make_test_backbone(seed=0, k=64, h=7, w=7)
    session = create_session(backbone)
    session.add_label("cup")
    session.add_label("hand")
    ...                        # add_sample(...) per frame
    session.train_now()
    result = evaluate_frame(session, backbone, frame)
"""

from .backbone import (
    Backbone,
    FeatureTensor,
    Frame,
    ModelInput,
    TestBackbone,
    crop_box,
    load_backbone,
    make_test_backbone,
    preprocess,
)
from .errors import (
    CompatibilityError,
    ConflictError,
    EngineError,
    InvalidArgumentError,
    ModelLoadError,
    NotFoundError,
    PreconditionError,
    SessionParseError,
    StateError,
    TrainCancelled,
    UnsupportedModelError,
)
from .saliency import (
    A_MAX,
    SaliencyGrid,
    SaliencyOverlay,
    colorize,
    composite_overlay,
    compute_cam,
    load_colormap,
    render_overlay,
    select_saliency_class,
)
from .service import (
    LatencyBreakdown,
    PredictionResult,
    bench,
    create_app,
    evaluate_frame,
    synthetic_frame,
)
from .session import (
    LabelDef,
    SessionState,
    TeachingSession,
    create_session,
    dumps_session,
    load_session,
    loads_session,
    save_session,
)
from .trainer import (
    AdamState,
    LinearHead,
    TrainConfig,
    TrainReport,
    adam_step,
    init_head,
    train,
)
from .trainer import forward as head_forward

__version__ = "0.1.0"

__all__ = [
    "A_MAX",
    "AdamState",
    "Backbone",
    "CompatibilityError",
    "ConflictError",
    "EngineError",
    "FeatureTensor",
    "Frame",
    "InvalidArgumentError",
    "LabelDef",
    "LatencyBreakdown",
    "LinearHead",
    "ModelInput",
    "ModelLoadError",
    "NotFoundError",
    "PreconditionError",
    "PredictionResult",
    "SaliencyGrid",
    "SaliencyOverlay",
    "SessionParseError",
    "SessionState",
    "StateError",
    "TeachingSession",
    "TestBackbone",
    "TrainCancelled",
    "TrainConfig",
    "TrainReport",
    "UnsupportedModelError",
    "adam_step",
    "bench",
    "colorize",
    "composite_overlay",
    "compute_cam",
    "create_app",
    "create_session",
    "crop_box",
    "dumps_session",
    "evaluate_frame",
    "head_forward",
    "init_head",
    "load_backbone",
    "load_colormap",
    "load_session",
    "loads_session",
    "make_test_backbone",
    "preprocess",
    "render_overlay",
    "save_session",
    "select_saliency_class",
    "synthetic_frame",
    "train",
]
