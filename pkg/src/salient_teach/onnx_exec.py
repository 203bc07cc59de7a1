"""Numpy executor for ONNX image-classifier graphs.

Supports the op set that MobileNet-family classifiers are built from
(convolutions with groups, batch norm, clipped activations, pooling,
elementwise arithmetic, and the usual shape plumbing). Execution stops at
the *tap point*: the input of the first global-pooling node, which is the
last spatial activation the network computes before collapsing space. That
tensor is what CAM needs; everything after it is ignored.

Tensors flow in NCHW. Graphs whose declared input is NHWC (some TF
exports) are fed in their native layout; such graphs carry their own
Transpose nodes.
"""

import hashlib

import numpy as np

from .backbone import Backbone, FeatureTensor, ModelInput, DEFAULT_INPUT_RANGE
from .errors import InvalidArgumentError, ModelLoadError, UnsupportedModelError
from .onnx_codec import OnnxModel, load_model

_CONV_FAMILY = {"Conv", "ConvTranspose"}
_POOL_OPS = {"GlobalAveragePool", "AveragePool", "ReduceMean"}
# Ops that pass spatial structure through unchanged, for walking back from a
# pooling node to the convolution that produced its input.
_TRANSPARENT_OPS = {
    "Relu", "Clip", "LeakyRelu", "Sigmoid", "Tanh", "BatchNormalization",
    "Add", "Mul", "Sub", "Div", "Pad", "Identity", "Dropout",
}


def _attr(node, name, default=None):
    return node.attrs.get(name, default)


def _pair(value, default):
    if value is None:
        return (default, default)
    return (int(value[0]), int(value[1]))


def _conv_pads(node, in_h, in_w, kh, kw, sh, sw, dh, dw):
    auto = _attr(node, "auto_pad")
    if isinstance(auto, bytes):
        auto = auto.decode("ascii")
    if auto in (None, "", "NOTSET"):
        pads = _attr(node, "pads", [0, 0, 0, 0])
        return int(pads[0]), int(pads[1]), int(pads[2]), int(pads[3])
    if auto == "VALID":
        return 0, 0, 0, 0
    eff_kh = (kh - 1) * dh + 1
    eff_kw = (kw - 1) * dw + 1
    out_h = -(-in_h // sh)
    out_w = -(-in_w // sw)
    pad_h = max(0, (out_h - 1) * sh + eff_kh - in_h)
    pad_w = max(0, (out_w - 1) * sw + eff_kw - in_w)
    if auto == "SAME_UPPER":
        return pad_h // 2, pad_w // 2, pad_h - pad_h // 2, pad_w - pad_w // 2
    if auto == "SAME_LOWER":
        return pad_h - pad_h // 2, pad_w - pad_w // 2, pad_h // 2, pad_w // 2
    raise UnsupportedModelError(f"unsupported auto_pad mode {auto!r}")


def _conv(node, x, w, b):
    n, cin, in_h, in_w = x.shape
    cout, cpg, kh, kw = w.shape
    sh, sw = _pair(_attr(node, "strides"), 1)
    dh, dw = _pair(_attr(node, "dilations"), 1)
    group = int(_attr(node, "group", 1))
    pt, pl, pb, pr = _conv_pads(node, in_h, in_w, kh, kw, sh, sw, dh, dw)

    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    out_h = (in_h + pt + pb - ((kh - 1) * dh + 1)) // sh + 1
    out_w = (in_w + pl + pr - ((kw - 1) * dw + 1)) // sw + 1

    def taps(xs):
        for i in range(kh):
            for j in range(kw):
                yield i, j, xs[
                    :, :,
                    i * dh : i * dh + sh * out_h : sh,
                    j * dw : j * dw + sw * out_w : sw,
                ]

    if group == cin and cpg == 1 and cout == cin:
        # Depthwise: one filter per channel, vectorized across channels.
        out = np.zeros((n, cout, out_h, out_w), dtype=x.dtype)
        for i, j, xs in taps(xp):
            out += xs * w[None, :, 0, i, j, None, None].reshape(1, cout, 1, 1)
    else:
        opg = cout // group
        out = np.zeros((n, cout, out_h, out_w), dtype=x.dtype)
        for g in range(group):
            xg = xp[:, g * cpg : (g + 1) * cpg]
            wg = w[g * opg : (g + 1) * opg]
            acc = np.zeros((n, opg, out_h, out_w), dtype=x.dtype)
            for i, j, xs in taps(xg):
                acc += np.einsum("nchw,oc->nohw", xs, wg[:, :, i, j])
            out[:, g * opg : (g + 1) * opg] = acc
    if b is not None:
        out += b[None, :, None, None]
    return out


def _avg_pool(node, x):
    kh, kw = _pair(_attr(node, "kernel_shape"), 1)
    sh, sw = _pair(_attr(node, "strides"), 1)
    pads = _attr(node, "pads", [0, 0, 0, 0])
    pt, pl, pb, pr = (int(p) for p in pads)
    include_pad = int(_attr(node, "count_include_pad", 0))
    n, c, in_h, in_w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    ones = np.pad(np.ones((1, 1, in_h, in_w), dtype=x.dtype),
                  ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    out_h = (in_h + pt + pb - kh) // sh + 1
    out_w = (in_w + pl + pr - kw) // sw + 1
    acc = np.zeros((n, c, out_h, out_w), dtype=x.dtype)
    cnt = np.zeros((1, 1, out_h, out_w), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            acc += xp[:, :, i : i + sh * out_h : sh, j : j + sw * out_w : sw]
            cnt += ones[:, :, i : i + sh * out_h : sh, j : j + sw * out_w : sw]
    if include_pad:
        return acc / float(kh * kw)
    return acc / cnt


def _max_pool(node, x):
    kh, kw = _pair(_attr(node, "kernel_shape"), 1)
    sh, sw = _pair(_attr(node, "strides"), 1)
    pads = _attr(node, "pads", [0, 0, 0, 0])
    pt, pl, pb, pr = (int(p) for p in pads)
    n, c, in_h, in_w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)),
                constant_values=-np.inf)
    out_h = (in_h + pt + pb - kh) // sh + 1
    out_w = (in_w + pl + pr - kw) // sw + 1
    out = np.full((n, c, out_h, out_w), -np.inf, dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            np.maximum(
                out,
                xp[:, :, i : i + sh * out_h : sh, j : j + sw * out_w : sw],
                out=out,
            )
    return out


def _gemm(node, a, b, c=None):
    alpha = float(_attr(node, "alpha", 1.0))
    beta = float(_attr(node, "beta", 1.0))
    if int(_attr(node, "transA", 0)):
        a = a.T
    if int(_attr(node, "transB", 0)):
        b = b.T
    y = alpha * (a @ b)
    if c is not None:
        y = y + beta * c
    return y


def _reshape(x, shape):
    shape = [int(s) for s in shape]
    resolved = []
    for axis, s in enumerate(shape):
        if s == 0:
            resolved.append(x.shape[axis])
        else:
            resolved.append(s)
    return x.reshape(resolved)


def _clip(node, inputs):
    x = inputs[0]
    lo = _attr(node, "min")
    hi = _attr(node, "max")
    if len(inputs) > 1 and inputs[1] is not None and inputs[1].size:
        lo = float(inputs[1])
    if len(inputs) > 2 and inputs[2] is not None and inputs[2].size:
        hi = float(inputs[2])
    lo = -np.inf if lo is None else float(lo)
    hi = np.inf if hi is None else float(hi)
    return np.clip(x, lo, hi)


def _pad_op(node, inputs):
    x = inputs[0]
    mode = _attr(node, "mode", b"constant")
    if isinstance(mode, bytes):
        mode = mode.decode("ascii")
    if mode != "constant":
        raise UnsupportedModelError(f"Pad mode {mode!r} not supported")
    pads = _attr(node, "pads")
    if pads is None:
        pads = [int(p) for p in inputs[1]]
    value = float(_attr(node, "value", 0.0))
    if len(inputs) > 2 and inputs[2] is not None and inputs[2].size:
        value = float(inputs[2])
    rank = x.ndim
    before, after = pads[:rank], pads[rank:]
    return np.pad(x, list(zip(before, after)), constant_values=value)


def _softmax_nd(node, x):
    axis = int(_attr(node, "axis", -1))
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _reduce_mean(node, inputs):
    axes = _attr(node, "axes")
    if axes is None and len(inputs) > 1 and inputs[1] is not None:
        axes = [int(a) for a in inputs[1]]
    keepdims = int(_attr(node, "keepdims", 1))
    axes = tuple(int(a) for a in axes) if axes is not None else None
    return inputs[0].mean(axis=axes, keepdims=bool(keepdims))


def _execute_node(node, inputs):
    op = node.op_type
    if op == "Conv":
        return _conv(node, inputs[0], inputs[1],
                     inputs[2] if len(inputs) > 2 else None)
    if op == "BatchNormalization":
        x, scale, bias, mean, var = inputs[:5]
        eps = float(_attr(node, "epsilon", 1e-5))
        shape = (1, -1) + (1,) * (x.ndim - 2)
        return (x - mean.reshape(shape)) / np.sqrt(var.reshape(shape) + eps) \
            * scale.reshape(shape) + bias.reshape(shape)
    if op == "Relu":
        return np.maximum(inputs[0], 0)
    if op == "LeakyRelu":
        alpha = float(_attr(node, "alpha", 0.01))
        return np.where(inputs[0] >= 0, inputs[0], alpha * inputs[0])
    if op == "Sigmoid":
        return 1.0 / (1.0 + np.exp(-inputs[0]))
    if op == "Tanh":
        return np.tanh(inputs[0])
    if op == "Clip":
        return _clip(node, inputs)
    if op in ("Add", "Sum"):
        out = inputs[0]
        for extra in inputs[1:]:
            out = out + extra
        return out
    if op == "Mul":
        return inputs[0] * inputs[1]
    if op == "Sub":
        return inputs[0] - inputs[1]
    if op == "Div":
        return inputs[0] / inputs[1]
    if op == "Pad":
        return _pad_op(node, inputs)
    if op == "GlobalAveragePool":
        return inputs[0].mean(axis=(2, 3), keepdims=True)
    if op == "AveragePool":
        return _avg_pool(node, inputs[0])
    if op == "MaxPool":
        return _max_pool(node, inputs[0])
    if op == "ReduceMean":
        return _reduce_mean(node, inputs)
    if op == "Gemm":
        return _gemm(node, inputs[0], inputs[1],
                     inputs[2] if len(inputs) > 2 else None)
    if op == "MatMul":
        return inputs[0] @ inputs[1]
    if op == "Reshape":
        return _reshape(inputs[0], inputs[1])
    if op == "Flatten":
        axis = int(_attr(node, "axis", 1))
        lead = int(np.prod(inputs[0].shape[:axis])) if axis else 1
        return inputs[0].reshape(lead, -1)
    if op == "Transpose":
        perm = _attr(node, "perm")
        return np.transpose(inputs[0], perm)
    if op == "Concat":
        axis = int(_attr(node, "axis", 0))
        return np.concatenate(inputs, axis=axis)
    if op == "Squeeze":
        axes = _attr(node, "axes")
        if axes is None and len(inputs) > 1:
            axes = [int(a) for a in inputs[1]]
        return np.squeeze(inputs[0], axis=tuple(axes) if axes else None)
    if op == "Unsqueeze":
        axes = _attr(node, "axes")
        if axes is None and len(inputs) > 1:
            axes = [int(a) for a in inputs[1]]
        out = inputs[0]
        for a in sorted(axes):
            out = np.expand_dims(out, a)
        return out
    if op in ("Identity", "Dropout"):
        return inputs[0]
    if op == "Constant":
        value = _attr(node, "value")
        if value is None:
            raise UnsupportedModelError("Constant node without tensor value")
        return value
    if op == "Shape":
        return np.asarray(inputs[0].shape, dtype=np.int64)
    if op == "Gather":
        axis = int(_attr(node, "axis", 0))
        return np.take(inputs[0], inputs[1].astype(np.int64), axis=axis)
    if op == "Cast":
        to = int(_attr(node, "to", 1))
        np_dtype = {1: np.float32, 6: np.int32, 7: np.int64,
                    11: np.float64}.get(to)
        if np_dtype is None:
            raise UnsupportedModelError(f"Cast to dtype code {to} not supported")
        return inputs[0].astype(np_dtype)
    if op == "Softmax":
        return _softmax_nd(node, inputs[0])
    raise UnsupportedModelError(f"op {op!r} is not supported")


class _Runner:
    """Executes a graph up to (and optionally including) a target tensor."""

    def __init__(self, model: OnnxModel):
        self.graph = model.graph
        if not self.graph.inputs:
            raise ModelLoadError("graph declares no input")
        init_names = set(self.graph.initializers)
        data_inputs = [vi for vi in self.graph.inputs if vi.name not in init_names]
        if len(data_inputs) != 1:
            raise UnsupportedModelError(
                f"expected a single image input, found {len(data_inputs)}"
            )
        self.input_info = data_inputs[0]

    def run(self, input_array: np.ndarray, until: str | None = None,
            stop_on_unsupported: bool = False) -> dict:
        """Execute nodes in graph order, returning the tensor environment.

        With ``until`` set, execution stops as soon as that tensor exists.
        With ``stop_on_unsupported``, an unsupported node ends the pass
        instead of raising (used by the load-time calibration probe, which
        only needs shapes up to the pooling point).
        """
        tensors = dict(self.graph.initializers)
        tensors[self.input_info.name] = input_array
        for node in self.graph.nodes:
            args = [tensors.get(name) if name else None for name in node.inputs]
            missing = [n for n, a in zip(node.inputs, args) if n and a is None]
            if missing:
                if stop_on_unsupported:
                    return tensors
                raise UnsupportedModelError(
                    f"node {node.op_type} consumes unknown tensors {missing}"
                )
            try:
                result = _execute_node(node, args)
            except UnsupportedModelError:
                if stop_on_unsupported:
                    return tensors
                raise
            outputs = result if isinstance(result, tuple) else (result,)
            for name, value in zip(node.outputs, outputs):
                if name:
                    tensors[name] = value
            if until is not None and until in tensors:
                return tensors
        return tensors


def _is_global_pool(node, shapes: dict) -> bool:
    if node.op_type == "GlobalAveragePool":
        return True
    in_shape = shapes.get(node.inputs[0]) if node.inputs else None
    if in_shape is None or len(in_shape) != 4:
        return False
    if node.op_type == "AveragePool":
        kernel = node.attrs.get("kernel_shape")
        pads = node.attrs.get("pads", [0, 0, 0, 0])
        return (kernel is not None
                and tuple(int(k) for k in kernel) == tuple(in_shape[2:])
                and all(int(p) == 0 for p in pads))
    if node.op_type == "ReduceMean":
        axes = node.attrs.get("axes")
        if axes is None:
            return False
        axes = {a % 4 for a in axes}
        return axes == {2, 3}
    return False


def _has_conv_upstream(graph, tensor_name: str) -> bool:
    producers = {}
    for node in graph.nodes:
        for out in node.outputs:
            producers[out] = node
    frontier = [tensor_name]
    seen = set()
    while frontier:
        name = frontier.pop()
        if name in seen:
            continue
        seen.add(name)
        node = producers.get(name)
        if node is None:
            continue
        if node.op_type in _CONV_FAMILY:
            return True
        if node.op_type in _TRANSPARENT_OPS:
            frontier.extend(node.inputs)
    return False


class OnnxBackbone(Backbone):
    """Feature extractor backed by an ONNX image classifier.

    The tap point (the last spatial activation before global pooling) and
    the output spec are discovered at load time by running one calibration
    forward pass on a zero image; nothing about the model is hard-coded.
    """

    def __init__(self, model: OnnxModel, identity: str,
                 input_range: tuple = DEFAULT_INPUT_RANGE):
        self._runner = _Runner(model)
        self.identity = identity
        self.input_range = input_range

        shape = self._runner.input_info.shape
        if len(shape) != 4:
            raise UnsupportedModelError(
                f"expected a 4-D image input, got shape {shape}"
            )
        if shape[1] == 3 and shape[2] == shape[3]:
            self._layout = "NCHW"
        elif shape[3] == 3:
            self._layout = "NHWC"
        else:
            self._layout = "NCHW"
        side_dim = shape[2] if self._layout == "NCHW" else shape[1]
        self.input_side = int(side_dim) if side_dim else 224

        self._tap = self._locate_tap(model)
        calib = self._run_to_tap(
            np.zeros((self.input_side, self.input_side, 3), dtype=np.float64)
        )
        if calib.ndim != 4 or calib.shape[2] < 1 or calib.shape[3] < 1:
            raise UnsupportedModelError(
                "tapped activation is not a spatial (N, K, h, w) tensor"
            )
        _n, self.out_k, self.out_h, self.out_w = (int(d) for d in calib.shape)

    def _locate_tap(self, model: OnnxModel) -> str:
        # Shapes are needed to recognize AveragePool/ReduceMean acting as a
        # global pool, so record them during a probe pass over the nodes.
        # The probe tolerates unsupported ops past the pooling point; that
        # region is never executed at extract time.
        probe = np.zeros(
            (self.input_side, self.input_side, 3), dtype=np.float64
        )
        tensors = self._runner.run(
            self._to_layout(probe), stop_on_unsupported=True
        )
        shapes = {
            name: getattr(value, "shape", None)
            for name, value in tensors.items()
        }
        for node in model.graph.nodes:
            if node.op_type in _POOL_OPS and _is_global_pool(node, shapes):
                tap = node.inputs[0]
                if not _has_conv_upstream(model.graph, tap):
                    raise UnsupportedModelError(
                        "global pooling input has no convolutional ancestor"
                    )
                return tap
        raise UnsupportedModelError(
            "model has no spatial pre-pooling layer to tap for CAM"
        )

    def _to_layout(self, values: np.ndarray) -> np.ndarray:
        x = values.astype(np.float32)
        if self._layout == "NCHW":
            x = np.transpose(x, (2, 0, 1))
        return x[None, ...]

    def _run_to_tap(self, values: np.ndarray) -> np.ndarray:
        tensors = self._runner.run(self._to_layout(values), until=self._tap)
        tapped = tensors.get(self._tap)
        if tapped is None:
            raise UnsupportedModelError(
                f"tap tensor {self._tap!r} was never produced"
            )
        return tapped

    def extract(self, model_input: ModelInput) -> FeatureTensor:
        self._check_input(model_input)
        tapped = self._run_to_tap(model_input.values)
        return FeatureTensor.from_maps(tapped[0])

    @classmethod
    def load(cls, path: str) -> "OnnxBackbone":
        model = load_model(path)
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        return cls(model, identity=f"onnx:sha256:{digest}")
