"""Minimal reader/writer for the ONNX protobuf container.

Only the subset needed to load and execute inference graphs is covered:
graph nodes, initializers, value infos, node attributes, and tensor
payloads. The protobuf wire format is decoded directly; field numbers
follow the public onnx.proto3 schema, so files exported by any standard
toolchain parse here without the onnx package installed.

The writer half exists so tests can assemble small models from scratch and
round-trip them through the loader.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelLoadError

# TensorProto.DataType values we can materialize as numpy arrays.
_DTYPES = {
    1: np.dtype("<f4"),   # FLOAT
    2: np.dtype("u1"),    # UINT8
    3: np.dtype("i1"),    # INT8
    6: np.dtype("<i4"),   # INT32
    7: np.dtype("<i8"),   # INT64
    9: np.dtype("bool"),  # BOOL
    10: np.dtype("<f2"),  # FLOAT16
    11: np.dtype("<f8"),  # DOUBLE
}
_DTYPE_CODES = {v: k for k, v in _DTYPES.items()}


@dataclass
class OnnxNode:
    op_type: str
    inputs: list
    outputs: list
    attrs: dict = field(default_factory=dict)
    name: str = ""


@dataclass
class OnnxValueInfo:
    name: str
    shape: tuple = ()  # ints, or None for symbolic dims


@dataclass
class OnnxGraph:
    nodes: list
    initializers: dict  # name -> np.ndarray
    inputs: list        # OnnxValueInfo
    outputs: list       # OnnxValueInfo


@dataclass
class OnnxModel:
    graph: OnnxGraph
    opset: int = 0


# --------------------------------------------------------------------------
# wire-format primitives
# --------------------------------------------------------------------------

def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise ModelLoadError("truncated varint in model file")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise ModelLoadError("malformed varint in model file")


def _signed(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _fields(buf: bytes):
    """Yield (field_number, wire_type, value) triples from a message body.

    Length-delimited values come through as bytes, varints as ints,
    fixed32/fixed64 as raw 4/8-byte slices.
    """
    pos = 0
    while pos < len(buf):
        tag, pos = _read_varint(buf, pos)
        number, wire = tag >> 3, tag & 0x7
        if wire == 0:
            value, pos = _read_varint(buf, pos)
        elif wire == 1:
            value, pos = buf[pos : pos + 8], pos + 8
        elif wire == 2:
            length, pos = _read_varint(buf, pos)
            if pos + length > len(buf):
                raise ModelLoadError("truncated field in model file")
            value, pos = buf[pos : pos + length], pos + length
        elif wire == 5:
            value, pos = buf[pos : pos + 4], pos + 4
        else:
            raise ModelLoadError(f"unsupported wire type {wire} in model file")
        yield number, wire, value


def _packed_ints(value, wire) -> list[int]:
    if wire == 0:
        return [_signed(value)]
    out = []
    pos = 0
    while pos < len(value):
        v, pos = _read_varint(value, pos)
        out.append(_signed(v))
    return out


def _packed_floats(value, wire) -> list[float]:
    if wire == 5:
        return [struct.unpack("<f", value)[0]]
    return list(np.frombuffer(value, dtype="<f4"))


# --------------------------------------------------------------------------
# message parsers
# --------------------------------------------------------------------------

def _parse_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    data_type = 1
    raw = None
    float_data: list[float] = []
    int_data: list[int] = []
    double_raw = b""
    name = ""
    for number, wire, value in _fields(buf):
        if number == 1:
            dims.extend(_packed_ints(value, wire))
        elif number == 2:
            data_type = value
        elif number == 4:
            float_data.extend(_packed_floats(value, wire))
        elif number in (5, 7):
            int_data.extend(_packed_ints(value, wire))
        elif number == 8:
            name = value.decode("utf-8")
        elif number == 9:
            raw = value
        elif number == 10:
            double_raw += value if wire == 1 else value
        elif number == 13:
            raise ModelLoadError(
                f"tensor {name!r} uses external data, which is not supported"
            )
    if data_type not in _DTYPES:
        raise ModelLoadError(f"unsupported tensor data type {data_type}")
    dtype = _DTYPES[data_type]
    if raw is not None:
        arr = np.frombuffer(raw, dtype=dtype)
    elif float_data:
        arr = np.asarray(float_data, dtype=dtype)
    elif int_data:
        arr = np.asarray(int_data, dtype=dtype)
    elif double_raw:
        arr = np.frombuffer(double_raw, dtype="<f8")
    else:
        arr = np.zeros(int(np.prod(dims)) if dims else 0, dtype=dtype)
    try:
        arr = arr.reshape(dims)
    except ValueError as exc:
        raise ModelLoadError(f"tensor {name!r} payload does not match dims") from exc
    if dtype == np.dtype("<f2"):
        arr = arr.astype(np.float32)
    return name, arr


def _parse_attribute(buf: bytes) -> tuple[str, object]:
    name = ""
    value: object = None
    ints: list[int] = []
    floats: list[float] = []
    strings: list[bytes] = []
    for number, wire, raw in _fields(buf):
        if number == 1:
            name = raw.decode("utf-8")
        elif number == 2:
            value = struct.unpack("<f", raw)[0]
        elif number == 3:
            value = _signed(raw)
        elif number == 4:
            value = raw
        elif number == 5:
            value = _parse_tensor(raw)[1]
        elif number == 7:
            floats.extend(_packed_floats(raw, wire))
        elif number == 8:
            ints.extend(_packed_ints(raw, wire))
        elif number == 9:
            strings.append(raw)
    if ints:
        value = ints
    elif floats:
        value = floats
    elif strings:
        value = strings
    return name, value


def _parse_node(buf: bytes) -> OnnxNode:
    node = OnnxNode(op_type="", inputs=[], outputs=[])
    for number, _wire, value in _fields(buf):
        if number == 1:
            node.inputs.append(value.decode("utf-8"))
        elif number == 2:
            node.outputs.append(value.decode("utf-8"))
        elif number == 3:
            node.name = value.decode("utf-8")
        elif number == 4:
            node.op_type = value.decode("utf-8")
        elif number == 5:
            attr_name, attr_value = _parse_attribute(value)
            node.attrs[attr_name] = attr_value
    return node


def _parse_value_info(buf: bytes) -> OnnxValueInfo:
    name = ""
    shape: list = []
    for number, _wire, value in _fields(buf):
        if number == 1:
            name = value.decode("utf-8")
        elif number == 2:  # TypeProto
            for tnum, _tw, tval in _fields(value):
                if tnum != 1:  # tensor_type
                    continue
                for fnum, _fw, fval in _fields(tval):
                    if fnum != 2:  # shape
                        continue
                    for snum, _sw, sval in _fields(fval):
                        if snum != 1:  # dim
                            continue
                        dim = None
                        for dnum, _dw, dval in _fields(sval):
                            if dnum == 1:
                                dim = _signed(dval)
                        shape.append(dim)
    return OnnxValueInfo(name=name, shape=tuple(shape))


def _parse_graph(buf: bytes) -> OnnxGraph:
    graph = OnnxGraph(nodes=[], initializers={}, inputs=[], outputs=[])
    for number, _wire, value in _fields(buf):
        if number == 1:
            graph.nodes.append(_parse_node(value))
        elif number == 5:
            name, arr = _parse_tensor(value)
            graph.initializers[name] = arr
        elif number == 11:
            graph.inputs.append(_parse_value_info(value))
        elif number == 12:
            graph.outputs.append(_parse_value_info(value))
    return graph


def parse_model(data: bytes) -> OnnxModel:
    graph = None
    opset = 0
    for number, _wire, value in _fields(data):
        if number == 7:
            graph = _parse_graph(value)
        elif number == 8:
            domain, version = "", 0
            for onum, _ow, oval in _fields(value):
                if onum == 1:
                    domain = oval.decode("utf-8")
                elif onum == 2:
                    version = oval
            if domain == "":
                opset = max(opset, version)
    if graph is None:
        raise ModelLoadError("file contains no ONNX graph")
    return OnnxModel(graph=graph, opset=opset)


def load_model(path: str) -> OnnxModel:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ModelLoadError(f"cannot read model file {path}: {exc}") from exc
    try:
        return parse_model(data)
    except ModelLoadError as exc:
        raise ModelLoadError(f"cannot parse model file {path}: {exc}") from exc


# --------------------------------------------------------------------------
# writer (used by tests to assemble small models)
# --------------------------------------------------------------------------

def _varint(value: int) -> bytes:
    if value < 0:
        value += 1 << 64
    out = bytearray()
    while True:
        bits = value & 0x7F
        value >>= 7
        if value:
            out.append(bits | 0x80)
        else:
            out.append(bits)
            return bytes(out)


def _tag(number: int, wire: int) -> bytes:
    return _varint((number << 3) | wire)


def _len_field(number: int, payload: bytes) -> bytes:
    return _tag(number, 2) + _varint(len(payload)) + payload


def _string_field(number: int, text: str) -> bytes:
    return _len_field(number, text.encode("utf-8"))


def _encode_tensor(name: str, arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    dtype = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    if np.dtype(dtype) not in _DTYPE_CODES:
        arr = arr.astype(np.float32)
        dtype = arr.dtype
    out = b""
    for d in arr.shape:
        out += _tag(1, 0) + _varint(d)
    out += _tag(2, 0) + _varint(_DTYPE_CODES[np.dtype(dtype)])
    out += _string_field(8, name)
    out += _len_field(9, np.ascontiguousarray(arr).tobytes())
    return out


def _encode_attribute(name: str, value) -> bytes:
    out = _string_field(1, name)
    if isinstance(value, bool):
        out += _tag(3, 0) + _varint(int(value)) + _tag(20, 0) + _varint(2)
    elif isinstance(value, int):
        out += _tag(3, 0) + _varint(value) + _tag(20, 0) + _varint(2)
    elif isinstance(value, float):
        out += _tag(2, 5) + struct.pack("<f", value) + _tag(20, 0) + _varint(1)
    elif isinstance(value, (bytes, str)):
        raw = value.encode("utf-8") if isinstance(value, str) else value
        out += _len_field(4, raw) + _tag(20, 0) + _varint(3)
    elif isinstance(value, np.ndarray):
        out += _len_field(5, _encode_tensor(name, value)) + _tag(20, 0) + _varint(4)
    elif isinstance(value, (list, tuple)) and all(isinstance(v, int) for v in value):
        payload = b"".join(_varint(v) for v in value)
        out += _len_field(8, payload) + _tag(20, 0) + _varint(7)
    elif isinstance(value, (list, tuple)):
        payload = b"".join(struct.pack("<f", float(v)) for v in value)
        out += _len_field(7, payload) + _tag(20, 0) + _varint(6)
    else:
        raise TypeError(f"cannot encode attribute {name}={value!r}")
    return out


def _encode_node(node: OnnxNode) -> bytes:
    out = b""
    for name in node.inputs:
        out += _string_field(1, name)
    for name in node.outputs:
        out += _string_field(2, name)
    if node.name:
        out += _string_field(3, node.name)
    out += _string_field(4, node.op_type)
    for attr_name, attr_value in node.attrs.items():
        out += _len_field(5, _encode_attribute(attr_name, attr_value))
    return out


def _encode_value_info(name: str, shape) -> bytes:
    dims = b""
    for d in shape or ():
        dim_body = _tag(1, 0) + _varint(int(d)) if d is not None else b""
        dims += _len_field(1, dim_body)
    tensor = _tag(1, 0) + _varint(1) + _len_field(2, dims)  # elem_type FLOAT
    type_proto = _len_field(1, tensor)
    return _string_field(1, name) + _len_field(2, type_proto)


def build_model(
    nodes: list,
    inputs: list,          # (name, shape) pairs
    outputs: list,         # (name, shape) pairs
    initializers: dict | None = None,
    opset: int = 13,
) -> bytes:
    """Serialize a small ONNX model; the inverse of :func:`parse_model`."""
    graph = b""
    for node in nodes:
        graph += _len_field(1, _encode_node(node))
    graph += _string_field(2, "graph")
    for name, arr in (initializers or {}).items():
        graph += _len_field(5, _encode_tensor(name, arr))
    for name, shape in inputs:
        graph += _len_field(11, _encode_value_info(name, shape))
    for name, shape in outputs:
        graph += _len_field(12, _encode_value_info(name, shape))

    opset_body = _string_field(1, "") + _tag(2, 0) + _varint(opset)
    model = _tag(1, 0) + _varint(8)  # ir_version
    model += _string_field(2, "salient-teach-test")
    model += _len_field(7, graph)
    model += _len_field(8, opset_body)
    return model
